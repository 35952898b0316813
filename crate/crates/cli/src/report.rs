//! Text, CSV and JSON renderings of command results.

use anyhow::Result;
use infostyle::metric::LambdaScore;
use infostyle::pipeline::TrainReport;
use infostyle::triplets::{agreement_table, oracle_consistency, AgreementRow, TableMode, TripletResponses};
use infostyle::Hit;
use serde::Serialize;
use std::fmt::Write;
use std::path::Path;

pub const THRESHOLDS: [f64; 6] = [50.0, 60.0, 70.0, 80.0, 90.0, 100.0];

fn pct(x: f64) -> String {
    format!("{x:.2}%")
}

#[derive(Serialize)]
pub struct Failure {
    pub id: String,
    pub path: String,
    pub error: String,
}

#[derive(Serialize)]
pub struct ExtractSummary {
    pub images: usize,
    pub features: Vec<String>,
    pub records: usize,
    pub skipped: Vec<Failure>,
    pub out: String,
}

impl ExtractSummary {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{} images x {} features -> {} records in {}\n",
            self.images,
            self.features.len(),
            self.records,
            self.out
        );
        for f in &self.skipped {
            let _ = writeln!(s, "skipped {} ({}): {}", f.id, f.path, f.error);
        }
        s
    }
}

#[derive(Serialize)]
pub struct Analysis {
    pub triplets: usize,
    pub cumulative: Vec<AgreementRow>,
    pub banded: Vec<AgreementRow>,
    /// Percent of all responses agreeing with their triplet's majority.
    pub oracle: f64,
}

impl Analysis {
    pub fn compute(ts: &[TripletResponses]) -> Result<Self> {
        Ok(Self {
            triplets: ts.len(),
            cumulative: agreement_table(ts, &THRESHOLDS, TableMode::Cumulative)?,
            banded: agreement_table(ts, &THRESHOLDS, TableMode::Banded)?,
            oracle: 100.0 * oracle_consistency(ts)?,
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let rows = |s: &mut String, title: &str, rows: &[AgreementRow], prefix: &str| {
            let _ = writeln!(s, "{title}");
            let _ = writeln!(s, "{:<10} {:>9} {:>10} {:>10}", "agreement", "triplets", "responses", "accuracy");
            for r in rows {
                let acc = r.accuracy.map_or_else(|| "-".to_string(), pct);
                let _ = writeln!(
                    s,
                    "{:<10} {:>9} {:>10} {:>10}",
                    format!("{prefix}{}%", r.label()),
                    r.triplets,
                    r.responses,
                    acc
                );
            }
        };
        rows(&mut s, "Cumulative agreement", &self.cumulative, ">=");
        s.push('\n');
        rows(&mut s, "Agreement bands", &self.banded, "");
        let _ = writeln!(s, "\nOracle consistency: {}", pct(self.oracle));
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = String::from("mode,threshold,upper,triplets,responses,majority_votes,accuracy\n");
        for (mode, rows) in [("cumulative", &self.cumulative), ("banded", &self.banded)] {
            for r in rows.iter() {
                let _ = writeln!(
                    s,
                    "{mode},{},{},{},{},{},{}",
                    r.threshold,
                    r.upper.map(|u| u.to_string()).unwrap_or_default(),
                    r.triplets,
                    r.responses,
                    r.majority_votes,
                    r.accuracy.map(|a| format!("{a:.2}")).unwrap_or_default()
                );
            }
        }
        let _ = writeln!(s, "oracle,,,,,,{:.2}", self.oracle);
        s
    }
}

#[derive(Serialize)]
pub struct TrainSummary {
    pub config: String,
    pub dims: usize,
    pub lambda: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub ties_excluded: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub baseline_accuracy: f64,
    pub oracle: f64,
    pub converged: bool,
    pub iterations: usize,
    pub nonzero_weights: usize,
    pub cross_validation: Option<Vec<LambdaScore>>,
    pub model: String,
    pub model_fingerprint: String,
}

impl TrainSummary {
    pub fn new(rep: &TrainReport, seed: u64, out: &Path) -> Result<Self> {
        let m = &rep.model;
        Ok(Self {
            config: m.feature_config.to_string(),
            dims: m.dim(),
            lambda: m.lambda,
            seed,
            n_train: rep.n_train,
            n_test: rep.n_test,
            ties_excluded: rep.n_ties,
            train_accuracy: rep.train_accuracy,
            test_accuracy: rep.test_accuracy,
            baseline_accuracy: rep.baseline_accuracy,
            oracle: rep.oracle,
            converged: m.training_meta.converged,
            iterations: m.training_meta.iterations,
            nonzero_weights: m.weights.iter().filter(|&&w| w > 1e-6).count(),
            cross_validation: rep.lambda_selection.as_ref().map(|s| s.scores.clone()),
            model: out.display().to_string(),
            model_fingerprint: m.fingerprint()?,
        })
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "Triplets: {} train / {} test, {} ties excluded (seed {})\n",
            self.n_train, self.n_test, self.ties_excluded, self.seed
        );
        if let Some(cv) = &self.cross_validation {
            let _ = writeln!(s, "Cross-validation:");
            for sc in cv {
                let _ = writeln!(s, "  lambda {:<8} mean accuracy {}", sc.lambda, pct(100.0 * sc.mean_accuracy));
            }
        }
        let _ = writeln!(
            s,
            "Lambda: {}  iterations: {}{}  nonzero weights: {}/{}\n",
            self.lambda,
            self.iterations,
            if self.converged { "" } else { " (not converged)" },
            self.nonzero_weights,
            self.dims
        );
        let _ = writeln!(s, "{:<32} {:>6} {:>10}", "Method", "Dims", "Accuracy");
        let _ = writeln!(s, "{:<32} {:>6} {:>10}", self.config, self.dims, pct(100.0 * self.test_accuracy));
        let _ = writeln!(s, "{:<32} {:>6} {:>10}", "Baseline (unit weights)", self.dims, pct(100.0 * self.baseline_accuracy));
        let _ = writeln!(s, "{:<32} {:>6} {:>10}", "Oracle", "-", pct(100.0 * self.oracle));
        let _ = writeln!(s, "\nTrain accuracy: {}", pct(100.0 * self.train_accuracy));
        let _ = writeln!(s, "Model: {} ({})", self.model, self.model_fingerprint);
        s
    }
}

#[derive(Serialize)]
pub struct AblationRow {
    pub config: String,
    pub dims: usize,
    pub lambda: f64,
    pub accuracy: f64,
    /// Unit weights on this configuration's features.
    pub baseline_accuracy: f64,
}

#[derive(Serialize)]
pub struct AblationTable {
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<AblationRow>,
    /// Unit weights on the first configuration's features.
    pub baseline: f64,
    pub oracle: f64,
}

impl AblationTable {
    pub fn new(reports: &[TrainReport]) -> Self {
        let rows = reports
            .iter()
            .map(|r| AblationRow {
                config: r.model.feature_config.to_string(),
                dims: r.model.dim(),
                lambda: r.model.lambda,
                accuracy: r.test_accuracy,
                baseline_accuracy: r.baseline_accuracy,
            })
            .collect();
        Self {
            n_train: reports[0].n_train,
            n_test: reports[0].n_test,
            rows,
            baseline: reports[0].baseline_accuracy,
            oracle: reports[0].oracle,
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!("{} train / {} test triplets\n\n", self.n_train, self.n_test);
        let _ = writeln!(s, "{:<36} {:>6} {:>10} {:>10}", "Method", "Dims", "Lambda", "Accuracy");
        for r in &self.rows {
            let _ = writeln!(s, "{:<36} {:>6} {:>10} {:>10}", r.config, r.dims, r.lambda, pct(100.0 * r.accuracy));
        }
        let _ = writeln!(
            s,
            "{:<36} {:>6} {:>10} {:>10}",
            "Baseline (unit weights)",
            self.rows[0].dims,
            "-",
            pct(100.0 * self.baseline)
        );
        let _ = writeln!(s, "{:<36} {:>6} {:>10} {:>10}", "Oracle", "-", "-", pct(100.0 * self.oracle));
        s
    }
}

#[derive(Serialize)]
pub struct SearchListing {
    pub query: String,
    pub results: Vec<Hit>,
}

impl SearchListing {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (rank, h) in self.results.iter().enumerate() {
            let _ = writeln!(s, "{:>3}  {:<24} {:.6}", rank + 1, h.id, h.distance);
        }
        s
    }
}
