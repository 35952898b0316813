use super::{distance, evaluate, EmbeddedTriplet};
use crate::error::{Error, Result};
use crate::json::to_precise_vec;
use crate::features::FeatureKind;
use crate::reduction::{FeatureConfig, PcaParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train_triplets: usize,
    pub final_objective: f64,
    pub seed: u64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub converged: bool,
}

/// Learned diagonal weights together with everything needed to embed a new
/// image: the feature recipe and the fitted PCA projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    pub version: u32,
    pub feature_config: FeatureConfig,
    pub pca: BTreeMap<String, PcaParams>,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub training_meta: TrainingMeta,
}

impl MetricModel {
    pub fn new(
        feature_config: FeatureConfig,
        pca: BTreeMap<String, PcaParams>,
        weights: Vec<f64>,
        lambda: f64,
        training_meta: TrainingMeta,
    ) -> Result<Self> {
        let model = Self {
            version: MODEL_VERSION,
            feature_config,
            pca,
            weights,
            lambda,
            training_meta,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::InvalidParam(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParam(
                "model weights must be finite and non-negative".into(),
            ));
        }
        let mut expected = Some(0usize);
        for spec in self.feature_config.features() {
            let part = match spec.pca_dim {
                Some(_) => Some(
                    self.pca
                        .get(&spec.name)
                        .ok_or_else(|| Error::MissingPca(spec.name.clone()))?
                        .target_dim,
                ),
                None => spec.name.parse::<FeatureKind>().ok().map(FeatureKind::window_len),
            };
            expected = expected.zip(part).map(|(a, b)| a + b);
        }
        // unknown raw features leave the width unchecked
        match expected {
            Some(d) if d != self.weights.len() => Err(Error::DimensionMismatch {
                expected: d,
                actual: self.weights.len(),
            }),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn distance(&self, fx: &[f64], fy: &[f64]) -> Result<f64> {
        distance(&self.weights, fx, fy)
    }

    pub fn evaluate(&self, test: &[EmbeddedTriplet]) -> Result<f64> {
        evaluate(&self.weights, test)
    }

    /// Canonical file contents: compact JSON, 17 significant digits, trailing
    /// newline.
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = to_precise_vec(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let model: Self = serde_json::from_slice(bytes)?;
        model.validate()?;
        Ok(model)
    }

    /// SHA-256 of the canonical file contents, hex encoded.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_json_bytes()?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_bytes(&std::fs::read(path)?)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::fit_pca;
    use crate::FeatureVector;

    fn sample_model() -> MetricModel {
        let samples: Vec<_> = (0..4)
            .map(|i| FeatureVector::new("hog16", vec![i as f64 / 3.0, (i * i) as f64 / 7.0, 0.1]))
            .collect();
        let pca = BTreeMap::from([("hog16".to_string(), fit_pca(&samples, 2).unwrap())]);
        MetricModel::new(
            "toy:raw+hog16:2".parse().unwrap(),
            pca,
            vec![0.1, 1.0 / 3.0, 0.0],
            1.0,
            TrainingMeta {
                n_train_triplets: 10,
                final_objective: 6.931471805599453,
                seed: 42,
                iterations: 7,
                converged: true,
            },
        )
        .unwrap()
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let m = sample_model();
        let bytes = m.to_json_bytes().unwrap();
        let back = MetricModel::from_json_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json_bytes().unwrap(), bytes);
        assert_eq!(back.fingerprint().unwrap(), m.fingerprint().unwrap());
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["version"], 1);
        assert!(v["pca"]["hog16"]["components"].is_array());
    }

    #[test]
    fn rejects_negative_weights() {
        let mut m = sample_model();
        m.weights[0] = -1.0;
        let bytes = serde_json::to_vec(&m).unwrap();
        assert!(MetricModel::from_json_bytes(&bytes).is_err());
    }

    #[test]
    fn rejects_missing_pca() {
        let mut m = sample_model();
        m.pca.clear();
        let bytes = serde_json::to_vec(&m).unwrap();
        assert!(matches!(MetricModel::from_json_bytes(&bytes), Err(Error::MissingPca(_))));
    }
}
