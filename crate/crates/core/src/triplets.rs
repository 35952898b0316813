//! Crowdsourced triplet responses: majority labels, agreement tables and
//! annotator consistency.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Read;

/// Header of the triplet CSV.
pub const CSV_HEADER: [&str; 6] = [
    "triplet_id",
    "ref_id",
    "option_b_id",
    "option_c_id",
    "votes_b",
    "votes_c",
];

/// Aggregated rater votes for one (reference, B, C) comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletResponses {
    pub triplet_id: String,
    pub ref_id: String,
    pub option_b_id: String,
    pub option_c_id: String,
    pub votes_b: u32,
    pub votes_c: u32,
}

impl TripletResponses {
    pub fn total_votes(&self) -> u64 {
        self.votes_b as u64 + self.votes_c as u64
    }

    /// Votes for the more popular option (either side of a tie).
    pub fn majority_votes(&self) -> u64 {
        self.votes_b.max(self.votes_c) as u64
    }

    fn at_least(&self, pct: f64) -> bool {
        // majority/total >= pct/100, exact for integral percentages
        self.majority_votes() as f64 * 100.0 >= pct * self.total_votes() as f64
    }
}

/// A triplet with a strict majority winner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledTriplet {
    pub triplet_id: String,
    pub ref_id: String,
    pub winner_id: String,
    pub loser_id: String,
    /// Majority votes over all votes, in (0.5, 1].
    pub agreement: f64,
}

impl LabeledTriplet {
    /// The same comparison with winner and loser exchanged.
    pub fn flipped(&self) -> Self {
        Self {
            winner_id: self.loser_id.clone(),
            loser_id: self.winner_id.clone(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MajorityLabel {
    Labeled(LabeledTriplet),
    Tie,
}

pub fn majority_label(t: &TripletResponses) -> MajorityLabel {
    let (winner, loser, votes) = match t.votes_b.cmp(&t.votes_c) {
        std::cmp::Ordering::Equal => return MajorityLabel::Tie,
        std::cmp::Ordering::Greater => (&t.option_b_id, &t.option_c_id, t.votes_b),
        std::cmp::Ordering::Less => (&t.option_c_id, &t.option_b_id, t.votes_c),
    };
    MajorityLabel::Labeled(LabeledTriplet {
        triplet_id: t.triplet_id.clone(),
        ref_id: t.ref_id.clone(),
        winner_id: winner.clone(),
        loser_id: loser.clone(),
        agreement: votes as f64 / t.total_votes() as f64,
    })
}

/// Labeled triplets plus the ids of tied triplets, which carry no label.
#[derive(Clone, Debug, Default)]
pub struct LabelSummary {
    pub labeled: Vec<LabeledTriplet>,
    pub ties: Vec<String>,
}

pub fn label_all(ts: &[TripletResponses]) -> LabelSummary {
    let mut out = LabelSummary::default();
    for t in ts {
        match majority_label(t) {
            MajorityLabel::Labeled(l) => out.labeled.push(l),
            MajorityLabel::Tie => out.ties.push(t.triplet_id.clone()),
        }
    }
    out
}

/// Parse the triplet CSV. Errors carry 1-based line numbers (the header is
/// line 1).
pub fn read_triplets_csv<R: Read>(reader: R) -> Result<Vec<TripletResponses>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for record in rdr.deserialize::<TripletResponses>() {
        let line = out.len() + 2;
        let t = record.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Parse { line, message };
        if t.total_votes() == 0 {
            return Err(bad(format!("triplet `{}` has no votes", t.triplet_id)));
        }
        if t.ref_id == t.option_b_id || t.ref_id == t.option_c_id || t.option_b_id == t.option_c_id
        {
            return Err(bad(format!(
                "triplet `{}` repeats an image id",
                t.triplet_id
            )));
        }
        if !ids.insert(t.triplet_id.clone()) {
            return Err(bad(format!("duplicate triplet id `{}`", t.triplet_id)));
        }
        out.push(t);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

pub fn write_triplets_csv<W: std::io::Write>(w: W, ts: &[TripletResponses]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for t in ts {
        wtr.serialize(t).map_err(|e| Error::Io(e.into()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableMode {
    /// Rows keep every triplet with agreement ≥ θ.
    Cumulative,
    /// Rows keep agreement in [θᵢ, θᵢ₊₁); the last row is open-ended.
    Banded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    /// Lower agreement bound, percent.
    pub threshold: f64,
    /// Exclusive upper bound for banded rows.
    pub upper: Option<f64>,
    pub responses: u64,
    pub triplets: usize,
    pub majority_votes: u64,
    /// Majority share of responses, percent; `None` for an empty row.
    pub accuracy: Option<f64>,
}

impl AgreementRow {
    pub fn label(&self) -> String {
        match self.upper {
            Some(u) => format!("{}-{}", self.threshold, u),
            None => format!("{}", self.threshold),
        }
    }
}

/// Agreement analysis over thresholds given in percent.
///
/// Tied triplets have agreement exactly 50% and count their majority-side
/// votes as correct, so they appear in any row starting at 50.
pub fn agreement_table(
    ts: &[TripletResponses],
    thresholds: &[f64],
    mode: TableMode,
) -> Result<Vec<AgreementRow>> {
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam(
            "thresholds must be strictly ascending".into(),
        ));
    }
    let rows = thresholds
        .iter()
        .enumerate()
        .map(|(i, &lo)| {
            let upper = match mode {
                TableMode::Cumulative => None,
                TableMode::Banded => thresholds.get(i + 1).copied(),
            };
            let members = ts
                .iter()
                .filter(|t| t.at_least(lo) && upper.is_none_or(|u| !t.at_least(u)));
            let (mut responses, mut majority_votes, mut triplets) = (0u64, 0u64, 0usize);
            for t in members {
                responses += t.total_votes();
                majority_votes += t.majority_votes();
                triplets += 1;
            }
            AgreementRow {
                threshold: lo,
                upper,
                responses,
                triplets,
                majority_votes,
                accuracy: (responses > 0)
                    .then(|| 100.0 * majority_votes as f64 / responses as f64),
            }
        })
        .collect();
    Ok(rows)
}

/// Fraction of all responses that picked their triplet's majority option.
pub fn oracle_consistency(ts: &[TripletResponses]) -> Result<f64> {
    let total: u64 = ts.iter().map(TripletResponses::total_votes).sum();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let majority: u64 = ts.iter().map(TripletResponses::majority_votes).sum();
    Ok(majority as f64 / total as f64)
}

/// Seeded shuffle; the first `n_train` go to training, the rest to test.
pub fn split_train_test<T: Clone>(ts: &[T], n_train: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if n_train >= ts.len() {
        return Err(Error::InvalidParam(format!(
            "n_train ({n_train}) must be smaller than the number of triplets ({})",
            ts.len()
        )));
    }
    let mut shuffled = ts.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}
