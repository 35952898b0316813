//! Diagonal weighted metric learned from triplet comparisons.
//!
//! The distance between feature vectors x and y under non-negative weights w
//! is `sqrt(Σ wᵢ (xᵢ − yᵢ)²)`. A rater shown reference A with options B and C
//! is modeled as choosing B with probability `1 / (1 + exp(D(A,B) − D(A,C)))`,
//! and the weights are fit by minimizing the negative log-likelihood of the
//! majority choices plus an L1 penalty `λ Σ wᵢ`, subject to `w ≥ 0`.

mod lbfgsb;
mod model;
mod objective;
mod train;

pub use lbfgsb::{minimize_bounded, LbfgsbOptions, Minimization, StopReason};
pub use model::{MetricModel, TrainingMeta, MODEL_VERSION};
pub use objective::{objective, Objective, DISTANCE_EPS};
pub use train::{
    cross_validate, select_lambda, train, train_detailed, LambdaScore, LambdaSelection,
    TrainOptions, TrainOutcome, DEFAULT_LAMBDA_GRID,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Reference, majority choice and rejected option, already embedded in the
/// model's feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedTriplet {
    pub f_ref: Vec<f64>,
    pub f_winner: Vec<f64>,
    pub f_loser: Vec<f64>,
}

impl EmbeddedTriplet {
    pub fn new(f_ref: Vec<f64>, f_winner: Vec<f64>, f_loser: Vec<f64>) -> Result<Self> {
        let d = f_ref.len();
        for v in [&f_winner, &f_loser] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: v.len(),
                });
            }
        }
        Ok(Self {
            f_ref,
            f_winner,
            f_loser,
        })
    }

    pub fn dim(&self) -> usize {
        self.f_ref.len()
    }

    pub fn flipped(&self) -> Self {
        Self {
            f_ref: self.f_ref.clone(),
            f_winner: self.f_loser.clone(),
            f_loser: self.f_winner.clone(),
        }
    }
}

/// Weighted squared distance `Σ wᵢ (xᵢ − yᵢ)²` without validation.
#[inline]
pub(crate) fn weighted_sq(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter()
        .zip(x.iter().zip(y))
        .map(|(wi, (a, b))| {
            let d = a - b;
            wi * d * d
        })
        .sum()
}

/// Exact weighted distance.
pub fn distance(w: &[f64], fx: &[f64], fy: &[f64]) -> Result<f64> {
    for v in [fx, fy] {
        if v.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                actual: v.len(),
            });
        }
    }
    if w.iter().chain(fx).chain(fy).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if w.iter().any(|&wi| wi < 0.0) {
        return Err(Error::InvalidParam("weights must be non-negative".into()));
    }
    Ok(weighted_sq(w, fx, fy).sqrt())
}

/// Probability that the option at distance `d_ab` is chosen over the one at
/// `d_ac`.
pub fn choice_probability(d_ab: f64, d_ac: f64) -> f64 {
    logistic(d_ac - d_ab)
}

/// `1 / (1 + exp(−z))` without overflow.
#[inline]
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(z))` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Fraction of triplets whose winner is strictly closer to the reference
/// than the loser. Exact ties count as wrong.
pub fn evaluate(w: &[f64], test: &[EmbeddedTriplet]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut correct = 0usize;
    for t in test {
        let d_win = distance(w, &t.f_ref, &t.f_winner)?;
        let d_lose = distance(w, &t.f_ref, &t.f_loser)?;
        if d_win < d_lose {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}
