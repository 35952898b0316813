use super::lbfgsb::{minimize_bounded, LbfgsbOptions, StopReason};
use super::objective::Objective;
use super::{evaluate, EmbeddedTriplet};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Candidate penalty weights tried by cross-validation when none is given.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Projected-gradient infinity-norm tolerance.
    pub tolerance: f64,
    pub memory: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        let d = LbfgsbOptions::default();
        Self {
            max_iters: d.max_iters,
            tolerance: d.grad_tol,
            memory: d.memory,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: Vec<f64>,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub reason: StopReason,
    pub trace: Vec<f64>,
}

impl TrainOutcome {
    pub fn converged(&self) -> bool {
        matches!(
            self.reason,
            StopReason::GradientTolerance | StopReason::ObjectiveTolerance
        )
    }
}

/// Fit non-negative weights starting from the isotropic `wᵢ = 1/d`.
pub fn train(data: &[EmbeddedTriplet], lambda: f64, opts: &TrainOptions) -> Result<Vec<f64>> {
    train_detailed(data, lambda, opts).map(|o| o.weights)
}

/// As [`train`], with the optimizer trace; non-convergence is logged as a
/// warning and the last iterate returned.
pub fn train_detailed(
    data: &[EmbeddedTriplet],
    lambda: f64,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let out = fit(data, lambda, opts)?;
    if !out.converged() {
        log::warn!(
            "training stopped without converging ({:?}) after {} iterations",
            out.reason,
            out.iterations
        );
    }
    Ok(out)
}

fn fit(data: &[EmbeddedTriplet], lambda: f64, opts: &TrainOptions) -> Result<TrainOutcome> {
    let objective = Objective::new(data, lambda)?;
    let d = objective.dim();
    if d == 0 {
        return Err(Error::InvalidParam("feature dimension is zero".into()));
    }
    let x0 = vec![1.0 / d as f64; d];
    let lbfgs = LbfgsbOptions {
        memory: opts.memory,
        grad_tol: opts.tolerance,
        max_iters: opts.max_iters,
        ..Default::default()
    };
    let result = minimize_bounded(
        |w| objective.evaluate(w),
        &x0,
        &vec![0.0; d],
        &vec![f64::INFINITY; d],
        &lbfgs,
    );
    log::debug!(
        "lambda {lambda}: {:?} after {} iterations, projected gradient norm {:.3e}",
        result.reason,
        result.iterations,
        result.projected_grad_norm
    );
    Ok(TrainOutcome {
        initial_objective: result.trace[0],
        final_objective: result.f,
        iterations: result.iterations,
        reason: result.reason,
        trace: result.trace,
        weights: result.x,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub scores: Vec<LambdaScore>,
}

/// Held-out accuracy of every grid value over seeded contiguous folds.
pub fn cross_validate(
    data: &[EmbeddedTriplet],
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<Vec<LambdaScore>> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("lambda grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {folds}")));
    }
    if data.len() < folds {
        return Err(Error::InsufficientData(format!(
            "{} triplets cannot fill {folds} folds",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let bounds: Vec<(usize, usize)> = (0..folds)
        .map(|k| (k * data.len() / folds, (k + 1) * data.len() / folds))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |k| (g, k)))
        .collect();
    let accuracies = jobs
        .par_iter()
        .map(|&(g, k)| {
            let (lo, hi) = bounds[k];
            let held: Vec<EmbeddedTriplet> = order[lo..hi].iter().map(|&i| data[i].clone()).collect();
            let fit_set: Vec<EmbeddedTriplet> = order[..lo]
                .iter()
                .chain(&order[hi..])
                .map(|&i| data[i].clone())
                .collect();
            let out = fit(&fit_set, grid[g], opts)?;
            Ok((evaluate(&out.weights, &held)?, out.converged()))
        })
        .collect::<Result<Vec<(f64, bool)>>>()?;
    let stalled = accuracies.iter().filter(|(_, ok)| !ok).count();
    if stalled > 0 {
        log::warn!(
            "{stalled} of {} cross-validation fits stopped without converging",
            accuracies.len()
        );
    }
    let accuracies: Vec<f64> = accuracies.into_iter().map(|(a, _)| a).collect();

    let scores = grid
        .iter()
        .enumerate()
        .map(|(g, &lambda)| {
            let fold_accuracies = accuracies[g * folds..(g + 1) * folds].to_vec();
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
            log::info!("lambda {lambda}: fold accuracies {fold_accuracies:?}, mean {mean_accuracy:.4}");
            LambdaScore {
                lambda,
                fold_accuracies,
                mean_accuracy,
            }
        })
        .collect();
    Ok(scores)
}

/// Grid value with the best mean held-out accuracy; ties go to the larger
/// (sparser) value.
pub fn select_lambda(
    data: &[EmbeddedTriplet],
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<LambdaSelection> {
    let scores = cross_validate(data, grid, folds, seed, opts)?;
    let best = scores
        .iter()
        .max_by(|a, b| {
            a.mean_accuracy
                .total_cmp(&b.mean_accuracy)
                .then(a.lambda.total_cmp(&b.lambda))
        })
        .expect("grid is non-empty");
    Ok(LambdaSelection {
        lambda: best.lambda,
        scores,
    })
}
