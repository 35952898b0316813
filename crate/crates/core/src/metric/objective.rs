use super::{logistic, softplus, EmbeddedTriplet};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Added under the square root while training so the distance stays
/// differentiable at zero. Inference uses the exact distance.
pub const DISTANCE_EPS: f64 = 1e-12;

/// Triplets per parallel work unit. Partial sums are combined in chunk
/// order, so results do not depend on the thread count.
const CHUNK: usize = 64;

/// The training objective with per-triplet squared differences precomputed.
#[derive(Clone, Debug)]
pub struct Objective {
    dim: usize,
    len: usize,
    /// Row-major `len × dim`: (ref − winner)².
    sq_win: Vec<f64>,
    /// Row-major `len × dim`: (ref − loser)².
    sq_lose: Vec<f64>,
    lambda: f64,
}

impl Objective {
    pub fn new(data: &[EmbeddedTriplet], lambda: f64) -> Result<Self> {
        let first = data.first().ok_or(Error::EmptyData)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "lambda must be finite and ≥ 0, got {lambda}"
            )));
        }
        let dim = first.dim();
        let mut sq_win = Vec::with_capacity(data.len() * dim);
        let mut sq_lose = Vec::with_capacity(data.len() * dim);
        for t in data {
            for v in [&t.f_ref, &t.f_winner, &t.f_loser] {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteInput);
                }
            }
            sq_win.extend(t.f_ref.iter().zip(&t.f_winner).map(|(a, b)| (a - b) * (a - b)));
            sq_lose.extend(t.f_ref.iter().zip(&t.f_loser).map(|(a, b)| (a - b) * (a - b)));
        }
        Ok(Self {
            dim,
            len: data.len(),
            sq_win,
            sq_lose,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Objective value and gradient at `w`.
    ///
    /// The penalty is `λ Σ |wᵢ|`; its gradient is taken as `λ` everywhere,
    /// which is exact on the non-negative orthant the optimizer stays in.
    pub fn evaluate(&self, w: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(w.len(), self.dim, "weight vector length");
        let dim = self.dim;
        let partials: Vec<(f64, Vec<f64>)> = (0..self.len)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|rows| {
                let mut value = 0.0;
                let mut grad = vec![0.0; dim];
                for &r in rows {
                    let sw = &self.sq_win[r * dim..(r + 1) * dim];
                    let sl = &self.sq_lose[r * dim..(r + 1) * dim];
                    let d_win = (dot(w, sw) + DISTANCE_EPS).sqrt();
                    let d_lose = (dot(w, sl) + DISTANCE_EPS).sqrt();
                    // −log P(winner) = softplus(d_win − d_lose)
                    let z = d_win - d_lose;
                    value += softplus(z);
                    let s = logistic(z);
                    let (cw, cl) = (s / (2.0 * d_win), s / (2.0 * d_lose));
                    for ((g, a), b) in grad.iter_mut().zip(sw).zip(sl) {
                        *g += cw * a - cl * b;
                    }
                }
                (value, grad)
            })
            .collect();

        let mut value = self.lambda * w.iter().map(|x| x.abs()).sum::<f64>();
        let mut grad = vec![self.lambda; dim];
        for (v, g) in partials {
            value += v;
            for (acc, x) in grad.iter_mut().zip(g) {
                *acc += x;
            }
        }
        (value, grad)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative log-likelihood of the majority choices plus the L1 penalty, and
/// its gradient with respect to the weights.
pub fn objective(w: &[f64], data: &[EmbeddedTriplet], lambda: f64) -> Result<(f64, Vec<f64>)> {
    let obj = Objective::new(data, lambda)?;
    if w.len() != obj.dim {
        return Err(Error::DimensionMismatch {
            expected: obj.dim,
            actual: w.len(),
        });
    }
    Ok(obj.evaluate(w))
}
