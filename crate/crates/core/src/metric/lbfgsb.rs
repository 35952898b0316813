//! Box-constrained limited-memory BFGS.
//!
//! A projected quasi-Newton scheme: variables sitting on a bound with the
//! gradient pushing outward are frozen, the two-loop recursion is applied to
//! the remaining (free) gradient, and a backtracking line search along the
//! projected path enforces sufficient decrease. If the quasi-Newton step
//! fails to decrease the objective the memory is dropped and a projected
//! steepest-descent step is tried instead, so accepted iterates never
//! increase the objective.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LbfgsbOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    /// Stop when the infinity norm of the projected gradient falls below.
    pub grad_tol: f64,
    /// Stop when `(f_prev − f) / max(|f_prev|, |f|, 1)` falls below.
    /// Zero disables the test.
    pub f_rel_tol: f64,
    pub max_iters: usize,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-6,
            f_rel_tol: 1e7 * f64::EPSILON,
            max_iters: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    ObjectiveTolerance,
    MaxIterations,
    /// No step along either search direction decreased the objective.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct Minimization {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub reason: StopReason,
    /// Objective at the start point and at every accepted iterate.
    pub trace: Vec<f64>,
    pub projected_grad_norm: f64,
}

impl Minimization {
    pub fn converged(&self) -> bool {
        matches!(
            self.reason,
            StopReason::GradientTolerance | StopReason::ObjectiveTolerance
        )
    }
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// Minimize `f` over the box `lower ≤ x ≤ upper`.
///
/// `f` returns the objective value and gradient. `x0` is projected onto the
/// box first. Bounds may be infinite.
pub fn minimize_bounded<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LbfgsbOptions,
) -> Minimization
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n, "bound lengths");
    let project = |x: &mut [f64]| {
        for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
            *xi = xi.clamp(lo, hi);
        }
    };

    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    let reason = loop {
        let pg = projected_gradient(&x, &g, lower, upper);
        if inf_norm(&pg) < opts.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= opts.max_iters {
            break StopReason::MaxIterations;
        }
        // free variables: not pinned at a bound by the gradient
        let free: Vec<bool> = pg.iter().map(|&p| p != 0.0).collect();

        let mut step = None;
        for use_memory in [true, false] {
            if !use_memory {
                history.clear();
            }
            let dir = search_direction(&g, &free, &history);
            if let Some(found) = line_search(&mut f, &x, fx, &g, &dir, &project) {
                step = Some(found);
                break;
            }
            if history.is_empty() {
                break;
            }
        }
        let Some((x_new, f_new, g_new)) = step else {
            break StopReason::LineSearchFailed;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let f_prev = fx;
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);

        let scale = f_prev.abs().max(fx.abs()).max(1.0);
        if opts.f_rel_tol > 0.0 && (f_prev - fx) / scale <= opts.f_rel_tol {
            break StopReason::ObjectiveTolerance;
        }
    };

    let projected_grad_norm = inf_norm(&projected_gradient(&x, &g, lower, upper));
    Minimization {
        x,
        f: fx,
        iterations,
        reason,
        trace,
        projected_grad_norm,
    }
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Two-loop recursion on the free components; pinned components get zero.
fn search_direction(
    g: &[f64],
    free: &[bool],
    history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
) -> Vec<f64> {
    let mask = |v: &mut [f64]| {
        for (vi, &f) in v.iter_mut().zip(free) {
            if !f {
                *vi = 0.0;
            }
        }
    };
    let mut q = g.to_vec();
    mask(&mut q);

    if history.is_empty() {
        // first step: unit-length steepest descent
        let norm = dot(&q, &q).sqrt();
        return q.iter().map(|v| -v / norm).collect();
    }

    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    let (s, y, _) = history.back().unwrap();
    let gamma = dot(s, y) / dot(y, y);
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    mask(&mut q);
    let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();

    let mut g_free = g.to_vec();
    mask(&mut g_free);
    if dot(&dir, &g_free) >= 0.0 {
        // not a descent direction; fall back to steepest descent
        dir = g_free.iter().map(|v| -v).collect();
    }
    dir
}

type Step = (Vec<f64>, f64, Vec<f64>);

/// Backtracking along the projected path `P(x + α d)` with an Armijo test
/// against the actual (projected) displacement.
fn line_search<F, P>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    g: &[f64],
    dir: &[f64],
    project: &P,
) -> Option<Step>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    P: Fn(&mut [f64]),
{
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        project(&mut trial);
        let decrease: f64 = trial
            .iter()
            .zip(x)
            .zip(g)
            .map(|((t, xi), gi)| gi * (t - xi))
            .sum();
        if decrease < 0.0 {
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO_C1 * decrease && ft < fx {
                return Some((trial, ft, gt));
            }
        } else if trial == x {
            return None;
        }
        alpha *= 0.5;
    }
    None
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
