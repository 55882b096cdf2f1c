//! Projected limited-memory BFGS for box-constrained smooth minimization.
//!
//! Variables sitting on a bound with the gradient pushing outward, and
//! variables whose bounds coincide, form the active set. The quasi-Newton
//! direction is built on the free variables only, the trial point is
//! projected back onto the box, and an Armijo backtracking search accepts it.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub history: usize,
    pub max_iter: usize,
    /// Converged once `|projected gradient| <= grad_tol (1 + |f|)`.
    pub grad_tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            history: 10,
            max_iter: 5000,
            grad_tol: 1e-8,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Lower and upper bounds per variable; use infinities for free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    fn project(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    fn active(&self, x: &[f64], g: &[f64], k: usize) -> bool {
        let (lo, hi) = (self.lower[k], self.upper[k]);
        lo == hi || (x[k] <= lo && g[k] > 0.0) || (x[k] >= hi && g[k] < 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective` over the box.
///
/// `objective(x, grad)` returns the value and writes the gradient. `normalize`
/// runs after every accepted step and must leave the value and gradient
/// unchanged (a gauge fix, for example).
pub fn minimize_box(
    mut objective: impl FnMut(&[f64], &mut [f64]) -> f64,
    mut normalize: impl FnMut(&mut [f64]),
    x0: &[f64],
    bounds: &Bounds,
    opts: &LbfgsOptions,
) -> Result<LbfgsReport> {
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    normalize(&mut x);
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() {
        return Err(Error::NanInLineSearch { iteration: 0 });
    }
    let mut trace = vec![f];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.history);

    let mut free = vec![true; n];
    let mut d = vec![0.0; n];
    let mut x_trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut grad_norm = f64::INFINITY;

    for iter in 0..opts.max_iter {
        for k in 0..n {
            free[k] = !bounds.active(&x, &g, k);
        }
        grad_norm = (0..n).filter(|&k| free[k]).map(|k| g[k] * g[k]).sum::<f64>().sqrt();
        if grad_norm <= opts.grad_tol * (1.0 + f.abs()) {
            return Ok(LbfgsReport { x, value: f, grad_norm, iterations: iter, converged: true, trace });
        }

        let mut steepest = memory.is_empty();
        loop {
            if steepest {
                let scale = 1.0 / grad_norm.max(1.0);
                for k in 0..n {
                    d[k] = if free[k] { -g[k] * scale } else { 0.0 };
                }
            } else {
                two_loop(&memory, &g, &free, &mut d);
            }
            let slope = dot(&d, &g);
            if slope >= 0.0 && !steepest {
                memory.clear();
                steepest = true;
                continue;
            }

            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_backtracks {
                for k in 0..n {
                    x_trial[k] = x[k] + t * d[k];
                }
                bounds.project(&mut x_trial);
                let f_trial = objective(&x_trial, &mut g_trial);
                if f_trial.is_nan() {
                    return Err(Error::NanInLineSearch { iteration: iter });
                }
                let decrease: f64 = (0..n).map(|k| g[k] * (x_trial[k] - x[k])).sum();
                if f_trial <= f + opts.armijo * decrease && decrease < 0.0 {
                    accepted = Some(f_trial);
                    break;
                }
                t *= opts.backtrack;
            }

            match accepted {
                Some(f_new) => {
                    let s: Vec<f64> = x_trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > f64::EPSILON * dot(&y, &y).max(f64::MIN_POSITIVE) {
                        if memory.len() == opts.history {
                            memory.pop_front();
                        }
                        memory.push_back((s, y, 1.0 / sy));
                    }
                    std::mem::swap(&mut x, &mut x_trial);
                    std::mem::swap(&mut g, &mut g_trial);
                    normalize(&mut x);
                    f = f_new;
                    trace.push(f);
                    break;
                }
                None if !steepest => {
                    memory.clear();
                    steepest = true;
                }
                None => {
                    // no descent along the projected steepest direction: stalled
                    return Ok(LbfgsReport { x, value: f, grad_norm, iterations: iter, converged: false, trace });
                }
            }
        }
    }
    Ok(LbfgsReport { x, value: f, grad_norm, iterations: opts.max_iter, converged: false, trace })
}

/// Two-loop recursion restricted to the free variables.
fn two_loop(memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64], free: &[bool], d: &mut [f64]) {
    let masked = |v: &[f64], w: &[f64]| -> f64 {
        v.iter().zip(w).zip(free).filter(|(_, &f)| f).map(|((a, b), _)| a * b).sum()
    };
    let mut q: Vec<f64> = g.iter().zip(free).map(|(&v, &f)| if f { v } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, _) in memory.iter().rev() {
        let sy = masked(s, y);
        if sy <= 0.0 {
            alphas.push(0.0);
            continue;
        }
        let a = masked(s, &q) / sy;
        for k in 0..q.len() {
            if free[k] {
                q[k] -= a * y[k];
            }
        }
        alphas.push(a);
    }
    let gamma = memory
        .back()
        .map(|(s, y, _)| {
            let yy = masked(y, y);
            if yy > 0.0 { masked(s, y) / yy } else { 1.0 }
        })
        .filter(|v| *v > 0.0)
        .unwrap_or(1.0);
    q.iter_mut().for_each(|v| *v *= gamma);
    for ((s, y, _), a) in memory.iter().zip(alphas.iter().rev()) {
        let sy = masked(s, y);
        if sy <= 0.0 {
            continue;
        }
        let b = masked(y, &q) / sy;
        for k in 0..q.len() {
            if free[k] {
                q[k] += (a - b) * s[k];
            }
        }
    }
    for (dk, qk) in d.iter_mut().zip(q) {
        *dk = -qk;
    }
}
