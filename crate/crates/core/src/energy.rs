//! Discrete Dirichlet energy, Jacobian and distortion integrals.
//!
//! In log-polar coordinates `(s, theta)` the Dirichlet integral is the flat
//! integral of `|f_s|^2 + |f_theta|^2`, so everything here is computed on the
//! parameter rectangle. Each grid cell is split into two right triangles and
//! `f` is taken piecewise linear on them:
//!
//! ```text
//!   (i, j+1) d ------- c (i+1, j+1)
//!            |  upper / |
//!            |      /   |
//!            |   / lower|
//!     (i, j) a ------- b (i+1, j)
//! ```
//!
//! On that triangulation the energy reduces to edge differences (its
//! Euler-Lagrange operator is the 5-point Laplacian), the Jacobian integral is
//! the signed area swept by the image triangles, and the distortion quotients
//! are constant per triangle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domain::TargetDomain;
use crate::mesh::{ComplexField, LogPolarGrid};
use crate::sum::pairwise_sum;

/// Total energy with its normal / tangential split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub normal: f64,
    pub tangential: f64,
    pub jacobian_integral: f64,
}

/// Integrals of `K_N` and `K_T` against `ds dtheta` (that is `dz / |z|^2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionReport {
    pub kn_integral: f64,
    pub kt_integral: f64,
    pub zero_jacobian_fraction: f64,
}

/// Jacobians below this fraction of `|f_s|^2 + |f_theta|^2` count as zero.
pub const JACOBIAN_ZERO_RATIO: f64 = 1e-14;

/// Relative slack on both Reich-Walczak lower bounds.
pub const REICH_WALCZAK_TOL: f64 = 0.02;

#[inline]
fn cross(a: Complex64, b: Complex64) -> f64 {
    // Im(conj(a) b)
    a.re * b.im - a.im * b.re
}

/// Derivatives `(f_s, f_theta)` on the two triangles of cell `(i, j)`.
#[inline]
fn cell_derivatives(f: &ComplexField, i: usize, j: usize) -> [(Complex64, Complex64); 2] {
    let g = f.grid();
    let jn = g.next_col(j);
    let a = f.at(i, j);
    let b = f.at(i + 1, j);
    let c = f.at(i + 1, jn);
    let d = f.at(i, jn);
    let (hs, ht) = (g.ds(), g.dtheta());
    [((b - a) / hs, (c - b) / ht), ((c - d) / hs, (d - a) / ht)]
}

fn normal_sum(f: &ComplexField) -> f64 {
    let g = f.grid();
    let w = g.dtheta() / g.ds();
    let rows: Vec<f64> = (0..g.n_s() - 1)
        .map(|i| {
            let terms: Vec<f64> = f
                .row(i + 1)
                .iter()
                .zip(f.row(i))
                .map(|(b, a)| (b - a).norm_sqr())
                .collect();
            w * pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&rows)
}

fn tangential_sum(f: &ComplexField) -> f64 {
    let g = f.grid();
    let rows: Vec<f64> = (0..g.n_s())
        .map(|i| {
            let row = f.row(i);
            let terms: Vec<f64> = (0..g.n_theta())
                .map(|j| (row[g.next_col(j)] - row[j]).norm_sqr())
                .collect();
            g.row_weight(i) / g.dtheta() * pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&rows)
}

fn jacobian_sum(f: &ComplexField) -> f64 {
    let g = f.grid();
    let half_cell = 0.5 * g.ds() * g.dtheta();
    let rows: Vec<f64> = (0..g.n_s() - 1)
        .map(|i| {
            let terms: Vec<f64> = (0..g.n_theta())
                .map(|j| {
                    let [lo, up] = cell_derivatives(f, i, j);
                    cross(lo.0, lo.1) + cross(up.0, up.1)
                })
                .collect();
            half_cell * pairwise_sum(&terms)
        })
        .collect();
    pairwise_sum(&rows)
}

/// Discrete Dirichlet energy of `f` with its normal / tangential split.
pub fn dirichlet(f: &ComplexField) -> EnergyBreakdown {
    let normal = normal_sum(f);
    let tangential = tangential_sum(f);
    EnergyBreakdown {
        total: normal + tangential,
        normal,
        tangential,
        jacobian_integral: jacobian_sum(f),
    }
}

/// Total energy and its gradient with respect to the nodal values, packed as
/// `dE/dRe f + i dE/dIm f`.
pub fn dirichlet_with_gradient(f: &ComplexField) -> (f64, Vec<Complex64>) {
    let g = f.grid();
    let mut grad = vec![Complex64::new(0.0, 0.0); g.len()];
    let w_s = g.dtheta() / g.ds();
    let mut normal_rows = Vec::with_capacity(g.n_s());
    for i in 0..g.n_s() - 1 {
        let mut terms = Vec::with_capacity(g.n_theta());
        for j in 0..g.n_theta() {
            let d = f.at(i + 1, j) - f.at(i, j);
            terms.push(d.norm_sqr());
            let gd = 2.0 * w_s * d;
            grad[g.index(i + 1, j)] += gd;
            grad[g.index(i, j)] -= gd;
        }
        normal_rows.push(w_s * pairwise_sum(&terms));
    }
    let mut tangential_rows = Vec::with_capacity(g.n_s());
    for i in 0..g.n_s() {
        let w_t = g.row_weight(i) / g.dtheta();
        let mut terms = Vec::with_capacity(g.n_theta());
        for j in 0..g.n_theta() {
            let jn = g.next_col(j);
            let d = f.at(i, jn) - f.at(i, j);
            terms.push(d.norm_sqr());
            let gd = 2.0 * w_t * d;
            grad[g.index(i, jn)] += gd;
            grad[g.index(i, j)] -= gd;
        }
        tangential_rows.push(w_t * pairwise_sum(&terms));
    }
    (pairwise_sum(&normal_rows) + pairwise_sum(&tangential_rows), grad)
}

/// Relative defect `|int J - |target|| / |target|` of the change-of-variables
/// identity for a map claiming to cover the target once.
pub fn jacobian_identity_check(f: &ComplexField, t: &TargetDomain) -> f64 {
    let j = jacobian_sum(f);
    (j - t.area()).abs() / t.area()
}

#[inline]
fn quotient(num: f64, jac: f64, scale: f64) -> f64 {
    if num <= JACOBIAN_ZERO_RATIO * scale || num == 0.0 {
        0.0
    } else if jac < JACOBIAN_ZERO_RATIO * scale {
        f64::INFINITY
    } else {
        num / jac
    }
}

/// Per-triangle `(K_N, K_T)` with the zero / infinity conventions applied.
pub fn triangle_distortions(f: &ComplexField) -> Vec<(f64, f64)> {
    let g = f.grid();
    let mut out = Vec::with_capacity(2 * g.len());
    for i in 0..g.n_s() - 1 {
        for j in 0..g.n_theta() {
            for (fs, ft) in cell_derivatives(f, i, j) {
                let (n, t) = (fs.norm_sqr(), ft.norm_sqr());
                let scale = n + t;
                let jac = cross(fs, ft);
                out.push((quotient(n, jac, scale), quotient(t, jac, scale)));
            }
        }
    }
    out
}

/// Integrals of the normal and tangential distortion quotients.
///
/// Quotients vanish where their numerator does and are `+inf` where the
/// Jacobian vanishes (or is negative) but the numerator does not.
pub fn distortion_integrals(f: &ComplexField) -> DistortionReport {
    let g = f.grid();
    let half_cell = 0.5 * g.ds() * g.dtheta();
    let mut zero = 0usize;
    for i in 0..g.n_s() - 1 {
        for j in 0..g.n_theta() {
            for (fs, ft) in cell_derivatives(f, i, j) {
                let scale = fs.norm_sqr() + ft.norm_sqr();
                if scale == 0.0 || cross(fs, ft) < JACOBIAN_ZERO_RATIO * scale {
                    zero += 1;
                }
            }
        }
    }
    let (kn, kt): (Vec<f64>, Vec<f64>) = triangle_distortions(f).into_iter().unzip();
    DistortionReport {
        kn_integral: half_cell * pairwise_sum(&kn),
        kt_integral: half_cell * pairwise_sum(&kt),
        zero_jacobian_fraction: zero as f64 / kn.len() as f64,
    }
}

/// Outcome of the two modulus inequalities for a sense-preserving candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReichWalczak {
    pub report: DistortionReport,
    /// `2 pi Mod(target)`
    pub normal_bound: f64,
    /// `2 pi tau^2 / Mod(target)`
    pub tangential_bound: f64,
    pub normal_ok: bool,
    pub tangential_ok: bool,
}

/// Checks `int K_N >= 2 pi Mod(target)` and `int K_T >= 2 pi tau^2 / Mod(target)`
/// up to [`REICH_WALCZAK_TOL`] of each bound. `tau` is read from the grid.
pub fn reich_walczak_check(f: &ComplexField, target_modulus: f64) -> ReichWalczak {
    let tau = f.grid().tau();
    let report = distortion_integrals(f);
    let normal_bound = 2.0 * PI * target_modulus;
    let tangential_bound = 2.0 * PI * tau * tau / target_modulus;
    ReichWalczak {
        report,
        normal_bound,
        tangential_bound,
        normal_ok: report.kn_integral >= normal_bound * (1.0 - REICH_WALCZAK_TOL),
        tangential_ok: report.kt_integral >= tangential_bound * (1.0 - REICH_WALCZAK_TOL),
    }
}

/// Cell-area weights for integrating a nodal field over the parameter rectangle.
pub fn node_weights(g: &LogPolarGrid) -> Vec<f64> {
    let mut w = Vec::with_capacity(g.len());
    for i in 0..g.n_s() {
        let wi = g.row_weight(i) * g.dtheta();
        w.extend(std::iter::repeat(wi).take(g.n_theta()));
    }
    w
}
