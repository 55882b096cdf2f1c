//! Hopf differential `phi = h_z conj(h_zbar)` and the `c / z^2` fit.
//!
//! A stationary map of a circular annulus has `z^2 phi` equal to one real
//! constant `c`, whose sign is dictated by how the source and target moduli
//! compare. [`fit_constant`] measures how far a computed map is from that.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::mesh::{d_s, d_theta, ComplexField};
use crate::sum::pairwise_sum;

/// Rows this close to either boundary circle are left out of the fit.
pub const BOUNDARY_ROWS_EXCLUDED: usize = 2;

/// `|c|` below this counts as zero when the moduli coincide.
pub const ZERO_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfFit {
    pub c: f64,
    pub residual: f64,
    pub sign_consistent: bool,
}

/// Sign of `c` predicted from the source and target moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopfSign {
    Positive,
    Negative,
    Zero,
}

impl HopfSign {
    /// `Positive` for `tau < Mod`, `Negative` for `tau > Mod`.
    pub fn predicted(tau: f64, target_modulus: f64) -> Self {
        let gap = tau - target_modulus;
        if gap.abs() <= 1e-9 * target_modulus.max(1.0) {
            HopfSign::Zero
        } else if gap < 0.0 {
            HopfSign::Positive
        } else {
            HopfSign::Negative
        }
    }

    pub fn matches(self, c: f64) -> bool {
        match self {
            HopfSign::Positive => c > 0.0,
            HopfSign::Negative => c < 0.0,
            HopfSign::Zero => c.abs() <= ZERO_TOL,
        }
    }
}

/// Nodewise `phi = h_z conj(h_zbar)` from the log-polar derivatives,
/// `h_z = e^{-(s + i theta)} (f_s - i f_theta) / 2` and
/// `h_zbar = e^{-(s - i theta)} (f_s + i f_theta) / 2`.
pub fn hopf_field(f: &ComplexField) -> ComplexField {
    let g = *f.grid();
    let fs = d_s(f);
    let ft = d_theta(f);
    let i_unit = Complex64::i();
    let mut values = Vec::with_capacity(g.len());
    for i in 0..g.n_s() {
        for j in 0..g.n_theta() {
            let (a, b) = (fs.at(i, j), ft.at(i, j));
            let z = g.z(i, j);
            let hz = (a - i_unit * b) / (2.0 * z);
            let hzbar = (a + i_unit * b) / (2.0 * z.conj());
            values.push(hz * hzbar.conj());
        }
    }
    ComplexField::new(g, values).expect("finite derivatives of a finite field")
}

/// Least-squares fit of a real constant `c` to `z^2 phi` on the interior rows.
pub fn fit_constant(phi: &ComplexField, predicted: HopfSign) -> HopfFit {
    let g = phi.grid();
    let lo = BOUNDARY_ROWS_EXCLUDED.min(g.n_s() / 2 - 1);
    let hi = g.n_s() - lo;
    let mut samples = Vec::with_capacity(g.len());
    for i in lo..hi {
        for j in 0..g.n_theta() {
            let z = g.z(i, j);
            samples.push(z * z * phi.at(i, j));
        }
    }
    let re: Vec<f64> = samples.iter().map(|w| w.re).collect();
    let c = pairwise_sum(&re) / samples.len() as f64;
    let misfit: Vec<f64> = samples.iter().map(|w| (w - c).norm_sqr()).collect();
    let scale: Vec<f64> = samples.iter().map(|w| w.norm_sqr()).collect();
    let (num, den) = (pairwise_sum(&misfit), pairwise_sum(&scale));
    let residual = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
    HopfFit {
        c,
        residual,
        sign_consistent: predicted.matches(c),
    }
}
