//! Source and target doubly connected domains.
//!
//! Sources are circular annuli `A(r, R)`; targets are affine shears
//! `w + delta * conj(w)` of the circular annulus `A(1, R*)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Circular annulus `{ r_inner < |z| < r_outer }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    r_inner: f64,
    r_outer: f64,
}

impl Annulus {
    pub fn new(r_inner: f64, r_outer: f64) -> Result<Self> {
        let ok = r_inner.is_finite() && r_outer.is_finite() && r_inner > 0.0 && r_inner < r_outer;
        if !ok {
            return Err(Error::InvalidAnnulus {
                inner: r_inner,
                outer: r_outer,
            });
        }
        Ok(Self { r_inner, r_outer })
    }

    /// The normalized source `A(1, e^tau)`.
    pub fn with_modulus(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::DegenerateModulus(tau));
        }
        Self::new(1.0, tau.exp())
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    /// Conformal modulus `log(r_outer / r_inner)`.
    pub fn modulus(&self) -> f64 {
        (self.r_outer / self.r_inner).ln()
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_outer * self.r_outer - self.r_inner * self.r_inner)
    }
}

/// Free-function form of [`Annulus::modulus`].
pub fn modulus(a: &Annulus) -> f64 {
    a.modulus()
}

/// Affine image `phi(A(1, R*))` with `phi(w) = w + delta * conj(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetSpec", into = "TargetSpec")]
pub struct TargetDomain {
    base: Annulus,
    delta: f64,
}

/// Wire form of a target: `{ "rstar": .., "delta": .. }`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TargetSpec {
    rstar: f64,
    delta: f64,
}

impl TryFrom<TargetSpec> for TargetDomain {
    type Error = Error;

    fn try_from(spec: TargetSpec) -> Result<Self> {
        TargetDomain::new(spec.rstar, spec.delta)
    }
}

impl From<TargetDomain> for TargetSpec {
    fn from(t: TargetDomain) -> Self {
        TargetSpec {
            rstar: t.rstar(),
            delta: t.delta,
        }
    }
}

impl TargetDomain {
    pub fn new(rstar: f64, delta: f64) -> Result<Self> {
        let ok = rstar.is_finite() && rstar > 1.0 && delta.is_finite() && (0.0..1.0).contains(&delta);
        if !ok {
            return Err(Error::InvalidTarget { rstar, delta });
        }
        Ok(Self {
            base: Annulus::new(1.0, rstar)?,
            delta,
        })
    }

    /// Circular target `A(1, R*)`.
    pub fn circular(rstar: f64) -> Result<Self> {
        Self::new(rstar, 0.0)
    }

    pub fn base(&self) -> &Annulus {
        &self.base
    }

    pub fn rstar(&self) -> f64 {
        self.base.r_outer
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_circular(&self) -> bool {
        self.delta == 0.0
    }

    /// Applies the shear `w + delta * conj(w)`.
    #[inline]
    pub fn shear(&self, w: Complex64) -> Complex64 {
        w + self.delta * w.conj()
    }

    /// Quasiconformal constant `(1 + delta) / (1 - delta)` of the shear.
    pub fn distortion(&self) -> f64 {
        (1.0 + self.delta) / (1.0 - self.delta)
    }

    /// Bracket `[Mod(base) / K, K * Mod(base)]` containing the modulus of the image.
    pub fn modulus_bounds(&self) -> (f64, f64) {
        let k = self.distortion();
        let m = self.base.modulus();
        (m / k, m * k)
    }

    /// Exact modulus when no shear is applied; `None` otherwise
    /// (see `harmonic::capacity_modulus`).
    pub fn exact_modulus(&self) -> Option<f64> {
        self.is_circular().then(|| self.base.modulus())
    }

    /// `(1 - delta^2) * pi * (R*^2 - 1)`.
    pub fn area(&self) -> f64 {
        (1.0 - self.delta * self.delta) * self.base.area()
    }

    /// `2 |target|`, the conformal lower bound on the energy of any deformation.
    pub fn energy_lower_bound(&self) -> f64 {
        2.0 * self.area()
    }
}

/// Free-function form of [`TargetDomain::area`].
pub fn area(t: &TargetDomain) -> f64 {
    t.area()
}

/// Free-function form of [`TargetDomain::energy_lower_bound`].
pub fn energy_lower_bound(t: &TargetDomain) -> f64 {
    t.energy_lower_bound()
}
