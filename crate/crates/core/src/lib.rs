//! Energy-minimal mappings between doubly connected planar domains.
//!
//! The source is always a circular annulus `A(1, e^tau)` parametrized in
//! log-polar coordinates `(s, theta)`; the target is an annulus `A(1, R*)`,
//! optionally sheared by `w -> w + delta conj(w)`. The crate discretizes the
//! Dirichlet energy on a triangulated log-polar grid, minimizes it with a
//! box-constrained quasi-Newton method, and checks the result against the
//! closed-form theory for circular annuli.

pub mod closedform;
pub mod domain;
pub mod energy;
pub mod error;
pub mod harmonic;
pub mod hopf;
pub mod mesh;
pub mod minimize;
pub mod optimizer;
mod sum;

pub use domain::{Annulus, TargetDomain};
pub use energy::{DistortionReport, EnergyBreakdown};
pub use error::{Error, Result};
pub use hopf::{HopfFit, HopfSign};
pub use mesh::{ComplexField, LogPolarGrid};
pub use num_complex::Complex64;
pub use minimize::{MinimizeOptions, MinimizeResult, PolarMapState};
