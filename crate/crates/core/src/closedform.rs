//! Closed-form reference values for circular annuli and their affine images.
//!
//! For `A(1, R) -> A(1, R*)` with `R <= R* + sqrt(R*^2 - 1)` the minimizer is
//! the Nitsche map `h(z) = (z + lambda / conj(z)) / (1 + lambda)`. Beyond that
//! threshold the minimizer hammers an inner band onto the unit circle and the
//! minimum energy grows affinely with slope `2 pi`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// All closed-form quantities attached to one `(R, R*)` pair in the Nitsche range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NitscheSolution {
    pub r: f64,
    pub rstar: f64,
    pub lambda: f64,
    pub energy: f64,
    pub slope: f64,
    pub second: f64,
    pub hopf_c: f64,
}

impl NitscheSolution {
    pub fn new(r: f64, rstar: f64) -> Result<Self> {
        let lambda = nitsche_lambda(r, rstar)?;
        Ok(Self {
            r,
            rstar,
            lambda,
            energy: nitsche_energy(r, lambda),
            slope: energy_slope(r, rstar)?,
            second: energy_second_derivative(r, rstar)?,
            hopf_c: nitsche_hopf_c(lambda),
        })
    }
}

fn check_nitsche_range(r: f64, rstar: f64) -> Result<()> {
    if !(r > 1.0 && rstar > 1.0 && r.is_finite() && rstar.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "radii must exceed 1 (got R = {r}, R* = {rstar})"
        )));
    }
    let limit = critical_radius(rstar);
    // a few ulps of slack so the transition point itself is accepted
    if r > limit * (1.0 + 4.0 * f64::EPSILON) {
        return Err(Error::InvalidArgument(format!(
            "R = {r} exceeds the Nitsche bound R* + sqrt(R*^2 - 1) = {limit}"
        )));
    }
    Ok(())
}

/// `R* + sqrt(R*^2 - 1)`, the largest source radius admitting a homeomorphic minimizer.
pub fn critical_radius(rstar: f64) -> f64 {
    rstar + (rstar * rstar - 1.0).sqrt()
}

/// `lambda = R (R - R*) / (R R* - 1)`.
pub fn nitsche_lambda(r: f64, rstar: f64) -> Result<f64> {
    check_nitsche_range(r, rstar)?;
    Ok((r * (r - rstar) / (r * rstar - 1.0)).min(1.0))
}

/// `2 pi (R^2 - 1)(R^2 + lambda^2) / (R^2 (1 + lambda)^2)`.
pub fn nitsche_energy(r: f64, lambda: f64) -> f64 {
    let r2 = r * r;
    2.0 * PI * (r2 - 1.0) * (r2 + lambda * lambda) / (r2 * (1.0 + lambda).powi(2))
}

/// `-lambda / (1 + lambda)^2`, the constant with `z^2 h_z conj(h_zbar) = c`.
pub fn nitsche_hopf_c(lambda: f64) -> f64 {
    -lambda / (1.0 + lambda).powi(2)
}

/// The Nitsche map `(z + lambda / conj(z)) / (1 + lambda)`.
pub fn nitsche_map(z: Complex64, lambda: f64) -> Complex64 {
    (z + lambda / z.conj()) / (1.0 + lambda)
}

/// `arccosh(R*)`: source moduli above this force collapse onto the inner circle.
pub fn critical_tau(rstar: f64) -> f64 {
    critical_radius(rstar).ln()
}

/// `log cosh(tau)`: the target modulus at which `tau` becomes critical.
pub fn critical_modstar(tau: f64) -> f64 {
    // log cosh t = t + log(1 + e^{-2t}) - log 2, stable for large t
    let t = tau.abs();
    t + (-2.0 * t).exp().ln_1p() - std::f64::consts::LN_2
}

/// Minimum energy `E(tau, A(1, R*))`: Nitsche branch up to `arccosh R*`,
/// affine with slope `2 pi` beyond.
pub fn min_energy_annulus(tau: f64, rstar: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::DegenerateModulus(tau));
    }
    let tau_c = critical_tau(rstar);
    if tau <= tau_c {
        let r = tau.exp().min(critical_radius(rstar));
        Ok(nitsche_energy(r, nitsche_lambda(r, rstar)?))
    } else {
        Ok(2.0 * PI * (tau - tau_c) + nitsche_energy(critical_radius(rstar), 1.0))
    }
}

/// `dE/dtau` at `tau = log R`: `8 pi R (R - R*)(R R* - 1) / (R^2 - 1)^2`.
pub fn energy_slope(r: f64, rstar: f64) -> Result<f64> {
    check_nitsche_range(r, rstar)?;
    let r2m1 = r * r - 1.0;
    Ok(8.0 * PI * r * (r - rstar) * (r * rstar - 1.0) / (r2m1 * r2m1))
}

/// `d^2E/dtau^2` at `tau = log R`:
/// `8 pi R (R* R^2 - 2R + R*)(2 R R* - R^2 - 1) / (R^2 - 1)^3`.
pub fn energy_second_derivative(r: f64, rstar: f64) -> Result<f64> {
    check_nitsche_range(r, rstar)?;
    let r2m1 = r * r - 1.0;
    let a = rstar * r * r - 2.0 * r + rstar;
    let b = 2.0 * r * rstar - r * r - 1.0;
    Ok(8.0 * PI * r * a * b / (r2m1 * r2m1 * r2m1))
}

/// `Lambda(t) = (log t - log(1 + log t)) / (2 + log t)` for `t >= 1`.
pub fn lambda_fn(t: f64) -> f64 {
    let l = t.ln();
    (l - l.ln_1p()) / (2.0 + l)
}

/// `Upsilon(tau) = exp(-pi^2 / (2 tau)) Lambda(coth(pi^2 / (2 tau)))`.
pub fn upsilon(tau: f64) -> f64 {
    let x = PI * PI / (2.0 * tau);
    (-x).exp() * lambda_fn(coth(x))
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// `(Mod/tau + tau/Mod) |target|`, the power-stretch upper bound.
pub fn upper_energy_bound(tau: f64, modstar: f64, area_star: f64) -> f64 {
    (modstar / tau + tau / modstar) * area_star
}

/// Green's function of the unit disk, `log |(1 - z conj(zeta)) / (z - zeta)|`.
pub fn green_disk(z: Complex64, zeta: Complex64) -> Result<f64> {
    if z.norm() >= 1.0 || zeta.norm() >= 1.0 {
        return Err(Error::InvalidArgument("points must lie in the open unit disk".into()));
    }
    if z == zeta {
        return Err(Error::InvalidArgument("Green's function undefined at coincident points".into()));
    }
    Ok(((1.0 - z * zeta.conj()) / (z - zeta)).norm().ln())
}

/// `log coth(pi^2 / (4 log R))`, a lower bound for Green's function of
/// `A(1/R, R)` between points of the unit circle.
pub fn green_lower_bound(r: f64) -> f64 {
    coth(PI * PI / (4.0 * r.ln())).ln()
}

/// Hopf differential `(1 - delta / z^2)(delta - 1 / z^2) / 4` of the sheared Nitsche map.
pub fn affine_hopf(z: Complex64, delta: f64) -> Complex64 {
    let inv2 = 1.0 / (z * z);
    0.25 * (1.0 - delta * inv2) * (delta - inv2)
}

/// Whether the sheared Nitsche map has a Hopf differential of the form `c / z^2`.
pub fn is_czsq_form(delta: f64) -> bool {
    delta == 0.0
}

/// `rho_Y^2 d / diam X`: energy floor from boundary separation.
pub fn appendix_energy_bound(rho_y: f64, d: f64, diam_x: f64) -> f64 {
    rho_y * rho_y * d / diam_x
}

/// Bundle of every reference value for a `(tau, R*)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub tau: f64,
    pub rstar: f64,
    pub critical_tau: f64,
    pub critical_modstar: f64,
    pub in_nitsche_range: bool,
    pub lambda: Option<f64>,
    pub hopf_c: Option<f64>,
    pub slope: f64,
    pub second_derivative: Option<f64>,
    pub min_energy: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub upsilon: f64,
    pub green_lower_bound: f64,
    pub appendix_bound: f64,
}

pub fn oracle_report(tau: f64, rstar: f64) -> Result<OracleReport> {
    if !(rstar > 1.0 && rstar.is_finite()) {
        return Err(Error::InvalidTarget { rstar, delta: 0.0 });
    }
    let min_energy = min_energy_annulus(tau, rstar)?;
    let tau_c = critical_tau(rstar);
    let in_range = tau <= tau_c;
    let nitsche = if in_range {
        Some(NitscheSolution::new(tau.exp().min(critical_radius(rstar)), rstar)?)
    } else {
        None
    };
    let area = PI * (rstar * rstar - 1.0);
    let r = tau.exp();
    Ok(OracleReport {
        tau,
        rstar,
        critical_tau: tau_c,
        critical_modstar: critical_modstar(tau),
        in_nitsche_range: in_range,
        lambda: nitsche.map(|n| n.lambda),
        hopf_c: nitsche.map(|n| n.hopf_c),
        slope: nitsche.map_or(2.0 * PI, |n| n.slope),
        second_derivative: nitsche.map(|n| n.second),
        min_energy,
        lower_bound: 2.0 * area,
        upper_bound: upper_energy_bound(tau, rstar.ln(), area),
        upsilon: upsilon(tau),
        green_lower_bound: green_lower_bound(r),
        // source A(1, e^tau): diam X = 2 e^tau, inner hole diameter 2;
        // target A(1, R*): boundary separation R* - 1
        appendix_bound: appendix_energy_bound(rstar - 1.0, 2.0, 2.0 * r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn lambda_examples() {
        assert_eq!(nitsche_lambda(2.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(nitsche_lambda(2.0 + SQRT3, 2.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(nitsche_lambda(1.5, 2.0).unwrap(), -0.375, epsilon = 1e-15);
        assert!(nitsche_lambda(4.0, 2.0).is_err());
        assert!(nitsche_lambda(0.5, 2.0).is_err());
    }

    #[test]
    fn energy_examples() {
        for r in [1.3, 2.0, 5.0] {
            assert_relative_eq!(nitsche_energy(r, 0.0), 2.0 * PI * (r * r - 1.0), max_relative = 1e-15);
        }
        assert_relative_eq!(nitsche_energy(2.0 + SQRT3, 1.0), 21.765_592_370_810_614, max_relative = 1e-13);
        let lam = nitsche_lambda(E, 2.0).unwrap();
        assert_relative_eq!(lam, 0.440_091_159_059_099_56, max_relative = 1e-13);
        assert_relative_eq!(nitsche_energy(E, lam), 19.864_314_944_424_519, max_relative = 1e-13);
    }

    #[test]
    fn min_energy_examples() {
        assert_relative_eq!(min_energy_annulus(LN_2, 2.0).unwrap(), 18.849_555_921_538_759, max_relative = 1e-13);
        assert_relative_eq!(min_energy_annulus(1.0, 2.0).unwrap(), 19.864_314_944_424_519, max_relative = 1e-13);
        assert_relative_eq!(min_energy_annulus(1.8, 2.0).unwrap(), 24.800_635_415_601_733, max_relative = 1e-13);
        assert!(min_energy_annulus(0.0, 2.0).is_err());
    }

    #[test]
    fn slope_examples() {
        assert_eq!(energy_slope(2.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(energy_slope(2.0 + SQRT3, 2.0).unwrap(), 2.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(energy_slope(1.5, 2.0).unwrap(), -7.68 * PI, max_relative = 1e-13);
        assert!(energy_slope(4.0, 2.0).is_err());
    }

    #[test]
    fn second_derivative_examples() {
        assert!(energy_second_derivative(2.0 + SQRT3, 2.0).unwrap().abs() < 1e-9);
        assert_relative_eq!(energy_second_derivative(2.0, 2.0).unwrap(), 32.0 * PI / 3.0, max_relative = 1e-13);
        assert_relative_eq!(energy_second_derivative(1.2, 2.0).unwrap(), 2_072.176_575_837_379_4, max_relative = 1e-12);
    }

    #[test]
    fn threshold_examples() {
        assert_relative_eq!(critical_tau(2.0), 1.316_957_896_924_816_7, max_relative = 1e-14);
        assert_relative_eq!(critical_tau(2.0), 2f64.acosh(), max_relative = 1e-14);
        assert_relative_eq!(critical_modstar(1.0), 0.433_780_830_483_027_2, max_relative = 1e-14);
        let t = 40.0;
        assert!((critical_modstar(t) - (t - LN_2)).abs() < 1e-15 * t);
    }

    #[test]
    fn upsilon_examples() {
        assert_eq!(lambda_fn(1.0), 0.0);
        assert_relative_eq!(lambda_fn(coth(1.0)), 0.013_854_691_316_686_651, max_relative = 1e-12);
        assert_relative_eq!(upsilon(PI * PI / 2.0), 0.005_096_856_099_185_519_5, max_relative = 1e-12);
        assert_relative_eq!(upsilon(1e4), 0.567_706_050_806_919_33, max_relative = 1e-9);
        assert!(upsilon(1e8) > upsilon(1e4));
        assert!(upsilon(1e12) < 1.0);
    }

    #[test]
    fn upper_bound_examples() {
        assert_relative_eq!(upper_energy_bound(0.7, 0.7, 5.0), 10.0);
        assert_relative_eq!(upper_energy_bound(1.0, LN_2, 3.0 * PI), 20.129_838_696_392_388, max_relative = 1e-13);
        assert!(upper_energy_bound(1e-9, LN_2, 3.0 * PI) > 1e9);
    }

    #[test]
    fn green_examples() {
        let z = Complex64::new(0.3, -0.4);
        assert_relative_eq!(green_disk(z, Complex64::new(0.0, 0.0)).unwrap(), -z.norm().ln(), max_relative = 1e-14);
        assert_relative_eq!(
            green_disk(Complex64::new(0.5, 0.0), Complex64::new(-0.5, 0.0)).unwrap(),
            1.25f64.ln(),
            max_relative = 1e-14
        );
        assert!(green_disk(z, z).is_err());
        assert!(green_disk(Complex64::new(1.0, 0.0), z).is_err());
        let zeta = Complex64::new(0.1, 0.2);
        let near = Complex64::from_polar(1.0 - 1e-9, 0.4);
        assert!(green_disk(near, zeta).unwrap() < 1e-8);
    }

    #[test]
    fn green_lower_bound_examples() {
        assert_relative_eq!(green_lower_bound(E), 0.014_384_014_710_763_806, max_relative = 1e-11);
        assert!(green_lower_bound(1.0 + 1e-6) < 1e-300 || green_lower_bound(1.0 + 1e-6) == 0.0);
        let samples: Vec<f64> = [1.5, 2.0, 4.0, 10.0].iter().map(|&r| green_lower_bound(r)).collect();
        let frozen = [1.035_985_235_401_663e-5, 1.618_480_935_726_618_8e-3, 5.690_965_268_406_299e-2, 0.235_652_398_885_666_1];
        for (v, f) in samples.iter().zip(frozen) {
            assert_relative_eq!(*v, f, max_relative = 1e-9);
        }
        assert!(samples.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn affine_hopf_examples() {
        let z = Complex64::new(0.7, 1.1);
        let c = affine_hopf(z, 0.0) * z * z;
        assert_relative_eq!(c.re, -0.25, max_relative = 1e-14);
        assert!(c.im.abs() < 1e-14);
        assert_relative_eq!(c.re, nitsche_hopf_c(1.0), max_relative = 1e-14);
        assert_relative_eq!(affine_hopf(Complex64::new(1.0, 0.0), 0.5).re, -0.0625, max_relative = 1e-14);
        let at_i = affine_hopf(Complex64::new(0.0, 1.0), 0.5);
        assert_relative_eq!(at_i.re, 0.5625, max_relative = 1e-14);
        assert!(is_czsq_form(0.0) && !is_czsq_form(0.2));
    }

    #[test]
    fn appendix_bound_examples() {
        assert_eq!(appendix_energy_bound(1.0, 1.0, 1.0), 1.0);
        assert_relative_eq!(appendix_energy_bound(1.0, 2.0, 2.0 * E), 1.0 / E, max_relative = 1e-15);
        assert_relative_eq!(appendix_energy_bound(2.0, 0.3, 1.7), 4.0 * appendix_energy_bound(1.0, 0.3, 1.7));
        assert!(min_energy_annulus(1.0, 2.0).unwrap() > 1.0 / E);
    }

    #[test]
    fn branch_joins_smoothly() {
        let rstar = 2.0;
        let tc = critical_tau(rstar);
        let left = energy_slope(critical_radius(rstar), rstar).unwrap();
        assert!((left - 2.0 * PI).abs() < 1e-9);
        let h = 1e-7;
        let right = (min_energy_annulus(tc + h, rstar).unwrap() - min_energy_annulus(tc, rstar).unwrap()) / h;
        assert!((right - 2.0 * PI).abs() < 1e-6);
        let below = min_energy_annulus(tc - 1e-12, rstar).unwrap();
        let above = min_energy_annulus(tc + 1e-12, rstar).unwrap();
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn oracle_report_fields() {
        let rep = oracle_report(1.0, 2.0).unwrap();
        assert!(rep.in_nitsche_range);
        assert_relative_eq!(rep.hopf_c.unwrap(), -0.212_208_451_241_386_09, max_relative = 1e-12);
        assert!(rep.lower_bound <= rep.min_energy && rep.min_energy <= rep.upper_bound);
        let far = oracle_report(2.0, 2.0).unwrap();
        assert!(!far.in_nitsche_range && far.lambda.is_none());
        assert_eq!(far.slope, 2.0 * PI);
    }

    proptest! {
        #[test]
        fn hopf_constant_matches_slope(rstar in 1.01f64..20.0, frac in 0.0f64..1.0) {
            let r = 1.0 + 1e-3 + frac * (critical_radius(rstar) - 1.0 - 1e-3);
            let lam = nitsche_lambda(r, rstar).unwrap();
            let lhs = 8.0 * PI * nitsche_hopf_c(lam);
            let rhs = -energy_slope(r, rstar).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
        }

        #[test]
        fn lambda_in_range_and_signed(rstar in 1.01f64..20.0, frac in 0.0f64..1.0) {
            let r = 1.0 + 1e-6 + frac * (critical_radius(rstar) - 1.0 - 1e-6);
            let lam = nitsche_lambda(r, rstar).unwrap();
            prop_assert!(lam > -1.0 && lam <= 1.0);
            prop_assert_eq!(lam.signum() == (r - rstar).signum(), true);
        }

        #[test]
        fn min_energy_between_bounds(rstar in 1.05f64..6.0, tau in 0.05f64..3.0) {
            let e = min_energy_annulus(tau, rstar).unwrap();
            let area = PI * (rstar * rstar - 1.0);
            prop_assert!(e >= 2.0 * area * (1.0 - 1e-12));
            prop_assert!(e <= upper_energy_bound(tau, rstar.ln(), area) * (1.0 + 1e-12));
        }

        #[test]
        fn green_symmetric(a in 0.0f64..0.99, b in 0.0f64..0.99, t1 in 0.0f64..6.3, t2 in 0.0f64..6.3) {
            let z = Complex64::from_polar(a, t1);
            let w = Complex64::from_polar(b, t2);
            prop_assume!((z - w).norm() > 1e-6);
            let g1 = green_disk(z, w).unwrap();
            let g2 = green_disk(w, z).unwrap();
            prop_assert!(g1 > 0.0);
            prop_assert!((g1 - g2).abs() < 1e-12 * (1.0 + g1));
        }
    }

    #[test]
    fn min_energy_curve_shape() {
        let rstar = 2.0;
        let area = PI * (rstar * rstar - 1.0);
        let taus: Vec<f64> = (1..=30).map(|k| k as f64 * 0.1).collect();
        for &t in &taus {
            let e = min_energy_annulus(t, rstar).unwrap();
            assert!(e <= upper_energy_bound(t, rstar.ln(), area) + 1e-12);
            assert!(e >= 2.0 * area);
        }
        // convex on the Nitsche branch via the closed-form second derivative
        for k in 1..100 {
            let r = 1.0 + (critical_radius(rstar) - 1.0) * k as f64 / 100.0;
            assert!(energy_second_derivative(r, rstar).unwrap() >= 0.0);
        }
        // Lambda nonnegative and nondecreasing; Upsilon nondecreasing
        let ts: Vec<f64> = (0..200).map(|k| 1.0 + 0.05 * k as f64).collect();
        assert!(ts.windows(2).all(|w| lambda_fn(w[0]) <= lambda_fn(w[1]) && lambda_fn(w[0]) >= 0.0));
        let us: Vec<f64> = (0..200).map(|k| upsilon(0.01 * 1.05f64.powi(k))).collect();
        assert!(us.windows(2).all(|w| w[0] <= w[1]));
    }
}
