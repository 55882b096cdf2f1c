//! Property battery behind `annulus-energy verify`.

use std::f64::consts::PI;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use annulus_energy::closedform::{self, critical_radius, critical_tau};
use annulus_energy::energy::{dirichlet, reich_walczak_check};
use annulus_energy::harmonic::{poisson_modify, RegionMask};
use annulus_energy::mesh::winding;
use annulus_energy::minimize::{self, MinimizeResult};
use annulus_energy::{Complex64, ComplexField, LogPolarGrid, MinimizeOptions, TargetDomain};

use crate::bound_checks;

pub const CHECKS: [&str; 9] = [
    "energy",
    "bounds",
    "reich-walczak",
    "hopf",
    "degree",
    "collapse",
    "power-stretch",
    "poisson",
    "oracle",
];

const ENERGY_TOL: f64 = 0.01;
const HOPF_TOL: f64 = 0.05;
const HOPF_RESIDUAL: f64 = 1e-2;
const STRETCH_TOL: f64 = 0.005;
const BAND_TOL: f64 = 0.10;
const POISSON_TRIALS: usize = 20;
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub rstar: f64,
    pub ns: usize,
    pub ntheta: usize,
    pub opts: MinimizeOptions,
}

/// Source moduli probed: below, at and above `log R*` on the Nitsche branch,
/// and one point in the collapse regime.
pub fn sample_taus(rstar: f64) -> [f64; 4] {
    let m = rstar.ln();
    let tc = critical_tau(rstar);
    [0.75 * m, m, m + 0.6 * (tc - m), tc + 0.5]
}

struct Run {
    tau: f64,
    result: MinimizeResult,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn run(s: &Settings, only: &[String]) -> Result<Vec<Check>> {
    let wanted = |name: &str| only.is_empty() || only.iter().any(|o| o == name);
    let target = TargetDomain::circular(s.rstar)?;
    let needs_runs = CHECKS[..6].iter().any(|c| wanted(c));
    let runs: Vec<Run> = if needs_runs {
        sample_taus(s.rstar)
            .into_iter()
            .map(|tau| {
                let grid = LogPolarGrid::new(tau, s.ns, s.ntheta)?;
                Ok(Run { tau, result: minimize::minimize(&grid, &target, &s.opts)? })
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let tc = critical_tau(s.rstar);
    let m = s.rstar.ln();

    let mut out = Vec::new();
    for &name in CHECKS.iter().filter(|c| wanted(c)) {
        let (passed, detail) = match name {
            "energy" => {
                let mut worst = 0.0f64;
                let mut all_converged = true;
                for r in &runs {
                    all_converged &= r.result.converged;
                    let exact = closedform::min_energy_annulus(r.tau, s.rstar)?;
                    worst = worst.max(rel(r.result.energy.total, exact));
                }
                (
                    all_converged && worst <= ENERGY_TOL,
                    format!("max rel err vs closed form {worst:.2e} (tol {ENERGY_TOL}), all converged: {all_converged}"),
                )
            }
            "bounds" => {
                let ok = runs.iter().all(|r| {
                    let b = bound_checks(r.tau, &target, m, r.result.energy.total);
                    b.lower_ok && b.upper_ok && b.appendix_ok
                });
                (ok, format!("2|target| <= E <= stretch bound (slack {}), E above appendix bound", crate::BOUND_SLACK))
            }
            "reich-walczak" => {
                let mut worst = f64::INFINITY;
                let mut ok = true;
                for r in runs.iter().filter(|r| r.tau <= tc) {
                    let rw = reich_walczak_check(&r.result.field, m);
                    ok &= rw.normal_ok && rw.tangential_ok;
                    worst = worst
                        .min(rw.report.kn_integral / rw.normal_bound - 1.0)
                        .min(rw.report.kt_integral / rw.tangential_bound - 1.0);
                }
                (ok, format!("min relative margin {worst:.2e}"))
            }
            "hopf" => {
                let signs = runs.iter().all(|r| r.result.hopf.sign_consistent);
                let mut ok = signs;
                let mut parts = Vec::new();
                for r in &runs {
                    if r.tau == m {
                        parts.push(format!("c at log R* {:.1e}", r.result.hopf.c));
                    }
                    if let Some(c) = minimize::hopf_oracle(r.tau, &target).filter(|_| r.tau != m) {
                        let err = rel(r.result.hopf.c, c);
                        ok &= err <= HOPF_TOL && r.result.hopf.residual < HOPF_RESIDUAL;
                        parts.push(format!("tau {:.4}: rel {err:.1e} res {:.1e}", r.tau, r.result.hopf.residual));
                    }
                }
                (ok, format!("signs consistent: {signs}, {}", parts.join(", ")))
            }
            "degree" => {
                let mut bad = 0;
                for r in &runs {
                    let g = r.result.field.grid();
                    bad += (0..g.n_s())
                        .filter(|&i| winding(&r.result.field, i, Complex64::new(0.0, 0.0)) != Ok(1))
                        .count();
                }
                (bad == 0, format!("rows with winding != 1: {bad}"))
            }
            "collapse" => {
                let mut worst = 0.0f64;
                for r in runs.iter().filter(|r| r.tau > tc) {
                    worst = worst.max(rel(r.result.state.inner_contact_extent(), r.tau - tc));
                }
                (worst <= BAND_TOL, format!("band extent vs tau - arccosh R*: rel {worst:.2e} (tol {BAND_TOL})"))
            }
            "power-stretch" => {
                let grid = LogPolarGrid::new(m, s.ns, s.ntheta)?;
                let state = minimize::initial_state(&grid, &target);
                let mut worst = 0.0f64;
                for alpha in [0.5, 2.0] {
                    let (dn, dt) = minimize::power_stretch_transform_check(&state, alpha)?;
                    worst = worst.max((dn / alpha).abs()).max((dt * alpha).abs());
                }
                (worst <= STRETCH_TOL, format!("max ratio defect {worst:.2e} (tol {STRETCH_TOL})"))
            }
            "poisson" => poisson_battery(s)?,
            "oracle" => oracle_battery(s.rstar),
            _ => unreachable!("names come from CHECKS"),
        };
        out.push(Check { name, passed, detail });
    }
    Ok(out)
}

fn poisson_battery(s: &Settings) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_gain = f64::NEG_INFINITY;
    let mut worst_drift = 0.0f64;
    let (ns, nt) = (s.ns, s.ntheta);
    for _ in 0..POISSON_TRIALS {
        let grid = LogPolarGrid::new(rng.gen_range(0.3..2.5), ns, nt)?;
        let amp = rng.gen_range(0.0..0.4);
        let values = (0..grid.len())
            .map(|k| {
                Complex64::from_polar(grid.s(k / nt).exp(), grid.theta(k % nt))
                    + amp * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let f = ComplexField::new(grid, values)?;
        let density = rng.gen_range(0.2..1.0);
        let inside: Vec<bool> = (0..grid.len())
            .map(|k| {
                let i = k / nt;
                i > 0 && i + 1 < ns && rng.gen_bool(density)
            })
            .collect();
        let mask = RegionMask::new(&grid, inside)?;
        let once = poisson_modify(&f, &mask)?;
        let twice = poisson_modify(&once, &mask)?;
        let e0 = dirichlet(&f).total;
        worst_gain = worst_gain.max((dirichlet(&once).total - e0) / e0);
        let drift = once.values().iter().zip(twice.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst_drift = worst_drift.max(drift);
    }
    Ok((
        worst_gain <= 1e-10 && worst_drift <= 1e-8,
        format!("{POISSON_TRIALS} masks: max relative energy change {worst_gain:.2e}, idempotence drift {worst_drift:.1e}"),
    ))
}

fn oracle_battery(rstar: f64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let rs = rng.gen_range(1.01..50.0);
        let r = 1.0 + rng.gen_range(1e-3..1.0) * (critical_radius(rs) - 1.0);
        let lam = closedform::nitsche_lambda(r, rs).expect("sampled inside the Nitsche range");
        let slope = closedform::energy_slope(r, rs).expect("sampled inside the Nitsche range");
        worst = worst.max((8.0 * PI * closedform::nitsche_hopf_c(lam) + slope).abs() / (1.0 + slope.abs()));
    }
    let lambda_zero = closedform::lambda_fn(1.0) == 0.0;
    let us: Vec<f64> = (0..200)
        .map(|k| closedform::upsilon(10f64.powf(-2.0 + 8.0 * k as f64 / 199.0)))
        .collect();
    let monotone = us.windows(2).all(|w| w[1] >= w[0]);
    let tc = critical_tau(rstar);
    let left = closedform::energy_slope(critical_radius(rstar), rstar).unwrap_or(f64::NAN);
    let e = |t: f64| closedform::min_energy_annulus(t, rstar).unwrap_or(f64::NAN);
    let right = (e(tc + 2e-3) - e(tc + 1e-3)) / 1e-3;
    let join = (left - 2.0 * PI).abs().max((right - 2.0 * PI).abs());
    (
        worst <= 1e-12 && lambda_zero && monotone && join <= 1e-9,
        format!("8 pi c + slope {worst:.1e}, Lambda(1) = 0: {lambda_zero}, Upsilon monotone: {monotone}, slope join {join:.1e}"),
    )
}

/// Fixed-width pass/fail table.
pub fn render(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!("{:<14} {}  {}\n", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail));
    }
    s
}
