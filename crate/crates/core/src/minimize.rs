//! Direct minimization of the discrete Dirichlet energy.
//!
//! A candidate map is stored in target polar coordinates: `rho` is the radius
//! of the pre-shear image point and `Theta = theta + psi` its angle, so the
//! map is `shear(rho e^{i Theta})`. The closure constraint becomes the box
//! `1 <= rho <= R*`, which lets the minimizer press an inner band of the
//! source flat onto the unit circle when the source is too thick for a
//! homeomorphic minimizer to exist.
//!
//! The two boundary circles are held on the matching target circles
//! (`rho = 1` on the inner row, `rho = R*` on the outer row) and slide freely
//! along them through `psi`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform;
use crate::domain::TargetDomain;
use crate::energy::{dirichlet, dirichlet_with_gradient, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::harmonic::capacity_modulus;
use crate::hopf::{fit_constant, hopf_field, HopfFit, HopfSign};
use crate::mesh::{ComplexField, LogPolarGrid};
use crate::optimizer::{minimize_box, Bounds, LbfgsOptions};

/// Resolution of the capacity solve used for sheared targets.
pub const MODULUS_RESOLUTION: (usize, usize) = (64, 128);

/// Map in target polar coordinates on a log-polar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarMapState {
    grid: LogPolarGrid,
    rho: Vec<f64>,
    psi: Vec<f64>,
    target: TargetDomain,
}

impl PolarMapState {
    pub fn new(grid: LogPolarGrid, rho: Vec<f64>, psi: Vec<f64>, target: TargetDomain) -> Result<Self> {
        for v in [&rho, &psi] {
            if v.len() != grid.len() {
                return Err(Error::ShapeMismatch {
                    expected: grid.shape(),
                    got: (v.len() / grid.n_theta(), grid.n_theta()),
                });
            }
        }
        let rstar = target.rstar();
        if let Some(bad) = rho.iter().find(|r| !(1.0..=rstar).contains(*r)) {
            return Err(Error::InvalidArgument(format!("rho = {bad} outside [1, {rstar}]")));
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("psi must be finite".into()));
        }
        let mut st = Self { grid, rho, psi, target };
        st.recentre();
        Ok(st)
    }

    pub fn grid(&self) -> &LogPolarGrid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn target(&self) -> &TargetDomain {
        &self.target
    }

    /// The map `shear(rho e^{i (theta + psi)})` sampled on the grid.
    pub fn field(&self) -> ComplexField {
        let g = self.grid;
        let values = (0..g.len())
            .map(|k| {
                let theta = g.theta(k % g.n_theta()) + self.psi[k];
                self.target.shear(Complex64::from_polar(self.rho[k], theta))
            })
            .collect();
        ComplexField::new(g, values).expect("state values are finite")
    }

    /// `s`-extent of the band of rows pressed onto `rho = 1`: the `s` of the
    /// outermost row whose nodes all lie on the face, counting up from the
    /// inner boundary. Zero when only the inner boundary row is on it.
    pub fn inner_contact_extent(&self) -> f64 {
        let g = self.grid;
        let on_face = |i: usize| self.rho[i * g.n_theta()..(i + 1) * g.n_theta()].iter().all(|&r| r <= 1.0);
        let last = (0..g.n_s()).take_while(|&i| on_face(i)).last().unwrap_or(0);
        g.s(last)
    }

    fn recentre(&mut self) {
        gauge(&mut self.psi, self.grid.n_theta());
    }
}

/// Shifts `psi` so its mean over the inner boundary row vanishes.
fn gauge(psi: &mut [f64], n_theta: usize) {
    let mean = psi[..n_theta].iter().sum::<f64>() / n_theta as f64;
    psi.iter_mut().for_each(|p| *p -= mean);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iter: 5000, grad_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub state: PolarMapState,
    pub field: ComplexField,
    pub energy: EnergyBreakdown,
    pub hopf: HopfFit,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// Modulus of the target used for the Hopf sign prediction.
    pub target_modulus: f64,
    /// Energy after each accepted optimizer step.
    pub trace: Vec<f64>,
}

/// Radial power stretch `rho = e^{alpha s}` with `alpha = log R* / tau`, clamped to the box.
pub fn initial_state(grid: &LogPolarGrid, t: &TargetDomain) -> PolarMapState {
    let alpha = t.rstar().ln() / grid.tau();
    let last = grid.n_s() - 1;
    let rho = (0..grid.len())
        .map(|k| {
            let i = k / grid.n_theta();
            if i == last {
                t.rstar()
            } else {
                (alpha * grid.s(i)).exp().clamp(1.0, t.rstar())
            }
        })
        .collect();
    PolarMapState {
        grid: *grid,
        rho,
        psi: vec![0.0; grid.len()],
        target: *t,
    }
}

pub fn energy_of_state(st: &PolarMapState) -> EnergyBreakdown {
    dirichlet(&st.field())
}

/// Energy and its gradient with respect to `(rho, psi)`, packed as `[rho..., psi...]`.
fn energy_and_gradient(grid: &LogPolarGrid, t: &TargetDomain, x: &[f64], grad: &mut [f64]) -> f64 {
    let n = grid.len();
    let (rho, psi) = x.split_at(n);
    let values = (0..n)
        .map(|k| t.shear(Complex64::from_polar(rho[k], grid.theta(k % grid.n_theta()) + psi[k])))
        .collect::<Vec<_>>();
    let f = match ComplexField::new(*grid, values) {
        Ok(f) => f,
        Err(_) => return f64::NAN,
    };
    let (e, g) = dirichlet_with_gradient(&f);
    let (g_rho, g_psi) = grad.split_at_mut(n);
    for k in 0..n {
        let e_theta = Complex64::from_polar(1.0, grid.theta(k % grid.n_theta()) + psi[k]);
        let d_rho = t.shear(e_theta);
        let d_psi = t.shear(Complex64::i() * rho[k] * e_theta);
        g_rho[k] = (g[k].conj() * d_rho).re;
        g_psi[k] = (g[k].conj() * d_psi).re;
    }
    e
}

fn box_bounds(grid: &LogPolarGrid, t: &TargetDomain) -> Bounds {
    let n = grid.len();
    let nt = grid.n_theta();
    let mut lower = vec![1.0; n];
    let mut upper = vec![t.rstar(); n];
    upper[..nt].iter_mut().for_each(|v| *v = 1.0);
    lower[n - nt..].iter_mut().for_each(|v| *v = t.rstar());
    lower.extend(std::iter::repeat(f64::NEG_INFINITY).take(n));
    upper.extend(std::iter::repeat(f64::INFINITY).take(n));
    Bounds { lower, upper }
}

/// Modulus of the target: exact for circular targets, from capacity otherwise.
pub fn target_modulus(t: &TargetDomain) -> Result<f64> {
    match t.exact_modulus() {
        Some(m) => Ok(m),
        None => capacity_modulus(t, MODULUS_RESOLUTION.0, MODULUS_RESOLUTION.1),
    }
}

/// Minimizes the discrete energy from the power-stretch initial state.
pub fn minimize(grid: &LogPolarGrid, t: &TargetDomain, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    minimize_from(initial_state(grid, t), opts)
}

/// Minimizes the discrete energy starting from `start`.
pub fn minimize_from(start: PolarMapState, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !(opts.grad_tol > 0.0 && opts.grad_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("grad_tol must be positive (got {})", opts.grad_tol)));
    }
    let grid = start.grid;
    let t = start.target;
    let n = grid.len();
    let nt = grid.n_theta();
    let modulus = target_modulus(&t)?;

    let mut x0 = start.rho;
    x0.extend_from_slice(&start.psi);
    let lbfgs = LbfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        ..LbfgsOptions::default()
    };
    let report = minimize_box(
        |x, g| energy_and_gradient(&grid, &t, x, g),
        |x| gauge(&mut x[n..], nt),
        &x0,
        &box_bounds(&grid, &t),
        &lbfgs,
    )?;

    let (rho, psi) = report.x.split_at(n);
    let state = PolarMapState {
        grid,
        rho: rho.to_vec(),
        psi: psi.to_vec(),
        target: t,
    };
    let field = state.field();
    let energy = dirichlet(&field);
    let hopf = fit_constant(&hopf_field(&field), HopfSign::predicted(grid.tau(), modulus));
    Ok(MinimizeResult {
        state,
        field,
        energy,
        hopf,
        iterations: report.iterations,
        converged: report.converged,
        grad_norm: report.grad_norm,
        target_modulus: modulus,
        trace: report.trace,
    })
}

/// One row of an energy curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub energy: EnergyBreakdown,
    pub hopf: HopfFit,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes independently at every `tau`, running up to `jobs` points at once.
/// The table comes back in `tau` order.
pub fn energy_curve(
    taus: &[f64],
    t: &TargetDomain,
    n_s: usize,
    n_theta: usize,
    opts: &MinimizeOptions,
    jobs: usize,
) -> Result<Vec<CurvePoint>> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("tau list is empty".into()));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("tau list must be strictly increasing".into()));
    }
    let run = |&tau: &f64| -> Result<CurvePoint> {
        let grid = LogPolarGrid::new(tau, n_s, n_theta)?;
        let r = minimize(&grid, t, opts)?;
        Ok(CurvePoint {
            tau,
            energy: r.energy,
            hopf: r.hopf,
            converged: r.converged,
            iterations: r.iterations,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| taus.par_iter().map(run).collect())
}

/// Composes the state with the power stretch `(s, theta) -> (alpha s, theta)`
/// on the companion grid of modulus `tau / alpha` (same `ds`, cubic resampling
/// in `s`) and returns `(E_N ratio - alpha, E_T ratio - 1 / alpha)`.
///
/// A normal energy vanishing (relative to the total) on both sides counts as
/// an exact match.
pub fn power_stretch_transform_check(st: &PolarMapState, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive (got {alpha})")));
    }
    let g = st.grid;
    let tau_new = g.tau() / alpha;
    let rows = (((g.n_s() - 1) as f64 / alpha).round() as usize + 1).max(4);
    let companion = LogPolarGrid::new(tau_new, rows, g.n_theta())?;
    let nt = g.n_theta();
    let mut rho = Vec::with_capacity(companion.len());
    let mut psi = Vec::with_capacity(companion.len());
    for i in 0..rows {
        let s_src = (alpha * companion.s(i)).min(g.tau());
        for j in 0..nt {
            let column = |v: &[f64], k: usize| v[k * nt + j];
            rho.push(cubic_sample(&g, |k| column(&st.rho, k), s_src).clamp(1.0, st.target.rstar()));
            psi.push(cubic_sample(&g, |k| column(&st.psi, k), s_src));
        }
    }
    let stretched = PolarMapState::new(companion, rho, psi, st.target)?;
    let before = energy_of_state(st);
    let after = energy_of_state(&stretched);
    let scale = before.total.max(f64::MIN_POSITIVE);
    let normal_defect = if before.normal <= 1e-12 * scale && after.normal <= 1e-12 * scale {
        0.0
    } else {
        after.normal / before.normal - alpha
    };
    Ok((normal_defect, after.tangential / before.tangential - 1.0 / alpha))
}

/// Four-point Lagrange interpolation of row data `v(k)` at `s`.
fn cubic_sample(g: &LogPolarGrid, v: impl Fn(usize) -> f64, s: f64) -> f64 {
    let ds = g.ds();
    let last = g.n_s() - 1;
    let pos = (s / ds).clamp(0.0, last as f64);
    let base = (pos.floor() as usize).min(last - 1);
    let start = base.saturating_sub(1).min(last - 3);
    let x = pos - start as f64;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (x - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += w * v(start + a);
    }
    acc
}

/// Closed-form Hopf constant for a circular target in the Nitsche range.
pub fn hopf_oracle(tau: f64, t: &TargetDomain) -> Option<f64> {
    if !t.is_circular() || tau > closedform::critical_tau(t.rstar()) {
        return None;
    }
    let lambda = closedform::nitsche_lambda(tau.exp(), t.rstar()).ok()?;
    Some(closedform::nitsche_hopf_c(lambda))
}
