//! Discrete Laplace solves, Poisson modification and capacity modulus.
//!
//! The 5-point stencil in `(s, theta)` is exactly the Euler-Lagrange operator
//! of the edge form of the discrete energy on interior rows, so replacing a
//! field by its discrete harmonic extension never raises [`crate::energy::dirichlet`].

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::domain::TargetDomain;
use crate::error::{Error, Result};
use crate::mesh::{ComplexField, LogPolarGrid};

/// Relative residual at which the conjugate-gradient solves stop.
pub const SOLVER_TOL: f64 = 1e-10;

/// Grid subregion whose values are recomputed; all other nodes are fixed data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    n_s: usize,
    n_theta: usize,
    inside: Vec<bool>,
}

impl RegionMask {
    pub fn new(grid: &LogPolarGrid, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.shape(),
                got: (inside.len() / grid.n_theta().max(1), grid.n_theta()),
            });
        }
        let (n_s, n_theta) = grid.shape();
        for row in [0, n_s - 1] {
            if inside[row * n_theta..(row + 1) * n_theta].iter().any(|&b| b) {
                return Err(Error::MaskTouchesBoundary(row));
            }
        }
        Ok(Self { n_s, n_theta, inside })
    }

    pub fn from_fn(grid: &LogPolarGrid, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let inside = (0..grid.n_s())
            .flat_map(|i| (0..grid.n_theta()).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(grid, inside)
    }

    pub fn empty(grid: &LogPolarGrid) -> Self {
        Self {
            n_s: grid.n_s(),
            n_theta: grid.n_theta(),
            inside: vec![false; grid.len()],
        }
    }

    /// Every node off the two boundary rows.
    pub fn interior(grid: &LogPolarGrid) -> Self {
        Self::from_fn(grid, |i, _| i > 0 && i + 1 < grid.n_s()).expect("interior rows only")
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.inside[i * self.n_theta + j]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    fn check_grid(&self, grid: &LogPolarGrid) -> Result<()> {
        if grid.shape() != (self.n_s, self.n_theta) {
            return Err(Error::ShapeMismatch {
                expected: grid.shape(),
                got: (self.n_s, self.n_theta),
            });
        }
        Ok(())
    }
}

/// Preconditioned conjugate gradient for an SPD operator with diagonal `diag`.
/// Stops once `|r| <= tol |b|`.
fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = b.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = dot(&r, &r).sqrt();
        if res <= tol * b_norm {
            return Ok(it);
        }
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let residual = dot(&r, &r).sqrt() / b_norm;
    if residual <= tol {
        Ok(max_iter)
    } else {
        Err(Error::SolverDiverged { iterations: max_iter, residual })
    }
}

/// Discrete harmonic extension of `boundary` into `mask`.
///
/// Nodes outside the mask keep their values. Real and imaginary parts are
/// solved separately.
pub fn laplace_solve(boundary: &ComplexField, mask: &RegionMask) -> Result<ComplexField> {
    let g = *boundary.grid();
    mask.check_grid(&g)?;
    let nodes: Vec<(usize, usize)> = (0..g.n_s())
        .flat_map(|i| (0..g.n_theta()).map(move |j| (i, j)))
        .filter(|&(i, j)| mask.contains(i, j))
        .collect();
    if nodes.is_empty() {
        return Ok(boundary.clone());
    }
    let mut slot = vec![usize::MAX; g.len()];
    for (k, &(i, j)) in nodes.iter().enumerate() {
        slot[g.index(i, j)] = k;
    }
    let ws = 1.0 / (g.ds() * g.ds());
    let wt = 1.0 / (g.dtheta() * g.dtheta());
    let centre = 2.0 * (ws + wt);
    let neighbours = |i: usize, j: usize| {
        [
            (g.index(i - 1, j), ws),
            (g.index(i + 1, j), ws),
            (g.index(i, g.prev_col(j)), wt),
            (g.index(i, g.next_col(j)), wt),
        ]
    };

    let apply = |x: &[f64], out: &mut [f64]| {
        for (k, &(i, j)) in nodes.iter().enumerate() {
            let mut acc = centre * x[k];
            for (idx, w) in neighbours(i, j) {
                if slot[idx] != usize::MAX {
                    acc -= w * x[slot[idx]];
                }
            }
            out[k] = acc;
        }
    };
    let diag = vec![centre; nodes.len()];
    let max_iter = 20 * nodes.len() + 1000;

    let mut values = boundary.values().to_vec();
    for part in 0..2 {
        let pick = |v: Complex64| if part == 0 { v.re } else { v.im };
        let rhs: Vec<f64> = nodes
            .iter()
            .map(|&(i, j)| {
                neighbours(i, j)
                    .iter()
                    .filter(|(idx, _)| slot[*idx] == usize::MAX)
                    .map(|&(idx, w)| w * pick(boundary.values()[idx]))
                    .sum()
            })
            .collect();
        let mut x = vec![0.0; nodes.len()];
        conjugate_gradient(apply, &diag, &rhs, &mut x, SOLVER_TOL, max_iter)?;
        for (k, &(i, j)) in nodes.iter().enumerate() {
            let v = &mut values[g.index(i, j)];
            if part == 0 {
                v.re = x[k];
            } else {
                v.im = x[k];
            }
        }
    }
    ComplexField::new(g, values)
}

/// Replaces `f` inside `mask` by the harmonic extension of its own trace.
pub fn poisson_modify(f: &ComplexField, mask: &RegionMask) -> Result<ComplexField> {
    laplace_solve(f, mask)
}

/// Symmetric 2x2 tensor `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy)]
struct Tensor2 {
    a: f64,
    b: f64,
    c: f64,
}

impl Tensor2 {
    fn quad(&self, x: f64, y: f64) -> f64 {
        self.a * x * x + 2.0 * self.b * x * y + self.c * y * y
    }

    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a * x + self.b * y, self.b * x + self.c * y)
    }
}

/// Pullback of the Dirichlet form through `(s, theta) -> shear(e^{s + i theta})`:
/// `det(M) R_theta^T (M^T M)^{-1} R_theta` with `M = diag(1 + delta, 1 - delta)`.
fn sheared_metric(delta: f64, theta: f64) -> Tensor2 {
    let (p, q) = (1.0 + delta, 1.0 - delta);
    let det = p * q;
    let (di, dj) = (1.0 / (p * p), 1.0 / (q * q));
    let (c, s) = (theta.cos(), theta.sin());
    Tensor2 {
        a: det * (c * c * di + s * s * dj),
        b: det * (c * s * (dj - di)),
        c: det * (s * s * di + c * c * dj),
    }
}

/// P1 energy `sum_T |T| grad u^T A grad u` on the cell triangulation used by
/// [`crate::energy`], with `A` evaluated at each triangle centroid. Writes the
/// gradient with respect to `u` when requested.
fn capacity_energy(grid: &LogPolarGrid, delta: f64, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let (ds, dt) = (grid.ds(), grid.dtheta());
    let area = 0.5 * ds * dt;
    let mut total = 0.0;
    let mut grad = grad;
    if let Some(gr) = grad.as_deref_mut() {
        gr.iter_mut().for_each(|v| *v = 0.0);
    }
    for j in 0..grid.n_theta() {
        let jn = grid.next_col(j);
        let lower = sheared_metric(delta, grid.theta(j) + 2.0 * dt / 3.0);
        let upper = sheared_metric(delta, grid.theta(j) + dt / 3.0);
        for i in 0..grid.n_s() - 1 {
            let a = grid.index(i, j);
            let b = grid.index(i + 1, j);
            let c = grid.index(i + 1, jn);
            let d = grid.index(i, jn);

            let us = (u[b] - u[a]) / ds;
            let ut = (u[c] - u[b]) / dt;
            total += area * lower.quad(us, ut);
            if let Some(gr) = grad.as_deref_mut() {
                let (gs, gt) = lower.apply(us, ut);
                let (gs, gt) = (2.0 * area * gs / ds, 2.0 * area * gt / dt);
                gr[a] -= gs;
                gr[b] += gs - gt;
                gr[c] += gt;
            }

            let us = (u[c] - u[d]) / ds;
            let ut = (u[d] - u[a]) / dt;
            total += area * upper.quad(us, ut);
            if let Some(gr) = grad.as_deref_mut() {
                let (gs, gt) = upper.apply(us, ut);
                let (gs, gt) = (2.0 * area * gs / ds, 2.0 * area * gt / dt);
                gr[d] -= gs;
                gr[c] += gs;
                gr[d] += gt;
                gr[a] -= gt;
            }
        }
    }
    total
}

fn capacity_modulus_at(t: &TargetDomain, n_s: usize, n_theta: usize) -> Result<f64> {
    let grid = LogPolarGrid::new(t.rstar().ln(), n_s, n_theta)?;
    let delta = t.delta();
    let n = grid.len();
    let nt = grid.n_theta();
    let interior = nt..n - nt;

    let mut u: Vec<f64> = (0..n).map(|k| if k >= n - nt { 1.0 } else { 0.0 }).collect();

    // residual of the boundary lift, then K_II x = -(K u_B)_I
    let mut full = vec![0.0; n];
    capacity_energy(&grid, delta, &u, Some(&mut full));
    let rhs: Vec<f64> = full[interior.clone()].iter().map(|v| -0.5 * v).collect();

    let apply = |x: &[f64], out: &mut [f64]| {
        let mut v = vec![0.0; n];
        v[interior.clone()].copy_from_slice(x);
        let mut gr = vec![0.0; n];
        capacity_energy(&grid, delta, &v, Some(&mut gr));
        for (o, gv) in out.iter_mut().zip(&gr[interior.clone()]) {
            *o = 0.5 * gv;
        }
    };
    let mut diag = vec![0.0; n - 2 * nt];
    {
        let mut e = vec![0.0; n];
        for k in 0..nt {
            e[nt + k] = 1.0;
            // the stiffness diagonal is independent of s, so one row suffices
            let val = capacity_energy(&grid, delta, &e, None);
            e[nt + k] = 0.0;
            for row in 0..n_s - 2 {
                diag[row * nt + k] = val;
            }
        }
    }
    let mut x = vec![0.0; n - 2 * nt];
    conjugate_gradient(apply, &diag, &rhs, &mut x, SOLVER_TOL, 20 * n + 1000)?;
    u[interior].copy_from_slice(&x);
    let cap = capacity_energy(&grid, delta, &u, None);
    Ok(2.0 * PI / cap)
}

/// Conformal modulus of the target from its condenser capacity, `2 pi / cap`.
///
/// The potential is solved on `n_s x n_theta` and again at half resolution;
/// a disagreement above 1% is reported as [`Error::ResolutionTooCoarse`].
pub fn capacity_modulus(t: &TargetDomain, n_s: usize, n_theta: usize) -> Result<f64> {
    let fine = capacity_modulus_at(t, n_s, n_theta)?;
    let coarse_s = (n_s / 2).max(4);
    let coarse_t = ((n_theta / 2).max(8) + 1) & !1;
    let coarse = capacity_modulus_at(t, coarse_s, coarse_t)?;
    if (fine - coarse).abs() > 0.01 * fine {
        return Err(Error::ResolutionTooCoarse { fine, coarse });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::dirichlet;
    use crate::mesh::build_grid;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(g: LogPolarGrid) -> ComplexField {
        ComplexField::from_fn(g, |s, t| Complex64::from_polar(s.exp(), t))
    }

    fn max_dev(a: &ComplexField, b: &ComplexField) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn random_mask(g: &LogPolarGrid, rng: &mut ChaCha8Rng) -> RegionMask {
        let density = rng.gen_range(0.05..0.95);
        let inside = (0..g.len())
            .map(|k| {
                let i = k / g.n_theta();
                i > 0 && i + 1 < g.n_s() && rng.gen_bool(density)
            })
            .collect();
        RegionMask::new(g, inside).unwrap()
    }

    fn random_field(g: LogPolarGrid, rng: &mut ChaCha8Rng) -> ComplexField {
        let amp = rng.gen_range(0.0..0.5);
        let k = rng.gen_range(1..4) as f64;
        let values = (0..g.len())
            .map(|idx| {
                let (i, j) = (idx / g.n_theta(), idx % g.n_theta());
                let base = Complex64::from_polar(g.s(i).exp(), g.theta(j) + amp * (k * g.theta(j)).sin());
                base + amp * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        ComplexField::new(g, values).unwrap()
    }

    #[test]
    fn mask_validation() {
        let g = build_grid(1.0, 8, 16).unwrap();
        assert_eq!(RegionMask::from_fn(&g, |i, _| i == 0), Err(Error::MaskTouchesBoundary(0)));
        assert_eq!(RegionMask::from_fn(&g, |i, _| i == 7), Err(Error::MaskTouchesBoundary(7)));
        assert!(RegionMask::new(&g, vec![false; 10]).is_err());
        assert_eq!(RegionMask::interior(&g).count(), 6 * 16);
        let other = build_grid(1.0, 10, 16).unwrap();
        let f = identity(other);
        assert!(laplace_solve(&f, &RegionMask::empty(&g)).is_err());
    }

    #[test]
    fn linear_in_s_is_reproduced() {
        let g = build_grid(1.3, 17, 32).unwrap();
        let f = ComplexField::from_fn(g, |s, _| Complex64::new(s, -2.0 * s));
        let mask = RegionMask::from_fn(&g, |i, j| (3..14).contains(&i) && (j < 10 || j > 25)).unwrap();
        let out = laplace_solve(&f, &mask).unwrap();
        assert!(max_dev(&out, &f) < 1e-9);
    }

    #[test]
    fn constant_boundary_gives_constant() {
        let g = build_grid(0.7, 12, 24).unwrap();
        let c = Complex64::new(1.5, -0.25);
        let out = laplace_solve(&ComplexField::constant(g, c), &RegionMask::interior(&g)).unwrap();
        assert!(out.values().iter().all(|v| (v - c).norm() < 1e-10));
    }

    #[test]
    fn matches_dense_solve() {
        let g = build_grid(1.0, 17, 32).unwrap();
        let f = identity(g);
        let mask = RegionMask::interior(&g);
        let out = laplace_solve(&f, &mask).unwrap();

        let n_in = 15 * 32;
        let ws = 1.0 / (g.ds() * g.ds());
        let wt = 1.0 / (g.dtheta() * g.dtheta());
        let slot = |i: usize, j: usize| (i - 1) * 32 + j;
        let mut a = DMatrix::<f64>::zeros(n_in, n_in);
        let mut br = DVector::<f64>::zeros(n_in);
        let mut bi = DVector::<f64>::zeros(n_in);
        for i in 1..16 {
            for j in 0..32 {
                let k = slot(i, j);
                a[(k, k)] = 2.0 * (ws + wt);
                for (ni, nj, w) in [(i - 1, j, ws), (i + 1, j, ws), (i, (j + 31) % 32, wt), (i, (j + 1) % 32, wt)] {
                    if ni == 0 || ni == 16 {
                        br[k] += w * f.at(ni, nj).re;
                        bi[k] += w * f.at(ni, nj).im;
                    } else {
                        a[(k, slot(ni, nj))] -= w;
                    }
                }
            }
        }
        let lu = a.lu();
        let xr = lu.solve(&br).unwrap();
        let xi = lu.solve(&bi).unwrap();
        for i in 1..16 {
            for j in 0..32 {
                let dense = Complex64::new(xr[slot(i, j)], xi[slot(i, j)]);
                assert!((out.at(i, j) - dense).norm() < 1e-8, "({i}, {j})");
            }
        }
        // e^{s + i theta} is harmonic; the discrete extension agrees to O(h^2)
        assert!(max_dev(&out, &f) < 2e-3);
    }

    #[test]
    fn harmonic_extension_converges_to_exponential() {
        let mut prev = f64::INFINITY;
        for (n_s, n_t) in [(9, 16), (17, 32), (33, 64)] {
            let g = build_grid(1.0, n_s, n_t).unwrap();
            let f = identity(g);
            let err = max_dev(&laplace_solve(&f, &RegionMask::interior(&g)).unwrap(), &f);
            assert!(err < prev / 3.0, "{err} vs {prev}");
            prev = err;
        }
    }

    #[test]
    fn empty_mask_is_identity() {
        let g = build_grid(1.0, 10, 16).unwrap();
        let f = identity(g);
        assert_eq!(poisson_modify(&f, &RegionMask::empty(&g)).unwrap(), f);
    }

    #[test]
    fn bump_energy_strictly_decreases() {
        let g = build_grid(1.0, 33, 64).unwrap();
        let f = ComplexField::from_fn(g, |s, t| {
            let bump = (-((s - 0.5).powi(2) + (t - PI).powi(2)) / 0.02).exp();
            Complex64::from_polar(s.exp(), t) + 0.3 * bump
        });
        let mask = RegionMask::from_fn(&g, |i, j| (8..25).contains(&i) && (20..44).contains(&j)).unwrap();
        let out = poisson_modify(&f, &mask).unwrap();
        assert!(dirichlet(&out).total < dirichlet(&f).total - 0.1);
        let again = poisson_modify(&out, &mask).unwrap();
        assert!(max_dev(&again, &out) < 1e-9);
        let e0 = dirichlet(&out).total;
        assert!((dirichlet(&again).total - e0).abs() <= 1e-10 * e0);
    }

    #[test]
    fn capacity_of_circular_annuli() {
        let t = TargetDomain::circular(2.0).unwrap();
        assert_relative_eq!(capacity_modulus(&t, 96, 192).unwrap(), 2f64.ln(), max_relative = 1e-3);
        let t = TargetDomain::circular(std::f64::consts::E).unwrap();
        assert_relative_eq!(capacity_modulus(&t, 48, 96).unwrap(), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn capacity_of_sheared_annulus() {
        let t = TargetDomain::new(2.0, 0.2).unwrap();
        let m = capacity_modulus(&t, 96, 192).unwrap();
        let (lo, hi) = t.modulus_bounds();
        assert!(lo <= m && m <= hi, "{m} outside [{lo}, {hi}]");
        // the shear squashes the annulus, so the modulus drops below log R*
        assert!(m < 2f64.ln());
    }

    #[test]
    fn sheared_metric_is_unimodular() {
        for &delta in &[0.0, 0.3, 0.8] {
            for k in 0..12 {
                let m = sheared_metric(delta, k as f64 * 0.5);
                assert_relative_eq!(m.a * m.c - m.b * m.b, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn capacity_gradient_matches_energy() {
        let g = build_grid(0.8, 6, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; g.len()];
        capacity_energy(&g, 0.4, &u, Some(&mut grad));
        let h = 1e-6;
        for k in [0, 5, 17, 30, 47] {
            let mut up = u.clone();
            up[k] += h;
            let mut dn = u.clone();
            dn[k] -= h;
            let fd = (capacity_energy(&g, 0.4, &up, None) - capacity_energy(&g, 0.4, &dn, None)) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{k}: {fd} vs {}", grad[k]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn maximum_principle(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = build_grid(1.0, 12, 24).unwrap();
            let f = random_field(g, &mut rng);
            let mask = random_mask(&g, &mut rng);
            let out = laplace_solve(&f, &mask).unwrap();
            let trace: Vec<Complex64> = (0..g.len())
                .filter(|&k| !mask.as_slice()[k])
                .map(|k| f.values()[k])
                .collect();
            let lo_re = trace.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
            let hi_re = trace.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
            let lo_im = trace.iter().map(|v| v.im).fold(f64::INFINITY, f64::min);
            let hi_im = trace.iter().map(|v| v.im).fold(f64::NEG_INFINITY, f64::max);
            for v in out.values() {
                prop_assert!(v.re >= lo_re - 1e-9 && v.re <= hi_re + 1e-9);
                prop_assert!(v.im >= lo_im - 1e-9 && v.im <= hi_im + 1e-9);
            }
        }

        #[test]
        fn dirichlet_principle_and_idempotence(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = build_grid(rng.gen_range(0.3..2.0), 12, 24).unwrap();
            let f = random_field(g, &mut rng);
            let mask = random_mask(&g, &mut rng);
            let once = poisson_modify(&f, &mask).unwrap();
            let e0 = dirichlet(&f).total;
            let e1 = dirichlet(&once).total;
            prop_assert!(e1 <= e0 + 1e-10 * e0);
            let twice = poisson_modify(&once, &mask).unwrap();
            prop_assert!(max_dev(&once, &twice) < 1e-8);
        }
    }
}
