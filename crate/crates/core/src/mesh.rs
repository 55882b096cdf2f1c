//! Log-polar discretization of the source annulus `A(1, e^tau)`.
//!
//! Node `(i, j)` sits at `z = exp(s_i + i theta_j)` with `s_i = i ds` and
//! `theta_j = j dtheta`. Rows run in `s` (both boundary circles included),
//! columns run in `theta` and wrap periodically.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{self, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPolarGrid {
    tau: f64,
    n_s: usize,
    n_theta: usize,
    ds: f64,
    dtheta: f64,
}

impl LogPolarGrid {
    pub fn new(tau: f64, n_s: usize, n_theta: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::DegenerateModulus(tau));
        }
        if n_s < 4 || n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::GridTooSmall { n_s, n_theta });
        }
        Ok(Self {
            tau,
            n_s,
            n_theta,
            ds: tau / (n_s - 1) as f64,
            dtheta: 2.0 * PI / n_theta as f64,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_s, self.n_theta)
    }

    #[inline]
    pub fn s(&self, i: usize) -> f64 {
        // pin the last row exactly on tau
        if i + 1 == self.n_s {
            self.tau
        } else {
            i as f64 * self.ds
        }
    }

    #[inline]
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    #[inline]
    pub fn next_col(&self, j: usize) -> usize {
        if j + 1 == self.n_theta {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn prev_col(&self, j: usize) -> usize {
        if j == 0 {
            self.n_theta - 1
        } else {
            j - 1
        }
    }

    /// Source point `z = e^(s + i theta)` of node `(i, j)`.
    #[inline]
    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(self.s(i).exp(), self.theta(j))
    }

    /// Trapezoidal weight of row `i` in the `s` direction.
    #[inline]
    pub fn row_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_s {
            0.5 * self.ds
        } else {
            self.ds
        }
    }
}

/// Free-function constructor mirroring the CLI vocabulary.
pub fn build_grid(tau: f64, n_s: usize, n_theta: usize) -> Result<LogPolarGrid> {
    LogPolarGrid::new(tau, n_s, n_theta)
}

/// Complex samples on a [`LogPolarGrid`], stored row-major with `theta` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: LogPolarGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: LogPolarGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.shape(),
                got: (values.len() / grid.n_theta(), values.len() % grid.n_theta()),
            });
        }
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "non-finite field value at node ({}, {})",
                k / grid.n_theta(),
                k % grid.n_theta()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(s, theta)` at every node.
    pub fn from_fn(grid: LogPolarGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_s() {
            let s = grid.s(i);
            for j in 0..grid.n_theta() {
                values.push(f(s, grid.theta(j)));
            }
        }
        Self { grid, values }
    }

    pub fn constant(grid: LogPolarGrid, c: Complex64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &LogPolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let n = self.grid.n_theta();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch {
                expected: self.grid.shape(),
                got: other.grid.shape(),
            });
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Writes `s,theta,re,im` rows, theta fastest, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "s,theta,re,im")?;
        let mut line = String::new();
        for i in 0..self.grid.n_s() {
            for j in 0..self.grid.n_theta() {
                let v = self.at(i, j);
                line.clear();
                let _ = write!(
                    line,
                    "{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.grid.s(i),
                    self.grid.theta(j),
                    v.re,
                    v.im
                );
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }
}

/// Derivative in `s`: central differences inside, second-order one-sided
/// differences on the two boundary rows.
pub fn d_s(f: &ComplexField) -> ComplexField {
    let g = *f.grid();
    let (n_s, n_t) = g.shape();
    let h = g.ds();
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    for j in 0..n_t {
        out[g.index(0, j)] = (-3.0 * f.at(0, j) + 4.0 * f.at(1, j) - f.at(2, j)) / (2.0 * h);
        for i in 1..n_s - 1 {
            out[g.index(i, j)] = (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * h);
        }
        let l = n_s - 1;
        out[g.index(l, j)] = (3.0 * f.at(l, j) - 4.0 * f.at(l - 1, j) + f.at(l - 2, j)) / (2.0 * h);
    }
    ComplexField { grid: g, values: out }
}

/// Periodic central difference in `theta`.
pub fn d_theta(f: &ComplexField) -> ComplexField {
    let g = *f.grid();
    let h = g.dtheta();
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.n_s() {
        for j in 0..g.n_theta() {
            out.push((f.at(i, g.next_col(j)) - f.at(i, g.prev_col(j))) / (2.0 * h));
        }
    }
    ComplexField { grid: g, values: out }
}

/// Degree of `f - w0` along the circle `s = s_i`.
pub fn winding(f: &ComplexField, i: usize, w0: Complex64) -> Result<i64> {
    let g = f.grid();
    if i >= g.n_s() {
        return Err(Error::InvalidArgument(format!("row {i} out of range")));
    }
    let row = f.row(i);
    for (j, v) in row.iter().enumerate() {
        let d = (v - w0).norm();
        if d < 1e-12 {
            return Err(Error::DegreeUndefined { row: i, col: j, distance: d });
        }
    }
    let total: f64 = (0..row.len())
        .map(|j| {
            let a = row[j] - w0;
            let b = row[g.next_col(j)] - w0;
            (b * a.conj()).arg()
        })
        .sum();
    Ok((total / (2.0 * PI)).round() as i64)
}
