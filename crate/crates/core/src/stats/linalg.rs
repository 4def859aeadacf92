//! Small dense row-major matrices and the factorizations the estimators need.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix with at least one row and column and finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for RealMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RealMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(n, d, rows.concat())
    }

    /// Builds a matrix from column vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(n, d, data)
    }

    pub(crate) fn zeros(rows: usize, cols: usize) -> Self {
        debug_assert!(rows > 0 && cols > 0);
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Shape("no columns selected".into()));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Shape(format!(
                "column {bad} out of range ({} columns)",
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(Self {
            rows: self.rows,
            cols: columns.len(),
            data,
        })
    }

    /// Keeps the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Shape("no rows selected".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.rows) {
            return Err(Error::Shape(format!(
                "row {bad} out of range ({} rows)",
                self.rows
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Ok(Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Column-wise sample covariance (n - 1 denominator).
    pub fn covariance(&self) -> Result<Self> {
        if self.rows < 2 {
            return Err(Error::Domain("covariance needs at least two rows".into()));
        }
        let means: Vec<f64> = (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)]).sum::<f64>() / self.rows as f64)
            .collect();
        let mut cov = Self::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..self.cols {
                let da = row[a] - means[a];
                for b in a..self.cols {
                    cov[(a, b)] += da * (row[b] - means[b]);
                }
            }
        }
        let denom = (self.rows - 1) as f64;
        for a in 0..self.cols {
            for b in a..self.cols {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        Ok(cov)
    }
}

impl std::ops::Index<(usize, usize)> for RealMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor `L` with `L * L^T = spd`.
pub fn cholesky_lower(spd: &RealMatrix) -> Result<RealMatrix> {
    let n = spd.rows();
    if spd.cols() != n {
        return Err(Error::Shape(format!(
            "cholesky of non-square {}x{} matrix",
            n,
            spd.cols()
        )));
    }
    let scale = spd
        .as_slice()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (spd[(i, j)] - spd[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Domain(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = RealMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = spd[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = spd[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`, in place.
pub(crate) fn forward_substitute(l: &RealMatrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L^T x = b` for lower-triangular `L`, in place.
pub(crate) fn backward_substitute_transposed(l: &RealMatrix, b: &mut [f64]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub(crate) fn cholesky_solve(l: &RealMatrix, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    forward_substitute(l, &mut x);
    backward_substitute_transposed(l, &mut x);
    x
}

/// Unit-diagonal matrix with every off-diagonal entry equal to `rho`.
pub fn equicorrelation_matrix(d: usize, rho: f64) -> Result<RealMatrix> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !rho.is_finite() {
        return Err(Error::Domain(format!(
            "correlation must be finite, got {rho}"
        )));
    }
    if d > 1 {
        let lower = -1.0 / (d as f64 - 1.0);
        if !(rho > lower && rho < 1.0) {
            return Err(Error::Domain(format!(
                "equicorrelation {rho} not positive definite for d = {d} (needs {lower} < rho < 1)"
            )));
        }
    }
    let mut m = RealMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = if i == j { 1.0 } else { rho };
        }
    }
    Ok(m)
}
