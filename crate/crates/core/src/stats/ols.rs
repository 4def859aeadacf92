//! Ordinary least squares by Householder QR.

use serde::Serialize;

use super::linalg::RealMatrix;
use crate::error::{Error, Result};

/// Relative tolerance on the QR pivots below which a column counts as
/// linearly dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residual_df: usize,
    /// RSS / residual_df.
    pub residual_variance: f64,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn t_statistic(&self, j: usize) -> f64 {
        self.coefficients[j] / self.standard_errors[j]
    }
}

/// Least-squares fit of `response` on the columns of `design` (no implicit
/// intercept).
pub fn ols_fit(design: &RealMatrix, response: &[f64]) -> Result<OlsFit> {
    let names: Vec<String> = (0..design.cols()).map(|j| format!("x{j}")).collect();
    ols_fit_named(design, response, &names)
}

/// Same as [`ols_fit`] but reports singular columns by name.
pub fn ols_fit_named(design: &RealMatrix, response: &[f64], names: &[String]) -> Result<OlsFit> {
    let n = design.rows();
    let p = design.cols();
    if response.len() != n {
        return Err(Error::Shape(format!(
            "{n} design rows but {} responses",
            response.len()
        )));
    }
    if n < p + 1 {
        return Err(Error::Domain(format!(
            "need at least {} observations for {p} parameters, got {n}",
            p + 1
        )));
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite response value".into()));
    }

    // Column-major working copy; Householder vectors overwrite the lower part.
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| design.column(j)).collect();
    let mut qty = response.to_vec();
    let scale = a
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut r_diag = vec![0.0; p];

    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOL * scale || norm == 0.0 {
            return Err(Error::Singular {
                column: k,
                name: names.get(k).cloned().unwrap_or_else(|| format!("x{k}")),
            });
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in a[k][k..]
        a[k][k] -= alpha;
        let vnorm2: f64 = a[k][k..].iter().map(|v| v * v).sum();
        r_diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let (head, tail) = a.split_at_mut(k + 1);
        let v = &head[k][k..];
        for col in tail.iter_mut() {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(v) {
                *c -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&qty[k..]).map(|(a, b)| a * b).sum();
        let f = 2.0 * dot / vnorm2;
        for (c, vi) in qty[k..].iter_mut().zip(v) {
            *c -= f * vi;
        }
    }

    // R is upper triangular: R[i][j] = a[j][i] for i < j, r_diag on the diagonal.
    let r = |i: usize, j: usize| if i == j { r_diag[i] } else { a[j][i] };

    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in (i + 1)..p {
            s -= r(i, j) * beta[j];
        }
        beta[i] = s / r(i, i);
    }

    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let row = design.row(i);
            response[i] - row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>()
        })
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let residual_df = n - p;
    let residual_variance = rss / residual_df as f64;

    // diag((X^T X)^{-1}) = row norms of R^{-1}
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in (i + 1)..=j {
                s += r(i, k) * rinv[k][j];
            }
            rinv[i][j] = -s / r(i, i);
        }
    }
    let standard_errors = (0..p)
        .map(|i| {
            let d: f64 = rinv[i][i..].iter().map(|v| v * v).sum();
            (residual_variance * d).sqrt()
        })
        .collect();

    Ok(OlsFit {
        coefficients: beta,
        standard_errors,
        residual_df,
        residual_variance,
        residuals,
    })
}
