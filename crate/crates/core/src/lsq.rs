//! Small dense least-squares solver on a Householder QR factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on the diagonal of R (after column scaling) below which
/// the design matrix is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub coef: Vec<f64>,
    /// `(X^T W X)^-1`: the coefficient covariance for unit-variance observations.
    pub cov_unit: DMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Root mean square of the unweighted residuals.
    pub rms: f64,
}

impl LsqFit {
    /// Standard error of coefficient `j` when every observation has standard deviation `sigma`.
    pub fn std_err(&self, j: usize, sigma: f64) -> f64 {
        sigma * self.cov_unit[(j, j)].max(0.0).sqrt()
    }
}

/// Ordinary least squares `min |X b - y|`.
pub fn solve(x: &DMatrix<f64>, y: &[f64], what: &'static str) -> Result<LsqFit> {
    solve_weighted(x, y, None, what)
}

/// Weighted least squares `min sum w_k (x_k . b - y_k)^2`.
pub fn solve_weighted(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    what: &'static str,
) -> Result<LsqFit> {
    let (m, n) = x.shape();
    assert_eq!(m, y.len(), "design matrix and observations disagree");
    if n == 0 || m < n {
        return Err(Error::RankDeficient { what });
    }
    let sqrt_w: Vec<f64> = match weights {
        Some(w) => {
            assert_eq!(w.len(), m);
            w.iter().map(|v| v.max(0.0).sqrt()).collect()
        }
        None => vec![1.0; m],
    };
    let mut a = x.clone();
    for (r, sw) in sqrt_w.iter().enumerate() {
        for c in 0..n {
            a[(r, c)] *= sw;
        }
    }
    let scale: Vec<f64> = (0..n).map(|c| a.column(c).norm()).collect();
    if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::RankDeficient { what });
    }
    for (c, s) in scale.iter().enumerate() {
        a.column_mut(c).scale_mut(1.0 / s);
    }
    let b = DVector::from_iterator(m, y.iter().zip(&sqrt_w).map(|(v, w)| v * w));

    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..n).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..n).any(|k| r[(k, k)].abs() <= RANK_TOL * max_diag) {
        return Err(Error::RankDeficient { what });
    }
    let qtb = qr.q().transpose() * &b;
    let z = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { what })?;
    let coef: Vec<f64> = z.iter().zip(&scale).map(|(v, s)| v / s).collect();

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::RankDeficient { what })?;
    let mut cov_unit = &r_inv * r_inv.transpose();
    for i in 0..n {
        for j in 0..n {
            cov_unit[(i, j)] /= scale[i] * scale[j];
        }
    }

    let residuals: Vec<f64> = (0..m)
        .map(|k| y[k] - (0..n).map(|c| x[(k, c)] * coef[c]).sum::<f64>())
        .collect();
    let rms = (residuals.iter().map(|e| e * e).sum::<f64>() / m as f64).sqrt();
    Ok(LsqFit {
        coef,
        cov_unit,
        residuals,
        rms,
    })
}

/// Builds a design matrix from row closures.
pub fn design<const N: usize>(rows: impl IntoIterator<Item = [f64; N]>) -> DMatrix<f64> {
    let rows: Vec<[f64; N]> = rows.into_iter().collect();
    DMatrix::from_fn(rows.len(), N, |r, c| rows[r][c])
}
