use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Designs whose estimated condition number exceeds this are rejected as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Least-squares coefficients for a linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first when `intercept` is set, then one slope per feature.
    pub beta_hat: Vec<f64>,
    pub residual_mse: f64,
    pub intercept: bool,
}

impl OlsFit {
    /// Slope of feature `j` (0-based), skipping the intercept if present.
    pub fn slope(&self, j: usize) -> f64 {
        self.beta_hat[j + usize::from(self.intercept)]
    }

    pub fn intercept_value(&self) -> f64 {
        if self.intercept {
            self.beta_hat[0]
        } else {
            0.0
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let off = usize::from(self.intercept);
        self.intercept_value() + x.iter().zip(&self.beta_hat[off..]).map(|(a, b)| a * b).sum::<f64>()
    }
}

pub(crate) fn design_matrix(data: &Dataset, intercept: bool) -> DMatrix<f64> {
    let p = data.d() + usize::from(intercept);
    DMatrix::from_fn(data.n(), p, |i, j| {
        if intercept {
            if j == 0 {
                1.0
            } else {
                data.row(i)[j - 1]
            }
        } else {
            data.row(i)[j]
        }
    })
}

/// Ordinary least squares via a Householder QR factorisation of the design matrix.
pub fn ols_fit(data: &Dataset, intercept: bool) -> Result<OlsFit> {
    let p = data.d() + usize::from(intercept);
    if data.n() < p {
        return Err(Error::invalid(format!(
            "least squares needs at least {p} rows, got {}",
            data.n()
        )));
    }
    let x = design_matrix(data, intercept);
    let y = DVector::from_column_slice(data.labels());
    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_number = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition_number <= MAX_CONDITION) {
        return Err(Error::SingularSystem {
            reason: "design matrix is rank deficient".into(),
            condition_number,
        });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::SingularSystem {
            reason: "triangular solve failed".into(),
            condition_number,
        })?;
    let resid = &y - &x * &beta;
    let residual_mse = resid.norm_squared() / data.n() as f64;
    Ok(OlsFit {
        beta_hat: beta.iter().copied().collect(),
        residual_mse,
        intercept,
    })
}
