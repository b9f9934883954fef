use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition numbers above this are treated as rank deficiency.
pub const MAX_CONDITION: f64 = 1e10;

/// Least-squares solution of `x θ ≈ y` through Householder QR.
///
/// Returns θ and the mean squared residual.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (rows, cols) = x.shape();
    if rows < cols || cols == 0 {
        return Err(Error::InvalidParameter(format!(
            "least squares needs rows >= columns > 0, got {rows}x{cols}"
        )));
    }
    if y.len() != rows {
        return Err(Error::InvalidParameter(format!("{} targets for {rows} rows", y.len())));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let condition = condition_estimate(&r);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, cols).into_owned();
    let theta = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient {
        condition: f64::INFINITY,
    })?;
    let residual = y - x * &theta;
    let mse = residual.norm_squared() / rows as f64;
    Ok((theta, mse))
}

/// 2-norm condition number of the triangular factor (equal to that of X).
pub fn condition_estimate(r: &DMatrix<f64>) -> f64 {
    let sv = r.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}
