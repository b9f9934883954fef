//! Linear quantile regression by a primal-dual interior-point method.
//!
//! Minimizing the pinball loss is a linear program whose dual reads
//! `max yᵀa  s.t.  Xᵀa = (1 - p) Xᵀ1,  0 <= a <= 1`. The dual is solved with
//! Mehrotra predictor-corrector steps (the Frisch–Newton scheme); the
//! coefficients are the negated equality multipliers. Each iteration costs
//! one weighted Gram matrix and a Cholesky factorization of size N + 1.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

use super::ols;

pub const MAX_ITERATIONS: usize = 300;
/// Relative duality gap at which the iteration stops.
pub const GAP_TOLERANCE: f64 = 1e-12;
const STEP_DAMPING: f64 = 0.99995;

/// Mean pinball loss ρ_p(u) = u (p - 1{u < 0}).
pub fn pinball_loss(residuals: impl IntoIterator<Item = f64>, p: f64) -> f64 {
    let mut n = 0usize;
    let total: f64 = residuals
        .into_iter()
        .map(|u| {
            n += 1;
            if u < 0.0 {
                u * (p - 1.0)
            } else {
                u * p
            }
        })
        .sum();
    total / n.max(1) as f64
}

/// Largest step in [0, 1e20] keeping `v + step·dv` non-negative.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1e20, f64::min)
}

/// `Σ_i q_i x_i x_iᵀ` for the rows x_i of `x`.
fn weighted_gram(x: &DMatrix<f64>, q: &DVector<f64>) -> DMatrix<f64> {
    let (rows, cols) = x.shape();
    let mut gram = DMatrix::<f64>::zeros(cols, cols);
    for i in 0..rows {
        let w = q[i];
        for a in 0..cols {
            let wa = w * x[(i, a)];
            for b in a..cols {
                gram[(a, b)] += wa * x[(i, b)];
            }
        }
    }
    for a in 0..cols {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    gram
}

fn factor(gram: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    gram.cholesky().ok_or(Error::RankDeficient {
        condition: f64::INFINITY,
    })
}

/// Affine column map `x̃_j = (x_j - m_j) / s_j`. Centering applies only when
/// column 0 is an intercept; the fit is equivariant under this map, and the
/// standardized Gram matrices are far better conditioned.
struct Standardizer {
    center: Vec<f64>,
    scale: Vec<f64>,
    intercept: bool,
}

impl Standardizer {
    fn new(x: &DMatrix<f64>) -> Self {
        let (n, k) = x.shape();
        let intercept = k > 0 && x.column(0).iter().all(|&v| v == 1.0);
        let mut center = vec![0.0; k];
        let mut scale = vec![1.0; k];
        for j in 0..k {
            if intercept && j == 0 {
                continue;
            }
            let col = x.column(j);
            let m = if intercept { col.sum() / n as f64 } else { 0.0 };
            let ss = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
            center[j] = m;
            scale[j] = if ss > 0.0 { ss.sqrt() } else { 1.0 };
        }
        Self {
            center,
            scale,
            intercept,
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.center[j]) / self.scale[j]
        })
    }

    fn restore(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_fn(theta.len(), |j, _| theta[j] / self.scale[j]);
        if self.intercept {
            let shift: f64 = (1..out.len()).map(|j| out[j] * self.center[j]).sum();
            out[0] -= shift;
        }
        out
    }
}

/// Minimizes the pinball loss; returns θ and the mean loss.
pub fn quantile_regression(x: &DMatrix<f64>, y: &DVector<f64>, p: f64) -> Result<(DVector<f64>, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {p} outside (0, 1)")));
    }
    let std = Standardizer::new(x);
    let theta = solve(&std.apply(x), y, p)?;
    let theta = std.restore(&theta);
    let loss = pinball_loss((y - x * &theta).iter().copied(), p);
    Ok((theta, loss))
}

fn solve(x: &DMatrix<f64>, y: &DVector<f64>, p: f64) -> Result<DVector<f64>> {
    let (n, _) = x.shape();
    // Rank check and starting point in one go.
    let (theta_ols, _) = ols::least_squares(x, y)?;
    let xt = x.transpose();
    let c = -y;
    let b = x.row_sum().transpose() * (1.0 - p);
    let mut a = DVector::from_element(n, 1.0 - p);
    let mut s = DVector::from_element(n, p);
    let mut dual = -theta_ols;
    // Both dual slacks start strictly positive, shifted by a tenth of the mean
    // absolute OLS residual; z - w = r keeps the start dual feasible. Starting
    // on the boundary (one slack zero per row) stalls at extreme p.
    let r = &c - x * &dual;
    let shift = (0.1 * r.iter().map(|v| v.abs()).sum::<f64>() / n as f64).max(f64::MIN_POSITIVE);
    let mut z = r.map(|v| v.max(0.0) + shift);
    let mut w = &z - &r;
    let scale = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let gap_of = |a: &DVector<f64>, dual: &DVector<f64>, w: &DVector<f64>| c.dot(a) - dual.dot(&b) + w.sum();
    let mut gap = gap_of(&a, &dual, &w);

    let mut iterations = 0;
    while gap > GAP_TOLERANCE * scale {
        if iterations == MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                last_step: gap / scale,
            });
        }
        iterations += 1;

        // Affine-scaling predictor.
        let q = DVector::from_fn(n, |i, _| 1.0 / (z[i] / a[i] + w[i] / s[i]));
        let r = &z - &w;
        let chol = factor(weighted_gram(x, &q))?;
        let rhs = &xt * q.component_mul(&r);
        let mut d_dual = chol.solve(&rhs);
        let mut da = q.component_mul(&(x * &d_dual - &r));
        let mut ds = -&da;
        let mut dz = -z.component_mul(&(da.component_div(&a).add_scalar(1.0)));
        let mut dw = -w.component_mul(&(ds.component_div(&s).add_scalar(1.0)));
        let mut fp = (STEP_DAMPING * max_step(&a, &da).min(max_step(&s, &ds))).min(1.0);
        let mut fd = (STEP_DAMPING * max_step(&w, &dw).min(max_step(&z, &dz))).min(1.0);

        if fp.min(fd) < 1.0 {
            // Mehrotra corrector with centering.
            let mu = z.dot(&a) + w.dot(&s);
            let g = (&z + &dz * fd).dot(&(&a + &da * fp)) + (&w + &dw * fd).dot(&(&s + &ds * fp));
            let mu = mu * (g / mu).powi(3) / (2.0 * n as f64);
            // Second-order terms of a∘z = μ and s∘w = μ, divided through by a and s.
            let ainv = a.map(|v| 1.0 / v);
            let sinv = s.map(|v| 1.0 / v);
            let dadz = da.component_mul(&dz).component_mul(&ainv);
            let dsdw = ds.component_mul(&dw).component_mul(&sinv);
            let xi = (&ainv - &sinv) * mu;
            let rhs = rhs + &xt * q.component_mul(&(&dadz - &dsdw - &xi));
            d_dual = chol.solve(&rhs);
            da = q.component_mul(&(x * &d_dual + &xi - &r - &dadz + &dsdw));
            ds = -&da;
            dz = &ainv * mu - &z - ainv.component_mul(&z).component_mul(&da) - &dadz;
            dw = &sinv * mu - &w - sinv.component_mul(&w).component_mul(&ds) - &dsdw;
            fp = (STEP_DAMPING * max_step(&a, &da).min(max_step(&s, &ds))).min(1.0);
            fd = (STEP_DAMPING * max_step(&w, &dw).min(max_step(&z, &dz))).min(1.0);
        }

        a += &da * fp;
        s += &ds * fp;
        dual += &d_dual * fd;
        w += &dw * fd;
        z += &dz * fd;
        gap = gap_of(&a, &dual, &w);
    }
    Ok(-dual)
}
