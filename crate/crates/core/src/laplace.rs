//! Laplace models of prediction residuals and of the aggregate demand of
//! several users.
//!
//! A single user's future frame size is modeled as Laplace(F̂, b̂), where F̂
//! comes from a [`LinearModel`] and b̂ from a [`ScaleModel`] (a least-squares
//! regression of |w| on the same history). The sum of independent Laplace
//! variables with scales β_m has the Laplace transform
//! `e^{-sα} Π (1 - β_m² s²)^{-1}`; expanding it in partial fractions over
//! `u = s²` gives a signed mixture of "order-k" components, each being the
//! distribution of a sum of k i.i.d. Laplace(0, β) variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{
    design_row, fit_scoped, least_squares, residuals, LinearModel, Method, PredictionSpec, ResidualSeries, Scope,
};
use crate::trace::{FrameTrace, NormalizedTrace, TraceMeta};

/// Relative clamp for predicted scales: b̂ >= 1e-6 · R/φ.
pub const SCALE_FLOOR_RELATIVE: f64 = 1e-6;
/// Default relative tolerance under which two poles are merged.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;
/// Mixtures whose Σ|γ| exceeds this lose too many digits to cancellation.
pub const MAX_WEIGHT_MASS: f64 = 1e8;

const BISECTION_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    pub mu: f64,
    pub b: f64,
}

impl LaplaceParams {
    pub fn new(mu: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("Laplace({mu}, {b})")));
        }
        Ok(Self { mu, b })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (-(x - self.mu).abs() / self.b).exp() / (2.0 * self.b)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        -(x - self.mu).abs() / self.b - (2.0 * self.b).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.b;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        laplace_quantile(self, p)
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.b * self.b
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

/// Maximum-likelihood Laplace fit: μ̂ is 0 when `fix_mu_zero` is set (OLS
/// residuals are unbiased) and the sample median otherwise; b̂ is the mean
/// absolute deviation from μ̂.
pub fn fit_laplace_mle(samples: &[f64], fix_mu_zero: bool) -> Result<LaplaceParams> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "Laplace fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mu = if fix_mu_zero { 0.0 } else { median(samples) };
    let b = samples.iter().map(|x| (x - mu).abs()).sum::<f64>() / samples.len() as f64;
    if b == 0.0 {
        return Err(Error::DegenerateSample);
    }
    LaplaceParams::new(mu, b)
}

fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Laplace quantile: μ + b ln(2p) for p <= ½ and μ - b ln(2 - 2p) above.
pub fn laplace_quantile(params: &LaplaceParams, p: f64) -> f64 {
    if p <= 0.5 {
        params.mu + params.b * (2.0 * p).ln()
    } else {
        params.mu - params.b * (2.0 - 2.0 * p).ln()
    }
}

/// Competing residual distributions, fitted by maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ResidualFamily {
    Laplace,
    Normal,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyFit {
    pub family: ResidualFamily,
    pub location: f64,
    pub scale: f64,
    pub log_likelihood: f64,
}

/// Laplace, Normal and Logistic maximum-likelihood fits of `samples`.
pub fn compare_families(samples: &[f64]) -> Result<Vec<FamilyFit>> {
    let n = samples.len() as f64;
    let laplace = fit_laplace_mle(samples, false)?;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let normal_ll = -0.5 * n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
    let (loc, s) = fit_logistic(samples, mean, sd)?;
    let logistic_ll = logistic_log_likelihood(samples, loc, s);
    Ok(vec![
        FamilyFit {
            family: ResidualFamily::Laplace,
            location: laplace.mu,
            scale: laplace.b,
            log_likelihood: laplace.log_likelihood(samples),
        },
        FamilyFit {
            family: ResidualFamily::Normal,
            location: mean,
            scale: sd,
            log_likelihood: normal_ll,
        },
        FamilyFit {
            family: ResidualFamily::Logistic,
            location: loc,
            scale: s,
            log_likelihood: logistic_ll,
        },
    ])
}

fn logistic_log_likelihood(samples: &[f64], loc: f64, s: f64) -> f64 {
    samples
        .iter()
        .map(|&x| {
            let z = ((x - loc) / s).abs();
            // log pdf of the logistic, symmetric in z.
            -z - s.ln() - 2.0 * (-z).exp().ln_1p()
        })
        .sum()
}

/// Alternating one-dimensional root finding on the logistic score equations:
/// Σ tanh(z/2) = 0 for the location and Σ z tanh(z/2) = n for the scale.
fn fit_logistic(samples: &[f64], mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let n = samples.len() as f64;
    let (lo_x, hi_x) = samples
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mut loc = mean;
    let mut s = sd * 3f64.sqrt() / std::f64::consts::PI;
    for _ in 0..100 {
        let score_loc = |m: f64| samples.iter().map(|&x| ((x - m) / (2.0 * s)).tanh()).sum::<f64>();
        let new_loc = bisect_decreasing(score_loc, lo_x, hi_x, 0.0);
        let score_scale = |ln_s: f64| {
            let sc = ln_s.exp();
            samples
                .iter()
                .map(|&x| {
                    let z = (x - new_loc) / sc;
                    z * (z / 2.0).tanh()
                })
                .sum::<f64>()
                - n
        };
        let new_s = bisect_decreasing(score_scale, (s * 1e-3).ln(), (s * 1e3).ln(), 0.0).exp();
        let moved = (new_loc - loc).abs() / s + (new_s / s - 1.0).abs();
        loc = new_loc;
        s = new_s;
        if moved < 1e-12 {
            break;
        }
    }
    Ok((loc, s))
}

/// Root of a non-increasing function on [lo, hi] by bisection.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regression of |w| on the predictor's history layout; predicts the
/// Laplace scale b̂ in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleModel {
    pub theta_abs: Vec<f64>,
}

impl ScaleModel {
    pub fn memory(&self) -> usize {
        self.theta_abs.len() - 1
    }

    /// Predicted scale in bytes from the last N frame sizes (oldest first),
    /// clamped at 1e-6 · R/φ.
    pub fn predict(&self, history: &[u64], meta: &TraceMeta) -> Result<f64> {
        let n = self.memory();
        if history.len() != n {
            return Err(Error::HistoryLengthMismatch {
                expected: n,
                got: history.len(),
            });
        }
        let unit = meta.expected_frame_bytes();
        let raw = self.theta_abs[0]
            + (1..=n)
                .map(|j| self.theta_abs[j] * history[n - j] as f64 / unit)
                .sum::<f64>();
        Ok((raw * unit).max(SCALE_FLOOR_RELATIVE * unit))
    }

    /// Intercept-only scale used before N frames are available.
    pub fn predict_or_warm_up(&self, history: &[u64], meta: &TraceMeta) -> f64 {
        let n = self.memory();
        if history.len() < n {
            let unit = meta.expected_frame_bytes();
            return (self.theta_abs[0] * unit).max(SCALE_FLOOR_RELATIVE * unit);
        }
        self.predict(&history[history.len() - n..], meta)
            .expect("history length checked")
    }
}

/// Least-squares fit of |w|·φ/R on `[1, F̃(t), …, F̃(t-N+1)]`.
pub fn fit_scale_model(
    residuals: &ResidualSeries,
    trace: &NormalizedTrace,
    spec: &PredictionSpec,
) -> Result<ScaleModel> {
    fit_scale_model_multi(&[(residuals, trace)], spec)
}

/// As [`fit_scale_model`], pooling rows from several traces.
pub fn fit_scale_model_multi(
    parts: &[(&ResidualSeries, &NormalizedTrace)],
    spec: &PredictionSpec,
) -> Result<ScaleModel> {
    let cols = spec.memory + 1;
    let rows: usize = parts.iter().map(|(r, _)| r.len()).sum();
    let mut x = nalgebra::DMatrix::zeros(rows, cols);
    let mut y = nalgebra::DVector::zeros(rows);
    let mut row = vec![0.0; cols];
    let mut i = 0;
    for (res, trace) in parts {
        let unit = trace.meta.expected_frame_bytes();
        for (&t, &w) in res.times.iter().zip(&res.w) {
            if t < spec.memory || t > trace.len() {
                return Err(Error::OutOfRange {
                    start: t,
                    end: t,
                    len: trace.len(),
                });
            }
            design_row(&trace.values, t, spec.memory, &mut row);
            for (c, v) in row.iter().enumerate() {
                x[(i, c)] = *v;
            }
            y[i] = w.abs() / unit;
            i += 1;
        }
    }
    let (theta, _) = least_squares(&x, &y)?;
    Ok(ScaleModel {
        theta_abs: theta.iter().copied().collect(),
    })
}

/// A mean model and a scale model fitted for the same (N, T, τ): the
/// conditional distribution of the next T-frame average is
/// Laplace(F̂, b̂).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacePredictor {
    pub mean: LinearModel,
    pub scale: ScaleModel,
}

impl LaplacePredictor {
    /// Fits the OLS mean model at `scope`, then the scale model on the pooled
    /// absolute residuals of every trace.
    pub fn fit(traces: &[FrameTrace], memory: usize, horizon: usize, lookahead: usize, scope: Scope) -> Result<Self> {
        let spec = PredictionSpec {
            memory,
            horizon,
            lookahead,
            method: Method::Ols,
            p_s: None,
        };
        let normalized: Vec<NormalizedTrace> = traces.iter().map(FrameTrace::normalize).collect();
        let mean = fit_scoped(&normalized, &spec, scope)?;
        let res = traces.iter().map(|t| residuals(&mean, t)).collect::<Result<Vec<_>>>()?;
        let parts: Vec<(&ResidualSeries, &NormalizedTrace)> = res.iter().zip(&normalized).collect();
        let scale = fit_scale_model_multi(&parts, &spec)?;
        Ok(Self { mean, scale })
    }

    pub fn memory(&self) -> usize {
        self.mean.memory()
    }

    /// Laplace(F̂, b̂) in bytes given the frames observed so far (oldest
    /// first; only the last N are used).
    pub fn distribution(&self, observed: &[u64], meta: &TraceMeta) -> LaplaceParams {
        LaplaceParams {
            mu: self.mean.predict_or_warm_up(observed, meta),
            b: self.scale.predict_or_warm_up(observed, meta),
        }
    }

    /// The p-quantile in bytes, clamped at zero.
    pub fn quantile(&self, observed: &[u64], meta: &TraceMeta, p: f64) -> f64 {
        self.distribution(observed, meta).quantile(p).max(0.0)
    }
}

/// One term `γ · (1 - β² s²)^{-order}` of the partial-fraction expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub beta: f64,
    pub gamma: f64,
    pub order: u32,
}

/// Distribution of `Σ_m X_m` with independent `X_m ~ Laplace(α_m, β_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceMixture {
    pub alpha_total: f64,
    pub components: Vec<MixtureComponent>,
}

/// Groups poles whose relative distance to the first member of their group is
/// below `tol`; returns (mean β, multiplicity) per group.
fn cluster_poles(betas: &[f64], tol: f64) -> Vec<(f64, u32)> {
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut clusters: Vec<(f64, f64, u32)> = Vec::new(); // (anchor, sum, count)
    for b in sorted {
        match clusters.last_mut() {
            Some((anchor, sum, count)) if (b - *anchor) / *anchor < tol => {
                *sum += b;
                *count += 1;
            }
            _ => clusters.push((b, b, 1)),
        }
    }
    clusters
        .into_iter()
        .map(|(_, sum, count)| (sum / count as f64, count))
        .collect()
}

/// Multiplies two truncated power series.
fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Power series of (c + d v)^{-p} up to v^{len-1}.
fn inverse_power_series(c: f64, d: f64, p: u32, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut coeff = c.powi(-(p as i32));
    let ratio = d / c;
    for j in 0..len {
        out.push(coeff);
        // binom(-p, j+1) / binom(-p, j) = -(p + j) / (j + 1)
        coeff *= -((p as usize + j) as f64) / (j + 1) as f64 * ratio;
    }
    out
}

/// Builds the mixture for users given as `(α_m, β_m)` pairs.
///
/// Poles closer than `cluster_tol` (relative) are merged into repeated poles;
/// their coefficients come from the Laurent expansion around each pole in the
/// variable `v = 1 - β_h² s²`: with `g(v) = Π_{i≠h} (c_i + d_i v)^{-p_i}`,
/// `c_i = 1 - β_i²/β_h²` and `d_i = β_i²/β_h²`, the weight of the order-k term
/// is the coefficient of `v^{p_h - k}` in `g`. For simple poles this reduces
/// to `γ_m = β_m^{2(M-1)} / Π_{n≠m} (β_m² - β_n²)`.
pub fn aggregate_distribution(users: &[(f64, f64)], cluster_tol: f64) -> Result<LaplaceMixture> {
    if users.is_empty() {
        return Err(Error::InvalidParameter("aggregate of zero users".into()));
    }
    if let Some(&(a, b)) = users
        .iter()
        .find(|(a, b)| !(*b > 0.0 && b.is_finite() && a.is_finite()))
    {
        return Err(Error::InvalidParameter(format!("user with α = {a}, β = {b}")));
    }
    if !(cluster_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("cluster tolerance {cluster_tol}")));
    }
    let alpha_total = users.iter().map(|u| u.0).sum();
    let betas: Vec<f64> = users.iter().map(|u| u.1).collect();
    let clusters = cluster_poles(&betas, cluster_tol);

    let mut components = Vec::new();
    for (h, &(beta_h, p_h)) in clusters.iter().enumerate() {
        let len = p_h as usize;
        let mut series = vec![0.0; len];
        series[0] = 1.0;
        for (i, &(beta_i, p_i)) in clusters.iter().enumerate() {
            if i == h {
                continue;
            }
            let d = (beta_i / beta_h).powi(2);
            let factor = inverse_power_series(1.0 - d, d, p_i, len);
            series = series_mul(&series, &factor);
        }
        for k in 1..=p_h {
            components.push(MixtureComponent {
                beta: beta_h,
                gamma: series[(p_h - k) as usize],
                order: k,
            });
        }
    }
    let weight_mass: f64 = components.iter().map(|c| c.gamma.abs()).sum();
    if !(weight_mass <= MAX_WEIGHT_MASS) {
        return Err(Error::NumericallyIllConditioned { weight_mass });
    }
    Ok(LaplaceMixture {
        alpha_total,
        components,
    })
}

/// Coefficients `κ_j` with `P(S_k > βz) = e^{-z} Σ_j κ_j Σ_{i<=j} z^i / i!`
/// for z >= 0, where S_k is a sum of k i.i.d. Laplace(0, β).
fn order_k_terms(k: u32) -> Vec<f64> {
    // pdf of S_k at βz (times β): e^{-z} Σ_j c_j z^j with
    // c_j = (2k-2-j)! 2^j / (2^{2k-1} (k-1)! j! (k-1-j)!).
    let k = k as usize;
    let fact = |n: usize| (1..=n).fold(1.0_f64, |acc, i| acc * i as f64);
    let norm = 2f64.powi(2 * k as i32 - 1) * fact(k - 1);
    (0..k)
        .map(|j| fact(2 * k - 2 - j) * 2f64.powi(j as i32) / (norm * fact(k - 1 - j)))
        .collect()
}

fn order_k_pdf(z_abs: f64, terms: &[f64]) -> f64 {
    // terms hold c_j · j!; divide back out.
    let mut pow = 1.0;
    let mut fact = 1.0;
    let mut sum = 0.0;
    for (j, t) in terms.iter().enumerate() {
        if j > 0 {
            pow *= z_abs;
            fact *= j as f64;
        }
        sum += t / fact * pow;
    }
    (-z_abs).exp() * sum
}

fn order_k_tail(z_abs: f64, terms: &[f64]) -> f64 {
    let mut partial = 0.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    for (j, t) in terms.iter().enumerate() {
        if j > 0 {
            term *= z_abs / j as f64;
        }
        partial += term;
        sum += t * partial;
    }
    (-z_abs).exp() * sum
}

impl LaplaceMixture {
    /// Sum of the signed weights; 1 for any valid expansion.
    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.gamma).sum()
    }

    /// Number of underlying Laplace variables.
    pub fn total_order(&self) -> u32 {
        // The highest order per distinct pole adds up to M.
        let mut by_beta: Vec<(f64, u32)> = Vec::new();
        for c in &self.components {
            match by_beta.iter_mut().find(|(b, _)| *b == c.beta) {
                Some((_, o)) => *o = (*o).max(c.order),
                None => by_beta.push((c.beta, c.order)),
            }
        }
        by_beta.iter().map(|(_, o)| o).sum()
    }

    pub fn max_beta(&self) -> f64 {
        self.components.iter().map(|c| c.beta).fold(0.0, f64::max)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = x - self.alpha_total;
        self.components
            .iter()
            .map(|c| {
                let terms = order_k_terms(c.order);
                c.gamma * order_k_pdf(z.abs() / c.beta, &terms) / c.beta
            })
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        mixture_cdf(self, x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        mixture_quantile(self, p)
    }

    /// Checks non-negativity of the density on a grid of `points` points
    /// spanning ±20 β_max M around the center.
    pub fn density_is_nonnegative(&self, points: usize) -> bool {
        let half = 20.0 * self.max_beta() * self.total_order() as f64;
        let peak = self.pdf(self.alpha_total).abs().max(f64::MIN_POSITIVE);
        (0..points).all(|i| {
            let x = self.alpha_total - half + 2.0 * half * i as f64 / (points - 1).max(1) as f64;
            self.pdf(x) >= -1e-9 * peak
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Term-wise closed-form CDF.
pub fn mixture_cdf(mix: &LaplaceMixture, x: f64) -> f64 {
    let z = x - mix.alpha_total;
    let tail: f64 = mix
        .components
        .iter()
        .map(|c| c.gamma * order_k_tail(z.abs() / c.beta, &order_k_terms(c.order)))
        .sum();
    let cdf = if z >= 0.0 { 1.0 - tail } else { tail };
    cdf.clamp(0.0, 1.0)
}

/// Inverts the CDF by bisection on `α ± 60 β_max M`.
pub fn mixture_quantile(mix: &LaplaceMixture, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("probability {p} outside (0, 1)")));
    }
    let half = 60.0 * mix.max_beta() * mix.total_order() as f64;
    let mut lo = mix.alpha_total - half;
    let mut hi = mix.alpha_total + half;
    // Precompute per-component constants once.
    let prepared: Vec<(f64, f64, Vec<f64>)> = mix
        .components
        .iter()
        .map(|c| (c.gamma, c.beta, order_k_terms(c.order)))
        .collect();
    let cdf = |x: f64| {
        let z = x - mix.alpha_total;
        let tail: f64 = prepared
            .iter()
            .map(|(g, b, terms)| g * order_k_tail(z.abs() / b, terms))
            .sum();
        if z >= 0.0 {
            1.0 - tail
        } else {
            tail
        }
    };
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mle_examples() {
        let p = fit_laplace_mle(&[-1.0, 1.0], true).unwrap();
        assert_eq!(p.b, 1.0);
        assert!(matches!(
            fit_laplace_mle(&[0.0, 0.0, 0.0], true),
            Err(Error::DegenerateSample)
        ));
        assert!(fit_laplace_mle(&[1.0], false).is_err());
        let p = fit_laplace_mle(&[1.0, 2.0, 10.0], false).unwrap();
        assert_eq!(p.mu, 2.0);
        assert_eq!(p.b, 3.0);
    }

    #[test]
    fn quantile_examples() {
        let std = LaplaceParams::new(0.0, 1.0).unwrap();
        assert!((laplace_quantile(&std, 0.95) - std::f64::consts::LN_10).abs() < 1e-12);
        let p = LaplaceParams::new(3.0, 2.0).unwrap();
        assert_eq!(laplace_quantile(&p, 0.5), 3.0);
        for q in [0.01, 0.2, 0.7, 0.999] {
            assert!((laplace_quantile(&p, q) + laplace_quantile(&p, 1.0 - q) - 6.0).abs() < 1e-12);
            assert!((p.cdf(laplace_quantile(&p, q)) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn two_pole_weights() {
        let mix = aggregate_distribution(&[(0.0, 1.0), (0.0, 2.0)], DEFAULT_CLUSTER_TOL).unwrap();
        let g: Vec<f64> = mix.components.iter().map(|c| c.gamma).collect();
        assert!((g[0] + 1.0 / 3.0).abs() < 1e-15);
        assert!((g[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!((mix.weight_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simple_pole_weights_match_closed_form() {
        let betas = [0.7, 1.3, 2.2, 3.1, 4.0];
        let users: Vec<(f64, f64)> = betas.iter().map(|&b| (1.0, b)).collect();
        let mix = aggregate_distribution(&users, DEFAULT_CLUSTER_TOL).unwrap();
        let m = betas.len() as i32;
        for c in &mix.components {
            let closed = c.beta.powi(2 * (m - 1))
                / betas
                    .iter()
                    .filter(|&&b| b != c.beta)
                    .map(|b| c.beta * c.beta - b * b)
                    .product::<f64>();
            assert!((c.gamma - closed).abs() < 1e-10 * closed.abs().max(1.0));
        }
        assert!((mix.weight_sum() - 1.0).abs() < 1e-9);
        assert_eq!(mix.alpha_total, 5.0);
    }

    #[test]
    fn single_user_is_laplace() {
        let mix = aggregate_distribution(&[(2.0, 1.5)], DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(
            mix.components,
            vec![MixtureComponent {
                beta: 1.5,
                gamma: 1.0,
                order: 1
            }]
        );
        let lp = LaplaceParams::new(2.0, 1.5).unwrap();
        for x in [-3.0, 0.0, 2.0, 4.5, 9.0] {
            assert!((mix.cdf(x) - lp.cdf(x)).abs() < 1e-15);
            assert!((mix.pdf(x) - lp.pdf(x)).abs() < 1e-15);
        }
        for p in [0.05, 0.5, 0.95, 0.999] {
            let q = mix.quantile(p).unwrap();
            assert!((q - laplace_quantile(&lp, p)).abs() < 1e-9);
        }
    }

    #[test]
    fn repeated_poles_weights() {
        // Three equal poles: the product is exactly (1 - β² s²)^-3.
        let mix = aggregate_distribution(&[(0.0, 1.0); 3], DEFAULT_CLUSTER_TOL).unwrap();
        let orders: Vec<(u32, f64)> = mix.components.iter().map(|c| (c.order, c.gamma)).collect();
        assert_eq!(orders, vec![(1, 0.0), (2, 0.0), (3, 1.0)]);
        // Order-2 sum of two Laplace(0, 1): pdf (1 + |x|) e^{-|x|} / 4.
        let two = aggregate_distribution(&[(0.0, 1.0); 2], DEFAULT_CLUSTER_TOL).unwrap();
        for x in [0.0, 0.5, 2.0, -3.0] {
            let expected = (1.0 + f64::abs(x)) * (-f64::abs(x)).exp() / 4.0;
            assert!((two.pdf(x) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_repeated_and_simple_weights_sum_to_one() {
        let users = [(0.0, 1.0), (0.0, 1.0), (0.0, 2.0), (0.0, 3.0), (0.0, 3.0), (0.0, 3.0)];
        let mix = aggregate_distribution(&users, DEFAULT_CLUSTER_TOL).unwrap();
        assert!((mix.weight_sum() - 1.0).abs() < 1e-9);
        assert_eq!(mix.total_order(), 6);
        assert!(mix.density_is_nonnegative(1000));
    }

    #[test]
    fn near_equal_poles_are_rejected_or_merged() {
        let users = [(0.0, 1.0), (0.0, 1.0 + 1e-9), (0.0, 1.0 + 2e-9)];
        assert!(matches!(
            aggregate_distribution(&users, 0.0),
            Err(Error::NumericallyIllConditioned { .. })
        ));
        let merged = aggregate_distribution(&users, DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(merged.total_order(), 3);
    }

    #[test]
    fn mixture_center_and_limits() {
        let mix = aggregate_distribution(&[(1.0, 1.0), (2.0, 2.0), (-0.5, 0.5)], DEFAULT_CLUSTER_TOL).unwrap();
        assert!((mix.cdf(2.5) - 0.5).abs() < 1e-12);
        assert!(mix.cdf(2.5 + 50.0 * 2.0) > 1.0 - 1e-9);
        assert!(mix.cdf(2.5 - 50.0 * 2.0) < 1e-9);
        assert!((mix.quantile(0.5).unwrap() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn mixture_json_shape() {
        let mix = aggregate_distribution(&[(1.0, 1.0)], DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(
            mix.to_json().unwrap(),
            r#"{"alpha_total":1.0,"components":[{"beta":1.0,"gamma":1.0,"order":1}]}"#
        );
    }

    #[test]
    fn laplace_wins_on_laplace_data() {
        let mut rng = crate::rng::stream(5, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| crate::rng::laplace(&mut rng, 0.0, 3.0)).collect();
        let fits = compare_families(&xs).unwrap();
        assert!(fits[0].log_likelihood > fits[1].log_likelihood);
        assert!(fits[0].log_likelihood > fits[2].log_likelihood);
        // Logistic scale of Laplace(0, 3) data should be positive and finite.
        assert!(fits[2].scale > 0.0 && fits[2].scale.is_finite());
    }

    #[test]
    fn logistic_fit_recovers_parameters() {
        let mut rng = crate::rng::stream(6, 0);
        let xs: Vec<f64> = (0..50_000)
            .map(|_| {
                let u = crate::rng::open_unit(&mut rng);
                1.5 + 2.0 * (u / (1.0 - u)).ln()
            })
            .collect();
        let fits = compare_families(&xs).unwrap();
        let logistic = fits[2];
        assert!((logistic.location - 1.5).abs() < 0.05);
        assert!((logistic.scale - 2.0).abs() < 0.05);
        assert!(logistic.log_likelihood > fits[0].log_likelihood);
        assert!(logistic.log_likelihood > fits[1].log_likelihood);
    }

    proptest! {
        #[test]
        fn quantile_monotone_in_p_and_b(p in 0.5001f64..0.9999, dp in 1e-4f64..0.04, b in 0.1f64..10.0, db in 0.01f64..5.0) {
            let q = |p: f64, b: f64| laplace_quantile(&LaplaceParams { mu: 0.0, b }, p);
            let p2 = (p + dp).min(0.99999);
            prop_assume!(p2 > p);
            prop_assert!(q(p2, b) > q(p, b));
            prop_assert!(q(p, b + db) > q(p, b));
        }

        #[test]
        fn mixture_invariants(betas in prop::collection::vec(0.2f64..5.0, 1..6), alphas in prop::collection::vec(-3.0f64..3.0, 6)) {
            let users: Vec<(f64, f64)> = betas.iter().zip(&alphas).map(|(&b, &a)| (a, b)).collect();
            let mix = match aggregate_distribution(&users, 0.05) {
                Ok(m) => m,
                Err(Error::NumericallyIllConditioned { .. }) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let mass: f64 = mix.components.iter().map(|c| c.gamma.abs()).sum();
            prop_assert!((mix.weight_sum() - 1.0).abs() < 1e-9 * mass.max(1.0));
            let span = 15.0 * mix.max_beta() * users.len() as f64;
            let mut prev = 0.0;
            for i in 0..1000 {
                let x = mix.alpha_total - span + 2.0 * span * i as f64 / 999.0;
                let c = mix.cdf(x);
                prop_assert!(c >= prev - 1e-12);
                prev = c;
            }
            for p in [0.01, 0.1, 0.3, 0.5, 0.8, 0.95, 0.99] {
                let q = mix.quantile(p).unwrap();
                prop_assert!((mix.cdf(q) - p).abs() < 1e-6);
            }
        }
    }
}
