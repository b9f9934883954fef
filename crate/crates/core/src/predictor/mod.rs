//! Linear frame-size prediction.
//!
//! A model predicts the average size of the `T` frames starting `τ` frames
//! after the last observed one, from the last `N` observed frames:
//! `F̂ = θ0 + Σ_j θ_j F(t - j + 1)`. Weights are fitted and stored in
//! normalized units (frame sizes divided by R/φ), so one model can be applied
//! to traces of any rate.
//!
//! Time indexing: `t` counts observed frames (1-based index of the most recent
//! one). A design row exists for every `t` with `N <= t` and
//! `t + τ + T - 1 <= L`.

mod ols;
mod quantile;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{FrameTrace, NormalizedTrace, TraceMeta};

pub use ols::{condition_estimate, least_squares, MAX_CONDITION};
pub use quantile::{pinball_loss, quantile_regression};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Quantile,
}

/// Generalization scope: one trace, one content at any rate, or everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    #[serde(rename = "CRM")]
    ContentRate,
    #[serde(rename = "CM")]
    Content,
    #[serde(rename = "GM")]
    General,
}

impl std::str::FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CRM" => Ok(Scope::ContentRate),
            "CM" => Ok(Scope::Content),
            "GM" => Ok(Scope::General),
            other => Err(Error::InvalidParameter(format!("unknown scope {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionSpec {
    /// Memory N: number of past frames used.
    pub memory: usize,
    /// Averaging horizon T in frames.
    pub horizon: usize,
    /// Look-ahead τ in frames.
    pub lookahead: usize,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_s: Option<f64>,
}

impl PredictionSpec {
    pub fn ols(memory: usize, horizon: usize, lookahead: usize) -> Self {
        Self {
            memory,
            horizon,
            lookahead,
            method: Method::Ols,
            p_s: None,
        }
    }

    pub fn quantile(memory: usize, horizon: usize, lookahead: usize, p_s: f64) -> Self {
        Self {
            memory,
            horizon,
            lookahead,
            method: Method::Quantile,
            p_s: Some(p_s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.lookahead == 0 {
            return Err(Error::InvalidParameter("T and τ must be at least 1".into()));
        }
        match (self.method, self.p_s) {
            (Method::Quantile, Some(p)) if p > 0.0 && p < 1.0 => Ok(()),
            (Method::Quantile, _) => Err(Error::InvalidParameter("quantile method needs p_s in (0, 1)".into())),
            (Method::Ols, None) => Ok(()),
            (Method::Ols, Some(_)) => Err(Error::InvalidParameter("p_s is only valid for quantile fits".into())),
        }
    }

    /// Smallest trace length giving a usable design.
    pub fn min_trace_len(&self) -> usize {
        self.memory + self.lookahead + self.horizon
    }
}

/// A fitted linear predictor in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub theta: Vec<f64>,
    pub spec: PredictionSpec,
    pub scope: Scope,
    pub trained_on: Vec<String>,
    /// Mean squared residual (OLS) or mean pinball loss (quantile), normalized.
    pub fit_loss: f64,
}

/// Identifier used in `trained_on`.
pub fn trace_id(meta: &TraceMeta) -> String {
    format!("{}@{}bps/{}fps", meta.content_name, meta.rate_bps, meta.fps)
}

/// Design matrix, targets and the prediction time `t` of each row.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub times: Vec<usize>,
}

impl Design {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    /// Stacks designs row-wise; no row spans two traces.
    pub fn concat(parts: &[Design]) -> Result<Design> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("no designs to concatenate".into()))?;
        let cols = first.x.ncols();
        let rows: usize = parts.iter().map(Design::rows).sum();
        let mut x = DMatrix::zeros(rows, cols);
        let mut y = DVector::zeros(rows);
        let mut times = Vec::with_capacity(rows);
        let mut at = 0;
        for part in parts {
            let n = part.rows();
            x.rows_mut(at, n).copy_from(&part.x);
            y.rows_mut(at, n).copy_from(&part.y);
            times.extend_from_slice(&part.times);
            at += n;
        }
        Ok(Design { x, y, times })
    }
}

/// Fills `row` with `[1, v(t), v(t-1), …, v(t-N+1)]` (t is 1-based).
pub fn design_row(values: &[f64], t: usize, memory: usize, row: &mut [f64]) {
    row[0] = 1.0;
    for j in 1..=memory {
        row[j] = values[t - j];
    }
}

/// F̄_T(t) = (1/T) Σ_{i<T} F(t + i), with 1-based `t`.
pub fn target_average(trace: &FrameTrace, t: usize, horizon: usize) -> Result<f64> {
    let len = trace.len();
    if t == 0 || horizon == 0 || t + horizon - 1 > len {
        return Err(Error::OutOfRange {
            start: t,
            end: t + horizon,
            len,
        });
    }
    let sum: u64 = trace.sizes()[t - 1..t - 1 + horizon].iter().sum();
    Ok(sum as f64 / horizon as f64)
}

fn window_mean(values: &[f64], start0: usize, horizon: usize) -> f64 {
    values[start0..start0 + horizon].iter().sum::<f64>() / horizon as f64
}

/// Valid prediction times for a series of length `len`.
pub fn valid_times(len: usize, spec: &PredictionSpec) -> std::ops::RangeInclusive<usize> {
    let first = spec.memory;
    let last = (len + 1).saturating_sub(spec.lookahead + spec.horizon);
    first..=last
}

/// Builds the regression problem on a normalized trace.
pub fn build_design(trace: &NormalizedTrace, spec: &PredictionSpec) -> Result<Design> {
    spec.validate()?;
    let len = trace.len();
    if len < spec.min_trace_len() {
        return Err(Error::TraceTooShort {
            len,
            needed: spec.min_trace_len(),
        });
    }
    let times: Vec<usize> = valid_times(len, spec).collect();
    let cols = spec.memory + 1;
    let mut x = DMatrix::zeros(times.len(), cols);
    let mut y = DVector::zeros(times.len());
    let mut row = vec![0.0; cols];
    for (i, &t) in times.iter().enumerate() {
        design_row(&trace.values, t, spec.memory, &mut row);
        for (c, v) in row.iter().enumerate() {
            x[(i, c)] = *v;
        }
        // Target frames t+τ .. t+τ+T-1 (1-based) start at 0-based t+τ-1.
        y[i] = window_mean(&trace.values, t + spec.lookahead - 1, spec.horizon);
    }
    Ok(Design { x, y, times })
}

/// Ordinary least squares fit.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(Vec<f64>, f64)> {
    let (theta, mse) = least_squares(x, y)?;
    Ok((theta.iter().copied().collect(), mse))
}

/// Pinball-loss fit at level `p_s`.
pub fn fit_quantile(x: &DMatrix<f64>, y: &DVector<f64>, p_s: f64) -> Result<(Vec<f64>, f64)> {
    let (theta, loss) = quantile_regression(x, y, p_s)?;
    Ok((theta.iter().copied().collect(), loss))
}

fn fit_design(design: &Design, spec: &PredictionSpec) -> Result<(Vec<f64>, f64)> {
    match spec.method {
        Method::Ols => fit_ols(&design.x, &design.y),
        Method::Quantile => fit_quantile(&design.x, &design.y, spec.p_s.unwrap_or(0.5)),
    }
}

/// Fits a model over a collection of traces at the given scope.
pub fn fit_scoped(traces: &[NormalizedTrace], spec: &PredictionSpec, scope: Scope) -> Result<LinearModel> {
    spec.validate()?;
    match scope {
        Scope::ContentRate if traces.len() != 1 => {
            return Err(Error::ScopeMismatch(format!(
                "CRM needs exactly one trace, got {}",
                traces.len()
            )))
        }
        Scope::Content => {
            if let Some(first) = traces.first() {
                if let Some(other) = traces.iter().find(|t| t.meta.content_name != first.meta.content_name) {
                    return Err(Error::ScopeMismatch(format!(
                        "CM mixes contents {:?} and {:?}",
                        first.meta.content_name, other.meta.content_name
                    )));
                }
            }
        }
        _ => {}
    }
    if traces.is_empty() {
        return Err(Error::ScopeMismatch("no traces".into()));
    }
    let parts = traces
        .iter()
        .map(|t| build_design(t, spec))
        .collect::<Result<Vec<_>>>()?;
    let design = Design::concat(&parts)?;
    let (theta, fit_loss) = fit_design(&design, spec)?;
    Ok(LinearModel {
        theta,
        spec: *spec,
        scope,
        trained_on: traces.iter().map(|t| trace_id(&t.meta)).collect(),
        fit_loss,
    })
}

/// Convenience: CRM fit on one raw trace.
pub fn fit_trace(trace: &FrameTrace, spec: &PredictionSpec) -> Result<LinearModel> {
    fit_scoped(&[trace.normalize()], spec, Scope::ContentRate)
}

impl LinearModel {
    pub fn memory(&self) -> usize {
        self.spec.memory
    }

    /// Prediction in normalized units from a normalized history ordered
    /// oldest to newest. Not clamped.
    pub fn predict_normalized(&self, history: &[f64]) -> Result<f64> {
        let n = self.memory();
        if history.len() != n {
            return Err(Error::HistoryLengthMismatch {
                expected: n,
                got: history.len(),
            });
        }
        Ok(self.theta[0] + (1..=n).map(|j| self.theta[j] * history[n - j]).sum::<f64>())
    }

    /// Predicted average frame size in bytes, clamped at zero. `history` holds
    /// the last N frame sizes in bytes, oldest first.
    pub fn predict(&self, history: &[u64], meta: &TraceMeta) -> Result<f64> {
        let unit = meta.expected_frame_bytes();
        let normalized: Vec<f64> = history.iter().map(|&h| h as f64 / unit).collect();
        Ok((unit * self.predict_normalized(&normalized)?).max(0.0))
    }

    /// As [`predict`](Self::predict), but falls back to the intercept-only
    /// prediction θ0·R/φ while fewer than N frames have been observed.
    pub fn predict_or_warm_up(&self, history: &[u64], meta: &TraceMeta) -> f64 {
        let n = self.memory();
        if history.len() < n {
            return (self.theta[0] * meta.expected_frame_bytes()).max(0.0);
        }
        self.predict(&history[history.len() - n..], meta)
            .expect("history length checked")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LinearModel = serde_json::from_str(text)?;
        model.spec.validate()?;
        if model.theta.len() != model.spec.memory + 1 {
            return Err(Error::InvalidParameter(format!(
                "model has {} weights for N = {}",
                model.theta.len(),
                model.spec.memory
            )));
        }
        Ok(model)
    }
}

/// Residuals w(t) = F̄_T(t + τ) - F̂_T(t, τ) in bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub w: Vec<f64>,
    pub times: Vec<usize>,
}

impl ResidualSeries {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.w)
    }

    pub fn std(&self) -> f64 {
        crate::stats::std_dev(&self.w)
    }
}

/// Residuals of `model` on every valid prediction time of `trace`.
pub fn residuals(model: &LinearModel, trace: &FrameTrace) -> Result<ResidualSeries> {
    residuals_in(model, trace, 0, trace.len())
}

/// Residuals restricted to prediction times whose history and target lie in
/// frames `[from, to)` (0-based).
pub fn residuals_in(model: &LinearModel, trace: &FrameTrace, from: usize, to: usize) -> Result<ResidualSeries> {
    let spec = &model.spec;
    let to = to.min(trace.len());
    if to <= from || to - from < spec.min_trace_len() {
        return Err(Error::TraceTooShort {
            len: to.saturating_sub(from),
            needed: spec.min_trace_len(),
        });
    }
    let sizes = trace.sizes();
    let n = spec.memory;
    let mut w = Vec::new();
    let mut times = Vec::new();
    for local_t in valid_times(to - from, spec) {
        let t = from + local_t;
        let prediction = model.predict(&sizes[t - n..t], trace.meta())?;
        let target = target_average(trace, t + spec.lookahead, spec.horizon)?;
        w.push(target - prediction);
        times.push(t);
    }
    Ok(ResidualSeries { w, times })
}

/// Fits on the first `train_fraction` of the trace and returns residuals on
/// the remainder.
pub fn holdout_residuals(trace: &FrameTrace, spec: &PredictionSpec, train_fraction: f64) -> Result<ResidualSeries> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {train_fraction}")));
    }
    let split = (trace.len() as f64 * train_fraction).round() as usize;
    let train = FrameTrace::new(trace.meta().clone(), trace.sizes()[..split].to_vec())?;
    let model = fit_trace(&train, spec)?;
    residuals_in(&model, trace, split, trace.len())
}

/// Residual standard deviation (bytes, in-sample) for every (N, τ) cell; rows
/// follow `memories`, columns follow `lookaheads`.
pub fn residual_std_surface(
    trace: &FrameTrace,
    memories: &[usize],
    lookaheads: &[usize],
    horizon: usize,
    method: Method,
    p_s: Option<f64>,
) -> Result<Vec<Vec<f64>>> {
    let normalized = trace.normalize();
    memories
        .par_iter()
        .map(|&memory| {
            lookaheads
                .iter()
                .map(|&lookahead| {
                    let spec = PredictionSpec {
                        memory,
                        horizon,
                        lookahead,
                        method,
                        p_s,
                    };
                    let model = fit_scoped(std::slice::from_ref(&normalized), &spec, Scope::ContentRate)?;
                    Ok(residuals(&model, trace)?.std())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}
