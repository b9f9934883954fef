//! Bandwidth allocation policies.
//!
//! Four schemes are supported: individual or aggregated slices, each either
//! constant over the S-frame slicing interval (FDMA) or set frame by frame
//! (OFDMA). All quantities are in bits, seconds and Hz.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::{aggregate_distribution, LaplaceParams, LaplacePredictor};
use crate::predictor::Scope;
use crate::trace::{FrameTrace, Source, TraceMeta};

/// Fixed and worst-case components of the motion-to-photon budget, in
/// seconds (φ in frames per second).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBudget {
    pub t_max: f64,
    pub delta_u: f64,
    pub tau_p: f64,
    pub tau_r: f64,
    pub phi: f64,
}

impl LatencyBudget {
    /// 50 ms deadline, 7 ms tracking interval, 5 ms propagation and
    /// rendering, 60 fps.
    pub fn reference() -> Self {
        Self {
            t_max: 0.050,
            delta_u: 0.007,
            tau_p: 0.005,
            tau_r: 0.005,
            phi: 60.0,
        }
    }

    pub fn frame_period(&self) -> f64 {
        1.0 / self.phi
    }

    pub fn t_tx(&self) -> Result<f64> {
        compute_t_tx(self)
    }

    /// Smallest possible MTP latency with instantaneous downlink.
    pub fn fixed_floor(&self) -> f64 {
        2.0 * self.tau_p + self.tau_r
    }
}

/// Downlink time left after the worst case of every other component:
/// `T_max - Δ_u - 2τ_p - 1/φ - τ_r`.
pub fn compute_t_tx(budget: &LatencyBudget) -> Result<f64> {
    let b = budget;
    if [b.t_max, b.delta_u, b.tau_p, b.tau_r].iter().any(|v| !(*v >= 0.0)) || !(b.phi > 0.0) {
        return Err(Error::InvalidParameter(format!("latency budget {b:?}")));
    }
    let t_tx = b.t_max - b.delta_u - 2.0 * b.tau_p - 1.0 / b.phi - b.tau_r;
    if t_tx > 0.0 {
        Ok(t_tx)
    } else {
        Err(Error::InfeasibleBudget(t_tx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    IF,
    IO,
    AF,
    AO,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::IF, Scheme::IO, Scheme::AF, Scheme::AO];

    pub fn is_aggregate(self) -> bool {
        matches!(self, Scheme::AF | Scheme::AO)
    }

    /// True when the bandwidth may change every frame.
    pub fn is_per_frame(self) -> bool {
        matches!(self, Scheme::IO | Scheme::AO)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::IF => "IF",
            Scheme::IO => "IO",
            Scheme::AF => "AF",
            Scheme::AO => "AO",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IF" => Ok(Scheme::IF),
            "IO" => Ok(Scheme::IO),
            "AF" => Ok(Scheme::AF),
            "AO" => Ok(Scheme::AO),
            _ => Err(Error::InvalidParameter(format!("unknown scheme {s:?}"))),
        }
    }
}

/// A user's radio link and stream parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLink {
    pub user_id: usize,
    /// Spectral efficiency in bit/s/Hz.
    pub eta: f64,
    pub rate_bps: u64,
    pub fps: u32,
}

impl UserLink {
    pub fn new(user_id: usize, eta: f64, rate_bps: u64, fps: u32) -> Result<Self> {
        let link = Self {
            user_id,
            eta,
            rate_bps,
            fps,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) || self.rate_bps == 0 || self.fps == 0 {
            return Err(Error::InvalidParameter(format!(
                "user {}: η = {}, R = {}, φ = {}",
                self.user_id, self.eta, self.rate_bps, self.fps
            )));
        }
        Ok(())
    }

    /// Metadata used to normalize this user's history for prediction.
    pub fn stream_meta(&self) -> TraceMeta {
        TraceMeta {
            content_name: format!("user{}", self.user_id),
            rate_bps: self.rate_bps,
            fps: self.fps,
            source: Source::Synthetic,
        }
    }
}

/// Constant bandwidth over the interval: `(P⁻¹ + q/S) / (η T_tx)`.
pub fn allocate_if(eta: f64, queue_bits: f64, quantile_bits: f64, s: usize, t_tx: f64) -> f64 {
    (quantile_bits.max(0.0) + queue_bits / s as f64) / (eta * t_tx)
}

/// Per-frame bandwidth; the backlog is flushed in the first slot.
pub fn allocate_io(eta: f64, queue_bits: f64, slot_quantiles_bits: &[f64], t_tx: f64) -> Vec<f64> {
    slot_quantiles_bits
        .iter()
        .enumerate()
        .map(|(l, &p)| {
            let q = if l == 0 { queue_bits } else { 0.0 };
            (p.max(0.0) + q) / (eta * t_tx)
        })
        .collect()
}

/// Constant aggregate bandwidth. `agg_quantile` is a quantile of
/// `Σ_m F_m / η_m` (Hz·s per frame), so η-weighting is already inside it.
pub fn allocate_af(etas: &[f64], queues_bits: &[f64], agg_quantile: f64, s: usize, t_tx: f64) -> f64 {
    let backlog: f64 = etas.iter().zip(queues_bits).map(|(e, q)| q / e).sum();
    (agg_quantile.max(0.0) + backlog / s as f64) / t_tx
}

/// Per-frame aggregate bandwidth; all backlogs are flushed in the first slot.
pub fn allocate_ao(etas: &[f64], queues_bits: &[f64], slot_agg_quantiles: &[f64], t_tx: f64) -> Vec<f64> {
    let backlog: f64 = etas.iter().zip(queues_bits).map(|(e, q)| q / e).sum();
    slot_agg_quantiles
        .iter()
        .enumerate()
        .map(|(l, &p)| {
            let q = if l == 0 { backlog } else { 0.0 };
            (p.max(0.0) + q) / t_tx
        })
        .collect()
}

/// Queue stability: `η E[B] > φ E[F]` (strict).
pub fn check_stability(mean_bandwidth: f64, eta: f64, mean_frame_bits: f64, phi: f64) -> bool {
    eta * mean_bandwidth > phi * mean_frame_bits
}

/// Converts a per-user Laplace frame-size law in bytes into bandwidth-time
/// units (Hz·s): `(8μ/η, 8b/η)`.
pub fn bandwidth_terms(dist: &LaplaceParams, eta: f64) -> (f64, f64) {
    (8.0 * dist.mu / eta, 8.0 * dist.b / eta)
}

/// p-quantile of `Σ_m F_m / η_m` in Hz·s, clamped at zero. Near-equal poles
/// that the tolerance fails to merge trigger a retry with a doubled
/// tolerance.
pub fn aggregate_quantile(terms: &[(f64, f64)], p: f64, cluster_tol: f64) -> Result<f64> {
    let mut tol = cluster_tol;
    loop {
        match aggregate_distribution(terms, tol) {
            Ok(mix) => return Ok(mix.quantile(p)?.max(0.0)),
            Err(Error::NumericallyIllConditioned { .. }) if tol < 0.5 => tol = (tol * 2.0).max(1e-6),
            Err(e) => return Err(e),
        }
    }
}

/// The models a slicing orchestrator needs for one interval length S: the
/// S-frame average one step ahead, and single frames ℓ = 1..S steps ahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePredictor {
    pub interval: usize,
    pub horizon: LaplacePredictor,
    pub slots: Vec<LaplacePredictor>,
}

impl SlicePredictor {
    pub fn fit(traces: &[FrameTrace], memory: usize, interval: usize, scope: Scope) -> Result<Self> {
        if interval == 0 {
            return Err(Error::InvalidParameter("slicing interval S must be at least 1".into()));
        }
        let horizon = LaplacePredictor::fit(traces, memory, interval, 1, scope)?;
        let slots = (1..=interval)
            .map(|l| {
                if l == 1 && interval == 1 {
                    Ok(horizon.clone())
                } else {
                    LaplacePredictor::fit(traces, memory, 1, l, scope)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            interval,
            horizon,
            slots,
        })
    }
}

/// Bandwidth for every slot of one interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Allocation {
    /// `per_user[m][ℓ]` in Hz.
    Individual(Vec<Vec<f64>>),
    /// Slice bandwidth per slot in Hz.
    Aggregate(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceDecision {
    pub interval: usize,
    pub scheme: Scheme,
    pub allocation: Allocation,
}

impl SliceDecision {
    /// Total bandwidth reserved in slot ℓ (0-based).
    pub fn slot_total(&self, slot: usize) -> f64 {
        match &self.allocation {
            Allocation::Individual(per_user) => per_user.iter().map(|b| b[slot]).sum(),
            Allocation::Aggregate(b) => b[slot],
        }
    }
}

/// Everything the orchestrator knows about one user at a slicing epoch.
pub struct UserView<'a> {
    pub link: &'a UserLink,
    pub predictor: &'a SlicePredictor,
    /// Frame sizes (bytes) observed before the epoch, oldest first.
    pub observed: &'a [u64],
    pub queue_bits: f64,
}

/// Computes the allocation of one slicing interval.
pub fn decide(
    scheme: Scheme,
    interval: usize,
    users: &[UserView<'_>],
    p_s: f64,
    t_tx: f64,
    cluster_tol: f64,
) -> Result<SliceDecision> {
    if users.is_empty() {
        return Err(Error::InvalidParameter("no users".into()));
    }
    if !(p_s > 0.0 && p_s < 1.0) {
        return Err(Error::InvalidParameter(format!("p_s = {p_s}")));
    }
    let s = users[0].predictor.interval;
    if users.iter().any(|u| u.predictor.interval != s) {
        return Err(Error::InvalidParameter("users disagree on the slicing interval".into()));
    }
    let metas: Vec<TraceMeta> = users.iter().map(|u| u.link.stream_meta()).collect();
    let allocation = match scheme {
        Scheme::IF => Allocation::Individual(
            users
                .iter()
                .zip(&metas)
                .map(|(u, meta)| {
                    let q = 8.0 * u.predictor.horizon.quantile(u.observed, meta, p_s);
                    vec![allocate_if(u.link.eta, u.queue_bits, q, s, t_tx); s]
                })
                .collect(),
        ),
        Scheme::IO => Allocation::Individual(
            users
                .iter()
                .zip(&metas)
                .map(|(u, meta)| {
                    let qs: Vec<f64> = u
                        .predictor
                        .slots
                        .iter()
                        .map(|m| 8.0 * m.quantile(u.observed, meta, p_s))
                        .collect();
                    allocate_io(u.link.eta, u.queue_bits, &qs, t_tx)
                })
                .collect(),
        ),
        Scheme::AF | Scheme::AO => {
            let etas: Vec<f64> = users.iter().map(|u| u.link.eta).collect();
            let queues: Vec<f64> = users.iter().map(|u| u.queue_bits).collect();
            let terms_for = |pick: &dyn Fn(&SlicePredictor) -> &LaplacePredictor| -> Vec<(f64, f64)> {
                users
                    .iter()
                    .zip(&metas)
                    .map(|(u, meta)| {
                        let d = pick(u.predictor).distribution(u.observed, meta);
                        bandwidth_terms(&d, u.link.eta)
                    })
                    .collect()
            };
            if scheme == Scheme::AF {
                let q = aggregate_quantile(&terms_for(&|p| &p.horizon), p_s, cluster_tol)?;
                Allocation::Aggregate(vec![allocate_af(&etas, &queues, q, s, t_tx); s])
            } else {
                let qs = (0..s)
                    .map(|l| aggregate_quantile(&terms_for(&|p| &p.slots[l]), p_s, cluster_tol))
                    .collect::<Result<Vec<_>>>()?;
                Allocation::Aggregate(allocate_ao(&etas, &queues, &qs, t_tx))
            }
        }
    };
    Ok(SliceDecision {
        interval,
        scheme,
        allocation,
    })
}
