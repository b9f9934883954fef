//! Reference scenarios built on synthetic surrogate traces.

use std::sync::Arc;

use crate::error::Result;
use crate::predictor::Scope;
use crate::rng::derive_seed;
use crate::sim::{random_offsets, Scenario, SimUser, SIM_CLUSTER_TOL};
use crate::slicing::{LatencyBudget, Scheme, SlicePredictor, UserLink};
use crate::trace::{surrogate_trace_with_noise, FrameTrace, SURROGATE_RELATIVE_NOISE};

/// Predictor memory used by the orchestrator.
pub const ORCHESTRATOR_MEMORY: usize = 6;

/// A user of a reference scenario: content label, rate (b/s), η (b/s/Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub content: String,
    pub rate_bps: u64,
    pub eta: f64,
    /// Laplace innovation scale of the surrogate, relative to R/φ.
    pub relative_noise: f64,
}

impl UserSpec {
    pub fn new(content: &str, rate_bps: u64, eta: f64) -> Self {
        Self {
            content: content.to_string(),
            rate_bps,
            eta,
            relative_noise: SURROGATE_RELATIVE_NOISE,
        }
    }
}

/// The six heterogeneous users of the multi-user study.
pub fn heterogeneous_users() -> Vec<UserSpec> {
    vec![
        UserSpec::new("virus_popper", 10_000_000, 1.5),
        UserSpec::new("cities", 20_000_000, 2.5),
        UserSpec::new("minecraft", 30_000_000, 3.0),
        UserSpec::new("tour", 40_000_000, 3.5),
        UserSpec::new("minecraft", 50_000_000, 5.5),
        UserSpec::new("virus_popper", 40_000_000, 4.0),
    ]
}

/// `m` users streaming the same content at 30 Mb/s with η = 5.
pub fn identical_users(m: usize) -> Vec<UserSpec> {
    vec![UserSpec::new("virus_popper", 30_000_000, 5.0); m]
}

/// Independent training traces, one per distinct user profile, for fitting
/// the general model.
pub fn training_traces(users: &[UserSpec], length: usize, seed: u64) -> Result<Vec<FrameTrace>> {
    let mut keys: Vec<(String, u64, u64)> = users
        .iter()
        .map(|u| (u.content.clone(), u.rate_bps, u.relative_noise.to_bits()))
        .collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .enumerate()
        .map(|(i, (content, rate, noise))| {
            surrogate_trace_with_noise(
                content,
                *rate,
                60,
                length,
                f64::from_bits(*noise),
                derive_seed(seed, 1_000 + i as u64),
            )
        })
        .collect()
}

/// General-model predictor for interval `s`, trained on `traces`.
pub fn general_predictor(traces: &[FrameTrace], s: usize) -> Result<Arc<SlicePredictor>> {
    Ok(Arc::new(SlicePredictor::fit(
        traces,
        ORCHESTRATOR_MEMORY,
        s,
        Scope::General,
    )?))
}

/// Builds a scenario whose users stream independent surrogate traces of
/// `trace_len` frames, starting at random offsets.
pub fn build_scenario(
    users: &[UserSpec],
    scheme: Scheme,
    s: usize,
    p_s: f64,
    duration: usize,
    trace_len: usize,
    seed: u64,
) -> Result<Scenario> {
    let traces: Vec<Arc<FrameTrace>> = users
        .iter()
        .enumerate()
        .map(|(m, u)| {
            surrogate_trace_with_noise(
                &u.content,
                u.rate_bps,
                60,
                trace_len,
                u.relative_noise,
                derive_seed(seed, 2_000 + m as u64),
            )
            .map(Arc::new)
        })
        .collect::<Result<_>>()?;
    let offsets = random_offsets(&traces, duration, seed)?;
    let sim_users = users
        .iter()
        .zip(traces)
        .zip(offsets)
        .enumerate()
        .map(|(m, ((u, trace), offset))| {
            Ok(SimUser {
                link: UserLink::new(m, u.eta, u.rate_bps, 60)?,
                trace,
                offset,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scenario = Scenario {
        users: sim_users,
        budget: LatencyBudget::reference(),
        scheme,
        interval: s,
        p_s,
        seed,
        duration,
        cluster_tol: SIM_CLUSTER_TOL,
    };
    scenario.validate()?;
    Ok(scenario)
}
