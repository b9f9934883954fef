//! Frame-synchronous simulation of predictive slicing.
//!
//! Time advances in frame periods (slots) of 1/φ. At the start of every slot
//! each user's next frame enters its FIFO queue at the base station; every S
//! slots the orchestrator fixes the bandwidth of the next S slots. Service is
//! fluid and counted in whole bits, so conservation holds exactly.
//!
//! Random streams: the orchestrator uses stream 0 of the scenario seed (for
//! random trace offsets) and user m uses stream m + 1 (for the uniform
//! tracking and frame-generation delays), see [`crate::rng::stream`].

use std::collections::VecDeque;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::DEFAULT_CLUSTER_TOL;
use crate::rng;
use crate::slicing::{decide, Allocation, LatencyBudget, Scheme, SliceDecision, SlicePredictor, UserLink, UserView};
use crate::stats::EmpiricalDistribution;
use crate::trace::FrameTrace;

/// Pole clustering tolerance used by the simulator's aggregate quantiles.
/// Predicted scales of similar users differ by a few percent, where the
/// simple-pole weights lose most of their digits.
pub const SIM_CLUSTER_TOL: f64 = 0.05;

/// One user of a scenario, bound to its trace.
#[derive(Debug, Clone)]
pub struct SimUser {
    pub link: UserLink,
    pub trace: Arc<FrameTrace>,
    /// First trace frame streamed by this user.
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub users: Vec<SimUser>,
    pub budget: LatencyBudget,
    pub scheme: Scheme,
    pub interval: usize,
    pub p_s: f64,
    pub seed: u64,
    pub duration: usize,
    pub cluster_tol: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::InvalidParameter("scenario has no users".into()));
        }
        if self.interval == 0 || self.duration == 0 {
            return Err(Error::InvalidParameter("S and duration must be positive".into()));
        }
        if !(self.p_s > 0.0 && self.p_s < 1.0) {
            return Err(Error::InvalidParameter(format!("p_s = {}", self.p_s)));
        }
        self.budget.t_tx()?;
        for (m, u) in self.users.iter().enumerate() {
            u.link.validate()?;
            if (u.link.fps as f64 - self.budget.phi).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "user {m} streams at {} fps but the budget assumes {}",
                    u.link.fps, self.budget.phi
                )));
            }
            let needed = u.offset + self.duration;
            if needed > u.trace.len() {
                return Err(Error::TraceExhausted {
                    user: m,
                    needed,
                    len: u.trace.len(),
                });
            }
        }
        Ok(())
    }

    /// Same scenario with a different scheme, p_s and seed.
    pub fn with_cell(&self, scheme: Scheme, p_s: f64, seed: u64) -> Self {
        Self {
            scheme,
            p_s,
            seed,
            ..self.clone()
        }
    }
}

/// Draws uniform trace offsets from the orchestrator stream so that every
/// user can stream `duration` frames.
pub fn random_offsets(traces: &[Arc<FrameTrace>], duration: usize, seed: u64) -> Result<Vec<usize>> {
    let mut r = rng::stream(seed, 0);
    traces
        .iter()
        .enumerate()
        .map(|(m, t)| {
            if t.len() < duration {
                return Err(Error::TraceExhausted {
                    user: m,
                    needed: duration,
                    len: t.len(),
                });
            }
            Ok(r.random_range(0..=t.len() - duration))
        })
        .collect()
}

/// Outcome of dividing one slot of an aggregate slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Share {
    /// Bits served per user.
    pub served: Vec<u64>,
    /// Bandwidth-time (Hz·s) used by each user.
    pub bandwidth_time: Vec<f64>,
    /// Unused bandwidth-time (Hz·s).
    pub idle: f64,
    /// Seconds needed per bit at each user's service rate (∞ if unserved).
    pub seconds_per_bit: Vec<f64>,
}

/// Need-based in-slice scheduling: user m receives bandwidth in proportion to
/// `q_m / η_m`, so all backlogs progress by the same fraction and, when the
/// budget suffices, finish together; the rest of the slot is idle.
pub fn need_based_share(backlogs: &[u64], etas: &[f64], bandwidth: f64, slot: f64) -> Share {
    let needs: Vec<f64> = backlogs.iter().zip(etas).map(|(&q, e)| q as f64 / e).collect();
    let total: f64 = needs.iter().sum();
    let budget = (bandwidth * slot).max(0.0);
    let m = backlogs.len();
    if total == 0.0 || budget == 0.0 {
        return Share {
            served: vec![0; m],
            bandwidth_time: vec![0.0; m],
            idle: budget,
            seconds_per_bit: vec![f64::INFINITY; m],
        };
    }
    let fraction = (budget / total).min(1.0);
    let served = backlogs
        .iter()
        .map(|&q| {
            if fraction >= 1.0 {
                q
            } else {
                ((fraction * q as f64).floor() as u64).min(q)
            }
        })
        .collect();
    let bandwidth_time: Vec<f64> = needs.iter().map(|n| n * fraction).collect();
    let used: f64 = bandwidth_time.iter().sum();
    let seconds_per_bit = backlogs
        .iter()
        .map(|&q| {
            if q == 0 {
                f64::INFINITY
            } else {
                total / (bandwidth * q as f64)
            }
        })
        .collect();
    Share {
        served,
        bandwidth_time,
        idle: (budget - used).max(0.0),
        seconds_per_bit,
    }
}

/// Per-frame outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiRecord {
    pub user: usize,
    pub frame: usize,
    pub size_bits: u64,
    /// Time from arrival at the base station to full delivery; `None` if the
    /// frame was still queued when the run ended.
    pub downlink_s: Option<f64>,
    pub mtp_s: Option<f64>,
    pub deadline_met: bool,
}

/// Bandwidth reserved for (or attributed to) a user in one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthRecord {
    pub slot: usize,
    pub user: usize,
    pub bandwidth_hz: f64,
}

/// Bits accounting for one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BitLedger {
    pub bits_in: u64,
    pub bits_served: u64,
    pub backlog: u64,
}

impl BitLedger {
    pub fn is_conserved(&self) -> bool {
        self.bits_in == self.bits_served + self.backlog
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub frames: Vec<KpiRecord>,
    pub bandwidth: Vec<BandwidthRecord>,
    pub ledgers: Vec<BitLedger>,
    pub max_backlog_bits: Vec<u64>,
    pub num_users: usize,
}

struct Pending {
    frame: usize,
    remaining: u64,
    arrival: f64,
    extra_delay: f64,
}

/// Runs the predictive orchestrator with one predictor per user (users may
/// share the same `Arc`).
pub fn run(scenario: &Scenario, predictors: &[Arc<SlicePredictor>]) -> Result<SimOutput> {
    if predictors.len() != scenario.users.len() {
        return Err(Error::PredictorMissing(predictors.len().min(scenario.users.len())));
    }
    if let Some(m) = predictors.iter().position(|p| p.interval != scenario.interval) {
        return Err(Error::PredictorMissing(m));
    }
    let t_tx = scenario.budget.t_tx()?;
    let links: Vec<&UserLink> = scenario.users.iter().map(|u| &u.link).collect();
    run_with(scenario, |epoch, queues| {
        let start = epoch * scenario.interval;
        let views: Vec<UserView<'_>> = scenario
            .users
            .iter()
            .zip(predictors)
            .zip(queues)
            .zip(&links)
            .map(|(((u, p), &q), link)| UserView {
                link,
                predictor: p,
                observed: &u.trace.sizes()[..u.offset + start],
                queue_bits: q as f64,
            })
            .collect();
        decide(scenario.scheme, epoch, &views, scenario.p_s, t_tx, scenario.cluster_tol)
    })
}

/// Runs the simulation with an arbitrary allocator, called once per interval
/// with the epoch index and the per-user backlogs in bits.
pub fn run_with<F>(scenario: &Scenario, mut allocate: F) -> Result<SimOutput>
where
    F: FnMut(usize, &[u64]) -> Result<SliceDecision>,
{
    scenario.validate()?;
    let m_users = scenario.users.len();
    let s = scenario.interval;
    let slot = scenario.budget.frame_period();
    let budget = &scenario.budget;
    let etas: Vec<f64> = scenario.users.iter().map(|u| u.link.eta).collect();
    let mut rngs: Vec<_> = (0..m_users).map(|m| rng::stream(scenario.seed, m as u64 + 1)).collect();

    let mut queues: Vec<VecDeque<Pending>> = (0..m_users).map(|_| VecDeque::new()).collect();
    let mut backlog = vec![0u64; m_users];
    let mut ledgers = vec![
        BitLedger {
            bits_in: 0,
            bits_served: 0,
            backlog: 0
        };
        m_users
    ];
    let mut max_backlog = vec![0u64; m_users];
    let mut frames: Vec<KpiRecord> = Vec::with_capacity(m_users * scenario.duration);
    let mut bandwidth = Vec::with_capacity(m_users * scenario.duration);

    let epochs = scenario.duration.div_ceil(s);
    for epoch in 0..epochs {
        let decision = allocate(epoch, &backlog)?;
        check_decision(&decision, m_users, s)?;
        for l in 0..s {
            let k = epoch * s + l;
            if k >= scenario.duration {
                break;
            }
            let slot_start = k as f64 * slot;
            for (m, u) in scenario.users.iter().enumerate() {
                let bits = 8 * u.trace.sizes()[u.offset + k];
                let r = &mut rngs[m];
                let tau_m = budget.delta_u * rng::open_unit(r);
                let tau_f = slot * rng::open_unit(r);
                let idx = frames.len();
                frames.push(KpiRecord {
                    user: m,
                    frame: k,
                    size_bits: bits,
                    downlink_s: None,
                    mtp_s: None,
                    deadline_met: false,
                });
                queues[m].push_back(Pending {
                    frame: idx,
                    remaining: bits,
                    arrival: slot_start,
                    extra_delay: tau_m + tau_f + 2.0 * budget.tau_p + budget.tau_r,
                });
                backlog[m] += bits;
                ledgers[m].bits_in += bits;
                max_backlog[m] = max_backlog[m].max(backlog[m]);
            }

            // (served bits, seconds per bit) for every user in this slot.
            let service: Vec<(u64, f64)> = match &decision.allocation {
                Allocation::Individual(per_user) => (0..m_users)
                    .map(|m| {
                        let b = per_user[m][l];
                        bandwidth.push(BandwidthRecord {
                            slot: k,
                            user: m,
                            bandwidth_hz: b,
                        });
                        let rate = etas[m] * b;
                        let capacity = (rate * slot).floor();
                        let served = if capacity >= backlog[m] as f64 {
                            backlog[m]
                        } else {
                            capacity as u64
                        };
                        (served, if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
                    })
                    .collect(),
                Allocation::Aggregate(slice) => {
                    let b = slice[l];
                    let share = need_based_share(&backlog, &etas, b, slot);
                    let used: f64 = share.bandwidth_time.iter().sum();
                    for m in 0..m_users {
                        let attributed = if used > 0.0 {
                            b * share.bandwidth_time[m] / used
                        } else {
                            b / m_users as f64
                        };
                        bandwidth.push(BandwidthRecord {
                            slot: k,
                            user: m,
                            bandwidth_hz: attributed,
                        });
                    }
                    share.served.into_iter().zip(share.seconds_per_bit).collect()
                }
            };

            for (m, &(served, spb)) in service.iter().enumerate() {
                let mut position = 0u64;
                let mut left = served;
                while left > 0 {
                    let Some(front) = queues[m].front_mut() else { break };
                    let take = front.remaining.min(left);
                    front.remaining -= take;
                    left -= take;
                    position += take;
                    if front.remaining == 0 {
                        let done = queues[m].pop_front().expect("front exists");
                        let completion = slot_start + position as f64 * spb;
                        let downlink = completion - done.arrival;
                        let mtp = downlink + done.extra_delay;
                        let rec = &mut frames[done.frame];
                        rec.downlink_s = Some(downlink);
                        rec.mtp_s = Some(mtp);
                        rec.deadline_met = mtp <= budget.t_max;
                    }
                }
                backlog[m] -= served;
                ledgers[m].bits_served += served;
            }
        }
    }
    for (l, b) in ledgers.iter_mut().zip(&backlog) {
        l.backlog = *b;
    }
    Ok(SimOutput {
        frames,
        bandwidth,
        ledgers,
        max_backlog_bits: max_backlog,
        num_users: m_users,
    })
}

fn check_decision(decision: &SliceDecision, users: usize, s: usize) -> Result<()> {
    let ok = match &decision.allocation {
        Allocation::Individual(per_user) => {
            per_user.len() == users
                && per_user
                    .iter()
                    .all(|b| b.len() == s && b.iter().all(|x| *x >= 0.0 && x.is_finite()))
        }
        Allocation::Aggregate(b) => b.len() == s && b.iter().all(|x| *x >= 0.0 && x.is_finite()),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "allocation for interval {} has the wrong shape or a negative bandwidth",
            decision.interval
        )))
    }
}

/// Summary statistics of a run (type-7 percentiles).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiSummary {
    pub frames: usize,
    pub undelivered: usize,
    pub downlink_mean_s: f64,
    pub downlink_p50_s: f64,
    pub downlink_p95_s: f64,
    pub downlink_p99_s: f64,
    pub mtp_mean_s: f64,
    pub mtp_p95_s: f64,
    pub mtp_p99_s: f64,
    /// Share of frames whose MTP latency met T_max (undelivered count as
    /// missed).
    pub deadline_rate: f64,
    /// Mean over slots and users of the bandwidth per user.
    pub bandwidth_mean_hz: f64,
    pub bandwidth_p95_hz: f64,
    pub per_user_bandwidth_hz: Vec<f64>,
}

impl SimOutput {
    pub fn downlink_latencies(&self, user: Option<usize>) -> Vec<f64> {
        self.frames
            .iter()
            .filter(|f| user.is_none_or(|u| f.user == u))
            .filter_map(|f| f.downlink_s)
            .collect()
    }

    pub fn mtp_latencies(&self, user: Option<usize>) -> Vec<f64> {
        self.frames
            .iter()
            .filter(|f| user.is_none_or(|u| f.user == u))
            .filter_map(|f| f.mtp_s)
            .collect()
    }

    pub fn is_conserved(&self) -> bool {
        self.ledgers.iter().all(BitLedger::is_conserved)
    }

    pub fn summary(&self) -> Result<KpiSummary> {
        collect_kpis(self)
    }

    /// `run_id,user,frame,latency_s,deadline_met` with MTP latency; the
    /// latency field is empty for undelivered frames.
    pub fn write_latency_csv<W: Write>(&self, run_id: &str, mut w: W) -> Result<()> {
        writeln!(w, "run_id,user,frame,latency_s,deadline_met")?;
        for f in &self.frames {
            match f.mtp_s {
                Some(l) => writeln!(w, "{run_id},{},{},{l:.9},{}", f.user, f.frame, f.deadline_met)?,
                None => writeln!(w, "{run_id},{},{},,{}", f.user, f.frame, f.deadline_met)?,
            }
        }
        Ok(())
    }

    /// `run_id,user,frame,downlink_s`.
    pub fn write_downlink_csv<W: Write>(&self, run_id: &str, mut w: W) -> Result<()> {
        writeln!(w, "run_id,user,frame,downlink_s")?;
        for f in &self.frames {
            match f.downlink_s {
                Some(l) => writeln!(w, "{run_id},{},{},{l:.9}", f.user, f.frame)?,
                None => writeln!(w, "{run_id},{},{},", f.user, f.frame)?,
            }
        }
        Ok(())
    }

    /// `run_id,interval,user,bandwidth_hz`, one row per slot and user.
    pub fn write_bandwidth_csv<W: Write>(&self, run_id: &str, mut w: W) -> Result<()> {
        writeln!(w, "run_id,interval,user,bandwidth_hz")?;
        for b in &self.bandwidth {
            writeln!(w, "{run_id},{},{},{:.6}", b.slot, b.user, b.bandwidth_hz)?;
        }
        Ok(())
    }
}

pub fn collect_kpis(out: &SimOutput) -> Result<KpiSummary> {
    let downlink = EmpiricalDistribution::new(out.downlink_latencies(None))?;
    let mtp = EmpiricalDistribution::new(out.mtp_latencies(None))?;
    let m = out.num_users.max(1);
    let mut per_user = vec![0.0; m];
    let mut slots_per_user = vec![0usize; m];
    let mut slot_totals: Vec<f64> = Vec::new();
    for b in &out.bandwidth {
        per_user[b.user] += b.bandwidth_hz;
        slots_per_user[b.user] += 1;
        if slot_totals.len() <= b.slot {
            slot_totals.resize(b.slot + 1, 0.0);
        }
        slot_totals[b.slot] += b.bandwidth_hz;
    }
    for (total, n) in per_user.iter_mut().zip(&slots_per_user) {
        *total /= (*n).max(1) as f64;
    }
    let per_user_slot = EmpiricalDistribution::new(slot_totals.iter().map(|t| t / m as f64).collect())?;
    let met = out.frames.iter().filter(|f| f.deadline_met).count();
    Ok(KpiSummary {
        frames: out.frames.len(),
        undelivered: out.frames.iter().filter(|f| f.downlink_s.is_none()).count(),
        downlink_mean_s: downlink.mean(),
        downlink_p50_s: downlink.quantile(0.5)?,
        downlink_p95_s: downlink.quantile(0.95)?,
        downlink_p99_s: downlink.quantile(0.99)?,
        mtp_mean_s: mtp.mean(),
        mtp_p95_s: mtp.quantile(0.95)?,
        mtp_p99_s: mtp.quantile(0.99)?,
        deadline_rate: met as f64 / out.frames.len().max(1) as f64,
        bandwidth_mean_hz: per_user_slot.mean(),
        bandwidth_p95_hz: per_user_slot.quantile(0.95)?,
        per_user_bandwidth_hz: per_user,
    })
}

/// One cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub index: usize,
    pub scheme: Scheme,
    pub p_s: f64,
    pub seed: u64,
}

/// Builds the (scheme × p_s) grid; cell seeds derive from the base seed and
/// the cell index.
pub fn sweep_cells(schemes: &[Scheme], p_values: &[f64], base_seed: u64) -> Vec<SweepCell> {
    let mut cells = Vec::with_capacity(schemes.len() * p_values.len());
    for &scheme in schemes {
        for &p_s in p_values {
            let index = cells.len();
            cells.push(SweepCell {
                index,
                scheme,
                p_s,
                seed: rng::derive_seed(base_seed, index as u64),
            });
        }
    }
    cells
}

/// Runs every cell in parallel; results come back in cell order.
pub fn run_sweep(
    base: &Scenario,
    cells: &[SweepCell],
    predictors: &[Arc<SlicePredictor>],
) -> Result<Vec<(SweepCell, SimOutput)>> {
    cells
        .par_iter()
        .map(|cell| {
            let scenario = base.with_cell(cell.scheme, cell.p_s, cell.seed);
            run(&scenario, predictors).map(|out| (*cell, out))
        })
        .collect()
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub users: Vec<UserConfig>,
    pub budget: LatencyBudget,
    pub scheme: Scheme,
    #[serde(rename = "S")]
    pub interval: usize,
    pub p_s: f64,
    pub seed: u64,
    pub duration_frames: usize,
    /// Predictor memory N; 6 when absent.
    #[serde(default)]
    pub memory: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    /// Trace CSV; its JSON sidecar supplies content and frame rate.
    pub trace: PathBuf,
    pub rate_bps: u64,
    pub eta: f64,
    /// Random when absent.
    #[serde(default)]
    pub offset_frames: Option<usize>,
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn memory(&self) -> usize {
        self.memory.unwrap_or(6)
    }

    /// Loads traces (relative paths resolve against `base_dir`) and builds
    /// the runtime scenario. Traces whose nominal rate differs from the
    /// user's `rate_bps` are rescaled to it.
    pub fn instantiate(&self, base_dir: &std::path::Path) -> Result<Scenario> {
        let mut traces = Vec::with_capacity(self.users.len());
        for u in &self.users {
            let path = if u.trace.is_absolute() {
                u.trace.clone()
            } else {
                base_dir.join(&u.trace)
            };
            let t = FrameTrace::load_with_sidecar(&path)?;
            let t = if t.meta().rate_bps == u.rate_bps {
                t
            } else {
                t.rescaled(u.rate_bps as f64 / t.meta().rate_bps as f64, u.rate_bps)?
            };
            traces.push(Arc::new(t));
        }
        let random = random_offsets(&traces, self.duration_frames, self.seed)?;
        let users = self
            .users
            .iter()
            .zip(traces)
            .zip(random)
            .enumerate()
            .map(|(m, ((u, trace), r))| {
                Ok(SimUser {
                    link: UserLink::new(m, u.eta, u.rate_bps, trace.meta().fps)?,
                    offset: u.offset_frames.unwrap_or(r),
                    trace,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            users,
            budget: self.budget,
            scheme: self.scheme,
            interval: self.interval,
            p_s: self.p_s,
            seed: self.seed,
            duration: self.duration_frames,
            cluster_tol: SIM_CLUSTER_TOL.max(DEFAULT_CLUSTER_TOL),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Source, TraceMeta};

    fn constant_user(m: usize, bytes: u64, len: usize, eta: f64) -> SimUser {
        let meta = TraceMeta::new("const", 30_000_000, 60, Source::Synthetic).unwrap();
        SimUser {
            link: UserLink::new(m, eta, 30_000_000, 60).unwrap(),
            trace: Arc::new(FrameTrace::new(meta, vec![bytes; len]).unwrap()),
            offset: 0,
        }
    }

    fn scenario(users: Vec<SimUser>, scheme: Scheme, s: usize, duration: usize) -> Scenario {
        Scenario {
            users,
            budget: LatencyBudget::reference(),
            scheme,
            interval: s,
            p_s: 0.95,
            seed: 1,
            duration,
            cluster_tol: SIM_CLUSTER_TOL,
        }
    }

    #[test]
    fn share_examples() {
        let s = need_based_share(&[2000, 1000], &[1.0, 1.0], 1000.0, 1.0);
        assert_eq!(s.served, vec![666, 333]);
        assert_eq!(s.idle, 0.0);
        let s = need_based_share(&[2000, 1000], &[1.0, 1.0], 5000.0, 1.0);
        assert_eq!(s.served, vec![2000, 1000]);
        assert_eq!(s.idle, 2000.0);
        // Equal backlogs with η = 1, 2, 4: need 1000, 500, 250; budget 875
        // gives fraction 1/2 to everyone.
        let s = need_based_share(&[1000, 1000, 1000], &[1.0, 2.0, 4.0], 875.0, 1.0);
        assert_eq!(s.served, vec![500, 500, 500]);
        assert_eq!(s.bandwidth_time, vec![500.0, 250.0, 125.0]);
        let s = need_based_share(&[0, 0], &[1.0, 1.0], 10.0, 1.0);
        assert_eq!(s.served, vec![0, 0]);
        assert_eq!(s.idle, 10.0);
    }

    #[test]
    fn exact_allocation_finishes_in_t_tx() {
        let sc = scenario(vec![constant_user(0, 62_500, 600, 5.0)], Scheme::IF, 6, 600);
        let t_tx = sc.budget.t_tx().unwrap();
        let b = 8.0 * 62_500.0 / (5.0 * t_tx);
        let out = run_with(&sc, |e, _| {
            Ok(SliceDecision {
                interval: e,
                scheme: Scheme::IF,
                allocation: Allocation::Individual(vec![vec![b; 6]]),
            })
        })
        .unwrap();
        assert!(out.is_conserved());
        for f in &out.frames {
            assert!((f.downlink_s.unwrap() - t_tx).abs() < 1e-12);
            assert!(f.deadline_met);
            assert!(f.mtp_s.unwrap() >= sc.budget.fixed_floor());
        }
    }

    #[test]
    fn zero_bandwidth_starves() {
        let sc = scenario(vec![constant_user(0, 1_000, 60, 5.0)], Scheme::AF, 6, 60);
        let out = run_with(&sc, |e, q| {
            assert_eq!(q[0], 8_000 * 6 * e as u64);
            Ok(SliceDecision {
                interval: e,
                scheme: Scheme::AF,
                allocation: Allocation::Aggregate(vec![0.0; 6]),
            })
        })
        .unwrap();
        assert!(out.frames.iter().all(|f| !f.deadline_met && f.downlink_s.is_none()));
        assert_eq!(out.ledgers[0].backlog, 8_000 * 60);
        assert!(out.is_conserved());
    }

    #[test]
    fn spillover_is_conserved_and_ordered() {
        // Half the needed rate: the queue grows, frames complete in order.
        let sc = scenario(vec![constant_user(0, 1_000, 120, 2.0)], Scheme::IF, 1, 120);
        let b = 0.5 * 8_000.0 * 60.0 / 2.0;
        let out = run_with(&sc, |e, _| {
            Ok(SliceDecision {
                interval: e,
                scheme: Scheme::IF,
                allocation: Allocation::Individual(vec![vec![b]]),
            })
        })
        .unwrap();
        assert!(out.is_conserved());
        let done: Vec<f64> = out
            .frames
            .iter()
            .filter_map(|f| f.downlink_s.map(|d| d + f.frame as f64 / 60.0))
            .collect();
        assert_eq!(done.len(), 60);
        assert!(done.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn aggregate_users_finish_together() {
        let users = vec![constant_user(0, 1_000, 60, 1.0), constant_user(1, 3_000, 60, 4.0)];
        let sc = scenario(users, Scheme::AF, 6, 60);
        let out = run_with(&sc, |e, _| {
            Ok(SliceDecision {
                interval: e,
                scheme: Scheme::AF,
                allocation: Allocation::Aggregate(vec![2.0e6; 6]),
            })
        })
        .unwrap();
        for k in 0..60 {
            let a = out.frames.iter().find(|f| f.user == 0 && f.frame == k).unwrap();
            let b = out.frames.iter().find(|f| f.user == 1 && f.frame == k).unwrap();
            assert!((a.downlink_s.unwrap() - b.downlink_s.unwrap()).abs() < 1e-9);
        }
        // Attribution splits the slice by need: 8000/1 vs 24000/4.
        let bw: Vec<f64> = out.bandwidth.iter().take(2).map(|b| b.bandwidth_hz).collect();
        assert!((bw[0] / bw[1] - 8.0 / 6.0).abs() < 1e-12);
        assert!((bw[0] + bw[1] - 2.0e6).abs() < 1e-6);
    }

    #[test]
    fn exhausted_trace_is_reported() {
        let mut u = constant_user(0, 1_000, 100, 1.0);
        u.offset = 50;
        let sc = scenario(vec![u], Scheme::IF, 1, 60);
        assert!(matches!(
            sc.validate(),
            Err(Error::TraceExhausted {
                user: 0,
                needed: 110,
                len: 100
            })
        ));
    }

    #[test]
    fn sweep_seeds_are_distinct() {
        let cells = sweep_cells(&Scheme::ALL, &[0.9, 0.95], 3);
        assert_eq!(cells.len(), 8);
        let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 8);
    }
}
