use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use vrslice_core::predictor::Scope;
use vrslice_core::scenarios::{
    build_scenario, general_predictor, heterogeneous_users, identical_users, training_traces, ORCHESTRATOR_MEMORY,
};
use vrslice_core::sim::{run_sweep, sweep_cells, ScenarioConfig, SweepCell};
use vrslice_core::stats::empirical_quantile;
use vrslice_core::{Error, FrameTrace, Result, Scenario, Scheme, SimOutput, SlicePredictor};

use crate::io::{write_file, write_json};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    scenario: Option<PathBuf>,
    /// Built-in surrogate scenario: `heterogeneous` or `identical:M`.
    #[arg(long)]
    builtin: Option<String>,
    /// Frames simulated per user (built-in scenarios).
    #[arg(long, default_value_t = 20_000)]
    frames: usize,
    /// Slicing interval S (built-in scenarios).
    #[arg(long, default_value_t = 6)]
    interval: usize,
    /// Schemes to sweep; defaults to the scenario's scheme, or all four for
    /// built-in scenarios.
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<Scheme>,
    /// Target probabilities p_s to sweep; defaults to the scenario's value,
    /// or 0.95.
    #[arg(long, value_delimiter = ',')]
    p_s: Vec<f64>,
    /// Skip the per-frame latency and per-slot bandwidth CSVs.
    #[arg(long)]
    no_frame_csv: bool,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    base_seed: u64,
    users: usize,
    interval: usize,
    duration_frames: usize,
    cells: &'a [SweepCell],
}

fn parse_builtin(name: &str) -> Result<Vec<vrslice_core::scenarios::UserSpec>> {
    match name.split_once(':') {
        None if name == "heterogeneous" => Ok(heterogeneous_users()),
        Some(("identical", m)) => match m.parse::<usize>() {
            Ok(m) if m > 0 => Ok(identical_users(m)),
            _ => Err(Error::InvalidParameter(format!("bad user count in {name:?}"))),
        },
        _ => Err(Error::InvalidParameter(format!(
            "unknown built-in scenario {name:?}; use heterogeneous or identical:M"
        ))),
    }
}

/// Scenario, predictors, and the defaults for the sweep axes.
struct Prepared {
    scenario: Scenario,
    predictors: Vec<Arc<SlicePredictor>>,
    schemes: Vec<Scheme>,
    p_values: Vec<f64>,
}

fn prepare(args: &Args, seed: Option<u64>) -> Result<Prepared> {
    if let Some(path) = &args.scenario {
        let config = ScenarioConfig::load(path)?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let mut scenario = config.instantiate(base_dir)?;
        if let Some(s) = seed {
            scenario.seed = s;
        }
        let traces: Vec<FrameTrace> = scenario.users.iter().map(|u| (*u.trace).clone()).collect();
        let predictor = Arc::new(SlicePredictor::fit(
            &traces,
            config.memory(),
            config.interval,
            Scope::General,
        )?);
        let n = scenario.users.len();
        Ok(Prepared {
            scenario,
            predictors: vec![predictor; n],
            schemes: vec![config.scheme],
            p_values: vec![config.p_s],
        })
    } else {
        let name = args.builtin.as_deref().unwrap_or("heterogeneous");
        let users = parse_builtin(name)?;
        let seed = seed.unwrap_or(1);
        let train = training_traces(&users, 20_000.max(ORCHESTRATOR_MEMORY + 2 * args.interval + 1), seed)?;
        let predictor = general_predictor(&train, args.interval)?;
        let scenario = build_scenario(
            &users,
            Scheme::IF,
            args.interval,
            0.95,
            args.frames,
            2 * args.frames,
            seed,
        )?;
        Ok(Prepared {
            scenario,
            predictors: vec![predictor; users.len()],
            schemes: Scheme::ALL.to_vec(),
            p_values: vec![0.95],
        })
    }
}

fn run_id(cell: &SweepCell) -> String {
    format!("{:03}_{}_{:.4}", cell.index, cell.scheme, cell.p_s)
}

pub fn run(args: &Args, seed: Option<u64>, out: &Path) -> Result<()> {
    let Prepared {
        scenario,
        predictors: preds,
        schemes,
        p_values,
    } = prepare(args, seed)?;
    let schemes = if args.schemes.is_empty() {
        schemes
    } else {
        args.schemes.clone()
    };
    let p_values = if args.p_s.is_empty() {
        p_values
    } else {
        args.p_s.clone()
    };
    if let Some(p) = p_values.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::InvalidParameter(format!("p_s = {p} outside (0, 1)")));
    }
    let cells = sweep_cells(&schemes, &p_values, scenario.seed);
    let results = run_sweep(&scenario, &cells, &preds)?;

    let summaries = results
        .iter()
        .map(|(cell, o)| Ok((cell, o.summary()?)))
        .collect::<Result<Vec<_>>>()?;
    write_file(out, "summary.csv", |w| {
        writeln!(
            w,
            "run_id,scheme,p_s,seed,frames,undelivered,downlink_mean_s,downlink_p50_s,downlink_p95_s,downlink_p99_s,\
             mtp_mean_s,mtp_p95_s,mtp_p99_s,deadline_rate,bandwidth_mean_hz,bandwidth_p95_hz"
        )?;
        for (cell, k) in &summaries {
            writeln!(
                w,
                "{},{},{},{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.6},{:.3},{:.3}",
                run_id(cell),
                cell.scheme,
                cell.p_s,
                cell.seed,
                k.frames,
                k.undelivered,
                k.downlink_mean_s,
                k.downlink_p50_s,
                k.downlink_p95_s,
                k.downlink_p99_s,
                k.mtp_mean_s,
                k.mtp_p95_s,
                k.mtp_p99_s,
                k.deadline_rate,
                k.bandwidth_mean_hz,
                k.bandwidth_p95_hz
            )?;
        }
        Ok(())
    })?;
    write_file(out, "per_user.csv", |w| {
        writeln!(
            w,
            "run_id,user,bandwidth_mean_hz,downlink_p95_s,downlink_p99_s,max_backlog_bits"
        )?;
        for ((cell, o), (_, k)) in results.iter().zip(&summaries) {
            for m in 0..o.num_users {
                let lat = o.downlink_latencies(Some(m));
                let (p95, p99) = if lat.is_empty() {
                    (String::new(), String::new())
                } else {
                    (
                        format!("{:.9}", empirical_quantile(&lat, 0.95)?),
                        format!("{:.9}", empirical_quantile(&lat, 0.99)?),
                    )
                };
                writeln!(
                    w,
                    "{},{m},{:.3},{p95},{p99},{}",
                    run_id(cell),
                    k.per_user_bandwidth_hz[m],
                    o.max_backlog_bits[m]
                )?;
            }
        }
        Ok(())
    })?;
    if !args.no_frame_csv {
        let each = |w: &mut dyn Write, f: &dyn Fn(&SimOutput, &str, &mut dyn Write) -> Result<()>| -> Result<()> {
            for (i, (cell, o)) in results.iter().enumerate() {
                let mut buf = Vec::new();
                f(o, &run_id(cell), &mut buf)?;
                // Keep the header of the first cell only.
                let body = if i == 0 {
                    &buf[..]
                } else {
                    let start = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |p| p + 1);
                    &buf[start..]
                };
                w.write_all(body)?;
            }
            Ok(())
        };
        write_file(out, "latency.csv", |w| each(w, &|o, id, b| o.write_latency_csv(id, b)))?;
        write_file(out, "downlink.csv", |w| {
            each(w, &|o, id, b| o.write_downlink_csv(id, b))
        })?;
        write_file(out, "bandwidth.csv", |w| {
            each(w, &|o, id, b| o.write_bandwidth_csv(id, b))
        })?;
    }
    write_json(
        out,
        "run.json",
        &RunInfo {
            base_seed: scenario.seed,
            users: scenario.users.len(),
            interval: scenario.interval,
            duration_frames: scenario.duration,
            cells: &cells,
        },
    )?;
    Ok(())
}
