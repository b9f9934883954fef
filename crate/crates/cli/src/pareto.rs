use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vrslice_core::pareto::{matched_reductions, mean_matched_reduction, pareto_frontier};
use vrslice_core::{Error, ParetoPoint, Result, Scheme};

use crate::io::{write_file, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Metric {
    /// Downlink transmission latency.
    Downlink,
    /// Full motion-to-photon latency.
    Mtp,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// `summary.csv` written by `simulate`.
    #[arg(long)]
    summary: PathBuf,
    /// Latency percentile: 95 or 99.
    #[arg(long, default_value_t = 95)]
    percentile: u8,
    #[arg(long, value_enum, default_value_t = Metric::Downlink)]
    metric: Metric,
}

/// The columns of `summary.csv` this command reads.
#[derive(Debug, Deserialize)]
struct SummaryRow {
    scheme: Scheme,
    p_s: f64,
    downlink_p95_s: f64,
    downlink_p99_s: f64,
    mtp_p95_s: f64,
    mtp_p99_s: f64,
    bandwidth_mean_hz: f64,
}

#[derive(Serialize)]
struct Report {
    percentile: u8,
    metric: String,
    points: usize,
    /// Mean bandwidth reduction of the aggregate frontier against the
    /// individual one at matched latency; absent when nothing matches.
    mean_reduction: Option<f64>,
}

pub fn run(args: &Args, out: &Path) -> Result<()> {
    if !matches!(args.percentile, 95 | 99) {
        return Err(Error::InvalidParameter(format!(
            "percentile {} is not 95 or 99",
            args.percentile
        )));
    }
    let mut reader = csv::Reader::from_path(&args.summary)?;
    let mut points = Vec::new();
    for row in reader.deserialize() {
        let row: SummaryRow = row?;
        let latency = match (args.metric, args.percentile) {
            (Metric::Downlink, 95) => row.downlink_p95_s,
            (Metric::Downlink, _) => row.downlink_p99_s,
            (Metric::Mtp, 95) => row.mtp_p95_s,
            (Metric::Mtp, _) => row.mtp_p99_s,
        };
        points.push((
            row.scheme,
            ParetoPoint::new(row.scheme.to_string(), row.p_s, latency, row.bandwidth_mean_hz),
        ));
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} has no rows",
            args.summary.display()
        )));
    }
    let select = |keep: &dyn Fn(Scheme) -> bool| -> Vec<ParetoPoint> {
        points
            .iter()
            .filter(|(s, _)| keep(*s))
            .map(|(_, p)| p.clone())
            .collect()
    };
    let individual = pareto_frontier(&select(&|s| !s.is_aggregate()));
    let aggregate = pareto_frontier(&select(&|s| s.is_aggregate()));

    write_file(out, "frontier.csv", |w| {
        writeln!(w, "group,scheme,p_s,latency_s,bandwidth_hz")?;
        let mut groups: Vec<(String, Vec<ParetoPoint>)> = Scheme::ALL
            .iter()
            .map(|&s| (s.to_string(), pareto_frontier(&select(&|t| t == s))))
            .collect();
        groups.push(("individual".into(), individual.clone()));
        groups.push(("aggregate".into(), aggregate.clone()));
        for (group, front) in &groups {
            for p in front {
                writeln!(
                    w,
                    "{group},{},{},{:.9},{:.3}",
                    p.scheme, p.p_s, p.latency_s, p.bandwidth_hz
                )?;
            }
        }
        Ok(())
    })?;
    write_file(out, "reductions.csv", |w| {
        writeln!(w, "latency_s,individual_hz,aggregate_hz,reduction")?;
        for m in matched_reductions(&individual, &aggregate) {
            writeln!(
                w,
                "{:.9},{:.3},{:.3},{:.6}",
                m.latency_s, m.reference_hz, m.candidate_hz, m.reduction
            )?;
        }
        Ok(())
    })?;
    let mean_reduction = mean_matched_reduction(&individual, &aggregate);
    match mean_reduction {
        Some(r) => println!(
            "mean bandwidth reduction at matched p{} latency: {:.2}%",
            args.percentile,
            100.0 * r
        ),
        None => println!("no individual frontier point is matched by an aggregate point"),
    }
    write_json(
        out,
        "pareto.json",
        &Report {
            percentile: args.percentile,
            metric: format!("{:?}", args.metric).to_lowercase(),
            points: points.len(),
            mean_reduction,
        },
    )?;
    Ok(())
}
