use std::path::{Path, PathBuf};

use serde::Serialize;
use vrslice_core::stats::{autocorrelation, differences, overflow_rate, rolling_autocorrelation, write_rolling_csv};
use vrslice_core::Result;

use crate::io::{load_trace, write_file, write_json, MetaArgs};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Trace CSV (`frame_index,timestamp_s,size_bytes`).
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    meta: MetaArgs,
    /// Moving-average windows S in frames.
    #[arg(long, value_delimiter = ',', default_value = "1,2,6,10,30,60,120")]
    windows: Vec<usize>,
    /// Largest autocorrelation lag.
    #[arg(long, default_value_t = 60)]
    max_lag: usize,
    /// Rolling autocorrelation window and step, in frames.
    #[arg(long, default_value_t = 600)]
    rolling_window: usize,
    #[arg(long, default_value_t = 60)]
    rolling_step: usize,
    /// Largest lag of the rolling autocorrelation.
    #[arg(long, default_value_t = 10)]
    rolling_max_lag: usize,
}

/// Probability levels at which rate CDFs are tabulated.
const CDF_POINTS: usize = 1_000;

#[derive(Serialize)]
struct Summary {
    content: String,
    frames: usize,
    nominal_rate_bps: f64,
    mean_rate_bps: f64,
    mean_frame_bits: f64,
    size_lag1_autocorrelation: f64,
    diff_lag1_autocorrelation: f64,
}

pub fn run(args: &Args, out: &Path) -> Result<()> {
    let trace = load_trace(&args.trace, &args.meta)?;
    let nominal = trace.meta().rate();

    let mut overflow_rows = Vec::new();
    let mut cdf_rows = Vec::new();
    for &s in &args.windows {
        let dist = overflow_rate(&trace, s, nominal)?;
        overflow_rows.push(format!(
            "{s},{},{},{},{}",
            dist.mean(),
            dist.std(),
            dist.quantile(0.95)?,
            dist.quantile(0.99)?
        ));
        for i in 0..=CDF_POINTS {
            let p = i as f64 / CDF_POINTS as f64;
            cdf_rows.push(format!("{s},{},{p}", dist.quantile(p)? + nominal));
        }
    }
    write_file(out, "overflow.csv", |w| {
        writeln!(w, "window,mean_bps,std_bps,p95_bps,p99_bps")?;
        overflow_rows.iter().try_for_each(|r| writeln!(w, "{r}"))?;
        Ok(())
    })?;
    write_file(out, "rate_cdf.csv", |w| {
        writeln!(w, "window,rate_bps,cdf")?;
        cdf_rows.iter().try_for_each(|r| writeln!(w, "{r}"))?;
        Ok(())
    })?;

    let sizes: Vec<f64> = trace.sizes().iter().map(|&b| 8.0 * b as f64).collect();
    let diffs = differences(&sizes);
    let size_acf = autocorrelation(&sizes, args.max_lag)?;
    let diff_acf = autocorrelation(&diffs, args.max_lag)?;
    write_file(out, "autocorr.csv", |w| {
        writeln!(w, "series,lag,value")?;
        for (name, acf) in [("size", &size_acf), ("diff", &diff_acf)] {
            for (k, v) in acf.values.iter().enumerate() {
                writeln!(w, "{name},{k},{v}")?;
            }
        }
        Ok(())
    })?;

    let rolling = rolling_autocorrelation(&diffs, args.rolling_window, args.rolling_step, args.rolling_max_lag)?;
    write_file(out, "rolling_autocorr.csv", |w| {
        write_rolling_csv(&rolling, trace.meta().phi(), args.rolling_max_lag, w)
    })?;

    write_json(
        out,
        "analysis.json",
        &Summary {
            content: trace.meta().content_name.clone(),
            frames: trace.len(),
            nominal_rate_bps: nominal,
            mean_rate_bps: trace.mean_rate(),
            mean_frame_bits: 8.0 * trace.mean_frame_bytes(),
            size_lag1_autocorrelation: size_acf.at(1),
            diff_lag1_autocorrelation: diff_acf.at(1),
        },
    )?;
    Ok(())
}
