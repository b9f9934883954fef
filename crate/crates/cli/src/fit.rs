use std::path::{Path, PathBuf};

use vrslice_core::laplace::{compare_families, fit_laplace_mle};
use vrslice_core::predictor::{fit_scoped, residuals, Method, PredictionSpec, Scope};
use vrslice_core::stats::{autocorrelation, EmpiricalDistribution};
use vrslice_core::{Error, FrameTrace, Result};

use crate::io::{load_trace, write_file, MetaArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MethodArg {
    Ols,
    Quantile,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Trace CSVs; all of them train every model.
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    #[command(flatten)]
    meta: MetaArgs,
    /// Memory values N.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,6,8")]
    memory: Vec<usize>,
    /// Averaging horizons T.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    horizon: Vec<usize>,
    /// Look-ahead values τ.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    lookahead: Vec<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Ols)]
    method: MethodArg,
    /// Target quantile for the quantile method.
    #[arg(long, default_value_t = 0.95)]
    p_s: f64,
    /// Generalization scope: CRM, CM or GM.
    #[arg(long, default_value = "CRM")]
    scope: Scope,
    /// Largest lag of the residual autocorrelation.
    #[arg(long, default_value_t = 20)]
    max_lag: usize,
}

const CCDF_POINTS: usize = 200;

struct Cell {
    key: String,
    row: String,
    acf: Vec<String>,
    ccdf: Vec<String>,
    families: Vec<String>,
}

fn fit_cell(traces: &[FrameTrace], spec: &PredictionSpec, scope: Scope, max_lag: usize, out: &Path) -> Result<Cell> {
    let normalized: Vec<_> = traces.iter().map(FrameTrace::normalize).collect();
    let model = fit_scoped(&normalized, spec, scope)?;
    let key = format!("{},{},{}", spec.memory, spec.horizon, spec.lookahead);
    let name = format!("models/N{}_T{}_tau{}.json", spec.memory, spec.horizon, spec.lookahead);
    write_file(out, &name, |w| Ok(writeln!(w, "{}", model.to_json()?)?))?;

    // Residuals pooled across traces in units of the expected frame size
    // (dimensionless), and in bits.
    let mut relative = Vec::new();
    let mut bits = Vec::new();
    let mut acf = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        let res = residuals(&model, t)?;
        let unit = t.meta().expected_frame_bytes();
        relative.extend(res.w.iter().map(|w| w / unit));
        bits.extend(res.w.iter().map(|w| 8.0 * w));
        if res.len() > max_lag {
            match autocorrelation(&res.w, max_lag) {
                Ok(a) => acf.extend(a.values.iter().enumerate().map(|(k, v)| format!("{key},{i},{k},{v}"))),
                Err(Error::ConstantSeries) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let rel = EmpiricalDistribution::new(relative.clone())?;
    let bits_dist = EmpiricalDistribution::new(bits)?;
    let laplace_b = fit_laplace_mle(&relative, false).map(|l| l.b).unwrap_or(0.0);
    let ccdf = (0..=CCDF_POINTS)
        .map(|i| {
            let p = i as f64 / CCDF_POINTS as f64;
            Ok(format!("{key},{},{}", rel.quantile(p)?, 1.0 - p))
        })
        .collect::<Result<Vec<_>>>()?;
    let families = match compare_families(&relative) {
        Ok(fits) => fits
            .iter()
            .map(|f| format!("{key},{:?},{},{},{}", f.family, f.location, f.scale, f.log_likelihood))
            .collect(),
        Err(Error::DegenerateSample) => Vec::new(),
        Err(e) => return Err(e),
    };
    let method = match spec.method {
        Method::Ols => "ols",
        Method::Quantile => "quantile",
    };
    let row = format!(
        "{key},{method},{},{},{},{},{},{},{laplace_b}",
        spec.p_s.map(|p| p.to_string()).unwrap_or_default(),
        rel.len(),
        model.fit_loss,
        bits_dist.mean(),
        bits_dist.std(),
        rel.std(),
    );
    Ok(Cell {
        key,
        row,
        acf,
        ccdf,
        families,
    })
}

pub fn run(args: &Args, out: &Path) -> Result<()> {
    let traces = args
        .traces
        .iter()
        .map(|p| load_trace(p, &args.meta))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for &memory in &args.memory {
        for &horizon in &args.horizon {
            for &lookahead in &args.lookahead {
                let spec = match args.method {
                    MethodArg::Ols => PredictionSpec::ols(memory, horizon, lookahead),
                    MethodArg::Quantile => PredictionSpec::quantile(memory, horizon, lookahead, args.p_s),
                };
                spec.validate()?;
                cells.push(fit_cell(&traces, &spec, args.scope, args.max_lag, out)?);
            }
        }
    }
    let head = "memory,horizon,lookahead";
    write_file(out, "grid.csv", |w| {
        writeln!(w, "{head},method,p_s,rows,fit_loss,residual_mean_bits,residual_std_bits,residual_std_relative,laplace_b_relative")?;
        cells.iter().try_for_each(|c| writeln!(w, "{}", c.row))?;
        Ok(())
    })?;
    write_file(out, "residual_acf.csv", |w| {
        writeln!(w, "{head},trace,lag,value")?;
        cells.iter().flat_map(|c| &c.acf).try_for_each(|r| writeln!(w, "{r}"))?;
        Ok(())
    })?;
    write_file(out, "residual_ccdf.csv", |w| {
        writeln!(w, "{head},residual_relative,ccdf")?;
        cells
            .iter()
            .flat_map(|c| &c.ccdf)
            .try_for_each(|r| writeln!(w, "{r}"))?;
        Ok(())
    })?;
    write_file(out, "families.csv", |w| {
        writeln!(w, "{head},family,location_relative,scale_relative,log_likelihood")?;
        cells
            .iter()
            .flat_map(|c| &c.families)
            .try_for_each(|r| writeln!(w, "{r}"))?;
        Ok(())
    })?;
    if let Some(c) = cells.iter().find(|c| c.families.is_empty()) {
        eprintln!("note: residuals of cell ({}) are degenerate; no family fits", c.key);
    }
    Ok(())
}
