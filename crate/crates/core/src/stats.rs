//! Descriptive statistics of frame-size series: empirical quantiles, overflow
//! rates and (rolling) autocorrelation.
//!
//! Quantiles use linear interpolation between order statistics at
//! `h = (n - 1) p` (the "type 7" convention of R and NumPy's default). The
//! autocorrelation estimator is the biased one (normalized by the lag-0 sum),
//! which keeps every coefficient inside [-1, 1].

use std::io::Write;

use crate::error::{Error, Result};
use crate::trace::FrameTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Builds the distribution; NaN samples are rejected.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter("NaN sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / self.sorted.len() as f64).sqrt()
    }

    /// Type-7 quantile.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
        }
        let n = self.sorted.len();
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        if lo + 1 >= n {
            return Ok(self.sorted[n - 1]);
        }
        let frac = h - lo as f64;
        Ok(self.sorted[lo] + frac * (self.sorted[lo + 1] - self.sorted[lo]))
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }
}

/// Type-7 quantile of an unsorted slice.
pub fn empirical_quantile(samples: &[f64], p: f64) -> Result<f64> {
    EmpiricalDistribution::new(samples.to_vec())?.quantile(p)
}

/// Distribution of the moving-average rate minus `target_rate` (bits/s).
pub fn overflow_rate(trace: &FrameTrace, window: usize, target_rate: f64) -> Result<EmpiricalDistribution> {
    let rates = trace.moving_average_rate(window)?;
    EmpiricalDistribution::new(rates.into_iter().map(|r| r - target_rate).collect())
}

/// Frame-size differences ΔF(t) = F(t) - F(t-1).
pub fn differences(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrResult {
    /// ρ(k) for k = 0..=max_lag.
    pub values: Vec<f64>,
}

impl AutocorrResult {
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    pub fn at(&self, lag: usize) -> f64 {
        self.values[lag]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lag,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    }
}

/// Biased sample autocorrelation up to `max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<AutocorrResult> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::LagTooLarge { lag: max_lag, len: n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|x| x * x).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::ConstantSeries);
    }
    let values = (0..=max_lag)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let num: f64 = centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
            num / denom
        })
        .collect();
    Ok(AutocorrResult { values })
}

/// One rolling-window position; `acf` is `None` when the window is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingWindow {
    pub start: usize,
    pub acf: Option<AutocorrResult>,
}

/// Autocorrelation over windows starting at 0, step, 2·step, …; windows that
/// would run past the end of the series are dropped.
pub fn rolling_autocorrelation(
    series: &[f64],
    window: usize,
    step: usize,
    max_lag: usize,
) -> Result<Vec<RollingWindow>> {
    if step == 0 {
        return Err(Error::InvalidParameter("step must be at least 1".into()));
    }
    if window <= max_lag {
        return Err(Error::LagTooLarge {
            lag: max_lag,
            len: window,
        });
    }
    if window > series.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: series.len(),
        });
    }
    let count = (series.len() - window) / step + 1;
    (0..count)
        .map(|i| {
            let start = i * step;
            match autocorrelation(&series[start..start + window], max_lag) {
                Ok(acf) => Ok(RollingWindow { start, acf: Some(acf) }),
                Err(Error::ConstantSeries) => Ok(RollingWindow { start, acf: None }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Long-format CSV `window_start_s,lag,value`; undefined windows are written
/// with an empty value.
pub fn write_rolling_csv<W: Write>(windows: &[RollingWindow], fps: f64, max_lag: usize, mut w: W) -> Result<()> {
    writeln!(w, "window_start_s,lag,value")?;
    for win in windows {
        let t = win.start as f64 / fps;
        for k in 0..=max_lag {
            match &win.acf {
                Some(acf) => writeln!(w, "{t},{k},{}", acf.values[k])?,
                None => writeln!(w, "{t},{k},")?,
            }
        }
    }
    Ok(())
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = EmpiricalDistribution::new(a.to_vec())?;
    let b = EmpiricalDistribution::new(b.to_vec())?;
    let (xs, ys) = (a.sorted_samples(), b.sorted_samples());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / xs.len() as f64 - j as f64 / ys.len() as f64).abs());
    }
    Ok(d)
}

/// One-sample Kolmogorov-Smirnov distance against a reference CDF.
pub fn ks_distance_to<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    let dist = EmpiricalDistribution::new(samples.to_vec())?;
    let n = dist.len() as f64;
    Ok(dist
        .sorted_samples()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}
