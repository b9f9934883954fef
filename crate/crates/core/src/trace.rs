//! Frame-size traces: metadata, CSV ingestion, normalization and a seeded
//! synthetic generator.
//!
//! The canonical on-disk format is a CSV file with the header
//! `frame_index,timestamp_s,size_bytes`, consecutive frame indices, timestamps
//! with six decimals and sizes as non-negative integers. Metadata lives in a
//! JSON sidecar next to the CSV (`trace.csv` -> `trace.json`).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Autoregressive coefficients of the synthetic surrogate trace. They are the
/// order-6 Yule-Walker solution for a measured 30 Mb/s, 60 fps frame-size
/// autocorrelation, so the surrogate reproduces its short-term structure
/// (lag-1 autocorrelation of the frame-size difference close to -0.39).
pub const SURROGATE_AR: [f64; 6] = [
    0.354_006_74,
    0.135_282_74,
    -0.005_912_99,
    0.064_396_29,
    0.123_829_2,
    0.092_619_35,
];

/// Laplace innovation scale of the surrogate, relative to the expected frame
/// size R/φ.
pub const SURROGATE_RELATIVE_NOISE: f64 = 0.104;

const BURN_IN: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Measured,
    Synthetic,
}

/// Trace metadata; serialized as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    #[serde(rename = "content")]
    pub content_name: String,
    /// Nominal bit rate R in bits per second.
    pub rate_bps: u64,
    /// Frame rate φ in frames per second.
    pub fps: u32,
    pub source: Source,
}

impl TraceMeta {
    pub fn new(content: impl Into<String>, rate_bps: u64, fps: u32, source: Source) -> Result<Self> {
        let meta = Self {
            content_name: content.into(),
            rate_bps,
            fps,
            source,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_bps == 0 {
            return Err(Error::InvalidMeta("rate_bps must be positive".into()));
        }
        if self.fps == 0 {
            return Err(Error::InvalidMeta("fps must be positive".into()));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.rate_bps as f64
    }

    pub fn phi(&self) -> f64 {
        self.fps as f64
    }

    /// Expected frame size R/φ in bits.
    pub fn expected_frame_bits(&self) -> f64 {
        self.rate() / self.phi()
    }

    /// Expected frame size R/φ in bytes.
    pub fn expected_frame_bytes(&self) -> f64 {
        self.rate() / (8.0 * self.phi())
    }

    pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        File::open(path.as_ref())?.read_to_string(&mut text)?;
        let meta: TraceMeta = serde_json::from_str(&text)?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn save_sidecar(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

/// Path of the metadata sidecar belonging to a trace CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// A sequence of encoded frame sizes F(t), in bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    meta: TraceMeta,
    sizes: Vec<u64>,
    timestamps: Option<Vec<f64>>,
    first_index: u64,
}

impl FrameTrace {
    pub fn new(meta: TraceMeta, sizes: Vec<u64>) -> Result<Self> {
        meta.validate()?;
        if sizes.is_empty() {
            return Err(Error::EmptyTrace);
        }
        Ok(Self {
            meta,
            sizes,
            timestamps: None,
            first_index: 1,
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.sizes.len() {
            return Err(Error::InvalidTrace(format!(
                "{} timestamps for {} frames",
                timestamps.len(),
                self.sizes.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTrace("timestamps must be strictly increasing".into()));
        }
        if timestamps.len() > 1 {
            let span = timestamps[timestamps.len() - 1] - timestamps[0];
            let mean_gap = span / (timestamps.len() - 1) as f64;
            let nominal = 1.0 / self.meta.phi();
            if (mean_gap - nominal).abs() > 0.05 * nominal {
                return Err(Error::InvalidTrace(format!(
                    "mean inter-arrival {mean_gap:.6} s differs from 1/fps = {nominal:.6} s by more than 5%"
                )));
            }
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Recorded timestamps, if the trace carried any.
    pub fn recorded_timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    /// Timestamp of frame `i` (0-based); synthesized as i/φ when absent.
    pub fn timestamp(&self, i: usize) -> f64 {
        match &self.timestamps {
            Some(ts) => ts[i],
            None => i as f64 / self.meta.phi(),
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.sizes.iter().sum()
    }

    /// Mean video rate over the whole trace in bits per second.
    pub fn mean_rate(&self) -> f64 {
        8.0 * self.meta.phi() * self.total_bytes() as f64 / self.len() as f64
    }

    pub fn mean_frame_bytes(&self) -> f64 {
        self.total_bytes() as f64 / self.len() as f64
    }

    /// Same sizes scaled by `factor` (rounded to whole bytes) with a new
    /// nominal rate. Used to derive rate variants of one content.
    pub fn rescaled(&self, factor: f64, rate_bps: u64) -> Result<Self> {
        let meta = TraceMeta {
            rate_bps,
            ..self.meta.clone()
        };
        let sizes = self
            .sizes
            .iter()
            .map(|&s| (s as f64 * factor).round().max(0.0) as u64)
            .collect();
        FrameTrace::new(meta, sizes)
    }

    /// Loads a trace CSV. Rows with negative or non-integer sizes, gaps in the
    /// frame index, or unparsable timestamps are rejected with their line
    /// number. Blank timestamp fields on every row mean "no timestamps".
    pub fn load(path: impl AsRef<Path>, meta: TraceMeta) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::from_reader(file, meta, path)
    }

    pub fn from_reader<R: Read>(reader: R, meta: TraceMeta, origin: &Path) -> Result<Self> {
        meta.validate()?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let malformed = |line: usize, reason: String| Error::MalformedRow {
            path: origin.to_path_buf(),
            line,
            reason,
        };
        let headers = rdr.headers()?.clone();
        let expected = ["frame_index", "timestamp_s", "size_bytes"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(malformed(1, format!("expected header {}", expected.join(","))));
        }

        let mut sizes = Vec::new();
        let mut stamps: Vec<Option<f64>> = Vec::new();
        let mut first_index = None;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() != 3 {
                return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
            }
            let index: u64 = record[0]
                .parse()
                .map_err(|_| malformed(line, format!("bad frame index {:?}", &record[0])))?;
            match first_index {
                None => first_index = Some(index),
                Some(first) if index != first + sizes.len() as u64 => {
                    return Err(malformed(line, format!("frame index {index} is not consecutive")));
                }
                Some(_) => {}
            }
            let stamp = if record[1].is_empty() {
                None
            } else {
                Some(
                    record[1]
                        .parse::<f64>()
                        .ok()
                        .filter(|t| t.is_finite())
                        .ok_or_else(|| malformed(line, format!("bad timestamp {:?}", &record[1])))?,
                )
            };
            let size = &record[2];
            if size.starts_with('-') {
                return Err(malformed(line, format!("negative frame size {size}")));
            }
            let size: u64 = size
                .parse()
                .map_err(|_| malformed(line, format!("bad frame size {size:?}")))?;
            sizes.push(size);
            stamps.push(stamp);
        }
        if sizes.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mut trace = FrameTrace::new(meta, sizes)?;
        trace.first_index = first_index.unwrap_or(1);
        if stamps.iter().all(Option::is_some) {
            let ts = stamps.into_iter().map(Option::unwrap).collect();
            trace = trace.with_timestamps(ts)?;
        } else if stamps.iter().any(Option::is_some) {
            return Err(Error::InvalidTrace(
                "timestamps must be given on every row or none".into(),
            ));
        }
        Ok(trace)
    }

    /// Writes the canonical CSV form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "frame_index,timestamp_s,size_bytes")?;
        for (i, size) in self.sizes.iter().enumerate() {
            writeln!(w, "{},{:.6},{}", self.first_index + i as u64, self.timestamp(i), size)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Saves the CSV and its metadata sidecar.
    pub fn save_with_sidecar(&self, path: impl AsRef<Path>) -> Result<()> {
        self.save(path.as_ref())?;
        self.meta.save_sidecar(sidecar_path(path.as_ref()))
    }

    /// Loads a CSV whose metadata sits in the adjacent `.json` sidecar.
    pub fn load_with_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        let meta = TraceMeta::load_sidecar(sidecar_path(path.as_ref()))?;
        Self::load(path, meta)
    }

    /// Frame sizes divided by the expected frame size R/φ.
    pub fn normalize(&self) -> NormalizedTrace {
        let unit = self.meta.expected_frame_bytes();
        NormalizedTrace {
            meta: self.meta.clone(),
            values: self.sizes.iter().map(|&s| s as f64 / unit).collect(),
        }
    }

    /// Rectangular moving-average rate in bits per second: element `k` is
    /// `(8 φ / S) Σ F(i)` over frames `k..k+S`.
    pub fn moving_average_rate(&self, window: usize) -> Result<Vec<f64>> {
        if window == 0 || window > self.len() {
            return Err(Error::WindowTooLarge {
                window,
                len: self.len(),
            });
        }
        let scale = 8.0 * self.meta.phi();
        let mut sum: u64 = self.sizes[..window].iter().sum();
        let mut out = Vec::with_capacity(self.len() - window + 1);
        out.push(scale * sum as f64 / window as f64);
        for k in window..self.len() {
            sum = sum + self.sizes[k] - self.sizes[k - window];
            out.push(scale * sum as f64 / window as f64);
        }
        Ok(out)
    }
}

/// Dimensionless frame sizes F(t)·φ/R.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTrace {
    pub meta: TraceMeta,
    pub values: Vec<f64>,
}

impl NormalizedTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Back to bytes (not rounded).
    pub fn denormalize(&self) -> Vec<f64> {
        let unit = self.meta.expected_frame_bytes();
        self.values.iter().map(|v| v * unit).collect()
    }
}

/// Checks AR stability with the step-down (reverse Levinson) recursion: the
/// process is stable iff every reflection coefficient has magnitude < 1.
pub fn check_ar_stability(coeffs: &[f64]) -> Result<()> {
    let mut a: Vec<f64> = coeffs.to_vec();
    while let Some(&k) = a.last() {
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(Error::UnstableProcess(k));
        }
        let p = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1).map(|i| (a[i] + k * a[p - 2 - i]) / denom).collect();
        a = next;
    }
    Ok(())
}

/// Generates an AR(p) frame-size trace with Laplace innovations around the
/// expected frame size R/φ. Sizes are rounded to whole bytes and clamped at
/// zero; the clamp biases the mean upward only when the noise reaches the
/// mean, which does not happen at realistic scales.
pub fn synthesize_trace(
    meta: TraceMeta,
    length: usize,
    ar_coeffs: &[f64],
    noise_scale_b: f64,
    seed: u64,
) -> Result<FrameTrace> {
    meta.validate()?;
    if length == 0 {
        return Err(Error::EmptyTrace);
    }
    if !(noise_scale_b >= 0.0 && noise_scale_b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise scale must be non-negative, got {noise_scale_b}"
        )));
    }
    check_ar_stability(ar_coeffs)?;
    let mean = meta.expected_frame_bytes();
    let p = ar_coeffs.len();
    let mut rng = rng::stream(seed, 0);
    let mut history = vec![0.0_f64; p];
    let mut sizes = Vec::with_capacity(length);
    for step in 0..BURN_IN + length {
        let innovation = if noise_scale_b > 0.0 {
            rng::laplace(&mut rng, 0.0, noise_scale_b)
        } else {
            0.0
        };
        // history[0] is the most recent deviation.
        let dev = ar_coeffs.iter().zip(&history).map(|(a, h)| a * h).sum::<f64>() + innovation;
        if p > 0 {
            history.rotate_right(1);
            history[0] = dev;
        }
        if step >= BURN_IN {
            sizes.push((mean + dev).round().max(0.0) as u64);
        }
    }
    let mut meta = meta;
    meta.source = Source::Synthetic;
    FrameTrace::new(meta, sizes)
}

/// The surrogate used when measured traces are unavailable.
pub fn surrogate_trace(content: &str, rate_bps: u64, fps: u32, length: usize, seed: u64) -> Result<FrameTrace> {
    surrogate_trace_with_noise(content, rate_bps, fps, length, SURROGATE_RELATIVE_NOISE, seed)
}

pub fn surrogate_trace_with_noise(
    content: &str,
    rate_bps: u64,
    fps: u32,
    length: usize,
    relative_noise: f64,
    seed: u64,
) -> Result<FrameTrace> {
    let meta = TraceMeta::new(content, rate_bps, fps, Source::Synthetic)?;
    let b = relative_noise * meta.expected_frame_bytes();
    synthesize_trace(meta, length, &SURROGATE_AR, b, seed)
}
