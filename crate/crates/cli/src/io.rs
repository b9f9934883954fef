//! Shared input and output helpers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args as ClapArgs;
use vrslice_core::trace::{sidecar_path, FrameTrace, Source, TraceMeta};
use vrslice_core::{Error, Result};

/// Metadata for traces without a JSON sidecar.
#[derive(Debug, Clone, ClapArgs)]
pub struct MetaArgs {
    /// Nominal encoder rate in b/s (required when the trace has no sidecar).
    #[arg(long)]
    pub rate_bps: Option<u64>,
    /// Frame rate when the trace has no sidecar.
    #[arg(long, default_value_t = 60)]
    pub fps: u32,
    /// Content label when the trace has no sidecar; defaults to the file stem.
    #[arg(long)]
    pub content: Option<String>,
}

/// Loads a trace, preferring its sidecar over the command-line metadata.
pub fn load_trace(path: &Path, meta: &MetaArgs) -> Result<FrameTrace> {
    if sidecar_path(path).exists() {
        return FrameTrace::load_with_sidecar(path);
    }
    let rate = meta
        .rate_bps
        .ok_or_else(|| Error::InvalidMeta(format!("{} has no metadata sidecar; pass --rate-bps", path.display())))?;
    let content = meta.content.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trace".into())
    });
    FrameTrace::load(path, TraceMeta::new(content, rate, meta.fps, Source::Measured)?)
}

/// Creates `dir/name` and hands a buffered writer to `body`.
pub fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(path)
}

pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}
