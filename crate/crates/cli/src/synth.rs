use std::path::Path;

use vrslice_core::trace::surrogate_trace;
use vrslice_core::Result;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Content label, stored in the sidecar.
    #[arg(long, default_value = "virus_popper")]
    content: String,
    #[arg(long, default_value_t = 30_000_000)]
    rate_bps: u64,
    #[arg(long, default_value_t = 60)]
    fps: u32,
    #[arg(long, default_value_t = 36_000)]
    frames: usize,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "trace.csv")]
    name: String,
}

pub fn run(args: &Args, seed: Option<u64>, out: &Path) -> Result<()> {
    let trace = surrogate_trace(&args.content, args.rate_bps, args.fps, args.frames, seed.unwrap_or(1))?;
    let path = out.join(&args.name);
    trace.save_with_sidecar(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
