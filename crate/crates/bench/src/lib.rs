//! Shared fixtures for the benchmarks.

use vrslice_core::predictor::{build_design, Design};
use vrslice_core::trace::surrogate_trace;
use vrslice_core::PredictionSpec;

/// Regression problem with `rows` rows from a surrogate 30 Mb/s trace.
pub fn surrogate_design(rows: usize, memory: usize) -> Design {
    let trace = surrogate_trace("virus_popper", 30_000_000, 60, rows + memory + 1, 1).expect("surrogate trace");
    build_design(&trace.normalize(), &PredictionSpec::ols(memory, 1, 1)).expect("design")
}

/// Six users with spread-out Laplace scales, as seen by an aggregate slice.
pub fn heterogeneous_scales() -> Vec<(f64, f64)> {
    vec![(0.1, 0.8), (0.2, 1.1), (0.0, 1.6), (0.3, 2.3), (0.1, 3.0), (0.2, 4.2)]
}
