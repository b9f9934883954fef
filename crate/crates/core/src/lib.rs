//! Frame-size modeling and predictive network slicing for quasi-CBR VR
//! traffic.
//!
//! The crate covers the whole pipeline: trace ingestion and descriptive
//! statistics ([`trace`], [`stats`]), linear frame-size prediction
//! ([`predictor`]), Laplace residual modeling and the distribution of the
//! aggregate bandwidth demand of several users ([`laplace`]), the four
//! slicing policies ([`slicing`]), a frame-synchronous simulator
//! ([`sim`]) and Pareto analysis of the resulting trade-offs ([`pareto`]).

// `!(x > 0.0)` style checks are deliberate: they reject NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod laplace;
pub mod pareto;
pub mod predictor;
pub mod rng;
pub mod scenarios;
pub mod sim;
pub mod slicing;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use laplace::{LaplaceMixture, LaplaceParams, LaplacePredictor, ScaleModel};
pub use pareto::{pareto_frontier, ParetoPoint};
pub use predictor::{LinearModel, Method, PredictionSpec, Scope};
pub use sim::{KpiRecord, KpiSummary, Scenario, SimOutput};
pub use slicing::{LatencyBudget, Scheme, SliceDecision, SlicePredictor, UserLink};
pub use stats::{AutocorrResult, EmpiricalDistribution};
pub use trace::{FrameTrace, NormalizedTrace, Source, TraceMeta};
