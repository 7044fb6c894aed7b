//! Simulation and numerical analysis of a two-layer random walk: a biased
//! walk on the integer lattice lays down a trace graph, and a second
//! biased walk moves on that trace. The first layer's drift and the second
//! layer's conductance tilt compete; depending on who wins, the second
//! walk is recurrent, ballistic, or creeps sub-ballistically through
//! trap-shaped pieces of trace.
//!
//! - [`walk`]: step distributions, trajectories, seeded sampling
//! - [`trace`]: the trace graph (lazy generation, cut points, dumps)
//! - [`analysis`]: closed-form machinery -- conductance direction, the
//!   tilt equation and its root, the Doob transform, regime classification
//! - [`nested`]: driving the second-layer walk on a lazily grown trace
//! - [`experiments`]: the Monte Carlo estimators built on all of the above
//! - [`stats`]: small numerical helpers (means, medians, weighted fits)
//! - [`report`]: the JSON report envelope used by the command-line tools

pub mod analysis;
pub mod experiments;
pub mod nested;
pub mod report;
pub mod stats;
pub mod trace;
pub mod walk;

pub use analysis::{classify, AnalyticProfile, Regime};
pub use nested::{estimate_velocity, run_nested_walk, DEFAULT_VERTEX_BUDGET};
pub use trace::TraceGraph;
pub use walk::{Layer, Point, RandomSeed, StepDistribution, Trajectory};
