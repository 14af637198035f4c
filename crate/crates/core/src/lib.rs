//! Degree-distribution design for LT-coded multicast to heterogeneous sinks.
//!
//! Sinks are grouped into clusters, each with its own erasure rate, target
//! recovery fraction and decoding capability. The [`optimizer`] builds linear
//! programs over the asymptotic recovery condition in [`analysis`] to pick a
//! single stream that serves every cluster well; [`simulator`] checks the
//! result with finite-length Monte Carlo runs.

pub mod analysis;
pub mod distributions;
pub mod error;
pub mod ext_real;
pub mod lp;
pub mod optimizer;
pub mod scenario;
pub mod simulator;

pub use distributions::{make_distribution, DegreeCapPolicy, DegreeDistribution};
pub use error::{Error, Result};
pub use optimizer::{optimize, Objective, OptimizationResult, Scheme, SchemeResult, SweepMatrix};
pub use scenario::{ClusterSpec, Scenario};
pub use simulator::{monte_carlo, LatencyStats, SimulationOptions, SimulationReport};
