//! Experiment orchestration: configuration, runs, trajectories, manifests,
//! solver comparisons and rate fits.

pub mod compare;
pub mod config;
pub mod manifest;
pub mod rate;
pub mod run;
pub mod trajectory;

pub use compare::{compare_solvers, Comparison, ComparisonRow};
pub use config::{ExperimentConfig, ProblemKind, ScheduleKind, SolverKind};
pub use manifest::{RunManifest, Summary};
pub use rate::{fit_rate, rate_sweep, RatePoint, RateReport};
pub use run::{execute, generator_seed, run_experiment, Estimate, RunOutcome};
pub use trajectory::{checkpoint_indices, Trajectory};
