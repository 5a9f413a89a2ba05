//! Experiment runner for tvsnet: configuration, seeded runs on the training
//! and constructive routes, sweeps, property suites and record writers.

pub mod catalog;
pub mod config;
pub mod error;
pub mod oracle;
pub mod output;
pub mod run;
pub mod sweep;
pub mod targets;
pub mod verify;

pub use config::{ExperimentConfig, RouteKind};
pub use error::HarnessError;
pub use run::{run, run_point, RunRecord, Status};
pub use sweep::{sweep, SweepOutcome, SweepSummary};
pub use verify::{verify, Suite, SuiteReport};

/// Tag written into every record.
pub fn version_tag() -> String {
    format!("tvsnet-harness/{} tvsnet/{}", env!("CARGO_PKG_VERSION"), tvsnet::VERSION)
}
