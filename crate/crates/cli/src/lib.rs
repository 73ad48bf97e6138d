//! Configuration, sweeps and the simulated experiment behind the `cvsteer`
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod pipeline;
pub mod sweep;
pub mod verify;

pub use config::{Grid, GridPoint, Overrides, RunConfig};
pub use pipeline::{run_experiment_pipeline, PipelineOutcome, PipelineRun};
pub use sweep::{run_sweep, SweepOutcome, SweepRow};
pub use verify::{verify_file, VerifyReport};
