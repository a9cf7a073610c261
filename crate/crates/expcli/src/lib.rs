//! Experiment orchestration for the `onebit` tool: Monte Carlo sweeps,
//! record persistence, the matrix text format and the command-line surface.

pub mod cli;
pub mod matrix_io;
pub mod persist;
pub mod record;
pub mod sweep;

pub use record::{ExperimentRecord, OutcomeCounts, RecordParams, TOOL_VERSION};
