//! Experiment harness for the consensus sampling protocols: grid
//! configuration, Monte Carlo execution, metric aggregation, distribution
//! ingestion, and result emission.

pub mod config;
pub mod emit;
pub mod grid;
pub mod ingest;
pub mod scenario;

pub use config::{ExperimentGrid, ProtocolKind};
pub use grid::{aggregate_table, run_grid, CellResult, RunOutput};
