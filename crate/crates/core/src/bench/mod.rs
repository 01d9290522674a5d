//! Config-driven experiment runner and its CSV output.

pub mod config;
pub mod pgm;
pub mod protocols;
pub mod runner;
pub mod table;

pub use config::{ExperimentConfig, ExperimentKind, SignalSpec};
pub use pgm::{load_image_pgm, GrayImage};
pub use runner::{run_experiment, CellFailure, RunReport};
pub use table::{emit_csv, ResultRow, ResultTable};
