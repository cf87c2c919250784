//! Experiment harness for the MPCC solvers: seeded runs of the augmented
//! Lagrangian method, the semismooth Newton method or the warm-start pipeline
//! on the inverse optimal control benchmark, with CSV/Markdown table output.

pub mod config;
pub mod run;
pub mod table;

pub use config::{Algorithm, ExperimentConfig, InstanceSource, TableFormat};
pub use run::{load_problem, make_start, run_experiment, run_on, AlmColumns, NewtonColumns, ResultRow, RunStatus};
pub use table::emit_table;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mpcc_core::MpccError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
