//! Configuration, experiment runners and result files for `crnsim`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{load_config, parse_config, ExperimentKind, ExperimentSpec, Sweep};
pub use error::{CliError, Result};
pub use experiment::{collect_rows, run_experiment};
pub use output::{ResultRow, RowKind, COLUMNS, SCHEMA_VERSION};
