//! Configuration-driven driver for solves, convergence studies and matrix
//! export. See the README for the configuration schema.

pub mod config;
pub mod run;

pub use config::{parse, Diagnostic, RunConfig};
pub use run::{cmd_assemble, cmd_convergence, cmd_solve, CliError, Problem, OUTPUT_DIR_ENV};
