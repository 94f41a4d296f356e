//! Experiment specs, grid execution and result output for the `detinfo`
//! simulations, plus the `detinfo` command-line front end.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod output;
pub mod run;
pub mod spec;

pub use cli::cli_main;
pub use error::{HarnessError, Result};
pub use output::{schema, Cell, ResultRow, ResultTable};
pub use run::{compute, run_experiment, RunOptions};
pub use spec::{ExperimentKind, ExperimentSpec, OutputFormat, Sweep};
