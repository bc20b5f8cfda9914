//! Configuration, command dispatch and file output for `memwave`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_convergence, cmd_extract, cmd_frames, cmd_simulate, cmd_smatrix, cmd_validate, run_campaign, Outcome, RunDir,
};
pub use config::{parse_config, parse_config_str, Campaign, RunConfig};
pub use error::{CliError, Result};
