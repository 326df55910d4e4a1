//! Monte Carlo harness, configuration, file output and CLI for the
//! jump-adapted adaptive Milstein method of [`jaam_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod output;

pub use config::{ExperimentConfig, Mode, Scheme};
pub use error::HarnessError;
