//! Monte Carlo ensembles, configuration, reports and the command-line front
//! end for `uvhedge-core`.

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod mc;
pub mod report;
pub mod selftest;

pub use error::{Error, Result};
