//! Asymptotic delta-vega hedging under small aversion to misspecification of a
//! recalibrated Black–Scholes model.
//!
//! The crate is `no_std` (it needs `alloc` for grids and general-dimension QPs).
//! Random number generation, parallel Monte Carlo and all IO live in the
//! companion `uvhedge` crate.

#![no_std]
// `!(x > 0.0)` is how NaN gets rejected along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod cashequiv;
pub mod controls;
mod error;
pub mod lcqp;
mod normal;
pub mod problem;
pub mod quadrature;
pub mod simulator;
mod state;
pub mod vgvv;

pub use error::{Error, Result};
pub use state::MarketState;
