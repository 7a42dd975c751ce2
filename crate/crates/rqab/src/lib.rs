//! Steady-state performance approximations for single-server queues with
//! customer abandonment.
//!
//! The library computes the mean virtual waiting time, abandonment
//! probability, and mean queue length of `GI/GI/1+GI` queues through robust
//! optimization fixed points driven by the arrival process's index of
//! dispersion, and cross-checks them against exact `M/M/1+GI` formulas,
//! closed-form heavy-traffic approximations, and discrete-event simulation.

pub mod benchmarks;
pub mod dist;
pub mod error;
pub mod model;
pub mod num;
pub mod renewal;
pub mod rq;
pub mod sim;
pub mod tandem;
#[cfg(test)]
pub(crate) mod testutil;
pub mod wck;

pub use error::{Error, Result};
