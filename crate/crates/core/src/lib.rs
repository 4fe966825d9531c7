//! Simulation of quantum communication downlinks from a low Earth orbit
//! satellite to a ground station.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detection;
pub mod error;
pub mod finite_key;
pub mod key_rate;
pub mod optimize;
pub mod orbit;
pub mod pass;
pub mod plot;
pub mod qkpc;
pub mod report;
pub mod scenario;
pub mod validate;

pub use error::{Error, Result};
