//! Downlink power allocation for stored VBR video sessions sharing one cell.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod channel;
pub mod cli;
pub mod config;
pub mod dual;
pub mod error;
pub mod rate;
pub mod simulator;
pub mod step1;
pub mod step2;
pub mod traces;

pub use error::{Error, Result};
