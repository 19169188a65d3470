//! Approximation algorithms for multi-stage stochastic covering integer
//! programs and two-stage stochastic uncapacitated facility location, with
//! the linear-programming machinery, exact oracles and Monte Carlo harness
//! used to check their guarantees on small instances.

#![allow(clippy::needless_range_loop)]

pub mod cip_rounding;
pub mod error;
pub mod harness;
pub mod instances;
pub mod jms;
pub mod lp;
pub mod sufl;

pub use error::{Error, Result};
