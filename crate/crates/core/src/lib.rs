//! Right-of-way decision making at uncontrolled four-way intersections.
//!
//! The crate models the intersection as a POMDP and ships everything needed
//! to benchmark decision policies on it:
//!
//! - [`domain`]: vocabulary types and the path-conflict geometry.
//! - [`scenario`]: seeded scenario and suite generation.
//! - [`sim`]: ground-truth dynamics, observation model, rewards and the
//!   rules-of-the-road oracle.
//! - [`belief`]: particle-filter belief tracking.
//! - [`planners`]: the FSM baseline plus QMDP, POMCP and DESPOT.
//! - [`harness`]: episode runner, metrics and report exports.
//! - [`cli`]: the `rowbench` command-line front end.

pub mod belief;
pub mod cli;
pub mod domain;
pub mod error;
pub mod harness;
pub mod planners;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
