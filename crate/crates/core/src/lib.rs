//! Schedulability analysis, simulation and task generation for Sporadic
//! Servers and Priority-Inheritance Bandwidth-preserving Servers (PIBS) on a
//! fixed-priority uniprocessor, including the mixed-criticality IO-AMC tests.
//!
//! All time values are integer ticks; utilizations and interference bounds
//! are exact rationals.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod amc;
pub mod error;
pub mod model;
pub mod rta;
pub mod sim;
pub mod taskgen;
pub mod time;

pub use error::ModelError;
pub use model::{CritLevel, Id, PibsSpec, SporadicServerSpec, TaskSet};
pub use time::{Rational, Time, Util};
