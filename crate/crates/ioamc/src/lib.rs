//! Companion to `ioamc-core`: JSON task-set and workload formats, trace
//! export, and the experiment harness behind the `ioamc` command.

pub mod devices;
pub mod format;
pub mod harness;
pub mod trace;
