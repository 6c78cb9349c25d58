//! Discrete-event simulation of Sporadic Servers and PIBS on one processor,
//! with bounded replenishment lists, interrupt streams and a single LO→HI
//! mode change.

mod engine;
pub mod pibs;
pub mod queue;
pub mod scenarios;
pub mod trace;

use alloc::vec::Vec;

use crate::model::Id;
use crate::time::Time;

pub use engine::run;
pub use pibs::{pibs_budget, pibs_post, PibsState};
pub use queue::{MergePolicy, PostOutcome, ReplenishmentItem, ReplenishmentQueue};
pub use trace::{Detail, Event, EventKind, JobRecord, ModeTrigger, Segment, SimTrace};

/// An I/O request issued at the end of every job of a server: `k` bottom
/// halves of `b_lo` (or `b_hi` in HI mode) ticks each, the first `f` ticks
/// after the request and then every `i` ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IoSpec {
    pub k: u32,
    pub b_lo: Time,
    pub b_hi: Time,
    pub f: Time,
    pub i: Time,
    /// PIBS or Sporadic Server that runs the bottom halves.
    pub handler: Id,
    /// The server's next job waits until every bottom half has finished.
    pub blocking: bool,
}

/// Periodic jobs of one server, released at `offset + k·T` with deadline one
/// period later.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JobSpec {
    pub ss: Id,
    /// Execution demand of each job.
    pub busy: Time,
    pub offset: Time,
    pub io: Option<IoSpec>,
}

impl JobSpec {
    pub fn new(ss: Id, busy: Time) -> Self {
        JobSpec {
            ss,
            busy,
            offset: 0,
            io: None,
        }
    }

    pub fn with_io(mut self, io: IoSpec) -> Self {
        self.io = Some(io);
        self
    }
}

/// A single interrupt outside any job's I/O stream, e.g. a device event. Its
/// bottom half of `b` ticks is queued on `handler` on behalf of server `serving`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IrqSpec {
    pub time: Time,
    pub handler: Id,
    pub serving: Id,
    pub b: Time,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Workload {
    pub jobs: Vec<JobSpec>,
    pub irqs: Vec<IrqSpec>,
    /// Switch to HI mode at this instant if no overrun has done so earlier.
    pub mode_change_at: Option<Time>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub list_len: usize,
    pub merge_policy: MergePolicy,
    /// Ticks charged to a subject each time it is dispatched.
    pub dispatch_overhead: Time,
}

impl SimConfig {
    pub const DEFAULT_LIST_LEN: usize = 8;
    pub const FIGURE_LIST_LEN: usize = 3;
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            list_len: Self::DEFAULT_LIST_LEN,
            merge_policy: MergePolicy::MergeNext,
            dispatch_overhead: 0,
        }
    }
}
