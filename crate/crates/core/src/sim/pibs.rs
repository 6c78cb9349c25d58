//! PIBS budget state: one replenishment, budget `⌊U·T_s⌋` for whichever
//! server it currently serves.

use crate::model::{CritLevel, Id, PibsSpec};
use crate::time::{Time, Util};

/// Time of the single replenishment after running `consumed` ticks from
/// `start`: `start + ⌈consumed / U⌉`.
pub fn pibs_post(start: Time, consumed: Time, util: Util) -> Time {
    start + util.ceil_div_time(consumed)
}

/// Budget of a PIBS with utilization `util` serving a server of period `period`.
pub fn pibs_budget(util: Util, period: Time) -> Time {
    util.floor_mul(period)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PibsState {
    pub id: Id,
    pub criticality: CritLevel,
    pub util_lo: Util,
    pub util_hi: Option<Util>,
    /// Utilization in the current mode; `None` once dropped in HI mode.
    pub util: Option<Util>,
    /// Ineligible until this time.
    pub replenish_at: Option<Time>,
    /// Server whose priority and period are inherited by the current run.
    pub serving: Option<Id>,
    /// First execution tick of the current run.
    pub run_start: Option<Time>,
    pub consumed: Time,
}

impl PibsState {
    pub fn new(spec: &PibsSpec) -> Self {
        PibsState {
            id: spec.id,
            criticality: spec.criticality,
            util_lo: spec.util_lo,
            util_hi: spec.util(CritLevel::Hi),
            util: Some(spec.util_lo),
            replenish_at: None,
            serving: None,
            run_start: None,
            consumed: 0,
        }
    }

    pub fn eligible(&self, now: Time) -> bool {
        self.util.is_some() && self.replenish_at.is_none_or(|t| t <= now)
    }

    pub fn budget(&self, period: Time) -> Time {
        self.util.map_or(0, |u| pibs_budget(u, period))
    }

    pub fn remaining(&self, period: Time) -> Time {
        self.budget(period).saturating_sub(self.consumed)
    }

    /// Close the current run. Returns the replenishment time if anything was
    /// consumed; the PIBS stays ineligible until then.
    pub fn post(&mut self) -> Option<Time> {
        let start = self.run_start.take();
        let consumed = core::mem::take(&mut self.consumed);
        self.serving = None;
        match (start, self.util) {
            (Some(start), Some(u)) if consumed > 0 => {
                let at = pibs_post(start, consumed, u);
                self.replenish_at = Some(at);
                Some(at)
            }
            _ => None,
        }
    }

    /// Mode change: full HI budget from now, or dropped if there is no HI utilization.
    pub fn enter_hi(&mut self) {
        self.util = self.util_hi;
        self.replenish_at = None;
        self.run_start = None;
        self.consumed = 0;
        if self.util.is_none() {
            self.serving = None;
        }
    }
}
