//! The two bottom-half handling walkthroughs: τ1 (C=8, T=16) blocks on a read
//! that raises four 1-tick interrupts, handled either by a Sporadic Server
//! τ2 (C=4, T=16) or by a PIBS with U=1/4.

use alloc::vec;

use super::{IoSpec, JobSpec, SimConfig, Workload};
use crate::model::{CritLevel, PibsSpec, SporadicServerSpec, TaskSet};
use crate::time::{Time, Util};

pub struct Scenario {
    pub name: &'static str,
    pub set: TaskSet,
    pub workload: Workload,
    pub config: SimConfig,
    pub horizon: Time,
}

pub const NAMES: [&str; 2] = ["gantt-ss-only", "gantt-ss-pibs"];

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "gantt-ss-only" => Some(gantt_ss_only()),
        "gantt-ss-pibs" => Some(gantt_ss_pibs()),
        _ => None,
    }
}

fn reader(handler: u32) -> Workload {
    let io = IoSpec {
        k: 4,
        b_lo: 1,
        b_hi: 1,
        f: 1,
        i: 2,
        handler,
        blocking: true,
    };
    Workload {
        jobs: vec![JobSpec::new(1, 8).with_io(io)],
        ..Default::default()
    }
}

fn config() -> SimConfig {
    SimConfig {
        list_len: SimConfig::FIGURE_LIST_LEN,
        ..SimConfig::default()
    }
}

pub fn gantt_ss_only() -> Scenario {
    let set = TaskSet::new(
        vec![
            SporadicServerSpec::new(1, 16, 8, CritLevel::Lo).with_priority(0),
            SporadicServerSpec::new(2, 16, 4, CritLevel::Lo).with_priority(1),
        ],
        vec![],
    );
    Scenario {
        name: "gantt-ss-only",
        set,
        workload: reader(2),
        config: config(),
        horizon: 48,
    }
}

pub fn gantt_ss_pibs() -> Scenario {
    let set = TaskSet::new(
        vec![SporadicServerSpec::new(1, 16, 8, CritLevel::Lo).with_priority(0)],
        vec![PibsSpec::new(2, Util::new(1, 4).unwrap(), CritLevel::Lo)],
    )
    .bind(2, 1);
    Scenario {
        name: "gantt-ss-pibs",
        set,
        workload: reader(2),
        config: config(),
        horizon: 48,
    }
}
