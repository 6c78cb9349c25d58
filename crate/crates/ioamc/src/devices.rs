//! Two small device-driver task sets in 100 µs ticks: a HI application whose
//! camera bottom halves go through either a PIBS or a Sporadic Server, and a
//! two-camera set where each camera has the criticality of its application.

use ioamc_core::sim::{IrqSpec, JobSpec, SimConfig, Workload};
use ioamc_core::taskgen::pibs_to_ss;
use ioamc_core::{CritLevel, Id, PibsSpec, SporadicServerSpec, TaskSet, Time, Util};

pub const TICKS_PER_MS: Time = 10;
const PERIOD: Time = 100 * TICKS_PER_MS;

pub const APP_HI: Id = 1;
pub const APP_LO: Id = 2;
pub const CAMERA: Id = 3;
pub const CAMERA_LO: Id = 4;

fn ms(x: Time) -> Time {
    x * TICKS_PER_MS
}

fn pct(n: u64, d: u64) -> Util {
    Util::new(n, d * 100).unwrap()
}

/// HI application (23/40 ms), LO application (10/1 ms), and a HI camera
/// PIBS (1%/2%) serving the HI application, all with 100 ms periods.
pub fn camera_set() -> TaskSet {
    TaskSet::new(
        vec![
            SporadicServerSpec::new(APP_HI, PERIOD, ms(23), CritLevel::Hi)
                .with_hi(ms(40))
                .with_priority(0),
            SporadicServerSpec::new(APP_LO, PERIOD, ms(10), CritLevel::Lo)
                .with_hi(ms(1))
                .with_priority(1),
        ],
        vec![PibsSpec::new(CAMERA, pct(1, 1), CritLevel::Hi).with_hi(pct(2, 1))],
    )
    .bind(CAMERA, APP_HI)
}

/// The same set with the camera handled by a 1/2 ms Sporadic Server placed
/// just below the HI application.
pub fn camera_set_ss_only() -> TaskSet {
    pibs_to_ss(&camera_set()).expect("camera set converts")
}

/// HI application (25/40 ms), LO application (25/24 ms), a HI camera
/// (0.1%/1%) serving the first and a LO camera (1%/0.1%) serving the second.
pub fn two_camera_set() -> TaskSet {
    TaskSet::new(
        vec![
            SporadicServerSpec::new(APP_HI, PERIOD, ms(25), CritLevel::Hi)
                .with_hi(ms(40))
                .with_priority(0),
            SporadicServerSpec::new(APP_LO, PERIOD, ms(25), CritLevel::Lo)
                .with_hi(ms(24))
                .with_priority(1),
        ],
        vec![
            PibsSpec::new(CAMERA, pct(1, 10), CritLevel::Hi).with_hi(pct(1, 1)),
            PibsSpec::new(CAMERA_LO, pct(1, 1), CritLevel::Lo).with_hi(pct(1, 10)),
        ],
    )
    .bind(CAMERA, APP_HI)
    .bind(CAMERA_LO, APP_LO)
}

/// Applications that use their whole LO budget, the HI one its HI budget
/// (so it overruns in its first period), and cameras that deliver a 0.2 ms
/// frame every `frame_gap` ticks, more than any camera budget covers.
pub fn saturating_workload(set: &TaskSet, frame_gap: Time, horizon: Time) -> Workload {
    let jobs = [APP_HI, APP_LO]
        .iter()
        .map(|&id| {
            let s = set.server(id).expect("application server");
            let busy = if s.criticality == CritLevel::Hi {
                s.capacity(CritLevel::Hi)
            } else {
                s.capacity_lo
            };
            JobSpec::new(id, busy)
        })
        .collect();
    let mut irqs = Vec::new();
    for (&camera, &app) in &set.bindings {
        let mut t = 1;
        while t < horizon {
            irqs.push(IrqSpec {
                time: t,
                handler: camera,
                serving: app,
                b: 2,
            });
            t += frame_gap;
        }
    }
    irqs.sort_by_key(|r| (r.time, r.handler));
    Workload {
        jobs,
        irqs,
        mode_change_at: None,
    }
}

/// The HI application reads `frames` frames each job; bottom halves arrive
/// every 2 ms and take 0.1 ms. Used to compare dispatch counts of the two
/// camera configurations.
pub fn camera_read_workload(frames: u32) -> Workload {
    let io = ioamc_core::sim::IoSpec {
        k: frames,
        b_lo: 1,
        b_hi: 1,
        f: ms(1),
        i: ms(2),
        handler: CAMERA,
        blocking: false,
    };
    Workload {
        jobs: vec![
            JobSpec::new(APP_HI, ms(20)).with_io(io),
            JobSpec::new(APP_LO, ms(8)),
        ],
        irqs: Vec::new(),
        mode_change_at: None,
    }
}

pub fn config(dispatch_overhead: Time) -> SimConfig {
    SimConfig {
        dispatch_overhead,
        ..SimConfig::default()
    }
}

pub const HORIZON: Time = 20 * PERIOD;
