use ioamc_core::rta::{pibs_window_bound, ss_rta};
use ioamc_core::sim::{run, EventKind, IoSpec, IrqSpec, JobSpec, SimConfig, Workload};
use ioamc_core::time::ceil_ratio;
use ioamc_core::{CritLevel, PibsSpec, SporadicServerSpec, TaskSet, Time, Util};
use proptest::prelude::*;

fn lcm_all(periods: &[Time]) -> Time {
    periods.iter().fold(1, |acc, &p| num_integer::lcm(acc, p))
}

/// A PIBS bound to a low-priority server, with a higher-priority server
/// interfering and a burst of external interrupts.
fn pibs_setup(
    c: u64,
    period: Time,
    hp: (Time, Time),
    irqs: &[(Time, Time)],
) -> (TaskSet, Workload) {
    let set = TaskSet::new(
        vec![
            SporadicServerSpec::new(1, hp.1, hp.0, CritLevel::Lo).with_priority(0),
            SporadicServerSpec::new(2, period, 1, CritLevel::Lo).with_priority(1),
        ],
        vec![PibsSpec::new(
            3,
            Util::new(c, period).unwrap(),
            CritLevel::Lo,
        )],
    )
    .bind(3, 2);
    let workload = Workload {
        jobs: vec![JobSpec::new(1, hp.0)],
        irqs: irqs
            .iter()
            .map(|&(time, b)| IrqSpec {
                time,
                handler: 3,
                serving: 2,
                b,
            })
            .collect(),
        ..Default::default()
    };
    (set, workload)
}

#[test]
fn pibs_worst_case_phasing_reaches_the_bound() {
    for (c, period) in [(1, 4), (4, 16), (3, 10), (5, 12), (7, 20), (2, 9)] {
        let u = Util::new(c, period).unwrap();
        let c2 = u.floor_mul(period);
        let c1 = u.floor_mul(period - c2);
        let set = TaskSet::new(
            vec![SporadicServerSpec::new(2, period, 1, CritLevel::Lo)],
            vec![PibsSpec::new(3, u, CritLevel::Lo)],
        );
        let irqs = [(0, c1), (period - c2, c2)];
        let workload = Workload {
            irqs: irqs
                .iter()
                .filter(|r| r.1 > 0)
                .map(|&(time, b)| IrqSpec {
                    time,
                    handler: 3,
                    serving: 2,
                    b,
                })
                .collect(),
            ..Default::default()
        };
        let t = run(&set, &workload, 2 * period, SimConfig::default()).unwrap();
        let bound = ceil_ratio(&pibs_window_bound(period, u));
        let got = t.max_window_execution(3, Some(2), period);
        assert!(
            got <= bound && got + 1 >= bound,
            "U={c}/{period}: {got} vs {bound}"
        );
    }
}

#[test]
fn rejects_malformed_workloads() {
    let set = TaskSet::new(
        vec![SporadicServerSpec::new(1, 10, 2, CritLevel::Lo)],
        vec![],
    );
    let bad = |jobs: Vec<JobSpec>| {
        run(
            &set,
            &Workload {
                jobs,
                ..Default::default()
            },
            10,
            SimConfig::default(),
        )
    };
    assert!(bad(vec![JobSpec::new(9, 1)]).is_err());
    assert!(bad(vec![JobSpec::new(1, 0)]).is_err());
    assert!(bad(vec![JobSpec::new(1, 1), JobSpec::new(1, 1)]).is_err());
    let io = IoSpec {
        k: 2,
        b_lo: 2,
        b_hi: 2,
        f: 0,
        i: 2,
        handler: 1,
        blocking: false,
    };
    assert!(bad(vec![JobSpec::new(1, 1).with_io(io)]).is_err());
}

#[test]
fn forced_mode_change_suspends_lo_servers() {
    let set = TaskSet::new(
        vec![
            SporadicServerSpec::new(1, 10, 2, CritLevel::Hi)
                .with_hi(5)
                .with_priority(0),
            SporadicServerSpec::new(2, 10, 4, CritLevel::Lo).with_priority(1),
        ],
        vec![],
    );
    let workload = Workload {
        jobs: vec![JobSpec::new(1, 5), JobSpec::new(2, 4)],
        mode_change_at: Some(1),
        ..Default::default()
    };
    let t = run(&set, &workload, 40, SimConfig::default()).unwrap();
    t.check_well_formed().unwrap();
    assert_eq!(t.mode_change_at, Some(1));
    assert_eq!(t.hi_misses(), 0);
    // the HI server gets C(HI) per period after the switch; the LO server stops
    assert_eq!(
        t.of_kind(EventKind::Release)
            .filter(|e| e.subject == Some(2))
            .count(),
        1
    );
    assert_eq!(t.executed(1, None, 10, 20), 5);
}

#[test]
fn hi_overrun_triggers_the_switch() {
    let set = TaskSet::new(
        vec![SporadicServerSpec::new(1, 10, 2, CritLevel::Hi).with_hi(5)],
        vec![],
    );
    let workload = Workload {
        jobs: vec![JobSpec::new(1, 5)],
        ..Default::default()
    };
    let t = run(&set, &workload, 30, SimConfig::default()).unwrap();
    assert_eq!(t.mode_change_at, Some(2));
    assert_eq!(t.jobs[0].finish, Some(5));
    assert_eq!(t.hi_misses(), 0);
}

#[test]
fn dispatch_overhead_is_charged() {
    let set = TaskSet::new(
        vec![SporadicServerSpec::new(1, 10, 4, CritLevel::Lo)],
        vec![],
    );
    let workload = Workload {
        jobs: vec![JobSpec::new(1, 3)],
        ..Default::default()
    };
    let config = SimConfig {
        dispatch_overhead: 1,
        ..SimConfig::default()
    };
    let t = run(&set, &workload, 10, config).unwrap();
    assert_eq!(t.jobs[0].finish, Some(4));
    let t = run(
        &set,
        &Workload {
            jobs: vec![JobSpec::new(1, 4)],
            ..Default::default()
        },
        10,
        config,
    )
    .unwrap();
    assert_eq!(t.jobs[0].finish, None);
    assert!(t.jobs[0].missed);
}

fn ss_only_set() -> impl Strategy<Value = TaskSet> {
    prop::collection::vec(
        (prop::sample::select(vec![4u64, 6, 8, 12, 16]), 1u64..=8),
        1..=3,
    )
    .prop_map(|v| {
        let servers = v
            .into_iter()
            .enumerate()
            .map(|(k, (t, c))| {
                SporadicServerSpec::new(k as u32 + 1, t, c.min(t / 2).max(1), CritLevel::Lo)
                    .with_priority(0)
            })
            .collect();
        let mut set = TaskSet::new(servers, vec![]);
        set.servers.sort_by_key(|s| (s.period, s.id));
        for (k, s) in set.servers.iter_mut().enumerate() {
            s.priority = k as u32;
        }
        set
    })
}

fn full_budget(set: &TaskSet) -> Workload {
    Workload {
        jobs: set
            .servers
            .iter()
            .map(|s| JobSpec::new(s.id, s.capacity_lo))
            .collect(),
        ..Default::default()
    }
}

fn mixed_scenario() -> impl Strategy<Value = (TaskSet, Workload, Time)> {
    let server = (
        prop::sample::select(vec![8u64, 10, 16, 20, 32]),
        1u64..6,
        0u64..4,
        any::<bool>(),
    );
    (
        prop::collection::vec(server, 2..=4),
        1u64..=4,
        1u64..4,
        0u64..60,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(servers, c, b, mc, pibs_hi, blocking)| {
            let servers: Vec<_> = servers
                .into_iter()
                .enumerate()
                .map(|(k, (t, c, extra, hi))| {
                    let c = c.min(t / 2);
                    let crit = if hi { CritLevel::Hi } else { CritLevel::Lo };
                    let s =
                        SporadicServerSpec::new(k as u32 + 1, t, c, crit).with_priority(k as u32);
                    match crit {
                        CritLevel::Hi => s.with_hi((c + extra).min(t)),
                        CritLevel::Lo if extra % 2 == 1 => s.with_hi(c / 2),
                        CritLevel::Lo => s,
                    }
                })
                .collect();
            let pibs = if pibs_hi {
                PibsSpec::new(100, Util::new(c, 16).unwrap(), CritLevel::Hi)
                    .with_hi(Util::new(c + 1, 16).unwrap())
            } else {
                PibsSpec::new(100, Util::new(c, 16).unwrap(), CritLevel::Lo)
            };
            let first = servers[0].id;
            let jobs = servers
                .iter()
                .map(|s| {
                    let job = JobSpec::new(s.id, s.capacity(CritLevel::Hi).max(s.capacity_lo));
                    let handler = if s.id == first { 100 } else { first };
                    let io = IoSpec {
                        k: 3,
                        b_lo: b,
                        b_hi: b + 1,
                        f: 1,
                        i: b + 2,
                        handler,
                        blocking,
                    };
                    if s.id == first || handler == first {
                        job.with_io(io)
                    } else {
                        job
                    }
                })
                .collect();
            let set = TaskSet::new(servers, vec![pibs]);
            let workload = Workload {
                jobs,
                mode_change_at: Some(mc),
                ..Default::default()
            };
            (set, workload, 200)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ss_only_simulation_matches_rta(set in ss_only_set()) {
        let rta = ss_rta(&set);
        let horizon = lcm_all(&set.servers.iter().map(|s| s.period).collect::<Vec<_>>());
        let config = SimConfig { list_len: 64, ..SimConfig::default() };
        let trace = run(&set, &full_budget(&set), horizon, config).unwrap();
        let worst = trace.worst_response();
        // a server that overruns is throttled, so only the prefix of
        // schedulable higher-priority servers is exact
        for s in set.servers.iter().take_while(|s| rta.response_time(s.id).is_some()).chain(
            set.servers.iter().find(|s| rta.response_time(s.id).is_none()),
        ) {
            match rta.response_time(s.id) {
                Some(r) => {
                    prop_assert_eq!(worst.get(&s.id).copied(), Some(r));
                    prop_assert!(trace.misses().all(|j| j.server != s.id));
                }
                None => prop_assert!(trace.misses().any(|j| j.server == s.id)),
            }
        }
    }

    #[test]
    fn pibs_window_never_exceeds_bound(
        c in 1u64..16,
        period in 4u64..40,
        hp in (1u64..4, 5u64..12),
        irqs in prop::collection::vec((0u64..120, 1u64..8), 1..20),
    ) {
        let c = c.min(period - 1);
        let (set, workload) = pibs_setup(c, period, hp, &irqs);
        let trace = run(&set, &workload, 200, SimConfig::default()).unwrap();
        trace.check_well_formed().unwrap();
        let bound = ceil_ratio(&pibs_window_bound(period, Util::new(c, period).unwrap()));
        prop_assert!(trace.max_window_execution(3, Some(2), period) <= bound);
    }

    #[test]
    fn traces_are_well_formed_and_deterministic((set, workload, horizon) in mixed_scenario()) {
        let a = run(&set, &workload, horizon, SimConfig::default()).unwrap();
        let b = run(&set, &workload, horizon, SimConfig::default()).unwrap();
        a.check_well_formed().map_err(TestCaseError::fail)?;
        prop_assert_eq!(&a, &b);
        prop_assert!(a.mode_change_at.is_some());
    }

    #[test]
    fn server_periods_respect_capacity((set, mut workload, horizon) in mixed_scenario(), len in 1usize..5) {
        workload.mode_change_at = None;
        let config = SimConfig { list_len: len, ..SimConfig::default() };
        let trace = run(&set, &workload, horizon, config).unwrap();
        let end = trace.mode_change_at.unwrap_or(horizon);
        // steady state: servers that only run their own jobs and meet every
        // deadline, in LO mode
        for s in set.servers.iter().skip(1).filter(|s| trace.misses().all(|j| j.server != s.id)) {
            let mut k = 0;
            while (k + 1) * s.period <= end {
                let got = trace.executed(s.id, None, k * s.period, (k + 1) * s.period);
                prop_assert!(got <= s.capacity_lo, "server {} period {}: {}", s.id, k, got);
                k += 1;
            }
        }
    }
}
