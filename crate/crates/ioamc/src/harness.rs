//! Experiment orchestration: utilization sweeps over generated sets, paired
//! dominance checks, weighted schedulability, and the simulation-based
//! safety campaign.
//!
//! Every set is identified by its generation seed (`params.seed ^ index`),
//! and the same seeds are used at every utilization point, so every test
//! sees the same draws and any reported set can be regenerated.

use std::fmt;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use ioamc_core::amc::SchedTest;
use ioamc_core::rta::{ss_pibs_rta, ss_rta};
use ioamc_core::sim::{run, IrqSpec, JobSpec, SimConfig, SimTrace, Workload};
use ioamc_core::taskgen::{generate, pibs_to_ss, GenParams};
use ioamc_core::{CritLevel, Rational, TaskSet, Time, Util};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::format::task_set_json;

/// The six tests compared in the evaluation.
pub const STANDARD_TESTS: [SchedTest; 6] = [
    SchedTest::SsRta,
    SchedTest::SsPibsRta,
    SchedTest::AmcRtb,
    SchedTest::IoAmcRtb,
    SchedTest::AmcUb,
    SchedTest::IoAmcUb,
];

/// 0.20, 0.25, ..., 0.95.
pub fn util_grid() -> Vec<Util> {
    (4..=19).map(|k| Util::new(k, 20).unwrap()).collect()
}

/// `strong` must accept every set `weak` accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dominance {
    pub strong: SchedTest,
    pub weak: SchedTest,
}

const fn dom(strong: SchedTest, weak: SchedTest) -> Dominance {
    Dominance { strong, weak }
}

/// Expected per-set orderings. On classic sets LO servers have no C(HI), so
/// letting them survive changes nothing and the two variants must agree both
/// ways; on extended sets survivors add HI-mode load and can only lose sets.
pub fn dominance_pairs(extended: bool) -> Vec<Dominance> {
    use SchedTest::*;
    let mut v = vec![
        dom(AmcUb, AmcRtb),
        dom(IoAmcUb, IoAmcRtb),
        dom(SsRta, SsPibsRta),
        dom(AmcRtb, IoAmcRtb),
    ];
    if extended {
        v.extend([dom(IoAmcRtb, IoAmcRtbExt), dom(AmcRtb, AmcRtbExt)]);
    } else {
        v.extend([dom(IoAmcRtbExt, IoAmcRtb), dom(IoAmcRtb, IoAmcRtbExt)]);
    }
    v
}

/// Verdict of every test in `tests`, in order. Tests that cannot handle PIBS
/// see the set with each PIBS converted to an equivalent server.
pub fn evaluate(set: &TaskSet, tests: &[SchedTest]) -> Result<Vec<bool>> {
    let converted = if tests.iter().any(|t| !t.uses_pibs()) {
        Some(pibs_to_ss(set)?)
    } else {
        None
    };
    tests
        .iter()
        .map(|t| {
            let target = if t.uses_pibs() {
                set
            } else {
                converted.as_ref().unwrap()
            };
            Ok(t.accepts(target)?)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetOutcome {
    pub index: u64,
    pub seed: u64,
    /// LO-mode utilization of the generated set, after capacity rounding.
    pub util: f64,
    pub accepted: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Dominance {
        util: Util,
        seed: u64,
        pair: Dominance,
    },
    /// Fewer sets accepted at `util` than at `util - step`.
    NotMonotone {
        test: SchedTest,
        util: Util,
        before: usize,
        after: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dominance { util, seed, pair } => write!(
                f,
                "util {:.2} seed {seed}: {} accepts but {} rejects",
                util.to_f64(),
                pair.weak,
                pair.strong
            ),
            Violation::NotMonotone {
                test,
                util,
                before,
                after,
            } => {
                write!(
                    f,
                    "{test}: {after} accepted at util {:.2}, {before} at the previous point",
                    util.to_f64()
                )
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub tests: Vec<SchedTest>,
    pub grid: Vec<Util>,
    pub n_sets: usize,
    pub params: GenParams,
    pub check_monotone: bool,
}

impl SweepConfig {
    pub fn new(tests: Vec<SchedTest>, n_sets: usize, params: GenParams) -> Self {
        SweepConfig {
            tests,
            grid: util_grid(),
            n_sets,
            params,
            check_monotone: true,
        }
    }

    pub fn params_at(&self, util: Util, index: u64) -> GenParams {
        GenParams {
            total_util: util,
            ..self.params.for_index(index)
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub util: Util,
    pub outcomes: Vec<SetOutcome>,
}

impl SweepPoint {
    pub fn accepted(&self, test_pos: usize) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.accepted[test_pos])
            .count()
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub tests: Vec<SchedTest>,
    pub points: Vec<SweepPoint>,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub test: String,
    pub util: String,
    pub accepted: usize,
    pub total: usize,
    pub ratio: f64,
}

impl SweepResult {
    pub fn ratio(&self, test: SchedTest, util: Util) -> Option<f64> {
        let pos = self.tests.iter().position(|&t| t == test)?;
        let p = self.points.iter().find(|p| p.util == util)?;
        Some(p.accepted(pos) as f64 / p.outcomes.len().max(1) as f64)
    }

    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for (pos, t) in self.tests.iter().enumerate() {
            for p in &self.points {
                let total = p.outcomes.len();
                let accepted = p.accepted(pos);
                rows.push(SweepRow {
                    test: t.name().to_string(),
                    util: format!("{:.2}", p.util.to_f64()),
                    accepted,
                    total,
                    ratio: if total == 0 {
                        0.0
                    } else {
                        accepted as f64 / total as f64
                    },
                });
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in self.rows() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.params.validate()?;
    let pairs: Vec<(usize, usize, Dominance)> = dominance_pairs(cfg.params.extended)
        .into_iter()
        .filter_map(|d| {
            let s = cfg.tests.iter().position(|&t| t == d.strong)?;
            let w = cfg.tests.iter().position(|&t| t == d.weak)?;
            Some((s, w, d))
        })
        .collect();
    let mut points = Vec::with_capacity(cfg.grid.len());
    let mut violations = Vec::new();
    for &util in &cfg.grid {
        let outcomes = (0..cfg.n_sets as u64)
            .into_par_iter()
            .map(|index| {
                let params = cfg.params_at(util, index);
                let set = generate(&params)
                    .with_context(|| format!("generating set with seed {}", params.seed))?;
                Ok(SetOutcome {
                    index,
                    seed: params.seed,
                    util: set.utilization_lo(),
                    accepted: evaluate(&set, &cfg.tests)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for o in &outcomes {
            for &(s, w, pair) in &pairs {
                if o.accepted[w] && !o.accepted[s] {
                    violations.push(Violation::Dominance {
                        util,
                        seed: o.seed,
                        pair,
                    });
                }
            }
        }
        points.push(SweepPoint { util, outcomes });
    }
    if cfg.check_monotone {
        for (pos, &test) in cfg.tests.iter().enumerate() {
            for w in points.windows(2) {
                let (before, after) = (w[0].accepted(pos), w[1].accepted(pos));
                if after > before {
                    violations.push(Violation::NotMonotone {
                        test,
                        util: w[1].util,
                        before,
                        after,
                    });
                }
            }
        }
    }
    Ok(SweepResult {
        tests: cfg.tests.clone(),
        points,
        violations,
    })
}

/// Writes each set behind a dominance violation as `<dir>/<seed>.json`.
pub fn dump_counterexamples(
    cfg: &SweepConfig,
    violations: &[Violation],
    dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for v in violations {
        if let Violation::Dominance { util, seed, .. } = v {
            let params = GenParams {
                total_util: *util,
                seed: *seed,
                ..cfg.params.clone()
            };
            let set = generate(&params)?;
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!(
                "u{:02}-seed{seed}.json",
                (util.to_f64() * 100.0).round() as u32
            ));
            std::fs::write(&path, task_set_json(&set))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `W = Σ u·S / Σ u` over every set of the sweep, per test.
pub fn weighted_schedulability(result: &SweepResult) -> Vec<f64> {
    (0..result.tests.len())
        .map(|pos| {
            let (mut num, mut den) = (0.0, 0.0);
            for o in result.points.iter().flat_map(|p| &p.outcomes) {
                den += o.util;
                if o.accepted[pos] {
                    num += o.util;
                }
            }
            if den == 0.0 {
                0.0
            } else {
                num / den
            }
        })
        .collect()
}

/// Parameter varied by a weighted-schedulability run.
#[derive(Clone, Debug, PartialEq)]
pub enum Axis {
    PHi(Vec<f64>),
    CritFactor(Vec<Rational>),
    /// Total task count; a quarter of the tasks (rounded) are PIBS.
    Tasks(Vec<usize>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::PHi(_) => "p_hi",
            Axis::CritFactor(_) => "cf",
            Axis::Tasks(_) => "n",
        }
    }

    /// Default values for each axis.
    pub fn standard(name: &str) -> Option<Axis> {
        match name {
            "p_hi" | "phi" => Some(Axis::PHi((1..=9).map(|k| k as f64 / 10.0).collect())),
            "cf" => Some(Axis::CritFactor(
                (2..=8).map(|k| Rational::new(k, 2)).collect(),
            )),
            "n" | "tasks" => Some(Axis::Tasks((2..=10).map(|k| 4 * k).collect())),
            _ => None,
        }
    }

    fn points(&self, base: &GenParams) -> Vec<(String, GenParams)> {
        match self {
            Axis::PHi(v) => v
                .iter()
                .map(|&p| {
                    (
                        format!("{p}"),
                        GenParams {
                            p_hi: p,
                            ..base.clone()
                        },
                    )
                })
                .collect(),
            Axis::CritFactor(v) => v
                .iter()
                .map(|&cf| {
                    (
                        format!("{cf}"),
                        GenParams {
                            crit_factor: cf,
                            ..base.clone()
                        },
                    )
                })
                .collect(),
            Axis::Tasks(v) => v
                .iter()
                .map(|&n| {
                    let n_io = (n + 2) / 4;
                    (
                        format!("{n}"),
                        GenParams {
                            n_main: n - n_io,
                            n_io,
                            ..base.clone()
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedRow {
    pub test: String,
    pub param: String,
    #[serde(rename = "W")]
    pub w: f64,
}

pub struct WeightedResult {
    pub rows: Vec<WeightedRow>,
    pub violations: Vec<Violation>,
}

pub fn weighted(cfg: &SweepConfig, axis: &Axis) -> Result<WeightedResult> {
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for (label, params) in axis.points(&cfg.params) {
        let sub = SweepConfig {
            params,
            ..cfg.clone()
        };
        let result = sweep(&sub)?;
        for (t, w) in cfg.tests.iter().zip(weighted_schedulability(&result)) {
            rows.push(WeightedRow {
                test: t.name().to_string(),
                param: label.clone(),
                w,
            });
        }
        violations.extend(result.violations);
    }
    // group by test, keeping the parameter order within each
    let order: Vec<String> = cfg.tests.iter().map(|t| t.name().to_string()).collect();
    rows.sort_by_key(|r| order.iter().position(|t| *t == r.test));
    Ok(WeightedResult { rows, violations })
}

pub fn write_weighted_csv<W: Write>(rows: &[WeightedRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Response-time mismatches between each mixed-criticality test and its
/// single-criticality counterpart. Empty when every budget is the same in
/// both modes.
pub fn collapse_mismatches(set: &TaskSet) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let conv = pibs_to_ss(set)?;
    let pairs = [
        (SchedTest::AmcRtb, &conv, ss_rta(&conv)),
        (SchedTest::AmcRtbExt, &conv, ss_rta(&conv)),
        (SchedTest::IoAmcRtb, set, ss_pibs_rta(set)),
        (SchedTest::IoAmcRtbExt, set, ss_pibs_rta(set)),
    ];
    for (test, target, base) in pairs {
        let v = test.evaluate(target)?;
        if v.schedulable != base.schedulable {
            out.push(format!(
                "{test}: schedulable {} vs {}",
                v.schedulable, base.schedulable
            ));
        }
        for t in &v.tasks {
            let r = base.response_time(t.id);
            if t.r_lo != r {
                out.push(format!(
                    "{test} server {}: R(LO) {:?} vs {r:?}",
                    t.id, t.r_lo
                ));
            }
            if t.criticality == CritLevel::Hi && t.r_star != r {
                out.push(format!(
                    "{test} server {}: R* {:?} vs {r:?}",
                    t.id, t.r_star
                ));
            }
        }
        for p in &v.pibs {
            let r = base
                .pibs
                .iter()
                .find(|b| b.pibs == p.pibs && b.server == p.server)
                .and_then(|b| b.response_time);
            if p.r_lo != r {
                out.push(format!(
                    "{test} PIBS {} on {}: R(LO) {:?} vs {r:?}",
                    p.pibs, p.server, p.r_lo
                ));
            }
        }
    }
    for (mc, plain, target) in [
        (SchedTest::AmcUb, SchedTest::SsRta, &conv),
        (SchedTest::IoAmcUb, SchedTest::SsPibsRta, set),
    ] {
        if mc.accepts(target)? != plain.accepts(target)? {
            out.push(format!("{mc} and {plain} disagree"));
        }
    }
    Ok(out)
}

/// A stress workload for `set`: every server releases jobs that use their
/// whole budget in the mode they are released in (HI servers run for C(HI)
/// and so overrun their LO budget), and every PIBS is flooded with bottom
/// halves each period of its server, so it always has work to do.
pub fn stress_workload(set: &TaskSet, rng: &mut ChaCha8Rng, horizon: Time) -> Workload {
    let synchronous = rng.gen_bool(0.5);
    let jobs = set
        .servers
        .iter()
        .map(|s| {
            let busy = s.capacity_hi.unwrap_or(s.capacity_lo).max(s.capacity_lo);
            let offset = if synchronous {
                0
            } else {
                rng.gen_range(0..s.period)
            };
            JobSpec {
                offset,
                ..JobSpec::new(s.id, busy)
            }
        })
        .collect();
    let mut irqs = Vec::new();
    for p in &set.pibs {
        let s = set.server(set.bindings[&p.id]).expect("validated binding");
        let util = p.util_hi.map_or(p.util_lo, |hi| hi.max(p.util_lo));
        let budget = util.ceil_mul(s.period).max(1);
        let k = rng.gen_range(1..=budget.min(4));
        let b = budget.div_ceil(k) + 1;
        let phase = rng.gen_range(0..s.period);
        let mut t = phase;
        while t < horizon {
            for j in 0..k {
                irqs.push(IrqSpec {
                    time: t + j,
                    handler: p.id,
                    serving: s.id,
                    b,
                });
            }
            t += s.period;
        }
    }
    irqs.sort_by_key(|r| (r.time, r.handler));
    Workload {
        jobs,
        irqs,
        mode_change_at: None,
    }
}

#[derive(Clone, Debug)]
pub struct SafetyFailure {
    pub seed: u64,
    pub set: TaskSet,
    pub workload: Workload,
    pub horizon: Time,
    pub hi_misses: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SafetyReport {
    pub generated: usize,
    pub accepted: usize,
    pub mode_changes: usize,
    pub failures: Vec<SafetyFailure>,
}

/// Simulates one accepted set under the stress workload with a forced mode
/// change at a random instant (an overrun may trigger it earlier).
pub fn safety_run(set: &TaskSet, seed: u64) -> Result<(SimTrace, Workload, Time)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_period = set.servers.iter().map(|s| s.period).max().unwrap_or(1);
    let horizon = 3 * max_period;
    let mut workload = stress_workload(set, &mut rng, horizon);
    workload.mode_change_at = Some(rng.gen_range(0..2 * max_period));
    let trace = run(set, &workload, horizon, SimConfig::default())?;
    Ok((trace, workload, horizon))
}

/// Generates sets at random grid utilizations until `target` of them pass
/// IO-AMC-rtb, and simulates each one.
pub fn safety_campaign(params: &GenParams, target: usize) -> Result<SafetyReport> {
    let grid = util_grid();
    let mut report = SafetyReport::default();
    let mut next: u64 = 0;
    let batch = 256u64;
    while report.accepted < target {
        let results = (next..next + batch)
            .into_par_iter()
            .map(|index| {
                let mut pick = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(index));
                let util = grid[pick.gen_range(0..grid.len())];
                let p = GenParams {
                    total_util: util,
                    ..params.for_index(index)
                };
                let set = generate(&p)?;
                if !SchedTest::IoAmcRtb.accepts(&set)? {
                    return Ok(None);
                }
                let (trace, workload, horizon) = safety_run(&set, p.seed)?;
                Ok(Some((
                    p.seed,
                    set,
                    workload,
                    horizon,
                    trace.hi_misses(),
                    trace.mode_change_at.is_some(),
                )))
            })
            .collect::<Result<Vec<_>>>()?;
        next += batch;
        for r in results {
            report.generated += 1;
            if report.accepted >= target {
                continue;
            }
            if let Some((seed, set, workload, horizon, hi_misses, changed)) = r {
                report.accepted += 1;
                report.mode_changes += usize::from(changed);
                if hi_misses > 0 {
                    report.failures.push(SafetyFailure {
                        seed,
                        set,
                        workload,
                        horizon,
                        hi_misses,
                    });
                }
            }
        }
    }
    Ok(report)
}
