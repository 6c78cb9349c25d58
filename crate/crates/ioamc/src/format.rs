//! JSON documents for task sets, workloads and verdicts.
//!
//! Utilizations are written as `"p/q"` strings so that they round-trip
//! exactly. Priorities are optional on input: a set with none gets
//! rate-monotonic priorities, a set with some but not all is rejected.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use ioamc_core::amc::AmcVerdict;
use ioamc_core::rta::RtaResult;
use ioamc_core::sim::{IoSpec, IrqSpec, JobSpec, MergePolicy, SimConfig, Workload};
use ioamc_core::{CritLevel, Id, PibsSpec, SporadicServerSpec, TaskSet, Time, Util};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crit {
    #[serde(rename = "LO")]
    Lo,
    #[serde(rename = "HI")]
    Hi,
}

impl From<CritLevel> for Crit {
    fn from(c: CritLevel) -> Self {
        match c {
            CritLevel::Lo => Crit::Lo,
            CritLevel::Hi => Crit::Hi,
        }
    }
}

impl From<Crit> for CritLevel {
    fn from(c: Crit) -> Self {
        match c {
            Crit::Lo => CritLevel::Lo,
            Crit::Hi => CritLevel::Hi,
        }
    }
}

mod util_str {
    use super::*;

    pub fn serialize<S: Serializer>(u: &Util, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(u)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Util, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(u: &Option<Util>, s: S) -> Result<S::Ok, S::Error> {
            match u {
                Some(u) => s.collect_str(u),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Util>, D::Error> {
            match Option::<String>::deserialize(d)? {
                Some(s) => s.parse().map(Some).map_err(serde::de::Error::custom),
                None => Ok(None),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerDoc {
    pub id: Id,
    #[serde(rename = "T")]
    pub period: Time,
    #[serde(rename = "C_lo")]
    pub c_lo: Time,
    #[serde(rename = "C_hi", default, skip_serializing_if = "Option::is_none")]
    pub c_hi: Option<Time>,
    pub crit: Crit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PibsDoc {
    pub id: Id,
    #[serde(rename = "U_lo", with = "util_str")]
    pub u_lo: Util,
    #[serde(
        rename = "U_hi",
        default,
        with = "util_str::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub u_hi: Option<Util>,
    pub crit: Crit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSetDoc {
    pub servers: Vec<ServerDoc>,
    #[serde(default)]
    pub pibs: Vec<PibsDoc>,
    /// PIBS id to server id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<Id, Id>,
}

impl TaskSetDoc {
    pub fn from_set(set: &TaskSet) -> Self {
        let servers = set
            .servers
            .iter()
            .map(|s| ServerDoc {
                id: s.id,
                period: s.period,
                c_lo: s.capacity_lo,
                c_hi: s.capacity_hi,
                crit: s.criticality.into(),
                priority: Some(s.priority),
            })
            .collect();
        let pibs = set
            .pibs
            .iter()
            .map(|p| PibsDoc {
                id: p.id,
                u_lo: p.util_lo,
                u_hi: p.util_hi,
                crit: p.criticality.into(),
            })
            .collect();
        TaskSetDoc {
            servers,
            pibs,
            bindings: set.bindings.iter().map(|(&p, &s)| (p, s)).collect(),
        }
    }

    pub fn to_set(&self) -> Result<TaskSet> {
        let given = self.servers.iter().filter(|s| s.priority.is_some()).count();
        if given != 0 && given != self.servers.len() {
            bail!("either every server has a priority or none does");
        }
        let servers = self
            .servers
            .iter()
            .map(|s| {
                let mut spec = SporadicServerSpec::new(s.id, s.period, s.c_lo, s.crit.into());
                spec.capacity_hi = s.c_hi;
                spec.with_priority(s.priority.unwrap_or(0))
            })
            .collect();
        let pibs = self
            .pibs
            .iter()
            .map(|p| {
                let mut spec = PibsSpec::new(p.id, p.u_lo, p.crit.into());
                spec.util_hi = p.u_hi;
                spec
            })
            .collect();
        let mut set = TaskSet::new(servers, pibs);
        for (&p, &s) in &self.bindings {
            set = set.bind(p, s);
        }
        if given == 0 {
            set = set.assign_rate_monotonic();
        }
        set.validate()?;
        Ok(set)
    }
}

pub fn parse_task_set(json: &str) -> Result<TaskSet> {
    let doc: TaskSetDoc = serde_json::from_str(json).context("task set JSON")?;
    doc.to_set()
}

pub fn task_set_json(set: &TaskSet) -> String {
    serde_json::to_string_pretty(&TaskSetDoc::from_set(set)).expect("task sets always serialize")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoDoc {
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "B_lo")]
    pub b_lo: Time,
    #[serde(rename = "B_hi", default, skip_serializing_if = "Option::is_none")]
    pub b_hi: Option<Time>,
    #[serde(rename = "F")]
    pub f: Time,
    #[serde(rename = "I")]
    pub i: Time,
    /// PIBS or server that runs the bottom halves.
    #[serde(alias = "pibs")]
    pub handler: Id,
    #[serde(default = "yes")]
    pub blocking: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDoc {
    pub ss: Id,
    pub busy: Time,
    #[serde(default)]
    pub offset: Time,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub io: Option<IoDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrqDoc {
    pub time: Time,
    pub handler: Id,
    pub serving: Id,
    #[serde(rename = "B")]
    pub b: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeDoc {
    MergeNext,
    MergeTail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadDoc {
    pub jobs: Vec<JobDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub irqs: Vec<IrqDoc>,
    pub horizon: Time,
    #[serde(default = "default_list_len")]
    pub list_len: usize,
    #[serde(default = "default_merge")]
    pub merge_policy: MergeDoc,
    #[serde(default)]
    pub dispatch_overhead: Time,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_change_at: Option<Time>,
}

fn default_list_len() -> usize {
    SimConfig::DEFAULT_LIST_LEN
}

fn default_merge() -> MergeDoc {
    MergeDoc::MergeNext
}

/// Everything `simulate` needs besides the task set.
#[derive(Clone, Debug, PartialEq)]
pub struct SimInput {
    pub workload: Workload,
    pub horizon: Time,
    pub config: SimConfig,
}

impl WorkloadDoc {
    pub fn to_input(&self) -> SimInput {
        let jobs = self
            .jobs
            .iter()
            .map(|j| JobSpec {
                ss: j.ss,
                busy: j.busy,
                offset: j.offset,
                io: j.io.as_ref().map(|io| IoSpec {
                    k: io.k,
                    b_lo: io.b_lo,
                    b_hi: io.b_hi.unwrap_or(io.b_lo),
                    f: io.f,
                    i: io.i,
                    handler: io.handler,
                    blocking: io.blocking,
                }),
            })
            .collect();
        let irqs = self
            .irqs
            .iter()
            .map(|r| IrqSpec {
                time: r.time,
                handler: r.handler,
                serving: r.serving,
                b: r.b,
            })
            .collect();
        let merge_policy = match self.merge_policy {
            MergeDoc::MergeNext => MergePolicy::MergeNext,
            MergeDoc::MergeTail => MergePolicy::MergeTail,
        };
        SimInput {
            workload: Workload {
                jobs,
                irqs,
                mode_change_at: self.mode_change_at,
            },
            horizon: self.horizon,
            config: SimConfig {
                list_len: self.list_len,
                merge_policy,
                dispatch_overhead: self.dispatch_overhead,
            },
        }
    }

    pub fn from_input(input: &SimInput) -> Self {
        let jobs = input
            .workload
            .jobs
            .iter()
            .map(|j| JobDoc {
                ss: j.ss,
                busy: j.busy,
                offset: j.offset,
                io: j.io.map(|io| IoDoc {
                    k: io.k,
                    b_lo: io.b_lo,
                    b_hi: Some(io.b_hi),
                    f: io.f,
                    i: io.i,
                    handler: io.handler,
                    blocking: io.blocking,
                }),
            })
            .collect();
        let irqs = input
            .workload
            .irqs
            .iter()
            .map(|r| IrqDoc {
                time: r.time,
                handler: r.handler,
                serving: r.serving,
                b: r.b,
            })
            .collect();
        WorkloadDoc {
            jobs,
            irqs,
            horizon: input.horizon,
            list_len: input.config.list_len,
            merge_policy: match input.config.merge_policy {
                MergePolicy::MergeNext => MergeDoc::MergeNext,
                MergePolicy::MergeTail => MergeDoc::MergeTail,
            },
            dispatch_overhead: input.config.dispatch_overhead,
            mode_change_at: input.workload.mode_change_at,
        }
    }
}

pub fn parse_workload(json: &str) -> Result<SimInput> {
    let doc: WorkloadDoc = serde_json::from_str(json).context("workload JSON")?;
    Ok(doc.to_input())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskVerdictDoc {
    pub id: Id,
    pub crit: Crit,
    pub runs_in_hi: bool,
    #[serde(rename = "R_lo")]
    pub r_lo: Option<Time>,
    #[serde(rename = "R_hi", skip_serializing_if = "Option::is_none")]
    pub r_hi: Option<Time>,
    #[serde(rename = "R_star", skip_serializing_if = "Option::is_none")]
    pub r_star: Option<Time>,
    #[serde(rename = "R_lo_star", skip_serializing_if = "Option::is_none")]
    pub r_lo_star: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PibsVerdictDoc {
    pub pibs: Id,
    pub server: Id,
    pub runs_in_hi: bool,
    #[serde(rename = "R_lo")]
    pub r_lo: Option<Time>,
    #[serde(rename = "R_hi", skip_serializing_if = "Option::is_none")]
    pub r_hi: Option<Time>,
    #[serde(rename = "R_star", skip_serializing_if = "Option::is_none")]
    pub r_star: Option<Time>,
    #[serde(rename = "R_lo_star", skip_serializing_if = "Option::is_none")]
    pub r_lo_star: Option<Time>,
}

/// `null` response times mean the iteration passed the deadline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictDoc {
    pub test: String,
    pub schedulable: bool,
    pub servers: Vec<TaskVerdictDoc>,
    pub pibs: Vec<PibsVerdictDoc>,
}

impl From<&AmcVerdict> for VerdictDoc {
    fn from(v: &AmcVerdict) -> Self {
        VerdictDoc {
            test: v.test_name.to_string(),
            schedulable: v.schedulable,
            servers: v
                .tasks
                .iter()
                .map(|t| TaskVerdictDoc {
                    id: t.id,
                    crit: t.criticality.into(),
                    runs_in_hi: t.runs_in_hi,
                    r_lo: t.r_lo,
                    r_hi: t.r_hi,
                    r_star: t.r_star,
                    r_lo_star: t.r_lo_star,
                })
                .collect(),
            pibs: v
                .pibs
                .iter()
                .map(|p| PibsVerdictDoc {
                    pibs: p.pibs,
                    server: p.server,
                    runs_in_hi: p.runs_in_hi,
                    r_lo: p.r_lo,
                    r_hi: p.r_hi,
                    r_star: p.r_star,
                    r_lo_star: p.r_lo_star,
                })
                .collect(),
        }
    }
}

impl VerdictDoc {
    pub fn from_rta(test: &str, set: &TaskSet, r: &RtaResult) -> Self {
        let crit = |id: Id| set.server(id).map_or(Crit::Lo, |s| s.criticality.into());
        VerdictDoc {
            test: test.to_string(),
            schedulable: r.schedulable,
            servers: r
                .servers
                .iter()
                .map(|&(id, r_lo)| TaskVerdictDoc {
                    id,
                    crit: crit(id),
                    runs_in_hi: false,
                    r_lo,
                    r_hi: None,
                    r_star: None,
                    r_lo_star: None,
                })
                .collect(),
            pibs: r
                .pibs
                .iter()
                .map(|p| PibsVerdictDoc {
                    pibs: p.pibs,
                    server: p.server,
                    runs_in_hi: false,
                    r_lo: p.response_time,
                    r_hi: None,
                    r_star: None,
                    r_lo_star: None,
                })
                .collect(),
        }
    }
}

/// `"p/q"`, an integer, or a decimal such as `"0.05"`, as an exact fraction.
pub fn parse_fraction(s: &str) -> Result<(u64, u64)> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let (n, d) = (n.trim().parse()?, d.trim().parse()?);
        if d == 0 {
            bail!("zero denominator in {s:?}");
        }
        return Ok((n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        bail!("not a number: {s:?}");
    }
    let d = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse()? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse()? };
    Ok((
        int.checked_mul(d)
            .and_then(|x| x.checked_add(frac))
            .context("number too large")?,
        d,
    ))
}

pub fn parse_util(s: &str) -> Result<Util> {
    let (n, d) = parse_fraction(s)?;
    Ok(Util::new(n, d)?)
}
