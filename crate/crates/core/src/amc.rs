//! Mixed-criticality tests: AMC and IO-AMC steady states, the response-time
//! bound across the LO→HI mode change (classic and with LO tasks surviving),
//! and Audsley priority assignment.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::ModelError;
use crate::model::{CritLevel, Id, PibsSpec, SporadicServerSpec, TaskSet};
use crate::rta::{self, candidate_periods, hip_of, hp_of, pibs_window_bound, Equation};
use crate::time::{time_ratio, Rational, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    SsOnly,
    SsPibs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AmcOptions {
    /// LO servers with a non-zero C(HI), and LO PIBS with a U(HI), keep
    /// running after the mode change.
    pub lo_tasks_survive: bool,
    pub model: Model,
}

impl AmcOptions {
    pub fn classic(model: Model) -> Self {
        AmcOptions {
            lo_tasks_survive: false,
            model,
        }
    }

    pub fn extended(model: Model) -> Self {
        AmcOptions {
            lo_tasks_survive: true,
            model,
        }
    }
}

/// Response times of one server. HI-mode fields stay `None` unless
/// `runs_in_hi`; `r_star` and `r_lo_star` are only filled by mode-change tests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskVerdict {
    pub id: Id,
    pub criticality: CritLevel,
    pub runs_in_hi: bool,
    pub r_lo: Option<Time>,
    pub r_hi: Option<Time>,
    pub r_star: Option<Time>,
    pub r_lo_star: Option<Time>,
}

/// Response times of one PIBS on one candidate server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PibsVerdict {
    pub pibs: Id,
    pub server: Id,
    pub runs_in_hi: bool,
    pub r_lo: Option<Time>,
    pub r_hi: Option<Time>,
    pub r_star: Option<Time>,
    pub r_lo_star: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmcVerdict {
    pub test_name: &'static str,
    pub tasks: Vec<TaskVerdict>,
    pub pibs: Vec<PibsVerdict>,
    pub schedulable: bool,
}

impl AmcVerdict {
    pub fn task(&self, id: Id) -> Option<&TaskVerdict> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

/// `I^q_k(t, L)`: the PIBS interference bound at the utilization of mode `level`.
/// A PIBS that does not run in `level` contributes nothing.
pub fn crit_interference(t: Time, period: Time, pibs: &PibsSpec, level: CritLevel) -> Rational {
    pibs.util(level)
        .map(|u| rta::pibs_interference(t, period, u))
        .unwrap_or_default()
}

/// What a verdict requires beyond the LO steady state.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Check {
    /// Only the LO steady state: the non-mixed-criticality tests.
    LoOnly,
    /// Both steady states.
    Steady,
    /// LO steady state and the mode-change bound.
    ModeChange,
}

struct Ctx<'a> {
    set: &'a TaskSet,
    survive: bool,
}

impl<'a> Ctx<'a> {
    fn in_hi(&self, s: &SporadicServerSpec) -> bool {
        s.criticality == CritLevel::Hi || (self.survive && s.runs_in_hi())
    }

    fn cap_hi(&self, s: &SporadicServerSpec) -> Time {
        if self.in_hi(s) {
            s.capacity(CritLevel::Hi)
        } else {
            0
        }
    }

    /// `hipH(i)` in HI mode: `i` plus the higher-priority servers still running.
    fn hip_hi(
        &self,
        me: &'a SporadicServerSpec,
    ) -> impl Iterator<Item = &'a SporadicServerSpec> + Clone + '_ {
        hip_of(self.set, me).filter(move |j| j.id == me.id || self.in_hi(j))
    }

    fn lo_candidates(&self, p: &PibsSpec) -> Vec<Id> {
        self.set.pibs_candidates(p.id, false)
    }

    /// Servers a PIBS is analysed against after the mode change.
    fn hi_candidates(&self, p: &PibsSpec) -> Vec<Id> {
        if p.util(CritLevel::Hi).is_none() {
            return Vec::new();
        }
        self.set
            .pibs_candidates(p.id, false)
            .into_iter()
            .filter(|&id| self.set.server(id).is_some_and(|s| self.in_hi(s)))
            .collect()
    }

    fn server_lo(&self, me: &SporadicServerSpec) -> Option<Time> {
        rta::ss_pibs_response(self.set, me)
    }

    fn server_hi(&self, me: &'a SporadicServerSpec) -> Option<Time> {
        let mut eq = Equation::new(time_ratio(self.cap_hi(me)));
        for j in hp_of(self.set, me) {
            eq.periodic(j.period, self.cap_hi(j));
        }
        for k in &self.set.pibs {
            eq.pibs(
                candidate_periods(self.set, k, self.hip_hi(me)),
                k.util(CritLevel::Hi),
            );
        }
        eq.solve(me.deadline)
    }

    fn server_lo_star(&self, me: &SporadicServerSpec) -> Option<Time> {
        let mut eq = Equation::new(time_ratio(me.lo_star_capacity()));
        for j in hp_of(self.set, me) {
            eq.periodic(j.period, j.capacity_lo);
        }
        for k in &self.set.pibs {
            eq.pibs(
                candidate_periods(self.set, k, hip_of(self.set, me)),
                Some(k.util_lo),
            );
        }
        eq.solve(me.deadline)
    }

    fn server_star(&self, me: &'a SporadicServerSpec, lo_star: Time) -> Option<Time> {
        let mut eq = Equation::new(time_ratio(self.cap_hi(me))).anchored(lo_star);
        for j in hp_of(self.set, me) {
            match j.criticality {
                CritLevel::Hi => eq.periodic(j.period, self.cap_hi(j)),
                CritLevel::Lo => {
                    eq.periodic_at_anchor(j.period, j.capacity_lo);
                    if self.survive {
                        eq.after_anchor(j.period, self.cap_hi(j));
                    }
                }
            }
        }
        self.add_split_pibs(&mut eq, me, None);
        eq.solve(me.deadline)
    }

    /// PIBS terms of the mode-change equations, seen from server `me`.
    fn add_split_pibs(&self, eq: &mut Equation, me: &'a SporadicServerSpec, skip: Option<Id>) {
        for k in self.set.pibs.iter().filter(|k| Some(k.id) != skip) {
            let hip = candidate_periods(self.set, k, hip_of(self.set, me));
            match k.criticality {
                CritLevel::Hi => eq.pibs(hip, k.util(CritLevel::Hi)),
                CritLevel::Lo => {
                    eq.pibs_at_anchor(&hip, Some(k.util_lo));
                    let after = if self.survive {
                        hip
                    } else {
                        candidate_periods(
                            self.set,
                            k,
                            hip_of(self.set, me)
                                .filter(|j| j.id == me.id || j.criticality == CritLevel::Hi),
                        )
                    };
                    eq.pibs_after_anchor(after, k.util(CritLevel::Hi));
                }
            }
        }
    }

    fn pibs_lo(&self, p: &PibsSpec, s: &SporadicServerSpec) -> Option<Time> {
        rta::pibs_response(self.set, p, s)
    }

    fn pibs_hi(&self, p: &PibsSpec, s: &'a SporadicServerSpec) -> Option<Time> {
        let u = p.util(CritLevel::Hi)?;
        let mut eq = Equation::new(pibs_window_bound(s.period, u));
        for j in self.hip_hi(s) {
            eq.periodic(j.period, self.cap_hi(j));
        }
        for k in self.set.pibs.iter().filter(|k| k.id != p.id) {
            eq.pibs(
                candidate_periods(self.set, k, self.hip_hi(s)),
                k.util(CritLevel::Hi),
            );
        }
        eq.solve(s.deadline)
    }

    fn pibs_lo_star(&self, p: &PibsSpec, s: &SporadicServerSpec) -> Option<Time> {
        let mut eq = Equation::new(pibs_window_bound(s.period, p.lo_star_util()));
        for j in hip_of(self.set, s) {
            eq.periodic(j.period, j.capacity_lo);
        }
        for k in self.set.pibs.iter().filter(|k| k.id != p.id) {
            eq.pibs(
                candidate_periods(self.set, k, hip_of(self.set, s)),
                Some(k.util_lo),
            );
        }
        eq.solve(s.deadline)
    }

    fn pibs_star(&self, p: &PibsSpec, s: &'a SporadicServerSpec, lo_star: Time) -> Option<Time> {
        let u = p.util(CritLevel::Hi)?;
        let mut eq = Equation::new(pibs_window_bound(s.period, u)).anchored(lo_star);
        for j in hip_of(self.set, s) {
            if j.id == s.id || j.criticality == CritLevel::Hi {
                eq.periodic(j.period, self.cap_hi(j));
            }
            if j.criticality == CritLevel::Lo {
                eq.periodic_at_anchor(j.period, j.capacity_lo);
                if self.survive && j.id != s.id {
                    eq.after_anchor(j.period, self.cap_hi(j));
                }
            }
        }
        self.add_split_pibs(&mut eq, s, Some(p.id));
        eq.solve(s.deadline)
    }

    fn task_verdict(&self, me: &'a SporadicServerSpec, check: Check) -> TaskVerdict {
        let runs_in_hi = check != Check::LoOnly && self.in_hi(me);
        let r_lo = self.server_lo(me);
        let mut v = TaskVerdict {
            id: me.id,
            criticality: me.criticality,
            runs_in_hi,
            r_lo,
            r_hi: None,
            r_star: None,
            r_lo_star: None,
        };
        if runs_in_hi {
            v.r_hi = self.server_hi(me);
            if check == Check::ModeChange {
                v.r_lo_star = self.server_lo_star(me);
                v.r_star = v.r_lo_star.and_then(|a| self.server_star(me, a));
            }
        }
        v
    }

    fn pibs_verdict(&self, p: &PibsSpec, s: &'a SporadicServerSpec, check: Check) -> PibsVerdict {
        let runs_in_hi = check != Check::LoOnly && self.hi_candidates(p).contains(&s.id);
        let mut v = PibsVerdict {
            pibs: p.id,
            server: s.id,
            runs_in_hi,
            r_lo: self.pibs_lo(p, s),
            r_hi: None,
            r_star: None,
            r_lo_star: None,
        };
        if runs_in_hi {
            v.r_hi = self.pibs_hi(p, s);
            if check == Check::ModeChange {
                v.r_lo_star = self.pibs_lo_star(p, s);
                v.r_star = v.r_lo_star.and_then(|a| self.pibs_star(p, s, a));
            }
        }
        v
    }

    /// Cheap per-server acceptance, used by priority search. Covers the
    /// server and every PIBS that may run on its behalf.
    fn server_ok(&self, me: &'a SporadicServerSpec, check: Check) -> bool {
        if self.server_lo(me).is_none() {
            return false;
        }
        if check != Check::LoOnly && self.in_hi(me) {
            let ok = match check {
                Check::Steady => self.server_hi(me).is_some(),
                _ => self
                    .server_lo_star(me)
                    .and_then(|a| self.server_star(me, a))
                    .is_some(),
            };
            if !ok {
                return false;
            }
        }
        for p in &self.set.pibs {
            if !self.lo_candidates(p).contains(&me.id) {
                continue;
            }
            if self.pibs_lo(p, me).is_none() {
                return false;
            }
            if check != Check::LoOnly && self.hi_candidates(p).contains(&me.id) {
                let ok = match check {
                    Check::Steady => self.pibs_hi(p, me).is_some(),
                    _ => self
                        .pibs_lo_star(p, me)
                        .and_then(|a| self.pibs_star(p, me, a))
                        .is_some(),
                };
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    fn verdict(&self, test_name: &'static str, check: Check) -> AmcVerdict {
        let tasks: Vec<_> = self
            .set
            .servers
            .iter()
            .map(|s| self.task_verdict(s, check))
            .collect();
        let mut pibs = Vec::new();
        for p in &self.set.pibs {
            for sid in self.lo_candidates(p) {
                if let Some(s) = self.set.server(sid) {
                    pibs.push(self.pibs_verdict(p, s, check));
                }
            }
        }
        let need = |r_lo: Option<Time>, hi: bool, r_hi: Option<Time>, r_star: Option<Time>| {
            r_lo.is_some()
                && (!hi
                    || match check {
                        Check::LoOnly => true,
                        Check::Steady => r_hi.is_some(),
                        Check::ModeChange => r_star.is_some(),
                    })
        };
        let schedulable = tasks
            .iter()
            .all(|t| need(t.r_lo, t.runs_in_hi, t.r_hi, t.r_star))
            && pibs
                .iter()
                .all(|p| need(p.r_lo, p.runs_in_hi, p.r_hi, p.r_star));
        AmcVerdict {
            test_name,
            tasks,
            pibs,
            schedulable,
        }
    }
}

fn require_ss_only(set: &TaskSet, opts: AmcOptions) -> Result<(), ModelError> {
    if opts.model == Model::SsOnly && !set.pibs.is_empty() {
        return Err(ModelError::Unsupported(
            "SS-only analysis given a task set with PIBS",
        ));
    }
    Ok(())
}

/// LO steady state of an SS-only system (PIBS are ignored).
pub fn amc_steady_lo(set: &TaskSet) -> AmcVerdict {
    let servers_only = TaskSet::new(set.servers.clone(), Vec::new());
    Ctx {
        set: &servers_only,
        survive: false,
    }
    .verdict("AMC-LO", Check::LoOnly)
}

/// HI steady state of an SS-only system; only HI servers are reported.
pub fn amc_steady_hi(set: &TaskSet) -> AmcVerdict {
    let servers_only = TaskSet::new(set.servers.clone(), Vec::new());
    hi_only(
        Ctx {
            set: &servers_only,
            survive: false,
        }
        .verdict("AMC-HI", Check::Steady),
        "AMC-HI",
    )
}

fn hi_only(mut v: AmcVerdict, name: &'static str) -> AmcVerdict {
    v.tasks.retain(|t| t.runs_in_hi);
    v.pibs.retain(|p| p.runs_in_hi);
    v.schedulable =
        v.tasks.iter().all(|t| t.r_hi.is_some()) && v.pibs.iter().all(|p| p.r_hi.is_some());
    v.test_name = name;
    v
}

/// Steady-state analysis with PIBS in the given mode.
pub fn io_amc_steady(set: &TaskSet, mode: CritLevel, opts: AmcOptions) -> AmcVerdict {
    let ctx = Ctx {
        set,
        survive: opts.lo_tasks_survive,
    };
    match mode {
        CritLevel::Lo => ctx.verdict("IO-AMC-LO", Check::LoOnly),
        CritLevel::Hi => hi_only(ctx.verdict("IO-AMC-HI", Check::Steady), "IO-AMC-HI"),
    }
}

/// Both steady states at once: the upper bound any mode-change test can reach.
pub fn amc_ub(set: &TaskSet, opts: AmcOptions) -> Result<AmcVerdict, ModelError> {
    require_ss_only(set, opts)?;
    let name = if opts.model == Model::SsOnly {
        "AMC-UB"
    } else {
        "IO-AMC-UB"
    };
    Ok(Ctx {
        set,
        survive: opts.lo_tasks_survive,
    }
    .verdict(name, Check::Steady))
}

/// AMC-rtb for Sporadic Servers only.
pub fn amc_rtb(set: &TaskSet, opts: AmcOptions) -> Result<AmcVerdict, ModelError> {
    if !set.pibs.is_empty() {
        return Err(ModelError::Unsupported(
            "AMC-rtb given a task set with PIBS",
        ));
    }
    let name = if opts.lo_tasks_survive {
        "AMC-rtb-ext"
    } else {
        "AMC-rtb"
    };
    Ok(Ctx {
        set,
        survive: opts.lo_tasks_survive,
    }
    .verdict(name, Check::ModeChange))
}

/// IO-AMC-rtb: the mode-change bound with PIBS interference.
pub fn io_amc_rtb(set: &TaskSet, opts: AmcOptions) -> AmcVerdict {
    let name = if opts.lo_tasks_survive {
        "IO-AMC-rtb-ext"
    } else {
        "IO-AMC-rtb"
    };
    Ctx {
        set,
        survive: opts.lo_tasks_survive,
    }
    .verdict(name, Check::ModeChange)
}

/// Every schedulability test the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchedTest {
    SsRta,
    SsPibsRta,
    AmcRtb,
    AmcRtbExt,
    IoAmcRtb,
    IoAmcRtbExt,
    AmcUb,
    IoAmcUb,
}

impl SchedTest {
    pub const ALL: [SchedTest; 8] = [
        SchedTest::SsRta,
        SchedTest::SsPibsRta,
        SchedTest::AmcRtb,
        SchedTest::AmcRtbExt,
        SchedTest::IoAmcRtb,
        SchedTest::IoAmcRtbExt,
        SchedTest::AmcUb,
        SchedTest::IoAmcUb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedTest::SsRta => "SS-rta",
            SchedTest::SsPibsRta => "SS+PIBS-rta",
            SchedTest::AmcRtb => "AMC-rtb",
            SchedTest::AmcRtbExt => "AMC-rtb-ext",
            SchedTest::IoAmcRtb => "IO-AMC-rtb",
            SchedTest::IoAmcRtbExt => "IO-AMC-rtb-ext",
            SchedTest::AmcUb => "AMC-UB",
            SchedTest::IoAmcUb => "IO-AMC-UB",
        }
    }

    /// Whether the test analyses PIBS directly; the others need PIBS converted
    /// to equivalent servers first.
    pub fn uses_pibs(self) -> bool {
        matches!(
            self,
            SchedTest::SsPibsRta
                | SchedTest::IoAmcRtb
                | SchedTest::IoAmcRtbExt
                | SchedTest::IoAmcUb
        )
    }

    pub fn is_mixed_criticality(self) -> bool {
        !matches!(self, SchedTest::SsRta | SchedTest::SsPibsRta)
    }

    fn parts(self) -> (Check, bool) {
        match self {
            SchedTest::SsRta | SchedTest::SsPibsRta => (Check::LoOnly, false),
            SchedTest::AmcRtb | SchedTest::IoAmcRtb => (Check::ModeChange, false),
            SchedTest::AmcRtbExt | SchedTest::IoAmcRtbExt => (Check::ModeChange, true),
            SchedTest::AmcUb | SchedTest::IoAmcUb => (Check::Steady, false),
        }
    }

    /// Full verdict under the priorities already in `set`. Tests that do not
    /// use PIBS reject sets that contain them.
    pub fn evaluate(self, set: &TaskSet) -> Result<AmcVerdict, ModelError> {
        if !self.uses_pibs() && !set.pibs.is_empty() {
            return Err(ModelError::Unsupported(
                "test needs PIBS converted to servers",
            ));
        }
        let (check, survive) = self.parts();
        Ok(Ctx { set, survive }.verdict(self.name(), check))
    }

    pub fn accepts(self, set: &TaskSet) -> Result<bool, ModelError> {
        self.evaluate(set).map(|v| v.schedulable)
    }

    /// Acceptance of one server (and the PIBS that may serve it) at its
    /// current priority.
    pub fn server_ok(self, set: &TaskSet, server: Id) -> Result<bool, ModelError> {
        let me = set.server(server).ok_or(ModelError::UnknownId(server))?;
        let (check, survive) = self.parts();
        Ok(Ctx { set, survive }.server_ok(me, check))
    }
}

impl fmt::Display for SchedTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedTest {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = |x: &str| {
            x.chars()
                .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
                .map(|c| c.to_ascii_lowercase())
                .collect::<alloc::string::String>()
        };
        let want = norm(s);
        SchedTest::ALL
            .into_iter()
            .find(|t| norm(t.name()) == want)
            .ok_or(ModelError::InvalidParams("unknown test name"))
    }
}

/// Audsley's optimal priority assignment for `test`: fill priority levels
/// from the lowest up, at each level taking the first server (by id) that
/// passes with every still-unassigned server above it.
pub fn audsley_assign(set: &TaskSet, test: SchedTest) -> Option<TaskSet> {
    if !test.uses_pibs() && !set.pibs.is_empty() {
        return None;
    }
    let mut work = set.clone();
    let n = work.servers.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| work.servers[k].id);
    let mut unassigned = order;
    for level in (0..n as u32).rev() {
        let mut chosen = None;
        for (pos, &k) in unassigned.iter().enumerate() {
            for &other in &unassigned {
                work.servers[other].priority = 0;
            }
            work.servers[k].priority = level;
            let id = work.servers[k].id;
            if test.server_ok(&work, id).unwrap_or(false) {
                chosen = Some(pos);
                break;
            }
        }
        unassigned.remove(chosen?);
    }
    Some(work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CritLevel::*;
    use crate::time::Util;
    use alloc::vec;
    use proptest::prelude::*;

    fn u(n: u64, d: u64) -> Util {
        Util::new(n, d).unwrap()
    }

    #[test]
    fn crit_interference_examples() {
        let p = PibsSpec::new(1, u(1, 4), Hi).with_hi(u(1, 2));
        assert_eq!(
            crit_interference(16, 16, &p, Lo),
            rta::pibs_interference(16, 16, u(1, 4))
        );
        assert_eq!(
            crit_interference(16, 16, &p, Hi),
            Rational::from_integer(12)
        );
        let same = PibsSpec::new(1, u(1, 4), Hi);
        assert_eq!(
            crit_interference(40, 16, &same, Lo),
            crit_interference(40, 16, &same, Hi)
        );
        let dropped = PibsSpec::new(2, u(1, 4), Lo);
        assert_eq!(
            crit_interference(40, 16, &dropped, Hi),
            Rational::from_integer(0)
        );
    }

    #[test]
    fn steady_state_examples() {
        let app1 = TaskSet::new(
            vec![SporadicServerSpec::new(1, 100, 23, Hi).with_hi(40)],
            vec![],
        );
        assert_eq!(amc_steady_lo(&app1).task(1).unwrap().r_lo, Some(23));
        assert_eq!(amc_steady_hi(&app1).task(1).unwrap().r_hi, Some(40));

        let pair = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 100, 1, Lo),
                SporadicServerSpec::new(2, 100, 1, Lo),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        let lo = amc_steady_lo(&pair);
        assert_eq!(
            (lo.task(1).unwrap().r_lo, lo.task(2).unwrap().r_lo),
            (Some(1), Some(2))
        );
        assert!(amc_steady_hi(&pair).tasks.is_empty());
    }

    #[test]
    fn io_steady_with_single_pibs() {
        let set = TaskSet::new(
            vec![SporadicServerSpec::new(1, 16, 8, Hi).with_hi(8)],
            vec![PibsSpec::new(2, u(1, 4), Hi).with_hi(u(1, 4))],
        )
        .bind(2, 1)
        .assign_rate_monotonic();
        let opts = AmcOptions::classic(Model::SsPibs);
        let lo = io_amc_steady(&set, Lo, opts);
        let hi = io_amc_steady(&set, Hi, opts);
        assert_eq!(lo.pibs[0].r_lo, Some(15));
        assert_eq!(hi.pibs[0].r_hi, Some(15));
        // degenerate criticality: the mode-change bound equals the plain analysis
        let rtb = io_amc_rtb(&set, opts);
        assert_eq!(
            rtb.task(1).unwrap().r_star,
            rta::ss_pibs_rta(&set).response_time(1)
        );
        assert_eq!(rtb.pibs[0].r_star, Some(15));
    }

    #[test]
    fn lo_pibs_without_hi_util_is_silent_in_hi_mode() {
        let set = TaskSet::new(
            vec![SporadicServerSpec::new(1, 16, 8, Hi).with_hi(10)],
            vec![PibsSpec::new(2, u(1, 4), Lo)],
        )
        .assign_rate_monotonic();
        let hi = io_amc_steady(&set, Hi, AmcOptions::classic(Model::SsPibs));
        assert_eq!(hi.task(1).unwrap().r_hi, Some(10));
        assert!(hi.pibs.is_empty());
    }

    #[test]
    fn amc_rtb_examples() {
        let alone = TaskSet::new(
            vec![SporadicServerSpec::new(1, 100, 23, Hi).with_hi(40)],
            vec![],
        );
        let v = amc_rtb(&alone, AmcOptions::classic(Model::SsOnly)).unwrap();
        assert_eq!(v.task(1).unwrap().r_star, Some(40));
        assert_eq!(v.task(1).unwrap().r_hi, Some(40));

        // App1 over App2 by id tie under RM
        let pair = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 100, 23, Hi).with_hi(40),
                SporadicServerSpec::new(2, 100, 10, Lo),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        let v = amc_rtb(&pair, AmcOptions::classic(Model::SsOnly)).unwrap();
        assert_eq!(v.task(1).unwrap().r_star, Some(40));
        assert_eq!(v.task(2).unwrap().r_lo, Some(33));
        assert_eq!(v.task(2).unwrap().r_star, None);
        assert!(v.schedulable);

        let with_pibs = TaskSet::new(pair.servers.clone(), vec![PibsSpec::new(3, u(1, 100), Lo)]);
        assert!(amc_rtb(&with_pibs, AmcOptions::classic(Model::SsOnly)).is_err());
    }

    #[test]
    fn mode_change_counts_lo_work_up_to_the_switch() {
        // HI task below a LO task with a short period: 4 + ⌈R^LO/10⌉·3 before the
        // switch, nothing after it
        let set = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 10, 3, Lo),
                SporadicServerSpec::new(2, 50, 4, Hi).with_hi(12),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        let v = amc_rtb(&set, AmcOptions::classic(Model::SsOnly)).unwrap();
        let hi = v.task(2).unwrap();
        assert_eq!(hi.r_lo, Some(7));
        assert_eq!(hi.r_lo_star, Some(7));
        // 12 + ⌈7/10⌉·3 = 15
        assert_eq!(hi.r_star, Some(15));

        let surviving = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 10, 3, Lo).with_hi(2),
                SporadicServerSpec::new(2, 50, 4, Hi).with_hi(12),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        let v = amc_rtb(&surviving, AmcOptions::extended(Model::SsOnly)).unwrap();
        let hi = v.task(2).unwrap();
        // 12 + 3 + (⌈R/10⌉ − 1)·2: 15 → 17 → 17
        assert_eq!(hi.r_star, Some(17));
        let lo = v.task(1).unwrap();
        assert_eq!((lo.r_lo_star, lo.r_star), (Some(2), Some(2)));
    }

    #[test]
    fn lo_pibs_split_at_the_switch() {
        // LO PIBS 1/4 → 1/8 bound to the HI server; R^LO* = 15
        let set = TaskSet::new(
            vec![SporadicServerSpec::new(1, 16, 8, Hi).with_hi(9)],
            vec![PibsSpec::new(2, u(1, 4), Lo).with_hi(u(1, 8))],
        )
        .bind(2, 1)
        .assign_rate_monotonic();
        let v = io_amc_rtb(&set, AmcOptions::classic(Model::SsPibs));
        let t = v.task(1).unwrap();
        assert_eq!(t.r_lo_star, Some(15));
        // 9 + I(15, LO) + I(R − 15, HI) = 9 + 7 + (1 + ⌈(R−15)/16⌉ − 1/8)·2
        // 9 → 17.75 → 19.75 → 19.75: R* = 20 > 16
        assert_eq!(t.r_star, None);
        assert!(!v.schedulable);
        let mut roomy = set.clone();
        roomy.servers[0].period = 32;
        roomy.servers[0].deadline = 32;
        let v = io_amc_rtb(&roomy, AmcOptions::classic(Model::SsPibs));
        // R^LO* = 8 + (2 − 1/4)·32/4 = 22; R* = 9 + 14 + (1 + ⌈(R−22)/32⌉ − 1/8)·4
        // 9 → 26.5 → 30.5 → 30.5: 31
        assert_eq!(v.task(1).unwrap().r_lo_star, Some(22));
        assert_eq!(v.task(1).unwrap().r_star, Some(31));
    }

    #[test]
    fn lo_star_bounded_by_lo() {
        let set = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 20, 5, Lo).with_hi(2),
                SporadicServerSpec::new(2, 40, 6, Hi).with_hi(9),
                SporadicServerSpec::new(3, 80, 10, Lo).with_hi(4),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        let v = amc_rtb(&set, AmcOptions::extended(Model::SsOnly)).unwrap();
        for t in &v.tasks {
            if t.criticality == Hi {
                assert_eq!(t.r_lo_star, t.r_lo);
            } else {
                assert!(t.r_lo_star <= t.r_lo);
            }
        }
    }

    #[test]
    fn test_names_round_trip() {
        for t in SchedTest::ALL {
            assert_eq!(t.name().parse::<SchedTest>().unwrap(), t);
        }
        assert_eq!(
            "io amc ub".parse::<SchedTest>().unwrap(),
            SchedTest::IoAmcUb
        );
        assert!("AMC-max".parse::<SchedTest>().is_err());
    }

    #[test]
    fn audsley_single_task() {
        let set = TaskSet::new(
            vec![SporadicServerSpec::new(4, 10, 3, Hi)
                .with_hi(5)
                .with_priority(7)],
            vec![],
        );
        let got = audsley_assign(&set, SchedTest::AmcRtb).unwrap();
        assert_eq!(got.servers[0].priority, 0);
    }

    #[test]
    fn audsley_beats_rate_monotonic() {
        // The HI task has the longer period but cannot absorb the LO task's
        // interference in HI mode; Audsley puts it on top.
        let set = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 10, 5, Lo),
                SporadicServerSpec::new(2, 12, 2, Hi).with_hi(8),
            ],
            vec![],
        );
        let rm = set.clone().assign_rate_monotonic();
        assert!(!SchedTest::AmcRtb.accepts(&rm).unwrap());
        let a = audsley_assign(&set, SchedTest::AmcRtb).unwrap();
        assert!(SchedTest::AmcRtb.accepts(&a).unwrap());
        assert!(a.server(2).unwrap().priority < a.server(1).unwrap().priority);
    }

    fn arb_set() -> impl Strategy<Value = TaskSet> {
        let server = (4u64..60, 1u64..20, any::<bool>(), 1u64..30);
        let pibs = (1u64..10, any::<bool>(), 0u64..3, any::<bool>());
        (
            proptest::collection::vec(server, 1..5),
            proptest::collection::vec(pibs, 0..3),
            any::<u64>(),
        )
            .prop_map(|(servers, pibs, bind_seed)| {
                let servers: Vec<_> = servers
                    .into_iter()
                    .enumerate()
                    .map(|(i, (t, c, hi, cf))| {
                        let c = c.min(t);
                        let s = SporadicServerSpec::new(i as Id, t, c, if hi { Hi } else { Lo });
                        if hi {
                            s.with_hi((c + c * cf / 10).min(t))
                        } else if cf % 2 == 0 {
                            s.with_hi(c / 2)
                        } else {
                            s
                        }
                    })
                    .collect();
                let n = servers.len() as u64;
                let mut set = TaskSet::new(servers, Vec::new());
                for (k, (num, hi, extra, bind)) in pibs.into_iter().enumerate() {
                    let id = 100 + k as Id;
                    let p = if hi {
                        PibsSpec::new(id, u(num, 100), Hi).with_hi(u(num + extra, 100))
                    } else if extra > 0 {
                        PibsSpec::new(id, u(num + extra, 100), Lo).with_hi(u(num, 100))
                    } else {
                        PibsSpec::new(id, u(num, 100), Lo)
                    };
                    set.pibs.push(p);
                    if bind {
                        set.bindings.insert(id, ((bind_seed >> (k * 8)) % n) as Id);
                    }
                }
                set.assign_rate_monotonic()
            })
    }

    proptest! {
        #[test]
        fn rtb_implies_both_steady_states(set in arb_set()) {
            for survive in [false, true] {
                let opts = AmcOptions { lo_tasks_survive: survive, model: Model::SsPibs };
                if io_amc_rtb(&set, opts).schedulable {
                    prop_assert!(io_amc_steady(&set, Lo, opts).schedulable);
                    prop_assert!(io_amc_steady(&set, Hi, opts).schedulable);
                }
            }
        }

        #[test]
        fn star_dominates_steady_states(set in arb_set()) {
            let v = io_amc_rtb(&set, AmcOptions::classic(Model::SsPibs));
            for t in v.tasks.iter().filter(|t| t.criticality == Hi) {
                if let Some(star) = t.r_star {
                    prop_assert!(t.r_hi.is_some_and(|r| r <= star));
                    prop_assert!(t.r_lo.is_some_and(|r| r <= star));
                }
            }
        }

        #[test]
        fn survival_never_helps_hi_tasks(set in arb_set()) {
            let classic = io_amc_rtb(&set, AmcOptions::classic(Model::SsPibs));
            let ext = io_amc_rtb(&set, AmcOptions::extended(Model::SsPibs));
            for (c, e) in classic.tasks.iter().zip(&ext.tasks) {
                if c.criticality == Hi {
                    if let Some(re) = e.r_star {
                        prop_assert!(c.r_star.is_some_and(|rc| rc <= re));
                    }
                }
            }
            if ext.schedulable {
                prop_assert!(classic.schedulable);
            }
        }

        #[test]
        fn equal_budgets_collapse_to_plain_analysis(set in arb_set()) {
            let mut flat = set.clone();
            for s in &mut flat.servers {
                s.criticality = Hi;
                s.capacity_hi = Some(s.capacity_lo);
            }
            for p in &mut flat.pibs {
                p.criticality = Hi;
                p.util_hi = Some(p.util_lo);
            }
            let plain = rta::ss_pibs_rta(&flat);
            let v = io_amc_rtb(&flat, AmcOptions::classic(Model::SsPibs));
            for t in &v.tasks {
                let r = plain.response_time(t.id);
                prop_assert_eq!(t.r_lo, r);
                prop_assert_eq!(t.r_hi, r);
                prop_assert_eq!(t.r_star, r);
            }
            prop_assert_eq!(v.schedulable, plain.schedulable);
        }

        #[test]
        fn no_pibs_io_rtb_equals_amc_rtb(mut set in arb_set()) {
            set.pibs.clear();
            set.bindings.clear();
            for survive in [false, true] {
                let mut a = amc_rtb(&set, AmcOptions { lo_tasks_survive: survive, model: Model::SsOnly }).unwrap();
                let b = io_amc_rtb(&set, AmcOptions { lo_tasks_survive: survive, model: Model::SsPibs });
                a.test_name = b.test_name;
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn audsley_result_is_accepted_and_rm_success_implies_audsley(set in arb_set()) {
            for test in [SchedTest::SsPibsRta, SchedTest::IoAmcRtb, SchedTest::IoAmcRtbExt, SchedTest::IoAmcUb] {
                let found = audsley_assign(&set, test);
                if let Some(a) = &found {
                    prop_assert!(test.accepts(a).unwrap());
                    let mut prios: Vec<_> = a.servers.iter().map(|s| s.priority).collect();
                    prios.sort();
                    prop_assert_eq!(prios, (0..a.servers.len() as u32).collect::<Vec<_>>());
                }
                if test.accepts(&set).unwrap() {
                    prop_assert!(found.is_some());
                }
            }
        }
    }
}
