//! Fixed-priority response-time analysis for Sporadic Servers, with and
//! without PIBS interference.

use alloc::vec::Vec;

use crate::model::{Id, PibsSpec, SporadicServerSpec, TaskSet};
use crate::time::{ceil_div, ceil_ratio, time_ratio, Rational, Time, Util};

/// Least fixed point of `recurrence`, iterated from `const_term`.
///
/// Returns `None` as soon as the iterate exceeds `deadline`. The recurrence
/// must be monotone and satisfy `recurrence(const_term) >= const_term`.
pub fn fixed_point<F>(const_term: Time, mut recurrence: F, deadline: Time) -> Option<Time>
where
    F: FnMut(Time) -> Time,
{
    let mut r = const_term;
    loop {
        if r > deadline {
            return None;
        }
        let next = recurrence(r);
        if next == r {
            return Some(r);
        }
        debug_assert!(next > r, "recurrence is not monotone at {r}");
        r = next;
    }
}

/// Interference bound of a PIBS with utilization `util` running on behalf of
/// a server with period `period`, over a window of length `t`:
/// `(1 + ⌈t/T⌉ − U) · T · U`, exact.
pub fn pibs_interference(t: Time, period: Time, util: Util) -> Rational {
    let releases = ceil_div(t, period) as u128;
    let (p, d) = (util.numer() as u128, util.denom() as u128);
    Rational::new(((1 + releases) * d - p) * period as u128 * p, d * d)
}

/// Maximum execution a PIBS can accumulate in one window of its server's
/// period: `(2 − U) · U · T`.
pub fn pibs_window_bound(period: Time, util: Util) -> Rational {
    pibs_interference(period, period, util)
}

/// One response-time recurrence, assembled from the terms that appear in
/// the SS, PIBS, AMC and IO-AMC equations.
#[derive(Clone, Debug, Default)]
pub(crate) struct Equation {
    base: Rational,
    fixed: Rational,
    /// `⌈R/T⌉·C`
    periodic: Vec<(Time, Time)>,
    /// `(⌈R/T⌉ − ⌈anchor/T⌉)·C`
    after_anchor: Vec<(Time, Time)>,
    /// `max_q I(R, T_q, U)`
    pibs_full: Vec<(Vec<Time>, Util)>,
    /// `max_q I(R − anchor, T_q, U)`
    pibs_after: Vec<(Vec<Time>, Util)>,
    anchor: Time,
}

fn max_interference(t: Time, periods: &[Time], util: Util) -> Rational {
    periods
        .iter()
        .map(|&q| pibs_interference(t, q, util))
        .max()
        .unwrap_or_default()
}

impl Equation {
    pub(crate) fn new(base: Rational) -> Self {
        Equation {
            base,
            ..Default::default()
        }
    }

    pub(crate) fn anchored(mut self, anchor: Time) -> Self {
        self.anchor = anchor;
        self
    }

    pub(crate) fn periodic(&mut self, period: Time, cap: Time) {
        if cap > 0 {
            self.periodic.push((period, cap));
        }
    }

    /// `⌈anchor/T⌉·C`, evaluated once.
    pub(crate) fn periodic_at_anchor(&mut self, period: Time, cap: Time) {
        self.fixed += time_ratio(ceil_div(self.anchor, period) * cap);
    }

    pub(crate) fn after_anchor(&mut self, period: Time, cap: Time) {
        if cap > 0 {
            self.after_anchor.push((period, cap));
        }
    }

    pub(crate) fn pibs(&mut self, periods: Vec<Time>, util: Option<Util>) {
        if let Some(u) = util {
            if !periods.is_empty() {
                self.pibs_full.push((periods, u));
            }
        }
    }

    /// `max_q I(anchor, T_q, U)`, evaluated once.
    pub(crate) fn pibs_at_anchor(&mut self, periods: &[Time], util: Option<Util>) {
        if let Some(u) = util {
            self.fixed += max_interference(self.anchor, periods, u);
        }
    }

    pub(crate) fn pibs_after_anchor(&mut self, periods: Vec<Time>, util: Option<Util>) {
        if let Some(u) = util {
            if !periods.is_empty() {
                self.pibs_after.push((periods, u));
            }
        }
    }

    pub(crate) fn eval(&self, r: Time) -> Time {
        let mut whole: Time = 0;
        for &(t, c) in &self.periodic {
            whole += ceil_div(r, t) * c;
        }
        for &(t, c) in &self.after_anchor {
            whole += ceil_div(r, t).saturating_sub(ceil_div(self.anchor, t)) * c;
        }
        let mut sum = self.base + self.fixed + time_ratio(whole);
        for (periods, u) in &self.pibs_full {
            sum += max_interference(r, periods, *u);
        }
        let since = r.saturating_sub(self.anchor);
        for (periods, u) in &self.pibs_after {
            sum += max_interference(since, periods, *u);
        }
        ceil_ratio(&sum)
    }

    pub(crate) fn solve(&self, deadline: Time) -> Option<Time> {
        fixed_point(ceil_ratio(&self.base), |r| self.eval(r), deadline)
    }
}

/// Periods of the servers in `window` on whose behalf `pibs` may run.
pub(crate) fn candidate_periods<'a, I>(set: &TaskSet, pibs: &PibsSpec, window: I) -> Vec<Time>
where
    I: IntoIterator<Item = &'a SporadicServerSpec>,
{
    let bound = set.bindings.get(&pibs.id).copied();
    window
        .into_iter()
        .filter(|s| bound.is_none_or(|b| b == s.id))
        .map(|s| s.period)
        .collect()
}

pub(crate) fn hp_of<'a>(
    set: &'a TaskSet,
    me: &'a SporadicServerSpec,
) -> impl Iterator<Item = &'a SporadicServerSpec> + Clone + 'a {
    set.servers.iter().filter(move |s| s.interferes_with(me))
}

pub(crate) fn hip_of<'a>(
    set: &'a TaskSet,
    me: &'a SporadicServerSpec,
) -> impl Iterator<Item = &'a SporadicServerSpec> + Clone + 'a {
    set.servers
        .iter()
        .filter(move |s| s.id == me.id || s.interferes_with(me))
}

/// Response time of one PIBS analysed on one candidate server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PibsResponse {
    pub pibs: Id,
    pub server: Id,
    pub response_time: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RtaResult {
    /// `(server, R)`; `None` when the iteration passed the deadline.
    pub servers: Vec<(Id, Option<Time>)>,
    pub pibs: Vec<PibsResponse>,
    pub schedulable: bool,
}

impl RtaResult {
    pub fn response_time(&self, server: Id) -> Option<Time> {
        self.servers
            .iter()
            .find(|(id, _)| *id == server)
            .and_then(|(_, r)| *r)
    }

    fn from_parts(servers: Vec<(Id, Option<Time>)>, pibs: Vec<PibsResponse>) -> Self {
        let schedulable = servers.iter().all(|(_, r)| r.is_some())
            && pibs.iter().all(|p| p.response_time.is_some());
        RtaResult {
            servers,
            pibs,
            schedulable,
        }
    }
}

/// `R_i = C_i + Σ_{hp(i)} ⌈R_i/T_j⌉ C_j`, PIBS ignored.
pub fn ss_response(set: &TaskSet, me: &SporadicServerSpec) -> Option<Time> {
    let mut eq = Equation::new(time_ratio(me.capacity_lo));
    for j in hp_of(set, me) {
        eq.periodic(j.period, j.capacity_lo);
    }
    eq.solve(me.deadline)
}

/// Server response time with PIBS interference maximised over `hip(i)`.
pub fn ss_pibs_response(set: &TaskSet, me: &SporadicServerSpec) -> Option<Time> {
    let mut eq = Equation::new(time_ratio(me.capacity_lo));
    for j in hp_of(set, me) {
        eq.periodic(j.period, j.capacity_lo);
    }
    for k in &set.pibs {
        eq.pibs(candidate_periods(set, k, hip_of(set, me)), Some(k.util_lo));
    }
    eq.solve(me.deadline)
}

/// `_sR_p`: response time of PIBS `p` while serving `s`.
pub fn pibs_response(set: &TaskSet, p: &PibsSpec, s: &SporadicServerSpec) -> Option<Time> {
    let mut eq = Equation::new(pibs_window_bound(s.period, p.util_lo));
    for j in hip_of(set, s) {
        eq.periodic(j.period, j.capacity_lo);
    }
    for k in set.pibs.iter().filter(|k| k.id != p.id) {
        eq.pibs(candidate_periods(set, k, hip_of(set, s)), Some(k.util_lo));
    }
    eq.solve(s.deadline)
}

/// Response-time analysis of a system of Sporadic Servers only.
pub fn ss_rta(set: &TaskSet) -> RtaResult {
    let servers = set
        .servers
        .iter()
        .map(|s| (s.id, ss_response(set, s)))
        .collect();
    RtaResult::from_parts(servers, Vec::new())
}

/// Response-time analysis of Sporadic Servers and PIBS. Every PIBS is
/// analysed against each server it may serve: its bound server, or all of them.
pub fn ss_pibs_rta(set: &TaskSet) -> RtaResult {
    let servers = set
        .servers
        .iter()
        .map(|s| (s.id, ss_pibs_response(set, s)))
        .collect();
    let mut pibs = Vec::new();
    for p in &set.pibs {
        for sid in set.pibs_candidates(p.id, false) {
            if let Some(s) = set.server(sid) {
                pibs.push(PibsResponse {
                    pibs: p.id,
                    server: sid,
                    response_time: pibs_response(set, p, s),
                });
            }
        }
    }
    RtaResult::from_parts(servers, pibs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CritLevel::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn quarter() -> Util {
        Util::new(1, 4).unwrap()
    }

    #[test]
    fn fixed_point_examples() {
        assert_eq!(fixed_point(8, |_| 8, 16), Some(8));
        assert_eq!(fixed_point(4, |r| 4 + ceil_div(r, 16) * 8, 32), Some(12));
        assert_eq!(fixed_point(20, |r| r, 16), None);
    }

    #[test]
    fn interference_examples() {
        assert_eq!(
            pibs_interference(16, 16, quarter()),
            Rational::from_integer(7)
        );
        assert_eq!(
            pibs_interference(0, 10, Util::new(1, 2).unwrap()),
            Rational::new(5, 2)
        );
        assert_eq!(
            pibs_interference(17, 16, quarter()),
            Rational::from_integer(11)
        );
    }

    #[test]
    fn ss_rta_examples() {
        let one = TaskSet::new(vec![SporadicServerSpec::new(1, 16, 8, Lo)], vec![])
            .assign_rate_monotonic();
        assert_eq!(ss_rta(&one).response_time(1), Some(8));

        let two = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 16, 8, Lo),
                SporadicServerSpec::new(2, 32, 4, Lo),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        let r = ss_rta(&two);
        assert_eq!(r.response_time(2), Some(12));
        assert!(r.schedulable);

        // 9 -> 17 -> 25 -> 25: tau1 runs [0,8) and [16,24), tau2 finishes at 25
        let tight = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 16, 8, Lo),
                SporadicServerSpec::new(2, 32, 9, Lo),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        assert_eq!(ss_rta(&tight).response_time(2), Some(25));

        let over = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 16, 8, Lo),
                SporadicServerSpec::new(2, 32, 17, Lo),
            ],
            vec![],
        )
        .assign_rate_monotonic();
        let r = ss_rta(&over);
        assert_eq!(r.response_time(2), None);
        assert!(!r.schedulable);
    }

    fn single_with_pibs() -> TaskSet {
        TaskSet::new(
            vec![SporadicServerSpec::new(1, 16, 8, Hi).with_hi(8)],
            vec![PibsSpec::new(2, quarter(), Hi)],
        )
        .bind(2, 1)
        .assign_rate_monotonic()
    }

    #[test]
    fn ss_pibs_examples() {
        let r = ss_pibs_rta(&single_with_pibs());
        assert_eq!(r.response_time(1), Some(15));
        assert_eq!(
            r.pibs,
            vec![PibsResponse {
                pibs: 2,
                server: 1,
                response_time: Some(15)
            }]
        );
        assert!(r.schedulable);
    }

    #[test]
    fn unbound_pibs_checks_every_server() {
        let mut set = single_with_pibs();
        set.bindings.clear();
        set.servers.push(SporadicServerSpec::new(3, 64, 4, Lo));
        let set = set.assign_rate_monotonic();
        let r = ss_pibs_rta(&set);
        let servers: Vec<_> = r.pibs.iter().map(|p| p.server).collect();
        assert_eq!(servers, vec![1, 3]);
    }

    #[test]
    fn binding_limits_interference_to_bound_priority() {
        // PIBS bound to the low-priority server cannot interfere with the high one
        let set = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 16, 8, Lo),
                SporadicServerSpec::new(3, 64, 4, Lo),
            ],
            vec![PibsSpec::new(2, quarter(), Lo)],
        )
        .bind(2, 3)
        .assign_rate_monotonic();
        assert_eq!(ss_pibs_rta(&set).response_time(1), Some(8));
    }

    #[test]
    fn vanishing_pibs_approaches_ss_only() {
        let tiny = Util::new(1, 1_000_000).unwrap();
        let mut set = TaskSet::new(
            vec![
                SporadicServerSpec::new(1, 16, 8, Lo),
                SporadicServerSpec::new(2, 32, 4, Lo),
            ],
            vec![PibsSpec::new(3, tiny, Lo)],
        )
        .assign_rate_monotonic();
        // any positive interference costs at most the one tick lost to rounding
        let with = ss_pibs_rta(&set);
        let without = ss_rta(&set);
        for ((_, a), (_, b)) in with.servers.iter().zip(&without.servers) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!(b <= a && a <= b + 1, "{a} vs {b}");
        }
        set.pibs.clear();
        assert_eq!(ss_pibs_rta(&set), without);
    }

    proptest! {
        #[test]
        fn window_bound_identity(n in 1u64..1000, extra in 0u64..1000, period in 1u64..100_000) {
            let u = Util::new(n, n + extra).unwrap();
            let two_minus_u = Rational::from_integer(2) - u.as_rational();
            prop_assert_eq!(pibs_window_bound(period, u), two_minus_u * u.as_rational() * time_ratio(period));
        }

        #[test]
        fn response_monotone_in_capacity_and_util(
            caps in proptest::collection::vec((1u64..6, 0u64..3), 3),
            periods in proptest::collection::vec(8u64..40, 3),
            un in 1u64..8, bump in 1u64..4,
        ) {
            let servers: Vec<_> = caps.iter().zip(&periods).enumerate()
                .map(|(i, (&(c, _), &t))| SporadicServerSpec::new(i as Id, t, c.min(t), Lo))
                .collect();
            let base = TaskSet::new(servers, vec![PibsSpec::new(9, Util::new(un, 40).unwrap(), Lo)])
                .assign_rate_monotonic();
            let before = ss_pibs_rta(&base);
            for (i, &(_, dc)) in caps.iter().enumerate() {
                let mut more = base.clone();
                let s = &mut more.servers[i];
                s.capacity_lo = (s.capacity_lo + dc).min(s.period);
                more.pibs[0].util_lo = Util::new(un + bump, 40).unwrap();
                let after = ss_pibs_rta(&more);
                for ((_, a), (_, b)) in before.servers.iter().zip(&after.servers) {
                    match (a, b) {
                        (Some(a), Some(b)) => prop_assert!(b >= a),
                        (None, Some(_)) => prop_assert!(false, "response improved"),
                        _ => {}
                    }
                }
            }
        }
    }
}
