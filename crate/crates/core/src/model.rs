//! Task-set model: Sporadic Servers, PIBS, bindings and the priority-set
//! helpers (`hp`, `hip`, and their criticality-filtered variants).

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::ModelError;
use crate::time::{Time, Util};

/// Identifier shared by servers and PIBS; unique across both.
pub type Id = u32;

/// Criticality level, `Hi > Lo`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CritLevel {
    Lo,
    Hi,
}

impl CritLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            CritLevel::Lo => "LO",
            CritLevel::Hi => "HI",
        }
    }
}

/// A Sporadic Server. Lower `priority` values are served first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SporadicServerSpec {
    pub id: Id,
    pub period: Time,
    pub deadline: Time,
    pub capacity_lo: Time,
    pub capacity_hi: Option<Time>,
    pub criticality: CritLevel,
    pub priority: u32,
}

impl SporadicServerSpec {
    /// Implicit-deadline server with priority 0; chain `with_hi`/`with_priority`.
    pub fn new(id: Id, period: Time, capacity_lo: Time, criticality: CritLevel) -> Self {
        SporadicServerSpec {
            id,
            period,
            deadline: period,
            capacity_lo,
            capacity_hi: None,
            criticality,
            priority: 0,
        }
    }

    pub fn with_hi(mut self, capacity_hi: Time) -> Self {
        self.capacity_hi = Some(capacity_hi);
        self
    }

    pub fn with_priority(mut self, priority: u32) -> Self {
        self.priority = priority;
        self
    }

    /// Budget in the given mode. A LO server without a HI budget gets 0 in HI mode.
    pub fn capacity(&self, mode: CritLevel) -> Time {
        match mode {
            CritLevel::Lo => self.capacity_lo,
            CritLevel::Hi => self.capacity_hi.unwrap_or(match self.criticality {
                CritLevel::Hi => self.capacity_lo,
                CritLevel::Lo => 0,
            }),
        }
    }

    /// `min(C(LO), C(HI))`, the budget that must be served before a LO
    /// server has met its HI-mode obligation.
    pub fn lo_star_capacity(&self) -> Time {
        match self.capacity_hi {
            Some(hi) => hi.min(self.capacity_lo),
            None => self.capacity_lo,
        }
    }

    /// Whether the server keeps running after a switch to HI mode.
    pub fn runs_in_hi(&self) -> bool {
        self.criticality == CritLevel::Hi || self.capacity_hi.is_some_and(|c| c > 0)
    }

    /// `true` if `self` is in `hp(other)`: strictly higher priority, or equal
    /// priority and a different server.
    pub fn interferes_with(&self, other: &SporadicServerSpec) -> bool {
        self.priority < other.priority || (self.priority == other.priority && self.id != other.id)
    }
}

/// A Priority-Inheritance Bandwidth-preserving Server: only a utilization per mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PibsSpec {
    pub id: Id,
    pub util_lo: Util,
    pub util_hi: Option<Util>,
    pub criticality: CritLevel,
}

impl PibsSpec {
    pub fn new(id: Id, util_lo: Util, criticality: CritLevel) -> Self {
        PibsSpec {
            id,
            util_lo,
            util_hi: None,
            criticality,
        }
    }

    pub fn with_hi(mut self, util_hi: Util) -> Self {
        self.util_hi = Some(util_hi);
        self
    }

    /// Utilization in the given mode; `None` means the PIBS does not run.
    /// A HI PIBS without an explicit HI utilization keeps its LO one.
    pub fn util(&self, mode: CritLevel) -> Option<Util> {
        match mode {
            CritLevel::Lo => Some(self.util_lo),
            CritLevel::Hi => match self.criticality {
                CritLevel::Hi => Some(self.util_hi.unwrap_or(self.util_lo)),
                CritLevel::Lo => self.util_hi,
            },
        }
    }

    /// `min(U(LO), U(HI))`, the PIBS analogue of [`SporadicServerSpec::lo_star_capacity`].
    pub fn lo_star_util(&self) -> Util {
        match self.util(CritLevel::Hi) {
            Some(hi) => hi.min(self.util_lo),
            None => self.util_lo,
        }
    }
}

/// Servers, PIBS and optional PIBS → server bindings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaskSet {
    pub servers: Vec<SporadicServerSpec>,
    pub pibs: Vec<PibsSpec>,
    pub bindings: BTreeMap<Id, Id>,
}

impl TaskSet {
    pub fn new(servers: Vec<SporadicServerSpec>, pibs: Vec<PibsSpec>) -> Self {
        TaskSet {
            servers,
            pibs,
            bindings: BTreeMap::new(),
        }
    }

    pub fn bind(mut self, pibs: Id, server: Id) -> Self {
        self.bindings.insert(pibs, server);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut ids = BTreeSet::new();
        for s in &self.servers {
            if !ids.insert(s.id) {
                return Err(ModelError::DuplicateId(s.id));
            }
            let bad = |reason| Err(ModelError::InvalidServer { id: s.id, reason });
            if s.period == 0 {
                return bad("period must be positive");
            }
            if s.deadline != s.period {
                return bad("deadline must equal period");
            }
            if s.capacity_lo == 0 || s.capacity_lo > s.period {
                return bad("C(LO) must be in [1, T]");
            }
            match (s.criticality, s.capacity_hi) {
                (CritLevel::Hi, None) => return bad("HI server needs C(HI)"),
                (CritLevel::Hi, Some(hi)) if hi < s.capacity_lo => {
                    return bad("HI server needs C(LO) <= C(HI)")
                }
                (CritLevel::Lo, Some(hi)) if hi > s.capacity_lo => {
                    return bad("LO server needs C(HI) <= C(LO)")
                }
                _ => {}
            }
        }
        for p in &self.pibs {
            if !ids.insert(p.id) {
                return Err(ModelError::DuplicateId(p.id));
            }
            match (p.criticality, p.util_hi) {
                (CritLevel::Hi, Some(hi)) if hi < p.util_lo => {
                    return Err(ModelError::InvalidPibs {
                        id: p.id,
                        reason: "HI PIBS needs U(LO) <= U(HI)",
                    })
                }
                (CritLevel::Lo, Some(hi)) if hi > p.util_lo => {
                    return Err(ModelError::InvalidPibs {
                        id: p.id,
                        reason: "LO PIBS needs U(HI) <= U(LO)",
                    })
                }
                _ => {}
            }
        }
        for (&p, &s) in &self.bindings {
            if !self.pibs.iter().any(|x| x.id == p) {
                return Err(ModelError::UnknownId(p));
            }
            if self.server(s).is_none() {
                return Err(ModelError::UnknownId(s));
            }
        }
        Ok(())
    }

    pub fn server(&self, id: Id) -> Option<&SporadicServerSpec> {
        self.servers.iter().find(|s| s.id == id)
    }

    pub fn pibs_by_id(&self, id: Id) -> Option<&PibsSpec> {
        self.pibs.iter().find(|p| p.id == id)
    }

    fn require(&self, id: Id) -> Result<&SporadicServerSpec, ModelError> {
        self.server(id).ok_or(ModelError::UnknownId(id))
    }

    fn sorted(&self, mut v: Vec<&SporadicServerSpec>) -> Vec<Id> {
        v.sort_by_key(|s| (s.priority, s.id));
        v.into_iter().map(|s| s.id).collect()
    }

    /// Servers of equal or higher priority than `i`, excluding `i`.
    pub fn hp(&self, i: Id) -> Result<Vec<Id>, ModelError> {
        let me = self.require(i)?;
        Ok(self.sorted(
            self.servers
                .iter()
                .filter(|s| s.interferes_with(me))
                .collect(),
        ))
    }

    /// `hp(i) ∪ {i}`.
    pub fn hip(&self, i: Id) -> Result<Vec<Id>, ModelError> {
        let me = self.require(i)?;
        Ok(self.sorted(
            self.servers
                .iter()
                .filter(|s| s.id == i || s.interferes_with(me))
                .collect(),
        ))
    }

    fn hp_filtered(&self, i: Id, level: CritLevel) -> Result<Vec<Id>, ModelError> {
        let me = self.require(i)?;
        Ok(self.sorted(
            self.servers
                .iter()
                .filter(|s| s.criticality == level && s.interferes_with(me))
                .collect(),
        ))
    }

    pub fn hp_hi(&self, i: Id) -> Result<Vec<Id>, ModelError> {
        self.hp_filtered(i, CritLevel::Hi)
    }

    pub fn hp_lo(&self, i: Id) -> Result<Vec<Id>, ModelError> {
        self.hp_filtered(i, CritLevel::Lo)
    }

    /// `hpH(i) ∪ {i}`; always contains `i`.
    pub fn hip_hi(&self, i: Id) -> Result<Vec<Id>, ModelError> {
        let me = self.require(i)?;
        Ok(self.sorted(
            self.servers
                .iter()
                .filter(|s| s.id == i || (s.criticality == CritLevel::Hi && s.interferes_with(me)))
                .collect(),
        ))
    }

    /// `hpL(i)`, plus `i` itself only when `i` is LO.
    pub fn hip_lo(&self, i: Id) -> Result<Vec<Id>, ModelError> {
        let me = self.require(i)?;
        Ok(self.sorted(
            self.servers
                .iter()
                .filter(|s| s.criticality == CritLevel::Lo && (s.id == i || s.interferes_with(me)))
                .collect(),
        ))
    }

    /// Rate-monotonic priorities: ascending period, ties by ascending id.
    pub fn assign_rate_monotonic(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.servers.len()).collect();
        order.sort_by_key(|&k| (self.servers[k].period, self.servers[k].id));
        for (prio, k) in order.into_iter().enumerate() {
            self.servers[k].priority = prio as u32;
        }
        self
    }

    /// Servers a PIBS may run on behalf of. A binding pins it to one server;
    /// otherwise every server is a candidate, or only HI servers when `hi_only`.
    pub fn pibs_candidates(&self, pibs: Id, hi_only: bool) -> Vec<Id> {
        match self.bindings.get(&pibs) {
            Some(&s) => alloc::vec![s],
            None => self
                .servers
                .iter()
                .filter(|s| !hi_only || s.criticality == CritLevel::Hi)
                .map(|s| s.id)
                .collect(),
        }
    }

    /// Sum of `C(LO)/T` over servers plus `U(LO)` over PIBS, as a float.
    pub fn utilization_lo(&self) -> f64 {
        let s: f64 = self
            .servers
            .iter()
            .map(|s| s.capacity_lo as f64 / s.period as f64)
            .sum();
        let p: f64 = self.pibs.iter().map(|p| p.util_lo.to_f64()).sum();
        s + p
    }
}
