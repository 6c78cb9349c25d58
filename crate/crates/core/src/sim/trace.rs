//! Simulation trace: events, executed segments, job records, and checkers
//! for the properties every trace must satisfy.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{CritLevel, Id};
use crate::time::Time;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Release,
    Dispatch,
    Preempt,
    Block,
    Deplete,
    ReplenishPost,
    ReplenishMerge,
    IoInit,
    IrqTop,
    BhStart,
    BhEnd,
    ModeChange,
    JobEnd,
    DeadlineMiss,
}

impl EventKind {
    pub const ALL: [EventKind; 14] = [
        EventKind::Release,
        EventKind::Dispatch,
        EventKind::Preempt,
        EventKind::Block,
        EventKind::Deplete,
        EventKind::ReplenishPost,
        EventKind::ReplenishMerge,
        EventKind::IoInit,
        EventKind::IrqTop,
        EventKind::BhStart,
        EventKind::BhEnd,
        EventKind::ModeChange,
        EventKind::JobEnd,
        EventKind::DeadlineMiss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Release => "RELEASE",
            EventKind::Dispatch => "DISPATCH",
            EventKind::Preempt => "PREEMPT",
            EventKind::Block => "BLOCK",
            EventKind::Deplete => "DEPLETE",
            EventKind::ReplenishPost => "REPLENISH_POST",
            EventKind::ReplenishMerge => "REPLENISH_MERGE",
            EventKind::IoInit => "IO_INIT",
            EventKind::IrqTop => "IRQ_TOP",
            EventKind::BhStart => "BH_START",
            EventKind::BhEnd => "BH_END",
            EventKind::ModeChange => "MODE_CHANGE",
            EventKind::JobEnd => "JOB_END",
            EventKind::DeadlineMiss => "DEADLINE_MISS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Ends the execution interval opened by the last `Dispatch` of the subject.
    pub fn closes_dispatch(self) -> bool {
        matches!(
            self,
            EventKind::Preempt | EventKind::Block | EventKind::Deplete
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why the system left LO mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeTrigger {
    /// A HI server ran out of budget before its deadline with its job unfinished.
    ServerOverrun,
    /// A HI PIBS ran out of budget with bottom-half work pending.
    PibsOverrun,
    /// Requested by the workload.
    Forced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detail {
    None,
    Job {
        seq: u32,
        deadline: Time,
    },
    Budget {
        amount: Time,
        at: Time,
    },
    Merge {
        amount: Time,
        into: Time,
    },
    Io {
        stream: u32,
        count: u32,
    },
    Bottom {
        stream: u32,
        index: u32,
        serving: Id,
    },
    Mode(ModeTrigger),
    Miss {
        seq: u32,
        remaining: Time,
    },
    Switch {
        to: Id,
    },
    Horizon,
}

impl fmt::Display for Detail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Detail::None => Ok(()),
            Detail::Job { seq, deadline } => write!(f, "job={seq} deadline={deadline}"),
            Detail::Budget { amount, at } => write!(f, "amount={amount} at={at}"),
            Detail::Merge { amount, into } => write!(f, "amount={amount} into={into}"),
            Detail::Io { stream, count } => write!(f, "stream={stream} count={count}"),
            Detail::Bottom {
                stream,
                index,
                serving,
            } => {
                write!(f, "stream={stream} index={index} serving={serving}")
            }
            Detail::Mode(ModeTrigger::ServerOverrun) => f.write_str("trigger=server"),
            Detail::Mode(ModeTrigger::PibsOverrun) => f.write_str("trigger=pibs"),
            Detail::Mode(ModeTrigger::Forced) => f.write_str("trigger=forced"),
            Detail::Miss { seq, remaining } => write!(f, "job={seq} remaining={remaining}"),
            Detail::Switch { to } => write!(f, "switch={to}"),
            Detail::Horizon => f.write_str("horizon"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: Time,
    pub kind: EventKind,
    /// Server or PIBS id; `None` for a forced mode change.
    pub subject: Option<Id>,
    pub detail: Detail,
}

/// A maximal interval during which one subject held the processor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub subject: Id,
    pub is_pibs: bool,
    /// For a PIBS, the server it ran on behalf of; otherwise the subject.
    pub serving: Id,
    pub start: Time,
    pub end: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JobRecord {
    pub server: Id,
    pub criticality: CritLevel,
    pub seq: u32,
    pub release: Time,
    pub deadline: Time,
    pub finish: Option<Time>,
    pub missed: bool,
}

impl JobRecord {
    pub fn response_time(&self) -> Option<Time> {
        self.finish.map(|f| f - self.release)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimTrace {
    pub events: Vec<Event>,
    pub segments: Vec<Segment>,
    pub jobs: Vec<JobRecord>,
    pub mode_change_at: Option<Time>,
    pub horizon: Time,
}

impl SimTrace {
    pub fn misses(&self) -> impl Iterator<Item = &JobRecord> {
        self.jobs.iter().filter(|j| j.missed)
    }

    pub fn hi_misses(&self) -> usize {
        self.misses()
            .filter(|j| j.criticality == CritLevel::Hi)
            .count()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Worst observed response time of each server's completed jobs.
    pub fn worst_response(&self) -> BTreeMap<Id, Time> {
        let mut out = BTreeMap::new();
        for j in &self.jobs {
            if let Some(r) = j.response_time() {
                let e = out.entry(j.server).or_insert(0);
                *e = r.max(*e);
            }
        }
        out
    }

    /// Ticks executed by `subject` (optionally only on behalf of `serving`) in `[from, to)`.
    pub fn executed(&self, subject: Id, serving: Option<Id>, from: Time, to: Time) -> Time {
        self.segments
            .iter()
            .filter(|s| s.subject == subject && serving.is_none_or(|v| v == s.serving))
            .map(|s| s.end.min(to).saturating_sub(s.start.max(from)))
            .sum()
    }

    /// Largest execution of `subject` on behalf of `serving` over any window of
    /// length `window`. The maximum is attained by a window starting at some
    /// segment start.
    pub fn max_window_execution(&self, subject: Id, serving: Option<Id>, window: Time) -> Time {
        let segs: Vec<&Segment> = self
            .segments
            .iter()
            .filter(|s| s.subject == subject && serving.is_none_or(|v| v == s.serving))
            .collect();
        let mut best = 0;
        let mut hi = 0;
        let mut sum_full = 0;
        for lo in 0..segs.len() {
            let from = segs[lo].start;
            let to = from + window;
            if hi < lo {
                hi = lo;
                sum_full = 0;
            }
            while hi < segs.len() && segs[hi].end <= to {
                sum_full += segs[hi].end - segs[hi].start;
                hi += 1;
            }
            let partial = segs
                .get(hi)
                .map_or(0, |s| to.saturating_sub(s.start).min(s.end - s.start));
            best = best.max(sum_full + partial);
            if hi > lo {
                sum_full -= segs[lo].end - segs[lo].start;
            }
        }
        best
    }

    /// Structural checks: times non-decreasing, dispatches properly closed,
    /// at most one mode change, at most one subject running at a time.
    pub fn check_well_formed(&self) -> Result<(), String> {
        use alloc::format;
        let mut last = 0;
        let mut open: Option<Id> = None;
        let mut modes = 0;
        for e in &self.events {
            if e.time < last {
                return Err(format!("time goes backwards at {}", e.time));
            }
            last = e.time;
            match e.kind {
                EventKind::Dispatch => {
                    if let Some(o) = open {
                        return Err(format!(
                            "dispatch of {:?} at {} while {o} runs",
                            e.subject, e.time
                        ));
                    }
                    open = e.subject;
                }
                k if k.closes_dispatch() => {
                    if open == e.subject {
                        open = None;
                    } else if k == EventKind::Preempt {
                        return Err(format!(
                            "preempt of {:?} at {} which is not running",
                            e.subject, e.time
                        ));
                    }
                }
                EventKind::ModeChange => modes += 1,
                _ => {}
            }
        }
        if open.is_some() {
            return Err(format!("dispatch of {open:?} never closed"));
        }
        if modes > 1 {
            return Err(format!("{modes} mode changes"));
        }
        for w in self.segments.windows(2) {
            if w[1].start < w[0].end {
                return Err(format!("overlapping segments at {}", w[1].start));
            }
        }
        Ok(())
    }
}
