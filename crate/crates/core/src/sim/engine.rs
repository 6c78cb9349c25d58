use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::pibs::PibsState;
use super::queue::{PostOutcome, ReplenishmentQueue};
use super::trace::{Detail, Event, EventKind, JobRecord, ModeTrigger, Segment, SimTrace};
use super::{IrqSpec, JobSpec, SimConfig, Workload};
use crate::error::ModelError;
use crate::model::{CritLevel, Id, SporadicServerSpec, TaskSet};
use crate::time::Time;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Who {
    Server(usize),
    Pibs(usize),
}

#[derive(Clone, Copy, Debug)]
struct JobRt {
    seq: u32,
    deadline: Time,
    remaining: Time,
    record: usize,
}

#[derive(Clone, Copy, Debug)]
struct BottomRt {
    stream: u32,
    index: u32,
    remaining: Time,
    origin: usize,
    blocking: bool,
    started: bool,
}

#[derive(Clone, Copy, Debug)]
enum Work {
    Job(JobRt),
    Bottom(BottomRt),
}

impl Work {
    fn remaining(&self) -> Time {
        match self {
            Work::Job(j) => j.remaining,
            Work::Bottom(b) => b.remaining,
        }
    }

    fn remaining_mut(&mut self) -> &mut Time {
        match self {
            Work::Job(j) => &mut j.remaining,
            Work::Bottom(b) => &mut b.remaining,
        }
    }
}

struct ServerRt {
    spec: SporadicServerSpec,
    queue: ReplenishmentQueue,
    /// Has work and budget; consumption is charged to `seg_start + T`.
    active: bool,
    seg_start: Time,
    work: VecDeque<Work>,
    template: Option<JobSpec>,
    handler: Option<Who>,
    next_release: Option<Time>,
    seq: u32,
    /// Bottom halves the next job still waits for.
    io_wait: u32,
    suspended: bool,
    last_deadline: Option<Time>,
}

impl ServerRt {
    fn has_work(&self) -> bool {
        match self.work.front() {
            Some(Work::Job(_)) => self.io_wait == 0,
            Some(Work::Bottom(_)) => true,
            None => false,
        }
    }
}

struct PibsRt {
    state: PibsState,
    queue: VecDeque<BottomRt>,
    serving: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Irq {
    time: Time,
    order: u64,
    handler: Who,
    origin: usize,
    stream: u32,
    index: u32,
    b_lo: Time,
    b_hi: Time,
    blocking: bool,
}

struct Engine {
    now: Time,
    horizon: Time,
    config: SimConfig,
    mode: CritLevel,
    forced: Option<Time>,
    servers: Vec<ServerRt>,
    pibs: Vec<PibsRt>,
    irqs: BinaryHeap<Reverse<Irq>>,
    irq_order: u64,
    streams: u32,
    on_cpu: Option<Who>,
    overhead_left: Time,
    trace: SimTrace,
}

/// Simulate `set` under `workload` over `[0, horizon]`.
pub fn run(
    set: &TaskSet,
    workload: &Workload,
    horizon: Time,
    config: SimConfig,
) -> Result<SimTrace, ModelError> {
    let mut e = Engine::new(set, workload, horizon, config)?;
    loop {
        e.complete();
        if e.now >= horizon {
            e.releases_and_deadlines(true);
            break;
        }
        e.replenish();
        e.interrupts();
        e.releases_and_deadlines(false);
        e.update();
        e.dispatch();
        let next = e.next_event();
        e.advance(next);
    }
    Ok(e.finish())
}

fn validate(set: &TaskSet, workload: &Workload) -> Result<BTreeMap<Id, Who>, ModelError> {
    set.validate()?;
    let mut ids = BTreeMap::new();
    for (k, s) in set.servers.iter().enumerate() {
        ids.insert(s.id, Who::Server(k));
    }
    for (k, p) in set.pibs.iter().enumerate() {
        ids.insert(p.id, Who::Pibs(k));
    }
    let mut seen = BTreeSet::new();
    for j in &workload.jobs {
        if !matches!(ids.get(&j.ss), Some(Who::Server(_))) {
            return Err(ModelError::UnknownId(j.ss));
        }
        if !seen.insert(j.ss) {
            return Err(ModelError::InvalidWorkload(
                "more than one job spec for a server",
            ));
        }
        if j.busy == 0 {
            return Err(ModelError::InvalidWorkload("zero-length job"));
        }
        if let Some(io) = &j.io {
            if !ids.contains_key(&io.handler) {
                return Err(ModelError::UnknownId(io.handler));
            }
            if set.bindings.get(&io.handler).is_some_and(|&b| b != j.ss) {
                return Err(ModelError::InvalidWorkload(
                    "PIBS is bound to a different server",
                ));
            }
            if io.handler == j.ss {
                return Err(ModelError::InvalidWorkload(
                    "a server cannot handle its own interrupts",
                ));
            }
            if io.k == 0 || io.b_lo == 0 || io.b_hi == 0 {
                return Err(ModelError::InvalidWorkload("empty interrupt stream"));
            }
            if io.k > 1 && io.i <= io.b_lo.max(io.b_hi) {
                return Err(ModelError::InvalidWorkload(
                    "interrupt inter-arrival must exceed the bottom-half length",
                ));
            }
        }
    }
    for irq in &workload.irqs {
        if !ids.contains_key(&irq.handler) {
            return Err(ModelError::UnknownId(irq.handler));
        }
        if !matches!(ids.get(&irq.serving), Some(Who::Server(_))) {
            return Err(ModelError::UnknownId(irq.serving));
        }
        if set
            .bindings
            .get(&irq.handler)
            .is_some_and(|&b| b != irq.serving)
        {
            return Err(ModelError::InvalidWorkload(
                "PIBS is bound to a different server",
            ));
        }
        if irq.b == 0 {
            return Err(ModelError::InvalidWorkload("zero-length bottom half"));
        }
    }
    Ok(ids)
}

impl Engine {
    fn new(
        set: &TaskSet,
        workload: &Workload,
        horizon: Time,
        config: SimConfig,
    ) -> Result<Self, ModelError> {
        let ids = validate(set, workload)?;
        let templates: BTreeMap<Id, JobSpec> = workload.jobs.iter().map(|j| (j.ss, *j)).collect();
        let servers = set
            .servers
            .iter()
            .map(|s| {
                let template = templates.get(&s.id).copied();
                ServerRt {
                    spec: s.clone(),
                    queue: ReplenishmentQueue::new(s.capacity_lo, config.list_len, 0),
                    active: false,
                    seg_start: 0,
                    work: VecDeque::new(),
                    handler: template.and_then(|t| t.io).map(|io| ids[&io.handler]),
                    next_release: template.map(|t| t.offset),
                    template,
                    seq: 0,
                    io_wait: 0,
                    suspended: false,
                    last_deadline: None,
                }
            })
            .collect();
        let pibs = set
            .pibs
            .iter()
            .map(|p| PibsRt {
                state: PibsState::new(p),
                queue: VecDeque::new(),
                serving: None,
            })
            .collect();
        let mut e = Engine {
            now: 0,
            horizon,
            config,
            mode: CritLevel::Lo,
            forced: workload.mode_change_at,
            servers,
            pibs,
            irqs: BinaryHeap::new(),
            irq_order: 0,
            streams: 0,
            on_cpu: None,
            overhead_left: 0,
            trace: SimTrace {
                horizon,
                ..Default::default()
            },
        };
        for &IrqSpec {
            time,
            handler,
            serving,
            b,
        } in &workload.irqs
        {
            let Who::Server(origin) = ids[&serving] else {
                unreachable!()
            };
            e.irq_order += 1;
            e.irqs.push(Reverse(Irq {
                time,
                order: e.irq_order,
                handler: ids[&handler],
                origin,
                stream: e.streams,
                index: 0,
                b_lo: b,
                b_hi: b,
                blocking: false,
            }));
            e.streams += 1;
        }
        Ok(e)
    }

    fn id_of(&self, who: Who) -> Id {
        match who {
            Who::Server(i) => self.servers[i].spec.id,
            Who::Pibs(p) => self.pibs[p].state.id,
        }
    }

    fn emit(&mut self, kind: EventKind, subject: Option<Id>, detail: Detail) {
        self.trace.events.push(Event {
            time: self.now,
            kind,
            subject,
            detail,
        });
    }

    /// Take `who` off the processor, recording why.
    fn evict(&mut self, who: Who, kind: EventKind) {
        if self.on_cpu == Some(who) {
            let id = self.id_of(who);
            self.emit(kind, Some(id), Detail::None);
            self.on_cpu = None;
            self.overhead_left = 0;
        }
    }

    fn complete(&mut self) {
        if self.overhead_left > 0 {
            return;
        }
        match self.on_cpu {
            Some(Who::Server(i)) => {
                if self.servers[i]
                    .work
                    .front()
                    .is_some_and(|w| w.remaining() == 0)
                {
                    match self.servers[i].work.pop_front() {
                        Some(Work::Job(j)) => self.job_end(i, j),
                        Some(Work::Bottom(b)) => self.bottom_end(Who::Server(i), b),
                        None => {}
                    }
                }
            }
            Some(Who::Pibs(p)) => {
                if let Some(b) = self.pibs[p].queue.pop_front_if(|b| b.remaining == 0) {
                    self.bottom_end(Who::Pibs(p), b);
                }
            }
            None => {}
        }
    }

    fn job_end(&mut self, i: usize, j: JobRt) {
        let id = self.servers[i].spec.id;
        self.trace.jobs[j.record].finish = Some(self.now);
        self.emit(
            EventKind::JobEnd,
            Some(id),
            Detail::Job {
                seq: j.seq,
                deadline: j.deadline,
            },
        );
        let (Some(io), Some(handler)) = (
            self.servers[i].template.and_then(|t| t.io),
            self.servers[i].handler,
        ) else {
            return;
        };
        let stream = self.streams;
        self.streams += 1;
        self.emit(
            EventKind::IoInit,
            Some(id),
            Detail::Io {
                stream,
                count: io.k,
            },
        );
        if io.blocking {
            self.servers[i].io_wait += io.k;
        }
        for index in 0..io.k {
            self.irq_order += 1;
            self.irqs.push(Reverse(Irq {
                time: self.now + io.f + Time::from(index) * io.i,
                order: self.irq_order,
                handler,
                origin: i,
                stream,
                index,
                b_lo: io.b_lo,
                b_hi: io.b_hi,
                blocking: io.blocking,
            }));
        }
    }

    fn bottom_end(&mut self, handler: Who, b: BottomRt) {
        let id = self.id_of(handler);
        let serving = self.servers[b.origin].spec.id;
        self.emit(
            EventKind::BhEnd,
            Some(id),
            Detail::Bottom {
                stream: b.stream,
                index: b.index,
                serving,
            },
        );
        self.release_blocker(b);
    }

    fn release_blocker(&mut self, b: BottomRt) {
        if b.blocking {
            let s = &mut self.servers[b.origin];
            s.io_wait = s.io_wait.saturating_sub(1);
        }
    }

    fn post_server(&mut self, i: usize) {
        let s = &mut self.servers[i];
        let out: PostOutcome = s
            .queue
            .post(s.seg_start, s.spec.period, self.config.merge_policy);
        let id = s.spec.id;
        if let Some(m) = out.merged_into {
            self.emit(
                EventKind::ReplenishMerge,
                Some(id),
                Detail::Merge {
                    amount: out.merged_amount,
                    into: m.time,
                },
            );
        }
        if let Some(p) = out.posted {
            self.emit(
                EventKind::ReplenishPost,
                Some(id),
                Detail::Budget {
                    amount: p.amount,
                    at: p.time,
                },
            );
        }
    }

    fn replenish(&mut self) {
        let now = self.now;
        for i in 0..self.servers.len() {
            let s = &self.servers[i];
            let expired = now >= s.seg_start + s.spec.period;
            if s.active && (expired || s.queue.has_due_beyond_head(now)) {
                // charge what ran so far to the old activation, then start a new one
                self.post_server(i);
                let s = &mut self.servers[i];
                s.queue.activate(now);
                s.seg_start = now;
            }
        }
        for p in &mut self.pibs {
            if p.state.replenish_at.is_some_and(|t| t <= now) {
                p.state.replenish_at = None;
            }
        }
    }

    fn interrupts(&mut self) {
        while let Some(Reverse(irq)) = self.irqs.peek().copied() {
            if irq.time > self.now {
                break;
            }
            self.irqs.pop();
            let serving = self.servers[irq.origin].spec.id;
            let id = self.id_of(irq.handler);
            let detail = Detail::Bottom {
                stream: irq.stream,
                index: irq.index,
                serving,
            };
            self.emit(EventKind::IrqTop, Some(id), detail);
            let b = BottomRt {
                stream: irq.stream,
                index: irq.index,
                remaining: if self.mode == CritLevel::Lo {
                    irq.b_lo
                } else {
                    irq.b_hi
                },
                origin: irq.origin,
                blocking: irq.blocking,
                started: false,
            };
            let accepted = match irq.handler {
                Who::Server(h) if !self.servers[h].suspended => {
                    self.servers[h].work.push_back(Work::Bottom(b));
                    true
                }
                Who::Pibs(p) if self.pibs[p].state.util.is_some() => {
                    self.pibs[p].queue.push_back(b);
                    true
                }
                _ => false,
            };
            if !accepted {
                self.release_blocker(b);
            }
        }
    }

    fn releases_and_deadlines(&mut self, deadlines_only: bool) {
        let now = self.now;
        for i in 0..self.servers.len() {
            if !deadlines_only && self.servers[i].next_release == Some(now) {
                let s = &mut self.servers[i];
                if s.suspended {
                    s.next_release = None;
                } else {
                    s.seq += 1;
                    let deadline = now + s.spec.period;
                    let busy = s.template.map_or(0, |t| t.busy);
                    let job = JobRt {
                        seq: s.seq,
                        deadline,
                        remaining: busy,
                        record: self.trace.jobs.len(),
                    };
                    s.work.push_back(Work::Job(job));
                    s.next_release = Some(now + s.spec.period);
                    s.last_deadline = Some(deadline);
                    self.trace.jobs.push(JobRecord {
                        server: s.spec.id,
                        criticality: s.spec.criticality,
                        seq: job.seq,
                        release: now,
                        deadline,
                        finish: None,
                        missed: false,
                    });
                    let id = s.spec.id;
                    self.emit(
                        EventKind::Release,
                        Some(id),
                        Detail::Job {
                            seq: job.seq,
                            deadline,
                        },
                    );
                }
            }
            let id = self.servers[i].spec.id;
            let late: Vec<JobRt> = self.servers[i]
                .work
                .iter()
                .filter_map(|w| match w {
                    Work::Job(j) if j.deadline == now && j.remaining > 0 => Some(*j),
                    _ => None,
                })
                .collect();
            for j in late {
                self.trace.jobs[j.record].missed = true;
                self.emit(
                    EventKind::DeadlineMiss,
                    Some(id),
                    Detail::Miss {
                        seq: j.seq,
                        remaining: j.remaining,
                    },
                );
            }
        }
    }

    fn pending_job(&self, i: usize) -> Option<JobRt> {
        self.servers[i].work.iter().find_map(|w| match w {
            Work::Job(j) => Some(*j),
            Work::Bottom(_) => None,
        })
    }

    /// A HI server whose runnable job cannot get more budget before its deadline.
    fn overrun(&self, i: usize) -> bool {
        let s = &self.servers[i];
        if self.mode != CritLevel::Lo
            || s.spec.criticality != CritLevel::Hi
            || s.active
            || !s.has_work()
        {
            return false;
        }
        match s.work.front() {
            Some(Work::Job(j)) => {
                s.queue.available(self.now) == 0 && !s.queue.items().any(|r| r.time < j.deadline)
            }
            _ => false,
        }
    }

    fn update(&mut self) {
        let trigger = self.update_states();
        let forced = self.forced.is_some_and(|t| t <= self.now);
        if self.mode == CritLevel::Lo && (trigger.is_some() || forced) {
            let (subject, why) = trigger.unwrap_or((None, ModeTrigger::Forced));
            self.enter_hi(subject, why);
            self.update_states();
        }
    }

    fn update_states(&mut self) -> Option<(Option<Id>, ModeTrigger)> {
        let now = self.now;
        let mut trigger = None;
        for i in 0..self.servers.len() {
            let s = &self.servers[i];
            if s.active {
                if !s.has_work() {
                    self.evict(Who::Server(i), EventKind::Block);
                    self.post_server(i);
                    self.servers[i].active = false;
                } else if s.queue.available(now) == 0 {
                    self.evict(Who::Server(i), EventKind::Deplete);
                    self.post_server(i);
                    self.servers[i].active = false;
                }
            }
            let s = &mut self.servers[i];
            if !s.active && !s.suspended && s.has_work() && s.queue.available(now) > 0 {
                s.queue.activate(now);
                s.active = true;
                s.seg_start = now;
            }
            if trigger.is_none() && self.overrun(i) {
                trigger = Some((Some(self.servers[i].spec.id), ModeTrigger::ServerOverrun));
            }
        }
        for p in 0..self.pibs.len() {
            if let Some(sv) = self.pibs[p].serving {
                let st = &self.pibs[p];
                let front = st.queue.front().map(|b| b.origin);
                if st.state.run_start.is_some() {
                    let period = self.servers[sv].spec.period;
                    match front {
                        None => self.close_pibs(p, EventKind::Block, Detail::None),
                        Some(other) if other != sv => {
                            let to = self.servers[other].spec.id;
                            self.close_pibs(p, EventKind::Block, Detail::Switch { to });
                        }
                        Some(_) if st.state.remaining(period) == 0 => {
                            let hi = st.state.criticality == CritLevel::Hi;
                            self.close_pibs(p, EventKind::Deplete, Detail::None);
                            if hi && self.mode == CritLevel::Lo && trigger.is_none() {
                                trigger =
                                    Some((Some(self.pibs[p].state.id), ModeTrigger::PibsOverrun));
                            }
                        }
                        Some(_) => {}
                    }
                } else if front != Some(sv) {
                    // not started yet: follow the queue head
                    let st = &mut self.pibs[p];
                    st.serving = front;
                    st.state.serving = front.map(|k| self.servers[k].spec.id);
                }
            }
            let st = &mut self.pibs[p];
            if st.serving.is_none() && st.state.eligible(now) {
                if let Some(origin) = st.queue.front().map(|b| b.origin) {
                    st.serving = Some(origin);
                    st.state.serving = Some(self.servers[origin].spec.id);
                }
            }
        }
        trigger
    }

    fn close_pibs(&mut self, p: usize, kind: EventKind, detail: Detail) {
        if self.on_cpu == Some(Who::Pibs(p)) {
            let id = self.pibs[p].state.id;
            self.emit(kind, Some(id), detail);
            self.on_cpu = None;
            self.overhead_left = 0;
        }
        let st = &mut self.pibs[p];
        let budget = st
            .serving
            .map_or(0, |sv| st.state.budget(self.servers[sv].spec.period));
        st.serving = None;
        if let Some(at) = st.state.post() {
            let id = st.state.id;
            self.emit(
                EventKind::ReplenishPost,
                Some(id),
                Detail::Budget { amount: budget, at },
            );
        }
    }

    fn enter_hi(&mut self, subject: Option<Id>, why: ModeTrigger) {
        let now = self.now;
        self.mode = CritLevel::Hi;
        self.trace.mode_change_at = Some(now);
        self.emit(EventKind::ModeChange, subject, Detail::Mode(why));
        for i in 0..self.servers.len() {
            let spec = self.servers[i].spec.clone();
            if spec.criticality == CritLevel::Hi {
                let extra = spec.capacity(CritLevel::Hi) - spec.capacity_lo;
                self.servers[i].queue.hi_adjust(extra, now);
            } else if spec.runs_in_hi() {
                let reduced = spec.capacity_lo - spec.capacity(CritLevel::Hi);
                let deadline = match self.pending_job(i) {
                    Some(j) => j.deadline,
                    None => self.servers[i]
                        .last_deadline
                        .filter(|&d| d > now)
                        .unwrap_or(now + spec.period),
                };
                self.servers[i]
                    .queue
                    .lo_adjust(reduced, deadline, spec.period);
            } else {
                self.evict(Who::Server(i), EventKind::Deplete);
                let s = &mut self.servers[i];
                s.suspended = true;
                s.active = false;
                s.next_release = None;
                s.queue = ReplenishmentQueue::new(0, self.config.list_len, now);
                let dropped: Vec<Work> = s.work.drain(..).collect();
                for w in dropped {
                    if let Work::Bottom(b) = w {
                        self.release_blocker(b);
                    }
                }
            }
        }
        for p in 0..self.pibs.len() {
            self.pibs[p].state.enter_hi();
            if self.pibs[p].state.util.is_none() {
                self.evict(Who::Pibs(p), EventKind::Deplete);
                self.pibs[p].serving = None;
                let dropped: Vec<BottomRt> = self.pibs[p].queue.drain(..).collect();
                for b in dropped {
                    self.release_blocker(b);
                }
            } else {
                let st = &mut self.pibs[p];
                st.state.serving = st.serving.map(|k| self.servers[k].spec.id);
            }
        }
    }

    fn ready(&self, who: Who) -> Option<(u32, u8, Id)> {
        match who {
            Who::Server(i) => {
                let s = &self.servers[i];
                (s.active && !s.suspended).then_some((s.spec.priority, 1, s.spec.id))
            }
            Who::Pibs(p) => {
                let st = &self.pibs[p];
                let sv = st.serving?;
                let server = &self.servers[sv].spec;
                let runnable = !st.queue.is_empty()
                    && (st.state.run_start.is_some() || st.state.eligible(self.now))
                    && st.state.remaining(server.period) > 0;
                runnable.then_some((server.priority, 0, st.state.id))
            }
        }
    }

    fn dispatch(&mut self) {
        let candidates = (0..self.servers.len())
            .map(Who::Server)
            .chain((0..self.pibs.len()).map(Who::Pibs));
        let chosen = candidates
            .filter_map(|w| self.ready(w).map(|k| (k, w)))
            .min()
            .map(|(_, w)| w);
        let switched = chosen != self.on_cpu;
        if switched {
            if let Some(prev) = self.on_cpu {
                self.evict(prev, EventKind::Preempt);
            }
            if let Some(c) = chosen {
                let id = self.id_of(c);
                self.emit(EventKind::Dispatch, Some(id), Detail::None);
                self.overhead_left = self.config.dispatch_overhead;
            }
            self.on_cpu = chosen;
        }
        let now = self.now;
        let (handler, front) = match self.on_cpu {
            Some(Who::Pibs(p)) => {
                let st = &mut self.pibs[p];
                // the replenishment is anchored at the latest dispatch
                if switched || st.state.run_start.is_none() {
                    st.state.run_start = Some(now);
                }
                (Who::Pibs(p), st.queue.front_mut())
            }
            Some(Who::Server(i)) => match self.servers[i].work.front_mut() {
                Some(Work::Bottom(b)) => (Who::Server(i), Some(b)),
                _ => return,
            },
            None => return,
        };
        if let Some(b) = front.filter(|b| !b.started) {
            b.started = true;
            let b = *b;
            let id = self.id_of(handler);
            let serving = self.servers[b.origin].spec.id;
            self.emit(
                EventKind::BhStart,
                Some(id),
                Detail::Bottom {
                    stream: b.stream,
                    index: b.index,
                    serving,
                },
            );
        }
    }

    /// Ticks the current runner can execute before something changes.
    fn step(&self, who: Who) -> Time {
        let (budget, work) = match who {
            Who::Server(i) => {
                let s = &self.servers[i];
                (
                    s.queue.available(self.now),
                    s.work.front().map_or(0, Work::remaining),
                )
            }
            Who::Pibs(p) => {
                let st = &self.pibs[p];
                let period = st.serving.map_or(0, |sv| self.servers[sv].spec.period);
                (
                    st.state.remaining(period),
                    st.queue.front().map_or(0, |b| b.remaining),
                )
            }
        };
        let need = if self.overhead_left > 0 {
            self.overhead_left
        } else {
            work
        };
        need.min(budget)
    }

    fn next_event(&self) -> Time {
        let now = self.now;
        let mut next = self.horizon;
        let mut consider = |t: Option<Time>| {
            if let Some(t) = t.filter(|&t| t > now) {
                next = next.min(t);
            }
        };
        if let Some(who) = self.on_cpu {
            consider(Some(now + self.step(who)));
        }
        for s in &self.servers {
            if s.suspended {
                continue;
            }
            if s.has_work() || s.active {
                consider(s.queue.next_after(now));
            }
            consider(s.next_release);
            for w in &s.work {
                if let Work::Job(j) = w {
                    if j.remaining > 0 {
                        consider(Some(j.deadline));
                    }
                }
            }
        }
        for p in &self.pibs {
            if !p.queue.is_empty() {
                consider(p.state.replenish_at);
            }
        }
        consider(self.irqs.peek().map(|r| r.0.time));
        if self.mode == CritLevel::Lo {
            consider(self.forced);
        }
        next
    }

    fn advance(&mut self, next: Time) {
        let dt = next - self.now;
        if let Some(who) = self.on_cpu {
            let overhead = self.overhead_left.min(dt);
            self.overhead_left -= overhead;
            let work = dt - overhead;
            let (subject, is_pibs, serving) = match who {
                Who::Server(i) => {
                    let s = &mut self.servers[i];
                    s.queue
                        .consume(dt, self.now)
                        .expect("runner exceeded its budget");
                    if let Some(w) = s.work.front_mut() {
                        *w.remaining_mut() -= work;
                    }
                    (s.spec.id, false, s.spec.id)
                }
                Who::Pibs(p) => {
                    let st = &mut self.pibs[p];
                    st.state.consumed += dt;
                    if let Some(b) = st.queue.front_mut() {
                        b.remaining -= work;
                    }
                    (st.state.id, true, st.state.serving.unwrap_or(st.state.id))
                }
            };
            match self.trace.segments.last_mut() {
                Some(last)
                    if last.end == self.now
                        && last.subject == subject
                        && last.serving == serving =>
                {
                    last.end = next;
                }
                _ => self.trace.segments.push(Segment {
                    subject,
                    is_pibs,
                    serving,
                    start: self.now,
                    end: next,
                }),
            }
        }
        self.now = next;
    }

    fn finish(mut self) -> SimTrace {
        if let Some(who) = self.on_cpu.take() {
            let id = self.id_of(who);
            self.emit(EventKind::Preempt, Some(id), Detail::Horizon);
        }
        self.trace
    }
}
