//! Bounded Sporadic Server replenishment list and the mode-change
//! adjustments for HI and LO servers.

use alloc::collections::VecDeque;

use crate::error::ModelError;
use crate::time::Time;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplenishmentItem {
    pub time: Time,
    pub amount: Time,
}

/// What to do when a post finds the list full.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MergePolicy {
    /// Fold the head's unused remainder into the next item, freeing a slot.
    #[default]
    MergeNext,
    /// Add the posted amount to the last item, at the later of the two times.
    MergeTail,
}

/// Effects of a post, for tracing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PostOutcome {
    pub posted: Option<ReplenishmentItem>,
    /// The item that absorbed budget because the list was full.
    pub merged_into: Option<ReplenishmentItem>,
    pub merged_amount: Time,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplenishmentQueue {
    items: VecDeque<ReplenishmentItem>,
    max_len: usize,
    /// Budget consumed from the head since the server became active.
    pub usage: Time,
}

impl ReplenishmentQueue {
    /// A full budget available from `at`.
    pub fn new(capacity: Time, max_len: usize, at: Time) -> Self {
        let mut items = VecDeque::with_capacity(max_len);
        if capacity > 0 {
            items.push_back(ReplenishmentItem {
                time: at,
                amount: capacity,
            });
        }
        ReplenishmentQueue {
            items,
            max_len: max_len.max(1),
            usage: 0,
        }
    }

    pub fn from_items(items: &[ReplenishmentItem], max_len: usize) -> Self {
        ReplenishmentQueue {
            items: items.iter().copied().collect(),
            max_len: max_len.max(1),
            usage: 0,
        }
    }

    pub fn items(&self) -> impl Iterator<Item = &ReplenishmentItem> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.max_len
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn head(&self) -> Option<&ReplenishmentItem> {
        self.items.front()
    }

    /// Outstanding budget, including what is already consumed from the head.
    pub fn total(&self) -> Time {
        self.items.iter().map(|r| r.amount).sum()
    }

    /// Budget usable at `now`.
    pub fn available(&self, now: Time) -> Time {
        let due: Time = self
            .items
            .iter()
            .take_while(|r| r.time <= now)
            .map(|r| r.amount)
            .sum();
        due.saturating_sub(self.usage)
    }

    /// Earliest item time strictly after `now`.
    pub fn next_after(&self, now: Time) -> Option<Time> {
        self.items.iter().map(|r| r.time).find(|&t| t > now)
    }

    pub fn has_due_beyond_head(&self, now: Time) -> bool {
        self.items.get(1).is_some_and(|r| r.time <= now)
    }

    /// The server becomes active at `now`: every due item is folded into the
    /// head, whose time becomes `now`.
    pub fn activate(&mut self, now: Time) {
        debug_assert_eq!(self.usage, 0);
        let mut amount = 0;
        while self.items.front().is_some_and(|r| r.time <= now) {
            amount += self.items.pop_front().map_or(0, |r| r.amount);
        }
        if amount > 0 {
            self.items
                .push_front(ReplenishmentItem { time: now, amount });
        }
    }

    pub fn consume(&mut self, ticks: Time, now: Time) -> Result<(), ModelError> {
        if ticks > self.available(now) {
            return Err(ModelError::Infeasible(
                "consumed more than the available budget",
            ));
        }
        self.usage += ticks;
        Ok(())
    }

    /// Return the consumed budget at `start + period`.
    pub fn post(&mut self, start: Time, period: Time, policy: MergePolicy) -> PostOutcome {
        let amount = core::mem::take(&mut self.usage);
        let mut out = PostOutcome::default();
        if amount == 0 {
            return out;
        }
        if let Some(head) = self.items.front_mut() {
            head.amount -= amount;
            if head.amount == 0 {
                self.items.pop_front();
            }
        }
        let item = ReplenishmentItem {
            time: start + period,
            amount,
        };
        if self.is_full() {
            let head_unused = self.items.front().is_some_and(|r| r.time <= start);
            if policy == MergePolicy::MergeNext && head_unused && self.items.len() > 1 {
                let rest = self.items.pop_front().unwrap();
                let next = &mut self.items[0];
                next.amount += rest.amount;
                out.merged_into = Some(*next);
                out.merged_amount = rest.amount;
            } else {
                let tail = self.items.back_mut().unwrap();
                tail.amount += amount;
                tail.time = tail.time.max(item.time);
                out.merged_into = Some(*tail);
                out.merged_amount = amount;
                return out;
            }
        }
        self.insert_sorted(item);
        out.posted = Some(item);
        out
    }

    fn insert_sorted(&mut self, item: ReplenishmentItem) {
        let at = self
            .items
            .iter()
            .position(|r| r.time > item.time)
            .unwrap_or(self.items.len());
        self.items.insert(at, item);
    }

    /// HI server at the mode change: `additional` budget becomes available now.
    pub fn hi_adjust(&mut self, additional: Time, now: Time) {
        if additional == 0 {
            return;
        }
        let full = self.is_full();
        match self.items.front_mut() {
            Some(head) if head.time <= now || full => head.amount += additional,
            _ => self.insert_sorted(ReplenishmentItem {
                time: now,
                amount: additional,
            }),
        }
    }

    /// LO server at the mode change: remove `reduced` budget, walking back
    /// from the last item before `deadline`, then from the tail.
    pub fn lo_adjust(&mut self, mut reduced: Time, deadline: Time, period: Time) {
        let mut rd = self.items.iter().rposition(|r| r.time < deadline);
        while reduced > 0 {
            let Some(k) = rd else { break };
            if k == 0 && self.usage > 0 {
                let head = self.items[0];
                if head.amount - self.usage > reduced {
                    self.items[0].amount -= reduced;
                    reduced = 0;
                } else {
                    reduced -= head.amount - self.usage;
                    self.items.pop_front();
                    let moved = ReplenishmentItem {
                        time: head.time + period,
                        amount: self.usage,
                    };
                    self.insert_sorted(moved);
                    self.usage = 0;
                }
                rd = None;
            } else if self.items[k].amount <= reduced {
                reduced -= self.items[k].amount;
                self.items.remove(k);
                rd = k.checked_sub(1);
            } else {
                self.items[k].amount -= reduced;
                reduced = 0;
            }
        }
        while reduced > 0 {
            let Some(end) = self.items.back_mut() else {
                break;
            };
            if end.amount <= reduced {
                reduced -= end.amount;
                self.items.pop_back();
            } else {
                end.amount -= reduced;
                reduced = 0;
            }
        }
        self.usage = self.items.front().map_or(0, |h| h.amount.min(self.usage));
    }
}
