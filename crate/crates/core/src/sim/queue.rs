use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::time::SimTime;

/// Identifies the component an event is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: ComponentId,
    pub payload: P,
}

/// Handle returned by [`Simulator::schedule`], usable to cancel the event
/// before it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ticket(u64);

impl Ticket {
    pub fn seq(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("event scheduled in the past: fire_at {fire_at} < now {now}")]
    InThePast { fire_at: SimTime, now: SimTime },
    #[error("run_until target {target} precedes current time {now}")]
    RunBackwards { target: SimTime, now: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub events_processed: u64,
    pub final_time: SimTime,
}

/// Bookkeeping for the no-loss invariant:
/// `scheduled == delivered + cancelled + pending`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueueCounters {
    pub scheduled: u64,
    pub delivered: u64,
    pub cancelled: u64,
    pub pending: u64,
}

struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.fire_at == other.0.fire_at && self.0.seq == other.0.seq
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // Reversed so the max-heap pops the smallest (fire_at, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_at, other.0.seq).cmp(&(self.0.fire_at, self.0.seq))
    }
}

/// Single-threaded discrete-event engine.
///
/// Events are delivered in ascending `(fire_at, seq)` order, so events with
/// equal timestamps come out in the order they were scheduled. Every delivered
/// event is folded into a running SHA-256 digest of `(fire_at, seq, target)`,
/// which makes whole-run determinism checks a single comparison.
pub struct Simulator<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Queued<P>>,
    cancelled: HashSet<u64>,
    counters: QueueCounters,
    digest: Sha256,
    trace: Option<Vec<(SimTime, u64, ComponentId)>>,
}

impl<P> Default for Simulator<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Simulator<P> {
    pub fn new() -> Self {
        Simulator {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            counters: QueueCounters::default(),
            digest: Sha256::new(),
            trace: None,
        }
    }

    /// Keep a full `(fire_at, seq, target)` log of delivered events.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[(SimTime, u64, ComponentId)]> {
        self.trace.as_deref()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: ComponentId,
        payload: P,
    ) -> Result<Ticket, SimError> {
        if fire_at < self.now {
            return Err(SimError::InThePast {
                fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.counters.scheduled += 1;
        self.counters.pending += 1;
        self.heap.push(Queued(Event {
            fire_at,
            seq,
            target,
            payload,
        }));
        Ok(Ticket(seq))
    }

    pub fn schedule_in(&mut self, delay: SimTime, target: ComponentId, payload: P) -> Ticket {
        let at = self.now + delay;
        self.schedule(at, target, payload)
            .expect("relative schedule is never in the past")
    }

    /// Returns `true` if the event was still pending.
    pub fn cancel(&mut self, ticket: Ticket) -> bool {
        if ticket.0 >= self.next_seq || self.cancelled.contains(&ticket.0) {
            return false;
        }
        let pending = self.heap.iter().any(|q| q.0.seq == ticket.0);
        if pending {
            self.cancelled.insert(ticket.0);
            self.counters.cancelled += 1;
            self.counters.pending -= 1;
        }
        pending
    }

    pub fn counters(&self) -> QueueCounters {
        self.counters
    }

    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.skip_cancelled();
        self.heap.peek().map(|q| q.0.fire_at)
    }

    fn skip_cancelled(&mut self) {
        while let Some(top) = self.heap.peek() {
            if self.cancelled.remove(&top.0.seq) {
                self.heap.pop();
            } else {
                break;
            }
        }
    }

    /// Pops the next event if it fires at or before `t_end`, advancing `now`
    /// to its timestamp.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<P>> {
        self.skip_cancelled();
        if self.heap.peek()?.0.fire_at > t_end {
            return None;
        }
        let Queued(ev) = self.heap.pop()?;
        self.now = ev.fire_at;
        self.counters.delivered += 1;
        self.counters.pending -= 1;
        self.digest.update(ev.fire_at.as_nanos().to_be_bytes());
        self.digest.update(ev.seq.to_be_bytes());
        self.digest.update(ev.target.0.to_be_bytes());
        if let Some(trace) = self.trace.as_mut() {
            trace.push((ev.fire_at, ev.seq, ev.target));
        }
        Some(ev)
    }

    /// Moves the clock to `t_end` once every event at or before it has been
    /// handled.
    pub fn advance_to(&mut self, t_end: SimTime) -> Result<(), SimError> {
        if t_end < self.now {
            return Err(SimError::RunBackwards {
                target: t_end,
                now: self.now,
            });
        }
        self.now = t_end;
        Ok(())
    }

    /// Processes all events with `fire_at <= t_end` in `(fire_at, seq)` order,
    /// then leaves the clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<RunSummary, SimError>
    where
        F: FnMut(&mut Simulator<P>, Event<P>),
    {
        if t_end < self.now {
            return Err(SimError::RunBackwards {
                target: t_end,
                now: self.now,
            });
        }
        let mut processed = 0;
        while let Some(ev) = self.pop_until(t_end) {
            processed += 1;
            handler(self, ev);
        }
        self.now = t_end;
        Ok(RunSummary {
            events_processed: processed,
            final_time: t_end,
        })
    }

    /// Digest over every event delivered so far.
    pub fn trace_digest(&self) -> [u8; 32] {
        self.digest.clone().finalize().into()
    }
}
