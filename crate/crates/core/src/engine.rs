//! Deterministic discrete-event core.
//!
//! Events are totally ordered by `(time, class, sequence)`. The class
//! ranks simultaneous events so that departures free buffer slots before
//! scheduler epochs run, and epochs run before same-instant arrivals are
//! admitted; the insertion sequence breaks the remaining ties, making the
//! processing order independent of heap internals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Debug;

use thiserror::Error;

/// Time axis for the simulation clock. Implementations must supply a total
/// order; the queue never schedules non-finite instants, and `total_order`
/// keeps even those well-defined for `f64`.
pub trait SimTime: Copy + Debug {
    const ZERO: Self;
    fn total_order(&self, other: &Self) -> Ordering;
    fn is_valid(&self) -> bool;
}

/// Seconds on a continuous clock.
impl SimTime for f64 {
    const ZERO: Self = 0.0;

    fn total_order(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }

    fn is_valid(&self) -> bool {
        self.is_finite()
    }
}

/// Cycles on a discrete clock.
impl SimTime for u64 {
    const ZERO: Self = 0;

    fn total_order(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn is_valid(&self) -> bool {
        true
    }
}

/// Priority rank for simultaneous events; lower fires first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventClass {
    Departure = 0,
    ScheduleEpoch = 1,
    Arrival = 2,
}

/// A scheduled occurrence carrying a caller-defined payload.
#[derive(Debug, Clone)]
pub struct Event<T, P> {
    pub time: T,
    pub class: EventClass,
    /// Insertion order, unique per queue; the final tie-breaker.
    pub seq: u64,
    pub payload: P,
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("event at {event_time} precedes the clock at {now}")]
    SchedulesThePast { event_time: String, now: String },
    #[error("event time is not a valid instant: {0}")]
    InvalidTime(String),
}

struct HeapEntry<T: SimTime, P>(Event<T, P>);

impl<T: SimTime, P> HeapEntry<T, P> {
    fn rank(&self) -> (Ordering, EventClass, u64) {
        (Ordering::Equal, self.0.class, self.0.seq)
    }
}

impl<T: SimTime, P> PartialEq for HeapEntry<T, P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: SimTime, P> Eq for HeapEntry<T, P> {}

impl<T: SimTime, P> PartialOrd for HeapEntry<T, P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: SimTime, P> Ord for HeapEntry<T, P> {
    // Reversed so the std max-heap yields the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        let forward = self
            .0
            .time
            .total_order(&other.0.time)
            .then(self.rank().cmp(&other.rank()));
        forward.reverse()
    }
}

/// Pending-event set plus the simulation clock.
///
/// The clock only moves forward: it is set to each event's time as the
/// event is popped, and scheduling strictly before the clock is an error.
pub struct EventQueue<T: SimTime, P> {
    heap: BinaryHeap<HeapEntry<T, P>>,
    now: T,
    next_seq: u64,
    processed: u64,
}

impl<T: SimTime, P> EventQueue<T, P> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: T::ZERO,
            next_seq: 0,
            processed: 0,
        }
    }

    /// Current clock reading, the time of the last popped event.
    pub fn now(&self) -> T {
        self.now
    }

    /// Count of events popped so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Time of the next event without popping it.
    pub fn peek_time(&self) -> Option<T> {
        self.heap.peek().map(|entry| entry.0.time)
    }

    /// Adds an event at `time`, which must not precede the clock.
    pub fn schedule(&mut self, time: T, class: EventClass, payload: P) -> Result<(), EngineError> {
        if !time.is_valid() {
            return Err(EngineError::InvalidTime(format!("{time:?}")));
        }
        if time.total_order(&self.now) == Ordering::Less {
            return Err(EngineError::SchedulesThePast {
                event_time: format!("{time:?}"),
                now: format!("{:?}", self.now),
            });
        }
        let event = Event {
            time,
            class,
            seq: self.next_seq,
            payload,
        };
        self.next_seq += 1;
        self.heap.push(HeapEntry(event));
        Ok(())
    }

    /// Pops the earliest event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<Event<T, P>> {
        let event = self.heap.pop()?.0;
        debug_assert!(
            event.time.total_order(&self.now) != Ordering::Less,
            "heap yielded an event behind the clock"
        );
        self.now = event.time;
        self.processed += 1;
        Some(event)
    }
}

impl<T: SimTime, P> Default for EventQueue<T, P> {
    fn default() -> Self {
        Self::new()
    }
}
