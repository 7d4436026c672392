//! One-producer, many-consumer frame fan-out.
//!
//! Each subscriber owns a bounded queue. A full queue drops its oldest frame,
//! and the subscriber is handed a [`GapMarker`] before the next frame it
//! receives. The producer never blocks on a slow consumer.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::time::{Duration, Instant};

use super::{GapMarker, TelemetryFrame};

#[derive(Debug, Clone, PartialEq)]
pub enum StreamItem {
    Frame(Arc<TelemetryFrame>),
    Gap(GapMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecvError {
    /// The bus closed and the queue is drained.
    Closed,
    Timeout,
}

#[derive(Debug, Default)]
struct Queue {
    frames: VecDeque<Arc<TelemetryFrame>>,
    dropped: u64,
    last_dropped_t: f64,
    closed: bool,
}

#[derive(Debug)]
struct Slot {
    queue: Mutex<Queue>,
    ready: Condvar,
    capacity: usize,
}

/// Receiving end of a bus subscription. Dropping it unsubscribes.
#[derive(Debug)]
pub struct Subscriber {
    slot: Arc<Slot>,
}

impl Subscriber {
    /// Waits up to `timeout` for the next item.
    pub fn recv_timeout(&self, timeout: Duration) -> Result<StreamItem, RecvError> {
        let deadline = Instant::now() + timeout;
        let mut q = self.slot.queue.lock().unwrap();
        loop {
            if let Some(item) = Self::take(&mut q) {
                return Ok(item);
            }
            if q.closed {
                return Err(RecvError::Closed);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(RecvError::Timeout);
            }
            q = self.slot.ready.wait_timeout(q, deadline - now).unwrap().0;
        }
    }

    pub fn recv(&self) -> Result<StreamItem, RecvError> {
        let mut q = self.slot.queue.lock().unwrap();
        loop {
            if let Some(item) = Self::take(&mut q) {
                return Ok(item);
            }
            if q.closed {
                return Err(RecvError::Closed);
            }
            q = self.slot.ready.wait(q).unwrap();
        }
    }

    pub fn try_recv(&self) -> Option<StreamItem> {
        Self::take(&mut self.slot.queue.lock().unwrap())
    }

    fn take(q: &mut Queue) -> Option<StreamItem> {
        if q.dropped > 0 && !q.frames.is_empty() {
            let gap = GapMarker {
                dropped: q.dropped,
                last_dropped_t: q.last_dropped_t,
            };
            q.dropped = 0;
            return Some(StreamItem::Gap(gap));
        }
        q.frames.pop_front().map(StreamItem::Frame)
    }

    pub fn capacity(&self) -> usize {
        self.slot.capacity
    }
}

#[derive(Debug, Default)]
struct Inner {
    slots: Vec<Weak<Slot>>,
    closed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct FrameBus {
    inner: Arc<Mutex<Inner>>,
}

impl FrameBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, capacity: usize) -> Subscriber {
        assert!(capacity > 0, "subscriber capacity must be positive");
        let slot = Arc::new(Slot {
            queue: Mutex::new(Queue::default()),
            ready: Condvar::new(),
            capacity,
        });
        let mut inner = self.inner.lock().unwrap();
        if inner.closed {
            slot.queue.lock().unwrap().closed = true;
        }
        inner.slots.push(Arc::downgrade(&slot));
        Subscriber { slot }
    }

    pub fn subscriber_count(&self) -> usize {
        let mut inner = self.inner.lock().unwrap();
        inner.slots.retain(|w| w.strong_count() > 0);
        inner.slots.len()
    }

    pub fn publish(&self, frame: TelemetryFrame) {
        let frame = Arc::new(frame);
        let mut inner = self.inner.lock().unwrap();
        inner.slots.retain(|w| {
            let Some(slot) = w.upgrade() else {
                return false;
            };
            let mut q = slot.queue.lock().unwrap();
            if q.frames.len() == slot.capacity {
                if let Some(old) = q.frames.pop_front() {
                    q.dropped += 1;
                    q.last_dropped_t = old.t;
                }
            }
            q.frames.push_back(Arc::clone(&frame));
            slot.ready.notify_one();
            true
        });
    }

    /// Closes every subscription. Queued frames remain readable.
    pub fn close(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.closed = true;
        for slot in inner.slots.iter().filter_map(Weak::upgrade) {
            slot.queue.lock().unwrap().closed = true;
            slot.ready.notify_all();
        }
    }
}
