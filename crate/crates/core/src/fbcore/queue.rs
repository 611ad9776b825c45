use std::any::Any;
use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Capacity of a resource's event queue.
pub const QUEUE_CAPACITY: usize = 1024;

/// The pin an occurrence targets: an event input fired by the network, or
/// an event output raised on behalf of a service (timer or transport).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventPin {
    Input(usize),
    Output(usize),
}

pub enum Origin {
    Local,
    Timer,
    External(Box<dyn Any + Send>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OriginKind {
    Local,
    Timer,
    External,
}

impl Origin {
    pub fn kind(&self) -> OriginKind {
        match self {
            Origin::Local => OriginKind::Local,
            Origin::Timer => OriginKind::Timer,
            Origin::External(_) => OriginKind::External,
        }
    }
}

impl fmt::Debug for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.kind(), f)
    }
}

#[derive(Debug)]
pub struct EventOccurrence {
    pub fb: usize,
    pub pin: EventPin,
    pub origin: Origin,
}

impl EventOccurrence {
    pub fn local(fb: usize, event_input: usize) -> Self {
        EventOccurrence { fb, pin: EventPin::Input(event_input), origin: Origin::Local }
    }

    pub fn external(fb: usize, event_output: usize, payload: Box<dyn Any + Send>) -> Self {
        EventOccurrence { fb, pin: EventPin::Output(event_output), origin: Origin::External(payload) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("event queue full, occurrence dropped")]
pub struct QueueFull;

struct State {
    items: VecDeque<EventOccurrence>,
    busy: bool,
    stopped: bool,
}

/// Bounded FIFO shared between the scheduler and posting threads.
pub struct EventQueue {
    state: Mutex<State>,
    changed: Condvar,
    dropped: AtomicU64,
}

impl Default for EventQueue {
    fn default() -> Self {
        EventQueue::new()
    }
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue {
            state: Mutex::new(State { items: VecDeque::with_capacity(64), busy: false, stopped: false }),
            changed: Condvar::new(),
            dropped: AtomicU64::new(0),
        }
    }

    /// Appends `occ`; a full queue drops it and counts the drop.
    pub fn post(&self, occ: EventOccurrence) -> Result<(), QueueFull> {
        let mut state = self.state.lock().unwrap();
        if state.items.len() >= QUEUE_CAPACITY {
            drop(state);
            self.dropped.fetch_add(1, Ordering::SeqCst);
            return Err(QueueFull);
        }
        state.items.push_back(occ);
        drop(state);
        self.changed.notify_all();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::SeqCst)
    }

    /// Takes the head and marks the queue busy until [`EventQueue::done`].
    pub(crate) fn begin(&self) -> Option<EventOccurrence> {
        let mut state = self.state.lock().unwrap();
        let occ = state.items.pop_front();
        state.busy = occ.is_some();
        occ
    }

    pub(crate) fn done(&self) {
        self.state.lock().unwrap().busy = false;
        self.changed.notify_all();
    }

    /// Blocks until work is queued, `deadline` passes, or the queue stops.
    pub(crate) fn wait_for_work(&self, deadline: Option<Instant>) {
        let mut state = self.state.lock().unwrap();
        while state.items.is_empty() && !state.stopped {
            match deadline {
                Some(deadline) => {
                    let remaining = deadline.saturating_duration_since(Instant::now());
                    if remaining.is_zero() {
                        return;
                    }
                    state = self.changed.wait_timeout(state, remaining).unwrap().0;
                }
                None => state = self.changed.wait(state).unwrap(),
            }
        }
    }

    /// Waits until nothing is queued or executing. Returns false on timeout.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut state = self.state.lock().unwrap();
        while !state.items.is_empty() || state.busy {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return false;
            }
            state = self.changed.wait_timeout(state, remaining).unwrap().0;
        }
        true
    }

    pub(crate) fn stop(&self) {
        self.state.lock().unwrap().stopped = true;
        self.changed.notify_all();
    }

    pub(crate) fn is_stopped(&self) -> bool {
        self.state.lock().unwrap().stopped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_with_drop_count() {
        let q = EventQueue::new();
        q.post(EventOccurrence::local(0, 0)).unwrap();
        assert_eq!(q.len(), 1);
        for _ in 1..QUEUE_CAPACITY {
            q.post(EventOccurrence::local(0, 0)).unwrap();
        }
        assert_eq!(q.post(EventOccurrence::local(0, 0)), Err(QueueFull));
        assert_eq!(q.dropped(), 1);
        assert_eq!(q.len(), QUEUE_CAPACITY);
    }

    #[test]
    fn fifo_order() {
        let q = EventQueue::new();
        for i in 0..5 {
            q.post(EventOccurrence::local(i, 0)).unwrap();
        }
        let order: Vec<usize> = std::iter::from_fn(|| q.begin().map(|o| o.fb)).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn idle_wait() {
        let q = EventQueue::new();
        assert!(q.wait_idle(Duration::from_millis(1)));
        q.post(EventOccurrence::local(0, 0)).unwrap();
        assert!(!q.wait_idle(Duration::from_millis(1)));
        q.begin();
        assert!(!q.wait_idle(Duration::from_millis(1)));
        q.done();
        assert!(q.wait_idle(Duration::from_millis(1)));
    }
}
