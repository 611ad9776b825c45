use std::time::{Duration, Instant};

struct Timer {
    fb: usize,
    period: Duration,
    deadline: Instant,
}

/// Periodic timers on absolute deadlines. Each expiry advances the
/// deadline by whole periods, so the schedule never drifts; ticks missed
/// while the scheduler was busy are skipped rather than bunched.
#[derive(Default)]
pub struct TimerService {
    timers: Vec<Timer>,
}

impl TimerService {
    pub fn new() -> Self {
        TimerService::default()
    }

    /// (Re)starts the timer of `fb`; the first tick is due at `now + period`.
    pub fn start(&mut self, fb: usize, period: Duration, now: Instant) {
        self.cancel(fb);
        self.timers.push(Timer { fb, period, deadline: now + period });
    }

    pub fn cancel(&mut self, fb: usize) {
        self.timers.retain(|t| t.fb != fb);
    }

    pub fn is_running(&self, fb: usize) -> bool {
        self.timers.iter().any(|t| t.fb == fb)
    }

    pub fn next_deadline(&self) -> Option<Instant> {
        self.timers.iter().map(|t| t.deadline).min()
    }

    /// FBs whose deadline is at or before `now`, one entry per expired timer.
    pub fn expire(&mut self, now: Instant) -> Vec<usize> {
        let mut due = Vec::new();
        for t in &mut self.timers {
            if t.deadline > now {
                continue;
            }
            due.push(t.fb);
            let late = now.duration_since(t.deadline).as_nanos();
            let skipped = late / t.period.as_nanos();
            let steps = u32::try_from(skipped + 1).unwrap_or(u32::MAX);
            t.deadline += t.period * steps;
        }
        due
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: Duration = Duration::from_millis(1);

    #[test]
    fn drift_free_schedule() {
        let t0 = Instant::now();
        let mut timers = TimerService::new();
        timers.start(7, 500 * MS, t0);
        assert!(timers.expire(t0 + 499 * MS).is_empty());
        // a late wake-up does not shift later deadlines
        assert_eq!(timers.expire(t0 + 530 * MS), vec![7]);
        assert_eq!(timers.next_deadline(), Some(t0 + 1000 * MS));
        assert_eq!(timers.expire(t0 + 1000 * MS), vec![7]);
        assert_eq!(timers.next_deadline(), Some(t0 + 1500 * MS));
    }

    #[test]
    fn missed_ticks_skipped_on_grid() {
        let t0 = Instant::now();
        let mut timers = TimerService::new();
        timers.start(1, 100 * MS, t0);
        assert_eq!(timers.expire(t0 + 350 * MS), vec![1]);
        assert_eq!(timers.next_deadline(), Some(t0 + 400 * MS));
    }

    #[test]
    fn emissions_over_window() {
        let t0 = Instant::now();
        let mut timers = TimerService::new();
        timers.start(0, 500 * MS, t0);
        let ticks: usize = (1..=5000).map(|ms| timers.expire(t0 + ms * MS).len()).sum();
        assert_eq!(ticks, 10);
        timers.cancel(0);
        assert!(!timers.is_running(0));
        assert!(timers.expire(t0 + 10_000 * MS).is_empty());
    }
}
