use std::time::{Duration, Instant};

use crate::value::Value;

use super::fixture::Fixture;
use super::{BenchError, BenchPattern, BenchTransport};

/// Transfers excluded from a latency run before sampling starts.
pub const WARMUP_TRANSFERS: usize = 10;
const TRANSFER_TIMEOUT: Duration = Duration::from_secs(1);

/// Bytes of one value transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadResult {
    pub transport: BenchTransport,
    pub pattern: BenchPattern,
    /// Sum over every message hop, counted where it was received.
    pub bytes: u64,
    pub messages: u64,
    /// Same sum counted at the senders; equal on a lossless run.
    pub sent_bytes: u64,
}

/// Transfers `[BOOL true]` once and sums the bytes of every message it
/// caused. For sync this is request plus response: there is no separate
/// acknowledgement message.
pub fn measure_payload(transport: BenchTransport, pattern: BenchPattern) -> Result<PayloadResult, BenchError> {
    let fixture = Fixture::start(transport, pattern)?;
    std::thread::sleep(Duration::from_millis(50));
    let before = fixture.snapshot();
    fixture.transfer(&[Value::Bool(true)], TRANSFER_TIMEOUT)?;
    // the last hop is counted as it is read; let late counters settle
    std::thread::sleep(Duration::from_millis(50));
    let after = fixture.snapshot();
    let deltas: Vec<_> = after.iter().zip(&before).map(|(a, b)| *a - *b).collect();
    Ok(PayloadResult {
        transport,
        pattern,
        bytes: deltas.iter().map(|d| d.rx_bytes).sum(),
        messages: deltas.iter().map(|d| d.rx_msgs).sum(),
        sent_bytes: deltas.iter().map(|d| d.tx_bytes).sum(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyResult {
    pub transport: BenchTransport,
    pub pattern: BenchPattern,
    pub requested: usize,
    /// Milliseconds, in transfer order.
    pub samples_ms: Vec<f64>,
    pub lost: usize,
}

impl LatencyResult {
    fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples_ms.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    pub fn min(&self) -> Option<f64> {
        self.sorted().first().copied()
    }

    pub fn median(&self) -> Option<f64> {
        percentile(&self.sorted(), 50.0)
    }

    pub fn p95(&self) -> Option<f64> {
        percentile(&self.sorted(), 95.0)
    }

    /// Set for an empty distribution or more than 1% lost transfers.
    pub fn flagged(&self) -> bool {
        self.samples_ms.is_empty() || self.lost * 100 > self.requested
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Times `n` transfers from send initiation to delivery (async) or to the
/// response (sync), after [`WARMUP_TRANSFERS`] unrecorded ones.
pub fn measure_latency(
    transport: BenchTransport,
    pattern: BenchPattern,
    n: usize,
) -> Result<LatencyResult, BenchError> {
    let mut result = LatencyResult { transport, pattern, requested: n, samples_ms: Vec::with_capacity(n), lost: 0 };
    if n == 0 {
        return Ok(result);
    }
    let fixture = Fixture::start(transport, pattern)?;
    for i in 0..WARMUP_TRANSFERS + n {
        let values = [Value::Dint(i as i32)];
        let start = Instant::now();
        let outcome = fixture.transfer(&values, TRANSFER_TIMEOUT);
        if i < WARMUP_TRANSFERS {
            continue;
        }
        match outcome {
            Ok(at) => result.samples_ms.push(at.duration_since(start).as_secs_f64() * 1000.0),
            Err(BenchError::Lost) | Err(BenchError::Comm(_)) => result.lost += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let s: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&s, 50.0), Some(10.0));
        assert_eq!(percentile(&s, 95.0), Some(19.0));
        assert_eq!(percentile(&s, 0.0), Some(1.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn empty_run_is_flagged() {
        let r = measure_latency(BenchTransport::Udp, BenchPattern::Async, 0).unwrap();
        assert!(r.flagged());
        assert_eq!(r.median(), None);
    }

    #[test]
    fn invalid_combination() {
        assert!(matches!(measure_payload(BenchTransport::Udp, BenchPattern::Sync), Err(BenchError::Combination(..))));
    }
}
