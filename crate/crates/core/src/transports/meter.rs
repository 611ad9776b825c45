use std::ops::Sub;
use std::sync::atomic::{AtomicU64, Ordering};

/// Lock-free counters of application payload bytes and messages.
///
/// Transmit and receive sides are counted separately; on a lossless link
/// shared by both peers the two totals agree.
#[derive(Debug, Default)]
pub struct ByteMeter {
    tx_bytes: AtomicU64,
    rx_bytes: AtomicU64,
    tx_msgs: AtomicU64,
    rx_msgs: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeterSnapshot {
    pub tx_bytes: u64,
    pub rx_bytes: u64,
    pub tx_msgs: u64,
    pub rx_msgs: u64,
}

impl ByteMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_tx(&self, bytes: usize) {
        self.tx_bytes.fetch_add(bytes as u64, Ordering::Relaxed);
        self.tx_msgs.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_rx(&self, bytes: usize) {
        self.rx_bytes.fetch_add(bytes as u64, Ordering::Relaxed);
        self.rx_msgs.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> MeterSnapshot {
        MeterSnapshot {
            tx_bytes: self.tx_bytes.load(Ordering::Relaxed),
            rx_bytes: self.rx_bytes.load(Ordering::Relaxed),
            tx_msgs: self.tx_msgs.load(Ordering::Relaxed),
            rx_msgs: self.rx_msgs.load(Ordering::Relaxed),
        }
    }
}

impl Sub for MeterSnapshot {
    type Output = MeterSnapshot;

    fn sub(self, rhs: MeterSnapshot) -> MeterSnapshot {
        MeterSnapshot {
            tx_bytes: self.tx_bytes - rhs.tx_bytes,
            rx_bytes: self.rx_bytes - rhs.rx_bytes,
            tx_msgs: self.tx_msgs - rhs.tx_msgs,
            rx_msgs: self.rx_msgs - rhs.rx_msgs,
        }
    }
}
