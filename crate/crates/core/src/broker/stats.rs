use std::sync::atomic::{AtomicU64, Ordering};

/// Monotonic broker counters.
#[derive(Debug, Default)]
pub struct BrokerStats {
    connections: AtomicU64,
    publishes_received: AtomicU64,
    deliveries: AtomicU64,
    bytes_in: AtomicU64,
    bytes_out: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub connections: u64,
    pub publishes_received: u64,
    pub deliveries: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
}

impl StatsSnapshot {
    pub const CSV_COLUMNS: [&'static str; 5] = [
        "connections",
        "publishes_received",
        "deliveries",
        "payload_bytes_in",
        "payload_bytes_out",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        [
            self.connections,
            self.publishes_received,
            self.deliveries,
            self.bytes_in,
            self.bytes_out,
        ]
        .iter()
        .map(u64::to_string)
        .collect()
    }
}

impl BrokerStats {
    pub(crate) fn record_connection(&self) {
        self.connections.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn record_publish(&self, payload_len: usize) {
        self.publishes_received.fetch_add(1, Ordering::Relaxed);
        self.bytes_in.fetch_add(payload_len as u64, Ordering::Relaxed);
    }

    pub(crate) fn record_routed(&self, copies: usize, payload_len: usize) {
        self.deliveries.fetch_add(copies as u64, Ordering::Relaxed);
        self.bytes_out
            .fetch_add((copies * payload_len) as u64, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            connections: self.connections.load(Ordering::Relaxed),
            publishes_received: self.publishes_received.load(Ordering::Relaxed),
            deliveries: self.deliveries.load(Ordering::Relaxed),
            bytes_in: self.bytes_in.load(Ordering::Relaxed),
            bytes_out: self.bytes_out.load(Ordering::Relaxed),
        }
    }
}
