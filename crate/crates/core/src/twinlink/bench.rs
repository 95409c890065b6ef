use std::fmt;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::envelope::{EnvelopeKind, MessageEnvelope};
use super::link::{Link, LinkError};
use super::topics;
use crate::mqtt::QoS;

/// Payload sizes of the link latency table: 1 B to 1 MB.
pub const DEFAULT_SIZES: [usize; 6] = [1, 100, 1_000, 10_000, 100_000, 1_000_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    RealToTwin,
    TwinToReal,
}

impl Direction {
    pub fn tag(self) -> &'static str {
        match self {
            Direction::RealToTwin => "r2t",
            Direction::TwinToReal => "t2r",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::RealToTwin => "real_to_twin",
            Direction::TwinToReal => "twin_to_real",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub samples_per_size: usize,
    /// Unrecorded pings per size before measuring.
    pub warmup: usize,
    /// Unrecorded same-size pings sent right before every measured one.
    pub primers: usize,
    pub qos: QoS,
    /// Idle time between consecutive pings.
    pub gap: Duration,
    pub receive_timeout: Duration,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            samples_per_size: 100,
            warmup: 5,
            primers: 3,
            qos: QoS::AtMostOnce,
            gap: Duration::ZERO,
            receive_timeout: Duration::from_secs(5),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub payload_size: usize,
    pub direction: Direction,
    /// One-way latencies in milliseconds.
    pub samples: Vec<f64>,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    /// Samples dropped because the receive time preceded `sent_at`.
    pub discarded: usize,
}

impl LatencyReport {
    pub const CSV_COLUMNS: [&'static str; 6] =
        ["size_bytes", "direction", "mean_ms", "p50_ms", "p99_ms", "n"];

    pub fn from_samples(payload_size: usize, direction: Direction, samples: Vec<f64>, discarded: usize) -> Self {
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let mean_ms = if samples.is_empty() {
            f64::NAN
        } else {
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        Self {
            payload_size,
            direction,
            mean_ms,
            p50_ms: percentile(&sorted, 50.0),
            p99_ms: percentile(&sorted, 99.0),
            samples,
            discarded,
        }
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.payload_size.to_string(),
            self.direction.label().to_owned(),
            format!("{:.4}", self.mean_ms),
            format!("{:.4}", self.p50_ms),
            format!("{:.4}", self.p99_ms),
            self.samples.len().to_string(),
        ]
    }
}

/// Nearest-rank percentile over an ascending slice.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("no {direction} ping of {size} bytes arrived within {timeout:?}")]
    Lost {
        direction: Direction,
        size: usize,
        timeout: Duration,
    },
}

/// Measure one-way latency in both directions between two endpoints that
/// share a clock.
///
/// Pings are sent one at a time, so the broker is otherwise idle. Every round
/// visits each size once in a freshly shuffled order, so slow drift of the
/// host and the after-effects of large transfers land on every size alike.
/// Each measured ping is preceded by unrecorded pings of the same size.
pub fn run_latency_bench(real: &Link, twin: &Link, config: &BenchConfig) -> Result<Vec<LatencyReport>, BenchError> {
    let directions = [Direction::RealToTwin, Direction::TwinToReal];
    for d in directions {
        let receiver = match d {
            Direction::RealToTwin => twin,
            Direction::TwinToReal => real,
        };
        receiver.subscribe(&topics::bench_ping(d.tag()), config.qos)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let payloads: Vec<Vec<u8>> = config
        .sizes
        .iter()
        .map(|&n| {
            let mut p = vec![0u8; n];
            rng.fill_bytes(&mut p);
            p
        })
        .collect();

    let ping = |sender: &Link, receiver: &Link, d: Direction, payload: &[u8]| -> Result<f64, BenchError> {
        let envelope = MessageEnvelope::new(topics::bench_ping(d.tag()), EnvelopeKind::BenchPing, payload.to_vec());
        sender.publish_with_qos(envelope, config.qos)?;
        let received = receiver.recv_timeout(config.receive_timeout).ok_or(BenchError::Lost {
            direction: d,
            size: payload.len(),
            timeout: config.receive_timeout,
        })?;
        if !config.gap.is_zero() {
            std::thread::sleep(config.gap);
        }
        Ok(received.latency_ms())
    };

    let mut reports = Vec::new();
    for d in directions {
        let (sender, receiver) = match d {
            Direction::RealToTwin => (real, twin),
            Direction::TwinToReal => (twin, real),
        };
        for payload in &payloads {
            for _ in 0..config.warmup {
                ping(sender, receiver, d, payload)?;
            }
        }
        let mut samples = vec![Vec::with_capacity(config.samples_per_size); payloads.len()];
        let mut discarded = vec![0usize; payloads.len()];
        let mut order: Vec<usize> = (0..payloads.len()).collect();
        for _ in 0..config.samples_per_size {
            order.shuffle(&mut rng);
            for &si in &order {
                let payload = &payloads[si];
                // primer of the same size, so the measured ping never follows a
                // transfer of a different size
                for _ in 0..config.primers {
                    ping(sender, receiver, d, payload)?;
                }
                let latency = ping(sender, receiver, d, payload)?;
                if latency < 0.0 {
                    discarded[si] += 1;
                } else {
                    samples[si].push(latency);
                }
            }
        }
        for (si, payload) in payloads.iter().enumerate() {
            reports.push(LatencyReport::from_samples(
                payload.len(),
                d,
                std::mem::take(&mut samples[si]),
                discarded[si],
            ));
        }
    }
    Ok(reports)
}
