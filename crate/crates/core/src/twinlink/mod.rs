//! The bidirectional real-world / twin link: timestamped JSON envelopes
//! carried over the broker, plus the payload-size latency benchmark.

mod bench;
mod envelope;
mod link;

pub use bench::{percentile, run_latency_bench, BenchConfig, BenchError, Direction, LatencyReport, DEFAULT_SIZES};
pub use envelope::{decode_envelope, encode_envelope, EnvelopeError, EnvelopeKind, MessageEnvelope};
pub use link::{now_micros, Link, LinkConfig, LinkCounters, LinkError, Received};

/// Canonical topic namespace.
pub mod topics {
    pub const RW_TRAFFIC: &str = "rw/traffic";
    pub const RW_REQUEST: &str = "rw/request";
    pub const DT_TRAFFIC: &str = "dt/traffic";
    pub const DT_EVAL_RESULT: &str = "dt/eval/result";
    pub const DT_MODEL_REQUEST: &str = "dt/model/request";
    pub const DT_MODEL_ARTIFACT: &str = "dt/model/artifact";

    pub fn bench_ping(direction: &str) -> String {
        format!("bench/ping/{direction}")
    }

    pub fn bench_pong(direction: &str) -> String {
        format!("bench/pong/{direction}")
    }
}
