//! Start a broker, connect a real side and two twin-side subscribers, and
//! route a burst of traffic updates through it.
//!
//! ```bash
//! cargo run -p twinet --example broker_pubsub
//! ```

use std::time::Duration;

use twinet::broker::run_broker;
use twinet::mqtt::QoS;
use twinet::twinlink::{topics, EnvelopeKind, Link, LinkConfig, MessageEnvelope};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let broker = run_broker("127.0.0.1:0")?;
    let addr = broker.local_addr();
    println!("broker on {addr}");

    let real = Link::connect(addr, LinkConfig::new("real").with_qos(QoS::AtLeastOnce))?;
    let twin = Link::connect(addr, LinkConfig::new("twin").with_qos(QoS::AtLeastOnce))?;
    let monitor = Link::connect(addr, LinkConfig::new("monitor"))?;
    twin.subscribe(topics::RW_TRAFFIC, QoS::AtLeastOnce)?;
    monitor.subscribe("rw/#", QoS::AtMostOnce)?;

    for tick in 0..10 {
        let body = format!("{{\"tick\":{tick}}}").into_bytes();
        real.publish_envelope(MessageEnvelope::new(topics::RW_TRAFFIC, EnvelopeKind::TrafficUpdate, body))?;
    }
    real.publish_envelope(MessageEnvelope::new(topics::RW_REQUEST, EnvelopeKind::EvalRequest, b"{}".to_vec()))?;

    for (name, link, expect) in [("twin", &twin, 10), ("monitor", &monitor, 11)] {
        let mut got = Vec::new();
        while got.len() < expect {
            let Some(r) = link.recv_timeout(Duration::from_secs(2)) else { break };
            got.push(r);
        }
        let seqs: Vec<_> = got.iter().map(|r| r.envelope.seq).collect();
        let mean_ms = got.iter().map(|r| r.latency_ms()).sum::<f64>() / got.len().max(1) as f64;
        println!("{name:<8} received {:>2} envelopes, seq {seqs:?}, mean latency {mean_ms:.3} ms", got.len());
    }

    drop((real, twin, monitor));
    let stats = broker.shutdown();
    println!(
        "connections {}, publishes {}, deliveries {}",
        stats.connections, stats.publishes_received, stats.deliveries
    );
    Ok(())
}
