//! End-to-end behaviour of the broker and link clients over loopback TCP.

use std::thread;
use std::time::{Duration, Instant};

use twinet::broker::{run_broker, BrokerHandle, StatsSnapshot};
use twinet::mqtt::QoS;
use twinet::twinlink::{EnvelopeKind, Link, LinkConfig, LinkError, MessageEnvelope};

fn broker() -> BrokerHandle {
    run_broker("127.0.0.1:0").unwrap()
}

fn link(b: &BrokerHandle, id: &str) -> Link {
    Link::connect(b.local_addr(), LinkConfig::new(id).with_qos(QoS::AtLeastOnce)).unwrap()
}

fn envelope(topic: &str, body: &str) -> MessageEnvelope {
    MessageEnvelope::new(topic, EnvelopeKind::TrafficUpdate, body.as_bytes().to_vec())
}

fn drain(link: &Link, n: usize, timeout: Duration) -> Vec<MessageEnvelope> {
    let deadline = Instant::now() + timeout;
    let mut out = Vec::new();
    while out.len() < n {
        let left = deadline.saturating_duration_since(Instant::now());
        match link.recv_timeout(left) {
            Some(r) => out.push(r.envelope),
            None => break,
        }
    }
    out
}

#[test]
fn hash_subscriber_sees_only_its_subtree() {
    let b = broker();
    let real = link(&b, "real");
    let monitor = link(&b, "monitor");
    monitor.subscribe("rw/#", QoS::AtLeastOnce).unwrap();
    for t in ["rw/traffic", "dt/traffic", "rw/request", "dt/eval/result", "rw"] {
        real.publish_envelope(envelope(t, t)).unwrap();
    }
    let got: Vec<_> = drain(&monitor, 3, Duration::from_secs(2)).into_iter().map(|e| e.topic).collect();
    assert_eq!(got, ["rw/traffic", "rw/request", "rw"]);
    assert!(monitor.recv_timeout(Duration::from_millis(100)).is_none());
    drop((real, monitor));
    b.shutdown();
}

#[test]
fn single_publisher_order_is_preserved() {
    let b = broker();
    let real = link(&b, "real");
    let twin = link(&b, "twin");
    twin.subscribe("rw/traffic", QoS::AtLeastOnce).unwrap();
    for i in 0..500 {
        real.publish_with_qos(envelope("rw/traffic", &i.to_string()), QoS::AtMostOnce).unwrap();
    }
    let got = drain(&twin, 500, Duration::from_secs(5));
    let bodies: Vec<String> = got.iter().map(|e| String::from_utf8(e.payload.clone()).unwrap()).collect();
    assert_eq!(bodies, (0..500).map(|i| i.to_string()).collect::<Vec<_>>());
    assert!(got.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    assert_eq!(twin.counters().seq_gaps, 0);
    drop((real, twin));
    b.shutdown();
}

#[test]
fn killed_broker_surfaces_an_error_within_the_retry_budget() {
    let b = broker();
    let addr = b.local_addr();
    let cfg = LinkConfig::new("real")
        .with_qos(QoS::AtLeastOnce)
        .with_retries(3, Duration::from_millis(10));
    let budget = cfg.initial_backoff * 7 + (cfg.connect_timeout + cfg.ack_timeout) * 4;
    let real = Link::connect(addr, cfg).unwrap();
    real.publish_envelope(envelope("rw/traffic", "before")).unwrap();
    b.shutdown();

    let start = Instant::now();
    let mut result = Ok(());
    // the first publish after the kill may still hit the closing socket
    for _ in 0..3 {
        result = real.publish_envelope(envelope("rw/traffic", "after")).map(|_| ());
        if result.is_err() {
            break;
        }
    }
    assert!(matches!(result, Err(LinkError::Unreachable { attempts: 4 })), "{result:?}");
    assert!(start.elapsed() < budget, "took {:?}", start.elapsed());
}

#[test]
fn three_subscribers_each_receive_a_thousand_in_order() {
    let b = broker();
    let publisher = link(&b, "real");
    let subs: Vec<Link> = (0..3).map(|i| link(&b, &format!("twin{i}"))).collect();
    for s in &subs {
        s.subscribe("rw/traffic", QoS::AtLeastOnce).unwrap();
    }
    // 100 messages per second for 10 seconds
    let start = Instant::now();
    for i in 0..1000u32 {
        let due = start + Duration::from_millis(10 * i as u64);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
        publisher.publish_envelope(envelope("rw/traffic", &i.to_string())).unwrap();
    }
    for s in &subs {
        let got = drain(s, 1000, Duration::from_secs(5));
        assert_eq!(got.len(), 1000, "{}", s.client_id());
        assert!(got.iter().enumerate().all(|(i, e)| e.seq == i as u64 + 1));
        assert_eq!(s.counters().seq_gaps, 0);
        assert_eq!(s.counters().duplicates, 0);
    }
    drop(subs);
    drop(publisher);
    let stats = b.shutdown();
    assert_eq!(stats.publishes_received, 1000);
    assert_eq!(stats.deliveries, 3000);
}

#[test]
fn idle_broker_counts_nothing() {
    let b = broker();
    thread::sleep(Duration::from_millis(50));
    assert_eq!(b.shutdown(), StatsSnapshot::default());
}

#[test]
fn disconnecting_subscriber_does_not_disturb_the_others() {
    let b = broker();
    let publisher = link(&b, "real");
    let stay = link(&b, "stay");
    let mut leave = Some(link(&b, "leave"));
    stay.subscribe("rw/traffic", QoS::AtLeastOnce).unwrap();
    leave.as_ref().unwrap().subscribe("rw/traffic", QoS::AtLeastOnce).unwrap();
    for i in 0..200 {
        if i == 100 {
            leave.take();
        }
        publisher.publish_envelope(envelope("rw/traffic", &i.to_string())).unwrap();
    }
    let got = drain(&stay, 200, Duration::from_secs(5));
    assert_eq!(got.len(), 200);
    assert!(got.iter().enumerate().all(|(i, e)| e.seq == i as u64 + 1));
    drop((publisher, stay));
    b.shutdown();
}
