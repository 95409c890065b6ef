//! Generators and reference implementations shared by the codec property
//! tests and the acceptance suite.

#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use twinet::mqtt::{ControlPacket, QoS};
use twinet::netsim::{NetworkState, UEStat};
use twinet::pilotguard::{loss_and_gradient, ClassifierModel, Dataset, NormStats, PilotConfig};
use twinet::twinlink::{EnvelopeKind, MessageEnvelope};

/// Textbook recursive matcher over level slices.
pub fn oracle_matches(filter: &[&str], topic: &[&str]) -> bool {
    match (filter.split_first(), topic.split_first()) {
        (None, None) => true,
        (Some((&"#", _)), _) => true,
        (Some((&"+", f)), Some((_, t))) => oracle_matches(f, t),
        (Some((lf, f)), Some((lt, t))) => lf == lt && oracle_matches(f, t),
        _ => false,
    }
}

/// Remaining-length encoding written out from the bit layout, as reference.
pub fn oracle_varint(mut n: u32) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let mut byte = (n % 128) as u8;
        n /= 128;
        if n > 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if n == 0 {
            return out;
        }
    }
}

pub const LEVELS: [&str; 5] = ["a", "b", "rw", "dt", ""];

pub fn topic_levels() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(&LEVELS[..]), 1..5).prop_filter("empty topic", |v| !v.join("/").is_empty())
}

pub fn filter_levels() -> impl Strategy<Value = Vec<&'static str>> {
    let level = prop::sample::select(vec!["a", "b", "rw", "dt", "", "+"]);
    (prop::collection::vec(level, 0..5), any::<bool>()).prop_filter_map("empty filter", |(mut v, hash)| {
        if hash {
            v.push("#");
        }
        // "" (a lone empty level) is not a filter
        (!v.join("/").is_empty()).then_some(v)
    })
}

pub fn topic_name() -> impl Strategy<Value = String> {
    "[a-z0-9_/ é]{1,20}"
}

pub fn filter_string() -> impl Strategy<Value = String> {
    filter_levels().prop_map(|v| v.join("/"))
}

pub fn qos() -> impl Strategy<Value = QoS> {
    prop_oneof![Just(QoS::AtMostOnce), Just(QoS::AtLeastOnce)]
}

pub fn packet() -> impl Strategy<Value = ControlPacket> {
    let publish = (topic_name(), prop::collection::vec(any::<u8>(), 0..300), qos(), 1u16..)
        .prop_map(|(topic, payload, qos, id)| ControlPacket::Publish {
            topic,
            payload,
            qos,
            packet_id: (qos == QoS::AtLeastOnce).then_some(id),
        });
    prop_oneof![
        "[ -~]{0,23}".prop_map(|client_id| ControlPacket::Connect { client_id }),
        any::<u8>().prop_map(|return_code| ControlPacket::ConnAck { return_code }),
        publish,
        (1u16..).prop_map(|packet_id| ControlPacket::PubAck { packet_id }),
        (1u16.., prop::collection::vec((filter_string(), qos()), 1..4))
            .prop_map(|(packet_id, filters)| ControlPacket::Subscribe { packet_id, filters }),
        (1u16.., prop::collection::vec(prop::sample::select(vec![0u8, 1, 0x80]), 0..4))
            .prop_map(|(packet_id, granted)| ControlPacket::SubAck { packet_id, granted }),
        Just(ControlPacket::PingReq),
        Just(ControlPacket::PingResp),
        Just(ControlPacket::Disconnect),
    ]
}

pub fn envelope() -> impl Strategy<Value = MessageEnvelope> {
    (
        topic_name(),
        any::<u64>(),
        any::<u64>(),
        prop::sample::select(EnvelopeKind::ALL.to_vec()),
        prop::collection::vec(any::<u8>(), 0..200),
    )
        .prop_map(|(topic, seq, sent_at, kind, payload)| MessageEnvelope {
            topic,
            seq,
            sent_at,
            kind,
            payload,
        })
}

/// psr summed, minus the delivered shortfall of every UE that expects
/// something, written as two separate passes.
pub fn oracle_reward(state: &NetworkState) -> f64 {
    let psr: f64 = state.ues.iter().map(|u| u.psr).sum();
    let mut shortfall = 0.0;
    for u in &state.ues {
        if u.r_exp_mbps != 0.0 {
            shortfall += 1.0 - u.r_act_mbps / u.r_exp_mbps;
        }
    }
    psr - shortfall
}

pub fn random_state(rng: &mut ChaCha8Rng) -> NetworkState {
    let n = rng.random_range(1..6);
    let ues = (0..n)
        .map(|_| {
            let r_exp = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..5.0) };
            UEStat {
                r_exp_mbps: r_exp,
                r_alloc_mbps: r_exp,
                r_act_mbps: r_exp * rng.random::<f64>(),
                packets_sent: 0,
                packets_received: 0,
                psr: rng.random(),
            }
        })
        .collect();
    NetworkState {
        tick_index: rng.random_range(0..1000),
        ues,
        aggregate_demand_mbps: 0.0,
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (ClassifierModel, Dataset) {
    let k = rng.random_range(2..7);
    let p = rng.random_range(1..k.min(4));
    let mut pilots: Vec<usize> = rand::seq::index::sample(rng, k, p).into_vec();
    pilots.sort_unstable();
    let cfg = PilotConfig::new(k, pilots, "small").unwrap();
    let norm = NormStats {
        mean: vec![0.0; k],
        std: vec![1.0; k],
    };
    let mut m = ClassifierModel::zeros(cfg, norm);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    m.weights.iter_mut().for_each(|w| *w = n01.sample(rng));
    m.bias.iter_mut().for_each(|b| *b = n01.sample(rng));
    let n = rng.random_range(1..8);
    let batch = Dataset {
        features: (0..n).map(|_| (0..k).map(|_| n01.sample(rng)).collect()).collect(),
        labels: (0..n).map(|_| rng.random_range(0..p + 1)).collect(),
    };
    (m, batch)
}

/// Worst relative error between the analytic gradient and central
/// differences with step `h` over `instances` random small problems.
pub fn worst_gradient_error(instances: usize, h: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (m, batch) = random_instance(&mut rng);
        let g = loss_and_gradient(&m, &batch).unwrap();
        let loss_at = |m: &ClassifierModel| loss_and_gradient(m, &batch).unwrap().loss;
        let mut check = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        };
        for i in 0..m.weights.len() {
            let (mut plus, mut minus) = (m.clone(), m.clone());
            plus.weights[i] += h;
            minus.weights[i] -= h;
            check(g.d_weights[i], (loss_at(&plus) - loss_at(&minus)) / (2.0 * h));
        }
        for i in 0..m.bias.len() {
            let (mut plus, mut minus) = (m.clone(), m.clone());
            plus.bias[i] += h;
            minus.bias[i] -= h;
            check(g.d_bias[i], (loss_at(&plus) - loss_at(&minus)) / (2.0 * h));
        }
    }
    worst
}
