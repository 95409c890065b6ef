use std::collections::HashMap;
use std::net::SocketAddr;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schedule::RateSchedule;
use super::sim::{mbps_to_pps, pps_to_mbps, CellSim, NetworkState, ScenarioConfig, SimError};
use crate::mqtt::QoS;
use crate::twinlink::{
    now_micros, topics, EnvelopeError, EnvelopeKind, Link, LinkConfig, LinkCounters, LinkError, MessageEnvelope,
};

/// Observed per-UE transmit rates of one real-world tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficUpdate {
    pub tick: u64,
    pub rates_mbps: Vec<f64>,
    pub rates_pps: Vec<f64>,
}

impl TrafficUpdate {
    pub fn from_state(state: &NetworkState) -> Self {
        let rates_mbps: Vec<f64> = state.ues.iter().map(|u| u.r_alloc_mbps).collect();
        Self {
            tick: state.tick_index,
            rates_pps: rates_mbps.iter().map(|&r| mbps_to_pps(r)).collect(),
            rates_mbps,
        }
    }
}

#[derive(Debug, Error)]
pub enum MirrorError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("expected a TrafficUpdate envelope, got {0}")]
    WrongKind(EnvelopeKind),
    #[error("twin applied {applied} of {expected} updates before timing out")]
    Incomplete { applied: u64, expected: u64 },
    #[error("twin thread panicked")]
    TwinPanicked,
}

/// Publish the real side's state for this tick on `rw/traffic`.
pub fn publish_observation(state: &NetworkState, link: &Link) -> Result<MessageEnvelope, MirrorError> {
    let envelope = MessageEnvelope::json(
        topics::RW_TRAFFIC,
        EnvelopeKind::TrafficUpdate,
        &TrafficUpdate::from_state(state),
    )?;
    Ok(link.publish_envelope(envelope)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MirrorOutcome {
    /// Update applied; delay from `sent_at` to application in ms.
    Applied { delay_ms: f64 },
    Stale,
}

/// Twin side of traffic mirroring: a cell simulator whose traffic generator
/// follows the rates observed on the real side.
#[derive(Debug, Clone)]
pub struct MirrorTwin {
    sim: CellSim,
    last_tick: Option<u64>,
    stale: u64,
}

impl MirrorTwin {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        Ok(Self {
            sim: CellSim::new(config)?,
            last_tick: None,
            stale: 0,
        })
    }

    pub fn sim(&self) -> &CellSim {
        &self.sim
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.last_tick
    }

    pub fn stale_count(&self) -> u64 {
        self.stale
    }

    /// Rates the twin generator currently transmits.
    pub fn rates_mbps(&self) -> &[f64] {
        self.sim.next_allocation()
    }

    /// Set the generator to the update's rates and advance one tick.
    /// Returns false (and counts it) for an update that is not newer than
    /// the last one applied.
    pub fn apply_update(&mut self, update: &TrafficUpdate) -> Result<bool, SimError> {
        if self.last_tick.is_some_and(|last| update.tick <= last) {
            self.stale += 1;
            return Ok(false);
        }
        self.sim.apply_allocation(&update.rates_mbps)?;
        self.sim.step_tick();
        self.last_tick = Some(update.tick);
        Ok(true)
    }

    pub fn apply_mirror_update(
        &mut self,
        envelope: &MessageEnvelope,
        applied_at_micros: u64,
    ) -> Result<MirrorOutcome, MirrorError> {
        if envelope.kind != EnvelopeKind::TrafficUpdate {
            return Err(MirrorError::WrongKind(envelope.kind));
        }
        let update: TrafficUpdate = envelope.payload_json()?;
        if !self.apply_update(&update)? {
            return Ok(MirrorOutcome::Stale);
        }
        let delay_ms = (applied_at_micros as f64 - envelope.sent_at as f64) / 1000.0;
        Ok(MirrorOutcome::Applied { delay_ms })
    }
}

#[derive(Debug, Clone)]
pub struct MirrorConfig {
    pub scenario: ScenarioConfig,
    pub schedule: RateSchedule,
    pub duration_s: f64,
    /// Wall-clock time per simulated tick; shorter than `tick_ms` compresses
    /// the run.
    pub wall_tick: Duration,
    pub qos: QoS,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            schedule: RateSchedule::six_changes(),
            duration_s: 60.0,
            wall_tick: Duration::from_millis(5),
            qos: QoS::AtLeastOnce,
        }
    }
}

impl MirrorConfig {
    pub fn ticks(&self) -> u64 {
        (self.duration_s / self.scenario.tick_seconds()).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorTickRow {
    pub tick: u64,
    pub ue: usize,
    pub r_exp: f64,
    pub r_act: f64,
    pub psr: f64,
    pub sent: u64,
    pub received: u64,
    pub mirror_delay_ms: Option<f64>,
}

impl MirrorTickRow {
    pub const CSV_COLUMNS: [&'static str; 8] =
        ["tick", "ue", "r_exp", "r_act", "psr", "sent", "received", "mirror_delay_ms"];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.tick.to_string(),
            self.ue.to_string(),
            format!("{:.4}", self.r_exp),
            format!("{:.4}", self.r_act),
            format!("{:.6}", self.psr),
            self.sent.to_string(),
            self.received.to_string(),
            self.mirror_delay_ms.map_or_else(String::new, |d| format!("{d:.4}")),
        ]
    }
}

/// A transmitter rate change on the real side and when the twin followed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent {
    pub tick: u64,
    pub t_s: f64,
    pub real_pps: f64,
    pub twin_pps: f64,
    pub delay_ms: f64,
}

#[derive(Debug, Clone)]
pub struct MirrorReport {
    pub ticks: u64,
    pub rows: Vec<MirrorTickRow>,
    pub changes: Vec<ChangeEvent>,
    pub applied: u64,
    pub stale_ignored: u64,
    pub twin_counters: LinkCounters,
    /// Twin rates equalled real rates after every tick.
    pub rates_match: bool,
    /// Twin states were bit-identical to the real ones (same seed).
    pub states_identical: bool,
    pub mean_delay_ms: f64,
    pub mean_change_delay_ms: f64,
}

impl MirrorReport {
    pub fn duplicate_applications(&self) -> u64 {
        self.stale_ignored + self.twin_counters.duplicates
    }
}

struct TwinRecord {
    state: NetworkState,
    rates: Vec<f64>,
    delay_ms: f64,
}

/// Run the real side and a mirroring twin against the broker at `broker`.
///
/// The real simulator follows `schedule`, applying the same rate to every
/// UE, and publishes its state each tick; the twin applies each update and
/// steps once per update, so its state sequence is deterministic.
pub fn run_mirror_experiment(broker: SocketAddr, config: &MirrorConfig) -> Result<MirrorReport, MirrorError> {
    let ticks = config.ticks();
    let tick_s = config.scenario.tick_seconds();
    let n = config.scenario.n_ues;

    let twin_link = Link::connect(broker, LinkConfig::new("twin-mirror").with_qos(config.qos))?;
    twin_link.subscribe(topics::RW_TRAFFIC, config.qos)?;
    let real_link = Link::connect(broker, LinkConfig::new("real-mirror").with_qos(config.qos))?;

    let twin_scenario = config.scenario.clone();
    let twin = thread::Builder::new()
        .name("mirror-twin".into())
        .spawn(move || -> Result<_, MirrorError> {
            let mut twin = MirrorTwin::new(twin_scenario)?;
            let mut records = HashMap::new();
            let patience = Duration::from_secs(5);
            while twin.last_tick() != Some(ticks) {
                let Some(received) = twin_link.recv_timeout(patience) else {
                    return Err(MirrorError::Incomplete {
                        applied: records.len() as u64,
                        expected: ticks,
                    });
                };
                if let MirrorOutcome::Applied { delay_ms } =
                    twin.apply_mirror_update(&received.envelope, now_micros())?
                {
                    let state = twin.sim().state().clone();
                    records.insert(
                        state.tick_index,
                        TwinRecord {
                            rates: twin.rates_mbps().to_vec(),
                            state,
                            delay_ms,
                        },
                    );
                }
            }
            Ok((records, twin.stale_count(), twin_link.counters()))
        })
        .map_err(|e| LinkError::Handshake(e.to_string()))?;

    let mut real = CellSim::new(config.scenario.clone())?;
    let mut real_states = Vec::with_capacity(ticks as usize);
    let start = Instant::now();
    for k in 0..ticks {
        let rate = pps_to_mbps(config.schedule.rate_at(k as f64 * tick_s));
        real.apply_allocation(&vec![rate; n])?;
        let state = real.step_tick().clone();
        publish_observation(&state, &real_link)?;
        real_states.push(state);
        let due = config.wall_tick * (k as u32 + 1);
        if let Some(wait) = due.checked_sub(start.elapsed()) {
            thread::sleep(wait);
        }
    }

    let (records, stale_ignored, twin_counters) = twin.join().map_err(|_| MirrorError::TwinPanicked)??;

    let mut rows = Vec::with_capacity(real_states.len() * n);
    let mut changes = Vec::new();
    let mut rates_match = true;
    let mut states_identical = true;
    let mut delays = Vec::new();
    let mut prev_rate: Option<f64> = None;
    for state in &real_states {
        let record = records.get(&state.tick_index);
        let real_rates: Vec<f64> = state.ues.iter().map(|u| u.r_alloc_mbps).collect();
        match record {
            Some(r) => {
                rates_match &= r.rates == real_rates;
                states_identical &= &r.state == state;
                delays.push(r.delay_ms);
            }
            None => {
                rates_match = false;
                states_identical = false;
            }
        }
        let rate = real_rates[0];
        if prev_rate.is_some_and(|p| p != rate) {
            changes.push(ChangeEvent {
                tick: state.tick_index,
                t_s: (state.tick_index - 1) as f64 * tick_s,
                real_pps: mbps_to_pps(rate),
                twin_pps: record.map_or(f64::NAN, |r| mbps_to_pps(r.rates[0])),
                delay_ms: record.map_or(f64::NAN, |r| r.delay_ms),
            });
        }
        prev_rate = Some(rate);
        for (ue, u) in state.ues.iter().enumerate() {
            rows.push(MirrorTickRow {
                tick: state.tick_index,
                ue,
                r_exp: u.r_exp_mbps,
                r_act: u.r_act_mbps,
                psr: u.psr,
                sent: u.packets_sent,
                received: u.packets_received,
                mirror_delay_ms: record.map(|r| r.delay_ms),
            });
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let change_delays: Vec<f64> = changes.iter().map(|c| c.delay_ms).collect();
    Ok(MirrorReport {
        ticks,
        rows,
        applied: records.len() as u64,
        stale_ignored,
        twin_counters,
        rates_match,
        states_identical,
        mean_delay_ms: mean(&delays),
        mean_change_delay_ms: mean(&change_delays),
        changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn update(tick: u64, rate: f64) -> TrafficUpdate {
        TrafficUpdate {
            tick,
            rates_mbps: vec![rate; 3],
            rates_pps: vec![mbps_to_pps(rate); 3],
        }
    }

    #[test]
    fn duplicate_update_is_ignored() {
        let mut twin = MirrorTwin::new(ScenarioConfig::default()).unwrap();
        assert!(twin.apply_update(&update(1, 1.0)).unwrap());
        let once = twin.sim().state().clone();
        assert!(!twin.apply_update(&update(1, 1.0)).unwrap());
        assert_eq!(twin.sim().state(), &once);
        assert_eq!(twin.stale_count(), 1);
        assert!(!twin.apply_update(&update(0, 5.0)).unwrap());
        assert_eq!(twin.rates_mbps(), &[1.0; 3]);
    }

    #[test]
    fn envelope_delay_and_kind() {
        let mut twin = MirrorTwin::new(ScenarioConfig::default()).unwrap();
        let mut e = MessageEnvelope::json(topics::RW_TRAFFIC, EnvelopeKind::TrafficUpdate, &update(1, 2.0)).unwrap();
        e.sent_at = 1_000;
        assert_eq!(
            twin.apply_mirror_update(&e, 3_500).unwrap(),
            MirrorOutcome::Applied { delay_ms: 2.5 }
        );
        assert_eq!(twin.apply_mirror_update(&e, 9_000).unwrap(), MirrorOutcome::Stale);
        e.kind = EnvelopeKind::BenchPing;
        assert!(matches!(
            twin.apply_mirror_update(&e, 0),
            Err(MirrorError::WrongKind(EnvelopeKind::BenchPing))
        ));
    }

    #[test]
    fn update_carries_both_units() {
        let mut sim = CellSim::new(ScenarioConfig::default()).unwrap();
        sim.apply_allocation(&[2.0, 0.0, 1.0]).unwrap();
        let u = TrafficUpdate::from_state(sim.step_tick());
        assert_eq!(u.tick, 1);
        assert_eq!(u.rates_pps, vec![200.0, 0.0, 100.0]);
    }
}
