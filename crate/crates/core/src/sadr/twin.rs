use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::controller::{TrafficRequest, TwinEvaluation};
use super::reward::per_tick_reward;
use crate::mqtt::QoS;
use crate::netsim::{CellSim, NetworkState, ScenarioConfig, SimError};
use crate::twinlink::{topics, EnvelopeError, EnvelopeKind, Link, LinkConfig, LinkError, MessageEnvelope};

/// Payload of an `EvalRequest` envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub request_id: u64,
    pub rates_mbps: Vec<f64>,
    pub horizon_ticks: usize,
}

impl EvalRequest {
    pub fn for_request(req: &TrafficRequest, horizon_ticks: usize) -> Self {
        Self {
            request_id: req.request_id,
            rates_mbps: req.risk_vector.clone(),
            horizon_ticks,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no evaluation of request {request_id} within {timeout:?}")]
    Timeout { request_id: u64, timeout: Duration },
}

/// Apply the requested rates to the twin and run `horizon_ticks` ticks.
/// Returns the evaluation and the twin's tick log.
pub fn twin_evaluate(
    twin_sim: &mut CellSim,
    req: &EvalRequest,
) -> Result<(TwinEvaluation, Vec<NetworkState>), SimError> {
    twin_sim.apply_allocation(&req.rates_mbps)?;
    let log = twin_sim.run(req.horizon_ticks);
    let rewards = log.iter().map(per_tick_reward).collect();
    Ok((TwinEvaluation::from_rewards(req.request_id, rewards), log))
}

/// Anything that can answer an evaluation request.
pub trait TwinEvaluator {
    fn evaluate(&mut self, req: &EvalRequest) -> Result<TwinEvaluation, EvalError>;
}

/// Evaluates in-process. Each request runs on a fresh twin seeded from the
/// scenario seed and the request id, so the answer does not depend on the
/// order requests arrive in.
#[derive(Debug, Clone)]
pub struct LocalTwin {
    scenario: ScenarioConfig,
}

impl LocalTwin {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Self { scenario }
    }

    pub fn sim_for(&self, request_id: u64) -> Result<CellSim, SimError> {
        let seed = self.scenario.seed ^ request_id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        CellSim::new(ScenarioConfig {
            seed,
            ..self.scenario.clone()
        })
    }
}

impl TwinEvaluator for LocalTwin {
    fn evaluate(&mut self, req: &EvalRequest) -> Result<TwinEvaluation, EvalError> {
        let mut sim = self.sim_for(req.request_id)?;
        Ok(twin_evaluate(&mut sim, req)?.0)
    }
}

/// Sends requests on `rw/request` and waits for the matching result on
/// `dt/eval/result`.
pub struct RemoteTwin {
    link: Link,
    timeout: Duration,
}

impl RemoteTwin {
    pub fn connect(broker: SocketAddr, client_id: &str, timeout: Duration) -> Result<Self, EvalError> {
        let link = Link::connect(broker, LinkConfig::new(client_id).with_qos(QoS::AtLeastOnce))?;
        link.subscribe(topics::DT_EVAL_RESULT, QoS::AtLeastOnce)?;
        Ok(Self { link, timeout })
    }

    pub fn link(&self) -> &Link {
        &self.link
    }
}

impl TwinEvaluator for RemoteTwin {
    fn evaluate(&mut self, req: &EvalRequest) -> Result<TwinEvaluation, EvalError> {
        let envelope = MessageEnvelope::json(topics::RW_REQUEST, EnvelopeKind::EvalRequest, req)?;
        self.link.publish_envelope(envelope)?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let Some(received) = self.link.recv_timeout(left) else {
                return Err(EvalError::Timeout {
                    request_id: req.request_id,
                    timeout: self.timeout,
                });
            };
            if received.envelope.kind != EnvelopeKind::EvalResult {
                continue;
            }
            let eval: TwinEvaluation = received.envelope.payload_json()?;
            if eval.request_id == req.request_id {
                return Ok(eval);
            }
            debug!("ignoring late evaluation of request {}", eval.request_id);
        }
    }
}

/// Twin-side loop answering evaluation requests over the link.
pub struct TwinService {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<u64>>,
}

impl TwinService {
    pub fn spawn(broker: SocketAddr, scenario: ScenarioConfig) -> Result<Self, EvalError> {
        let link = Link::connect(broker, LinkConfig::new("twin-sadr").with_qos(QoS::AtLeastOnce))?;
        link.subscribe(topics::RW_REQUEST, QoS::AtLeastOnce)?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = thread::Builder::new()
            .name("twin-sadr".into())
            .spawn(move || serve(link, LocalTwin::new(scenario), flag))
            .map_err(|e| LinkError::Handshake(e.to_string()))?;
        Ok(Self {
            stop,
            handle: Some(handle),
        })
    }

    /// Stop serving; returns the number of evaluations answered.
    pub fn stop(mut self) -> u64 {
        self.shutdown()
    }

    fn shutdown(&mut self) -> u64 {
        self.stop.store(true, Ordering::SeqCst);
        self.handle.take().map_or(0, |h| h.join().unwrap_or(0))
    }
}

impl Drop for TwinService {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve(link: Link, mut twin: LocalTwin, stop: Arc<AtomicBool>) -> u64 {
    let mut served = 0;
    while !stop.load(Ordering::SeqCst) {
        let Some(received) = link.recv_timeout(Duration::from_millis(50)) else {
            continue;
        };
        if received.envelope.kind != EnvelopeKind::EvalRequest {
            continue;
        }
        let result = received
            .envelope
            .payload_json::<EvalRequest>()
            .map_err(EvalError::from)
            .and_then(|req| twin.evaluate(&req))
            .and_then(|eval| Ok(MessageEnvelope::json(topics::DT_EVAL_RESULT, EnvelopeKind::EvalResult, &eval)?))
            .and_then(|env| Ok(link.publish_envelope(env)?));
        match result {
            Ok(_) => served += 1,
            Err(e) => warn!("twin evaluation failed: {e}"),
        }
    }
    served
}
