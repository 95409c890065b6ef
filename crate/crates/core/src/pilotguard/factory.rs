use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codec::{decode_model, encode_model, ModelCodecError};
use super::config::{select_new_pilots, PilotConfig, PilotError};
use super::data::{collect_frames, generate_frame, process_frames, DataError};
use super::model::{accuracy, train_model, ClassifierModel, PredictError, TrainError, TrainHyper};
use super::station::{detect_loop, BaseStation, Deployment, JamEvent, SwapError};
use crate::mqtt::QoS;
use crate::twinlink::{topics, EnvelopeError, EnvelopeKind, Link, LinkConfig, LinkError, MessageEnvelope, Received};

/// Payload of a `ModelRequest` envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    #[serde(rename = "K")]
    pub k: usize,
    pub pilot_indices: Vec<usize>,
    pub scenario_label: String,
    pub seed: u64,
}

impl ModelRequest {
    pub fn new(pilots: &PilotConfig, seed: u64) -> Self {
        Self {
            k: pilots.n_subcarriers(),
            pilot_indices: pilots.pilot_indices().to_vec(),
            scenario_label: pilots.label().to_owned(),
            seed,
        }
    }

    pub fn pilot_config(&self) -> Result<PilotConfig, PilotError> {
        PilotConfig::new(self.k, self.pilot_indices.clone(), self.scenario_label.clone())
    }
}

#[derive(Debug, Error)]
pub enum FactoryError {
    #[error(transparent)]
    Pilots(#[from] PilotError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FactoryTimings {
    pub data_collection_s: f64,
    pub data_processing_s: f64,
    pub model_creation_s: f64,
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: ClassifierModel,
    pub timings: FactoryTimings,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Twin-side model synthesis: generate jammer data for the requested pilot
/// layout, normalise it and train a classifier.
#[derive(Debug, Clone)]
pub struct ModelFactory {
    pub n_train: usize,
    pub n_test: usize,
    pub hyper: TrainHyper,
}

impl Default for ModelFactory {
    fn default() -> Self {
        Self {
            n_train: 5000,
            n_test: 1000,
            hyper: TrainHyper::default(),
        }
    }
}

impl ModelFactory {
    pub fn build(&self, req: &ModelRequest, version: u32) -> Result<BuiltModel, FactoryError> {
        let pilots = req.pilot_config()?;

        let t = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let train_frames = collect_frames(&pilots, self.n_train, &mut rng)?;
        let test_frames = collect_frames(&pilots, self.n_test, &mut rng)?;
        let data_collection_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let (train, test, norm) = process_frames(&train_frames, &test_frames);
        let data_processing_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let trained = train_model(&train, pilots, norm, self.hyper, req.seed)?;
        let model_creation_s = t.elapsed().as_secs_f64();

        let mut model = trained.model;
        model.version = version;
        Ok(BuiltModel {
            test_accuracy: accuracy(&model, &test),
            train_accuracy: trained.train_accuracy,
            model,
            timings: FactoryTimings {
                data_collection_s,
                data_processing_s,
                model_creation_s,
            },
        })
    }
}

/// Stage durations of one redeployment, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RedeployTiming {
    pub channel_size: String,
    pub data_transfer_s: f64,
    pub data_collection_s: f64,
    pub data_processing_s: f64,
    pub model_creation_s: f64,
    pub total_deployment_s: f64,
}

impl RedeployTiming {
    pub const CSV_COLUMNS: [&'static str; 6] = [
        "channel_size",
        "data_transfer_s",
        "data_collection_s",
        "data_processing_s",
        "model_creation_s",
        "total_deployment_s",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.channel_size.clone(),
            format!("{:.6}", self.data_transfer_s),
            format!("{:.6}", self.data_collection_s),
            format!("{:.6}", self.data_processing_s),
            format!("{:.6}", self.model_creation_s),
            format!("{:.6}", self.total_deployment_s),
        ]
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Codec(#[from] ModelCodecError),
    #[error(transparent)]
    Swap(#[from] SwapError),
    #[error(transparent)]
    Pilots(#[from] PilotError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Factory(#[from] FactoryError),
    #[error("twin could not build the model: {0}")]
    Remote(String),
    #[error("no {0} within the timeout")]
    Timeout(&'static str),
    #[error("jamming was not detected")]
    NotDetected,
}

/// The two ends of the model exchange: base station and twin.
pub struct PipelineEndpoints {
    pub bs: Link,
    pub dt: Link,
    pub timeout: Duration,
}

impl PipelineEndpoints {
    pub fn connect(broker: SocketAddr) -> Result<Self, LinkError> {
        let qos = QoS::AtLeastOnce;
        let bs = Link::connect(broker, LinkConfig::new("bs-pilot").with_qos(qos))?;
        let dt = Link::connect(broker, LinkConfig::new("dt-pilot").with_qos(qos))?;
        bs.subscribe(topics::DT_MODEL_ARTIFACT, qos)?;
        dt.subscribe(topics::DT_MODEL_REQUEST, qos)?;
        Ok(Self {
            bs,
            dt,
            timeout: Duration::from_secs(30),
        })
    }

    fn recv(link: &Link, kind: EnvelopeKind, timeout: Duration, what: &'static str) -> Result<Received, PipelineError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let r = link.recv_timeout(left).ok_or(PipelineError::Timeout(what))?;
            if r.envelope.kind == kind {
                return Ok(r);
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RemoteFailure {
    error: String,
}

#[derive(Debug, Clone)]
pub struct RedeployOutcome {
    pub deployment: Arc<Deployment>,
    pub timing: RedeployTiming,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Request a model for `new_pilots` from the twin, receive it and swap it
/// in together with the new pilots. On any failure the station keeps its
/// current deployment.
pub fn run_redeploy_pipeline(
    endpoints: &PipelineEndpoints,
    station: &BaseStation,
    factory: &ModelFactory,
    new_pilots: &PilotConfig,
    seed: u64,
) -> Result<RedeployOutcome, PipelineError> {
    let start = Instant::now();
    let version = station.deployment().model.version + 1;
    let request = ModelRequest::new(new_pilots, seed);
    endpoints.bs.publish_envelope(MessageEnvelope::json(
        topics::DT_MODEL_REQUEST,
        EnvelopeKind::ModelRequest,
        &request,
    )?)?;

    // twin side
    let received = PipelineEndpoints::recv(&endpoints.dt, EnvelopeKind::ModelRequest, endpoints.timeout, "model request")?;
    let request_transfer_s = received.latency_ms().max(0.0) / 1000.0;
    let request: ModelRequest = received.envelope.payload_json()?;
    let built = factory.build(&request, version);
    let payload = match &built {
        Ok(b) => encode_model(&b.model),
        Err(e) => serde_json::to_vec(&RemoteFailure { error: e.to_string() }).expect("plain struct"),
    };
    endpoints.dt.publish_envelope(MessageEnvelope::new(
        topics::DT_MODEL_ARTIFACT,
        EnvelopeKind::ModelArtifactMsg,
        payload,
    ))?;

    // base station side
    let received =
        PipelineEndpoints::recv(&endpoints.bs, EnvelopeKind::ModelArtifactMsg, endpoints.timeout, "model artifact")?;
    let artifact_transfer_s = received.latency_ms().max(0.0) / 1000.0;
    let blob = &received.envelope.payload;
    if blob.first() == Some(&b'{') {
        let failure: RemoteFailure = received.envelope.payload_json()?;
        return Err(PipelineError::Remote(failure.error));
    }
    let model = decode_model(blob)?;
    station.swap(Deployment::new(new_pilots.clone(), model)?);
    let total_deployment_s = start.elapsed().as_secs_f64();

    let built = built.expect("a blob is only sent for a built model");
    Ok(RedeployOutcome {
        deployment: station.deployment(),
        timing: RedeployTiming {
            channel_size: new_pilots.label().to_owned(),
            data_transfer_s: request_transfer_s + artifact_transfer_s,
            data_collection_s: built.timings.data_collection_s,
            data_processing_s: built.timings.data_processing_s,
            model_creation_s: built.timings.model_creation_s,
            total_deployment_s,
        },
        train_accuracy: built.train_accuracy,
        test_accuracy: built.test_accuracy,
    })
}

#[derive(Debug, Clone)]
pub struct PilotScenarioConfig {
    pub pilots: PilotConfig,
    pub factory: ModelFactory,
    pub seed: u64,
    pub clean_frames: usize,
    pub jammed_frames: usize,
}

impl PilotScenarioConfig {
    pub fn new(pilots: PilotConfig, seed: u64) -> Self {
        Self {
            pilots,
            factory: ModelFactory::default(),
            seed,
            clean_frames: 20,
            jammed_frames: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PilotScenarioReport {
    pub initial_pilots: PilotConfig,
    pub new_pilots: PilotConfig,
    /// Events on the clean prefix of the initial stream.
    pub false_alarms: usize,
    pub trigger: JamEvent,
    pub redeploy: RedeployOutcome,
    /// Jam event raised after the swap by a jammer on a relocated pilot.
    pub post_swap: Option<JamEvent>,
    pub jammed_subcarrier_after: usize,
    /// Deployments the concurrent detector observed during the swap, and how
    /// many of them paired a model with foreign pilots.
    pub observed_deployments: u64,
    pub mixed_deployments: u64,
}

impl PilotScenarioReport {
    pub const TABLE_COLUMNS: [&'static str; 6] =
        ["channel_size", "n_subcarriers", "n_pilots", "seed", "train_accuracy", "test_accuracy"];

    pub fn table_row(&self, seed: u64) -> Vec<String> {
        vec![
            self.new_pilots.label().to_owned(),
            self.new_pilots.n_subcarriers().to_string(),
            self.new_pilots.n_pilots().to_string(),
            seed.to_string(),
            format!("{:.4}", self.redeploy.train_accuracy),
            format!("{:.4}", self.redeploy.test_accuracy),
        ]
    }
}

/// Full jamming scenario: detect a jammer on the current pilots, move the
/// pilots, have the twin build a model for them, swap it in and detect a
/// jammer on the new layout. A second thread keeps classifying throughout
/// and checks every deployment it sees is a matched pair.
pub fn run_pilot_scenario(broker: SocketAddr, config: &PilotScenarioConfig) -> Result<PilotScenarioReport, PipelineError> {
    let pilots = &config.pilots;
    let initial = config.factory.build(&ModelRequest::new(pilots, config.seed), 1)?;
    let station = Arc::new(BaseStation::new(Deployment::new(pilots.clone(), initial.model)?));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xF00D);
    let jam_class = 1 + (config.seed as usize % pilots.n_pilots());
    let clean = (0..config.clean_frames)
        .map(|_| generate_frame(pilots, 0, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let false_alarms = detect_loop(&station, &clean)?.len();
    let jammed = (0..config.jammed_frames)
        .map(|_| generate_frame(pilots, jam_class, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let trigger = detect_loop(&station, &jammed)?
        .into_iter()
        .next()
        .ok_or(PipelineError::NotDetected)?;

    let new_pilots = select_new_pilots(pilots, trigger.pilot_subcarrier, config.seed)?;

    let stop = Arc::new(AtomicBool::new(false));
    let observed = Arc::new(AtomicU64::new(0));
    let mixed = Arc::new(AtomicU64::new(0));
    let watcher = {
        let (station, stop, observed, mixed) = (station.clone(), stop.clone(), observed.clone(), mixed.clone());
        let seed = config.seed;
        thread::spawn(move || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBEEF);
            while !stop.load(Ordering::SeqCst) {
                let d = station.deployment();
                observed.fetch_add(1, Ordering::Relaxed);
                if !d.is_matched() {
                    mixed.fetch_add(1, Ordering::Relaxed);
                }
                if let Ok(frame) = generate_frame(&d.pilots, 0, &mut rng) {
                    let _ = station.detect(&frame);
                }
                thread::sleep(Duration::from_millis(1));
            }
        })
    };

    let endpoints = PipelineEndpoints::connect(broker)?;
    let redeploy = run_redeploy_pipeline(&endpoints, &station, &config.factory, &new_pilots, config.seed.wrapping_add(1));
    stop.store(true, Ordering::SeqCst);
    let _ = watcher.join();
    let redeploy = redeploy?;

    let jam_after = 1 + (config.seed as usize + 1) % new_pilots.n_pilots();
    let jammed_after = (0..config.jammed_frames)
        .map(|_| generate_frame(&new_pilots, jam_after, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let post_swap = detect_loop(&station, &jammed_after)?.into_iter().next();

    Ok(PilotScenarioReport {
        initial_pilots: pilots.clone(),
        jammed_subcarrier_after: new_pilots.pilot_indices()[jam_after - 1],
        new_pilots,
        false_alarms,
        trigger,
        redeploy,
        post_swap,
        observed_deployments: observed.load(Ordering::Relaxed),
        mixed_deployments: mixed.load(Ordering::Relaxed),
    })
}
