//! Jamming detection at the base station, with models for relocated pilots
//! built on demand by the twin.
mod codec;
mod config;
mod data;
mod factory;
mod model;
mod station;

pub use codec::{decode_model, encode_model, encoded_len, header_len, ModelCodecError, FORMAT_VERSION, MAGIC};
pub use config::{select_new_pilots, PilotConfig, PilotError};
pub use data::{
    base_powers, collect_frames, generate_frame, generate_frame_with, make_dataset, process_frames, DataError,
    Dataset, NormStats, SpectrumFrame, DATA_POWER, JAMMER_POWER, NOISE_POWER, PILOT_POWER, POWER_SIGMA,
};
pub use model::{
    accuracy, argmax, log_sum_exp, loss_and_gradient, predict, train_model, ClassifierModel, LossGradient,
    PredictError, Prediction, TrainError, TrainHyper, TrainedModel,
};
pub use factory::{
    run_pilot_scenario, run_redeploy_pipeline, BuiltModel, FactoryError, FactoryTimings, ModelFactory, ModelRequest,
    PilotScenarioConfig, PilotScenarioReport, PipelineEndpoints, PipelineError, RedeployOutcome, RedeployTiming,
};
pub use station::{detect_loop, BaseStation, Deployment, DetectLoop, JamEvent, SwapError};
