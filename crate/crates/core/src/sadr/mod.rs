//! Safe adaptive data rate: risky traffic requests are tried in the twin
//! before they reach the real network.
mod controller;
mod reward;
mod scenario;
mod twin;

pub use controller::{
    ConfigError, Decision, Launch, LaunchReason, SadrConfig, SadrController, TrafficRequest, TwinEvaluation,
};
pub use reward::{compute_risk, map_action_to_rate, per_tick_reward, ActionError, ActionSet};
pub use scenario::{
    default_instances, derive_app_requirements, run_escalating_scenario, spread_actions, Arm, EscalationConfig,
    EscalationReport, InstanceReward, ScenarioError,
};
pub use twin::{twin_evaluate, EvalError, EvalRequest, LocalTwin, RemoteTwin, TwinEvaluator, TwinService};
