use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::reward::{compute_risk, ActionError, ActionSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("risk threshold must be positive, got {0}")]
    Threshold(f64),
    #[error("safe setup risk {risk} exceeds threshold {threshold}")]
    UnsafeSetup { risk: f64, threshold: f64 },
    #[error("safe setup has {got} rates for {expected} UEs")]
    SetupLength { expected: usize, got: usize },
    #[error("twin horizon must be at least one tick")]
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRequest {
    pub request_id: u64,
    pub actions: Vec<usize>,
    /// Requested per-UE rates, `f(actions[i])`.
    pub risk_vector: Vec<f64>,
}

impl TrafficRequest {
    pub fn new(request_id: u64, actions: Vec<usize>, action_set: &ActionSet) -> Result<Self, ActionError> {
        let risk_vector = actions
            .iter()
            .map(|&a| action_set.map_action_to_rate(a))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            request_id,
            actions,
            risk_vector,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SadrConfig {
    pub capacity_mbps: f64,
    pub risk_threshold: f64,
    /// Minimum acceptable twin reward.
    pub app_requirements: f64,
    pub safe_setup: Vec<f64>,
    pub twin_horizon_ticks: usize,
}

impl SadrConfig {
    pub fn validate(&self, n_ues: usize) -> Result<(), ConfigError> {
        if !(self.risk_threshold > 0.0) {
            return Err(ConfigError::Threshold(self.risk_threshold));
        }
        if self.safe_setup.len() != n_ues {
            return Err(ConfigError::SetupLength {
                expected: n_ues,
                got: self.safe_setup.len(),
            });
        }
        let risk = compute_risk(&self.safe_setup, self.capacity_mbps);
        if risk > self.risk_threshold {
            return Err(ConfigError::UnsafeSetup {
                risk,
                threshold: self.risk_threshold,
            });
        }
        if self.twin_horizon_ticks == 0 {
            return Err(ConfigError::Horizon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinEvaluation {
    pub request_id: u64,
    /// Mean of `per_tick_rewards`.
    pub twin_reward: f64,
    pub per_tick_rewards: Vec<f64>,
}

impl TwinEvaluation {
    pub fn from_rewards(request_id: u64, per_tick_rewards: Vec<f64>) -> Self {
        let twin_reward = if per_tick_rewards.is_empty() {
            f64::NAN
        } else {
            per_tick_rewards.iter().sum::<f64>() / per_tick_rewards.len() as f64
        };
        Self {
            request_id,
            twin_reward,
            per_tick_rewards,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LaunchReason {
    /// Risk within threshold.
    Direct,
    /// Twin reward met the application requirement.
    TwinApproved,
    /// Twin reward fell short.
    SafeSetup,
    /// The twin could not be consulted.
    TwinUnreachable,
}

/// Configuration to put on the real network. `granted` never exceeds
/// `expected`.
#[derive(Debug, Clone, PartialEq)]
pub struct Launch {
    pub request_id: u64,
    pub expected: Vec<f64>,
    pub granted: Vec<f64>,
    pub reason: LaunchReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    LaunchDirectly(Launch),
    DeferToTwin(TrafficRequest),
}

/// The gating decision as an event-driven state machine. It never touches the
/// network itself: callers apply the returned [`Launch`]es and carry
/// evaluation requests to the twin.
#[derive(Debug, Clone)]
pub struct SadrController {
    config: SadrConfig,
    pending: BTreeMap<u64, TrafficRequest>,
    unknown_evaluations: u64,
    fallbacks: u64,
}

impl SadrController {
    pub fn new(config: SadrConfig) -> Self {
        Self {
            config,
            pending: BTreeMap::new(),
            unknown_evaluations: 0,
            fallbacks: 0,
        }
    }

    pub fn config(&self) -> &SadrConfig {
        &self.config
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn unknown_evaluations(&self) -> u64 {
        self.unknown_evaluations
    }

    /// Requests that fell back to the safe setup because the twin was
    /// unreachable; a non-zero value flags the run.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    pub fn on_traffic_request(&mut self, req: TrafficRequest) -> Decision {
        let risk = compute_risk(&req.risk_vector, self.config.capacity_mbps);
        if risk > self.config.risk_threshold {
            self.pending.insert(req.request_id, req.clone());
            Decision::DeferToTwin(req)
        } else {
            Decision::LaunchDirectly(Launch {
                request_id: req.request_id,
                granted: req.risk_vector.clone(),
                expected: req.risk_vector,
                reason: LaunchReason::Direct,
            })
        }
    }

    /// Returns `None` for an evaluation of a request that is not pending.
    pub fn on_twin_evaluation_completed(&mut self, eval: &TwinEvaluation) -> Option<Launch> {
        let Some(req) = self.pending.remove(&eval.request_id) else {
            self.unknown_evaluations += 1;
            return None;
        };
        if eval.twin_reward >= self.config.app_requirements {
            Some(Launch {
                request_id: req.request_id,
                granted: req.risk_vector.clone(),
                expected: req.risk_vector,
                reason: LaunchReason::TwinApproved,
            })
        } else {
            Some(self.safe_launch(req, LaunchReason::SafeSetup))
        }
    }

    pub fn on_twin_unreachable(&mut self, request_id: u64) -> Option<Launch> {
        let req = self.pending.remove(&request_id)?;
        self.fallbacks += 1;
        Some(self.safe_launch(req, LaunchReason::TwinUnreachable))
    }

    /// Safe setup, capped per UE at what was requested.
    pub fn safe_rates(&self, requested: &[f64]) -> Vec<f64> {
        requested
            .iter()
            .zip(&self.config.safe_setup)
            .map(|(&r, &s)| r.min(s))
            .collect()
    }

    fn safe_launch(&self, req: TrafficRequest, reason: LaunchReason) -> Launch {
        Launch {
            request_id: req.request_id,
            granted: self.safe_rates(&req.risk_vector),
            expected: req.risk_vector,
            reason,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn controller(threshold: f64, app: f64) -> SadrController {
        SadrController::new(SadrConfig {
            capacity_mbps: 9.0,
            risk_threshold: threshold,
            app_requirements: app,
            safe_setup: vec![3.0; 3],
            twin_horizon_ticks: 50,
        })
    }

    fn req(id: u64, rates: [f64; 3]) -> TrafficRequest {
        TrafficRequest {
            request_id: id,
            actions: rates.iter().map(|r| (r * 2.0) as usize).collect(),
            risk_vector: rates.to_vec(),
        }
    }

    #[test]
    fn low_risk_launches_directly() {
        let mut c = controller(0.8, 2.1);
        // risk 0.5
        let d = c.on_traffic_request(req(1, [1.5; 3]));
        assert!(matches!(d, Decision::LaunchDirectly(Launch { reason: LaunchReason::Direct, .. })));
        assert_eq!(c.pending(), 0);
    }

    #[test]
    fn high_risk_defers() {
        let mut c = controller(0.8, 2.1);
        // risk 1.5
        assert!(matches!(c.on_traffic_request(req(1, [4.5; 3])), Decision::DeferToTwin(_)));
        assert_eq!(c.pending(), 1);
    }

    #[test]
    fn risk_at_threshold_is_not_risky() {
        let mut c = controller(1.0, 2.1);
        assert!(matches!(c.on_traffic_request(req(1, [3.0; 3])), Decision::LaunchDirectly(_)));
    }

    #[test]
    fn twin_verdicts() {
        let mut c = controller(0.8, 2.1);
        for (id, reward, reason) in [
            (1, 2.4, LaunchReason::TwinApproved),
            (2, 1.8, LaunchReason::SafeSetup),
            (3, 2.1, LaunchReason::TwinApproved),
        ] {
            c.on_traffic_request(req(id, [4.5, 4.5, 2.0]));
            let l = c
                .on_twin_evaluation_completed(&TwinEvaluation::from_rewards(id, vec![reward]))
                .unwrap();
            assert_eq!(l.reason, reason);
            assert_eq!(l.expected, vec![4.5, 4.5, 2.0]);
            let granted = if reason == LaunchReason::SafeSetup {
                vec![3.0, 3.0, 2.0]
            } else {
                vec![4.5, 4.5, 2.0]
            };
            assert_eq!(l.granted, granted);
        }
    }

    #[test]
    fn unknown_and_repeated_evaluations_are_counted() {
        let mut c = controller(0.8, 2.1);
        assert!(c
            .on_twin_evaluation_completed(&TwinEvaluation::from_rewards(9, vec![3.0]))
            .is_none());
        c.on_traffic_request(req(1, [4.5; 3]));
        let e = TwinEvaluation::from_rewards(1, vec![3.0]);
        assert!(c.on_twin_evaluation_completed(&e).is_some());
        assert!(c.on_twin_evaluation_completed(&e).is_none());
        assert_eq!(c.unknown_evaluations(), 2);
    }

    #[test]
    fn unreachable_twin_falls_back_to_safe_setup() {
        let mut c = controller(0.8, 2.1);
        c.on_traffic_request(req(4, [4.5; 3]));
        let l = c.on_twin_unreachable(4).unwrap();
        assert_eq!(l.reason, LaunchReason::TwinUnreachable);
        assert_eq!(l.granted, vec![3.0; 3]);
        assert_eq!(c.fallbacks(), 1);
        assert!(c.on_twin_unreachable(4).is_none());
    }

    #[test]
    fn config_validation() {
        let mut cfg = controller(1.0, 2.0).config().clone();
        assert!(cfg.validate(3).is_ok());
        cfg.risk_threshold = 0.5;
        assert!(matches!(cfg.validate(3), Err(ConfigError::UnsafeSetup { .. })));
        cfg.risk_threshold = 0.0;
        assert!(matches!(cfg.validate(3), Err(ConfigError::Threshold(_))));
    }
}
