use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::controller::{ConfigError, Decision, LaunchReason, SadrConfig, SadrController, TrafficRequest};
use super::reward::{per_tick_reward, ActionError, ActionSet};
use super::twin::{EvalRequest, LocalTwin, TwinEvaluator};
use crate::netsim::{CellSim, ScenarioConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Gated,
    Ungated,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Gated => "gated",
            Arm::Ungated => "ungated",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("instance {index} has {got} actions for {expected} UEs")]
    InstanceLength { index: usize, expected: usize, got: usize },
}

/// Per-UE action indices for `n_ues` UEs whose rates add up to `units`
/// half-megabit steps, spread as evenly as possible.
pub fn spread_actions(units: usize, n_ues: usize) -> Vec<usize> {
    (0..n_ues)
        .map(|i| units / n_ues + usize::from(i < units % n_ues))
        .collect()
}

/// Twelve requests with aggregate demand rising from 1.5 to 13.5 Mbps.
pub fn default_instances(n_ues: usize) -> Vec<Vec<usize>> {
    [3, 5, 7, 9, 11, 13, 15, 18, 21, 23, 25, 27]
        .into_iter()
        .map(|units| spread_actions(units, n_ues))
        .collect()
}

/// Mean twin reward of the moderate-traffic `baseline` rates, averaged over
/// `evaluations` independent twin runs.
pub fn derive_app_requirements(
    scenario: &ScenarioConfig,
    baseline: &[f64],
    horizon_ticks: usize,
    evaluations: u64,
) -> Result<f64, SimError> {
    let twin = LocalTwin::new(scenario.clone());
    let mut total = 0.0;
    for id in 0..evaluations {
        let mut sim = twin.sim_for(id)?;
        let req = EvalRequest {
            request_id: id,
            rates_mbps: baseline.to_vec(),
            horizon_ticks,
        };
        total += super::twin::twin_evaluate(&mut sim, &req)?.0.twin_reward;
    }
    Ok(total / evaluations as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationConfig {
    pub scenario: ScenarioConfig,
    pub sadr: SadrConfig,
    pub action_set: ActionSet,
    /// Requested action indices per instance, in order of rising demand.
    pub instances: Vec<Vec<usize>>,
    pub dwell_ticks: usize,
    pub repetitions: usize,
    pub arms: Vec<Arm>,
}

impl EscalationConfig {
    /// Defaults: threshold at capacity, 3 Mbps safe setup per UE, app
    /// requirement from the 2 Mbps-per-UE baseline, 60 s dwell, 10 reps.
    pub fn with_seed(seed: u64) -> Result<Self, SimError> {
        Self::for_scenario(ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        })
    }

    pub fn for_scenario(scenario: ScenarioConfig) -> Result<Self, SimError> {
        scenario.validate()?;
        let horizon = 50;
        let n = scenario.n_ues;
        let app_requirements = derive_app_requirements(&scenario, &vec![2.0; n], horizon, 10)?;
        Ok(Self {
            sadr: SadrConfig {
                capacity_mbps: scenario.capacity_mbps,
                risk_threshold: 1.0,
                app_requirements,
                safe_setup: vec![3.0; n],
                twin_horizon_ticks: horizon,
            },
            action_set: ActionSet::linear(),
            instances: default_instances(n),
            dwell_ticks: 600,
            repetitions: 10,
            arms: vec![Arm::Gated, Arm::Ungated],
            scenario,
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.scenario.validate()?;
        self.sadr.validate(self.scenario.n_ues)?;
        for (index, inst) in self.instances.iter().enumerate() {
            if inst.len() != self.scenario.n_ues {
                return Err(ScenarioError::InstanceLength {
                    index,
                    expected: self.scenario.n_ues,
                    got: inst.len(),
                });
            }
            for &a in inst {
                self.action_set.map_action_to_rate(a)?;
            }
        }
        Ok(())
    }

    /// Seed of the real network in repetition `rep`; both arms share it.
    pub fn repetition_seed(&self, rep: usize) -> u64 {
        self.scenario.seed.wrapping_add(rep as u64)
    }

    /// Scenario the twin runs; its noise is independent of the real one.
    pub fn twin_scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            seed: self.scenario.seed ^ 0x7477_696e_0000_0000,
            ..self.scenario.clone()
        }
    }

    fn request_id(&self, rep: usize, instance: usize) -> u64 {
        (rep * self.instances.len() + instance + 1) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceReward {
    pub instance: usize,
    pub arm: Arm,
    pub repetition: usize,
    pub aggregate_demand_mbps: f64,
    pub mean_reward: f64,
    /// Sum of per-tick rewards from the start of the repetition through the
    /// end of this instance.
    pub cumulative_reward: f64,
    pub reason: LaunchReason,
}

impl InstanceReward {
    pub const CSV_COLUMNS: [&'static str; 4] = ["instance", "arm", "repetition", "mean_reward"];
    pub const CUMULATIVE_CSV_COLUMNS: [&'static str; 4] = ["instance", "arm", "repetition", "cumulative_reward"];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.instance.to_string(),
            self.arm.as_str().to_owned(),
            self.repetition.to_string(),
            format!("{:.6}", self.mean_reward),
        ]
    }

    pub fn cumulative_csv_row(&self) -> Vec<String> {
        vec![
            self.instance.to_string(),
            self.arm.as_str().to_owned(),
            self.repetition.to_string(),
            format!("{:.6}", self.cumulative_reward),
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct EscalationReport {
    pub rows: Vec<InstanceReward>,
    /// Requests that fell back to the safe setup because the twin did not
    /// answer.
    pub fallbacks: u64,
    pub unknown_evaluations: u64,
}

impl EscalationReport {
    /// Mean reward per instance over repetitions.
    pub fn instance_means(&self, arm: Arm) -> Vec<f64> {
        let n = self.rows.iter().map(|r| r.instance + 1).max().unwrap_or(0);
        let mut sums = vec![(0.0, 0usize); n];
        for r in self.rows.iter().filter(|r| r.arm == arm) {
            sums[r.instance].0 += r.mean_reward;
            sums[r.instance].1 += 1;
        }
        sums.into_iter().map(|(s, c)| s / c as f64).collect()
    }

    /// Relative gain of the gated arm over the ungated one across the given
    /// instances.
    pub fn relative_gain(&self, instances: std::ops::Range<usize>) -> f64 {
        let g = self.instance_means(Arm::Gated);
        let u = self.instance_means(Arm::Ungated);
        let gated: f64 = g[instances.clone()].iter().sum();
        let ungated: f64 = u[instances].iter().sum();
        (gated - ungated) / ungated
    }
}

/// Play every instance in order of rising demand, once with twin gating and
/// once with every request launched directly (or just the configured arms),
/// for each repetition.
///
/// Ticks are simulated without wall-clock pacing; a deferred request holds
/// the real network still until the twin answers.
pub fn run_escalating_scenario(
    config: &EscalationConfig,
    evaluator: &mut dyn TwinEvaluator,
) -> Result<EscalationReport, ScenarioError> {
    config.validate()?;
    let mut report = EscalationReport::default();
    for rep in 0..config.repetitions {
        for &arm in &config.arms {
            let mut controller = SadrController::new(config.sadr.clone());
            let mut sim = CellSim::new(ScenarioConfig {
                seed: config.repetition_seed(rep),
                ..config.scenario.clone()
            })?;
            let mut cumulative = 0.0;
            for (instance, actions) in config.instances.iter().enumerate() {
                let req = TrafficRequest::new(config.request_id(rep, instance), actions.clone(), &config.action_set)?;
                let launch = match arm {
                    Arm::Ungated => super::controller::Launch {
                        request_id: req.request_id,
                        expected: req.risk_vector.clone(),
                        granted: req.risk_vector.clone(),
                        reason: LaunchReason::Direct,
                    },
                    Arm::Gated => decide(&mut controller, req, evaluator, config.sadr.twin_horizon_ticks),
                };
                sim.apply_request(&launch.expected, &launch.granted)?;
                let mut sum = 0.0;
                for _ in 0..config.dwell_ticks {
                    sum += per_tick_reward(sim.step_tick());
                }
                cumulative += sum;
                report.rows.push(InstanceReward {
                    instance,
                    arm,
                    repetition: rep,
                    aggregate_demand_mbps: launch.expected.iter().sum(),
                    mean_reward: sum / config.dwell_ticks as f64,
                    cumulative_reward: cumulative,
                    reason: launch.reason,
                });
            }
            report.fallbacks += controller.fallbacks();
            report.unknown_evaluations += controller.unknown_evaluations();
        }
    }
    Ok(report)
}

fn decide(
    controller: &mut SadrController,
    req: TrafficRequest,
    evaluator: &mut dyn TwinEvaluator,
    horizon: usize,
) -> super::controller::Launch {
    let id = req.request_id;
    match controller.on_traffic_request(req) {
        Decision::LaunchDirectly(launch) => launch,
        Decision::DeferToTwin(req) => {
            let verdict = evaluator
                .evaluate(&EvalRequest::for_request(&req, horizon))
                .map_err(|e| warn!("twin evaluation of request {id} failed: {e}"))
                .ok()
                .and_then(|eval| controller.on_twin_evaluation_completed(&eval));
            verdict.unwrap_or_else(|| {
                controller
                    .on_twin_unreachable(id)
                    .expect("deferred request is pending until answered")
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sadr::twin::EvalError;
    use crate::sadr::TwinEvaluation;

    #[test]
    fn instances_rise_in_demand() {
        let set = ActionSet::linear();
        let sums: Vec<f64> = default_instances(3)
            .iter()
            .map(|a| a.iter().map(|&i| set.map_action_to_rate(i).unwrap()).sum())
            .collect();
        assert_eq!(sums.first(), Some(&1.5));
        assert_eq!(sums.last(), Some(&13.5));
        assert!(sums.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(spread_actions(7, 3), vec![3, 2, 2]);
    }

    #[test]
    fn lowest_instance_is_identical_across_arms() {
        let mut config = EscalationConfig::with_seed(3).unwrap();
        config.repetitions = 1;
        config.dwell_ticks = 50;
        let report = run_escalating_scenario(&config, &mut LocalTwin::new(config.twin_scenario())).unwrap();
        let g = report.instance_means(Arm::Gated);
        let u = report.instance_means(Arm::Ungated);
        assert_eq!(g[0], u[0]);
        assert!(g[0] > 2.9);
    }

    struct Silent;
    impl TwinEvaluator for Silent {
        fn evaluate(&mut self, req: &EvalRequest) -> Result<TwinEvaluation, EvalError> {
            Err(EvalError::Timeout {
                request_id: req.request_id,
                timeout: std::time::Duration::ZERO,
            })
        }
    }

    #[test]
    fn silent_twin_falls_back_and_flags() {
        let mut config = EscalationConfig::with_seed(1).unwrap();
        config.repetitions = 1;
        config.dwell_ticks = 5;
        let report = run_escalating_scenario(&config, &mut Silent).unwrap();
        let risky = report
            .rows
            .iter()
            .filter(|r| r.arm == Arm::Gated && r.aggregate_demand_mbps > 9.0)
            .count();
        assert_eq!(report.fallbacks, risky as u64);
        assert!(report
            .rows
            .iter()
            .filter(|r| r.arm == Arm::Gated && r.aggregate_demand_mbps > 9.0)
            .all(|r| r.reason == LaunchReason::TwinUnreachable));
    }
}
