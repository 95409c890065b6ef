//! Reward oracle and safety of twin gating.

mod common;

use common::{oracle_reward, random_state};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twinet::netsim::{CellSim, ScenarioConfig};
use twinet::sadr::{
    per_tick_reward, run_escalating_scenario, twin_evaluate, Arm, Decision, EscalationConfig, EvalRequest,
    LaunchReason, LocalTwin, SadrController, TrafficRequest, TwinEvaluator,
};

#[test]
fn reward_matches_oracle_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let (got, want) = (per_tick_reward(&s), oracle_reward(&s));
        assert!((got - want).abs() <= 1e-12, "{got} vs {want} for {s:?}");
        assert!(got <= s.ues.len() as f64);
    }
}

#[test]
fn twin_reward_is_mean_of_its_tick_log() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for id in 0..50u64 {
        let rates: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..6.0)).collect();
        let mut sim = CellSim::new(ScenarioConfig { seed: id, ..ScenarioConfig::default() }).unwrap();
        let req = EvalRequest {
            request_id: id,
            rates_mbps: rates,
            horizon_ticks: 50,
        };
        let (eval, log) = twin_evaluate(&mut sim, &req).unwrap();
        assert_eq!(log.len(), 50);
        let mean = log.iter().map(oracle_reward).sum::<f64>() / 50.0;
        assert!((eval.twin_reward - mean).abs() <= 1e-12);
    }
}

fn noiseless_config() -> EscalationConfig {
    let mut cfg = EscalationConfig::for_scenario(ScenarioConfig {
        psr_noise_sigma: 0.0,
        seed: 9,
        ..ScenarioConfig::default()
    })
    .unwrap();
    cfg.dwell_ticks = 60;
    cfg.repetitions = 2;
    cfg
}

#[test]
fn gating_helps_at_the_top_and_is_neutral_at_the_bottom() {
    let cfg = noiseless_config();
    let report = run_escalating_scenario(&cfg, &mut LocalTwin::new(cfg.twin_scenario())).unwrap();
    let gated = report.instance_means(Arm::Gated);
    let ungated = report.instance_means(Arm::Ungated);
    let n = cfg.scenario.n_ues as f64;
    assert_eq!(gated[0], n);
    assert_eq!(ungated[0], n);
    assert!(gated.last() >= ungated.last(), "{gated:?} vs {ungated:?}");
}

/// Mean reward of holding `rates` for a horizon on a noiseless cell.
fn config_reward(rates: &[f64], seed: u64) -> f64 {
    let mut twin = LocalTwin::new(ScenarioConfig {
        psr_noise_sigma: 0.0,
        seed,
        ..ScenarioConfig::default()
    });
    twin.evaluate(&EvalRequest {
        request_id: 1,
        rates_mbps: rates.to_vec(),
        horizon_ticks: 100,
    })
    .unwrap()
    .twin_reward
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Whatever the controller launches is the request or the safe setup, and
    /// scores at least the worse of the two.
    #[test]
    fn gated_launch_is_never_worse_than_both_alternatives(actions in prop::collection::vec(0usize..10, 3)) {
        let cfg = noiseless_config();
        let mut controller = SadrController::new(cfg.sadr.clone());
        let mut twin = LocalTwin::new(cfg.twin_scenario());
        let req = TrafficRequest::new(1, actions, &cfg.action_set).unwrap();
        let requested = req.risk_vector.clone();
        let launch = match controller.on_traffic_request(req) {
            Decision::LaunchDirectly(l) => l,
            Decision::DeferToTwin(r) => {
                let eval = twin.evaluate(&EvalRequest::for_request(&r, cfg.sadr.twin_horizon_ticks)).unwrap();
                controller.on_twin_evaluation_completed(&eval).unwrap()
            }
        };
        let safe = controller.safe_rates(&requested);
        match launch.reason {
            LaunchReason::Direct | LaunchReason::TwinApproved => prop_assert_eq!(&launch.granted, &requested),
            LaunchReason::SafeSetup | LaunchReason::TwinUnreachable => prop_assert_eq!(&launch.granted, &safe),
        }
        let floor = config_reward(&requested, 5).min(config_reward(&safe, 5));
        prop_assert!(config_reward(&launch.granted, 5) >= floor);
    }
}
