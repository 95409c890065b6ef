//! Statistical and structural properties of the cell simulator.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twinet::netsim::{compute_psr, CellSim, MirrorTwin, ScenarioConfig, TrafficUpdate};

fn cfg(n_ues: usize, capacity: f64, sigma: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_ues,
        capacity_mbps: capacity,
        psr_noise_sigma: sigma,
        seed,
        ..ScenarioConfig::default()
    }
}

#[test]
fn half_delivery_has_binomial_mean() {
    // 10 Mbps on a 5 Mbps cell: PSR 0.5, 100 packets per 100 ms tick
    let mut sim = CellSim::new(cfg(1, 5.0, 0.0, 11)).unwrap();
    sim.apply_allocation(&[10.0]).unwrap();
    let states = sim.run(1000);
    assert!(states.iter().all(|s| s.ues[0].psr == 0.5 && s.ues[0].packets_sent == 100));
    let mean = states.iter().map(|s| s.ues[0].packets_received as f64).sum::<f64>() / 1000.0;
    // 3 standard errors of the mean of Binomial(100, 0.5) over 1000 draws
    let three_se = 3.0 * (100.0 * 0.25 / 1000.0f64).sqrt();
    assert!((mean - 50.0).abs() <= three_se, "mean {mean}");
    assert!(three_se <= 1.5);
}

#[test]
fn same_seed_same_states() {
    let run = |seed| {
        let mut sim = CellSim::new(cfg(3, 9.0, 0.05, seed)).unwrap();
        let mut out = Vec::new();
        for (t, rate) in [(0, 2.0), (20, 4.0), (40, 1.0)] {
            while out.len() < t {
                out.push(sim.step_tick().clone());
            }
            sim.apply_allocation(&[rate, rate + 0.5, rate * 2.0]).unwrap();
        }
        out.extend(sim.run(20));
        out
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn repeated_mirror_update_is_idempotent() {
    let update = TrafficUpdate {
        tick: 5,
        rates_mbps: vec![1.0, 2.0, 3.0],
        rates_pps: vec![100.0, 200.0, 300.0],
    };
    let mut once = MirrorTwin::new(cfg(3, 9.0, 0.02, 1)).unwrap();
    let mut twice = MirrorTwin::new(cfg(3, 9.0, 0.02, 1)).unwrap();
    assert!(once.apply_update(&update).unwrap());
    assert!(twice.apply_update(&update).unwrap());
    assert!(!twice.apply_update(&update).unwrap());
    assert_eq!(once.sim().state(), twice.sim().state());
    assert_eq!(once.rates_mbps(), twice.rates_mbps());
    assert_eq!(twice.stale_count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn psr_is_one_below_capacity_then_falls_with_demand(
        capacity in 0.5f64..20.0,
        rates in prop::collection::vec(0.0f64..10.0, 1..6),
        extra in 0.0f64..10.0,
    ) {
        let c = cfg(rates.len(), capacity, 0.0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d: f64 = rates.iter().sum();
        let psr = compute_psr(&rates, &c, &mut rng);
        if d <= capacity {
            prop_assert!(psr.iter().all(|&p| p == 1.0));
        } else {
            prop_assert!(psr.iter().all(|&p| (p - capacity / d).abs() < 1e-15));
        }
        let mut more = rates.clone();
        more[0] += extra;
        let higher = compute_psr(&more, &c, &mut rng);
        prop_assert!(higher.iter().zip(&psr).all(|(h, p)| h <= p));
    }

    #[test]
    fn delivery_never_exceeds_sending(
        sigma in 0.0f64..0.6,
        seed in any::<u64>(),
        rates in prop::collection::vec(0.0f64..8.0, 3),
    ) {
        let mut sim = CellSim::new(cfg(3, 9.0, sigma, seed)).unwrap();
        sim.apply_allocation(&rates).unwrap();
        for s in sim.run(20) {
            for u in &s.ues {
                prop_assert!(u.packets_received <= u.packets_sent);
                prop_assert!((0.0..=1.0).contains(&u.psr));
                prop_assert!(u.r_act_mbps <= u.r_exp_mbps);
            }
        }
    }
}
