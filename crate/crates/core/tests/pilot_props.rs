//! Classifier maths checked against finite differences, and model blob
//! round trips checked through predictions.

mod common;

use common::worst_gradient_error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twinet::pilotguard::{
    decode_model, encode_model, generate_frame, make_dataset, predict, select_new_pilots, train_model, PilotConfig,
    TrainHyper,
};

#[test]
fn gradient_matches_central_differences() {
    let worst = worst_gradient_error(100, 1e-5, 17);
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn full_batch_loss_never_rises() {
    for (cfg, seed) in [(PilotConfig::mhz10(), 1), (PilotConfig::mhz40(), 2)] {
        let (train, _, norm) = make_dataset(&cfg, 1000, 10, seed).unwrap();
        let t = train_model(&train, cfg, norm, TrainHyper::default(), seed).unwrap();
        assert_eq!(t.loss_history.len(), 301);
        for (i, w) in t.loss_history.windows(2).enumerate() {
            assert!(w[1] <= w[0], "loss rose at iteration {i}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn training_features_are_standardised() {
    let (train, test, norm) = make_dataset(&PilotConfig::mhz20(), 2000, 500, 4).unwrap();
    let k = norm.mean.len();
    for j in 0..k {
        let col: Vec<f64> = train.features.iter().map(|x| x[j]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 0.05, "feature {j} mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.05, "feature {j} std {}", var.sqrt());
    }
    // test rows use the training statistics, so their own means drift off 0
    let test_mean0 = test.features.iter().map(|x| x[0]).sum::<f64>() / test.len() as f64;
    assert_ne!(test_mean0, 0.0);
}

#[test]
fn serialised_model_predicts_identically() {
    let cfg = PilotConfig::mhz10();
    let (train, _, norm) = make_dataset(&cfg, 500, 5, 8).unwrap();
    let model = train_model(&train, cfg.clone(), norm, TrainHyper::default(), 8).unwrap().model;
    let restored = decode_model(&encode_model(&model)).unwrap();
    assert_eq!(restored, model);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..500 {
        let frame = generate_frame(&cfg, i % cfg.n_classes(), &mut rng).unwrap();
        assert_eq!(predict(&restored, &frame).unwrap(), predict(&model, &frame).unwrap());
    }
}

#[test]
fn new_pilots_are_fresh_sorted_and_seeded() {
    for cfg in PilotConfig::presets() {
        for seed in 0..20 {
            let jammed = cfg.pilot_indices()[seed as usize % cfg.n_pilots()];
            let fresh = select_new_pilots(&cfg, jammed, seed).unwrap();
            let idx = fresh.pilot_indices();
            assert_eq!(idx.len(), cfg.n_pilots());
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
            assert!(idx.iter().all(|k| *k < cfg.n_subcarriers() && !cfg.is_pilot(*k)));
            assert_eq!(select_new_pilots(&cfg, jammed, seed).unwrap(), fresh);
        }
    }
}
