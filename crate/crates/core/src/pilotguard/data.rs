use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::PilotConfig;

pub const NOISE_POWER: f64 = 1.0;
pub const DATA_POWER: f64 = 4.0;
pub const PILOT_POWER: f64 = 6.0;
pub const JAMMER_POWER: f64 = 10.0;
/// Std-dev of the log-normal power perturbation.
pub const POWER_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("jam class {class} outside 0..={max}")]
    JamClass { class: usize, max: usize },
    #[error("need at least one sample per class ({classes}), got {n}")]
    TooFew { n: usize, classes: usize },
}

/// Per-subcarrier linear power of one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    pub powers: Vec<f64>,
    /// 0 = clean, p = pilot p (1-based) jammed.
    pub jam_class: usize,
}

/// Noise-free power template: guard bands, data subcarriers and pilots.
pub fn base_powers(config: &PilotConfig) -> Vec<f64> {
    (0..config.n_subcarriers())
        .map(|k| {
            if config.is_pilot(k) {
                PILOT_POWER
            } else if config.is_data(k) {
                DATA_POWER
            } else {
                NOISE_POWER
            }
        })
        .collect()
}

pub fn generate_frame(config: &PilotConfig, jam_class: usize, rng: &mut ChaCha8Rng) -> Result<SpectrumFrame, DataError> {
    generate_frame_with(config, jam_class, POWER_SIGMA, rng)
}

/// As [`generate_frame`] with an explicit perturbation; `sigma = 0` gives
/// the bare template plus jammer.
pub fn generate_frame_with(
    config: &PilotConfig,
    jam_class: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SpectrumFrame, DataError> {
    if jam_class > config.n_pilots() {
        return Err(DataError::JamClass {
            class: jam_class,
            max: config.n_pilots(),
        });
    }
    let mut powers = base_powers(config);
    if sigma > 0.0 {
        let g = Normal::new(0.0, sigma).expect("positive sigma");
        for p in &mut powers {
            *p *= g.sample(rng).exp();
        }
    }
    if jam_class > 0 {
        powers[config.pilot_indices()[jam_class - 1]] += JAMMER_POWER;
    }
    Ok(SpectrumFrame { powers, jam_class })
}

/// `n` frames with classes assigned round-robin, so every class count is
/// `n / (P+1)` give or take one.
pub fn collect_frames(config: &PilotConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<SpectrumFrame>, DataError> {
    let classes = config.n_classes();
    if n < classes {
        return Err(DataError::TooFew { n, classes });
    }
    (0..n).map(|i| generate_frame(config, i % classes, rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Per-feature mean and population std of log-powers; zero std becomes 1.
    pub fn fit(frames: &[SpectrumFrame]) -> Self {
        let k = frames.first().map_or(0, |f| f.powers.len());
        let n = frames.len() as f64;
        let mut mean = vec![0.0; k];
        for f in frames {
            for (m, p) in mean.iter_mut().zip(&f.powers) {
                *m += p.ln();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for f in frames {
            for ((v, p), m) in var.iter_mut().zip(&f.powers).zip(&mean) {
                *v += (p.ln() - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn features(&self, powers: &[f64]) -> Vec<f64> {
        powers
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((p, m), s)| (p.ln() - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// One normalised feature row per sample.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn from_frames(frames: &[SpectrumFrame], norm: &NormStats) -> Self {
        Self {
            features: frames.iter().map(|f| norm.features(&f.powers)).collect(),
            labels: frames.iter().map(|f| f.jam_class).collect(),
        }
    }
}

/// Normalise train and test frames with statistics of the training frames.
pub fn process_frames(train: &[SpectrumFrame], test: &[SpectrumFrame]) -> (Dataset, Dataset, NormStats) {
    let norm = NormStats::fit(train);
    (Dataset::from_frames(train, &norm), Dataset::from_frames(test, &norm), norm)
}

pub fn make_dataset(
    config: &PilotConfig,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset, NormStats), DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = collect_frames(config, n_train, &mut rng)?;
    let test = collect_frames(config, n_test, &mut rng)?;
    Ok(process_frames(&train, &test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_frames() {
        let cfg = PilotConfig::mhz10();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clean = generate_frame_with(&cfg, 0, 0.0, &mut rng).unwrap();
        for &k in cfg.pilot_indices() {
            assert_eq!(clean.powers[k], 6.0);
        }
        let jammed = generate_frame_with(&cfg, 1, 0.0, &mut rng).unwrap();
        let p = cfg.pilot_indices();
        assert_eq!(jammed.powers[p[0]], 16.0);
        assert!(p[1..].iter().all(|&k| jammed.powers[k] == 6.0));
        assert_eq!(clean.powers[0], NOISE_POWER);
        assert_eq!(clean.powers[20], DATA_POWER);
        assert!(generate_frame(&cfg, 5, &mut rng).is_err());
    }

    #[test]
    fn frames_are_seeded() {
        let cfg = PilotConfig::mhz20();
        let a = generate_frame(&cfg, 2, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = generate_frame(&cfg, 2, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.powers.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn balanced_and_normalised() {
        let cfg = PilotConfig::mhz10();
        let (train, test, norm) = make_dataset(&cfg, 1003, 200, 1).unwrap();
        for c in 0..cfg.n_classes() {
            let n = train.labels.iter().filter(|&&l| l == c).count();
            assert!(n.abs_diff(1003 / 5) <= 1);
        }
        let k = cfg.n_subcarriers();
        for j in 0..k {
            let col: Vec<f64> = train.features.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 0.05);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        assert_eq!(test.len(), 200);
        assert_ne!(NormStats::fit(&collect_frames(&cfg, 200, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()), norm);
    }

    #[test]
    fn constant_feature_gets_unit_std() {
        let frames = vec![
            SpectrumFrame { powers: vec![2.0, 1.0], jam_class: 0 },
            SpectrumFrame { powers: vec![2.0, 3.0], jam_class: 0 },
        ];
        let norm = NormStats::fit(&frames);
        assert_eq!(norm.std[0], 1.0);
        assert_eq!(norm.features(&[2.0, 1.0])[0], 0.0);
    }
}
