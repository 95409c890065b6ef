use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::config::PilotConfig;
use super::data::{Dataset, NormStats, SpectrumFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("empty batch")]
    Empty,
    #[error("sample {sample} has {got} features, model expects {expected}")]
    Dimension { sample: usize, expected: usize, got: usize },
    #[error("sample {sample} has label {label} but only {classes} classes")]
    Label { sample: usize, label: usize, classes: usize },
    #[error("non-finite feature in sample {sample}")]
    NonFinite { sample: usize },
    #[error("training diverged at iteration {iteration}")]
    Divergence { iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("frame has {got} subcarriers, model expects {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Softmax regression over normalised log-power features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub pilot_config: PilotConfig,
    /// Row-major (P+1) × K.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub norm: NormStats,
    pub version: u32,
    pub seed: u64,
}

impl ClassifierModel {
    pub fn zeros(pilot_config: PilotConfig, norm: NormStats) -> Self {
        let (c, k) = (pilot_config.n_classes(), pilot_config.n_subcarriers());
        Self {
            weights: vec![0.0; c * k],
            bias: vec![0.0; c],
            pilot_config,
            norm,
            version: 0,
            seed: 0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn n_features(&self) -> usize {
        self.pilot_config.n_subcarriers()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let k = self.n_features();
        self.weights
            .chunks_exact(k)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let z = self.logits(x);
        let lse = log_sum_exp(&z);
        z.iter().map(|v| (v - lse).exp()).collect()
    }

    /// Weights, bias and normalisation are all finite and sized for the
    /// pilot layout.
    pub fn is_consistent(&self) -> bool {
        let (c, k) = (self.pilot_config.n_classes(), self.pilot_config.n_subcarriers());
        self.weights.len() == c * k
            && self.bias.len() == c
            && self.norm.mean.len() == k
            && self.norm.std.len() == k
            && self
                .weights
                .iter()
                .chain(&self.bias)
                .chain(&self.norm.mean)
                .chain(&self.norm.std)
                .all(|v| v.is_finite())
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

fn check_batch(model: &ClassifierModel, batch: &Dataset) -> Result<(), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Empty);
    }
    let (c, k) = (model.n_classes(), model.n_features());
    for (sample, (x, &y)) in batch.features.iter().zip(&batch.labels).enumerate() {
        if x.len() != k {
            return Err(TrainError::Dimension {
                sample,
                expected: k,
                got: x.len(),
            });
        }
        if y >= c {
            return Err(TrainError::Label {
                sample,
                label: y,
                classes: c,
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(TrainError::NonFinite { sample });
        }
    }
    Ok(())
}

/// Mean cross-entropy of the batch and its gradient.
pub fn loss_and_gradient(model: &ClassifierModel, batch: &Dataset) -> Result<LossGradient, TrainError> {
    check_batch(model, batch)?;
    Ok(loss_and_gradient_unchecked(model, batch))
}

fn loss_and_gradient_unchecked(model: &ClassifierModel, batch: &Dataset) -> LossGradient {
    let (c, k) = (model.n_classes(), model.n_features());
    let mut loss = 0.0;
    let mut d_weights = vec![0.0; c * k];
    let mut d_bias = vec![0.0; c];
    for (x, &y) in batch.features.iter().zip(&batch.labels) {
        let z = model.logits(x);
        let lse = log_sum_exp(&z);
        loss += lse - z[y];
        for (j, zj) in z.iter().enumerate() {
            let r = (zj - lse).exp() - if j == y { 1.0 } else { 0.0 };
            d_bias[j] += r;
            for (g, xi) in d_weights[j * k..(j + 1) * k].iter_mut().zip(x) {
                *g += r * xi;
            }
        }
    }
    let n = batch.len() as f64;
    d_weights.iter_mut().for_each(|g| *g /= n);
    d_bias.iter_mut().for_each(|g| *g /= n);
    LossGradient {
        loss: loss / n,
        d_weights,
        d_bias,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Std-dev of the initial weights.
    pub init_std: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            iterations: 300,
            init_std: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: ClassifierModel,
    /// Loss before each update, then the final loss.
    pub loss_history: Vec<f64>,
    pub train_accuracy: f64,
}

/// Full-batch gradient descent from seeded small random weights.
pub fn train_model(
    train: &Dataset,
    pilot_config: PilotConfig,
    norm: NormStats,
    hyper: TrainHyper,
    seed: u64,
) -> Result<TrainedModel, TrainError> {
    let mut model = ClassifierModel::zeros(pilot_config, norm);
    model.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if hyper.init_std > 0.0 {
        let init = Normal::new(0.0, hyper.init_std).expect("positive std");
        model.weights.iter_mut().for_each(|w| *w = init.sample(&mut rng));
    }
    check_batch(&model, train)?;
    let mut loss_history = Vec::with_capacity(hyper.iterations + 1);
    for iteration in 0..hyper.iterations {
        let g = loss_and_gradient_unchecked(&model, train);
        if !g.loss.is_finite() {
            return Err(TrainError::Divergence { iteration });
        }
        loss_history.push(g.loss);
        for (w, d) in model.weights.iter_mut().zip(&g.d_weights) {
            *w -= hyper.learning_rate * d;
        }
        for (b, d) in model.bias.iter_mut().zip(&g.d_bias) {
            *b -= hyper.learning_rate * d;
        }
    }
    let final_loss = loss_and_gradient_unchecked(&model, train).loss;
    if !final_loss.is_finite() || !model.is_consistent() {
        return Err(TrainError::Divergence {
            iteration: hyper.iterations,
        });
    }
    loss_history.push(final_loss);
    let train_accuracy = accuracy(&model, train);
    Ok(TrainedModel {
        model,
        loss_history,
        train_accuracy,
    })
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub jam_class: usize,
    pub probabilities: Vec<f64>,
}

pub fn predict(model: &ClassifierModel, frame: &SpectrumFrame) -> Result<Prediction, PredictError> {
    if frame.powers.len() != model.n_features() {
        return Err(PredictError::Dimension {
            expected: model.n_features(),
            got: frame.powers.len(),
        });
    }
    let probabilities = model.probabilities(&model.norm.features(&frame.powers));
    Ok(Prediction {
        jam_class: argmax(&probabilities),
        probabilities,
    })
}

/// Fraction of samples whose argmax logit matches the label.
pub fn accuracy(model: &ClassifierModel, data: &Dataset) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let hits = data
        .features
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| argmax(&model.logits(x)) == y)
        .count();
    hits as f64 / data.len() as f64
}
