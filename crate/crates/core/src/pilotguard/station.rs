use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use super::config::PilotConfig;
use super::data::SpectrumFrame;
use super::model::{predict, ClassifierModel, PredictError, Prediction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwapError {
    #[error("model is not sized for its pilot layout or has non-finite parameters")]
    Inconsistent,
    #[error("model was trained for {model}, deployment pilots are {pilots}")]
    Mismatch { model: PilotConfig, pilots: PilotConfig },
}

/// The pilot layout on air together with the model trained for it. The pair
/// is only ever replaced as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub pilots: PilotConfig,
    pub model: ClassifierModel,
}

impl Deployment {
    pub fn new(pilots: PilotConfig, model: ClassifierModel) -> Result<Self, SwapError> {
        if !model.is_consistent() {
            return Err(SwapError::Inconsistent);
        }
        if model.pilot_config != pilots {
            return Err(SwapError::Mismatch {
                model: model.pilot_config,
                pilots,
            });
        }
        Ok(Self { pilots, model })
    }

    pub fn is_matched(&self) -> bool {
        self.model.pilot_config == self.pilots
    }
}

#[derive(Debug)]
pub struct BaseStation {
    current: RwLock<Arc<Deployment>>,
    swaps: AtomicU64,
}

impl BaseStation {
    pub fn new(deployment: Deployment) -> Self {
        Self {
            current: RwLock::new(Arc::new(deployment)),
            swaps: AtomicU64::new(0),
        }
    }

    /// Snapshot of the live deployment; stays valid across later swaps.
    pub fn deployment(&self) -> Arc<Deployment> {
        self.current.read().clone()
    }

    pub fn swaps(&self) -> u64 {
        self.swaps.load(Ordering::SeqCst)
    }

    /// Install a new (pilots, model) pair, returning the previous one.
    pub fn swap(&self, deployment: Deployment) -> Arc<Deployment> {
        let old = std::mem::replace(&mut *self.current.write(), Arc::new(deployment));
        self.swaps.fetch_add(1, Ordering::SeqCst);
        old
    }

    /// Classify with whatever deployment is live, reporting which one.
    pub fn detect(&self, frame: &SpectrumFrame) -> Result<(Prediction, Arc<Deployment>), PredictError> {
        let d = self.deployment();
        Ok((predict(&d.model, frame)?, d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JamEvent {
    /// 0-based index of the frame that completed the streak.
    pub frame_index: u64,
    pub jam_class: usize,
    /// Subcarrier of the jammed pilot.
    pub pilot_subcarrier: usize,
    pub model_version: u32,
}

/// Declares jamming after `debounce` consecutive jammed predictions, then
/// stays quiet until a clean frame is seen.
#[derive(Debug, Clone)]
pub struct DetectLoop {
    debounce: usize,
    streak: usize,
    latched: bool,
    frames: u64,
}

impl Default for DetectLoop {
    fn default() -> Self {
        Self::new(3)
    }
}

impl DetectLoop {
    pub fn new(debounce: usize) -> Self {
        Self {
            debounce: debounce.max(1),
            streak: 0,
            latched: false,
            frames: 0,
        }
    }

    pub fn on_frame(&mut self, bs: &BaseStation, frame: &SpectrumFrame) -> Result<Option<JamEvent>, PredictError> {
        let (prediction, deployment) = bs.detect(frame)?;
        let index = self.frames;
        self.frames += 1;
        if prediction.jam_class == 0 {
            self.streak = 0;
            self.latched = false;
            return Ok(None);
        }
        self.streak += 1;
        if self.latched || self.streak < self.debounce {
            return Ok(None);
        }
        self.latched = true;
        Ok(Some(JamEvent {
            frame_index: index,
            jam_class: prediction.jam_class,
            pilot_subcarrier: deployment.pilots.pilot_indices()[prediction.jam_class - 1],
            model_version: deployment.model.version,
        }))
    }
}

/// Run a fresh loop over `frames`, collecting every jam event.
pub fn detect_loop<'a>(
    bs: &BaseStation,
    frames: impl IntoIterator<Item = &'a SpectrumFrame>,
) -> Result<Vec<JamEvent>, PredictError> {
    let mut lp = DetectLoop::default();
    let mut events = Vec::new();
    for f in frames {
        events.extend(lp.on_frame(bs, f)?);
    }
    Ok(events)
}
