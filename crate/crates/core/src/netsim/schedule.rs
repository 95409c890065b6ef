use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("change point {index} at t={t}s does not come after the previous one")]
    NotIncreasing { index: usize, t: f64 },
    #[error("change point {index} has invalid rate {rate}")]
    InvalidRate { index: usize, rate: f64 },
}

/// Piecewise-constant transmitter rate, MGEN style. Rates are in packets/s.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct RateSchedule {
    change_points: Vec<(f64, f64)>,
}

impl RateSchedule {
    pub fn new(change_points: Vec<(f64, f64)>) -> Result<Self, ScheduleError> {
        for (index, &(t, rate)) in change_points.iter().enumerate() {
            if !t.is_finite() || (index > 0 && t <= change_points[index - 1].0) {
                return Err(ScheduleError::NotIncreasing { index, t });
            }
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(ScheduleError::InvalidRate { index, rate });
            }
        }
        Ok(Self { change_points })
    }

    pub fn change_points(&self) -> &[(f64, f64)] {
        &self.change_points
    }

    /// Rate of the last change point at or before `t`; 0 before the first.
    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.change_points.partition_point(|&(cp, _)| cp <= t);
        if idx == 0 {
            0.0
        } else {
            self.change_points[idx - 1].1
        }
    }

    /// Number of rate changes after the initial setting.
    pub fn changes(&self) -> usize {
        self.change_points.len().saturating_sub(1)
    }

    /// Initial rate at t=0 followed by six alterations over a 60 s run.
    pub fn six_changes() -> Self {
        Self::new(vec![
            (0.0, 100.0),
            (8.0, 250.0),
            (16.0, 400.0),
            (24.0, 150.0),
            (32.0, 300.0),
            (40.0, 500.0),
            (48.0, 200.0),
        ])
        .expect("static schedule is valid")
    }

    /// `changes` alterations spread evenly over `duration_s`, rates cycling
    /// through a fixed pattern.
    pub fn evenly_spaced(duration_s: f64, changes: usize) -> Self {
        const RATES: [f64; 7] = [100.0, 250.0, 400.0, 150.0, 300.0, 500.0, 200.0];
        let step = duration_s / (changes + 1) as f64;
        let points = (0..=changes)
            .map(|i| (i as f64 * step, RATES[i % RATES.len()]))
            .collect();
        Self::new(points).expect("evenly spaced points are increasing")
    }
}

impl TryFrom<Vec<(f64, f64)>> for RateSchedule {
    type Error = ScheduleError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<RateSchedule> for Vec<(f64, f64)> {
    fn from(s: RateSchedule) -> Self {
        s.change_points
    }
}
