use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::NetworkState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("action index {index} out of range 0..{len}")]
    OutOfRange { index: usize, len: usize },
    #[error("action set needs {expected} levels, got {got}")]
    WrongSize { expected: usize, got: usize },
    #[error("action levels must start at 0, end at {max} Mbps and strictly increase")]
    BadLevels { max: f64 },
}

/// The per-UE traffic levels a controller may request; index `a` maps to
/// the expected rate `f(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionSet {
    levels: Vec<f64>,
}

impl ActionSet {
    pub const SIZE: usize = 10;
    pub const MAX_RATE_MBPS: f64 = 4.5;

    pub fn new(levels: Vec<f64>) -> Result<Self, ActionError> {
        if levels.len() != Self::SIZE {
            return Err(ActionError::WrongSize {
                expected: Self::SIZE,
                got: levels.len(),
            });
        }
        let increasing = levels.windows(2).all(|w| w[0] < w[1]);
        if levels[0] != 0.0 || levels[Self::SIZE - 1] != Self::MAX_RATE_MBPS || !increasing {
            return Err(ActionError::BadLevels {
                max: Self::MAX_RATE_MBPS,
            });
        }
        Ok(Self { levels })
    }

    /// 0, 0.5, ..., 4.5 Mbps.
    pub fn linear() -> Self {
        Self {
            levels: (0..Self::SIZE).map(|a| 0.5 * a as f64).collect(),
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn map_action_to_rate(&self, a: usize) -> Result<f64, ActionError> {
        self.levels.get(a).copied().ok_or(ActionError::OutOfRange {
            index: a,
            len: self.levels.len(),
        })
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        Self::linear()
    }
}

impl TryFrom<Vec<f64>> for ActionSet {
    type Error = ActionError;

    fn try_from(levels: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(levels)
    }
}

impl From<ActionSet> for Vec<f64> {
    fn from(a: ActionSet) -> Self {
        a.levels
    }
}

/// f(a) under the default linear action set.
pub fn map_action_to_rate(a: usize) -> Result<f64, ActionError> {
    ActionSet::linear().map_action_to_rate(a)
}

/// Requested aggregate demand normalised by capacity.
pub fn compute_risk(risk_vector: &[f64], capacity_mbps: f64) -> f64 {
    risk_vector.iter().sum::<f64>() / capacity_mbps
}

/// Σ_i psr_i − (r_exp_i − r_act_i) / r_exp_i, the deficit being 0 for a UE
/// that expects nothing.
pub fn per_tick_reward(state: &NetworkState) -> f64 {
    state
        .ues
        .iter()
        .map(|u| {
            let deficit = if u.r_exp_mbps > 0.0 {
                (u.r_exp_mbps - u.r_act_mbps) / u.r_exp_mbps
            } else {
                0.0
            };
            u.psr - deficit
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::UEStat;

    fn ue(psr: f64, r_exp: f64, r_act: f64) -> UEStat {
        UEStat {
            r_exp_mbps: r_exp,
            r_alloc_mbps: r_exp,
            r_act_mbps: r_act,
            psr,
            ..UEStat::default()
        }
    }

    fn state(ues: Vec<UEStat>) -> NetworkState {
        NetworkState {
            tick_index: 1,
            ues,
            aggregate_demand_mbps: 0.0,
        }
    }

    #[test]
    fn action_mapping() {
        assert_eq!(map_action_to_rate(0), Ok(0.0));
        assert_eq!(map_action_to_rate(9), Ok(4.5));
        assert_eq!(map_action_to_rate(5), Ok(2.5));
        assert_eq!(
            map_action_to_rate(10),
            Err(ActionError::OutOfRange { index: 10, len: 10 })
        );
    }

    #[test]
    fn action_set_validation() {
        assert!(ActionSet::new(vec![0.0; 3]).is_err());
        let mut l = ActionSet::linear().levels().to_vec();
        l.swap(3, 4);
        assert!(ActionSet::new(l).is_err());
        let custom = vec![0.0, 0.1, 0.2, 0.4, 0.8, 1.2, 2.0, 3.0, 4.0, 4.5];
        assert!(ActionSet::new(custom).is_ok());
    }

    #[test]
    fn risk_examples() {
        assert_eq!(compute_risk(&[0.0; 3], 9.0), 0.0);
        assert_eq!(compute_risk(&[4.5; 3], 9.0), 1.5);
        assert_eq!(compute_risk(&[1.5; 3], 9.0), 0.5);
    }

    #[test]
    fn reward_examples() {
        assert_eq!(per_tick_reward(&state(vec![ue(1.0, 2.0, 2.0); 3])), 3.0);
        assert!((per_tick_reward(&state(vec![ue(0.8, 3.0, 1.5)])) - 0.3).abs() < 1e-12);
        let idle = state(vec![ue(1.0, 0.0, 0.0); 3]);
        assert_eq!(per_tick_reward(&idle), 3.0);
        let overloaded = state(vec![ue(9.0 / 13.5, 4.5, 4.5); 3]);
        assert!((per_tick_reward(&overloaded) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn deficit_grows_as_delivery_drops() {
        let mut last = per_tick_reward(&state(vec![ue(1.0, 3.0, 3.0)]));
        for r_act in [2.5, 2.0, 1.0, 0.0] {
            let r = per_tick_reward(&state(vec![ue(1.0, 3.0, r_act)]));
            assert!(r < last);
            last = r;
        }
    }
}
