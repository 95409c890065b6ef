use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PilotError {
    #[error("need at least one subcarrier and one pilot")]
    Empty,
    #[error("pilot index {index} outside 0..{k}")]
    OutOfRange { index: usize, k: usize },
    #[error("pilot indices must be distinct and sorted")]
    NotSorted,
    #[error("{index} is not a current pilot")]
    NotAPilot { index: usize },
    #[error("only {free} free subcarriers for {needed} new pilots")]
    NotEnoughFree { free: usize, needed: usize },
    #[error("unknown scenario {0:?}; expected 10MHz, 20MHz or 40MHz")]
    UnknownScenario(String),
}

/// Subcarrier layout: `K` subcarriers of which `P` carry pilots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PilotConfig {
    n_subcarriers: usize,
    pilot_indices: Vec<usize>,
    label: String,
}

impl PilotConfig {
    pub fn new(n_subcarriers: usize, pilot_indices: Vec<usize>, label: impl Into<String>) -> Result<Self, PilotError> {
        if n_subcarriers == 0 || pilot_indices.is_empty() {
            return Err(PilotError::Empty);
        }
        if let Some(&index) = pilot_indices.iter().find(|&&i| i >= n_subcarriers) {
            return Err(PilotError::OutOfRange { index, k: n_subcarriers });
        }
        if !pilot_indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(PilotError::NotSorted);
        }
        Ok(Self {
            n_subcarriers,
            pilot_indices,
            label: label.into(),
        })
    }

    /// 64 subcarriers, 4 pilots.
    pub fn mhz10() -> Self {
        Self::new(64, vec![11, 25, 39, 53], "10 MHz").expect("valid preset")
    }

    /// 128 subcarriers, 4 pilots.
    pub fn mhz20() -> Self {
        Self::new(128, vec![22, 50, 78, 106], "20 MHz").expect("valid preset")
    }

    /// 128 subcarriers, 6 pilots.
    pub fn mhz40() -> Self {
        Self::new(128, vec![11, 39, 53, 75, 89, 117], "40 MHz").expect("valid preset")
    }

    pub fn presets() -> [Self; 3] {
        [Self::mhz10(), Self::mhz20(), Self::mhz40()]
    }

    /// Accepts "10MHz", "10 MHz", "10mhz" or "10".
    pub fn scenario(name: &str) -> Result<Self, PilotError> {
        let digits: String = name.chars().take_while(char::is_ascii_digit).collect();
        let rest = name[digits.len()..].trim().to_ascii_lowercase();
        if !(rest.is_empty() || rest == "mhz") {
            return Err(PilotError::UnknownScenario(name.to_owned()));
        }
        match digits.as_str() {
            "10" => Ok(Self::mhz10()),
            "20" => Ok(Self::mhz20()),
            "40" => Ok(Self::mhz40()),
            _ => Err(PilotError::UnknownScenario(name.to_owned())),
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn pilot_indices(&self) -> &[usize] {
        &self.pilot_indices
    }

    pub fn n_pilots(&self) -> usize {
        self.pilot_indices.len()
    }

    /// Clean plus one class per jammed pilot.
    pub fn n_classes(&self) -> usize {
        self.pilot_indices.len() + 1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_pilot(&self, k: usize) -> bool {
        self.pilot_indices.binary_search(&k).is_ok()
    }

    /// Guard subcarriers at each band edge.
    pub fn guard_band(&self) -> usize {
        self.n_subcarriers / 8
    }

    pub fn is_data(&self, k: usize) -> bool {
        let g = self.guard_band();
        k >= g && k + g < self.n_subcarriers && !self.is_pilot(k)
    }
}

impl fmt::Display for PilotConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (K={}, pilots {:?})", self.label, self.n_subcarriers, self.pilot_indices)
    }
}

/// Draw `P` fresh pilot positions uniformly from the subcarriers that are
/// not currently pilots.
pub fn select_new_pilots(current: &PilotConfig, jammed_index: usize, seed: u64) -> Result<PilotConfig, PilotError> {
    if !current.is_pilot(jammed_index) {
        return Err(PilotError::NotAPilot { index: jammed_index });
    }
    let free: Vec<usize> = (0..current.n_subcarriers).filter(|&k| !current.is_pilot(k)).collect();
    let needed = current.n_pilots();
    if free.len() < needed {
        return Err(PilotError::NotEnoughFree {
            free: free.len(),
            needed,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, free.len(), needed).into_iter().map(|i| free[i]).collect();
    chosen.sort_unstable();
    PilotConfig::new(current.n_subcarriers, chosen, current.label.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_table_shapes() {
        let shapes: Vec<(usize, usize)> = PilotConfig::presets()
            .iter()
            .map(|p| (p.n_subcarriers(), p.n_pilots()))
            .collect();
        assert_eq!(shapes, vec![(64, 4), (128, 4), (128, 6)]);
        assert_eq!(PilotConfig::scenario("20MHz").unwrap(), PilotConfig::mhz20());
        assert_eq!(PilotConfig::scenario("40 MHz").unwrap(), PilotConfig::mhz40());
        assert!(PilotConfig::scenario("80MHz").is_err());
    }

    #[test]
    fn rejects_bad_layouts() {
        assert_eq!(PilotConfig::new(8, vec![3, 3], "x"), Err(PilotError::NotSorted));
        assert_eq!(
            PilotConfig::new(8, vec![8], "x"),
            Err(PilotError::OutOfRange { index: 8, k: 8 })
        );
        assert_eq!(PilotConfig::new(8, vec![], "x"), Err(PilotError::Empty));
    }

    #[test]
    fn new_pilots_avoid_old_ones() {
        let cur = PilotConfig::mhz10();
        let next = select_new_pilots(&cur, 25, 9).unwrap();
        assert_eq!(next.n_pilots(), 4);
        assert!(next.pilot_indices().iter().all(|&k| !cur.is_pilot(k) && k < 64));
        assert!(next.pilot_indices().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(select_new_pilots(&cur, 25, 9).unwrap(), next);
        assert_eq!(
            select_new_pilots(&cur, 26, 9),
            Err(PilotError::NotAPilot { index: 26 })
        );
        let tight = PilotConfig::new(5, vec![0, 1, 2], "x").unwrap();
        assert_eq!(
            select_new_pilots(&tight, 0, 1),
            Err(PilotError::NotEnoughFree { free: 2, needed: 3 })
        );
    }
}
