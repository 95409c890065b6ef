use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed packet size, so 1 Mbps is exactly 100 packets per second.
pub const PACKET_SIZE_BYTES: u32 = 1250;
const PACKET_BITS: f64 = PACKET_SIZE_BYTES as f64 * 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario needs at least one UE")]
    NoUes,
    #[error("capacity must be positive, got {0}")]
    Capacity(f64),
    #[error("tick must be positive, got {0} ms")]
    Tick(f64),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    Sigma(f64),
    #[error("expected {expected} rates, got {got}")]
    RateCount { expected: usize, got: usize },
    #[error("rate for UE {ue} is invalid: {rate}")]
    InvalidRate { ue: usize, rate: f64 },
    #[error("granted rate {granted} exceeds expected rate {expected} for UE {ue}")]
    GrantAboveExpected { ue: usize, granted: f64, expected: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_ues: usize,
    pub capacity_mbps: f64,
    pub tick_ms: f64,
    pub psr_noise_sigma: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_ues: 3,
            capacity_mbps: 9.0,
            tick_ms: 100.0,
            psr_noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_ues == 0 {
            return Err(SimError::NoUes);
        }
        if !(self.capacity_mbps > 0.0 && self.capacity_mbps.is_finite()) {
            return Err(SimError::Capacity(self.capacity_mbps));
        }
        if !(self.tick_ms > 0.0 && self.tick_ms.is_finite()) {
            return Err(SimError::Tick(self.tick_ms));
        }
        if !(self.psr_noise_sigma >= 0.0 && self.psr_noise_sigma.is_finite()) {
            return Err(SimError::Sigma(self.psr_noise_sigma));
        }
        Ok(())
    }

    pub fn tick_seconds(&self) -> f64 {
        self.tick_ms / 1000.0
    }

    /// Packets a UE transmits in one tick at `rate_mbps`.
    pub fn packets_per_tick(&self, rate_mbps: f64) -> u64 {
        (rate_mbps * 1e6 * self.tick_seconds() / PACKET_BITS).round() as u64
    }

    /// Rate in Mbps carried by `packets` in one tick.
    pub fn rate_of_packets(&self, packets: u64) -> f64 {
        packets as f64 * PACKET_BITS / self.tick_seconds() / 1e6
    }
}

pub fn mbps_to_pps(mbps: f64) -> f64 {
    mbps * 1e6 / PACKET_BITS
}

pub fn pps_to_mbps(pps: f64) -> f64 {
    pps * PACKET_BITS / 1e6
}

/// Per-UE statistics for one tick.
///
/// `r_alloc_mbps` is the rate the cell is configured to send; `r_act_mbps`
/// is the rate actually delivered (received packets), so congestion lowers
/// both the PSR and the delivered share of the expected rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UEStat {
    pub r_exp_mbps: f64,
    pub r_alloc_mbps: f64,
    pub r_act_mbps: f64,
    pub packets_sent: u64,
    pub packets_received: u64,
    pub psr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkState {
    pub tick_index: u64,
    pub ues: Vec<UEStat>,
    /// Sum of configured (allocated) rates.
    pub aggregate_demand_mbps: f64,
}

/// PSR_i = clamp(min(1, C/D) + eps_i, 0, 1), eps_i ~ N(0, sigma); 1 when D = 0.
pub fn compute_psr(allocations: &[f64], config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let demand: f64 = allocations.iter().sum();
    if demand <= 0.0 {
        return vec![1.0; allocations.len()];
    }
    let base = (config.capacity_mbps / demand).min(1.0);
    if config.psr_noise_sigma == 0.0 {
        return vec![base; allocations.len()];
    }
    let noise = Normal::new(0.0, config.psr_noise_sigma).expect("validated sigma");
    allocations
        .iter()
        .map(|_| (base + noise.sample(rng)).clamp(0.0, 1.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    expected: Vec<f64>,
    granted: Vec<f64>,
}

/// Tick-driven downlink cell. One instance plays the real network, another
/// the twin; they share nothing but envelopes.
#[derive(Debug, Clone)]
pub struct CellSim {
    config: ScenarioConfig,
    rng: ChaCha8Rng,
    expected: Vec<f64>,
    granted: Vec<f64>,
    pending: Option<Pending>,
    state: NetworkState,
}

impl CellSim {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let n = config.n_ues;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            expected: vec![0.0; n],
            granted: vec![0.0; n],
            pending: None,
            state: NetworkState {
                tick_index: 0,
                ues: vec![
                    UEStat {
                        psr: 1.0,
                        ..UEStat::default()
                    };
                    n
                ],
                aggregate_demand_mbps: 0.0,
            },
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn tick_index(&self) -> u64 {
        self.state.tick_index
    }

    /// Rates that will be in force for the next tick.
    pub fn next_allocation(&self) -> &[f64] {
        self.pending.as_ref().map_or(&self.granted, |p| &p.granted)
    }

    fn check_rates(&self, rates: &[f64]) -> Result<(), SimError> {
        if rates.len() != self.config.n_ues {
            return Err(SimError::RateCount {
                expected: self.config.n_ues,
                got: rates.len(),
            });
        }
        if let Some((ue, &rate)) = rates.iter().enumerate().find(|(_, r)| !(**r >= 0.0 && r.is_finite())) {
            return Err(SimError::InvalidRate { ue, rate });
        }
        Ok(())
    }

    /// Grant every UE exactly what it expects. Takes effect at the next tick
    /// boundary.
    pub fn apply_allocation(&mut self, rates: &[f64]) -> Result<(), SimError> {
        self.apply_request(rates, rates)
    }

    /// Set expected rates and (possibly lower) granted rates together.
    pub fn apply_request(&mut self, expected: &[f64], granted: &[f64]) -> Result<(), SimError> {
        self.check_rates(expected)?;
        self.check_rates(granted)?;
        for (ue, (&g, &e)) in granted.iter().zip(expected).enumerate() {
            if g > e {
                return Err(SimError::GrantAboveExpected {
                    ue,
                    granted: g,
                    expected: e,
                });
            }
        }
        self.pending = Some(Pending {
            expected: expected.to_vec(),
            granted: granted.to_vec(),
        });
        Ok(())
    }

    /// Advance one tick and return the new state.
    pub fn step_tick(&mut self) -> &NetworkState {
        if let Some(p) = self.pending.take() {
            self.expected = p.expected;
            self.granted = p.granted;
        }
        let psr = compute_psr(&self.granted, &self.config, &mut self.rng);
        let mut ues = Vec::with_capacity(self.config.n_ues);
        for (i, &p) in psr.iter().enumerate() {
            let sent = self.config.packets_per_tick(self.granted[i]);
            let received = if sent == 0 || p >= 1.0 {
                sent
            } else if p <= 0.0 {
                0
            } else {
                Binomial::new(sent, p)
                    .expect("p within (0,1)")
                    .sample(&mut self.rng)
            };
            ues.push(UEStat {
                r_exp_mbps: self.expected[i],
                r_alloc_mbps: self.granted[i],
                r_act_mbps: self.config.rate_of_packets(received).min(self.expected[i]),
                packets_sent: sent,
                packets_received: received,
                psr: p,
            });
        }
        self.state = NetworkState {
            tick_index: self.state.tick_index + 1,
            aggregate_demand_mbps: self.granted.iter().sum(),
            ues,
        };
        &self.state
    }

    /// Run `ticks` ticks, returning every state.
    pub fn run(&mut self, ticks: usize) -> Vec<NetworkState> {
        (0..ticks).map(|_| self.step_tick().clone()).collect()
    }
}
