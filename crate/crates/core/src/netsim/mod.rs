//! Discrete-tick downlink cell, run once as the real network and once as its
//! twin, plus traffic mirroring between the two.
mod mirror;
mod schedule;
mod sim;

pub use mirror::{
    publish_observation, run_mirror_experiment, ChangeEvent, MirrorConfig, MirrorError, MirrorOutcome, MirrorReport,
    MirrorTickRow, MirrorTwin, TrafficUpdate,
};
pub use schedule::{RateSchedule, ScheduleError};
pub use sim::{
    compute_psr, mbps_to_pps, pps_to_mbps, CellSim, NetworkState, ScenarioConfig, SimError, UEStat, PACKET_SIZE_BYTES,
};
