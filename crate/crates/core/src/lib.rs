//! Twinet: a desk-scale real-world / digital-twin link for wireless networks.

pub mod mqtt;
pub mod broker;
pub mod twinlink;
pub mod netsim;
pub mod sadr;
pub mod pilotguard;
pub mod cli;
