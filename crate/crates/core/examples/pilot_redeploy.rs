//! End-to-end jamming response for each channel size: detect a jammer,
//! move the pilots, have the twin train a model for the new layout and swap
//! it in while a detector keeps running.
//!
//! ```bash
//! cargo run --release -p twinet --example pilot_redeploy
//! cargo run --release -p twinet --example pilot_redeploy -- 11   # seed
//! ```

use twinet::broker::run_broker;
use twinet::pilotguard::{run_pilot_scenario, PilotConfig, PilotScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let broker = run_broker("127.0.0.1:0")?;

    println!(
        "{:<8} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}",
        "channel", "transfer", "collect", "process", "train", "total", "test_acc"
    );
    let mut notes = Vec::new();
    for pilots in PilotConfig::presets() {
        let report = run_pilot_scenario(broker.local_addr(), &PilotScenarioConfig::new(pilots, seed))?;
        let t = &report.redeploy.timing;
        println!(
            "{:<8} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8.4}",
            t.channel_size,
            t.data_transfer_s,
            t.data_collection_s,
            t.data_processing_s,
            t.model_creation_s,
            t.total_deployment_s,
            report.redeploy.test_accuracy
        );
        notes.push(format!(
            "{}: jam at {} -> pilots {:?} -> {:?}; post-swap jam at {} {}; {} deployments observed, {} mixed",
            t.channel_size,
            report.trigger.pilot_subcarrier,
            report.initial_pilots.pilot_indices(),
            report.new_pilots.pilot_indices(),
            report.jammed_subcarrier_after,
            if report.post_swap.is_some() { "detected" } else { "missed" },
            report.observed_deployments,
            report.mixed_deployments
        ));
    }
    println!();
    for n in notes {
        println!("{n}");
    }
    broker.shutdown();
    Ok(())
}
