//! Mirror a real cell's transmit rate into its twin over the broker and
//! report how quickly each rate change propagates.
//!
//! ```bash
//! cargo run --release -p twinet --example traffic_mirror
//! cargo run --release -p twinet --example traffic_mirror -- 100   # 100 ms wall ticks, real time
//! ```

use std::time::Duration;

use twinet::broker::run_broker;
use twinet::netsim::{run_mirror_experiment, MirrorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = MirrorConfig::default();
    if let Some(ms) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        config.wall_tick = Duration::from_millis(ms);
    }
    let broker = run_broker("127.0.0.1:0")?;
    let report = run_mirror_experiment(broker.local_addr(), &config)?;

    println!("{:>6} {:>7} {:>10} {:>10} {:>9}", "tick", "t_s", "real_pps", "twin_pps", "delay_ms");
    for c in &report.changes {
        println!(
            "{:>6} {:>7.1} {:>10.0} {:>10.0} {:>9.3}",
            c.tick, c.t_s, c.real_pps, c.twin_pps, c.delay_ms
        );
    }
    println!("ticks mirrored:        {}/{}", report.applied, report.ticks);
    println!("twin rates match:      {}", report.rates_match);
    println!("twin states identical: {}", report.states_identical);
    println!("stale/duplicate:       {}", report.duplicate_applications());
    println!("mean change delay:     {:.3} ms", report.mean_change_delay_ms);
    println!("mean update delay:     {:.3} ms", report.mean_delay_ms);
    broker.shutdown();
    Ok(())
}
