//! Escalating-demand scenario with and without twin gating. Risky requests
//! are evaluated by a twin service on the other side of the broker.
//!
//! ```bash
//! cargo run --release -p twinet --example sadr_escalation
//! cargo run --release -p twinet --example sadr_escalation -- 3 100   # reps, dwell ticks
//! ```

use std::time::Duration;

use twinet::broker::run_broker;
use twinet::sadr::{run_escalating_scenario, Arm, EscalationConfig, RemoteTwin, TwinService};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut config = EscalationConfig::with_seed(42)?;
    if let Some(&reps) = args.first() {
        config.repetitions = reps;
    }
    if let Some(&dwell) = args.get(1) {
        config.dwell_ticks = dwell;
    }

    let broker = run_broker("127.0.0.1:0")?;
    let service = TwinService::spawn(broker.local_addr(), config.twin_scenario())?;
    let mut twin = RemoteTwin::connect(broker.local_addr(), "sadr-controller", Duration::from_secs(2))?;
    let report = run_escalating_scenario(&config, &mut twin)?;
    let served = service.stop();

    println!("app requirement: {:.4}", config.sadr.app_requirements);
    println!("{:>8} {:>10} {:>9} {:>9}", "instance", "demand", "gated", "ungated");
    let gated = report.instance_means(Arm::Gated);
    let ungated = report.instance_means(Arm::Ungated);
    for (i, inst) in config.instances.iter().enumerate() {
        let demand: f64 = inst.iter().map(|&a| config.action_set.levels()[a]).sum();
        println!("{:>8} {:>10.1} {:>9.4} {:>9.4}", i, demand, gated[i], ungated[i]);
    }
    let n = gated.len();
    println!("twin evaluations served: {served}, fallbacks: {}", report.fallbacks);
    println!("gain, top third:    {:+.1}%", 100.0 * report.relative_gain(n - n / 3..n));
    println!("gain, bottom third: {:+.1}%", 100.0 * report.relative_gain(0..n / 3));
    broker.shutdown();
    Ok(())
}
