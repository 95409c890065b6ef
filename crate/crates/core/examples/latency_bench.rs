//! Measure one-way link latency across payload sizes on loopback.
//!
//! ```bash
//! cargo run --release -p twinet --example latency_bench
//! cargo run --release -p twinet --example latency_bench -- 200 20 500 3
//! #                                  samples, warmup, gap (us), primers ^
//! ```

use std::time::Duration;

use twinet::broker::run_broker;
use twinet::twinlink::{run_latency_bench, BenchConfig, Link, LinkConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut config = BenchConfig::default();
    if let Some(&n) = args.first() {
        config.samples_per_size = n as usize;
    }
    if let Some(&w) = args.get(1) {
        config.warmup = w as usize;
    }
    if let Some(&g) = args.get(2) {
        config.gap = Duration::from_micros(g);
    }
    if let Some(&p) = args.get(3) {
        config.primers = p as usize;
    }

    let broker = run_broker("127.0.0.1:0")?;
    let real = Link::connect(broker.local_addr(), LinkConfig::new("real"))?;
    let twin = Link::connect(broker.local_addr(), LinkConfig::new("twin"))?;

    let reports = run_latency_bench(&real, &twin, &config)?;
    println!("{:>9}  {:<13} {:>9} {:>9} {:>9}", "size", "direction", "mean_ms", "p50_ms", "p99_ms");
    for r in &reports {
        println!(
            "{:>9}  {:<13} {:>9.4} {:>9.4} {:>9.4}",
            r.payload_size,
            r.direction.label(),
            r.mean_ms,
            r.p50_ms,
            r.p99_ms
        );
    }
    let monotone = reports
        .chunks(config.sizes.len())
        .all(|dir| dir.windows(2).all(|w| w[0].mean_ms <= w[1].mean_ms));
    println!("monotone in size: {monotone}");
    drop((real, twin));
    let stats = broker.shutdown();
    println!("broker routed {} deliveries", stats.deliveries);
    Ok(())
}
