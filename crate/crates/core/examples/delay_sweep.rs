//! Sweeps both workloads over the default delay grid for the two
//! groupings and prints the normalized throughput table.
//!
//! `cargo run --release --example delay_sweep [seconds]`

use accf::experiments::{figure_one_config, sweep, App, WorkloadSpec, DEFAULT_DELAYS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let secs: u64 = std::env::args().nth(1).map_or(Ok(30), |s| s.parse())?;
    let cfg = figure_one_config("two-by-two")?;
    let groupings = ["two-by-two".to_string(), "four-by-one".to_string()];
    for app in [App::App1, App::App2] {
        let spec = WorkloadSpec::for_app(app).with_duration(secs * 1000);
        let result = sweep(&cfg, &spec, &groupings, &DEFAULT_DELAYS, &[1, 2, 3], false)?;
        println!("{}", app.name());
        for c in result.cells() {
            println!(
                "  {:<12} delay {:>5} ms  normalized {:.3} (min {:.3}, max {:.3})",
                c.grouping, c.delay_ms, c.mean, c.min, c.max
            );
        }
        for b in &result.baselines {
            println!("  baseline {:<12} {:.1} ops/s", b.grouping, b.throughput);
        }
    }
    Ok(())
}
