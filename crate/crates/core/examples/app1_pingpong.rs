//! Two clients take turns incrementing a counter on `a`, one through A1 and
//! one through A2, while B1 is slowed down. B1 shares no key with A1 or A2,
//! yet with per-replica groups every increment waits for it.
//!
//! `cargo run --release --example app1_pingpong [delay-ms]`

use accf::experiments::{figure_one_config, run, App, WorkloadSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delay: u64 = std::env::args().nth(1).map_or(Ok(250), |s| s.parse())?;
    let cfg = figure_one_config("two-by-two")?;
    let spec = WorkloadSpec::for_app(App::App1).with_duration(10_000);
    for grouping in ["two-by-two", "four-by-one"] {
        let base = run(&cfg, grouping, &spec, 0, 1, true)?.measurement.throughput;
        let out = run(&cfg, grouping, &spec, delay, 1, false)?;
        let m = out.measurement;
        println!(
            "{grouping:<12} {:.1} increments/s ({:.3} of baseline), {} parks, mean park {:.1} ms, {}",
            m.throughput,
            m.throughput / base,
            m.parks,
            m.mean_park_ms,
            out.report.to_string().lines().next().unwrap_or_default()
        );
    }
    Ok(())
}
