//! A writer updates `a` and `b` in turn through A2 and B2 while a reader
//! alternates between A1 and B1, with B2 slowed down. Per-replica groups
//! keep the reader at full speed; per-server groups make it wait for B2.
//!
//! `cargo run --release --example app2_cross_partition [delay-ms]`

use accf::experiments::{figure_one_config, run, App, WorkloadSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delay: u64 = std::env::args().nth(1).map_or(Ok(250), |s| s.parse())?;
    let cfg = figure_one_config("two-by-two")?;
    let spec = WorkloadSpec::for_app(App::App2).with_duration(10_000);
    for grouping in ["two-by-two", "four-by-one"] {
        let base = run(&cfg, grouping, &spec, 0, 1, true)?.measurement.throughput;
        let out = run(&cfg, grouping, &spec, delay, 1, false)?;
        let m = out.measurement;
        println!(
            "{grouping:<12} {:.1} reads/s ({:.3} of baseline), {} parks, staleness {:.1} ms",
            m.throughput,
            m.throughput / base,
            m.parks,
            m.mean_staleness_ms
        );
    }
    Ok(())
}
