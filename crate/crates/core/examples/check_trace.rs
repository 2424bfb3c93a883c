//! Checks a trace file, or a freshly simulated run when no path is given.
//! The simulated run is checked twice: as recorded, and with one read
//! rewritten to return a value nobody wrote.
//!
//! `cargo run --example check_trace [trace-file]`

use accf::checker::{check, check_text};
use accf::experiments::{figure_one_config, run, App, WorkloadSpec};
use accf::model::HlcTimestamp;
use accf::trace::TraceKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(path) = std::env::args().nth(1) {
        let report = check_text(&std::fs::read_to_string(path)?)?;
        print!("{report}");
        std::process::exit(if report.is_clean() { 0 } else { 1 });
    }

    let cfg = figure_one_config("two-by-two")?;
    let spec = WorkloadSpec::for_app(App::App2).with_duration(2_000);
    let mut trace = run(&cfg, "two-by-two", &spec, 100, 7, false)?.trace;
    print!("recorded: {}", check(&trace));

    let read = trace
        .records
        .iter_mut()
        .find(|r| r.kind == TraceKind::GetReply && r.version.is_some())
        .ok_or("no read returned a value")?;
    if let Some(v) = read.version.as_mut() {
        v.wt = HlcTimestamp::new(v.wt.l + 1_000_000, 0);
    }
    let report = check(&trace);
    println!("tampered: {} violations", report.violations.len());
    for v in report.violations.iter().take(3) {
        println!("  {v}");
    }
    Ok(())
}
