//! The `accf` command line: `validate`, `run`, `sweep` and `check-trace`.
//!
//! Exit codes: 0 success, 1 the input failed its check (invalid config,
//! consistency violations, malformed trace), 2 usage error, 3 I/O or
//! simulation failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checker;
use crate::config::{ConfigError, SystemConfig};
use crate::experiments::{self, App, ExperimentError, ResultRow, WorkloadSpec, CSV_HEADER};
use crate::trace::Trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "accf", version, about = "Causal store with configurable tracking and checking groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a system configuration.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute one workload run, check its trace and write the artifacts.
    Run(RunArgs),
    /// Sweep a workload over groupings, delays and seeds.
    Sweep(SweepArgs),
    /// Check a trace file for consistency violations.
    CheckTrace {
        trace: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// `app1`, `app2` or a workload TOML file.
    #[arg(long)]
    workload: String,
    #[arg(long)]
    out: PathBuf,
    /// Heartbeat interval; overrides the configuration.
    #[arg(long, env = "ACCF_HEARTBEAT_MS")]
    heartbeat_ms: Option<u64>,
    /// Gossip interval; overrides the configuration.
    #[arg(long, env = "ACCF_GOSSIP_MS")]
    gossip_ms: Option<u64>,
    /// Simulated run length; overrides the workload.
    #[arg(long)]
    duration_ms: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Grouping preset, or `configured` to keep the file's groups.
    #[arg(long, default_value = experiments::CONFIGURED)]
    grouping: String,
    /// Injected delay on the workload's delayed server.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Seed; the ACCF_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated grouping presets.
    #[arg(long, value_delimiter = ',', default_value = "two-by-two,four-by-one")]
    grouping: Vec<String>,
    /// Comma-separated injected delays in ms.
    #[arg(long, value_delimiter = ',', default_value = "0,50,100,250,500,1000")]
    delays: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    /// Write every run's trace under `<out>/traces`.
    #[arg(long)]
    keep_traces: bool,
}

/// Everything needed to reproduce a run or sweep, with artifact hashes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub heartbeat_ms: u64,
    pub gossip_ms: u64,
    pub workload: WorkloadSpec,
    pub groupings: Vec<String>,
    pub delays_ms: Vec<u64>,
    pub seeds: Vec<u64>,
    pub out_dir: String,
    pub artifacts: BTreeMap<String, String>,
    pub trace_hashes: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Check(_) => EXIT_CHECK_FAILED,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Failure(e.to_string()),
            _ => CliError::Check(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::Violations { .. } => CliError::Check(e.to_string()),
            ExperimentError::NoDelays | ExperimentError::NoSeeds | ExperimentError::NoGroupings => {
                CliError::Usage(e.to_string())
            }
            ExperimentError::Grouping(_) | ExperimentError::UnknownApp(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failure(format!("{}: {e}", path.display()))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        write_atomic(&path, contents.as_bytes()).map_err(|e| io_err(&path, e))?;
        self.artifacts.insert(rel.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }
}

fn load_workload(arg: &str) -> Result<WorkloadSpec, CliError> {
    if let Ok(app) = arg.parse::<App>() {
        return Ok(WorkloadSpec::for_app(app));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "workload `{arg}` is neither app1, app2 nor an existing file"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    WorkloadSpec::from_toml(&text).map_err(|e| CliError::Check(format!("{}: {e}", path.display())))
}

struct Prepared {
    cfg: SystemConfig,
    config_sha256: String,
    spec: WorkloadSpec,
}

fn prepare(c: &Common) -> Result<Prepared, CliError> {
    let text = std::fs::read_to_string(&c.config).map_err(|e| io_err(&c.config, e))?;
    let mut cfg = SystemConfig::from_toml(&text)
        .map_err(|e| CliError::Check(format!("{}: {e}", c.config.display())))?;
    if let Some(h) = c.heartbeat_ms {
        cfg.protocol.heartbeat_ms = h;
    }
    if let Some(g) = c.gossip_ms {
        cfg.protocol.gossip_ms = g;
    }
    cfg.validated()?;
    let mut spec = load_workload(&c.workload)?;
    if let Some(d) = c.duration_ms {
        spec.duration_ms = d;
    }
    Ok(Prepared {
        cfg,
        config_sha256: sha256_hex(text.as_bytes()),
        spec,
    })
}

fn manifest(
    command: &str,
    c: &Common,
    p: &Prepared,
    groupings: Vec<String>,
    delays_ms: Vec<u64>,
    seeds: Vec<u64>,
    trace_hashes: BTreeMap<String, String>,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config_path: c.config.display().to_string(),
        config_sha256: p.config_sha256.clone(),
        heartbeat_ms: p.cfg.protocol.heartbeat_ms,
        gossip_ms: p.cfg.protocol.gossip_ms,
        workload: p.spec.clone(),
        groupings,
        delays_ms,
        seeds,
        out_dir: c.out.display().to_string(),
        artifacts: BTreeMap::new(),
        trace_hashes,
    }
}

fn finish_manifest(out: &mut Outputs, mut m: RunManifest) -> Result<(), CliError> {
    m.artifacts = out.artifacts.clone();
    let json = serde_json::to_string_pretty(&m).map_err(|e| CliError::Failure(e.to_string()))?;
    out.write("manifest.json", &(json + "\n"))
}

fn cmd_validate(config: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = SystemConfig::load(config)
        .map_err(|e| match e {
            ConfigError::Io { .. } => CliError::Failure(e.to_string()),
            _ => CliError::Check(format!("{}: {e}", config.display())),
        })?;
    let problems = cfg.violations();
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(|p| format!("  {p}")).collect();
        return Err(CliError::Check(format!(
            "{}: {} violation(s)\n{}",
            config.display(),
            problems.len(),
            list.join("\n")
        )));
    }
    let g = cfg.group_config()?;
    let _ = writeln!(
        stdout,
        "ok: {} servers, {} tracking groups, {} checking groups, {} key classes",
        g.servers.len(),
        g.tracking_groups().len(),
        g.checking.len(),
        g.classes.len()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs, seed_env: Option<String>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let seed = match seed_env {
        Some(s) => s
            .parse()
            .map_err(|_| CliError::Usage(format!("ACCF_SEED `{s}` is not an unsigned integer")))?,
        None => args.seed,
    };
    let p = prepare(&args.common)?;
    let mut out = Outputs::new(&args.common.out)?;
    let run = match experiments::run(&p.cfg, &args.grouping, &p.spec, args.delay_ms, seed, false) {
        Ok(run) => run,
        Err(ExperimentError::Violations { label, report }) => {
            out.write("report.txt", &report.to_string())?;
            return Err(CliError::Check(format!(
                "{label}: {} consistency violation(s), see report.txt",
                report.violations.len()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let base = experiments::run(&p.cfg, &args.grouping, &p.spec, args.delay_ms, seed, true)?;
    let b = base.measurement.throughput;
    let row = ResultRow {
        app: run.app,
        grouping: run.grouping.clone(),
        delay_ms: Some(run.delay_ms),
        seed: Some(seed),
        throughput: run.measurement.throughput,
        normalized: if b > 0.0 { run.measurement.throughput / b } else { 0.0 },
        mean_park_ms: run.measurement.mean_park_ms,
        mean_staleness_ms: run.measurement.mean_staleness_ms,
    };
    let trace_text = run.trace.render();
    out.write("trace.txt", &trace_text)?;
    out.write("results.csv", &format!("{CSV_HEADER}\n{}\n", row.to_csv()))?;
    out.write("report.txt", &run.report.to_string())?;
    let hashes = [(run.label(), run.trace.sha256())].into_iter().collect();
    let m = manifest(
        "run",
        &args.common,
        &p,
        vec![args.grouping.clone()],
        vec![args.delay_ms],
        vec![seed],
        hashes,
    );
    finish_manifest(&mut out, m)?;
    let _ = writeln!(
        stdout,
        "{}: {:.3} units/s (normalized {:.4}), {} reads checked, no violations, trace {}",
        run.label(),
        row.throughput,
        row.normalized,
        run.report.reads,
        run.trace.sha256()
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.delays.is_empty() {
        return Err(CliError::Usage("--delays must list at least one delay".into()));
    }
    let p = prepare(&args.common)?;
    let result = experiments::sweep(
        &p.cfg,
        &p.spec,
        &args.grouping,
        &args.delays,
        &args.seeds,
        args.keep_traces,
    )?;
    let mut out = Outputs::new(&args.common.out)?;
    out.write("results.csv", &result.to_csv())?;
    for (g, text) in result.plot_data() {
        out.write(&format!("plot-{g}.dat"), &text)?;
    }
    for (label, trace) in &result.traces {
        out.write(&format!("traces/{}.trace", label.replace('/', "_")), &trace.render())?;
    }
    let m = manifest(
        "sweep",
        &args.common,
        &p,
        args.grouping.clone(),
        args.delays.clone(),
        args.seeds.clone(),
        result.trace_hashes.clone(),
    );
    finish_manifest(&mut out, m)?;
    for c in result.cells() {
        let _ = writeln!(
            stdout,
            "{} {} delay={} normalized mean={:.4} min={:.4} max={:.4}",
            p.spec.app.name(),
            c.grouping,
            c.delay_ms,
            c.mean,
            c.min,
            c.max
        );
    }
    Ok(())
}

fn cmd_check_trace(path: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let trace = Trace::parse(&text).map_err(|e| CliError::Check(format!("{}: malformed trace: {e}", path.display())))?;
    let report = checker::check(&trace);
    if let Some(o) = out {
        write_atomic(o, report.to_string().as_bytes()).map_err(|e| io_err(o, e))?;
    }
    let _ = write!(stdout, "{report}");
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "{}: {} violation(s)",
            path.display(),
            report.violations.len()
        )))
    }
}

/// Runs the command line with explicit arguments and streams; returns the
/// exit code. `ACCF_SEED` is read from the process environment.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    main_with_env(args, std::env::var("ACCF_SEED").ok(), stdout, stderr)
}

/// Like [`main_with`] with an explicit `ACCF_SEED` value.
pub fn main_with_env<I, T>(
    args: I,
    seed_env: Option<String>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config, stdout),
        Command::Run(args) => cmd_run(args, seed_env, stdout),
        Command::Sweep(args) => cmd_sweep(args, stdout),
        Command::CheckTrace { trace, out } => cmd_check_trace(trace, out.as_deref(), stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}
