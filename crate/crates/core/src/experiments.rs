//! The two interactive workloads, their baselines and the delay sweep.
//!
//! `app1` is a ping-pong counter on one key: two sessions pinned to the two
//! copies of partition A take turns incrementing it, polling until the
//! other side's value shows up. `app2` has a writer alternating between the
//! two partitions of one replica while a reader alternates between the two
//! partitions of the other replica. A delay is injected on every message
//! sent by one server of partition B.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{self, Report};
use crate::client::{OpOutcome, PinnedBalancer};
use crate::config::{ConfigError, SystemConfig};
use crate::grouping::{GroupingError, Preset};
use crate::model::{ActorId, CheckingGroupId, ClientId, Key, ServerId, Value};
use crate::sim::{Action, ClientSpec, Driver, SimError, SimRng, Simulation};
use crate::trace::{Trace, TraceKind};

pub const CSV_HEADER: &str = "app,grouping,delay_ms,seed,throughput,normalized,mean_park_ms,mean_staleness_ms";
pub const DEFAULT_DELAYS: [u64; 6] = [0, 50, 100, 250, 500, 1000];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("misconfigured topology: {0}")]
    Topology(String),
    #[error("measurement window [{from}, {to}) is empty")]
    EmptyWindow { from: u64, to: u64 },
    #[error("run {label} has {} consistency violations; first: {}", .report.violations.len(), .report.violations[0])]
    Violations { label: String, report: Box<Report> },
    #[error("no delays to sweep")]
    NoDelays,
    #[error("no seeds to sweep")]
    NoSeeds,
    #[error("no groupings to sweep")]
    NoGroupings,
    #[error("unknown workload `{0}` (expected app1 or app2)")]
    UnknownApp(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum App {
    App1,
    App2,
}

impl App {
    pub fn name(self) -> &'static str {
        match self {
            App::App1 => "app1",
            App::App2 => "app2",
        }
    }
}

impl FromStr for App {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "app1" => Ok(App::App1),
            "app2" => Ok(App::App2),
            _ => Err(ExperimentError::UnknownApp(s.to_string())),
        }
    }
}

/// Workload parameters. Server names refer to the system configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub app: App,
    #[serde(default = "defaults::duration")]
    pub duration_ms: u64,
    /// Excluded from measurement; defaults to a tenth of the duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_ms: Option<u64>,
    /// Interval between polling reads in app1.
    #[serde(default = "defaults::five")]
    pub poll_ms: u64,
    /// Pause after each acknowledged write of the app2 writer.
    #[serde(default = "defaults::five")]
    pub write_pacing_ms: u64,
    /// Pause after each app2 read.
    #[serde(default)]
    pub read_pacing_ms: u64,
    /// Clients start at a seeded offset in `[0, start_spread_ms)`.
    #[serde(default = "defaults::ten")]
    pub start_spread_ms: u64,
    /// Server whose outgoing messages carry the injected delay.
    pub delayed_server: String,
    /// app1: the two servers the counter sessions use, in turn order.
    /// app2: the writer's servers for keys `a` and `b`.
    pub writer_servers: Vec<String>,
    /// app2: the reader's servers for keys `a` and `b`. Unused by app1.
    #[serde(default)]
    pub reader_servers: Vec<String>,
    #[serde(default = "defaults::keys")]
    pub keys: Vec<String>,
}

mod defaults {
    pub fn duration() -> u64 {
        30_000
    }
    pub fn five() -> u64 {
        5
    }
    pub fn ten() -> u64 {
        10
    }
    pub fn keys() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }
}

impl WorkloadSpec {
    /// Ping-pong on key `a` between `A1` and `A2`, delaying `B1`.
    pub fn app1() -> Self {
        WorkloadSpec {
            app: App::App1,
            duration_ms: defaults::duration(),
            warmup_ms: None,
            poll_ms: 5,
            write_pacing_ms: 5,
            read_pacing_ms: 0,
            start_spread_ms: 10,
            delayed_server: "B1".into(),
            writer_servers: vec!["A1".into(), "A2".into()],
            reader_servers: Vec::new(),
            keys: defaults::keys(),
        }
    }

    /// Writer on `A2`/`B2`, reader on `A1`/`B1`, delaying `B2`.
    pub fn app2() -> Self {
        WorkloadSpec {
            app: App::App2,
            delayed_server: "B2".into(),
            writer_servers: vec!["A2".into(), "B2".into()],
            reader_servers: vec!["A1".into(), "B1".into()],
            ..Self::app1()
        }
    }

    pub fn for_app(app: App) -> Self {
        match app {
            App::App1 => Self::app1(),
            App::App2 => Self::app2(),
        }
    }

    pub fn with_duration(mut self, ms: u64) -> Self {
        self.duration_ms = ms;
        self
    }

    pub fn warmup(&self) -> u64 {
        self.warmup_ms.unwrap_or(self.duration_ms / 10)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("workload is always serialisable")
    }

    fn check(&self, cfg: &SystemConfig) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Topology(m));
        if self.warmup() >= self.duration_ms {
            return bad(format!(
                "warmup {} ms is not shorter than the duration {} ms",
                self.warmup(),
                self.duration_ms
            ));
        }
        let group = cfg.validated()?;
        let hosts = |server: &str, key: &str| group.hosts_key(&ServerId::new(server), &Key::new(key));
        if cfg.server(&self.delayed_server).is_none() {
            return bad(format!("delayed server `{}` is not configured", self.delayed_server));
        }
        let needed = match self.app {
            App::App1 => 1,
            App::App2 => 2,
        };
        if self.keys.len() < needed {
            return bad(format!("{} needs {needed} keys", self.app.name()));
        }
        if self.writer_servers.len() != 2 {
            return bad("two writer servers are required".into());
        }
        match self.app {
            App::App1 => {
                for s in &self.writer_servers {
                    if !hosts(s, &self.keys[0]) {
                        return bad(format!("`{s}` does not host key `{}`", self.keys[0]));
                    }
                }
            }
            App::App2 => {
                if self.reader_servers.len() != 2 {
                    return bad("two reader servers are required".into());
                }
                for list in [&self.writer_servers, &self.reader_servers] {
                    for (s, k) in list.iter().zip(&self.keys) {
                        if !hosts(s, k) {
                            return bad(format!("`{s}` does not host key `{k}`"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Throughput and diagnostics of one measurement window.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Measurement {
    pub units: u64,
    /// Units per simulated second.
    pub throughput: f64,
    pub parks: u64,
    /// Mean GET_PARK to GET_REPLY gap over parked reads, 0 when none parked.
    pub mean_park_ms: f64,
    pub reads: u64,
    /// Mean of reply time minus the returned version's `wt.l`.
    pub mean_staleness_ms: f64,
}

/// Which trace records count as completed work.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitFilter {
    pub kind: TraceKind,
    pub clients: BTreeSet<ClientId>,
}

/// Measures `[from, to)` of a trace. Parks and staleness cover every
/// client; units only those matching `units`.
pub fn measure(
    trace: &Trace,
    from: u64,
    to: u64,
    units: &UnitFilter,
) -> Result<Measurement, ExperimentError> {
    if to <= from {
        return Err(ExperimentError::EmptyWindow { from, to });
    }
    let mut m = Measurement::default();
    let mut open: BTreeMap<&ClientId, u64> = BTreeMap::new();
    let mut park_total = 0u64;
    let mut stale_total = 0i64;
    for r in trace.iter() {
        let inside = (from..to).contains(&r.time);
        match r.kind {
            TraceKind::GetPark => {
                if let Some(ActorId::Client(c)) = &r.peer {
                    open.insert(c, r.time);
                }
            }
            TraceKind::GetReply => {
                let Some(c) = r.client() else { continue };
                if let Some(start) = open.remove(c) {
                    if (from..to).contains(&start) {
                        m.parks += 1;
                        park_total += r.time - start;
                    }
                }
                if let (true, Some(v)) = (inside, &r.version) {
                    m.reads += 1;
                    stale_total += r.time as i64 - v.wt.l as i64;
                }
            }
            _ => {}
        }
        let rejected = r.version.is_none() && r.note.as_deref() != Some("not-found");
        if inside
            && r.kind == units.kind
            && !rejected
            && r.client().is_some_and(|c| units.clients.contains(c))
        {
            m.units += 1;
        }
    }
    m.throughput = m.units as f64 * 1000.0 / (to - from) as f64;
    if m.parks > 0 {
        m.mean_park_ms = park_total as f64 / m.parks as f64;
    }
    if m.reads > 0 {
        m.mean_staleness_ms = stale_total as f64 / m.reads as f64;
    }
    Ok(m)
}

/// One simulated run, already checked for consistency.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub app: App,
    pub grouping: String,
    pub delay_ms: u64,
    pub seed: u64,
    pub baseline: bool,
    pub measurement: Measurement,
    pub report: Report,
    pub trace: Trace,
}

impl RunOutput {
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/seed={}",
            self.app.name(),
            self.grouping,
            if self.baseline {
                "baseline".to_string()
            } else {
                format!("delay={}", self.delay_ms)
            },
            self.seed
        )
    }
}

/// Grouping name that keeps the groups written in the configuration.
pub const CONFIGURED: &str = "configured";

/// Applies a grouping preset to a configuration with replica labels.
pub fn with_grouping(cfg: &SystemConfig, grouping: &str) -> Result<SystemConfig, ExperimentError> {
    if grouping == CONFIGURED {
        return Ok(cfg.clone());
    }
    let preset: Preset = grouping.parse()?;
    let group = preset.instantiate(&cfg.topology()?);
    let mut out = cfg.clone();
    out.set_grouping(&group);
    Ok(out)
}

/// The counter session of app1. Even parity starts by writing 0; after
/// that each side polls until it reads a fresh value of the other parity
/// and writes its successor.
struct PingPong {
    key: Key,
    parity: u64,
    poll_ms: u64,
    stop_at: u64,
    last_written: Option<u64>,
}

impl Driver for PingPong {
    fn next(&mut self, now: u64, last: Option<&OpOutcome>, _rng: &mut SimRng) -> Action {
        if now >= self.stop_at {
            return Action::Stop;
        }
        if self.parity == 0 && self.last_written.is_none() {
            return self.write(0);
        }
        match last {
            None => Action::Get {
                key: self.key.clone(),
                cg: None,
            },
            Some(OpOutcome::Read { value, .. }) => match value.as_str().parse::<u64>() {
                Ok(v) if v % 2 != self.parity && self.last_written.is_none_or(|w| v > w) => {
                    self.write(v + 1)
                }
                _ => Action::Sleep(self.poll_ms),
            },
            Some(_) => Action::Sleep(self.poll_ms),
        }
    }
}

impl PingPong {
    fn write(&mut self, v: u64) -> Action {
        self.last_written = Some(v);
        Action::Put {
            key: self.key.clone(),
            value: Value::new(v.to_string()),
        }
    }
}

/// Alternates between `steps`, pausing `pause_ms` after each completion.
struct Alternator {
    steps: Vec<Action>,
    next: usize,
    pause_ms: u64,
    stop_at: u64,
    counter: u64,
}

impl Driver for Alternator {
    fn next(&mut self, now: u64, last: Option<&OpOutcome>, _rng: &mut SimRng) -> Action {
        if now >= self.stop_at {
            return Action::Stop;
        }
        if last.is_some() && self.pause_ms > 0 {
            return Action::Sleep(self.pause_ms);
        }
        let mut action = self.steps[self.next].clone();
        self.next = (self.next + 1) % self.steps.len();
        if let Action::Put { value, .. } = &mut action {
            self.counter += 1;
            *value = Value::new(self.counter.to_string());
        }
        action
    }
}

fn first_cg(sim: &Simulation, server: &str) -> Result<CheckingGroupId, ExperimentError> {
    sim.config()
        .checking_of(&ServerId::new(server))
        .into_iter()
        .next()
        .ok_or_else(|| ExperimentError::Topology(format!("`{server}` has no checking group")))
}

fn region_of(cfg: &SystemConfig, server: &str) -> String {
    cfg.server(server).map(|s| s.region.clone()).unwrap_or_default()
}

/// Adds a client pinned per key class.
fn add_client(
    sim: &mut Simulation,
    cfg: &SystemConfig,
    id: &str,
    pins: &[(&str, &str)],
    start_ms: u64,
    driver: Box<dyn Driver>,
) -> Result<(), ExperimentError> {
    let group = sim.config().clone();
    let mut lb = PinnedBalancer::new(group.clone());
    for (key, server) in pins {
        let class = group
            .class_of(&Key::new(key))
            .ok_or_else(|| ExperimentError::Topology(format!("key `{key}` has no class")))?;
        lb = lb.pin(class.name.clone(), ServerId::new(server));
    }
    let home = pins[0].1;
    sim.add_client(
        ClientSpec {
            id: ClientId::new(id),
            region: region_of(cfg, home),
            balancer: Arc::new(lb),
            default_cg: first_cg(sim, home)?,
            start_ms,
        },
        driver,
    )?;
    Ok(())
}

/// Runs one experiment cell. `baseline` selects the reference system: for
/// app1 only the two counter servers, for app2 the reader without writer.
pub fn run(
    cfg: &SystemConfig,
    grouping: &str,
    spec: &WorkloadSpec,
    delay_ms: u64,
    seed: u64,
    baseline: bool,
) -> Result<RunOutput, ExperimentError> {
    let mut cfg = with_grouping(cfg, grouping)?;
    spec.check(&cfg)?;
    if !baseline && delay_ms > 0 {
        cfg.network
            .extra_delay_ms
            .insert(spec.delayed_server.clone(), delay_ms);
    }
    if baseline && spec.app == App::App1 {
        let keep: BTreeSet<&str> = spec.writer_servers.iter().map(String::as_str).collect();
        cfg = cfg.restricted_to(&keep);
    }
    let mut sim = Simulation::new(&cfg, seed)?;
    let mut starts = SimRng::seed_from_u64(seed ^ 0x5eed);
    let mut start = || {
        if spec.start_spread_ms == 0 {
            0
        } else {
            starts.random_range(0..spec.start_spread_ms)
        }
    };
    let stop_at = spec.duration_ms;
    let units = match spec.app {
        App::App1 => {
            let key = spec.keys[0].as_str();
            for (i, (id, server)) in ["C1", "C2"].iter().zip(&spec.writer_servers).enumerate() {
                let driver = PingPong {
                    key: Key::new(key),
                    parity: i as u64,
                    poll_ms: spec.poll_ms,
                    stop_at,
                    last_written: None,
                };
                add_client(&mut sim, &cfg, id, &[(key, server)], start(), Box::new(driver))?;
            }
            UnitFilter {
                kind: TraceKind::PutAck,
                clients: ["C1", "C2"].into_iter().map(ClientId::new).collect(),
            }
        }
        App::App2 => {
            let (ka, kb) = (spec.keys[0].as_str(), spec.keys[1].as_str());
            let (ra, rb) = (spec.reader_servers[0].as_str(), spec.reader_servers[1].as_str());
            let reads = vec![
                Action::get_in(ka, first_cg(&sim, ra)?.as_str()),
                Action::get_in(kb, first_cg(&sim, rb)?.as_str()),
            ];
            let reader = Alternator {
                steps: reads,
                next: 0,
                pause_ms: spec.read_pacing_ms,
                stop_at,
                counter: 0,
            };
            add_client(&mut sim, &cfg, "C3", &[(ka, ra), (kb, rb)], start(), Box::new(reader))?;
            let writer_start = start();
            if !baseline {
                let (wa, wb) = (spec.writer_servers[0].as_str(), spec.writer_servers[1].as_str());
                let writer = Alternator {
                    steps: vec![Action::put(ka, ""), Action::put(kb, "")],
                    next: 0,
                    pause_ms: spec.write_pacing_ms,
                    stop_at,
                    counter: 0,
                };
                add_client(&mut sim, &cfg, "W", &[(ka, wa), (kb, wb)], writer_start, Box::new(writer))?;
            }
            UnitFilter {
                kind: TraceKind::GetReply,
                clients: [ClientId::new("C3")].into_iter().collect(),
            }
        }
    };
    sim.run_until(spec.duration_ms)?;
    let trace = sim.into_trace();
    let measurement = measure(&trace, spec.warmup(), spec.duration_ms, &units)?;
    let report = checker::check(&trace);
    let out = RunOutput {
        app: spec.app,
        grouping: grouping.to_string(),
        delay_ms: if baseline { 0 } else { delay_ms },
        seed,
        baseline,
        measurement,
        report,
        trace,
    };
    if !out.report.is_clean() {
        return Err(ExperimentError::Violations {
            label: out.label(),
            report: Box::new(out.report),
        });
    }
    Ok(out)
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub app: App,
    pub grouping: String,
    /// `None` for baseline rows.
    pub delay_ms: Option<u64>,
    /// `None` for baseline rows, which average over seeds.
    pub seed: Option<u64>,
    pub throughput: f64,
    pub normalized: f64,
    pub mean_park_ms: f64,
    pub mean_staleness_ms: f64,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<u64>, none: &str| v.map_or(none.to_string(), |x| x.to_string());
        format!(
            "{},{},{},{},{:.3},{:.4},{:.3},{:.3}",
            self.app.name(),
            self.grouping,
            opt(self.delay_ms, "baseline"),
            opt(self.seed, "mean"),
            self.throughput,
            self.normalized,
            self.mean_park_ms,
            self.mean_staleness_ms
        )
    }
}

/// Mean, minimum and maximum normalized throughput of one cell over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub grouping: String,
    pub delay_ms: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub baselines: Vec<ResultRow>,
    /// Trace hashes keyed by run label.
    pub trace_hashes: BTreeMap<String, String>,
    /// Traces keyed by run label, when requested.
    pub traces: BTreeMap<String, Trace>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for r in self.rows.iter().chain(&self.baselines) {
            writeln!(out, "{}", r.to_csv()).unwrap();
        }
        out
    }

    pub fn cells(&self) -> Vec<CellSummary> {
        let mut groups: BTreeMap<(usize, u64), (String, Vec<f64>)> = BTreeMap::new();
        let order: Vec<&String> = {
            let mut seen = Vec::new();
            for r in &self.rows {
                if !seen.contains(&&r.grouping) {
                    seen.push(&r.grouping);
                }
            }
            seen
        };
        for r in &self.rows {
            let g = order.iter().position(|x| **x == r.grouping).unwrap_or(0);
            let entry = groups
                .entry((g, r.delay_ms.unwrap_or(0)))
                .or_insert_with(|| (r.grouping.clone(), Vec::new()));
            entry.1.push(r.normalized);
        }
        groups
            .into_iter()
            .map(|((_, delay_ms), (grouping, v))| CellSummary {
                grouping,
                delay_ms,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
            .collect()
    }

    /// Two-column plot data (delay, mean normalized throughput) per grouping.
    pub fn plot_data(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = BTreeMap::new();
        for c in self.cells() {
            let text = out
                .entry(c.grouping.clone())
                .or_insert_with(|| "# delay_ms normalized\n".to_string());
            writeln!(text, "{} {:.4}", c.delay_ms, c.mean).unwrap();
        }
        out
    }

    pub fn mean_normalized(&self, grouping: &str, delay_ms: u64) -> Option<f64> {
        self.cells()
            .into_iter()
            .find(|c| c.grouping == grouping && c.delay_ms == delay_ms)
            .map(|c| c.mean)
    }
}

/// Runs every (grouping, delay, seed) cell plus one baseline per
/// (grouping, seed) in parallel. Rows come out in input order.
pub fn sweep(
    cfg: &SystemConfig,
    spec: &WorkloadSpec,
    groupings: &[String],
    delays: &[u64],
    seeds: &[u64],
    keep_traces: bool,
) -> Result<SweepResult, ExperimentError> {
    if delays.is_empty() {
        return Err(ExperimentError::NoDelays);
    }
    if seeds.is_empty() {
        return Err(ExperimentError::NoSeeds);
    }
    if groupings.is_empty() {
        return Err(ExperimentError::NoGroupings);
    }
    let mut jobs = Vec::new();
    for g in groupings {
        for &s in seeds {
            jobs.push((g.clone(), 0, s, true));
        }
        for &d in delays {
            for &s in seeds {
                jobs.push((g.clone(), d, s, false));
            }
        }
    }
    let outputs: Vec<RunOutput> = jobs
        .par_iter()
        .map(|(g, d, s, b)| run(cfg, g, spec, *d, *s, *b))
        .collect::<Result<_, _>>()?;

    let mut result = SweepResult::default();
    let mut base: BTreeMap<&str, Vec<&RunOutput>> = BTreeMap::new();
    for o in outputs.iter().filter(|o| o.baseline) {
        base.entry(o.grouping.as_str()).or_default().push(o);
    }
    let mean = |runs: &[&RunOutput], f: fn(&Measurement) -> f64| {
        runs.iter().map(|o| f(&o.measurement)).sum::<f64>() / runs.len() as f64
    };
    let mut base_tput = BTreeMap::new();
    for g in groupings {
        let runs = &base[g.as_str()];
        let t = mean(runs, |m| m.throughput);
        base_tput.insert(g.as_str(), t);
        result.baselines.push(ResultRow {
            app: spec.app,
            grouping: g.clone(),
            delay_ms: None,
            seed: None,
            throughput: t,
            normalized: 1.0,
            mean_park_ms: mean(runs, |m| m.mean_park_ms),
            mean_staleness_ms: mean(runs, |m| m.mean_staleness_ms),
        });
    }
    for o in &outputs {
        result.trace_hashes.insert(o.label(), o.trace.sha256());
        if o.baseline {
            continue;
        }
        let b = base_tput[o.grouping.as_str()];
        result.rows.push(ResultRow {
            app: o.app,
            grouping: o.grouping.clone(),
            delay_ms: Some(o.delay_ms),
            seed: Some(o.seed),
            throughput: o.measurement.throughput,
            normalized: if b > 0.0 { o.measurement.throughput / b } else { 0.0 },
            mean_park_ms: o.measurement.mean_park_ms,
            mean_staleness_ms: o.measurement.mean_staleness_ms,
        });
    }
    if keep_traces {
        for o in outputs {
            result.traces.insert(o.label(), o.trace);
        }
    }
    Ok(result)
}

/// The four-server, two-region layout with the given grouping preset:
/// `A1`, `B1` in region `west`, `A2`, `B2` in region `east`.
pub fn figure_one_config(grouping: &str) -> Result<SystemConfig, ExperimentError> {
    use crate::config::LatencySpec;
    use crate::grouping::Topology;

    let topo = Topology::two_partitions_two_replicas();
    let replicas = topo.servers.iter().cloned().collect();
    let group = grouping.parse::<Preset>()?.instantiate(&topo);
    let mut cfg = SystemConfig::from_group_config(&group, &replicas);
    for s in &mut cfg.servers {
        s.region = match s.replica.as_deref() {
            Some("1") => "west".into(),
            _ => "east".into(),
        };
    }
    cfg.network.latency.push(LatencySpec {
        a: "west".into(),
        b: "east".into(),
        ms: 20,
    });
    Ok(cfg)
}
