#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use accf::grouping::{GroupConfig, KeyClass};
use accf::model::{
    CheckingGroupId, ClientId, DependencySet, Envelope, HlcTimestamp, Key, Message, ServerId,
    TrackingGroupId, VersionVector,
};
use accf::server::{Effects, Server, ServerParams};

pub fn ts(s: &str) -> HlcTimestamp {
    s.parse().unwrap()
}

pub fn ds(s: &str) -> DependencySet {
    s.parse().unwrap()
}

pub fn vv(s: &str) -> VersionVector {
    s.parse().unwrap()
}

pub fn sid(s: &str) -> ServerId {
    ServerId::new(s)
}

pub fn cid(s: &str) -> ClientId {
    ClientId::new(s)
}

pub fn key(s: &str) -> Key {
    Key::new(s)
}

pub fn cg(s: &str) -> CheckingGroupId {
    CheckingGroupId::new(s)
}

/// `tracking`: (server, group); `checking`: (group, members);
/// `classes`: (name, hosts, keys).
pub fn group(
    tracking: &[(&str, &str)],
    checking: &[(&str, &[&str])],
    classes: &[(&str, &[&str], &[&str])],
) -> Arc<GroupConfig> {
    let set = |xs: &[&str]| xs.iter().map(ServerId::new).collect::<BTreeSet<_>>();
    Arc::new(GroupConfig {
        epoch: 0,
        servers: tracking.iter().map(|(s, _)| sid(s)).collect(),
        tracking: tracking
            .iter()
            .map(|(s, t)| (sid(s), TrackingGroupId::new(t)))
            .collect(),
        checking: checking.iter().map(|(c, m)| (cg(c), set(m))).collect(),
        classes: classes
            .iter()
            .map(|(n, h, k)| {
                (
                    n.to_string(),
                    KeyClass {
                        name: n.to_string(),
                        hosts: set(h),
                        keys: k.iter().map(|x| key(x)).collect(),
                    },
                )
            })
            .collect::<BTreeMap<_, _>>(),
    })
}

pub fn server(id: &str, g: &Arc<GroupConfig>) -> Server {
    Server::new(sid(id), g.clone(), ServerParams::default()).unwrap()
}

pub fn server_with(id: &str, g: &Arc<GroupConfig>, params: ServerParams) -> Server {
    Server::new(sid(id), g.clone(), params).unwrap()
}

/// Messages of one kind addressed anywhere, in send order.
pub fn sent<'a>(fx: &'a Effects, pred: impl Fn(&Message) -> bool + 'a) -> Vec<&'a Envelope> {
    fx.sends.iter().filter(|e| pred(&e.msg)).collect()
}

pub mod random {
    use std::collections::{BTreeMap, BTreeSet};
    use std::sync::Arc;

    use accf::client::{OpOutcome, PinnedBalancer};
    use accf::config::SystemConfig;
    use accf::grouping::{GroupConfig, KeyClass};
    use accf::model::{CheckingGroupId, ClientId, Key, ServerId, TrackingGroupId};
    use accf::sim::{Action, ClientSpec, Driver, RandomDriver, SimRng, Simulation};
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Checking {
        /// Random overlapping groups covering every server.
        Random,
        /// One group holding every server.
        Single,
    }

    fn subset(rng: &mut ChaCha8Rng, of: &[ServerId]) -> BTreeSet<ServerId> {
        let mut out: BTreeSet<ServerId> = of.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        if out.is_empty() {
            out.insert(of.choose(rng).unwrap().clone());
        }
        out
    }

    /// A grouping that passes validation: 2..=6 servers, up to 3 key classes
    /// of two keys each, every server hosting at least one class.
    pub fn grouping(rng: &mut ChaCha8Rng, checking: Checking) -> GroupConfig {
        let n = rng.random_range(2..=6);
        let servers: Vec<ServerId> = (0..n).map(|i| ServerId::new(format!("S{i}"))).collect();
        let groups = rng.random_range(1..=n);
        let tracking = servers
            .iter()
            .map(|s| (s.clone(), TrackingGroupId::new(format!("t{}", rng.random_range(0..groups)))))
            .collect();
        let mut hosts: Vec<BTreeSet<ServerId>> =
            (0..rng.random_range(1..=3)).map(|_| subset(rng, &servers)).collect();
        for s in &servers {
            if !hosts.iter().any(|h| h.contains(s)) {
                let i = rng.random_range(0..hosts.len());
                hosts[i].insert(s.clone());
            }
        }
        let classes = hosts
            .into_iter()
            .enumerate()
            .map(|(i, h)| {
                let name = format!("c{i}");
                let keys = [format!("k{i}a"), format!("k{i}b")].into_iter().map(Key::new).collect();
                (name.clone(), KeyClass { name, hosts: h, keys })
            })
            .collect();
        let mut cgs: Vec<BTreeSet<ServerId>> = match checking {
            Checking::Single => vec![servers.iter().cloned().collect()],
            Checking::Random => (0..rng.random_range(1..=3)).map(|_| subset(rng, &servers)).collect(),
        };
        for s in &servers {
            if !cgs.iter().any(|m| m.contains(s)) {
                let i = rng.random_range(0..cgs.len());
                cgs[i].insert(s.clone());
            }
        }
        GroupConfig {
            epoch: 0,
            servers: servers.iter().cloned().collect(),
            tracking,
            checking: cgs
                .into_iter()
                .enumerate()
                .map(|(i, m)| (CheckingGroupId::new(format!("g{i}")), m))
                .collect(),
            classes,
        }
    }

    /// Full system around a random grouping: two regions, random latencies,
    /// jitter, clock offsets, per-server extra delay and protocol periods.
    pub fn system(rng: &mut ChaCha8Rng, checking: Checking) -> SystemConfig {
        let g = grouping(rng, checking);
        let mut cfg = SystemConfig::from_group_config(&g, &BTreeMap::new());
        for s in &mut cfg.servers {
            s.region = ["west", "east"].choose(rng).unwrap().to_string();
            s.clock_offset_ms = rng.random_range(-5..=5);
        }
        cfg.network.default_ms = rng.random_range(1..=30);
        cfg.network.jitter_ms = rng.random_range(0..=5);
        if rng.random_bool(0.5) {
            let s = cfg.servers.choose(rng).unwrap().id.clone();
            cfg.network.extra_delay_ms.insert(s, rng.random_range(0..=50));
        }
        cfg.protocol.heartbeat_ms = rng.random_range(2..=20);
        cfg.protocol.gossip_ms = rng.random_range(2..=20);
        cfg
    }

    /// Stops a driver after a fixed number of operations.
    pub struct Budget<D> {
        inner: D,
        left: usize,
    }

    impl<D: Driver> Driver for Budget<D> {
        fn next(&mut self, now: u64, last: Option<&OpOutcome>, rng: &mut SimRng) -> Action {
            if self.left == 0 {
                return Action::Stop;
            }
            let a = self.inner.next(now, last, rng);
            if matches!(a, Action::Get { .. } | Action::Put { .. }) {
                self.left -= 1;
            }
            a
        }
    }

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Sessions {
        /// Every session reads and writes with its own checking group.
        Mixed,
        /// Like `Mixed`, but some sessions also name other groups, which
        /// exercises the fallback path and unknown-group rejects.
        MixedGroups,
        /// Client 0 only writes; the others only read.
        Split,
    }

    /// Attaches 1..=4 clients (2..=4 for `Split`) sharing at most 500
    /// operations. Each client picks one checking group, pins every class it
    /// can reach to a host inside that group and reads with that group.
    pub fn clients(sim: &mut Simulation, cfg: &SystemConfig, rng: &mut ChaCha8Rng, sessions: Sessions) {
        let g = Arc::new(cfg.group_config().unwrap());
        let low = if sessions == Sessions::Split { 2 } else { 1 };
        let n = rng.random_range(low..=4);
        let per_client = 500 / n;
        let cg_ids: Vec<&CheckingGroupId> = g.checking.keys().collect();
        for c in 0..n {
            let cg = (*cg_ids.choose(rng).unwrap()).clone();
            let members = &g.checking[&cg];
            let mut lb = PinnedBalancer::new(g.clone());
            let mut keys = Vec::new();
            let mut region = None;
            for class in g.classes.values() {
                let inside: Vec<&ServerId> = class.hosts.intersection(members).collect();
                if let Some(h) = inside.choose(rng) {
                    lb = lb.pin(class.name.clone(), (*h).clone());
                    keys.extend(class.keys.iter().cloned());
                    region.get_or_insert_with(|| cfg.server(h.as_str()).unwrap().region.clone());
                }
            }
            let think = rng.random_range(0..=5);
            let read_fraction = match sessions {
                Sessions::Split if c == 0 => 0.0,
                Sessions::Split => 1.0,
                _ => rng.random_range(0.3..0.8),
            };
            let mut driver = RandomDriver::new(keys, read_fraction, think, u64::MAX);
            if sessions == Sessions::MixedGroups && rng.random_bool(0.3) {
                driver = driver.with_cgs(g.checking.keys().cloned().collect());
            }
            sim.add_client(
                ClientSpec {
                    id: ClientId::new(format!("C{c}")),
                    region: region.unwrap(),
                    balancer: Arc::new(lb),
                    default_cg: cg,
                    start_ms: rng.random_range(0..10),
                },
                Box::new(Budget {
                    inner: driver,
                    left: per_client,
                }),
            )
            .unwrap();
        }
    }

    /// Builds a ready-to-run simulation from one seed.
    pub fn scenario(seed: u64, checking: Checking, sessions: Sessions) -> (SystemConfig, Simulation) {
        scenario_with(seed, checking, sessions, |_| {})
    }

    pub fn scenario_with(
        seed: u64,
        checking: Checking,
        sessions: Sessions,
        tweak: impl FnOnce(&mut SystemConfig),
    ) -> (SystemConfig, Simulation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = system(&mut rng, checking);
        tweak(&mut cfg);
        let mut sim = Simulation::new(&cfg, seed).unwrap();
        clients(&mut sim, &cfg, &mut rng, sessions);
        (cfg, sim)
    }

    /// Runs until every client has stopped (or the horizon passes), then
    /// lets in-flight traffic settle for another `settle_ms`.
    pub fn run_to_completion(
        sim: &mut Simulation,
        settle_ms: u64,
        mut observe: impl FnMut(&Simulation),
    ) {
        let mut t = sim.now();
        while !sim.clients_finished() && t < HORIZON_MS {
            t += 500;
            sim.run_until_with(t, &mut observe).unwrap();
        }
        assert!(sim.clients_finished(), "clients still running at {t} ms");
        sim.run_until_with(t + settle_ms, &mut observe).unwrap();
    }

    pub const HORIZON_MS: u64 = 120_000;
}

/// Per-run measurements shared by the randomized suites.
pub mod suite {
    use std::collections::BTreeMap;

    use accf::checker::{self, Report};
    use accf::model::{
        CheckingGroupId, ClientId, DependencySet, ServerId, VersionVector, VvEntry,
    };
    use accf::sim::Simulation;
    use accf::trace::TraceKind;

    use accf::config::SystemConfig;

    use super::random::{run_to_completion, scenario_with, Checking, Sessions};

    /// Checks SVV/VV algebra at every gossip delivery and attributes every
    /// parked read to the dependency entries that blocked it.
    #[derive(Default)]
    pub struct Watch {
        seen: usize,
        pub gossip_events: usize,
        last: BTreeMap<ServerId, (VersionVector, BTreeMap<CheckingGroupId, VersionVector>)>,
        pub algebra_failures: Vec<String>,
        /// Gossip events at which a singleton group's SVV was compared to VV.
        pub singleton_checks: usize,
        /// Highest own-write timestamp per session and tracking group.
        writes: BTreeMap<ClientId, DependencySet>,
        pub parks: usize,
        /// Parks blocked by an entry above the session's own writes.
        pub unexplained_parks: Vec<String>,
    }

    impl Watch {
        pub fn observe(&mut self, sim: &Simulation) {
            let fresh: Vec<_> = sim.trace().iter().skip(self.seen).cloned().collect();
            self.seen += fresh.len();
            for r in &fresh {
                match r.kind {
                    TraceKind::Gossip => self.gossip(sim, r.actor.as_server().unwrap(), r.time),
                    TraceKind::PutAck => {
                        if let (Some(c), Some(v)) = (r.actor.as_client(), &r.version) {
                            let tg = sim.config().tracking_of(&v.origin).unwrap().clone();
                            self.writes.entry(c.clone()).or_default().raise(tg, v.wt);
                        }
                    }
                    TraceKind::GetPark => {
                        self.parks += 1;
                        let server = sim.server(r.actor.as_server().unwrap()).unwrap();
                        let client = r.peer.as_ref().and_then(|p| p.as_client()).unwrap();
                        let own = self.writes.get(client).cloned().unwrap_or_default();
                        for (t, h) in r.ds.as_ref().unwrap().iter() {
                            let blocked = server.vv().get(t) < VvEntry::At(h);
                            if blocked && own.get(t).is_none_or(|w| h > w) {
                                self.unexplained_parks.push(format!(
                                    "{} t={}: {client} blocked on {t}={h}, own writes {own}",
                                    server.id(),
                                    r.time
                                ));
                            }
                        }
                    }
                    _ => {}
                }
            }
        }

        fn gossip(&mut self, sim: &Simulation, id: &ServerId, time: u64) {
            self.gossip_events += 1;
            let s = sim.server(id).unwrap();
            for (cg, svv) in s.svvs() {
                if !svv.le(s.vv()) {
                    self.algebra_failures.push(format!("{id} t={time}: SVV[{cg}] {svv} > VV {}", s.vv()));
                }
                let members = sim.config().members(cg).cloned().unwrap_or_default();
                if members.len() == 1 {
                    self.singleton_checks += 1;
                }
                if members.len() == 1 && svv != s.vv() {
                    self.algebra_failures.push(format!("{id} t={time}: singleton {cg} SVV {svv} != VV {}", s.vv()));
                }
            }
            if let Some((vv, svvs)) = self.last.get(id) {
                if !vv.le(s.vv()) {
                    self.algebra_failures.push(format!("{id} t={time}: VV decreased"));
                }
                for (cg, old) in svvs {
                    if s.svv(cg).is_some_and(|new| !old.le(new)) {
                        self.algebra_failures.push(format!("{id} t={time}: SVV[{cg}] decreased"));
                    }
                }
            }
            self.last.insert(id.clone(), (s.vv().clone(), s.svvs().clone()));
        }
    }

    pub struct Outcome {
        pub seed: u64,
        pub report: Report,
        pub watch: Watch,
        pub trace: accf::trace::Trace,
    }

    pub fn run(seed: u64, checking: Checking, sessions: Sessions) -> Outcome {
        run_with(seed, checking, sessions, |_| {})
    }

    pub fn run_with(
        seed: u64,
        checking: Checking,
        sessions: Sessions,
        tweak: impl FnOnce(&mut SystemConfig),
    ) -> Outcome {
        let (_, mut sim) = scenario_with(seed, checking, sessions, tweak);
        let mut watch = Watch::default();
        run_to_completion(&mut sim, 1000, |s| watch.observe(s));
        let stats = sim.net_stats();
        assert_eq!(
            stats.sent + stats.duplicated,
            stats.delivered + stats.dropped + stats.in_flight,
            "seed {seed}: message accounting"
        );
        let report = checker::check(sim.trace());
        Outcome {
            seed,
            report,
            watch,
            trace: sim.into_trace(),
        }
    }
}

/// Turns clean traces into traces with a known anomaly.
pub mod forge {
    use std::collections::{BTreeMap, BTreeSet};

    use accf::model::{ClientId, HlcTimestamp, Key};
    use accf::trace::{Trace, TraceKind, TraceRecord, VersionRef};

    #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
    pub enum Forgery {
        /// A read returns a version nobody wrote.
        Phantom,
        /// A read returns a version older than one the session already saw
        /// or wrote for the same key.
        SessionRegression,
        /// A read returns a version that causally precedes a write to the
        /// same key that the session reached through another session.
        CausalOverwrite,
        /// Like `CausalOverwrite`, with the read returning nothing.
        CausalNotFound,
    }

    pub const ALL: [Forgery; 4] = [
        Forgery::Phantom,
        Forgery::SessionRegression,
        Forgery::CausalOverwrite,
        Forgery::CausalNotFound,
    ];

    fn records(t: &Trace) -> Vec<TraceRecord> {
        t.iter().cloned().collect()
    }

    fn rebuild(rs: Vec<TraceRecord>) -> Trace {
        let mut t = Trace::new();
        for r in rs {
            t.push(r);
        }
        t
    }

    /// Acknowledged versions per key, oldest first.
    fn acked(rs: &[TraceRecord]) -> BTreeMap<Key, Vec<VersionRef>> {
        let mut out: BTreeMap<Key, BTreeSet<(HlcTimestamp, String)>> = BTreeMap::new();
        for r in rs.iter().filter(|r| r.kind == TraceKind::PutAck) {
            if let (Some(k), Some(v)) = (&r.key, &r.version) {
                out.entry(k.clone()).or_default().insert((v.wt, v.origin.to_string()));
            }
        }
        out.into_iter()
            .map(|(k, vs)| {
                let refs = vs
                    .into_iter()
                    .map(|(wt, o)| VersionRef {
                        wt,
                        origin: accf::model::ServerId::new(o),
                    })
                    .collect();
                (k, refs)
            })
            .collect()
    }

    fn is_read(r: &TraceRecord) -> bool {
        r.kind == TraceKind::GetReply && r.version.is_some()
    }

    fn set_version(r: &mut TraceRecord, v: Option<VersionRef>) {
        r.ds = None;
        r.note = if v.is_none() { Some("not-found".into()) } else { None };
        r.version = v;
    }

    /// Applies `kind` to the first place in the trace where it is
    /// guaranteed to produce an anomaly; `None` if there is no such place.
    pub fn forge(trace: &Trace, kind: Forgery) -> Option<Trace> {
        let mut rs = records(trace);
        let acked = acked(&rs);
        match kind {
            Forgery::Phantom => {
                let i = rs.iter().position(is_read)?;
                let v = rs[i].version.as_mut().unwrap();
                v.wt.l += 1_000_000_000;
            }
            Forgery::SessionRegression => {
                // Highest version seen or written per (session, key) so far.
                let mut seen: BTreeMap<(ClientId, Key), HlcTimestamp> = BTreeMap::new();
                let mut target = None;
                for (i, r) in rs.iter().enumerate() {
                    let (Some(c), Some(k), Some(v)) = (r.client(), &r.key, &r.version) else {
                        continue;
                    };
                    if !matches!(r.kind, TraceKind::GetReply | TraceKind::PutAck) {
                        continue;
                    }
                    let prior = seen.get(&(c.clone(), k.clone())).copied();
                    if r.kind == TraceKind::GetReply {
                        if let Some(p) = prior {
                            if let Some(old) = acked[k].iter().find(|o| o.wt < p) {
                                target = Some((i, old.clone()));
                                break;
                            }
                        }
                    }
                    let e = seen.entry((c.clone(), k.clone())).or_insert(v.wt);
                    *e = (*e).max(v.wt);
                }
                let (i, old) = target?;
                set_version(&mut rs[i], Some(old));
            }
            Forgery::CausalOverwrite => {
                let (q, earlier) = causal_site(&rs, true)?;
                set_version(&mut rs[q], earlier);
            }
            Forgery::CausalNotFound => {
                let (q, _) = causal_site(&rs, false)?;
                set_version(&mut rs[q], None);
            }
        }
        Some(rebuild(rs))
    }

    /// Finds writer W with PUT_ACK u on k2 followed by PUT_ACK v on k1, and
    /// a different session R that reads v and later reads k2. Returns the
    /// index of that later read and, with `need_earlier`, a write of k2 by
    /// W before u (so it happens before u).
    fn causal_site(rs: &[TraceRecord], need_earlier: bool) -> Option<(usize, Option<VersionRef>)> {
        // Writes per session in order: (index, key, version).
        let mut writes: BTreeMap<ClientId, Vec<(usize, Key, VersionRef)>> = BTreeMap::new();
        for (i, r) in rs.iter().enumerate() {
            if r.kind == TraceKind::PutAck {
                if let (Some(c), Some(k), Some(v)) = (r.client(), &r.key, &r.version) {
                    writes.entry(c.clone()).or_default().push((i, k.clone(), v.clone()));
                }
            }
        }
        for (p, r) in rs.iter().enumerate().filter(|(_, r)| is_read(r)) {
            let reader = r.client()?;
            let v = r.version.as_ref().unwrap();
            for (writer, ws) in &writes {
                if writer == reader {
                    continue;
                }
                let Some(pos) = ws.iter().position(|(_, _, w)| w == v) else {
                    continue;
                };
                for (j, (_, k2, _)) in ws[..pos].iter().enumerate() {
                    if Some(k2) == r.key.as_ref() {
                        continue;
                    }
                    let earlier = ws[..j].iter().rev().find(|(_, k, _)| k == k2).map(|(_, _, o)| o.clone());
                    if need_earlier && earlier.is_none() {
                        continue;
                    }
                    let later = rs
                        .iter()
                        .enumerate()
                        .skip(p + 1)
                        .find(|(_, x)| is_read(x) && x.client() == Some(reader) && x.key.as_ref() == Some(k2));
                    if let Some((q, _)) = later {
                        return Some((q, earlier));
                    }
                }
            }
        }
        None
    }
}

/// Scripted reconfiguration on the four-server layout.
pub mod reconfig {
    use std::collections::BTreeSet;
    use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
    use std::sync::Arc;

    use accf::checker::{self, Report};
    use accf::client::{OpOutcome, PinnedBalancer};
    use accf::experiments::figure_one_config;
    use accf::grouping::{GroupChange, GroupingError};
    use accf::model::{CheckingGroupId, ClientId, ServerId};
    use accf::sim::{Action, ClientSpec, Script, SimRng, Simulation};
    use accf::trace::{Trace, TraceKind};

    pub const ADD_SPARE_AT: u64 = 500;
    pub const ADD_CROSS_AT: u64 = 1000;
    pub const REMOVE_SPARE_AT: u64 = 2500;
    pub const REMOVE_CG2_AT: u64 = 2600;
    pub const PROBE_AT: u64 = 3000;
    pub const STOP_AT: u64 = 4000;

    pub struct Outcome {
        pub report: Report,
        pub trace: Trace,
        pub failures: Vec<(u64, GroupingError)>,
        /// When both members of `cross` had heard from each other.
        pub ready_at: Option<u64>,
        pub first_cross_read: Option<u64>,
        pub cross_reads: usize,
        pub cross_rejects: usize,
        /// Note on the probe read that names the removed group.
        pub probe_note: Option<String>,
        pub epochs: Vec<String>,
    }

    fn ids(xs: &[&str]) -> BTreeSet<ServerId> {
        xs.iter().map(ServerId::new).collect()
    }

    pub fn run(seed: u64) -> Outcome {
        let cfg = figure_one_config("two-by-two").unwrap();
        let mut sim = Simulation::new(&cfg, seed).unwrap();
        let cg = |s: &str| CheckingGroupId::new(s);
        sim.schedule_reconfig(ADD_SPARE_AT, GroupChange::AddChecking { cg: cg("spare"), members: ids(&["B1"]) })
            .unwrap();
        sim.schedule_reconfig(ADD_CROSS_AT, GroupChange::AddChecking { cg: cg("cross"), members: ids(&["A1", "B2"]) })
            .unwrap();
        sim.schedule_reconfig(REMOVE_SPARE_AT, GroupChange::RemoveChecking { cg: cg("spare") })
            .unwrap();
        sim.schedule_reconfig(REMOVE_CG2_AT, GroupChange::RemoveChecking { cg: cg("cg2") })
            .unwrap();

        let group = sim.config().clone();
        let pinned = |a: &str, b: &str| {
            Arc::new(
                PinnedBalancer::new(group.clone())
                    .pin("A", ServerId::new(a))
                    .pin("B", ServerId::new(b)),
            )
        };

        let mut n = 0u64;
        let writer = move |now: u64, last: Option<&OpOutcome>, _: &mut SimRng| {
            if now >= STOP_AT {
                return Action::Stop;
            }
            if last.is_some() {
                return Action::Sleep(5);
            }
            n += 1;
            Action::put(if n.is_multiple_of(2) { "a" } else { "b" }, &n.to_string())
        };
        sim.add_client(
            ClientSpec {
                id: ClientId::new("W"),
                region: "east".into(),
                balancer: pinned("A2", "B1"),
                default_cg: cg("cg2"),
                start_ms: 0,
            },
            Box::new(writer),
        )
        .unwrap();

        let ready = Arc::new(AtomicBool::new(false));
        let ready_flag = ready.clone();
        let mut step = 0u64;
        let reader = move |now: u64, last: Option<&OpOutcome>, _: &mut SimRng| {
            if now >= STOP_AT {
                return Action::Stop;
            }
            if last.is_some() {
                return Action::Sleep(5);
            }
            step += 1;
            if ready_flag.load(Ordering::SeqCst) {
                match step % 3 {
                    0 => Action::get_in("a", "cross"),
                    1 => Action::get_in("b", "cross"),
                    _ => Action::put("a", &format!("x{step}")),
                }
            } else if step.is_multiple_of(2) {
                Action::get("a")
            } else {
                Action::put("a", &format!("x{step}"))
            }
        };
        sim.add_client(
            ClientSpec {
                id: ClientId::new("X"),
                region: "west".into(),
                balancer: pinned("A1", "B2"),
                default_cg: cg("cg1"),
                start_ms: 3,
            },
            Box::new(reader),
        )
        .unwrap();

        sim.add_client(
            ClientSpec {
                id: ClientId::new("Z"),
                region: "west".into(),
                balancer: pinned("A1", "B1"),
                default_cg: cg("cg1"),
                start_ms: 0,
            },
            Box::new(Script::new([Action::Sleep(PROBE_AT), Action::get_in("b", "spare"), Action::get("b")])),
        )
        .unwrap();

        // Gossip is only sent between co-members, so the first deliveries
        // between A1 and B2 after the change complete the first round.
        let heard = Arc::new(AtomicU64::new(0));
        let mut seen = 0;
        let mut ready_at = None;
        sim.run_until_with(STOP_AT + 1000, |s| {
            for r in s.trace().iter().skip(seen) {
                if r.kind == TraceKind::Gossip && r.note.is_none() && r.time >= ADD_CROSS_AT {
                    let pair = (r.actor.as_str(), r.peer.as_ref().map(|p| p.as_str()));
                    match pair {
                        ("A1", Some("B2")) => heard.fetch_or(1, Ordering::SeqCst),
                        ("B2", Some("A1")) => heard.fetch_or(2, Ordering::SeqCst),
                        _ => 0,
                    };
                    if heard.load(Ordering::SeqCst) == 3 && ready_at.is_none() {
                        ready_at = Some(r.time);
                        ready.store(true, Ordering::SeqCst);
                    }
                }
            }
            seen = s.trace().len();
        })
        .unwrap();

        let trace = sim.trace().clone();
        let cross = |k: TraceKind| {
            trace
                .iter()
                .filter(move |r| r.kind == k && r.cg.as_ref().is_some_and(|c| c.as_str() == "cross"))
        };
        let first_cross_read = cross(TraceKind::GetReq).map(|r| r.time).next();
        let cross_reads = cross(TraceKind::GetReply).filter(|r| r.note.is_none()).count();
        let cross_rejects = cross(TraceKind::GetReply).filter(|r| r.note.is_some() && r.note.as_deref() != Some("not-found")).count();
        let probe_note = trace
            .iter()
            .find(|r| r.kind == TraceKind::GetReply && r.cg.as_ref().is_some_and(|c| c.as_str() == "spare"))
            .and_then(|r| r.note.clone());
        let epochs = trace
            .iter()
            .filter(|r| r.kind == TraceKind::Reconfig)
            .filter_map(|r| r.note.clone())
            .collect();
        Outcome {
            report: checker::check(&trace),
            failures: sim.reconfig_failures().to_vec(),
            trace,
            ready_at,
            first_cross_read,
            cross_reads,
            cross_rejects,
            probe_note,
            epochs,
        }
    }
}
