//! Server state machine: version chains, version vectors, stable version
//! vectors, parked reads, heartbeats and VV gossip.
//!
//! Handlers are synchronous and side-effect free apart from mutating the
//! server; outgoing messages, trace records and timer requests are pushed
//! into an [`Effects`] buffer that the caller (normally the simulator)
//! drains.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouping::{GroupChange, GroupConfig, ReconfigDirective};
use crate::hlc::HlcState;
use crate::model::{
    ActorId, CheckingGroupId, ClientId, DependencySet, Envelope, HlcTimestamp, Key, Message,
    RejectReason, ServerId, TrackingGroupId, Value, Version, VersionId, VersionVector, VvEntry,
};
use crate::trace::{TraceKind, TraceRecord, VersionRef};

/// What a read returns when the client's dependencies are covered by the
/// version vector but not by the stable vector of the requested group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadFallback {
    /// Latest version in the chain, ignoring the stable vector.
    Latest,
    /// Latest version whose dependencies are within the stable vector joined
    /// with the client's own dependency set.
    #[default]
    StableJoin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerParams {
    /// Heartbeat interval in simulated ms.
    pub heartbeat_ms: u64,
    /// VV gossip interval in simulated ms.
    pub gossip_ms: u64,
    /// Parked reads older than this are rejected with a timeout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub park_timeout_ms: Option<u64>,
    pub read_fallback: ReadFallback,
}

impl Default for ServerParams {
    fn default() -> Self {
        ServerParams {
            heartbeat_ms: 10,
            gossip_ms: 10,
            park_timeout_ms: None,
            read_fallback: ReadFallback::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ServerError {
    #[error("server `{0}` is not part of the configuration")]
    UnknownServer(ServerId),
    #[error("server `{0}` has no tracking group")]
    NoTrackingGroup(ServerId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServerTimer {
    ParkExpiry(u64),
}

#[derive(Debug, Default)]
pub struct Effects {
    pub sends: Vec<Envelope>,
    pub records: Vec<TraceRecord>,
    /// `(delay_ms, timer)` pairs to schedule for this server.
    pub timers: Vec<(u64, ServerTimer)>,
}

impl Effects {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.sends.clear();
        self.records.clear();
        self.timers.clear();
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub puts: u64,
    pub gets_served: u64,
    pub gets_parked: u64,
    pub stable_reads: u64,
    pub fallback_reads: u64,
    pub rejects: u64,
}

#[derive(Clone, Debug)]
struct ParkedGet {
    id: u64,
    client: ClientId,
    key: Key,
    cg: CheckingGroupId,
    ds: DependencySet,
}

#[derive(Clone, Debug)]
pub struct Server {
    id: ServerId,
    group: TrackingGroupId,
    config: Arc<GroupConfig>,
    params: ServerParams,
    hlc: HlcState,
    store: BTreeMap<Key, Vec<(VersionId, Version)>>,
    /// Latest timestamp heard from every key-sharing server, self included.
    peer_latest: BTreeMap<ServerId, HlcTimestamp>,
    /// Key-sharing servers per tracking group.
    sharing_by_group: BTreeMap<TrackingGroupId, Vec<ServerId>>,
    vv: VersionVector,
    svv: BTreeMap<CheckingGroupId, VersionVector>,
    peer_vv_cache: BTreeMap<ServerId, VersionVector>,
    pending: Vec<ParkedGet>,
    next_park_id: u64,
    last_send: BTreeMap<ServerId, u64>,
    stats: ServerStats,
}

impl Server {
    pub fn new(
        id: ServerId,
        config: Arc<GroupConfig>,
        params: ServerParams,
    ) -> Result<Self, ServerError> {
        if !config.servers.contains(&id) {
            return Err(ServerError::UnknownServer(id));
        }
        let group = config
            .tracking_of(&id)
            .cloned()
            .ok_or_else(|| ServerError::NoTrackingGroup(id.clone()))?;
        let sharing = config.key_sharing_peers(&id);
        let mut sharing_by_group: BTreeMap<TrackingGroupId, Vec<ServerId>> = BTreeMap::new();
        for j in &sharing {
            if let Some(t) = config.tracking_of(j) {
                sharing_by_group.entry(t.clone()).or_default().push(j.clone());
            }
        }
        let peer_latest = sharing
            .iter()
            .map(|j| (j.clone(), HlcTimestamp::ZERO))
            .collect();
        let mut server = Server {
            id,
            group,
            params,
            hlc: HlcState::new(),
            store: BTreeMap::new(),
            peer_latest,
            sharing_by_group,
            vv: VersionVector::new(),
            svv: BTreeMap::new(),
            peer_vv_cache: BTreeMap::new(),
            pending: Vec::new(),
            next_park_id: 0,
            last_send: BTreeMap::new(),
            stats: ServerStats::default(),
            config,
        };
        server.vv = server.computed_vv();
        let zero = VersionVector::zero(&server.config.tracking_groups());
        for cg in server.config.checking_of(&server.id) {
            server.svv.insert(cg, zero.clone());
        }
        server.recompute_svv();
        Ok(server)
    }

    pub fn id(&self) -> &ServerId {
        &self.id
    }

    pub fn tracking_group(&self) -> &TrackingGroupId {
        &self.group
    }

    pub fn config(&self) -> &Arc<GroupConfig> {
        &self.config
    }

    pub fn params(&self) -> &ServerParams {
        &self.params
    }

    pub fn hlc(&self) -> HlcTimestamp {
        self.hlc.current()
    }

    pub fn vv(&self) -> &VersionVector {
        &self.vv
    }

    pub fn svv(&self, cg: &CheckingGroupId) -> Option<&VersionVector> {
        self.svv.get(cg)
    }

    pub fn svvs(&self) -> &BTreeMap<CheckingGroupId, VersionVector> {
        &self.svv
    }

    pub fn peer_latest(&self) -> &BTreeMap<ServerId, HlcTimestamp> {
        &self.peer_latest
    }

    pub fn pending_gets(&self) -> usize {
        self.pending.len()
    }

    pub fn stats(&self) -> ServerStats {
        self.stats
    }

    /// Versions of `key` in ascending last-writer-wins order.
    pub fn chain(&self, key: &Key) -> impl Iterator<Item = &Version> {
        self.store
            .get(key)
            .into_iter()
            .flat_map(|c| c.iter().map(|(_, v)| v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.store.keys()
    }

    pub fn latest(&self, key: &Key) -> Option<&Version> {
        self.store.get(key).and_then(|c| c.last()).map(|(_, v)| v)
    }

    /// Dispatches one delivered message.
    pub fn handle(&mut self, now: u64, pc: u64, env: Envelope, fx: &mut Effects) {
        let Envelope { from, msg, .. } = env;
        match (from, msg) {
            (ActorId::Client(c), Message::GetReq { key, cg, ds }) => {
                self.handle_get_req(now, pc, c, key, cg, ds, fx)
            }
            (ActorId::Client(c), Message::PutReq { key, value, ds }) => {
                self.handle_put_req(now, pc, c, key, value, ds, fx)
            }
            (ActorId::Server(j), Message::Replicate { key, version }) => {
                self.handle_replicate(now, j, key, version, fx)
            }
            (ActorId::Server(j), Message::Heartbeat { ts }) => self.handle_heartbeat(now, j, ts, fx),
            (ActorId::Server(j), Message::VvGossip { vv }) => self.handle_vv_gossip(now, j, vv, fx),
            // Replies are never addressed to servers.
            (_, _) => {}
        }
    }

    fn send(&self, fx: &mut Effects, to: impl Into<ActorId>, msg: Message) {
        fx.sends.push(Envelope {
            from: ActorId::Server(self.id.clone()),
            to: to.into(),
            msg,
        });
    }

    fn reject(&mut self, fx: &mut Effects, client: &ClientId, key: Key, reason: RejectReason) {
        self.stats.rejects += 1;
        self.send(fx, client.clone(), Message::Reject { key, reason });
    }

    #[allow(clippy::too_many_arguments)]
    pub fn handle_put_req(
        &mut self,
        now: u64,
        pc: u64,
        client: ClientId,
        key: Key,
        value: Value,
        ds: DependencySet,
        fx: &mut Effects,
    ) {
        if !self.config.hosts_key(&self.id, &key) {
            self.reject(fx, &client, key, RejectReason::Placement);
            return;
        }
        let dt = ds.max_timestamp();
        let ts = self.hlc.update_for_put(pc, dt);
        let mut vds = ds;
        vds.raise(self.group.clone(), ts);
        let version = Version {
            key: key.clone(),
            value,
            ds: vds,
            origin: self.id.clone(),
            origin_group: self.group.clone(),
        };
        self.insert(version.clone());
        self.stats.puts += 1;
        self.send(
            fx,
            client,
            Message::PutReply {
                key: key.clone(),
                tg: self.group.clone(),
                ut: ts,
            },
        );
        let hosts: Vec<ServerId> = self
            .config
            .hosts(&key)
            .map(|h| h.iter().filter(|j| **j != self.id).cloned().collect())
            .unwrap_or_default();
        for j in hosts {
            self.last_send.insert(j.clone(), now);
            self.send(
                fx,
                j,
                Message::Replicate {
                    key: key.clone(),
                    version: version.clone(),
                },
            );
        }
        self.after_clock_change(now, fx);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn handle_get_req(
        &mut self,
        now: u64,
        pc: u64,
        client: ClientId,
        key: Key,
        cg: CheckingGroupId,
        ds: DependencySet,
        fx: &mut Effects,
    ) {
        if !self.config.hosts_key(&self.id, &key) {
            self.reject(fx, &client, key, RejectReason::Placement);
            return;
        }
        if !self.svv.contains_key(&cg) {
            self.reject(fx, &client, key, RejectReason::UnknownCheckingGroup);
            return;
        }
        // Nothing this server will ever write can be older than its own
        // clock, so a dependency on its own tracking group is satisfied by
        // advancing the clock past it.
        if let Some(h) = ds.get(&self.group) {
            if h > self.hlc.current() {
                self.hlc.update_for_put(pc, h);
                self.after_clock_change(now, fx);
            }
        }
        let parked = ParkedGet {
            id: self.next_park_id,
            client,
            key,
            cg,
            ds,
        };
        if !self.try_serve(&parked, fx) {
            self.next_park_id += 1;
            self.stats.gets_parked += 1;
            fx.records.push(
                TraceRecord::new(now, self.id.clone(), TraceKind::GetPark)
                    .key(&parked.key)
                    .ds(&parked.ds)
                    .cg(&parked.cg)
                    .peer(parked.client.clone()),
            );
            if let Some(t) = self.params.park_timeout_ms {
                fx.timers.push((t, ServerTimer::ParkExpiry(parked.id)));
            }
            self.pending.push(parked);
        }
    }

    /// Replies to the read if its dependencies are covered by the VV.
    fn try_serve(&mut self, req: &ParkedGet, fx: &mut Effects) -> bool {
        let Some(svv) = self.svv.get(&req.cg) else {
            self.reject(fx, &req.client, req.key.clone(), RejectReason::UnknownCheckingGroup);
            return true;
        };
        if !req.ds.within(&self.vv) {
            return false;
        }
        let horizon = if req.ds.within(svv) {
            self.stats.stable_reads += 1;
            Some(svv.clone())
        } else {
            self.stats.fallback_reads += 1;
            match self.params.read_fallback {
                ReadFallback::Latest => None,
                ReadFallback::StableJoin => Some(svv.join_ds(&req.ds)),
            }
        };
        let chain = self.store.get(&req.key);
        let version = chain.and_then(|c| match &horizon {
            Some(h) => c.iter().rev().find(|(_, v)| v.ds.within(h)).map(|(_, v)| v),
            None => c.last().map(|(_, v)| v),
        });
        self.stats.gets_served += 1;
        self.send(
            fx,
            req.client.clone(),
            Message::GetReply {
                key: req.key.clone(),
                version: version.cloned(),
            },
        );
        true
    }

    pub fn handle_replicate(
        &mut self,
        now: u64,
        from: ServerId,
        key: Key,
        version: Version,
        fx: &mut Effects,
    ) {
        let mut rec = TraceRecord::new(now, self.id.clone(), TraceKind::Replicate)
            .key(&key)
            .ds(&version.ds)
            .peer(from);
        let Ok(vid) = version.id() else {
            fx.records.push(rec.note("malformed"));
            return;
        };
        rec = rec.version(VersionRef {
            wt: vid.wt,
            origin: vid.origin.clone(),
        });
        if !self.config.hosts_key(&self.id, &key) || version.key != key {
            fx.records.push(rec.note("placement"));
            return;
        }
        let inserted = self.insert(version);
        if !inserted {
            rec = rec.note("duplicate");
        }
        fx.records.push(rec);
        if let Some(slot) = self.peer_latest.get_mut(&vid.origin) {
            if vid.wt > *slot {
                *slot = vid.wt;
                self.after_vv_input_change(now, fx);
            }
        }
    }

    pub fn handle_heartbeat(&mut self, now: u64, from: ServerId, ts: HlcTimestamp, fx: &mut Effects) {
        let mut rec = TraceRecord::new(now, self.id.clone(), TraceKind::Heartbeat)
            .version(VersionRef {
                wt: ts,
                origin: from.clone(),
            })
            .peer(from.clone());
        match self.peer_latest.get_mut(&from) {
            Some(slot) if from != self.id => {
                fx.records.push(rec);
                if ts > *slot {
                    *slot = ts;
                    self.after_vv_input_change(now, fx);
                }
            }
            _ => {
                rec = rec.note("not-a-peer");
                fx.records.push(rec);
            }
        }
    }

    pub fn handle_vv_gossip(&mut self, now: u64, from: ServerId, vv: VersionVector, fx: &mut Effects) {
        let rec = TraceRecord::new(now, self.id.clone(), TraceKind::Gossip)
            .vv(&vv)
            .peer(from.clone());
        if !self.config.checking_peers(&self.id).contains(&from) {
            fx.records.push(rec.note("ignored-non-member"));
            return;
        }
        fx.records.push(rec);
        let merged = match self.peer_vv_cache.get(&from) {
            Some(old) => old.entrywise_max(&vv),
            None => vv,
        };
        self.peer_vv_cache.insert(from, merged);
        self.recompute_svv();
    }

    /// Sends a heartbeat to every key-sharing peer that has not received a
    /// replicate or heartbeat in the last interval.
    pub fn on_heartbeat_timer(&mut self, now: u64, pc: u64, fx: &mut Effects) {
        let interval = self.params.heartbeat_ms;
        let due: Vec<ServerId> = self
            .peer_latest
            .keys()
            .filter(|j| **j != self.id)
            .filter(|j| now.saturating_sub(self.last_send.get(*j).copied().unwrap_or(0)) >= interval)
            .cloned()
            .collect();
        if due.is_empty() {
            return;
        }
        let ts = self.hlc.tick(pc);
        for j in due {
            self.last_send.insert(j.clone(), now);
            self.send(fx, j, Message::Heartbeat { ts });
        }
        self.after_clock_change(now, fx);
    }

    /// Shares this server's VV with every co-member of its checking groups.
    pub fn on_gossip_timer(&mut self, _now: u64, fx: &mut Effects) {
        for j in self.config.checking_peers(&self.id) {
            self.send(fx, j, Message::VvGossip { vv: self.vv.clone() });
        }
    }

    pub fn on_timer(&mut self, now: u64, timer: ServerTimer, fx: &mut Effects) {
        match timer {
            ServerTimer::ParkExpiry(id) => {
                if let Some(pos) = self.pending.iter().position(|p| p.id == id) {
                    let p = self.pending.remove(pos);
                    let _ = now;
                    self.reject(fx, &p.client, p.key, RejectReason::Timeout);
                }
            }
        }
    }

    /// Installs a new configuration epoch.
    pub fn apply_reconfig(
        &mut self,
        now: u64,
        config: Arc<GroupConfig>,
        directive: &ReconfigDirective,
        fx: &mut Effects,
    ) {
        self.config = config;
        let (cg, note) = match &directive.change {
            GroupChange::AddChecking { cg, members } => {
                if members.contains(&self.id) {
                    let zero = VersionVector::zero(&self.config.tracking_groups());
                    self.svv.entry(cg.clone()).or_insert(zero);
                    self.recompute_svv();
                }
                (cg, "add")
            }
            GroupChange::RemoveChecking { cg } => {
                self.svv.remove(cg);
                (cg, "remove")
            }
        };
        fx.records.push(
            TraceRecord::new(now, self.id.clone(), TraceKind::Reconfig)
                .cg(cg)
                .note(format!("{note}:epoch={}", directive.epoch)),
        );
        self.reevaluate_pending(fx);
    }

    /// Inserts into the chain in version order; false on duplicates.
    fn insert(&mut self, version: Version) -> bool {
        let Ok(vid) = version.id() else {
            return false;
        };
        let chain = self.store.entry(version.key.clone()).or_default();
        match chain.binary_search_by(|(id, _)| id.cmp(&vid)) {
            Ok(_) => false,
            Err(pos) => {
                chain.insert(pos, (vid, version));
                true
            }
        }
    }

    fn after_clock_change(&mut self, now: u64, fx: &mut Effects) {
        let ts = self.hlc.current();
        if let Some(slot) = self.peer_latest.get_mut(&self.id) {
            if ts > *slot {
                *slot = ts;
                self.after_vv_input_change(now, fx);
            }
        }
    }

    fn after_vv_input_change(&mut self, _now: u64, fx: &mut Effects) {
        let next = self.computed_vv().entrywise_max(&self.vv);
        if next != self.vv {
            self.vv = next;
            self.recompute_svv();
            self.reevaluate_pending(fx);
        }
    }

    fn computed_vv(&self) -> VersionVector {
        self.config
            .tracking_groups()
            .into_iter()
            .map(|t| {
                let entry = self
                    .sharing_by_group
                    .get(&t)
                    .and_then(|peers| peers.iter().filter_map(|j| self.peer_latest.get(j)).min())
                    .map_or(VvEntry::Infinite, |ts| VvEntry::At(*ts));
                (t, entry)
            })
            .collect()
    }

    fn recompute_svv(&mut self) {
        let groups = self.config.tracking_groups();
        let zero = VersionVector::zero(&groups);
        let cgs: Vec<CheckingGroupId> = self.svv.keys().cloned().collect();
        for cg in cgs {
            let members: BTreeSet<ServerId> = self.config.members(&cg).cloned().unwrap_or_default();
            let mut acc = self.vv.clone();
            for m in members.iter().filter(|m| **m != self.id) {
                acc = acc.entrywise_min(self.peer_vv_cache.get(m).unwrap_or(&zero));
            }
            let slot = self.svv.get_mut(&cg).expect("listed above");
            *slot = slot.entrywise_max(&acc);
        }
    }

    fn reevaluate_pending(&mut self, fx: &mut Effects) {
        if self.pending.is_empty() {
            return;
        }
        let pending = std::mem::take(&mut self.pending);
        for p in pending {
            if !self.try_serve(&p, fx) {
                self.pending.push(p);
            }
        }
    }
}
