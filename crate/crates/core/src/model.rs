//! Shared domain types: identifiers, hybrid timestamps, dependency sets,
//! version vectors, versions and the protocol messages exchanged between
//! clients and servers.
//!
//! Everything here is an immutable value. The canonical textual forms
//! (`l.c` for timestamps, `{tg=l.c,...}` for dependency sets) are the ones
//! written to trace files, so `Display` and `FromStr` must stay in sync.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("version of key `{key}` has no entry for its origin group `{group}`")]
    MissingOriginEntry { key: Key, group: TrackingGroupId },
    #[error("cannot order versions of different keys (`{0}` vs `{1}`)")]
    KeyMismatch(Key, Key),
    #[error("invalid identifier `{0}`: only ASCII letters, digits, `_` and `-` are allowed")]
    InvalidIdentifier(String),
    #[error("cannot parse `{input}` as {what}")]
    Parse { what: &'static str, input: String },
}

fn parse_err(what: &'static str, input: &str) -> ModelError {
    ModelError::Parse {
        what,
        input: input.to_string(),
    }
}

/// Identifiers end up as whitespace-separated trace tokens, so the alphabet
/// is restricted to characters that never collide with the trace syntax.
pub fn is_valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(s: impl AsRef<str>) -> Self {
                Self(Arc::from(s.as_ref()))
            }

            /// Like [`Self::new`] but rejects strings that cannot appear in a trace.
            pub fn parse(s: &str) -> Result<Self, ModelError> {
                if is_valid_identifier(s) {
                    Ok(Self::new(s))
                } else {
                    Err(ModelError::InvalidIdentifier(s.to_string()))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", &self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self::new(s)
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self::new(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// A server (one copy of one or more partitions).
    ServerId
);
id_type!(
    /// A client session.
    ClientId
);
id_type!(
    /// A tracking group: servers whose writes share one dependency entry.
    TrackingGroupId
);
id_type!(
    /// A checking group: servers that exchange version vectors and compute
    /// a stable version vector together.
    CheckingGroupId
);
id_type!(Key);

/// Opaque payload. Values never appear in traces.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(Arc<str>);

impl Value {
    pub fn new(s: impl AsRef<str>) -> Self {
        Self(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Self::new(s)
    }
}

/// Anything that can send or receive a message in the simulator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActorId {
    Server(ServerId),
    Client(ClientId),
}

impl ActorId {
    pub fn as_str(&self) -> &str {
        match self {
            ActorId::Server(s) => s.as_str(),
            ActorId::Client(c) => c.as_str(),
        }
    }

    pub fn as_server(&self) -> Option<&ServerId> {
        match self {
            ActorId::Server(s) => Some(s),
            ActorId::Client(_) => None,
        }
    }

    pub fn as_client(&self) -> Option<&ClientId> {
        match self {
            ActorId::Client(c) => Some(c),
            ActorId::Server(_) => None,
        }
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<ServerId> for ActorId {
    fn from(s: ServerId) -> Self {
        ActorId::Server(s)
    }
}

impl From<ClientId> for ActorId {
    fn from(c: ClientId) -> Self {
        ActorId::Client(c)
    }
}

/// Hybrid logical clock value. `l` is in simulated milliseconds, `c` is the
/// logical counter. Field order gives the lexicographic total order.
#[derive(
    Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct HlcTimestamp {
    pub l: u64,
    pub c: u64,
}

impl HlcTimestamp {
    pub const ZERO: HlcTimestamp = HlcTimestamp { l: 0, c: 0 };

    pub const fn new(l: u64, c: u64) -> Self {
        Self { l, c }
    }
}

impl fmt::Display for HlcTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.l, self.c)
    }
}

impl fmt::Debug for HlcTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.l, self.c)
    }
}

impl FromStr for HlcTimestamp {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (l, c) = s.split_once('.').ok_or_else(|| parse_err("timestamp", s))?;
        let l = l.parse().map_err(|_| parse_err("timestamp", s))?;
        let c = c.parse().map_err(|_| parse_err("timestamp", s))?;
        Ok(Self { l, c })
    }
}

/// Per-tracking-group map of the highest timestamps a client (or a version)
/// depends on. At most one entry per group.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DependencySet {
    entries: BTreeMap<TrackingGroupId, HlcTimestamp>,
}

impl DependencySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(group: TrackingGroupId, ts: HlcTimestamp) -> Self {
        let mut ds = Self::new();
        ds.entries.insert(group, ts);
        ds
    }

    pub fn get(&self, group: &TrackingGroupId) -> Option<HlcTimestamp> {
        self.entries.get(group).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TrackingGroupId, HlcTimestamp)> + '_ {
        self.entries.iter().map(|(g, t)| (g, *t))
    }

    /// Raises the entry for `group` to at least `ts`.
    pub fn raise(&mut self, group: TrackingGroupId, ts: HlcTimestamp) {
        let slot = self.entries.entry(group).or_insert(ts);
        if ts > *slot {
            *slot = ts;
        }
    }

    /// Join of two dependency sets: union of groups, entry-wise maximum.
    pub fn merge(&self, other: &DependencySet) -> DependencySet {
        let mut out = self.clone();
        out.merge_in(other);
        out
    }

    pub fn merge_in(&mut self, other: &DependencySet) {
        for (g, t) in other.iter() {
            self.raise(g.clone(), t);
        }
    }

    /// Largest timestamp across all entries, `(0,0)` for the empty set.
    pub fn max_timestamp(&self) -> HlcTimestamp {
        self.entries
            .values()
            .copied()
            .max()
            .unwrap_or(HlcTimestamp::ZERO)
    }

    /// True iff every entry of `self` is at most the entry of `other`
    /// (missing entries in `other` count as `(0,0)`).
    pub fn dominated_by(&self, other: &DependencySet) -> bool {
        self.iter()
            .all(|(g, t)| t <= other.get(g).unwrap_or(HlcTimestamp::ZERO))
    }

    /// True iff every entry is at most the corresponding version-vector entry.
    pub fn within(&self, vv: &VersionVector) -> bool {
        self.iter().all(|(g, t)| VvEntry::At(t) <= vv.get(g))
    }
}

impl fmt::Display for DependencySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (g, t)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g}={t}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for DependencySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn braced_pairs<'a>(s: &'a str, what: &'static str) -> Result<Vec<(&'a str, &'a str)>, ModelError> {
    let inner = s
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| parse_err(what, s))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|p| p.split_once('=').ok_or_else(|| parse_err(what, s)))
        .collect()
}

impl FromStr for DependencySet {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut ds = DependencySet::new();
        for (g, t) in braced_pairs(s, "dependency set")? {
            let g = TrackingGroupId::parse(g)?;
            if ds.entries.contains_key(&g) {
                return Err(parse_err("dependency set", s));
            }
            ds.entries.insert(g, t.parse()?);
        }
        Ok(ds)
    }
}

impl FromIterator<(TrackingGroupId, HlcTimestamp)> for DependencySet {
    fn from_iter<I: IntoIterator<Item = (TrackingGroupId, HlcTimestamp)>>(iter: I) -> Self {
        let mut ds = DependencySet::new();
        for (g, t) in iter {
            ds.raise(g, t);
        }
        ds
    }
}

/// One version-vector slot: a timestamp, or `+inf` when the owning server
/// shares no key with any server of that tracking group.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VvEntry {
    At(HlcTimestamp),
    Infinite,
}

impl VvEntry {
    pub const ZERO: VvEntry = VvEntry::At(HlcTimestamp::ZERO);
}

impl fmt::Display for VvEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VvEntry::At(t) => write!(f, "{t}"),
            VvEntry::Infinite => f.write_str("inf"),
        }
    }
}

impl fmt::Debug for VvEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for VvEntry {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            Ok(VvEntry::Infinite)
        } else {
            Ok(VvEntry::At(s.parse()?))
        }
    }
}

/// A vector with one entry per tracking group. Used both for a server's VV
/// and for the stable vector of a checking group. Missing entries read as
/// `(0,0)`.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct VersionVector {
    entries: BTreeMap<TrackingGroupId, VvEntry>,
}

impl VersionVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// All-zero vector over the given groups.
    pub fn zero<'a>(groups: impl IntoIterator<Item = &'a TrackingGroupId>) -> Self {
        Self {
            entries: groups.into_iter().map(|g| (g.clone(), VvEntry::ZERO)).collect(),
        }
    }

    pub fn get(&self, group: &TrackingGroupId) -> VvEntry {
        self.entries.get(group).copied().unwrap_or(VvEntry::ZERO)
    }

    pub fn set(&mut self, group: TrackingGroupId, entry: VvEntry) {
        self.entries.insert(group, entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TrackingGroupId, VvEntry)> + '_ {
        self.entries.iter().map(|(g, e)| (g, *e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn combine(&self, other: &VersionVector, pick: fn(VvEntry, VvEntry) -> VvEntry) -> Self {
        let mut entries = BTreeMap::new();
        for g in self.entries.keys().chain(other.entries.keys()) {
            entries
                .entry(g.clone())
                .or_insert_with(|| pick(self.get(g), other.get(g)));
        }
        Self { entries }
    }

    pub fn entrywise_min(&self, other: &VersionVector) -> Self {
        self.combine(other, std::cmp::min)
    }

    pub fn entrywise_max(&self, other: &VersionVector) -> Self {
        self.combine(other, std::cmp::max)
    }

    /// True iff every entry of `self` is at most the matching entry of `other`.
    pub fn le(&self, other: &VersionVector) -> bool {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .all(|g| self.get(g) <= other.get(g))
    }

    /// Entry-wise join of this vector with a dependency set, used for the
    /// visibility horizon of a read whose dependencies exceed the stable vector.
    pub fn join_ds(&self, ds: &DependencySet) -> Self {
        let mut out = self.clone();
        for (g, t) in ds.iter() {
            let e = VvEntry::At(t);
            if e > out.get(g) {
                out.set(g.clone(), e);
            }
        }
        out
    }
}

impl fmt::Display for VersionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (g, e)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g}={e}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for VersionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for VersionVector {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut vv = VersionVector::new();
        for (g, e) in braced_pairs(s, "version vector")? {
            vv.set(TrackingGroupId::parse(g)?, e.parse()?);
        }
        Ok(vv)
    }
}

impl FromIterator<(TrackingGroupId, VvEntry)> for VersionVector {
    fn from_iter<I: IntoIterator<Item = (TrackingGroupId, VvEntry)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Identity and total-order key of a version: write timestamp, then the
/// origin's tracking group, then the origin server.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionId {
    pub wt: HlcTimestamp,
    pub group: TrackingGroupId,
    pub origin: ServerId,
}

impl fmt::Debug for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}/{}", self.wt, self.origin, self.group)
    }
}

/// Immutable write record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Version {
    pub key: Key,
    pub value: Value,
    pub ds: DependencySet,
    pub origin: ServerId,
    pub origin_group: TrackingGroupId,
}

impl Version {
    /// Write timestamp `ds[T(origin)]`.
    pub fn write_ts(&self) -> Result<HlcTimestamp, ModelError> {
        self.ds
            .get(&self.origin_group)
            .ok_or_else(|| ModelError::MissingOriginEntry {
                key: self.key.clone(),
                group: self.origin_group.clone(),
            })
    }

    pub fn id(&self) -> Result<VersionId, ModelError> {
        Ok(VersionId {
            wt: self.write_ts()?,
            group: self.origin_group.clone(),
            origin: self.origin.clone(),
        })
    }
}

/// Last-writer-wins order between two versions of the same key.
pub fn version_order(a: &Version, b: &Version) -> Result<Ordering, ModelError> {
    if a.key != b.key {
        return Err(ModelError::KeyMismatch(a.key.clone(), b.key.clone()));
    }
    Ok(a.id()?.cmp(&b.id()?))
}

/// Why a server refused a request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    /// The key is not hosted at the contacted server.
    Placement,
    /// The named checking group does not exist at the contacted server.
    UnknownCheckingGroup,
    /// A parked read exceeded its configured wait budget.
    Timeout,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Placement => "placement",
            RejectReason::UnknownCheckingGroup => "unknown-cg",
            RejectReason::Timeout => "timeout",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RejectReason {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "placement" => Ok(RejectReason::Placement),
            "unknown-cg" => Ok(RejectReason::UnknownCheckingGroup),
            "timeout" => Ok(RejectReason::Timeout),
            _ => Err(parse_err("reject reason", s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    GetReq {
        key: Key,
        cg: CheckingGroupId,
        ds: DependencySet,
    },
    /// `None` when the key has no visible version.
    GetReply {
        key: Key,
        version: Option<Version>,
    },
    PutReq {
        key: Key,
        value: Value,
        ds: DependencySet,
    },
    PutReply {
        key: Key,
        tg: TrackingGroupId,
        ut: HlcTimestamp,
    },
    Replicate {
        key: Key,
        version: Version,
    },
    Heartbeat {
        ts: HlcTimestamp,
    },
    VvGossip {
        vv: VersionVector,
    },
    Reject {
        key: Key,
        reason: RejectReason,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub from: ActorId,
    pub to: ActorId,
    pub msg: Message,
}
