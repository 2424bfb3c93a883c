//! On-disk system description (TOML): servers with their region and clock,
//! tracking and checking groups, key classes with host lists, the delay
//! model and protocol timers.
//!
//! Unknown fields are rejected. `to_toml` is canonical, so
//! `to_toml(from_toml(to_toml(c))) == to_toml(c)`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouping::{GroupConfig, KeyClass, Topology, Violation};
use crate::model::{is_valid_identifier, CheckingGroupId, Key, ServerId, TrackingGroupId};
use crate::server::ServerParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub version: u32,
    #[serde(default)]
    pub protocol: ServerParams,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub servers: Vec<ServerSpec>,
    #[serde(default)]
    pub tracking_groups: Vec<GroupSpec>,
    #[serde(default)]
    pub checking_groups: Vec<GroupSpec>,
    #[serde(default)]
    pub key_classes: Vec<KeyClassSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub id: String,
    pub region: String,
    /// Replica label used by grouping presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica: Option<String>,
    #[serde(default)]
    pub clock_offset_ms: i64,
    #[serde(default)]
    pub clock_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub id: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyClassSpec {
    pub name: String,
    pub hosts: Vec<String>,
    pub keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    /// One-way latency between actors of the same region.
    pub local_ms: u64,
    /// One-way latency between regions without an explicit entry.
    pub default_ms: u64,
    /// Uniform jitter in `[0, jitter_ms)` added per message.
    pub jitter_ms: u64,
    /// Per-link FIFO delivery. Off only for robustness tests.
    pub fifo: bool,
    /// Probability that a server-to-server message is delivered twice.
    pub duplicate_rate: f64,
    pub latency: Vec<LatencySpec>,
    /// Extra delay added to every message a server sends to other servers.
    pub extra_delay_ms: BTreeMap<String, u64>,
    /// Also apply `extra_delay_ms` to replies sent to clients.
    pub extra_delay_to_clients: bool,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            local_ms: 1,
            default_ms: 20,
            jitter_ms: 0,
            fifo: true,
            duplicate_rate: 0.0,
            latency: Vec::new(),
            extra_delay_ms: BTreeMap::new(),
            extra_delay_to_clients: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencySpec {
    pub a: String,
    pub b: String,
    pub ms: u64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("unsupported config version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server `{0}` has no replica label")]
    NoReplica(String),
    #[error("invalid configuration:\n  {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<ConfigViolation>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigViolation {
    #[error("{0}")]
    Grouping(#[from] Violation),
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("duplicate server `{0}`")]
    DuplicateServer(String),
    #[error("duplicate group `{0}`")]
    DuplicateGroup(String),
    #[error("duplicate key class `{0}`")]
    DuplicateClass(String),
    #[error("server `{0}` is in more than one tracking group")]
    SeveralTrackingGroups(String),
    #[error("extra delay configured for unknown server `{0}`")]
    UnknownDelayedServer(String),
    #[error("duplicate_rate must be in [0, 1), got {0}")]
    DuplicateRate(f64),
    #[error("{0} must be positive")]
    ZeroInterval(&'static str),
    #[error("clock drift of `{0}` must be greater than -1")]
    Drift(String),
}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(ConfigError::Version(cfg.version));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Builds a configuration from a grouping snapshot; every server is put
    /// in `region` with a perfect clock unless overridden later.
    pub fn from_group_config(group: &GroupConfig, replicas: &BTreeMap<ServerId, String>) -> Self {
        let mut cfg = SystemConfig {
            version: SCHEMA_VERSION,
            protocol: ServerParams::default(),
            network: NetworkSpec::default(),
            servers: group
                .servers
                .iter()
                .map(|s| ServerSpec {
                    id: s.to_string(),
                    region: "default".into(),
                    replica: replicas.get(s).cloned(),
                    clock_offset_ms: 0,
                    clock_drift: 0.0,
                })
                .collect(),
            tracking_groups: Vec::new(),
            checking_groups: Vec::new(),
            key_classes: group
                .classes
                .values()
                .map(|c| KeyClassSpec {
                    name: c.name.clone(),
                    hosts: c.hosts.iter().map(|h| h.to_string()).collect(),
                    keys: c.keys.iter().map(|k| k.to_string()).collect(),
                })
                .collect(),
        };
        cfg.set_grouping(group);
        cfg
    }

    /// Replaces tracking and checking groups with those of `group`.
    pub fn set_grouping(&mut self, group: &GroupConfig) {
        let mut tracking: BTreeMap<&TrackingGroupId, Vec<String>> = BTreeMap::new();
        for (s, t) in &group.tracking {
            tracking.entry(t).or_default().push(s.to_string());
        }
        self.tracking_groups = tracking
            .into_iter()
            .map(|(id, members)| GroupSpec {
                id: id.to_string(),
                members,
            })
            .collect();
        self.checking_groups = group
            .checking
            .iter()
            .map(|(id, m)| GroupSpec {
                id: id.to_string(),
                members: m.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
    }

    pub fn server(&self, id: &str) -> Option<&ServerSpec> {
        self.servers.iter().find(|s| s.id == id)
    }

    pub fn server_mut(&mut self, id: &str) -> Option<&mut ServerSpec> {
        self.servers.iter_mut().find(|s| s.id == id)
    }

    /// Server/replica layout for grouping presets.
    pub fn topology(&self) -> Result<Topology, ConfigError> {
        let group = self.group_config()?;
        let servers = self
            .servers
            .iter()
            .map(|s| {
                s.replica
                    .clone()
                    .map(|r| (ServerId::new(&s.id), r))
                    .ok_or_else(|| ConfigError::NoReplica(s.id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Topology {
            servers,
            classes: group.classes.into_values().collect(),
        })
    }

    /// Keeps only `keep` and drops every group, class host and delay entry
    /// that refers to another server. Empty groups and classes are removed.
    pub fn restricted_to(&self, keep: &BTreeSet<&str>) -> SystemConfig {
        let mut out = self.clone();
        out.servers.retain(|s| keep.contains(s.id.as_str()));
        let prune = |groups: &mut Vec<GroupSpec>| {
            for g in groups.iter_mut() {
                g.members.retain(|m| keep.contains(m.as_str()));
            }
            groups.retain(|g| !g.members.is_empty());
        };
        prune(&mut out.tracking_groups);
        prune(&mut out.checking_groups);
        for c in &mut out.key_classes {
            c.hosts.retain(|h| keep.contains(h.as_str()));
        }
        out.key_classes.retain(|c| !c.hosts.is_empty());
        out.network
            .extra_delay_ms
            .retain(|s, _| keep.contains(s.as_str()));
        out
    }

    /// Structural conversion; identifier and duplicate problems are errors.
    pub fn group_config(&self) -> Result<GroupConfig, ConfigError> {
        let mut problems = Vec::new();
        let group = self.build_group(&mut problems);
        if problems.is_empty() {
            Ok(group)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    fn build_group(&self, problems: &mut Vec<ConfigViolation>) -> GroupConfig {
        let mut check_id = |s: &str| {
            if !is_valid_identifier(s) {
                problems.push(ConfigViolation::InvalidIdentifier(s.to_string()));
            }
        };
        for s in &self.servers {
            check_id(&s.id);
        }
        for g in self.tracking_groups.iter().chain(&self.checking_groups) {
            check_id(&g.id);
            g.members.iter().for_each(|m| check_id(m));
        }
        for c in &self.key_classes {
            check_id(&c.name);
            c.hosts.iter().for_each(|h| check_id(h));
            c.keys.iter().for_each(|k| check_id(k));
        }

        let mut servers = BTreeSet::new();
        for s in &self.servers {
            if !servers.insert(ServerId::new(&s.id)) {
                problems.push(ConfigViolation::DuplicateServer(s.id.clone()));
            }
        }
        let mut tracking = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for g in &self.tracking_groups {
            if !seen.insert(&g.id) {
                problems.push(ConfigViolation::DuplicateGroup(g.id.clone()));
            }
            for m in &g.members {
                if tracking
                    .insert(ServerId::new(m), TrackingGroupId::new(&g.id))
                    .is_some()
                {
                    problems.push(ConfigViolation::SeveralTrackingGroups(m.clone()));
                }
            }
        }
        let mut checking = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for g in &self.checking_groups {
            if !seen.insert(&g.id) {
                problems.push(ConfigViolation::DuplicateGroup(g.id.clone()));
            }
            checking.insert(
                CheckingGroupId::new(&g.id),
                g.members.iter().map(ServerId::new).collect(),
            );
        }
        let mut classes = BTreeMap::new();
        for c in &self.key_classes {
            let class = KeyClass {
                name: c.name.clone(),
                hosts: c.hosts.iter().map(ServerId::new).collect(),
                keys: c.keys.iter().map(Key::new).collect(),
            };
            if classes.insert(c.name.clone(), class).is_some() {
                problems.push(ConfigViolation::DuplicateClass(c.name.clone()));
            }
        }
        GroupConfig {
            epoch: 0,
            servers,
            tracking,
            checking,
            classes,
        }
    }

    /// Every problem with the configuration; empty means it is usable.
    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut problems = Vec::new();
        let group = self.build_group(&mut problems);
        if let Err(v) = group.validate() {
            problems.extend(v.into_iter().map(ConfigViolation::Grouping));
        }
        for s in self.network.extra_delay_ms.keys() {
            if !group.servers.contains(s.as_str()) {
                problems.push(ConfigViolation::UnknownDelayedServer(s.clone()));
            }
        }
        let rate = self.network.duplicate_rate;
        if !(0.0..1.0).contains(&rate) {
            problems.push(ConfigViolation::DuplicateRate(rate));
        }
        if self.protocol.heartbeat_ms == 0 {
            problems.push(ConfigViolation::ZeroInterval("heartbeat_ms"));
        }
        if self.protocol.gossip_ms == 0 {
            problems.push(ConfigViolation::ZeroInterval("gossip_ms"));
        }
        for s in &self.servers {
            if s.clock_drift <= -1.0 || !s.clock_drift.is_finite() {
                problems.push(ConfigViolation::Drift(s.id.clone()));
            }
        }
        problems
    }

    /// Validated grouping snapshot.
    pub fn validated(&self) -> Result<GroupConfig, ConfigError> {
        let problems = self.violations();
        if problems.is_empty() {
            self.group_config()
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}
