//! Tracking grouping `T`, checking grouping `C`, data placement `H`.
//!
//! Placement is expressed over key classes (partitions): every key belongs
//! to exactly one class and a class lists the servers hosting it. Grouping
//! and placement are independent; the presets only ever touch `T` and `C`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{CheckingGroupId, Key, ServerId, TrackingGroupId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyClass {
    pub name: String,
    pub hosts: BTreeSet<ServerId>,
    pub keys: BTreeSet<Key>,
}

/// Immutable snapshot of the grouping and placement functions.
///
/// Fields are public so that invalid configurations can be built and then
/// reported by [`GroupConfig::validate`]; the simulator only accepts
/// configurations that validate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupConfig {
    pub epoch: u64,
    pub servers: BTreeSet<ServerId>,
    pub tracking: BTreeMap<ServerId, TrackingGroupId>,
    pub checking: BTreeMap<CheckingGroupId, BTreeSet<ServerId>>,
    pub classes: BTreeMap<String, KeyClass>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("server `{0}` has no tracking group")]
    MissingTracking(ServerId),
    #[error("tracking function names unknown server `{0}`")]
    UnknownTrackedServer(ServerId),
    #[error("server `{0}` has an empty checking set")]
    EmptyCheckingSet(ServerId),
    #[error("checking group `{cg}` references unknown server `{server}`")]
    UnknownCheckingMember { cg: CheckingGroupId, server: ServerId },
    #[error("checking group `{0}` has no members")]
    EmptyCheckingGroup(CheckingGroupId),
    #[error("key class `{0}` has an empty host set")]
    EmptyHostSet(String),
    #[error("key class `{class}` is hosted on unknown server `{server}`")]
    UnknownHost { class: String, server: ServerId },
    #[error("key `{0}` belongs to more than one key class")]
    KeyInSeveralClasses(Key),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GroupingError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("checking group `{0}` already exists")]
    DuplicateCheckingGroup(CheckingGroupId),
    #[error("checking group `{0}` does not exist")]
    UnknownCheckingGroup(CheckingGroupId),
    #[error("a checking group needs at least one member")]
    EmptyMembers,
    #[error("unknown server `{0}`")]
    UnknownServer(ServerId),
    #[error("removing `{cg}` would leave server `{server}` without a checking group")]
    WouldEmptyCheckingSet { cg: CheckingGroupId, server: ServerId },
}

/// Change of the checking grouping applied at a new epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupChange {
    AddChecking {
        cg: CheckingGroupId,
        members: BTreeSet<ServerId>,
    },
    RemoveChecking {
        cg: CheckingGroupId,
    },
}

/// Instruction to servers after a reconfiguration: members of an added group
/// allocate its stable vector, members of a removed group drop it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconfigDirective {
    pub epoch: u64,
    pub change: GroupChange,
    pub targets: BTreeSet<ServerId>,
}

impl GroupConfig {
    pub fn tracking_of(&self, server: &ServerId) -> Option<&TrackingGroupId> {
        self.tracking.get(server)
    }

    pub fn tracking_groups(&self) -> BTreeSet<TrackingGroupId> {
        self.tracking.values().cloned().collect()
    }

    /// `C(server)`.
    pub fn checking_of(&self, server: &ServerId) -> BTreeSet<CheckingGroupId> {
        self.checking
            .iter()
            .filter(|(_, m)| m.contains(server))
            .map(|(cg, _)| cg.clone())
            .collect()
    }

    pub fn members(&self, cg: &CheckingGroupId) -> Option<&BTreeSet<ServerId>> {
        self.checking.get(cg)
    }

    pub fn class_of(&self, key: &Key) -> Option<&KeyClass> {
        self.classes.values().find(|c| c.keys.contains(key))
    }

    /// `H(key)`.
    pub fn hosts(&self, key: &Key) -> Option<&BTreeSet<ServerId>> {
        self.class_of(key).map(|c| &c.hosts)
    }

    pub fn hosts_key(&self, server: &ServerId, key: &Key) -> bool {
        self.hosts(key).is_some_and(|h| h.contains(server))
    }

    /// True iff some key class is hosted on both servers.
    pub fn shares_key(&self, i: &ServerId, j: &ServerId) -> bool {
        self.classes
            .values()
            .any(|c| c.hosts.contains(i) && c.hosts.contains(j))
    }

    /// Servers sharing at least one key class with `server`, itself included
    /// when it hosts anything.
    pub fn key_sharing_peers(&self, server: &ServerId) -> BTreeSet<ServerId> {
        self.classes
            .values()
            .filter(|c| c.hosts.contains(server))
            .flat_map(|c| c.hosts.iter().cloned())
            .collect()
    }

    /// Servers that appear together with `server` in at least one of its
    /// checking groups, excluding `server`.
    pub fn checking_peers(&self, server: &ServerId) -> BTreeSet<ServerId> {
        self.checking
            .values()
            .filter(|m| m.contains(server))
            .flat_map(|m| m.iter().cloned())
            .filter(|s| s != server)
            .collect()
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        for s in &self.servers {
            if !self.tracking.contains_key(s) {
                out.push(Violation::MissingTracking(s.clone()));
            }
        }
        for s in self.tracking.keys() {
            if !self.servers.contains(s) {
                out.push(Violation::UnknownTrackedServer(s.clone()));
            }
        }
        for (cg, members) in &self.checking {
            if members.is_empty() {
                out.push(Violation::EmptyCheckingGroup(cg.clone()));
            }
            for m in members {
                if !self.servers.contains(m) {
                    out.push(Violation::UnknownCheckingMember {
                        cg: cg.clone(),
                        server: m.clone(),
                    });
                }
            }
        }
        for s in &self.servers {
            if self.checking_of(s).is_empty() {
                out.push(Violation::EmptyCheckingSet(s.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for class in self.classes.values() {
            if class.hosts.is_empty() {
                out.push(Violation::EmptyHostSet(class.name.clone()));
            }
            for h in &class.hosts {
                if !self.servers.contains(h) {
                    out.push(Violation::UnknownHost {
                        class: class.name.clone(),
                        server: h.clone(),
                    });
                }
            }
            for k in &class.keys {
                if !seen.insert(k.clone()) {
                    out.push(Violation::KeyInSeveralClasses(k.clone()));
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn add_checking_group(
        &self,
        cg: CheckingGroupId,
        members: BTreeSet<ServerId>,
    ) -> Result<(GroupConfig, ReconfigDirective), GroupingError> {
        if self.checking.contains_key(&cg) {
            return Err(GroupingError::DuplicateCheckingGroup(cg));
        }
        if members.is_empty() {
            return Err(GroupingError::EmptyMembers);
        }
        if let Some(unknown) = members.iter().find(|m| !self.servers.contains(*m)) {
            return Err(GroupingError::UnknownServer(unknown.clone()));
        }
        let mut next = self.clone();
        next.epoch += 1;
        next.checking.insert(cg.clone(), members.clone());
        let directive = ReconfigDirective {
            epoch: next.epoch,
            change: GroupChange::AddChecking {
                cg,
                members: members.clone(),
            },
            targets: members,
        };
        Ok((next, directive))
    }

    pub fn remove_checking_group(
        &self,
        cg: &CheckingGroupId,
    ) -> Result<(GroupConfig, ReconfigDirective), GroupingError> {
        let members = self
            .checking
            .get(cg)
            .ok_or_else(|| GroupingError::UnknownCheckingGroup(cg.clone()))?;
        for m in members {
            if self.checking_of(m).len() <= 1 {
                return Err(GroupingError::WouldEmptyCheckingSet {
                    cg: cg.clone(),
                    server: m.clone(),
                });
            }
        }
        let mut next = self.clone();
        next.epoch += 1;
        next.checking.remove(cg);
        let directive = ReconfigDirective {
            epoch: next.epoch,
            change: GroupChange::RemoveChecking { cg: cg.clone() },
            targets: members.clone(),
        };
        Ok((next, directive))
    }

    /// Applies a change produced elsewhere (e.g. a scripted reconfiguration).
    pub fn apply(&self, change: &GroupChange) -> Result<(GroupConfig, ReconfigDirective), GroupingError> {
        match change {
            GroupChange::AddChecking { cg, members } => {
                self.add_checking_group(cg.clone(), members.clone())
            }
            GroupChange::RemoveChecking { cg } => self.remove_checking_group(cg),
        }
    }
}

/// Servers laid out as replicas of partitions. Presets derive `T` and `C`
/// from the replica labels; placement comes from the key classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub servers: Vec<(ServerId, String)>,
    pub classes: Vec<KeyClass>,
}

impl Topology {
    /// Two partitions `A` and `B`, each with two copies:
    /// `A1`, `B1` form replica 1 and `A2`, `B2` form replica 2.
    pub fn two_partitions_two_replicas() -> Self {
        let s = |name: &str| ServerId::new(name);
        let class = |name: &str, hosts: [&str; 2], key: &str| KeyClass {
            name: name.to_string(),
            hosts: hosts.iter().map(|h| s(h)).collect(),
            keys: [Key::new(key)].into_iter().collect(),
        };
        Topology {
            servers: vec![
                (s("A1"), "1".into()),
                (s("B1"), "1".into()),
                (s("A2"), "2".into()),
                (s("B2"), "2".into()),
            ],
            classes: vec![class("A", ["A1", "A2"], "a"), class("B", ["B1", "B2"], "b")],
        }
    }

    fn skeleton(&self) -> GroupConfig {
        GroupConfig {
            epoch: 0,
            servers: self.servers.iter().map(|(s, _)| s.clone()).collect(),
            tracking: BTreeMap::new(),
            checking: BTreeMap::new(),
            classes: self
                .classes
                .iter()
                .map(|c| (c.name.clone(), c.clone()))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Granularity {
    Server,
    Replica,
    System,
}

/// Grouping styles of well-known causal stores plus the two organisations
/// of the two-partition example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Orbe: per-server tracking, per-replica checking.
    PerServerTracking,
    /// GentleRain: one tracking group for the whole system, per-replica checking.
    PerSystemTracking,
    /// CausalSpartan: per-replica tracking and checking.
    PerReplicaTracking,
    /// Okapi: per-replica tracking, one system-wide checking group.
    PerSystemChecking,
    /// Replicas are full copies: tracking and checking per replica.
    TwoByTwo,
    /// Every server is its own partial replica.
    FourByOne,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::PerServerTracking,
        Preset::PerSystemTracking,
        Preset::PerReplicaTracking,
        Preset::PerSystemChecking,
        Preset::TwoByTwo,
        Preset::FourByOne,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PerServerTracking => "per-server-tracking",
            Preset::PerSystemTracking => "per-system-tracking",
            Preset::PerReplicaTracking => "per-replica-tracking",
            Preset::PerSystemChecking => "per-system-checking",
            Preset::TwoByTwo => "two-by-two",
            Preset::FourByOne => "four-by-one",
        }
    }

    fn granularity(self) -> (Granularity, Granularity) {
        use Granularity::*;
        match self {
            Preset::PerServerTracking => (Server, Replica),
            Preset::PerSystemTracking => (System, Replica),
            Preset::PerReplicaTracking | Preset::TwoByTwo => (Replica, Replica),
            Preset::PerSystemChecking => (Replica, System),
            Preset::FourByOne => (Server, Server),
        }
    }

    pub fn instantiate(self, topology: &Topology) -> GroupConfig {
        let (t, c) = self.granularity();
        let mut cfg = topology.skeleton();
        for (server, replica) in &topology.servers {
            let tg = match t {
                Granularity::Server => format!("t-{server}"),
                Granularity::Replica => format!("r{replica}"),
                Granularity::System => "all".to_string(),
            };
            cfg.tracking.insert(server.clone(), TrackingGroupId::new(tg));
            let cg = match c {
                Granularity::Server => format!("cg-{server}"),
                Granularity::Replica => format!("cg{replica}"),
                Granularity::System => "cg-all".to_string(),
            };
            cfg.checking
                .entry(CheckingGroupId::new(cg))
                .or_default()
                .insert(server.clone());
        }
        cfg
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = GroupingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p = match s {
            "per-server-tracking" | "orbe" => Preset::PerServerTracking,
            "per-system-tracking" | "gentlerain" => Preset::PerSystemTracking,
            "per-replica-tracking" | "causalspartan" => Preset::PerReplicaTracking,
            "per-system-checking" | "okapi" => Preset::PerSystemChecking,
            "two-by-two" | "2x2" => Preset::TwoByTwo,
            "four-by-one" | "4x1" => Preset::FourByOne,
            _ => return Err(GroupingError::UnknownPreset(s.to_string())),
        };
        Ok(p)
    }
}

pub fn preset(name: &str, topology: &Topology) -> Result<GroupConfig, GroupingError> {
    Ok(name.parse::<Preset>()?.instantiate(topology))
}
