//! Execution history records and the line-oriented trace file format.
//!
//! ```text
//! # accf-trace v1
//! <time> <actor> <KIND> <key> <version> <ds> <cg> <peer> <note>
//! ...
//! # end <record-count>
//! ```
//!
//! Fields are separated by one space, absent fields are written as `-`.
//! Versions are `l.c@origin`, dependency sets `{tg=l.c,...}`. For `GOSSIP`
//! records the ds column carries the sender's version vector (entries may be
//! `inf`); for `HEARTBEAT` the version column carries the heartbeat
//! timestamp and its sender.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    ActorId, CheckingGroupId, ClientId, DependencySet, HlcTimestamp, Key, ModelError, ServerId,
    VersionVector,
};

pub const HEADER: &str = "# accf-trace v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    PutReq,
    PutAck,
    GetReq,
    GetPark,
    GetReply,
    Replicate,
    Heartbeat,
    Gossip,
    Reconfig,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::PutReq => "PUT_REQ",
            TraceKind::PutAck => "PUT_ACK",
            TraceKind::GetReq => "GET_REQ",
            TraceKind::GetPark => "GET_PARK",
            TraceKind::GetReply => "GET_REPLY",
            TraceKind::Replicate => "REPLICATE",
            TraceKind::Heartbeat => "HEARTBEAT",
            TraceKind::Gossip => "GOSSIP",
            TraceKind::Reconfig => "RECONFIG",
        }
    }

    /// Client-side records have a client as actor and a server as peer.
    pub fn is_client_side(self) -> bool {
        matches!(
            self,
            TraceKind::PutReq | TraceKind::PutAck | TraceKind::GetReq | TraceKind::GetReply
        )
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "PUT_REQ" => TraceKind::PutReq,
            "PUT_ACK" => TraceKind::PutAck,
            "GET_REQ" => TraceKind::GetReq,
            "GET_PARK" => TraceKind::GetPark,
            "GET_REPLY" => TraceKind::GetReply,
            "REPLICATE" => TraceKind::Replicate,
            "HEARTBEAT" => TraceKind::Heartbeat,
            "GOSSIP" => TraceKind::Gossip,
            "RECONFIG" => TraceKind::Reconfig,
            _ => return Err(()),
        })
    }
}

/// Reference to a version by write timestamp and origin server.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionRef {
    pub wt: HlcTimestamp,
    pub origin: ServerId,
}

impl fmt::Display for VersionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.wt, self.origin)
    }
}

impl FromStr for VersionRef {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (wt, origin) = s.split_once('@').ok_or_else(|| ModelError::Parse {
            what: "version reference",
            input: s.to_string(),
        })?;
        Ok(VersionRef {
            wt: wt.parse()?,
            origin: ServerId::parse(origin)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: u64,
    pub actor: ActorId,
    pub kind: TraceKind,
    pub key: Option<Key>,
    pub version: Option<VersionRef>,
    pub ds: Option<DependencySet>,
    /// Only used by `GOSSIP`, rendered in the ds column.
    pub vv: Option<VersionVector>,
    pub cg: Option<CheckingGroupId>,
    pub peer: Option<ActorId>,
    pub note: Option<String>,
}

impl TraceRecord {
    pub fn new(time: u64, actor: impl Into<ActorId>, kind: TraceKind) -> Self {
        TraceRecord {
            time,
            actor: actor.into(),
            kind,
            key: None,
            version: None,
            ds: None,
            vv: None,
            cg: None,
            peer: None,
            note: None,
        }
    }

    pub fn key(mut self, key: &Key) -> Self {
        self.key = Some(key.clone());
        self
    }

    pub fn version(mut self, v: VersionRef) -> Self {
        self.version = Some(v);
        self
    }

    pub fn ds(mut self, ds: &DependencySet) -> Self {
        self.ds = Some(ds.clone());
        self
    }

    pub fn vv(mut self, vv: &VersionVector) -> Self {
        self.vv = Some(vv.clone());
        self
    }

    pub fn cg(mut self, cg: &CheckingGroupId) -> Self {
        self.cg = Some(cg.clone());
        self
    }

    pub fn peer(mut self, peer: impl Into<ActorId>) -> Self {
        self.peer = Some(peer.into());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn client(&self) -> Option<&ClientId> {
        if self.kind.is_client_side() {
            self.actor.as_client()
        } else {
            self.peer.as_ref().and_then(ActorId::as_client)
        }
    }
}

fn opt<T: fmt::Display>(out: &mut String, v: &Option<T>) {
    match v {
        Some(x) => {
            let _ = write!(out, " {x}");
        }
        None => out.push_str(" -"),
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut line = format!("{} {} {}", self.time, self.actor, self.kind);
        opt(&mut line, &self.key);
        opt(&mut line, &self.version);
        if self.kind == TraceKind::Gossip {
            opt(&mut line, &self.vv);
        } else {
            opt(&mut line, &self.ds);
        }
        opt(&mut line, &self.cg);
        opt(&mut line, &self.peer);
        opt(&mut line, &self.note);
        f.write_str(&line)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("trace is truncated: {0}")]
    Truncated(String),
}

fn field<T>(tok: &str, f: impl FnOnce(&str) -> Result<T, ModelError>) -> Result<Option<T>, String> {
    if tok == "-" {
        Ok(None)
    } else {
        f(tok).map(Some).map_err(|e| e.to_string())
    }
}

fn parse_record(line: &str) -> Result<TraceRecord, String> {
    let toks: Vec<&str> = line.split(' ').collect();
    if toks.len() != 9 {
        return Err(format!("expected 9 fields, found {}", toks.len()));
    }
    let time = toks[0]
        .parse::<u64>()
        .map_err(|_| format!("bad time `{}`", toks[0]))?;
    let kind: TraceKind = toks[2]
        .parse()
        .map_err(|_| format!("unknown record kind `{}`", toks[2]))?;
    let actor_name = ServerId::parse(toks[1]).map_err(|e| e.to_string())?;
    let actor = if kind.is_client_side() {
        ActorId::Client(ClientId::new(actor_name.as_str()))
    } else {
        ActorId::Server(actor_name)
    };
    let key = field(toks[3], Key::parse)?;
    let version = field(toks[4], VersionRef::from_str)?;
    let (ds, vv) = if kind == TraceKind::Gossip {
        (None, field(toks[5], VersionVector::from_str)?)
    } else {
        (field(toks[5], DependencySet::from_str)?, None)
    };
    let cg = field(toks[6], CheckingGroupId::parse)?;
    // GET_PARK is the only server-side record whose peer is a client.
    let peer = field(toks[7], |p| {
        if kind == TraceKind::GetPark {
            ClientId::parse(p).map(ActorId::Client)
        } else {
            ServerId::parse(p).map(ActorId::Server)
        }
    })?;
    let note = field(toks[8], |n| Ok(n.to_string()))?;
    Ok(TraceRecord {
        time,
        actor,
        kind,
        key,
        version,
        ds,
        vv,
        cg,
        peer,
        note,
    })
}

/// Append-only, totally ordered execution history.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|p| p.time <= r.time));
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TraceRecord> {
        self.records.iter()
    }

    /// 1-based file line of the record at `index`.
    pub fn line_of(index: usize) -> usize {
        index + 2
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 64 + 64);
        out.push_str(HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{r}");
        }
        let _ = writeln!(out, "# end {}", self.records.len());
        out
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, HEADER)) => {}
            Some((_, other)) => {
                return Err(TraceError::Malformed {
                    line: 1,
                    reason: format!("missing header, found `{other}`"),
                })
            }
            None => return Err(TraceError::Truncated("empty file".into())),
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if let Some(rest) = line.strip_prefix("# end ") {
                let n: usize = rest.trim().parse().map_err(|_| TraceError::Malformed {
                    line: lineno,
                    reason: format!("bad trailer `{line}`"),
                })?;
                if n != records.len() {
                    return Err(TraceError::Truncated(format!(
                        "trailer announces {n} records, found {}",
                        records.len()
                    )));
                }
                return Ok(Trace { records });
            }
            if line.starts_with('#') {
                continue;
            }
            let rec = parse_record(line).map_err(|reason| TraceError::Malformed {
                line: lineno,
                reason,
            })?;
            if records
                .last()
                .is_some_and(|p: &TraceRecord| p.time > rec.time)
            {
                return Err(TraceError::Malformed {
                    line: lineno,
                    reason: "time goes backwards".into(),
                });
            }
            records.push(rec);
        }
        Err(TraceError::Truncated(format!(
            "no trailer after {} records",
            records.len()
        )))
    }
}
