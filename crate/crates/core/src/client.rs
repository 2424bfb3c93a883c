//! Client session: keeps the dependency set, routes requests through a load
//! balancer and folds replies back into the dependency set.
//!
//! The session is sans-IO. `begin_*` produces the request envelope, the
//! caller delivers it, and `complete` consumes the reply. One request may be
//! outstanding at a time.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::grouping::GroupConfig;
use crate::model::{
    ActorId, CheckingGroupId, ClientId, DependencySet, Envelope, HlcTimestamp, Key, Message,
    RejectReason, ServerId, TrackingGroupId, Value,
};
use crate::trace::{TraceKind, TraceRecord, VersionRef};

/// Maps a key to the server a client should contact for it.
pub trait LoadBalancer: Send + Sync {
    fn route(&self, key: &Key) -> Option<ServerId>;
}

impl<F> LoadBalancer for F
where
    F: Fn(&Key) -> Option<ServerId> + Send + Sync,
{
    fn route(&self, key: &Key) -> Option<ServerId> {
        self(key)
    }
}

/// Pins every key class to one server.
#[derive(Clone, Debug)]
pub struct PinnedBalancer {
    config: Arc<GroupConfig>,
    pins: BTreeMap<String, ServerId>,
}

impl PinnedBalancer {
    pub fn new(config: Arc<GroupConfig>) -> Self {
        Self {
            config,
            pins: BTreeMap::new(),
        }
    }

    pub fn pin(mut self, class: impl Into<String>, server: ServerId) -> Self {
        self.pins.insert(class.into(), server);
        self
    }
}

impl LoadBalancer for PinnedBalancer {
    fn route(&self, key: &Key) -> Option<ServerId> {
        let class = self.config.class_of(key)?;
        self.pins.get(&class.name).cloned()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("no server is routed for key `{0}`")]
    NoRoute(Key),
    #[error("client `{0}` already has a request in flight")]
    Busy(ClientId),
    #[error("unexpected message for client `{0}`")]
    Unexpected(ClientId),
}

/// Result of a completed client operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpOutcome {
    Read {
        key: Key,
        value: Value,
        version: VersionRef,
        ds: DependencySet,
    },
    NotFound {
        key: Key,
    },
    Written {
        key: Key,
        tg: TrackingGroupId,
        ut: HlcTimestamp,
    },
    Rejected {
        key: Key,
        reason: RejectReason,
    },
}

#[derive(Clone, Debug)]
enum Outstanding {
    Get {
        key: Key,
        cg: CheckingGroupId,
        server: ServerId,
    },
    Put {
        key: Key,
        server: ServerId,
    },
}

pub struct ClientSession {
    id: ClientId,
    ds: DependencySet,
    lb: Arc<dyn LoadBalancer>,
    default_cg: CheckingGroupId,
    outstanding: Option<Outstanding>,
}

impl std::fmt::Debug for ClientSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientSession")
            .field("id", &self.id)
            .field("ds", &self.ds)
            .field("default_cg", &self.default_cg)
            .finish_non_exhaustive()
    }
}

impl ClientSession {
    pub fn new(id: ClientId, lb: Arc<dyn LoadBalancer>, default_cg: CheckingGroupId) -> Self {
        Self {
            id,
            ds: DependencySet::new(),
            lb,
            default_cg,
            outstanding: None,
        }
    }

    pub fn id(&self) -> &ClientId {
        &self.id
    }

    pub fn ds(&self) -> &DependencySet {
        &self.ds
    }

    pub fn default_cg(&self) -> &CheckingGroupId {
        &self.default_cg
    }

    pub fn set_default_cg(&mut self, cg: CheckingGroupId) {
        self.default_cg = cg;
    }

    pub fn route(&self, key: &Key) -> Option<ServerId> {
        self.lb.route(key)
    }

    pub fn is_idle(&self) -> bool {
        self.outstanding.is_none()
    }

    fn envelope(&self, to: &ServerId, msg: Message) -> Envelope {
        Envelope {
            from: ActorId::Client(self.id.clone()),
            to: ActorId::Server(to.clone()),
            msg,
        }
    }

    pub fn begin_get(
        &mut self,
        now: u64,
        key: Key,
        cg: Option<CheckingGroupId>,
        trace: &mut Vec<TraceRecord>,
    ) -> Result<Envelope, ClientError> {
        if self.outstanding.is_some() {
            return Err(ClientError::Busy(self.id.clone()));
        }
        let server = self.lb.route(&key).ok_or_else(|| ClientError::NoRoute(key.clone()))?;
        let cg = cg.unwrap_or_else(|| self.default_cg.clone());
        trace.push(
            TraceRecord::new(now, self.id.clone(), TraceKind::GetReq)
                .key(&key)
                .ds(&self.ds)
                .cg(&cg)
                .peer(server.clone()),
        );
        let env = self.envelope(
            &server,
            Message::GetReq {
                key: key.clone(),
                cg: cg.clone(),
                ds: self.ds.clone(),
            },
        );
        self.outstanding = Some(Outstanding::Get { key, cg, server });
        Ok(env)
    }

    pub fn begin_put(
        &mut self,
        now: u64,
        key: Key,
        value: Value,
        trace: &mut Vec<TraceRecord>,
    ) -> Result<Envelope, ClientError> {
        if self.outstanding.is_some() {
            return Err(ClientError::Busy(self.id.clone()));
        }
        let server = self.lb.route(&key).ok_or_else(|| ClientError::NoRoute(key.clone()))?;
        trace.push(
            TraceRecord::new(now, self.id.clone(), TraceKind::PutReq)
                .key(&key)
                .ds(&self.ds)
                .peer(server.clone()),
        );
        let env = self.envelope(
            &server,
            Message::PutReq {
                key: key.clone(),
                value,
                ds: self.ds.clone(),
            },
        );
        self.outstanding = Some(Outstanding::Put { key, server });
        Ok(env)
    }

    /// Consumes the reply to the outstanding request.
    pub fn complete(
        &mut self,
        now: u64,
        msg: Message,
        trace: &mut Vec<TraceRecord>,
    ) -> Result<OpOutcome, ClientError> {
        let Some(out) = self.outstanding.take() else {
            return Err(ClientError::Unexpected(self.id.clone()));
        };
        match (out, msg) {
            (Outstanding::Get { key, cg, server }, Message::GetReply { key: rk, version })
                if rk == key =>
            {
                let rec = TraceRecord::new(now, self.id.clone(), TraceKind::GetReply)
                    .key(&key)
                    .cg(&cg)
                    .peer(server);
                match version {
                    Some(d) => {
                        let Ok(wt) = d.write_ts() else {
                            trace.push(rec.note("malformed"));
                            return Err(ClientError::Unexpected(self.id.clone()));
                        };
                        self.ds.merge_in(&d.ds);
                        let vref = VersionRef {
                            wt,
                            origin: d.origin.clone(),
                        };
                        trace.push(rec.version(vref.clone()).ds(&d.ds));
                        Ok(OpOutcome::Read {
                            key,
                            value: d.value,
                            version: vref,
                            ds: d.ds,
                        })
                    }
                    None => {
                        trace.push(rec.note("not-found"));
                        Ok(OpOutcome::NotFound { key })
                    }
                }
            }
            (Outstanding::Put { key, server }, Message::PutReply { key: rk, tg, ut }) if rk == key => {
                self.ds.raise(tg.clone(), ut);
                trace.push(
                    TraceRecord::new(now, self.id.clone(), TraceKind::PutAck)
                        .key(&key)
                        .version(VersionRef {
                            wt: ut,
                            origin: server.clone(),
                        })
                        .ds(&self.ds)
                        .peer(server),
                );
                Ok(OpOutcome::Written { key, tg, ut })
            }
            (Outstanding::Get { key, cg, server }, Message::Reject { key: rk, reason }) if rk == key => {
                trace.push(
                    TraceRecord::new(now, self.id.clone(), TraceKind::GetReply)
                        .key(&key)
                        .cg(&cg)
                        .peer(server)
                        .note(reason.as_str()),
                );
                Ok(OpOutcome::Rejected { key, reason })
            }
            (Outstanding::Put { key, server }, Message::Reject { key: rk, reason }) if rk == key => {
                trace.push(
                    TraceRecord::new(now, self.id.clone(), TraceKind::PutAck)
                        .key(&key)
                        .peer(server)
                        .note(reason.as_str()),
                );
                Ok(OpOutcome::Rejected { key, reason })
            }
            (out, _) => {
                self.outstanding = Some(out);
                Err(ClientError::Unexpected(self.id.clone()))
            }
        }
    }
}
