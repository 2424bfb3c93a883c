//! Offline consistency checker for execution traces.
//!
//! Ground truth comes from the client side only: every session is a
//! sequence of operations, a read adds the causal past of the write it
//! returned, and a write's causal past is its session's past when it was
//! issued. Pasts are kept as vector clocks over sessions, so "w1 happens
//! before w2" is a single comparison. Server-side records are ignored.
//!
//! Four properties are checked:
//! - causal reads: a read never returns a version that is overwritten by a
//!   write already in the reader's causal past, nor nothing when such a
//!   write exists;
//! - monotonic reads: successive reads of a key in a session never go back
//!   to a smaller write timestamp;
//! - read your writes: after writing a key, a session never reads a smaller
//!   write timestamp for it;
//! - clock soundness: every write's timestamp exceeds the timestamps of all
//!   writes in its causal past.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::model::{ClientId, HlcTimestamp, Key};
use crate::trace::{Trace, TraceError, TraceKind, VersionRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    Causal,
    MonotonicRead,
    ReadYourWrites,
    ClockSoundness,
    /// A read returned a version no session ever wrote.
    Phantom,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Causal => "causal",
            ViolationKind::MonotonicRead => "monotonic-read",
            ViolationKind::ReadYourWrites => "read-your-writes",
            ViolationKind::ClockSoundness => "clock-soundness",
            ViolationKind::Phantom => "phantom",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 1-based line in the rendered trace.
    pub line: usize,
    pub client: ClientId,
    pub key: Key,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}: {} violation by {} on `{}`: {}",
            self.line,
            self.kind.as_str(),
            self.client,
            self.key,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub sessions: usize,
    pub reads: usize,
    pub writes: usize,
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} sessions, {} reads, {} writes, {} violations",
            self.sessions,
            self.reads,
            self.writes,
            self.violations.len()
        )?;
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

type Clock = Vec<u64>;

fn covers(clock: &Clock, session: usize, seq: u64) -> bool {
    clock.get(session).is_some_and(|&c| c >= seq)
}

fn join(into: &mut Clock, other: &Clock) {
    if into.len() < other.len() {
        into.resize(other.len(), 0);
    }
    for (a, b) in into.iter_mut().zip(other) {
        *a = (*a).max(*b);
    }
}

#[derive(Clone, Debug)]
struct Write {
    session: usize,
    seq: u64,
    wt: HlcTimestamp,
    /// Causal past including the write itself.
    past: Clock,
    /// Largest write timestamp in the strict causal past.
    past_max: HlcTimestamp,
}

#[derive(Default)]
struct Session {
    clock: Clock,
    past_max: HlcTimestamp,
    seq: u64,
    /// Clock and past maximum captured at the outstanding put.
    pending_put: Option<(u64, Clock, HlcTimestamp)>,
    last_read: BTreeMap<Key, HlcTimestamp>,
    own_writes: BTreeMap<Key, HlcTimestamp>,
}

#[derive(Default)]
struct Checker {
    sessions: Vec<Session>,
    index: HashMap<ClientId, usize>,
    writes: Vec<Write>,
    by_ref: HashMap<(Key, VersionRef), usize>,
    /// Per key and session: write sequence numbers and write indices.
    per_key: HashMap<Key, BTreeMap<usize, Vec<(u64, usize)>>>,
    /// Versions announced by acknowledgements, resolved before replay.
    acked: HashMap<(usize, u64), (Key, VersionRef)>,
    report: Report,
}

/// Checks a trace for the four properties.
pub fn check(trace: &Trace) -> Report {
    let mut c = Checker::default();
    c.index_acks(trace);
    for (i, r) in trace.iter().enumerate() {
        let line = Trace::line_of(i);
        let (Some(client), Some(key)) = (r.client(), r.key.as_ref()) else {
            continue;
        };
        let s = c.session(client);
        match r.kind {
            TraceKind::PutReq => c.put_req(s),
            TraceKind::GetReq => {
                c.advance(s);
            }
            TraceKind::PutAck => {
                if let Some(v) = &r.version {
                    c.put_ack(s, line, client, key, v)
                } else {
                    // Rejected write: the operation is over, nothing was written.
                    c.sessions[s].pending_put = None;
                }
            }
            TraceKind::GetReply => {
                let outcome = match (&r.version, r.note.as_deref()) {
                    (Some(v), _) => Some(Some(v)),
                    (None, Some("not-found")) => Some(None),
                    _ => None,
                };
                if let Some(v) = outcome {
                    c.read(s, line, client, key, v);
                }
            }
            _ => {}
        }
    }
    c.report.sessions = c.sessions.len();
    c.report
}

/// Parses and checks a rendered trace.
pub fn check_text(text: &str) -> Result<Report, TraceError> {
    Ok(check(&Trace::parse(text)?))
}

impl Checker {
    fn session(&mut self, id: &ClientId) -> usize {
        if let Some(&s) = self.index.get(id) {
            return s;
        }
        let s = self.sessions.len();
        self.sessions.push(Session::default());
        self.index.insert(id.clone(), s);
        s
    }

    /// Pairs every acknowledged version with the put that produced it, so
    /// reads that overtake the acknowledgement can still be attributed.
    fn index_acks(&mut self, trace: &Trace) {
        let mut seqs: HashMap<&ClientId, u64> = HashMap::new();
        let mut open: HashMap<&ClientId, u64> = HashMap::new();
        for r in trace.iter() {
            let (Some(client), Some(key)) = (r.client(), r.key.as_ref()) else {
                continue;
            };
            match r.kind {
                TraceKind::PutReq | TraceKind::GetReq => {
                    let n = seqs.entry(client).or_default();
                    *n += 1;
                    if r.kind == TraceKind::PutReq {
                        open.insert(client, *n);
                    }
                }
                TraceKind::PutAck => {
                    if let (Some(seq), Some(v)) = (open.remove(client), &r.version) {
                        let s = self.session(client);
                        self.acked.insert((s, seq), (key.clone(), v.clone()));
                    }
                }
                _ => {}
            }
        }
    }

    /// Starts the next operation of session `s` and returns its number.
    fn advance(&mut self, s: usize) -> u64 {
        let sess = &mut self.sessions[s];
        sess.seq += 1;
        if sess.clock.len() <= s {
            sess.clock.resize(s + 1, 0);
        }
        sess.clock[s] = sess.seq;
        sess.seq
    }

    fn put_req(&mut self, s: usize) {
        self.advance(s);
        let sess = &mut self.sessions[s];
        sess.pending_put = Some((sess.seq, sess.clock.clone(), sess.past_max));
        self.materialise_pending(s);
    }

    /// Registers the outstanding put of session `s` under its version, if
    /// the acknowledgement index knows it.
    fn materialise_pending(&mut self, s: usize) {
        let Some((seq, clock, past_max)) = self.sessions[s].pending_put.clone() else {
            return;
        };
        let Some((key, vref)) = self.acked.remove(&(s, seq)) else {
            return;
        };
        let idx = self.writes.len();
        self.writes.push(Write {
            session: s,
            seq,
            wt: vref.wt,
            past: clock,
            past_max,
        });
        self.by_ref.insert((key.clone(), vref), idx);
        self.per_key
            .entry(key)
            .or_default()
            .entry(s)
            .or_default()
            .push((seq, idx));
    }

    fn put_ack(&mut self, s: usize, line: usize, client: &ClientId, key: &Key, v: &VersionRef) {
        self.report.writes += 1;
        let sess = &mut self.sessions[s];
        let Some((_, _, past_max)) = sess.pending_put.take() else {
            return;
        };
        if v.wt <= past_max {
            self.report.violations.push(Violation {
                kind: ViolationKind::ClockSoundness,
                line,
                client: client.clone(),
                key: key.clone(),
                detail: format!("write {v} does not exceed {past_max} in its causal past"),
            });
        }
        sess.past_max = sess.past_max.max(v.wt);
        let own = sess.own_writes.entry(key.clone()).or_insert(v.wt);
        *own = (*own).max(v.wt);
    }

    fn read(
        &mut self,
        s: usize,
        line: usize,
        client: &ClientId,
        key: &Key,
        got: Option<&VersionRef>,
    ) {
        self.report.reads += 1;
        let mut found = Vec::new();
        let write = match got {
            Some(v) => match self.by_ref.get(&(key.clone(), v.clone())) {
                Some(&w) => Some(w),
                None => {
                    found.push(Violation {
                        kind: ViolationKind::Phantom,
                        line,
                        client: client.clone(),
                        key: key.clone(),
                        detail: format!("returned {v}, which no session wrote"),
                    });
                    None
                }
            },
            None => None,
        };

        // Causal: some write of `key` in the reader's past overwrites the result.
        if got.is_none() || write.is_some() {
            let cut = &self.sessions[s].clock;
            if let Some(hidden) = self.overwriting(key, cut, write) {
                let w = &self.writes[hidden];
                let what = got.map_or("nothing".to_string(), |v| v.to_string());
                found.push(Violation {
                    kind: ViolationKind::Causal,
                    line,
                    client: client.clone(),
                    key: key.clone(),
                    detail: format!(
                        "returned {what} although the write with timestamp {} is in its causal past",
                        w.wt
                    ),
                });
            }
        }

        let sess = &mut self.sessions[s];
        let wt = got.map(|v| v.wt);
        if let (Some(prev), Some(now)) = (sess.last_read.get(key), wt) {
            if now < *prev {
                found.push(Violation {
                    kind: ViolationKind::MonotonicRead,
                    line,
                    client: client.clone(),
                    key: key.clone(),
                    detail: format!("read {now} after having read {prev}"),
                });
            }
        }
        if let Some(own) = sess.own_writes.get(key) {
            if wt.is_none_or(|t| t < *own) {
                let what = wt.map_or("nothing".to_string(), |t| t.to_string());
                found.push(Violation {
                    kind: ViolationKind::ReadYourWrites,
                    line,
                    client: client.clone(),
                    key: key.clone(),
                    detail: format!("read {what} after writing {own}"),
                });
            }
        }
        if let Some(t) = wt {
            let last = sess.last_read.entry(key.clone()).or_insert(t);
            *last = (*last).max(t);
        }
        if let Some(w) = write {
            let w = &self.writes[w];
            join(&mut sess.clock, &w.past);
            sess.past_max = sess.past_max.max(w.past_max).max(w.wt);
        }
        self.report.violations.extend(found);
    }

    /// A write of `key` inside `cut` that has `read` in its causal past
    /// (or any such write when nothing was read).
    fn overwriting(&self, key: &Key, cut: &Clock, read: Option<usize>) -> Option<usize> {
        let sessions = self.per_key.get(key)?;
        for (&u, writes) in sessions {
            let Some(&limit) = cut.get(u) else {
                continue;
            };
            // Within a session later writes follow earlier ones, so the last
            // write in the cut is the strongest witness.
            let pos = writes.partition_point(|(seq, _)| *seq <= limit);
            if pos == 0 {
                continue;
            }
            let candidate = writes[pos - 1].1;
            match read {
                None => return Some(candidate),
                Some(r) if r != candidate => {
                    let rw = &self.writes[r];
                    if covers(&self.writes[candidate].past, rw.session, rw.seq) {
                        return Some(candidate);
                    }
                }
                Some(_) => {}
            }
        }
        None
    }
}
