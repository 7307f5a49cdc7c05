//! Immutable, indexed event database built from a parsed trace.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::model::{EventId, EventKind, EventPattern, ExecutionEvent, Subject, TraceEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("duplicate event id {0}")]
    DuplicateId(EventId),
    #[error("event id {0} is lower than the id before it")]
    NonMonotonicId(EventId),
    #[error("method exit refers to call {0}, which is not an earlier method call")]
    DanglingExit(EventId),
    #[error("method exit for call {0} does not agree with the call's thread, subject or name")]
    ExitMismatch(EventId),
    #[error("call {0} has more than one method exit")]
    DuplicateExit(EventId),
    #[error("no event with id {0}")]
    NotFound(EventId),
    #[error("empty history interval [{0}, {1}]")]
    InvalidInterval(EventId, EventId),
}

/// Inclusive id window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HistoryInterval {
    lo: EventId,
    hi: EventId,
}

impl HistoryInterval {
    pub fn new(lo: impl Into<EventId>, hi: impl Into<EventId>) -> Result<Self, StoreError> {
        let (lo, hi) = (lo.into(), hi.into());
        if lo > hi {
            return Err(StoreError::InvalidInterval(lo, hi));
        }
        Ok(HistoryInterval { lo, hi })
    }

    pub fn lo(&self) -> EventId {
        self.lo
    }

    pub fn hi(&self) -> EventId {
        self.hi
    }

    pub fn contains(&self, id: EventId) -> bool {
        self.lo <= id && id <= self.hi
    }

    pub fn intersect(&self, other: &HistoryInterval) -> Option<HistoryInterval> {
        HistoryInterval::new(self.lo.max(other.lo), self.hi.min(other.hi)).ok()
    }
}

impl fmt::Display for HistoryInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TraceStore {
    events: Vec<TraceEvent>,
    interval: Option<HistoryInterval>,
    by_thread: HashMap<String, Vec<usize>>,
    by_kind: [Vec<usize>; 9],
    by_subject: HashMap<Subject, Vec<usize>>,
    by_name: HashMap<String, Vec<usize>>,
    calls_by_thread: HashMap<String, Vec<usize>>,
    exit_by_call: HashMap<EventId, usize>,
    uncaught_by_thread: HashMap<String, Vec<EventId>>,
}

impl TraceStore {
    /// Validates and indexes a full trace.
    ///
    /// A call without an exit is legal (threads killed by an uncaught
    /// exception leave pending calls behind); an exit that points nowhere or
    /// at a different method is not.
    pub fn load(events: Vec<TraceEvent>) -> Result<Self, StoreError> {
        let mut pos: HashMap<EventId, usize> = HashMap::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            if pos.insert(e.id, i).is_some() {
                return Err(StoreError::DuplicateId(e.id));
            }
            if i > 0 && e.id < events[i - 1].id {
                return Err(StoreError::NonMonotonicId(e.id));
            }
        }
        let mut exited = HashMap::new();
        for e in &events {
            let ExecutionEvent::MethodExit {
                call_id,
                subject,
                name,
                ..
            } = &e.event
            else {
                continue;
            };
            let call = pos
                .get(call_id)
                .map(|&i| &events[i])
                .filter(|c| c.id < e.id);
            let Some(call) = call else {
                return Err(StoreError::DanglingExit(*call_id));
            };
            let ExecutionEvent::MethodCall {
                subject: call_subject,
                name: call_name,
                ..
            } = &call.event
            else {
                return Err(StoreError::DanglingExit(*call_id));
            };
            if call_subject != subject || call_name != name || call.thread != e.thread {
                return Err(StoreError::ExitMismatch(*call_id));
            }
            if exited.insert(*call_id, ()).is_some() {
                return Err(StoreError::DuplicateExit(*call_id));
            }
        }
        Ok(Self::build(events, None))
    }

    fn build(events: Vec<TraceEvent>, interval: Option<HistoryInterval>) -> Self {
        let mut s = TraceStore {
            interval,
            ..Default::default()
        };
        for (i, e) in events.iter().enumerate() {
            s.by_thread.entry(e.thread.clone()).or_default().push(i);
            s.by_kind[e.kind().index()].push(i);
            if let Some(subj) = e.event.subject() {
                s.by_subject.entry(subj).or_default().push(i);
            }
            if let Some(name) = e.event.name() {
                s.by_name.entry(name.to_string()).or_default().push(i);
            }
            match &e.event {
                ExecutionEvent::MethodCall { .. } => {
                    s.calls_by_thread.entry(e.thread.clone()).or_default().push(i)
                }
                ExecutionEvent::MethodExit { call_id, .. } => {
                    s.exit_by_call.entry(*call_id).or_insert(i);
                }
                ev if ev.is_uncaught_exception() => s
                    .uncaught_by_thread
                    .entry(e.thread.clone())
                    .or_default()
                    .push(e.id),
                _ => {}
            }
        }
        s.events = events;
        s
    }

    /// Sub-store holding only the events inside `iv`. Ids are preserved and
    /// exit/call pairing is not re-validated, since a window may cut a pair.
    pub fn restrict(&self, iv: HistoryInterval) -> TraceStore {
        let lo = self.events.partition_point(|e| e.id < iv.lo);
        let hi = self.events.partition_point(|e| e.id <= iv.hi);
        let interval = match self.interval {
            Some(cur) => cur.intersect(&iv).unwrap_or(iv),
            None => iv,
        };
        TraceStore::build(self.events[lo..hi].to_vec(), Some(interval))
    }

    pub fn interval(&self) -> Option<HistoryInterval> {
        self.interval
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn max_id(&self) -> Option<EventId> {
        self.events.last().map(|e| e.id)
    }

    pub(crate) fn position(&self, id: EventId) -> Option<usize> {
        self.events.binary_search_by_key(&id, |e| e.id).ok()
    }

    pub fn get(&self, id: EventId) -> Result<&TraceEvent, StoreError> {
        self.position(id)
            .map(|i| &self.events[i])
            .ok_or(StoreError::NotFound(id))
    }

    pub fn contains(&self, id: EventId) -> bool {
        self.position(id).is_some()
    }

    /// The exit event recorded for a call, if it is in this store.
    pub fn exit_of(&self, call_id: EventId) -> Option<&TraceEvent> {
        self.exit_by_call.get(&call_id).map(|&i| &self.events[i])
    }

    pub fn threads(&self) -> impl Iterator<Item = &str> {
        self.by_thread.keys().map(String::as_str)
    }

    pub fn thread_events<'a>(&'a self, thread: &str) -> impl DoubleEndedIterator<Item = &'a TraceEvent> + 'a {
        self.by_thread
            .get(thread)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(|&i| &self.events[i])
    }

    /// Events of one thread with `lo <= id <= hi`, ascending.
    pub fn thread_range<'a>(
        &'a self,
        thread: &str,
        lo: EventId,
        hi: EventId,
    ) -> impl DoubleEndedIterator<Item = &'a TraceEvent> + 'a {
        let idx = self.by_thread.get(thread).map(Vec::as_slice).unwrap_or(&[]);
        let a = idx.partition_point(|&i| self.events[i].id < lo);
        let b = idx.partition_point(|&i| self.events[i].id <= hi);
        idx[a..b.max(a)].iter().map(|&i| &self.events[i])
    }

    /// Method-call events of one thread, ascending by id.
    pub fn thread_calls<'a>(&'a self, thread: &str) -> impl DoubleEndedIterator<Item = &'a TraceEvent> + Clone + 'a {
        self.calls_by_thread
            .get(thread)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(|&i| &self.events[i])
    }

    /// Ids of the uncaught-exception events of a thread, ascending.
    pub fn uncaught_in_thread(&self, thread: &str) -> &[EventId] {
        self.uncaught_by_thread
            .get(thread)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn of_kind(&self, kind: EventKind) -> impl DoubleEndedIterator<Item = &TraceEvent> {
        self.by_kind[kind.index()].iter().map(|&i| &self.events[i])
    }

    /// All events matching `p`, ascending by id. The most selective index
    /// among the pattern's indexed constraints supplies the candidates.
    pub fn scan(&self, p: &EventPattern) -> Vec<&TraceEvent> {
        let lo = p
            .min_id
            .map_or(0, |lo| self.events.partition_point(|e| e.id < lo));
        let hi = p
            .max_id
            .map_or(self.events.len(), |hi| self.events.partition_point(|e| e.id <= hi));
        if lo >= hi {
            return Vec::new();
        }

        const EMPTY: &[usize] = &[];
        let exit_slot = p.call_id.map(|c| self.exit_by_call.get(&c).copied());
        let mut candidates: Vec<&[usize]> = Vec::new();
        if let Some(k) = p.kind {
            candidates.push(&self.by_kind[k.index()]);
        }
        if let Some(t) = &p.thread {
            candidates.push(self.by_thread.get(t).map_or(EMPTY, Vec::as_slice));
        }
        if let Some(s) = &p.subject {
            candidates.push(self.by_subject.get(s).map_or(EMPTY, Vec::as_slice));
        }
        if let Some(n) = &p.name {
            candidates.push(self.by_name.get(n).map_or(EMPTY, Vec::as_slice));
        }
        if let Some(slot) = &exit_slot {
            candidates.push(slot.as_slice());
        }
        let best = candidates.into_iter().min_by_key(|c| c.len());

        match best {
            Some(idx) => {
                let start = idx.partition_point(|&i| i < lo);
                idx[start..]
                    .iter()
                    .take_while(|&&i| i < hi)
                    .map(|&i| &self.events[i])
                    .filter(|e| p.matches(e))
                    .collect()
            }
            None => self.events[lo..hi].iter().filter(|e| p.matches(e)).collect(),
        }
    }
}
