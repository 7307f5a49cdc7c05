//! Predefined debugging queries over a [`TraceStore`].
//!
//! Enclosure follows the logic-rule definition rather than a stack replay:
//! a call `C` encloses event `e` (same thread, `C < e`) when either
//!
//! * `C` has an exit `X` and `e < X`, or
//! * `C` has no exit and the thread records an uncaught exception `E` with
//!   `e <= E`.
//!
//! So a call's own exit event is *not* inside its span, while the uncaught
//! exception that kills a thread *is* inside every pending span. Every list
//! result is ordered by ascending event id unless documented otherwise.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    EventId, EventKind, EventPattern, ExecutionEvent, FieldDecl, FieldKind, LocalVar, Location,
    ObjectRef, Subject, TraceEvent, Value,
};
use crate::store::TraceStore;

pub const CONSTRUCTOR: &str = "<init>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("no event with id {0}")]
    NotFound(EventId),
    #[error("no event matches the pattern")]
    NoMatch,
    #[error("event {0} has no enclosing method")]
    NoEnclosingEnvironment(EventId),
    #[error("no instantiation of {0} in range")]
    NoInstantiation(ObjectRef),
    #[error("no member fields recorded for class {0}")]
    NoMemberFields(String),
    #[error("event {0} is not a method call")]
    NotAMethodCall(EventId),
    #[error("field {field} of {object} has no write in range")]
    UnassignedField { object: ObjectRef, field: String },
}

pub type Result<T> = std::result::Result<T, QueryError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminator {
    ExitedAt(EventId),
    KilledByUncaught(EventId),
}

impl Terminator {
    pub fn id(self) -> EventId {
        match self {
            Terminator::ExitedAt(id) | Terminator::KilledByUncaught(id) => id,
        }
    }
}

/// A method activation enclosing some event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CallSpan {
    pub call_id: EventId,
    pub terminator: Terminator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldSample {
    pub event_id: EventId,
    pub field_name: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reading {
    Assigned { event_id: EventId, value: Value },
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldState {
    pub kind: FieldKind,
    pub name: String,
    pub reading: Reading,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectState {
    pub object: ObjectRef,
    pub at: EventId,
    pub instantiated_at: EventId,
    /// One entry per declared member field, in declaration order.
    pub fields: Vec<FieldState>,
}

/// How [`object_state_with`] treats a declared field with no write in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateMode {
    /// Report the field as [`Reading::Unassigned`].
    #[default]
    Lenient,
    /// Fail the whole query, as the original logic rule does.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceReport {
    pub state: ObjectState,
    pub missing_member_fields: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallTree {
    pub root: TraceEvent,
    /// `None` when neither an exit nor an uncaught exception bounds the call.
    pub terminator: Option<Terminator>,
    pub children: Vec<CallTree>,
}

impl CallTree {
    pub fn call_id(&self) -> EventId {
        self.root.id
    }

    /// Number of activations in the tree, root included.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(CallTree::size).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThreadStatus {
    Running,
    Exited,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExistenceQuery {
    LineExecuted(Location),
    MethodCalled {
        name: String,
        subject: Option<Subject>,
    },
    FieldAssigned {
        field: String,
        value: Option<Value>,
        subject: Option<Subject>,
    },
    InstanceExists(String),
    ExceptionCaught(String),
    ThreadRunning(String),
    ThreadExited(String),
}

fn lookup(s: &TraceStore, id: EventId) -> Result<&TraceEvent> {
    s.get(id).map_err(|_| QueryError::NotFound(id))
}

/// The span of `call` that contains `id`, if any.
fn span_containing(s: &TraceStore, call: &TraceEvent, id: EventId) -> Option<Terminator> {
    if call.id >= id {
        return None;
    }
    match s.exit_of(call.id) {
        Some(exit) => (id < exit.id).then_some(Terminator::ExitedAt(exit.id)),
        None => first_uncaught_from(s, &call.thread, id).map(Terminator::KilledByUncaught),
    }
}

fn first_uncaught_from(s: &TraceStore, thread: &str, id: EventId) -> Option<EventId> {
    let ex = s.uncaught_in_thread(thread);
    ex.get(ex.partition_point(|&e| e < id)).copied()
}

/// How a call ends: its exit, else the first uncaught exception after it.
pub fn termination(s: &TraceStore, call: &TraceEvent) -> Option<Terminator> {
    match s.exit_of(call.id) {
        Some(exit) => Some(Terminator::ExitedAt(exit.id)),
        None => {
            first_uncaught_from(s, &call.thread, EventId(call.id.0 + 1)).map(Terminator::KilledByUncaught)
        }
    }
}

pub fn any_enclosing_method(s: &TraceStore, id: EventId) -> Result<Vec<CallSpan>> {
    let e = lookup(s, id)?;
    Ok(s.thread_calls(&e.thread)
        .take_while(|c| c.id < id)
        .filter_map(|c| {
            span_containing(s, c, id).map(|terminator| CallSpan {
                call_id: c.id,
                terminator,
            })
        })
        .collect())
}

/// Enclosing call ids, outermost first.
pub fn call_chain(s: &TraceStore, id: EventId) -> Result<Vec<EventId>> {
    Ok(any_enclosing_method(s, id)?
        .into_iter()
        .map(|sp| sp.call_id)
        .collect())
}

/// Enclosing call events, innermost first.
pub fn full_detail_call_chain(s: &TraceStore, id: EventId) -> Result<Vec<TraceEvent>> {
    call_chain(s, id)?
        .into_iter()
        .rev()
        .map(|c| Ok(lookup(s, c)?.clone()))
        .collect()
}

fn innermost_span(s: &TraceStore, id: EventId) -> Result<Option<CallSpan>> {
    Ok(any_enclosing_method(s, id)?.pop())
}

/// Enclosing environment (innermost enclosing call) of the first event of
/// `thread` matching `p`.
pub fn where_(s: &TraceStore, thread: &str, p: &EventPattern) -> Result<TraceEvent> {
    let mut p = p.clone();
    p.thread = Some(thread.to_string());
    let first = s.scan(&p).into_iter().next().ok_or(QueryError::NoMatch)?;
    let span = innermost_span(s, first.id)?.ok_or(QueryError::NoEnclosingEnvironment(first.id))?;
    Ok(lookup(s, span.call_id)?.clone())
}

pub fn where_exception_is_thrown(s: &TraceStore, thread: &str) -> Result<TraceEvent> {
    let p = EventPattern::any()
        .kind(EventKind::Exception)
        .catch(crate::model::CatchFilter::Uncaught);
    where_(s, thread, &p)
}

fn field_history(
    s: &TraceStore,
    start: EventId,
    end: EventId,
    subject: Subject,
    field: &str,
) -> Vec<FieldSample> {
    if start > end {
        return Vec::new();
    }
    let p = EventPattern::any()
        .kind(EventKind::SetField)
        .subject(subject)
        .name(field)
        .id_range(start, end);
    s.scan(&p)
        .into_iter()
        .filter_map(|e| match &e.event {
            ExecutionEvent::SetField {
                field_name, value, ..
            } => Some(FieldSample {
                event_id: e.id,
                field_name: field_name.clone(),
                value: value.clone(),
            }),
            _ => None,
        })
        .collect()
}

pub fn instance_field_history(
    s: &TraceStore,
    start: EventId,
    end: EventId,
    obj: &ObjectRef,
    field: &str,
) -> Vec<FieldSample> {
    field_history(s, start, end, Subject::Object(obj.clone()), field)
}

pub fn class_field_history(
    s: &TraceStore,
    start: EventId,
    end: EventId,
    class_name: &str,
    field: &str,
) -> Vec<FieldSample> {
    field_history(s, start, end, Subject::Class(class_name.to_string()), field)
}

fn instantiation(s: &TraceStore, obj: &ObjectRef, end: EventId) -> Option<EventId> {
    let p = EventPattern {
        max_id: Some(end),
        ..EventPattern::any()
            .kind(EventKind::MethodCall)
            .subject(Subject::Object(obj.clone()))
            .name(CONSTRUCTOR)
    };
    s.scan(&p).first().map(|e| e.id)
}

fn member_fields<'a>(s: &'a TraceStore, class_name: &str) -> Option<&'a [FieldDecl]> {
    let p = EventPattern::any()
        .kind(EventKind::MemberFields)
        .subject(Subject::class(class_name));
    s.scan(&p).first().and_then(|e| match &e.event {
        ExecutionEvent::MemberFields { fields, .. } => Some(fields.as_slice()),
        _ => None,
    })
}

pub fn object_state(s: &TraceStore, end: EventId, obj: &ObjectRef) -> Result<ObjectState> {
    object_state_with(s, end, obj, StateMode::Lenient)
}

/// Last write of every declared field between the object's instantiation
/// and `end`, both inclusive.
pub fn object_state_with(
    s: &TraceStore,
    end: EventId,
    obj: &ObjectRef,
    mode: StateMode,
) -> Result<ObjectState> {
    let start = instantiation(s, obj, end).ok_or_else(|| QueryError::NoInstantiation(obj.clone()))?;
    let decls = member_fields(s, &obj.class_name)
        .ok_or_else(|| QueryError::NoMemberFields(obj.class_name.clone()))?;
    let mut fields = Vec::with_capacity(decls.len());
    for d in decls {
        let history = match d.kind {
            FieldKind::Instance => instance_field_history(s, start, end, obj, &d.name),
            FieldKind::Class => class_field_history(s, start, end, &obj.class_name, &d.name),
        };
        let reading = match history.into_iter().last() {
            Some(last) => Reading::Assigned {
                event_id: last.event_id,
                value: last.value,
            },
            None if mode == StateMode::Strict => {
                return Err(QueryError::UnassignedField {
                    object: obj.clone(),
                    field: d.name.clone(),
                })
            }
            None => Reading::Unassigned,
        };
        fields.push(FieldState {
            kind: d.kind,
            name: d.name.clone(),
            reading,
        });
    }
    Ok(ObjectState {
        object: obj.clone(),
        at: end,
        instantiated_at: start,
        fields,
    })
}

/// Completed (call, exit) pairs inside the innermost activation enclosing
/// `id`, at any depth, selected by `keep(call_id, exit_id)`.
fn called_methods(
    s: &TraceStore,
    id: EventId,
    keep: impl Fn(EventId, EventId) -> bool,
) -> Result<Vec<(TraceEvent, TraceEvent)>> {
    let span = innermost_span(s, id)?.ok_or(QueryError::NoEnclosingEnvironment(id))?;
    let enclosing = lookup(s, span.call_id)?;
    let mut out = Vec::new();
    for call in s.thread_calls(&enclosing.thread) {
        if call.id <= enclosing.id {
            continue;
        }
        let Some(exit) = s.exit_of(call.id) else {
            continue;
        };
        if !keep(call.id, exit.id) {
            continue;
        }
        if span_containing(s, enclosing, call.id).is_some()
            && span_containing(s, enclosing, exit.id).is_some()
        {
            out.push((call.clone(), exit.clone()));
        }
    }
    Ok(out)
}

pub fn pre_event_called_methods(s: &TraceStore, id: EventId) -> Result<Vec<(TraceEvent, TraceEvent)>> {
    called_methods(s, id, |call, exit| call < id && exit < id)
}

pub fn post_event_called_methods(s: &TraceStore, id: EventId) -> Result<Vec<(TraceEvent, TraceEvent)>> {
    called_methods(s, id, |call, exit| call > id && exit > id)
}

/// Locals of the nearest step at or before `id` that sits directly in the
/// same activation as `id`.
pub fn local_variables_at(s: &TraceStore, id: EventId) -> Result<Vec<LocalVar>> {
    let e = lookup(s, id)?;
    let home = innermost_span(s, id)?.map(|sp| sp.call_id);
    let floor = home.unwrap_or(EventId(0));
    for candidate in s.thread_range(&e.thread, floor, id).rev() {
        let ExecutionEvent::Step { locals, .. } = &candidate.event else {
            continue;
        };
        if innermost_span(s, candidate.id)?.map(|sp| sp.call_id) == home {
            return Ok(locals.clone());
        }
    }
    Ok(Vec::new())
}

pub fn local_variable_history(
    s: &TraceStore,
    start: EventId,
    end: EventId,
    thread: &str,
    name: &str,
) -> Vec<FieldSample> {
    if start > end {
        return Vec::new();
    }
    s.thread_range(thread, start, end)
        .filter_map(|e| match &e.event {
            ExecutionEvent::Step { locals, .. } => {
                locals.iter().find(|lv| lv.name == name).map(|lv| FieldSample {
                    event_id: e.id,
                    field_name: lv.name.clone(),
                    value: lv.value.clone(),
                })
            }
            _ => None,
        })
        .collect()
}

fn method_pattern(kind: EventKind, method: &str, subject: Option<&Subject>) -> EventPattern {
    EventPattern {
        subject: subject.cloned(),
        ..EventPattern::any().kind(kind).name(method)
    }
}

pub fn argument_history(
    s: &TraceStore,
    method: &str,
    subject: Option<&Subject>,
) -> Vec<(EventId, Vec<Value>)> {
    s.scan(&method_pattern(EventKind::MethodCall, method, subject))
        .into_iter()
        .map(|e| (e.id, e.event.args().unwrap_or_default().to_vec()))
        .collect()
}

pub fn return_value_history(
    s: &TraceStore,
    method: &str,
    subject: Option<&Subject>,
) -> Vec<(EventId, Value)> {
    s.scan(&method_pattern(EventKind::MethodExit, method, subject))
        .into_iter()
        .filter_map(|e| e.event.value().map(|v| (e.id, v.clone())))
        .collect()
}

pub fn data_structure_history(
    s: &TraceStore,
    start: EventId,
    end: EventId,
    at: Option<&Location>,
) -> Vec<(EventId, Vec<Value>)> {
    if start > end {
        return Vec::new();
    }
    let p = EventPattern {
        location: at.cloned(),
        ..EventPattern::any()
            .kind(EventKind::DataStructure)
            .id_range(start, end)
    };
    s.scan(&p)
        .into_iter()
        .filter_map(|e| match &e.event {
            ExecutionEvent::DataStructure { contents, .. } => Some((e.id, contents.clone())),
            _ => None,
        })
        .collect()
}

/// Every object of `class_name` instantiated at or before `at`, with its
/// state at `at`.
pub fn all_instances(s: &TraceStore, class_name: &str, at: EventId) -> Result<Vec<InstanceReport>> {
    let p = EventPattern {
        max_id: Some(at),
        ..EventPattern::any()
            .kind(EventKind::MethodCall)
            .class_name(class_name)
            .name(CONSTRUCTOR)
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in s.scan(&p) {
        let Some(Subject::Object(obj)) = e.event.subject() else {
            continue;
        };
        if !seen.insert(obj.clone()) {
            continue;
        }
        let report = match object_state(s, at, &obj) {
            Ok(state) => InstanceReport {
                state,
                missing_member_fields: false,
            },
            Err(QueryError::NoMemberFields(_)) => InstanceReport {
                state: ObjectState {
                    object: obj,
                    at,
                    instantiated_at: e.id,
                    fields: Vec::new(),
                },
                missing_member_fields: true,
            },
            Err(other) => return Err(other),
        };
        out.push(report);
    }
    Ok(out)
}

pub fn thread_status(s: &TraceStore) -> BTreeMap<String, ThreadStatus> {
    s.threads()
        .map(|t| {
            let dead = s
                .thread_events(t)
                .any(|e| e.kind() == EventKind::ThreadDeath);
            let status = if dead {
                ThreadStatus::Exited
            } else {
                ThreadStatus::Running
            };
            (t.to_string(), status)
        })
        .collect()
}

/// Direct-callee tree rooted at `call_id`.
pub fn call_tree(s: &TraceStore, call_id: EventId) -> Result<CallTree> {
    let root = lookup(s, call_id)?;
    if root.kind() != EventKind::MethodCall {
        return Err(QueryError::NotAMethodCall(call_id));
    }

    // Arena of (event, children); index 0 is the root.
    let mut nodes: Vec<(&TraceEvent, Vec<usize>)> = vec![(root, Vec::new())];
    let mut open = vec![0usize];
    for call in s.thread_calls(&root.thread).filter(|c| c.id > root.id) {
        // Containment is monotone: once a span stops containing a later
        // call it never contains one again.
        if span_containing(s, root, call.id).is_none() {
            break;
        }
        while let Some(&top) = open.last() {
            if span_containing(s, nodes[top].0, call.id).is_some() {
                break;
            }
            open.pop();
        }
        let parent = *open.last().expect("root always contains the call");
        nodes.push((call, Vec::new()));
        let idx = nodes.len() - 1;
        nodes[parent].1.push(idx);
        open.push(idx);
    }

    fn assemble(s: &TraceStore, nodes: &[(&TraceEvent, Vec<usize>)], i: usize) -> CallTree {
        let (event, children) = &nodes[i];
        CallTree {
            root: (*event).clone(),
            terminator: termination(s, event),
            children: children.iter().map(|&c| assemble(s, nodes, c)).collect(),
        }
    }
    Ok(assemble(s, &nodes, 0))
}

pub fn exists(s: &TraceStore, q: &ExistenceQuery) -> bool {
    let p = match q {
        ExistenceQuery::LineExecuted(loc) => EventPattern::any().location(loc.clone()),
        ExistenceQuery::MethodCalled { name, subject } => {
            method_pattern(EventKind::MethodCall, name, subject.as_ref())
        }
        ExistenceQuery::FieldAssigned {
            field,
            value,
            subject,
        } => EventPattern {
            value: value.clone(),
            subject: subject.clone(),
            ..EventPattern::any().kind(EventKind::SetField).name(field)
        },
        ExistenceQuery::InstanceExists(class) => EventPattern::any()
            .kind(EventKind::MethodCall)
            .name(CONSTRUCTOR)
            .class_name(class),
        ExistenceQuery::ExceptionCaught(class) => EventPattern::any()
            .kind(EventKind::Exception)
            .class_name(class)
            .catch(crate::model::CatchFilter::Caught),
        ExistenceQuery::ThreadRunning(t) => {
            return thread_status(s).get(t) == Some(&ThreadStatus::Running)
        }
        ExistenceQuery::ThreadExited(t) => {
            return thread_status(s).get(t) == Some(&ThreadStatus::Exited)
        }
    };
    !s.scan(&p).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jel::parse_trace;

    fn npe_trace() -> TraceStore {
        TraceStore::load(parse_trace(include_str!("../fixtures/traveling_null_pointer.jel")).unwrap())
            .unwrap()
    }

    fn ids(v: &[EventId]) -> Vec<u64> {
        v.iter().map(|i| i.0).collect()
    }

    fn eids(v: &[TraceEvent]) -> Vec<u64> {
        v.iter().map(|e| e.id.0).collect()
    }

    fn pair_ids(v: &[(TraceEvent, TraceEvent)]) -> Vec<(u64, u64)> {
        v.iter().map(|(c, x)| (c.id.0, x.id.0)).collect()
    }

    // Expected chains below were computed by replaying per-thread call
    // stacks over the fixture by hand (push on call, pop on matching exit,
    // clear on uncaught exception); see also the replay oracle tests.

    #[test]
    fn enclosing_at_exception() {
        let s = npe_trace();
        let spans = any_enclosing_method(&s, EventId(15)).unwrap();
        assert_eq!(
            spans.iter().map(|sp| sp.call_id.0).collect::<Vec<_>>(),
            vec![1, 2, 4, 13, 14]
        );
        assert!(spans
            .iter()
            .all(|sp| sp.terminator == Terminator::KilledByUncaught(EventId(15))));
    }

    #[test]
    fn chains() {
        let s = npe_trace();
        assert_eq!(ids(&call_chain(&s, EventId(7)).unwrap()), vec![1, 2, 4]);
        assert_eq!(ids(&call_chain(&s, EventId(0)).unwrap()), Vec::<u64>::new());
        // An exit event is not inside its own call's span.
        assert_eq!(ids(&call_chain(&s, EventId(10)).unwrap()), vec![1, 2, 4]);
        assert_eq!(ids(&call_chain(&s, EventId(6)).unwrap()), vec![1, 2, 4]);
        assert_eq!(ids(&call_chain(&s, EventId(5)).unwrap()), vec![1, 2, 4]);
        assert_eq!(ids(&call_chain(&s, EventId(16)).unwrap()), Vec::<u64>::new());
        assert_eq!(call_chain(&s, EventId(99)), Err(QueryError::NotFound(EventId(99))));
    }

    #[test]
    fn full_detail_chain_is_reversed() {
        let s = npe_trace();
        let chain = full_detail_call_chain(&s, EventId(15)).unwrap();
        assert_eq!(eids(&chain), vec![14, 13, 4, 2, 1]);
        assert!(full_detail_call_chain(&s, EventId(0)).unwrap().is_empty());
    }

    #[test]
    fn where_queries() {
        let s = npe_trace();
        let env = where_exception_is_thrown(&s, "main").unwrap();
        assert_eq!(env.id, EventId(14));
        assert_eq!(env.event.name(), Some("mN"));
        let p = EventPattern::any().kind(EventKind::MethodCall).name("doSomeThing");
        assert_eq!(where_(&s, "main", &p).unwrap().id, EventId(4));
        let p = EventPattern::any().kind(EventKind::ThreadStart);
        assert_eq!(
            where_(&s, "main", &p),
            Err(QueryError::NoEnclosingEnvironment(EventId(0)))
        );
        assert_eq!(where_exception_is_thrown(&s, "worker"), Err(QueryError::NoMatch));
    }

    #[test]
    fn pre_and_post_called() {
        let s = npe_trace();
        let pre = pre_event_called_methods(&s, EventId(13)).unwrap();
        assert_eq!(pair_ids(&pre), vec![(5, 6), (9, 10)]);
        assert_eq!(pre[1].1.event.value(), Some(&Value::Null));
        assert!(pre_event_called_methods(&s, EventId(5)).unwrap().is_empty());
        assert_eq!(pair_ids(&post_event_called_methods(&s, EventId(5)).unwrap()), vec![(9, 10)]);
        assert!(post_event_called_methods(&s, EventId(13)).unwrap().is_empty());
        assert_eq!(
            pre_event_called_methods(&s, EventId(0)),
            Err(QueryError::NoEnclosingEnvironment(EventId(0)))
        );
    }

    #[test]
    fn locals() {
        let s = npe_trace();
        assert_eq!(
            local_variables_at(&s, EventId(13)).unwrap(),
            vec![
                LocalVar::new("o", Value::object("FarAWayClass", 645)),
                LocalVar::new("result", Value::Null)
            ]
        );
        assert!(local_variables_at(&s, EventId(3)).unwrap().is_empty());
        // Inside mN nothing has stepped yet.
        assert!(local_variables_at(&s, EventId(15)).unwrap().is_empty());
        let h = local_variable_history(&s, EventId(0), EventId(16), "main", "o");
        assert_eq!(h.iter().map(|f| f.event_id.0).collect::<Vec<_>>(), vec![8, 11, 12]);
        assert!(h.iter().all(|f| f.value == Value::object("FarAWayClass", 645)));
        assert!(local_variable_history(&s, EventId(0), EventId(16), "main", "zz").is_empty());
    }

    #[test]
    fn method_histories() {
        let s = npe_trace();
        assert_eq!(argument_history(&s, "m2", None), vec![(EventId(13), vec![Value::Null])]);
        assert!(argument_history(&s, "nope", None).is_empty());
        assert_eq!(
            return_value_history(&s, "doSomeThing", None),
            vec![(EventId(10), Value::Null)]
        );
        assert!(return_value_history(&s, "mN", None).is_empty());
        let subj = Subject::object("Example", 643);
        assert_eq!(argument_history(&s, "m1", Some(&subj)).len(), 1);
        assert!(argument_history(&s, "m1", Some(&Subject::class("Example"))).is_empty());
        assert!(data_structure_history(&s, EventId(0), EventId(16), None).is_empty());
        assert!(instance_field_history(&s, EventId(0), EventId(16), &ObjectRef::new("Example", 643), "x").is_empty());
    }

    #[test]
    fn instances_without_member_fields() {
        let s = npe_trace();
        let r = all_instances(&s, "FarAWayClass", EventId(16)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].state.object, ObjectRef::new("FarAWayClass", 645));
        assert!(r[0].missing_member_fields);
        assert!(all_instances(&s, "Nope", EventId(16)).unwrap().is_empty());
        assert!(all_instances(&s, "FarAWayClass", EventId(4)).unwrap().is_empty());
        assert_eq!(
            object_state(&s, EventId(16), &ObjectRef::new("FarAWayClass", 645)),
            Err(QueryError::NoMemberFields("FarAWayClass".into()))
        );
        assert_eq!(
            object_state(&s, EventId(3), &ObjectRef::new("FarAWayClass", 645)),
            Err(QueryError::NoInstantiation(ObjectRef::new("FarAWayClass", 645)))
        );
    }

    #[test]
    fn object_state_last_writes() {
        let text = "\
            event(0, t, threadstart(t)).\n\
            event(1, t, memberfields(c('P'), [of('f1'), of('f2'), cf('count'), of('f3')])).\n\
            event(2, t, setfield(l('P.java', 1), c('P'), 'count', 0)).\n\
            event(3, t, methodcall(l('P.java', 2), o('P', 9), '<init>', [])).\n\
            event(4, t, setfield(l('P.java', 3), o('P', 9), 'f1', 'a')).\n\
            event(5, t, setfield(l('P.java', 3), o('P', 9), 'f2', 'x')).\n\
            event(6, t, setfield(l('P.java', 4), o('P', 9), 'f1', 'b')).\n\
            event(7, t, setfield(l('P.java', 4), c('P'), 'count', 1)).\n\
            event(8, t, setfield(l('P.java', 5), o('P', 9), 'f2', 'y')).\n\
            event(9, t, setfield(l('P.java', 5), o('P', 10), 'f1', 'other')).\n\
            event(10, t, methodexit(3, l('P.java', 2), o('P', 9), '<init>', 'void')).\n";
        let s = TraceStore::load(parse_trace(text).unwrap()).unwrap();
        let obj = ObjectRef::new("P", 9);
        let st = object_state(&s, EventId(10), &obj).unwrap();
        let names: Vec<_> = st.fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["f1", "f2", "count", "f3"]);
        let read = |i: usize| st.fields[i].reading.clone();
        assert_eq!(read(0), Reading::Assigned { event_id: EventId(6), value: Value::Scalar("b".into()) });
        assert_eq!(read(1), Reading::Assigned { event_id: EventId(8), value: Value::Scalar("y".into()) });
        // The static write at 2 precedes the instantiation and is out of range.
        assert_eq!(read(2), Reading::Assigned { event_id: EventId(7), value: Value::Scalar("1".into()) });
        assert_eq!(read(3), Reading::Unassigned);

        let early = object_state(&s, EventId(5), &obj).unwrap();
        assert_eq!(early.fields[0].reading, Reading::Assigned { event_id: EventId(4), value: Value::Scalar("a".into()) });
        assert_eq!(early.fields[2].reading, Reading::Unassigned);

        assert_eq!(
            object_state_with(&s, EventId(10), &obj, StateMode::Strict),
            Err(QueryError::UnassignedField { object: obj.clone(), field: "f3".into() })
        );
        assert_eq!(class_field_history(&s, EventId(0), EventId(10), "P", "count").len(), 2);
        assert!(class_field_history(&s, EventId(8), EventId(10), "P", "count").is_empty());
    }

    #[test]
    fn fresh_object_fields_unassigned() {
        let text = "\
            event(0, t, memberfields(c('Q'), [of('a'), of('b')])).\n\
            event(1, t, methodcall(l('Q.java', 1), o('Q', 1), '<init>', [])).\n";
        let s = TraceStore::load(parse_trace(text).unwrap()).unwrap();
        let st = object_state(&s, EventId(1), &ObjectRef::new("Q", 1)).unwrap();
        assert!(st.fields.iter().all(|f| f.reading == Reading::Unassigned));
    }

    #[test]
    fn status_and_existence() {
        let s = npe_trace();
        assert_eq!(
            thread_status(&s),
            BTreeMap::from([("main".to_string(), ThreadStatus::Exited)])
        );
        assert!(thread_status(&TraceStore::load(vec![]).unwrap()).is_empty());
        let yes = |q| assert!(exists(&s, &q), "{q:?}");
        let no = |q| assert!(!exists(&s, &q), "{q:?}");
        yes(ExistenceQuery::MethodCalled { name: "doSomeThing".into(), subject: None });
        no(ExistenceQuery::ExceptionCaught("java.lang.NullPointerException".into()));
        yes(ExistenceQuery::ThreadExited("main".into()));
        no(ExistenceQuery::ThreadRunning("main".into()));
        yes(ExistenceQuery::InstanceExists("FarAWayClass".into()));
        no(ExistenceQuery::InstanceExists("java.lang.NullPointerException".into()));
        no(ExistenceQuery::FieldAssigned { field: "result".into(), value: None, subject: None });
        yes(ExistenceQuery::LineExecuted(Location::new("Example.java", 8)));
        no(ExistenceQuery::LineExecuted(Location::new("Example.java", 9)));
    }

    #[test]
    fn call_tree_of_m1() {
        let s = npe_trace();
        let t = call_tree(&s, EventId(4)).unwrap();
        let kids: Vec<_> = t.children.iter().map(|c| c.call_id().0).collect();
        assert_eq!(kids, vec![5, 9, 13]);
        assert_eq!(t.terminator, Some(Terminator::KilledByUncaught(EventId(15))));
        assert_eq!(t.children[0].terminator, Some(Terminator::ExitedAt(EventId(6))));
        let m2 = &t.children[2];
        assert_eq!(m2.terminator, Some(Terminator::KilledByUncaught(EventId(15))));
        assert_eq!(m2.children.len(), 1);
        assert_eq!(m2.children[0].call_id(), EventId(14));
        assert_eq!(m2.children[0].terminator, Some(Terminator::KilledByUncaught(EventId(15))));

        let leaf = call_tree(&s, EventId(9)).unwrap();
        assert!(leaf.children.is_empty());
        assert_eq!(leaf.terminator, Some(Terminator::ExitedAt(EventId(10))));
        assert_eq!(call_tree(&s, EventId(3)), Err(QueryError::NotAMethodCall(EventId(3))));
        assert_eq!(call_tree(&s, EventId(1)).unwrap().size(), 7);
    }

    #[test]
    fn restricted_window_falls_back_to_uncaught_clause() {
        let s = npe_trace();
        // Without event 6 in the window, call 5 looks pending and the
        // uncaught exception at 15 bounds it.
        let w = s.restrict(crate::store::HistoryInterval::new(5, 5).unwrap());
        assert!(call_chain(&w, EventId(5)).unwrap().is_empty());
        let w = s.restrict(crate::store::HistoryInterval::new(4, 15).unwrap());
        assert_eq!(ids(&call_chain(&w, EventId(7)).unwrap()), vec![4]);
        assert_eq!(ids(&call_chain(&w, EventId(15)).unwrap()), vec![4, 13, 14]);
    }
}
