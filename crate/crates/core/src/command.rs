//! Flat verb-argument query commands and their typed results.
//!
//! ```text
//! call-chain 15
//! where main methodcall name='m2'
//! field-history o('Example', 643) 'f' from=0 to=16
//! exists method 'doSomeThing'
//! ```
//!
//! Every command has a canonical text form ([`fmt::Display`]) that parses
//! back to the same [`Query`], and every result has a canonical JSON form
//! with sorted keys.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::jel::{
    decode_atom, decode_location, decode_object, decode_subject, decode_u64, decode_value,
    ParseError, Quoted, Term, TermReader, Tok,
};
use crate::model::{EventId, EventPattern, LocalVar, Location, ObjectRef, Subject, TraceEvent, Value};
use crate::pattern::{pattern_to_string, read_pattern};
use crate::query::{
    self, CallSpan, CallTree, ExistenceQuery, FieldSample, InstanceReport, ObjectState,
    QueryError, Reading, StateMode, ThreadStatus,
};
use crate::scenario::{Binding, ScenarioResult};
use crate::store::TraceStore;

/// Optional inclusive id window of a history query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Range {
    pub from: Option<EventId>,
    pub to: Option<EventId>,
}

impl Range {
    pub fn new(from: impl Into<EventId>, to: impl Into<EventId>) -> Self {
        Range {
            from: Some(from.into()),
            to: Some(to.into()),
        }
    }

    fn bounds(self) -> (EventId, EventId) {
        (
            self.from.unwrap_or(EventId(0)),
            self.to.unwrap_or(EventId(u64::MAX)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    CallChain(EventId),
    Enclosing(EventId),
    FullChain(EventId),
    Where { thread: String, pattern: EventPattern },
    WhereException(String),
    FieldHistory { object: ObjectRef, field: String, range: Range },
    ClassFieldHistory { class_name: String, field: String, range: Range },
    ObjectState { object: ObjectRef, end: EventId, strict: bool },
    PreCalled(EventId),
    PostCalled(EventId),
    Locals(EventId),
    LocalHistory { thread: String, name: String, range: Range },
    ArgsHistory { method: String, subject: Option<Subject> },
    ReturnsHistory { method: String, subject: Option<Subject> },
    DsHistory { range: Range, at: Option<Location> },
    Instances { class_name: String, at: Option<EventId> },
    Threads,
    CallTree(EventId),
    Exists(ExistenceQuery),
    Event(EventId),
    Scan(EventPattern),
}

/// Verbs accepted by [`Query::parse`], with their argument shapes.
pub const QUERY_VERBS: &[(&str, &str)] = &[
    ("call-chain", "<id>"),
    ("enclosing", "<id>"),
    ("full-chain", "<id>"),
    ("where", "<thread> <pattern>"),
    ("where-exception", "<thread>"),
    ("field-history", "<o(Class, Id)> <field> [from=<id>] [to=<id>]"),
    ("class-field-history", "<class> <field> [from=<id>] [to=<id>]"),
    ("object-state", "<o(Class, Id)> <end-id> [strict]"),
    ("pre-called", "<id>"),
    ("post-called", "<id>"),
    ("locals", "<id>"),
    ("local-history", "<thread> <name> [from=<id>] [to=<id>]"),
    ("args-history", "<method> [subject=<o(..)|c(..)>]"),
    ("returns-history", "<method> [subject=<o(..)|c(..)>]"),
    ("ds-history", "[from=<id>] [to=<id>] [at=<l(File, Line)>]"),
    ("instances", "<class> [at=<id>]"),
    ("threads", ""),
    ("call-tree", "<call-id>"),
    ("exists", "line <l(File, Line)> | method <name> [subject=..] | field <name> [value=..] [subject=..] | instance <class> | caught <class> | thread-running <thread> | thread-exited <thread>"),
    ("event", "<id>"),
    ("scan", "<pattern>"),
];

struct Args<'a> {
    r: TermReader<'a>,
}

impl Args<'_> {
    fn term(&mut self) -> Result<Term, ParseError> {
        self.r.term()
    }

    fn id(&mut self) -> Result<EventId, ParseError> {
        Ok(EventId(decode_u64(&self.term()?, "event id")?))
    }

    fn atom(&mut self, what: &str) -> Result<String, ParseError> {
        decode_atom(&self.term()?, what)
    }

    /// Reads `key=term` options until end of input, allowing only `keys`.
    fn options(&mut self, keys: &[&str]) -> Result<BTreeMap<String, Term>, ParseError> {
        let mut out = BTreeMap::new();
        while !self.r.at_eof()? {
            let (tok, pos) = self.r.peek()?.clone();
            let Tok::Atom { text: key, .. } = tok else {
                return Err(pos.error("option", tok.to_string()));
            };
            if !keys.contains(&key.as_str()) {
                return Err(pos.error(
                    format!("one of {}", keys.iter().map(|k| format!("{k}=")).collect::<Vec<_>>().join(", ")),
                    format!("`{}`", key),
                ));
            }
            self.r.next()?;
            self.r.expect_punct('=')?;
            let t = self.term()?;
            if out.insert(key.clone(), t).is_some() {
                return Err(pos.error("each option at most once", format!("repeated `{}`", key)));
            }
        }
        Ok(out)
    }

    fn range(opts: &BTreeMap<String, Term>) -> Result<Range, ParseError> {
        let get = |k: &str| {
            opts.get(k)
                .map(|t| decode_u64(t, "event id").map(EventId))
                .transpose()
        };
        Ok(Range {
            from: get("from")?,
            to: get("to")?,
        })
    }

    fn end(&mut self) -> Result<(), ParseError> {
        let (tok, pos) = self.r.next()?;
        if tok == Tok::Eof {
            Ok(())
        } else {
            Err(pos.error("end of command", tok.to_string()))
        }
    }
}

impl Query {
    pub fn parse(text: &str) -> Result<Query, ParseError> {
        let mut a = Args {
            r: TermReader::new(text),
        };
        let (tok, pos) = a.r.next()?;
        let verb = match tok {
            Tok::Atom { text, .. } => text,
            other => return Err(pos.error("query verb", other.to_string())),
        };
        let q = match verb.as_str() {
            "call-chain" => Query::CallChain(a.id()?),
            "enclosing" => Query::Enclosing(a.id()?),
            "full-chain" => Query::FullChain(a.id()?),
            "pre-called" => Query::PreCalled(a.id()?),
            "post-called" => Query::PostCalled(a.id()?),
            "locals" => Query::Locals(a.id()?),
            "call-tree" => Query::CallTree(a.id()?),
            "event" => Query::Event(a.id()?),
            "threads" => Query::Threads,
            "where-exception" => Query::WhereException(a.atom("thread name")?),
            "where" => {
                let thread = a.atom("thread name")?;
                let (pattern, _) = read_pattern(&mut a.r, false)?;
                Query::Where { thread, pattern }
            }
            "scan" => Query::Scan(read_pattern(&mut a.r, false)?.0),
            "field-history" => {
                let object = decode_object(&a.term()?)?;
                let field = a.atom("field name")?;
                let range = Args::range(&a.options(&["from", "to"])?)?;
                Query::FieldHistory { object, field, range }
            }
            "class-field-history" => {
                let class_name = a.atom("class name")?;
                let field = a.atom("field name")?;
                let range = Args::range(&a.options(&["from", "to"])?)?;
                Query::ClassFieldHistory { class_name, field, range }
            }
            "local-history" => {
                let thread = a.atom("thread name")?;
                let name = a.atom("variable name")?;
                let range = Args::range(&a.options(&["from", "to"])?)?;
                Query::LocalHistory { thread, name, range }
            }
            "object-state" => {
                let object = decode_object(&a.term()?)?;
                let end = a.id()?;
                let strict = match a.r.peek()?.clone() {
                    (Tok::Eof, _) => false,
                    (Tok::Atom { text, .. }, _) if text == "strict" => {
                        a.r.next()?;
                        true
                    }
                    (other, pos) => return Err(pos.error("`strict` or end of command", other.to_string())),
                };
                Query::ObjectState { object, end, strict }
            }
            "args-history" | "returns-history" => {
                let method = a.atom("method name")?;
                let opts = a.options(&["subject"])?;
                let subject = opts.get("subject").map(decode_subject).transpose()?;
                if verb == "args-history" {
                    Query::ArgsHistory { method, subject }
                } else {
                    Query::ReturnsHistory { method, subject }
                }
            }
            "ds-history" => {
                let opts = a.options(&["from", "to", "at"])?;
                Query::DsHistory {
                    range: Args::range(&opts)?,
                    at: opts.get("at").map(decode_location).transpose()?,
                }
            }
            "instances" => {
                let class_name = a.atom("class name")?;
                let opts = a.options(&["at"])?;
                let at = opts
                    .get("at")
                    .map(|t| decode_u64(t, "event id").map(EventId))
                    .transpose()?;
                Query::Instances { class_name, at }
            }
            "exists" => {
                let what = a.atom("existence check")?;
                Query::Exists(match what.as_str() {
                    "line" => ExistenceQuery::LineExecuted(decode_location(&a.term()?)?),
                    "method" => {
                        let name = a.atom("method name")?;
                        let opts = a.options(&["subject"])?;
                        ExistenceQuery::MethodCalled {
                            name,
                            subject: opts.get("subject").map(decode_subject).transpose()?,
                        }
                    }
                    "field" => {
                        let field = a.atom("field name")?;
                        let opts = a.options(&["value", "subject"])?;
                        ExistenceQuery::FieldAssigned {
                            field,
                            value: opts.get("value").map(decode_value).transpose()?,
                            subject: opts.get("subject").map(decode_subject).transpose()?,
                        }
                    }
                    "instance" => ExistenceQuery::InstanceExists(a.atom("class name")?),
                    "caught" => ExistenceQuery::ExceptionCaught(a.atom("exception class")?),
                    "thread-running" => ExistenceQuery::ThreadRunning(a.atom("thread name")?),
                    "thread-exited" => ExistenceQuery::ThreadExited(a.atom("thread name")?),
                    other => {
                        return Err(pos.error(
                            "line, method, field, instance, caught, thread-running or thread-exited",
                            format!("`{}`", other),
                        ))
                    }
                })
            }
            other => return Err(pos.error("query verb", format!("`{}`", other))),
        };
        a.end()?;
        Ok(q)
    }

    /// Stable name of the operation, used for cache keys and diff checks.
    pub fn verb(&self) -> &'static str {
        match self {
            Query::CallChain(_) => "call-chain",
            Query::Enclosing(_) => "enclosing",
            Query::FullChain(_) => "full-chain",
            Query::Where { .. } => "where",
            Query::WhereException(_) => "where-exception",
            Query::FieldHistory { .. } => "field-history",
            Query::ClassFieldHistory { .. } => "class-field-history",
            Query::ObjectState { .. } => "object-state",
            Query::PreCalled(_) => "pre-called",
            Query::PostCalled(_) => "post-called",
            Query::Locals(_) => "locals",
            Query::LocalHistory { .. } => "local-history",
            Query::ArgsHistory { .. } => "args-history",
            Query::ReturnsHistory { .. } => "returns-history",
            Query::DsHistory { .. } => "ds-history",
            Query::Instances { .. } => "instances",
            Query::Threads => "threads",
            Query::CallTree(_) => "call-tree",
            Query::Exists(_) => "exists",
            Query::Event(_) => "event",
            Query::Scan(_) => "scan",
        }
    }

    pub fn evaluate(&self, s: &TraceStore) -> Result<QueryResult, QueryError> {
        use QueryResult as R;
        Ok(match self {
            Query::CallChain(id) => R::Ids(query::call_chain(s, *id)?),
            Query::Enclosing(id) => R::Spans(query::any_enclosing_method(s, *id)?),
            Query::FullChain(id) => R::Events(query::full_detail_call_chain(s, *id)?),
            Query::Where { thread, pattern } => R::Event(query::where_(s, thread, pattern)?),
            Query::WhereException(t) => R::Event(query::where_exception_is_thrown(s, t)?),
            Query::FieldHistory { object, field, range } => {
                let (lo, hi) = range.bounds();
                R::Samples(query::instance_field_history(s, lo, hi, object, field))
            }
            Query::ClassFieldHistory {
                class_name,
                field,
                range,
            } => {
                let (lo, hi) = range.bounds();
                R::Samples(query::class_field_history(s, lo, hi, class_name, field))
            }
            Query::ObjectState { object, end, strict } => {
                let mode = if *strict {
                    StateMode::Strict
                } else {
                    StateMode::Lenient
                };
                R::State(query::object_state_with(s, *end, object, mode)?)
            }
            Query::PreCalled(id) => R::Pairs(query::pre_event_called_methods(s, *id)?),
            Query::PostCalled(id) => R::Pairs(query::post_event_called_methods(s, *id)?),
            Query::Locals(id) => R::Locals(query::local_variables_at(s, *id)?),
            Query::LocalHistory { thread, name, range } => {
                let (lo, hi) = range.bounds();
                R::Samples(query::local_variable_history(s, lo, hi, thread, name))
            }
            Query::ArgsHistory { method, subject } => {
                R::Args(query::argument_history(s, method, subject.as_ref()))
            }
            Query::ReturnsHistory { method, subject } => {
                R::Returns(query::return_value_history(s, method, subject.as_ref()))
            }
            Query::DsHistory { range, at } => {
                let (lo, hi) = range.bounds();
                R::DataStructures(query::data_structure_history(s, lo, hi, at.as_ref()))
            }
            Query::Instances { class_name, at } => {
                let at = at.or(s.max_id()).unwrap_or(EventId(0));
                R::Instances(query::all_instances(s, class_name, at)?)
            }
            Query::Threads => R::Threads(query::thread_status(s)),
            Query::CallTree(id) => R::Tree(query::call_tree(s, *id)?),
            Query::Exists(q) => R::Bool(query::exists(s, q)),
            Query::Event(id) => R::Event(
                s.get(*id)
                    .map_err(|_| QueryError::NotFound(*id))?
                    .clone(),
            ),
            Query::Scan(p) => R::Events(s.scan(p).into_iter().cloned().collect()),
        })
    }
}

fn write_range(f: &mut fmt::Formatter<'_>, r: &Range) -> fmt::Result {
    if let Some(lo) = r.from {
        write!(f, " from={}", lo)?;
    }
    if let Some(hi) = r.to {
        write!(f, " to={}", hi)?;
    }
    Ok(())
}

fn write_subject(f: &mut fmt::Formatter<'_>, s: &Option<Subject>) -> fmt::Result {
    match s {
        Some(s) => write!(f, " subject={}", s),
        None => Ok(()),
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.verb())?;
        match self {
            Query::CallChain(id)
            | Query::Enclosing(id)
            | Query::FullChain(id)
            | Query::PreCalled(id)
            | Query::PostCalled(id)
            | Query::Locals(id)
            | Query::CallTree(id)
            | Query::Event(id) => write!(f, " {}", id),
            Query::Threads => Ok(()),
            Query::WhereException(t) => write!(f, " {}", Quoted(t)),
            Query::Where { thread, pattern } => {
                write!(f, " {} {}", Quoted(thread), pattern_to_string(pattern))
            }
            Query::Scan(p) => write!(f, " {}", pattern_to_string(p)),
            Query::FieldHistory { object, field, range } => {
                write!(f, " {} {}", object, Quoted(field))?;
                write_range(f, range)
            }
            Query::ClassFieldHistory {
                class_name,
                field,
                range,
            } => {
                write!(f, " {} {}", Quoted(class_name), Quoted(field))?;
                write_range(f, range)
            }
            Query::LocalHistory { thread, name, range } => {
                write!(f, " {} {}", Quoted(thread), Quoted(name))?;
                write_range(f, range)
            }
            Query::ObjectState { object, end, strict } => {
                write!(f, " {} {}", object, end)?;
                if *strict {
                    f.write_str(" strict")?;
                }
                Ok(())
            }
            Query::ArgsHistory { method, subject } | Query::ReturnsHistory { method, subject } => {
                write!(f, " {}", Quoted(method))?;
                write_subject(f, subject)
            }
            Query::DsHistory { range, at } => {
                write_range(f, range)?;
                match at {
                    Some(l) => write!(f, " at={}", l),
                    None => Ok(()),
                }
            }
            Query::Instances { class_name, at } => {
                write!(f, " {}", Quoted(class_name))?;
                match at {
                    Some(id) => write!(f, " at={}", id),
                    None => Ok(()),
                }
            }
            Query::Exists(q) => match q {
                ExistenceQuery::LineExecuted(l) => write!(f, " line {}", l),
                ExistenceQuery::MethodCalled { name, subject } => {
                    write!(f, " method {}", Quoted(name))?;
                    write_subject(f, subject)
                }
                ExistenceQuery::FieldAssigned {
                    field,
                    value,
                    subject,
                } => {
                    write!(f, " field {}", Quoted(field))?;
                    if let Some(v) = value {
                        write!(f, " value={}", v)?;
                    }
                    write_subject(f, subject)
                }
                ExistenceQuery::InstanceExists(c) => write!(f, " instance {}", Quoted(c)),
                ExistenceQuery::ExceptionCaught(c) => write!(f, " caught {}", Quoted(c)),
                ExistenceQuery::ThreadRunning(t) => write!(f, " thread-running {}", Quoted(t)),
                ExistenceQuery::ThreadExited(t) => write!(f, " thread-exited {}", Quoted(t)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryResult {
    Ids(Vec<EventId>),
    Spans(Vec<CallSpan>),
    Event(TraceEvent),
    Events(Vec<TraceEvent>),
    Samples(Vec<FieldSample>),
    State(ObjectState),
    Pairs(Vec<(TraceEvent, TraceEvent)>),
    Locals(Vec<LocalVar>),
    Args(Vec<(EventId, Vec<Value>)>),
    Returns(Vec<(EventId, Value)>),
    DataStructures(Vec<(EventId, Vec<Value>)>),
    Instances(Vec<InstanceReport>),
    Threads(BTreeMap<String, ThreadStatus>),
    Tree(CallTree),
    Bool(bool),
    Scenario {
        labels: Vec<String>,
        result: ScenarioResult,
    },
}

pub type Row = BTreeMap<String, Json>;

/// Columns holding event ids; they differ between runs of the same
/// program and are dropped by the default diff projection.
pub const ID_COLUMNS: &[&str] = &[
    "id",
    "call_id",
    "exit_id",
    "event_id",
    "terminator_id",
    "instantiated_at",
];

fn to_json<T: serde::Serialize>(v: &T) -> Json {
    serde_json::to_value(v).expect("result types serialize")
}

fn ids(v: &[EventId]) -> Json {
    Json::Array(v.iter().map(|i| json!(i.0)).collect())
}

fn tree_json(t: &CallTree) -> Json {
    json!({
        "call": to_json(&t.root),
        "terminator": to_json(&t.terminator),
        "children": t.children.iter().map(tree_json).collect::<Vec<_>>(),
    })
}

fn binding_json(b: &Binding) -> Json {
    match b {
        Binding::Value(v) => to_json(v),
        Binding::Id(id) => json!({ "id": id.0 }),
    }
}

fn bindings_json(b: &BTreeMap<String, Binding>) -> Json {
    Json::Object(b.iter().map(|(k, v)| (k.clone(), binding_json(v))).collect())
}

fn event_row(e: &TraceEvent) -> Row {
    match to_json(e) {
        Json::Object(m) => m.into_iter().collect(),
        _ => unreachable!("events serialize as objects"),
    }
}

fn row(pairs: impl IntoIterator<Item = (&'static str, Json)>) -> Row {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn terminator_cells(t: Option<query::Terminator>) -> [(&'static str, Json); 2] {
    match t {
        Some(query::Terminator::ExitedAt(x)) => [("terminator", json!("exited")), ("terminator_id", json!(x.0))],
        Some(query::Terminator::KilledByUncaught(x)) => {
            [("terminator", json!("uncaught")), ("terminator_id", json!(x.0))]
        }
        None => [("terminator", Json::Null), ("terminator_id", Json::Null)],
    }
}

fn tree_rows(t: &CallTree, depth: usize, out: &mut Vec<Row>) {
    let mut r = row([
        ("depth", json!(depth)),
        ("call_id", json!(t.root.id.0)),
        ("subject", to_json(&t.root.event.subject())),
        ("name", to_json(&t.root.event.name())),
    ]);
    r.extend(terminator_cells(t.terminator).map(|(k, v)| (k.to_string(), v)));
    out.push(r);
    for c in &t.children {
        tree_rows(c, depth + 1, out);
    }
}

impl QueryResult {
    /// Result shape name; two results are comparable when these agree.
    pub fn kind(&self) -> &'static str {
        match self {
            QueryResult::Ids(_) => "ids",
            QueryResult::Spans(_) => "spans",
            QueryResult::Event(_) => "event",
            QueryResult::Events(_) => "events",
            QueryResult::Samples(_) => "samples",
            QueryResult::State(_) => "state",
            QueryResult::Pairs(_) => "pairs",
            QueryResult::Locals(_) => "locals",
            QueryResult::Args(_) => "args",
            QueryResult::Returns(_) => "returns",
            QueryResult::DataStructures(_) => "data_structures",
            QueryResult::Instances(_) => "instances",
            QueryResult::Threads(_) => "threads",
            QueryResult::Tree(_) => "tree",
            QueryResult::Bool(_) => "bool",
            QueryResult::Scenario { .. } => "scenario",
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            QueryResult::Ids(v) => ids(v),
            QueryResult::Spans(v) => to_json(v),
            QueryResult::Event(e) => to_json(e),
            QueryResult::Events(v) => to_json(v),
            QueryResult::Samples(v) => to_json(v),
            QueryResult::State(s) => to_json(s),
            QueryResult::Pairs(v) => Json::Array(v.iter().map(|(c, x)| json!([c.id.0, x.id.0])).collect()),
            QueryResult::Locals(v) => to_json(v),
            QueryResult::Args(v) => Json::Array(
                v.iter()
                    .map(|(id, args)| json!({ "event_id": id.0, "args": to_json(args) }))
                    .collect(),
            ),
            QueryResult::Returns(v) => Json::Array(
                v.iter()
                    .map(|(id, r)| json!({ "event_id": id.0, "return_value": to_json(r) }))
                    .collect(),
            ),
            QueryResult::DataStructures(v) => Json::Array(
                v.iter()
                    .map(|(id, c)| json!({ "event_id": id.0, "contents": to_json(c) }))
                    .collect(),
            ),
            QueryResult::Instances(v) => to_json(v),
            QueryResult::Threads(m) => to_json(m),
            QueryResult::Tree(t) => tree_json(t),
            QueryResult::Bool(b) => json!(b),
            QueryResult::Scenario { labels, result } => match result {
                ScenarioResult::Matched {
                    bindings,
                    matched_ids,
                } => json!({
                    "outcome": "matched",
                    "steps": labels,
                    "matched_ids": ids(matched_ids),
                    "bindings": bindings_json(bindings),
                }),
                ScenarioResult::FailedAt { label, bindings } => json!({
                    "outcome": "failed_at",
                    "steps": labels,
                    "label": label,
                    "bindings": bindings_json(bindings),
                }),
            },
        }
    }

    /// Canonical JSON text: sorted keys, no whitespace.
    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    /// Flat records used for diffing and table output.
    pub fn rows(&self) -> Vec<Row> {
        match self {
            QueryResult::Ids(v) => v.iter().map(|i| row([("call_id", json!(i.0))])).collect(),
            QueryResult::Spans(v) => v
                .iter()
                .map(|sp| {
                    let mut r = row([("call_id", json!(sp.call_id.0))]);
                    r.extend(terminator_cells(Some(sp.terminator)).map(|(k, v)| (k.to_string(), v)));
                    r
                })
                .collect(),
            QueryResult::Event(e) => vec![event_row(e)],
            QueryResult::Events(v) => v.iter().map(event_row).collect(),
            QueryResult::Samples(v) => v
                .iter()
                .map(|s| {
                    row([
                        ("event_id", json!(s.event_id.0)),
                        ("field_name", json!(s.field_name)),
                        ("value", to_json(&s.value)),
                    ])
                })
                .collect(),
            QueryResult::State(st) => st
                .fields
                .iter()
                .map(|f| {
                    let (id, value) = match &f.reading {
                        Reading::Assigned { event_id, value } => (json!(event_id.0), to_json(value)),
                        Reading::Unassigned => (Json::Null, Json::Null),
                    };
                    row([
                        ("kind", to_json(&f.kind)),
                        ("name", json!(f.name)),
                        ("event_id", id),
                        ("value", value),
                    ])
                })
                .collect(),
            QueryResult::Pairs(v) => v
                .iter()
                .map(|(c, x)| {
                    row([
                        ("call_id", json!(c.id.0)),
                        ("exit_id", json!(x.id.0)),
                        ("subject", to_json(&c.event.subject())),
                        ("name", to_json(&c.event.name())),
                        ("args", to_json(&c.event.args())),
                        ("return_value", to_json(&x.event.value())),
                    ])
                })
                .collect(),
            QueryResult::Locals(v) => v
                .iter()
                .map(|lv| row([("name", json!(lv.name)), ("value", to_json(&lv.value))]))
                .collect(),
            QueryResult::Args(v) => v
                .iter()
                .map(|(id, a)| row([("event_id", json!(id.0)), ("args", to_json(a))]))
                .collect(),
            QueryResult::Returns(v) => v
                .iter()
                .map(|(id, r)| row([("event_id", json!(id.0)), ("return_value", to_json(r))]))
                .collect(),
            QueryResult::DataStructures(v) => v
                .iter()
                .map(|(id, c)| row([("event_id", json!(id.0)), ("contents", to_json(c))]))
                .collect(),
            QueryResult::Instances(v) => v
                .iter()
                .map(|i| {
                    row([
                        ("object", to_json(&i.state.object)),
                        ("instantiated_at", json!(i.state.instantiated_at.0)),
                        ("fields", QueryResult::State(i.state.clone()).rows_json()),
                        ("missing_member_fields", json!(i.missing_member_fields)),
                    ])
                })
                .collect(),
            QueryResult::Threads(m) => m
                .iter()
                .map(|(t, s)| row([("thread", json!(t)), ("status", to_json(s))]))
                .collect(),
            QueryResult::Tree(t) => {
                let mut out = Vec::new();
                tree_rows(t, 0, &mut out);
                out
            }
            QueryResult::Bool(b) => vec![row([("value", json!(b))])],
            QueryResult::Scenario { labels, result } => match result {
                ScenarioResult::Matched { matched_ids, .. } => labels
                    .iter()
                    .zip(matched_ids)
                    .map(|(l, id)| row([("step", json!(l)), ("event_id", json!(id.0))]))
                    .collect(),
                ScenarioResult::FailedAt { label, .. } => vec![row([("failed_at", json!(label))])],
            },
        }
    }

    fn rows_json(&self) -> Json {
        Json::Array(self.rows().into_iter().map(|r| Json::Object(r.into_iter().collect::<Map<_, _>>())).collect())
    }

    /// Aligned plain-text table for humans.
    pub fn to_table(&self) -> String {
        if let QueryResult::Bool(b) = self {
            return format!("{}\n", b);
        }
        rows_to_table(&self.rows())
    }
}

/// Aligned plain-text table of flat rows, columns ordered id-like first.
pub fn rows_to_table(rows: &[Row]) -> String {
    if rows.is_empty() {
        return "(no rows)\n".to_string();
    }
    let mut columns: Vec<&str> = Vec::new();
    for r in rows {
        for k in r.keys() {
            if !columns.contains(&k.as_str()) {
                columns.push(k);
            }
        }
    }
    columns.sort_by_key(|c| column_rank(c));
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| columns.iter().map(|c| r.get(*c).map_or(String::new(), cell_text)).collect())
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| cells.iter().map(|r| r[i].chars().count()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |vals: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = vals
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{:<w$}", v, w = *w))
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(columns.clone(), &mut out);
    for r in &cells {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// Id-like columns first, then the rest alphabetically.
fn column_rank(c: &str) -> (usize, String) {
    let pos = ["depth", "step", "id", "call_id", "exit_id", "event_id", "thread", "kind"]
        .iter()
        .position(|k| *k == c)
        .unwrap_or(usize::MAX);
    (pos, c.to_string())
}

/// Renders a JSON cell using trace syntax for values where possible.
fn cell_text(v: &Json) -> String {
    match v {
        Json::Null => "-".to_string(),
        Json::String(s) => s.clone(),
        Json::Array(items) => format!("[{}]", items.iter().map(cell_text).collect::<Vec<_>>().join(", ")),
        Json::Object(m) if m.len() == 1 => {
            let (k, inner) = m.iter().next().expect("one entry");
            match (k.as_str(), inner) {
                ("scalar", Json::String(s)) => s.clone(),
                ("class", Json::String(c)) => format!("c({})", c),
                ("object", Json::Object(o)) => format!("o({}, {})", cell_text(&o["class"]), o["id"]),
                _ => v.to_string(),
            }
        }
        Json::Object(m) if m.contains_key("file") && m.contains_key("line") => {
            format!("{}:{}", cell_text(&m["file"]), m["line"])
        }
        Json::Object(m) if m.contains_key("class") && m.contains_key("id") && m.len() == 2 => {
            format!("o({}, {})", cell_text(&m["class"]), m["id"])
        }
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// Parses and evaluates one query command.
pub fn run_query(s: &TraceStore, text: &str) -> Result<QueryResult, CommandError> {
    Ok(Query::parse(text)?.evaluate(s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jel::parse_trace;

    fn npe_trace() -> TraceStore {
        TraceStore::load(parse_trace(include_str!("../fixtures/traveling_null_pointer.jel")).unwrap()).unwrap()
    }

    #[test]
    fn canonical_text_round_trips() {
        for text in [
            "call-chain 15",
            "enclosing 7",
            "full-chain 15",
            "where 'main' methodcall name='m2'",
            "where-exception 'main'",
            "field-history o('Example', 643) 'f' from=0 to=16",
            "field-history o('Example', 643) 'f'",
            "class-field-history 'Example' 'count' to=9",
            "object-state o('Example', 643) 16 strict",
            "object-state o('Example', 643) 16",
            "pre-called 13",
            "post-called 5",
            "locals 12",
            "local-history 'main' 'result' from=3",
            "args-history 'm2'",
            "returns-history 'doSomeThing' subject=o('FarAWayClass', 645)",
            "ds-history from=1 to=4 at=l('A.java', 3)",
            "ds-history",
            "instances 'FarAWayClass' at=9",
            "threads",
            "call-tree 4",
            "exists line l('Example.java', 7)",
            "exists method 'doSomeThing' subject=c('X')",
            "exists field 'f' value='null' subject=o('A', 1)",
            "exists instance 'FarAWayClass'",
            "exists caught 'java.lang.NullPointerException'",
            "exists thread-running 'main'",
            "exists thread-exited 'main'",
            "event 14",
            "scan methodexit value='null'",
        ] {
            let q = Query::parse(text).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!(q.to_string(), text);
        }
    }

    #[test]
    fn bare_atoms_accepted() {
        let q = Query::parse("where-exception main").unwrap();
        assert_eq!(q, Query::WhereException("main".into()));
        let q = Query::parse("exists method doSomeThing").unwrap();
        assert_eq!(q.to_string(), "exists method 'doSomeThing'");
    }

    #[test]
    fn parse_errors_have_positions() {
        let e = Query::parse("call-chain x").unwrap_err();
        assert_eq!((e.line_number, e.column), (1, 12));
        assert!(Query::parse("frobnicate 1").is_err());
        assert!(Query::parse("call-chain 1 2").is_err());
        assert!(Query::parse("field-history o('A', 1) f colour=3").is_err());
        assert!(Query::parse("ds-history from=1 from=2").is_err());
        assert!(Query::parse("exists nothing x").is_err());
        assert!(Query::parse("where main methodcall name=$X").is_err());
    }

    #[test]
    fn npe_trace_json() {
        let s = npe_trace();
        assert_eq!(run_query(&s, "call-chain 15").unwrap().to_json_string(), "[1,2,4,13,14]");
        assert_eq!(run_query(&s, "pre-called 13").unwrap().to_json_string(), "[[5,6],[9,10]]");
        assert_eq!(run_query(&s, "exists thread-exited main").unwrap().to_json_string(), "true");
        assert_eq!(run_query(&s, "threads").unwrap().to_json_string(), r#"{"main":"exited"}"#);
        let ev = run_query(&s, "where-exception main").unwrap().to_json_string();
        assert_eq!(
            ev,
            r#"{"args":["null"],"id":14,"kind":"methodcall","location":{"file":"Example.java","line":14},"name":"mN","subject":{"object":{"class":"Example","id":643}},"thread":"main"}"#
        );
    }

    #[test]
    fn query_errors_surface() {
        let s = npe_trace();
        assert_eq!(
            run_query(&s, "call-chain 99"),
            Err(CommandError::Query(QueryError::NotFound(EventId(99))))
        );
        assert!(matches!(run_query(&s, "call-chain"), Err(CommandError::Parse(_))));
    }

    #[test]
    fn tables_render() {
        let s = npe_trace();
        let t = run_query(&s, "pre-called 13").unwrap().to_table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("call_id  exit_id"));
        assert!(lines[2].contains("doSomeThing"));
        assert!(lines[2].contains("o(FarAWayClass, 645)"));
        assert_eq!(run_query(&s, "exists method m1").unwrap().to_table(), "true\n");
        assert_eq!(run_query(&s, "scan step from=100").unwrap().to_table(), "(no rows)\n");
    }

    #[test]
    fn rows_of_tree() {
        let s = npe_trace();
        let rows = run_query(&s, "call-tree 4").unwrap().rows();
        let ids: Vec<u64> = rows.iter().map(|r| r["call_id"].as_u64().unwrap()).collect();
        assert_eq!(ids, vec![4, 5, 9, 13, 14]);
        assert_eq!(rows[4]["depth"], json!(2));
        assert_eq!(rows[4]["terminator"], json!("uncaught"));
    }
}
