//! Domain types for recorded execution events.
//!
//! Everything here mirrors what the JEL trace format can express and nothing
//! more: locations are opaque file/line pairs, objects are identified by
//! their runtime class name plus a numeric id, and primitive values are kept
//! as the verbatim token text they were recorded with.

use std::fmt;

use serde::Serialize;

/// Recording-order identifier of a trace event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct EventId(pub u64);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for EventId {
    fn from(v: u64) -> Self {
        EventId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
}

impl Location {
    pub fn new(file: impl Into<String>, line: u32) -> Self {
        Location {
            file: file.into(),
            line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ObjectRef {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "id")]
    pub object_id: u64,
}

impl ObjectRef {
    pub fn new(class_name: impl Into<String>, object_id: u64) -> Self {
        ObjectRef {
            class_name: class_name.into(),
            object_id,
        }
    }
}

/// The receiver of a call or the owner of a field: a class (static
/// context) or a particular object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Class(String),
    Object(ObjectRef),
}

impl Subject {
    pub fn class_name(&self) -> &str {
        match self {
            Subject::Class(c) => c,
            Subject::Object(o) => &o.class_name,
        }
    }

    pub fn object(class_name: impl Into<String>, object_id: u64) -> Self {
        Subject::Object(ObjectRef::new(class_name, object_id))
    }

    pub fn class(class_name: impl Into<String>) -> Self {
        Subject::Class(class_name.into())
    }
}

/// A recorded value. `Class` covers `c(...)` terms appearing in value
/// position (class literals).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Null,
    Void,
    Scalar(String),
    Object(ObjectRef),
    Class(String),
}

impl Value {
    /// Builds a value from atom text, honouring the reserved `null`/`void`.
    pub fn atom(text: impl Into<String>) -> Self {
        let text = text.into();
        match text.as_str() {
            "null" => Value::Null,
            "void" => Value::Void,
            _ => Value::Scalar(text),
        }
    }

    pub fn object(class_name: impl Into<String>, object_id: u64) -> Self {
        Value::Object(ObjectRef::new(class_name, object_id))
    }
}

impl From<Subject> for Value {
    fn from(s: Subject) -> Self {
        match s {
            Subject::Class(c) => Value::Class(c),
            Subject::Object(o) => Value::Object(o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Static field, written `cf(Name)`.
    Class,
    /// Instance field, written `of(Name)`.
    Instance,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct FieldDecl {
    pub kind: FieldKind,
    pub name: String,
}

impl FieldDecl {
    pub fn class(name: impl Into<String>) -> Self {
        FieldDecl {
            kind: FieldKind::Class,
            name: name.into(),
        }
    }

    pub fn instance(name: impl Into<String>) -> Self {
        FieldDecl {
            kind: FieldKind::Instance,
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LocalVar {
    pub name: String,
    pub value: Value,
}

impl LocalVar {
    pub fn new(name: impl Into<String>, value: Value) -> Self {
        LocalVar {
            name: name.into(),
            value,
        }
    }
}

/// Where a thrown exception ended up.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Catch {
    At(Location),
    Uncaught,
}

/// Payload of one recorded event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExecutionEvent {
    MethodCall {
        location: Location,
        subject: Subject,
        name: String,
        args: Vec<Value>,
    },
    MethodExit {
        call_id: EventId,
        location: Location,
        subject: Subject,
        name: String,
        return_value: Value,
    },
    SetField {
        location: Location,
        subject: Subject,
        field_name: String,
        value: Value,
    },
    DataStructure {
        location: Location,
        contents: Vec<Value>,
    },
    Step {
        location: Location,
        locals: Vec<LocalVar>,
    },
    Exception {
        location: Location,
        instance: ObjectRef,
        message: Value,
        catch: Catch,
    },
    ThreadStart {
        group: String,
    },
    ThreadDeath {
        group: String,
    },
    MemberFields {
        class_name: String,
        fields: Vec<FieldDecl>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    MethodCall,
    MethodExit,
    SetField,
    DataStructure,
    Step,
    Exception,
    ThreadStart,
    ThreadDeath,
    MemberFields,
}

impl EventKind {
    pub const ALL: [EventKind; 9] = [
        EventKind::MethodCall,
        EventKind::MethodExit,
        EventKind::SetField,
        EventKind::DataStructure,
        EventKind::Step,
        EventKind::Exception,
        EventKind::ThreadStart,
        EventKind::ThreadDeath,
        EventKind::MemberFields,
    ];

    /// The JEL functor for this kind.
    pub fn functor(self) -> &'static str {
        match self {
            EventKind::MethodCall => "methodcall",
            EventKind::MethodExit => "methodexit",
            EventKind::SetField => "setfield",
            EventKind::DataStructure => "datastructure",
            EventKind::Step => "step",
            EventKind::Exception => "exception",
            EventKind::ThreadStart => "threadstart",
            EventKind::ThreadDeath => "threaddeath",
            EventKind::MemberFields => "memberfields",
        }
    }

    pub fn from_functor(s: &str) -> Option<Self> {
        EventKind::ALL.into_iter().find(|k| k.functor() == s)
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.functor())
    }
}

impl ExecutionEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            ExecutionEvent::MethodCall { .. } => EventKind::MethodCall,
            ExecutionEvent::MethodExit { .. } => EventKind::MethodExit,
            ExecutionEvent::SetField { .. } => EventKind::SetField,
            ExecutionEvent::DataStructure { .. } => EventKind::DataStructure,
            ExecutionEvent::Step { .. } => EventKind::Step,
            ExecutionEvent::Exception { .. } => EventKind::Exception,
            ExecutionEvent::ThreadStart { .. } => EventKind::ThreadStart,
            ExecutionEvent::ThreadDeath { .. } => EventKind::ThreadDeath,
            ExecutionEvent::MemberFields { .. } => EventKind::MemberFields,
        }
    }

    pub fn location(&self) -> Option<&Location> {
        match self {
            ExecutionEvent::MethodCall { location, .. }
            | ExecutionEvent::MethodExit { location, .. }
            | ExecutionEvent::SetField { location, .. }
            | ExecutionEvent::DataStructure { location, .. }
            | ExecutionEvent::Step { location, .. }
            | ExecutionEvent::Exception { location, .. } => Some(location),
            _ => None,
        }
    }

    /// Receiver/owner for calls, exits and field writes; the thrown instance
    /// for exceptions; the declaring class for member-field records.
    pub fn subject(&self) -> Option<Subject> {
        match self {
            ExecutionEvent::MethodCall { subject, .. }
            | ExecutionEvent::MethodExit { subject, .. }
            | ExecutionEvent::SetField { subject, .. } => Some(subject.clone()),
            ExecutionEvent::Exception { instance, .. } => Some(Subject::Object(instance.clone())),
            ExecutionEvent::MemberFields { class_name, .. } => {
                Some(Subject::Class(class_name.clone()))
            }
            _ => None,
        }
    }

    fn subject_class(&self) -> Option<&str> {
        match self {
            ExecutionEvent::MethodCall { subject, .. }
            | ExecutionEvent::MethodExit { subject, .. }
            | ExecutionEvent::SetField { subject, .. } => Some(subject.class_name()),
            ExecutionEvent::Exception { instance, .. } => Some(&instance.class_name),
            ExecutionEvent::MemberFields { class_name, .. } => Some(class_name),
            _ => None,
        }
    }

    fn subject_matches(&self, want: &Subject) -> bool {
        match (self, want) {
            (ExecutionEvent::MethodCall { subject, .. }, _)
            | (ExecutionEvent::MethodExit { subject, .. }, _)
            | (ExecutionEvent::SetField { subject, .. }, _) => subject == want,
            (ExecutionEvent::Exception { instance, .. }, Subject::Object(o)) => instance == o,
            (ExecutionEvent::MemberFields { class_name, .. }, Subject::Class(c)) => class_name == c,
            _ => false,
        }
    }

    /// Method name, field name, or thread group, depending on the kind.
    pub fn name(&self) -> Option<&str> {
        match self {
            ExecutionEvent::MethodCall { name, .. } | ExecutionEvent::MethodExit { name, .. } => {
                Some(name)
            }
            ExecutionEvent::SetField { field_name, .. } => Some(field_name),
            ExecutionEvent::ThreadStart { group } | ExecutionEvent::ThreadDeath { group } => {
                Some(group)
            }
            _ => None,
        }
    }

    /// Return value, assigned value, or exception message.
    pub fn value(&self) -> Option<&Value> {
        match self {
            ExecutionEvent::MethodExit { return_value, .. } => Some(return_value),
            ExecutionEvent::SetField { value, .. } => Some(value),
            ExecutionEvent::Exception { message, .. } => Some(message),
            _ => None,
        }
    }

    pub fn args(&self) -> Option<&[Value]> {
        match self {
            ExecutionEvent::MethodCall { args, .. } => Some(args),
            _ => None,
        }
    }

    pub fn call_id(&self) -> Option<EventId> {
        match self {
            ExecutionEvent::MethodExit { call_id, .. } => Some(*call_id),
            _ => None,
        }
    }

    pub fn is_uncaught_exception(&self) -> bool {
        matches!(
            self,
            ExecutionEvent::Exception {
                catch: Catch::Uncaught,
                ..
            }
        )
    }
}

/// One `event(Id, Thread, Payload).` fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TraceEvent {
    pub id: EventId,
    pub thread: String,
    #[serde(flatten)]
    pub event: ExecutionEvent,
}

impl TraceEvent {
    pub fn new(id: impl Into<EventId>, thread: impl Into<String>, event: ExecutionEvent) -> Self {
        TraceEvent {
            id: id.into(),
            thread: thread.into(),
            event,
        }
    }

    pub fn kind(&self) -> EventKind {
        self.event.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CatchFilter {
    Uncaught,
    /// Caught anywhere.
    Caught,
    At(Location),
}

impl CatchFilter {
    fn accepts(&self, catch: &Catch) -> bool {
        match (self, catch) {
            (CatchFilter::Uncaught, Catch::Uncaught) => true,
            (CatchFilter::Caught, Catch::At(_)) => true,
            (CatchFilter::At(want), Catch::At(loc)) => want == loc,
            _ => false,
        }
    }
}

/// A conjunction of optional constraints over a single event. Absent
/// constraints are wildcards; a constraint on a field the event does not
/// carry never matches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct EventPattern {
    pub kind: Option<EventKind>,
    pub thread: Option<String>,
    pub subject: Option<Subject>,
    pub class_name: Option<String>,
    pub name: Option<String>,
    pub arg_count: Option<usize>,
    /// Per-position argument constraints; `None` entries are wildcards.
    pub args: Option<Vec<Option<Value>>>,
    pub value: Option<Value>,
    pub call_id: Option<EventId>,
    pub location: Option<Location>,
    pub catch: Option<CatchFilter>,
    pub min_id: Option<EventId>,
    pub max_id: Option<EventId>,
}

impl EventPattern {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn kind(mut self, kind: EventKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn thread(mut self, thread: impl Into<String>) -> Self {
        self.thread = Some(thread.into());
        self
    }

    pub fn subject(mut self, subject: Subject) -> Self {
        self.subject = Some(subject);
        self
    }

    pub fn class_name(mut self, class_name: impl Into<String>) -> Self {
        self.class_name = Some(class_name.into());
        self
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn value(mut self, value: Value) -> Self {
        self.value = Some(value);
        self
    }

    pub fn call_id(mut self, id: impl Into<EventId>) -> Self {
        self.call_id = Some(id.into());
        self
    }

    pub fn location(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }

    pub fn catch(mut self, catch: CatchFilter) -> Self {
        self.catch = Some(catch);
        self
    }

    pub fn id_range(mut self, lo: impl Into<EventId>, hi: impl Into<EventId>) -> Self {
        self.min_id = Some(lo.into());
        self.max_id = Some(hi.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn matches(&self, e: &TraceEvent) -> bool {
        let ev = &e.event;
        if self.kind.is_some_and(|k| k != ev.kind()) {
            return false;
        }
        if self.min_id.is_some_and(|lo| e.id < lo) || self.max_id.is_some_and(|hi| e.id > hi) {
            return false;
        }
        if let Some(t) = &self.thread {
            if *t != e.thread {
                return false;
            }
        }
        if let Some(s) = &self.subject {
            if !ev.subject_matches(s) {
                return false;
            }
        }
        if let Some(c) = &self.class_name {
            if ev.subject_class() != Some(c.as_str()) {
                return false;
            }
        }
        if let Some(n) = &self.name {
            if ev.name() != Some(n.as_str()) {
                return false;
            }
        }
        if let Some(n) = self.arg_count {
            if ev.args().map(<[Value]>::len) != Some(n) {
                return false;
            }
        }
        if let Some(want) = &self.args {
            let Some(args) = ev.args() else { return false };
            if args.len() != want.len() {
                return false;
            }
            if !want
                .iter()
                .zip(args)
                .all(|(w, a)| w.as_ref().is_none_or(|w| w == a))
            {
                return false;
            }
        }
        if let Some(v) = &self.value {
            if ev.value() != Some(v) {
                return false;
            }
        }
        if let Some(c) = self.call_id {
            if ev.call_id() != Some(c) {
                return false;
            }
        }
        if let Some(l) = &self.location {
            if ev.location() != Some(l) {
                return false;
            }
        }
        if let Some(c) = &self.catch {
            match ev {
                ExecutionEvent::Exception { catch, .. } if c.accepts(catch) => {}
                _ => return false,
            }
        }
        true
    }
}

pub fn matches(p: &EventPattern, e: &TraceEvent) -> bool {
    p.matches(e)
}
