//! Seeded synthetic traces and a replay-based ground truth.
//!
//! [`generate`] simulates a handful of threads calling methods, writing
//! fields, stepping through lines and occasionally dying of an uncaught
//! exception. [`GroundTruth::replay`] then walks the emitted events forward
//! once, maintaining explicit per-thread activation stacks and a write log.
//! The `oracle_*` functions answer queries from that replay and share no
//! code with [`crate::query`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    Catch, EventId, ExecutionEvent, FieldDecl, FieldKind, LocalVar, Location, ObjectRef, Subject,
    TraceEvent, Value,
};
use crate::query::{CallTree, Terminator, ThreadStatus, CONSTRUCTOR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no event with id {0} in the ground truth")]
    NotFound(EventId),
    #[error("{0} was not instantiated before the requested event")]
    NotInstantiated(ObjectRef),
}

pub const MAX_THREADS: usize = 4;
pub const MAX_EVENTS: usize = 50_000;
pub const MAX_CALL_DEPTH: usize = 32;

const THREAD_NAMES: [&str; MAX_THREADS] = ["main", "worker-1", "worker-2", "worker-3"];
const CLASS_NAMES: [&str; 12] = [
    "Account", "Ledger", "Node", "Parser", "Buffer", "Session", "Widget", "Counter", "Router",
    "Cache", "Matrix", "Queue",
];
const INSTANCE_FIELDS: [&str; 10] = [
    "value", "next", "size", "owner", "balance", "label", "left", "right", "data", "state",
];
const CLASS_FIELDS: [&str; 5] = ["COUNT", "INSTANCES", "DEFAULT", "LIMIT", "VERSION"];
const METHOD_NAMES: [&str; 12] = [
    "run", "compute", "update", "get", "put", "process", "apply", "size", "verify", "getText",
    "login", "reset",
];
const LOCAL_NAMES: [&str; 8] = ["x", "y", "tmp", "result", "count", "name", "node", "acc"];
const WORDS: [&str; 6] = ["alice", "secret", "ok", "true", "false", "empty"];
const EXCEPTIONS: [&str; 3] = [
    "java.lang.NullPointerException",
    "java.lang.IllegalStateException",
    "java.io.IOException",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub threads: usize,
    pub max_events: usize,
    pub max_call_depth: usize,
    /// Inclusive range for the number of classes in play.
    pub class_count: (usize, usize),
    /// Inclusive range for declared fields per class.
    pub field_count: (usize, usize),
    /// Inclusive range for steps emitted by one loop.
    pub loop_iterations: (usize, usize),
    pub uncaught_exception_probability: f64,
    /// Chance that a thread without an uncaught exception never records
    /// its death.
    pub running_thread_probability: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 1,
            threads: 2,
            max_events: 2000,
            max_call_depth: 8,
            class_count: (2, 6),
            field_count: (0, 4),
            loop_iterations: (1, 6),
            uncaught_exception_probability: 0.3,
            running_thread_probability: 0.1,
        }
    }
}

impl GenConfig {
    /// Smallest legal shape: one thread, one constructor call, no exception.
    pub fn minimal(seed: u64) -> Self {
        GenConfig {
            seed,
            threads: 1,
            max_events: 5,
            max_call_depth: 1,
            class_count: (1, 1),
            field_count: (0, 0),
            loop_iterations: (0, 0),
            uncaught_exception_probability: 0.0,
            running_thread_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidConfig(m));
        if !(1..=MAX_THREADS).contains(&self.threads) {
            return bad(format!("threads must be in 1..={MAX_THREADS}"));
        }
        if self.max_events > MAX_EVENTS {
            return bad(format!("max_events must be at most {MAX_EVENTS}"));
        }
        if self.max_events < 5 * self.threads {
            return bad(format!(
                "max_events must be at least {} for {} thread(s)",
                5 * self.threads,
                self.threads
            ));
        }
        if !(1..=MAX_CALL_DEPTH).contains(&self.max_call_depth) {
            return bad(format!("max_call_depth must be in 1..={MAX_CALL_DEPTH}"));
        }
        for (name, (lo, hi)) in [
            ("class_count", self.class_count),
            ("field_count", self.field_count),
            ("loop_iterations", self.loop_iterations),
        ] {
            if lo > hi {
                return bad(format!("{name} range is empty"));
            }
        }
        if self.class_count.0 == 0 || self.class_count.1 > CLASS_NAMES.len() {
            return bad(format!("class_count must lie in 1..={}", CLASS_NAMES.len()));
        }
        if self.field_count.1 > INSTANCE_FIELDS.len() {
            return bad(format!("field_count must be at most {}", INSTANCE_FIELDS.len()));
        }
        for (name, p) in [
            ("uncaught_exception_probability", self.uncaught_exception_probability),
            ("running_thread_probability", self.running_thread_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

struct ClassInfo {
    name: &'static str,
    fields: Vec<FieldDecl>,
    declared: bool,
}

impl ClassInfo {
    fn file(&self) -> String {
        format!("{}.java", self.name)
    }

    fn fields_of(&self, kind: FieldKind) -> Vec<&FieldDecl> {
        self.fields.iter().filter(|f| f.kind == kind).collect()
    }
}

struct Frame {
    call_id: EventId,
    subject: Subject,
    name: String,
    class: usize,
    locals: Vec<LocalVar>,
}

#[derive(PartialEq)]
enum Phase {
    Body,
    Closing,
    Done,
}

struct ThreadSim {
    name: &'static str,
    stack: Vec<Frame>,
    phase: Phase,
    doomed: bool,
    thrown: bool,
    running: bool,
    body_budget: usize,
}

impl ThreadSim {
    /// Events this thread still has to emit to wind down legally.
    fn closing_cost(&self) -> usize {
        match self.phase {
            Phase::Done => 0,
            _ if self.doomed && !self.thrown => 2,
            _ if self.doomed => 1,
            _ => self.stack.len() + usize::from(!self.running),
        }
    }
}

struct Sim {
    cfg: GenConfig,
    rng: ChaCha8Rng,
    classes: Vec<ClassInfo>,
    objects: Vec<(ObjectRef, usize)>,
    threads: Vec<ThreadSim>,
    events: Vec<TraceEvent>,
    next_id: u64,
    next_object: u64,
}

enum Action {
    Call,
    Return,
    SetField,
    Step,
    Loop,
    CaughtException,
}

impl Sim {
    fn emit(&mut self, thread: usize, event: ExecutionEvent) -> EventId {
        let id = EventId(self.next_id);
        self.next_id += if self.rng.random_bool(0.05) {
            self.rng.random_range(2..=4)
        } else {
            1
        };
        self.events.push(TraceEvent {
            id,
            thread: self.threads[thread].name.to_string(),
            event,
        });
        id
    }

    fn reserve(&self) -> usize {
        self.threads.iter().map(ThreadSim::closing_cost).sum()
    }

    fn fits(&self, cost: usize, extra_reserve: usize) -> bool {
        self.events.len() + cost + self.reserve() + extra_reserve <= self.cfg.max_events
    }

    fn location(&mut self, class: usize) -> Location {
        let line = self.rng.random_range(1..=200);
        Location::new(self.classes[class].file(), line)
    }

    fn fresh_object(&mut self, class_name: &str) -> ObjectRef {
        self.next_object += self.rng.random_range(1..=3);
        ObjectRef::new(class_name, self.next_object)
    }

    fn random_value(&mut self) -> Value {
        match self.rng.random_range(0..100) {
            0..15 => Value::Null,
            15..55 => Value::Scalar(self.rng.random_range(-100..1000).to_string()),
            55..70 => Value::Scalar(WORDS.choose(&mut self.rng).unwrap().to_string()),
            _ => match self.objects.choose(&mut self.rng) {
                Some((o, _)) => Value::Object(o.clone()),
                None => Value::Null,
            },
        }
    }

    fn random_args(&mut self) -> Vec<Value> {
        let n = self.rng.random_range(0..=3);
        (0..n).map(|_| self.random_value()).collect()
    }

    fn declare(&mut self, t: usize, class: usize) -> usize {
        if self.classes[class].declared {
            return 0;
        }
        self.classes[class].declared = true;
        let ev = ExecutionEvent::MemberFields {
            class_name: self.classes[class].name.to_string(),
            fields: self.classes[class].fields.clone(),
        };
        self.emit(t, ev);
        1
    }

    fn push_call(&mut self, t: usize, subject: Subject, name: String, class: usize) {
        let location = self.location(class);
        let args = self.random_args();
        let call_id = self.emit(
            t,
            ExecutionEvent::MethodCall {
                location,
                subject: subject.clone(),
                name: name.clone(),
                args,
            },
        );
        self.threads[t].stack.push(Frame {
            call_id,
            subject,
            name,
            class,
            locals: Vec::new(),
        });
    }

    fn construct(&mut self, t: usize, class: usize) {
        self.declare(t, class);
        let obj = self.fresh_object(self.classes[class].name);
        self.objects.push((obj.clone(), class));
        self.push_call(t, Subject::Object(obj), CONSTRUCTOR.to_string(), class);
    }

    fn pop_call(&mut self, t: usize) {
        let frame = self.threads[t].stack.pop().expect("frame to return from");
        let return_value = if frame.name == CONSTRUCTOR || self.rng.random_bool(0.2) {
            Value::Void
        } else {
            self.random_value()
        };
        let location = self.location(frame.class);
        self.emit(
            t,
            ExecutionEvent::MethodExit {
                call_id: frame.call_id,
                location,
                subject: frame.subject,
                name: frame.name,
                return_value,
            },
        );
    }

    fn choose_action(&mut self, t: usize) -> Action {
        let depth = self.threads[t].stack.len();
        loop {
            let a = match self.rng.random_range(0..100) {
                0..28 => Action::Call,
                28..52 => Action::Return,
                52..67 => Action::SetField,
                67..85 => Action::Step,
                85..93 => Action::Loop,
                _ => Action::CaughtException,
            };
            match a {
                Action::Call if depth >= self.cfg.max_call_depth => continue,
                Action::Return if depth <= 1 => continue,
                _ => return a,
            }
        }
    }

    /// Runs one body action for thread `t`; returns false when the budget
    /// does not allow it.
    fn body_action(&mut self, t: usize) -> bool {
        let doomed = self.threads[t].doomed;
        let push_reserve = usize::from(!doomed);
        match self.choose_action(t) {
            Action::Call => {
                let kind = self.rng.random_range(0..3);
                let class = self.rng.random_range(0..self.classes.len());
                if kind == 0 || self.objects.is_empty() {
                    let cost = 1 + usize::from(!self.classes[class].declared);
                    if !self.fits(cost, push_reserve) {
                        return false;
                    }
                    self.construct(t, class);
                } else {
                    if !self.fits(1, push_reserve) {
                        return false;
                    }
                    let name = METHOD_NAMES.choose(&mut self.rng).unwrap().to_string();
                    if kind == 1 {
                        let (obj, class) = self.objects.choose(&mut self.rng).unwrap().clone();
                        self.push_call(t, Subject::Object(obj), name, class);
                    } else {
                        let subject = Subject::class(self.classes[class].name);
                        self.push_call(t, subject, name, class);
                    }
                }
            }
            Action::Return => {
                // Returning lowers the reserve by the same amount it costs.
                if !self.fits(if doomed { 1 } else { 0 }, 0) {
                    return false;
                }
                self.pop_call(t);
            }
            Action::SetField => {
                let frame = self.threads[t].stack.last().expect("body frame");
                let class = frame.class;
                let on_object = match &frame.subject {
                    Subject::Object(o) => Some(o.clone()),
                    Subject::Class(_) => None,
                };
                let info = &self.classes[class];
                let instance = info.fields_of(FieldKind::Instance);
                let statics = info.fields_of(FieldKind::Class);
                let (subject, field) = match (&on_object, instance.is_empty(), statics.is_empty()) {
                    (Some(o), false, _) if statics.is_empty() || self.rng.random_bool(0.8) => (
                        Subject::Object(o.clone()),
                        instance.choose(&mut self.rng).unwrap().name.clone(),
                    ),
                    (_, _, false) => (
                        Subject::class(info.name),
                        statics.choose(&mut self.rng).unwrap().name.clone(),
                    ),
                    _ => return self.step(t),
                };
                let array = self.rng.random_bool(0.2);
                if !self.fits(1 + usize::from(array), 0) {
                    return false;
                }
                let location = self.location(class);
                let value = if array {
                    Value::Object(self.fresh_object("int[]"))
                } else {
                    self.random_value()
                };
                self.emit(
                    t,
                    ExecutionEvent::SetField {
                        location: location.clone(),
                        subject,
                        field_name: field,
                        value,
                    },
                );
                if array {
                    let n = self.rng.random_range(0..=4);
                    let contents = (0..n)
                        .map(|_| Value::Scalar(self.rng.random_range(0..100).to_string()))
                        .collect();
                    self.emit(t, ExecutionEvent::DataStructure { location, contents });
                }
            }
            Action::Step => return self.step(t),
            Action::Loop => {
                let (lo, hi) = self.cfg.loop_iterations;
                let want = self.rng.random_range(lo..=hi);
                if want == 0 {
                    return self.step(t);
                }
                let room = self
                    .cfg
                    .max_events
                    .saturating_sub(self.events.len() + self.reserve());
                let n = want.min(room);
                if n == 0 {
                    return false;
                }
                let class = self.threads[t].stack.last().expect("body frame").class;
                let location = self.location(class);
                for i in 0..n {
                    let frame = self.threads[t].stack.last_mut().expect("body frame");
                    set_local(&mut frame.locals, "i", Value::Scalar(i.to_string()));
                    let locals = frame.locals.clone();
                    self.emit(
                        t,
                        ExecutionEvent::Step {
                            location: location.clone(),
                            locals,
                        },
                    );
                }
            }
            Action::CaughtException => {
                if !self.fits(1, 0) {
                    return false;
                }
                let class = self.threads[t].stack.last().expect("body frame").class;
                let cls = *EXCEPTIONS.choose(&mut self.rng).unwrap();
                let instance = self.fresh_object(cls);
                let location = self.location(class);
                let handler = self.location(class);
                let message = if self.rng.random_bool(0.5) {
                    Value::Null
                } else {
                    Value::Scalar("failed".into())
                };
                self.emit(
                    t,
                    ExecutionEvent::Exception {
                        location,
                        instance,
                        message,
                        catch: Catch::At(handler),
                    },
                );
            }
        }
        true
    }

    fn step(&mut self, t: usize) -> bool {
        if !self.fits(1, 0) {
            return false;
        }
        if self.rng.random_bool(0.6) {
            let name = *LOCAL_NAMES.choose(&mut self.rng).unwrap();
            let value = self.random_value();
            let frame = self.threads[t].stack.last_mut().expect("body frame");
            set_local(&mut frame.locals, name, value);
        }
        let class = self.threads[t].stack.last().expect("body frame").class;
        let location = self.location(class);
        let locals = self.threads[t].stack.last().expect("body frame").locals.clone();
        self.emit(t, ExecutionEvent::Step { location, locals });
        true
    }

    fn close_step(&mut self, t: usize) {
        let th = &self.threads[t];
        if th.doomed && !th.thrown {
            let class = th.stack.last().map_or(0, |f| f.class);
            let cls = *EXCEPTIONS.choose(&mut self.rng).unwrap();
            let instance = self.fresh_object(cls);
            let location = self.location(class);
            self.emit(
                t,
                ExecutionEvent::Exception {
                    location,
                    instance,
                    message: Value::Null,
                    catch: Catch::Uncaught,
                },
            );
            self.threads[t].thrown = true;
            self.threads[t].stack.clear();
        } else if !th.stack.is_empty() {
            self.pop_call(t);
        } else {
            if !th.running {
                let group = th.name.to_string();
                self.emit(t, ExecutionEvent::ThreadDeath { group });
            }
            self.threads[t].phase = Phase::Done;
        }
    }
}

fn set_local(locals: &mut Vec<LocalVar>, name: &str, value: Value) {
    match locals.iter_mut().find(|lv| lv.name == name) {
        Some(lv) => lv.value = value,
        None => locals.push(LocalVar::new(name, value)),
    }
}

/// Generates a well-formed trace and its replayed ground truth. The same
/// config always yields the same events.
pub fn generate(cfg: &GenConfig) -> Result<(Vec<TraceEvent>, GroundTruth), GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let class_total = rng.random_range(cfg.class_count.0..=cfg.class_count.1);
    let classes = CLASS_NAMES[..class_total]
        .iter()
        .map(|&name| {
            let n = rng.random_range(cfg.field_count.0..=cfg.field_count.1);
            let mut instance = INSTANCE_FIELDS.to_vec();
            let mut statics = CLASS_FIELDS.to_vec();
            let mut fields = Vec::with_capacity(n);
            for _ in 0..n {
                let use_static = !statics.is_empty() && rng.random_bool(0.25);
                let pool = if use_static { &mut statics } else { &mut instance };
                let name = pool.remove(rng.random_range(0..pool.len()));
                fields.push(if use_static {
                    FieldDecl::class(name)
                } else {
                    FieldDecl::instance(name)
                });
            }
            ClassInfo {
                name,
                fields,
                declared: false,
            }
        })
        .collect();

    let per_thread = cfg.max_events / cfg.threads;
    let threads = THREAD_NAMES[..cfg.threads]
        .iter()
        .map(|&name| {
            let doomed = rng.random_bool(cfg.uncaught_exception_probability);
            let running = !doomed && rng.random_bool(cfg.running_thread_probability);
            ThreadSim {
                name,
                stack: Vec::new(),
                phase: Phase::Body,
                doomed,
                thrown: false,
                running,
                body_budget: rng.random_range(per_thread / 2..=per_thread),
            }
        })
        .collect();

    let mut sim = Sim {
        cfg: cfg.clone(),
        rng,
        classes,
        objects: Vec::new(),
        threads,
        events: Vec::new(),
        next_id: 0,
        next_object: 600,
    };

    for t in 0..cfg.threads {
        let group = sim.threads[t].name.to_string();
        sim.emit(t, ExecutionEvent::ThreadStart { group });
        let class = sim.rng.random_range(0..sim.classes.len());
        sim.construct(t, class);
    }

    loop {
        let live: Vec<usize> = (0..cfg.threads)
            .filter(|&t| sim.threads[t].phase != Phase::Done)
            .collect();
        let Some(&t) = live.choose(&mut sim.rng) else {
            break;
        };
        if sim.threads[t].phase == Phase::Body {
            let before = sim.events.len();
            if sim.threads[t].body_budget == 0 || !sim.body_action(t) {
                sim.threads[t].phase = Phase::Closing;
                continue;
            }
            let used = sim.events.len() - before;
            sim.threads[t].body_budget = sim.threads[t].body_budget.saturating_sub(used);
        } else {
            sim.close_step(t);
        }
    }

    let truth = GroundTruth::replay(&sim.events);
    Ok((sim.events, truth))
}

#[derive(Debug, Clone)]
struct CallRecord {
    event: TraceEvent,
    children: Vec<EventId>,
    terminator: Option<Terminator>,
}

#[derive(Debug, Clone)]
struct Write {
    id: EventId,
    subject: Subject,
    field: String,
    value: Value,
}

/// Facts recovered by one forward pass over a trace.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    ids: Vec<EventId>,
    /// Enclosing call ids (outermost first) at each event position.
    stacks: Vec<Vec<EventId>>,
    calls: BTreeMap<EventId, CallRecord>,
    writes: Vec<Write>,
    steps: Vec<(EventId, String, Vec<LocalVar>)>,
    exits: Vec<(EventId, Subject, String, Value)>,
    structures: Vec<(EventId, Location, Vec<Value>)>,
    constructed: HashMap<ObjectRef, EventId>,
    declared: HashMap<String, Vec<FieldDecl>>,
    threads: BTreeMap<String, ThreadStatus>,
}

impl GroundTruth {
    /// Replays a trace with explicit per-thread stacks: a call is pushed
    /// after the event is recorded, an exit pops its call before, and an
    /// uncaught exception sees the full stack and then empties it.
    pub fn replay(events: &[TraceEvent]) -> Self {
        let mut gt = GroundTruth::default();
        let mut stacks: HashMap<&str, Vec<EventId>> = HashMap::new();
        for e in events {
            let stack = stacks.entry(e.thread.as_str()).or_default();
            gt.threads
                .entry(e.thread.clone())
                .or_insert(ThreadStatus::Running);
            match &e.event {
                ExecutionEvent::MethodCall { subject, name, .. } => {
                    gt.stacks.push(stack.clone());
                    if let Some(parent) = stack.last() {
                        gt.calls
                            .get_mut(parent)
                            .expect("parent call recorded")
                            .children
                            .push(e.id);
                    }
                    gt.calls.insert(
                        e.id,
                        CallRecord {
                            event: e.clone(),
                            children: Vec::new(),
                            terminator: None,
                        },
                    );
                    if name == CONSTRUCTOR {
                        if let Subject::Object(o) = subject {
                            gt.constructed.entry(o.clone()).or_insert(e.id);
                        }
                    }
                    stack.push(e.id);
                }
                ExecutionEvent::MethodExit {
                    call_id,
                    subject,
                    name,
                    return_value,
                    ..
                } => {
                    gt.exits
                        .push((e.id, subject.clone(), name.clone(), return_value.clone()));
                    if let Some(pos) = stack.iter().rposition(|c| c == call_id) {
                        stack.remove(pos);
                    }
                    if let Some(rec) = gt.calls.get_mut(call_id) {
                        rec.terminator = Some(Terminator::ExitedAt(e.id));
                    }
                    gt.stacks.push(stack.clone());
                }
                ExecutionEvent::Exception {
                    catch: Catch::Uncaught,
                    ..
                } => {
                    gt.stacks.push(stack.clone());
                    for c in stack.drain(..) {
                        if let Some(rec) = gt.calls.get_mut(&c) {
                            rec.terminator = Some(Terminator::KilledByUncaught(e.id));
                        }
                    }
                }
                other => {
                    gt.stacks.push(stack.clone());
                    match other {
                        ExecutionEvent::SetField {
                            subject,
                            field_name,
                            value,
                            ..
                        } => gt.writes.push(Write {
                            id: e.id,
                            subject: subject.clone(),
                            field: field_name.clone(),
                            value: value.clone(),
                        }),
                        ExecutionEvent::MemberFields { class_name, fields } => {
                            gt.declared
                                .entry(class_name.clone())
                                .or_insert_with(|| fields.clone());
                        }
                        ExecutionEvent::ThreadDeath { .. } => {
                            gt.threads.insert(e.thread.clone(), ThreadStatus::Exited);
                        }
                        ExecutionEvent::Step { locals, .. } => {
                            gt.steps.push((e.id, e.thread.clone(), locals.clone()));
                        }
                        ExecutionEvent::DataStructure { location, contents } => {
                            gt.structures
                                .push((e.id, location.clone(), contents.clone()));
                        }
                        _ => {}
                    }
                }
            }
            gt.ids.push(e.id);
        }
        gt
    }

    fn position(&self, id: EventId) -> Result<usize, GenError> {
        self.ids.binary_search(&id).map_err(|_| GenError::NotFound(id))
    }

    pub fn event_ids(&self) -> &[EventId] {
        &self.ids
    }

    pub fn call_ids(&self) -> impl Iterator<Item = EventId> + '_ {
        self.calls.keys().copied()
    }

    pub fn objects(&self) -> impl Iterator<Item = (&ObjectRef, EventId)> {
        self.constructed.iter().map(|(o, &id)| (o, id))
    }

    /// Ground-truth terminator of a call.
    pub fn terminator(&self, call_id: EventId) -> Option<Terminator> {
        self.calls.get(&call_id).and_then(|c| c.terminator)
    }
}

pub fn oracle_call_chain(gt: &GroundTruth, id: EventId) -> Result<Vec<EventId>, GenError> {
    Ok(gt.stacks[gt.position(id)?].clone())
}

pub fn oracle_call_tree(gt: &GroundTruth, call_id: EventId) -> Result<CallTree, GenError> {
    let rec = gt.calls.get(&call_id).ok_or(GenError::NotFound(call_id))?;
    Ok(CallTree {
        root: rec.event.clone(),
        terminator: rec.terminator,
        children: rec
            .children
            .iter()
            .map(|&c| oracle_call_tree(gt, c))
            .collect::<Result<_, _>>()?,
    })
}

/// Field name to last `(write id, value)` between the object's
/// construction and `end`; `None` marks a field never written.
pub type FieldMap = BTreeMap<String, Option<(EventId, Value)>>;

pub fn oracle_object_state(
    gt: &GroundTruth,
    end: EventId,
    obj: &ObjectRef,
) -> Result<FieldMap, GenError> {
    let start = gt
        .constructed
        .get(obj)
        .copied()
        .filter(|&s| s <= end)
        .ok_or_else(|| GenError::NotInstantiated(obj.clone()))?;
    let decls = gt.declared.get(&obj.class_name).cloned().unwrap_or_default();
    let mut state: FieldMap = decls.iter().map(|d| (d.name.clone(), None)).collect();
    let owner = |kind: FieldKind| match kind {
        FieldKind::Instance => Subject::Object(obj.clone()),
        FieldKind::Class => Subject::Class(obj.class_name.clone()),
    };
    for w in &gt.writes {
        if w.id < start {
            continue;
        }
        if w.id > end {
            break;
        }
        if decls
            .iter()
            .any(|d| d.name == w.field && owner(d.kind) == w.subject)
        {
            state.insert(w.field.clone(), Some((w.id, w.value.clone())));
        }
    }
    Ok(state)
}

fn descendants(gt: &GroundTruth, root: EventId, out: &mut BTreeSet<EventId>) {
    if let Some(rec) = gt.calls.get(&root) {
        for &c in &rec.children {
            out.insert(c);
            descendants(gt, c, out);
        }
    }
}

fn completed_descendants(
    gt: &GroundTruth,
    id: EventId,
    keep: impl Fn(EventId, EventId) -> bool,
) -> Result<Option<Vec<(EventId, EventId)>>, GenError> {
    let Some(&enclosing) = gt.stacks[gt.position(id)?].last() else {
        return Ok(None);
    };
    let mut all = BTreeSet::new();
    descendants(gt, enclosing, &mut all);
    Ok(Some(
        all.into_iter()
            .filter_map(|c| match gt.terminator(c) {
                Some(Terminator::ExitedAt(x)) if keep(c, x) => Some((c, x)),
                _ => None,
            })
            .collect(),
    ))
}

/// Completed descendant activations of the innermost call enclosing `id`
/// that both start and finish before `id`. `None` when `id` is top-level.
pub fn oracle_pre_called(
    gt: &GroundTruth,
    id: EventId,
) -> Result<Option<Vec<(EventId, EventId)>>, GenError> {
    completed_descendants(gt, id, |c, x| c < id && x < id)
}

pub fn oracle_post_called(
    gt: &GroundTruth,
    id: EventId,
) -> Result<Option<Vec<(EventId, EventId)>>, GenError> {
    completed_descendants(gt, id, |c, x| c > id && x > id)
}

/// Writes to `field` of `subject` with ids in `[start, end]`.
pub fn oracle_field_history(
    gt: &GroundTruth,
    start: EventId,
    end: EventId,
    subject: &Subject,
    field: &str,
) -> Vec<(EventId, Value)> {
    gt.writes
        .iter()
        .filter(|w| start <= w.id && w.id <= end && w.subject == *subject && w.field == field)
        .map(|w| (w.id, w.value.clone()))
        .collect()
}

pub fn oracle_local_history(
    gt: &GroundTruth,
    start: EventId,
    end: EventId,
    thread: &str,
    name: &str,
) -> Vec<(EventId, Value)> {
    let mut out = Vec::new();
    for (id, t, locals) in &gt.steps {
        if *id < start || *id > end || t != thread {
            continue;
        }
        if let Some(lv) = locals.iter().find(|lv| lv.name == name) {
            out.push((*id, lv.value.clone()));
        }
    }
    out
}

pub fn oracle_argument_history(
    gt: &GroundTruth,
    method: &str,
    subject: Option<&Subject>,
) -> Vec<(EventId, Vec<Value>)> {
    let mut out = Vec::new();
    for (id, rec) in &gt.calls {
        if let ExecutionEvent::MethodCall {
            subject: s,
            name,
            args,
            ..
        } = &rec.event.event
        {
            if name == method && subject.is_none_or(|want| want == s) {
                out.push((*id, args.clone()));
            }
        }
    }
    out
}

pub fn oracle_return_history(
    gt: &GroundTruth,
    method: &str,
    subject: Option<&Subject>,
) -> Vec<(EventId, Value)> {
    gt.exits
        .iter()
        .filter(|(_, s, name, _)| name == method && subject.is_none_or(|want| want == s))
        .map(|(id, _, _, v)| (*id, v.clone()))
        .collect()
}

pub fn oracle_ds_history(
    gt: &GroundTruth,
    start: EventId,
    end: EventId,
    at: Option<&Location>,
) -> Vec<(EventId, Vec<Value>)> {
    gt.structures
        .iter()
        .filter(|(id, loc, _)| start <= *id && *id <= end && at.is_none_or(|want| want == loc))
        .map(|(id, _, c)| (*id, c.clone()))
        .collect()
}

pub fn oracle_thread_status(gt: &GroundTruth) -> BTreeMap<String, ThreadStatus> {
    gt.threads.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jel::{parse_trace, serialize_trace};
    use crate::model::EventKind;
    use crate::store::TraceStore;

    #[test]
    fn minimal_skeleton() {
        let (events, _) = generate(&GenConfig::minimal(1)).unwrap();
        let kinds: Vec<_> = events.iter().map(TraceEvent::kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::ThreadStart,
                EventKind::MemberFields,
                EventKind::MethodCall,
                EventKind::MethodExit,
                EventKind::ThreadDeath
            ]
        );
        assert_eq!(events[2].event.name(), Some(CONSTRUCTOR));
    }

    #[test]
    fn always_uncaught() {
        for seed in 0..20 {
            let cfg = GenConfig {
                seed,
                threads: 3,
                uncaught_exception_probability: 1.0,
                ..GenConfig::default()
            };
            let (events, gt) = generate(&cfg).unwrap();
            let store = TraceStore::load(events.clone()).unwrap();
            for t in ["main", "worker-1", "worker-2"] {
                let evs: Vec<_> = store.thread_events(t).collect();
                let n = evs.len();
                assert!(evs[n - 2].event.is_uncaught_exception(), "seed {seed} thread {t}");
                assert_eq!(evs[n - 1].kind(), EventKind::ThreadDeath);
            }
            let pending = events
                .iter()
                .filter(|e| e.kind() == EventKind::MethodCall && store.exit_of(e.id).is_none())
                .count();
            assert!(pending >= 3);
            for c in gt.call_ids() {
                assert!(gt.terminator(c).is_some());
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = GenConfig {
            seed: 42,
            ..GenConfig::default()
        };
        let a = serialize_trace(&generate(&cfg).unwrap().0);
        let b = serialize_trace(&generate(&cfg).unwrap().0);
        assert_eq!(a, b);
        let c = serialize_trace(&generate(&GenConfig { seed: 43, ..cfg }).unwrap().0);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs() {
        let base = GenConfig::default();
        for cfg in [
            GenConfig { threads: 0, ..base.clone() },
            GenConfig { threads: 5, ..base.clone() },
            GenConfig { max_events: 50_001, ..base.clone() },
            GenConfig { max_events: 9, threads: 2, ..base.clone() },
            GenConfig { max_call_depth: 0, ..base.clone() },
            GenConfig { max_call_depth: 33, ..base.clone() },
            GenConfig { class_count: (3, 2), ..base.clone() },
            GenConfig { uncaught_exception_probability: 1.5, ..base.clone() },
        ] {
            assert!(matches!(generate(&cfg), Err(GenError::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn well_formed_and_bounded() {
        for seed in 0..60 {
            let cfg = GenConfig {
                seed,
                threads: 1 + (seed as usize % 4),
                max_events: 50 + (seed as usize * 37) % 3000,
                max_call_depth: 1 + (seed as usize % 10),
                ..GenConfig::default()
            };
            let (events, gt) = generate(&cfg).unwrap();
            assert!(events.len() <= cfg.max_events, "seed {seed}");
            let store = TraceStore::load(events.clone()).expect("loads");
            assert_eq!(parse_trace(&serialize_trace(&events)).unwrap(), events);
            for t in store.threads() {
                let first = store.thread_events(t).next().unwrap();
                assert_eq!(first.kind(), EventKind::ThreadStart);
                let deaths = store.thread_events(t).filter(|e| e.kind() == EventKind::ThreadDeath).count();
                assert!(deaths <= 1);
                if deaths == 1 {
                    assert_eq!(store.thread_events(t).last().unwrap().kind(), EventKind::ThreadDeath);
                }
            }
            // Member fields precede the first construction of every class.
            let mut declared = std::collections::HashSet::new();
            for e in &events {
                match &e.event {
                    ExecutionEvent::MemberFields { class_name, .. } => {
                        declared.insert(class_name.clone());
                    }
                    ExecutionEvent::MethodCall { subject: Subject::Object(o), name, .. }
                        if name == CONSTRUCTOR =>
                    {
                        assert!(declared.contains(&o.class_name), "seed {seed}: {}", e);
                    }
                    _ => {}
                }
            }
            for c in gt.call_ids() {
                assert!(gt.terminator(c).is_some(), "seed {seed}: call {c} never ends");
            }
            let max_depth = gt.stacks.iter().map(Vec::len).max().unwrap_or(0);
            assert!(max_depth < cfg.max_call_depth + 1);
        }
    }

    #[test]
    fn replay_of_fixture() {
        let events = parse_trace(include_str!("../fixtures/traveling_null_pointer.jel")).unwrap();
        let gt = GroundTruth::replay(&events);
        let chain = |i| oracle_call_chain(&gt, EventId(i)).unwrap().iter().map(|e| e.0).collect::<Vec<_>>();
        assert_eq!(chain(15), vec![1, 2, 4, 13, 14]);
        assert_eq!(chain(7), vec![1, 2, 4]);
        assert_eq!(chain(10), vec![1, 2, 4]);
        assert_eq!(chain(0), Vec::<u64>::new());
        assert_eq!(chain(16), Vec::<u64>::new());
        assert_eq!(
            oracle_pre_called(&gt, EventId(13)).unwrap().unwrap(),
            vec![(EventId(5), EventId(6)), (EventId(9), EventId(10))]
        );
        assert_eq!(
            oracle_post_called(&gt, EventId(5)).unwrap().unwrap(),
            vec![(EventId(9), EventId(10))]
        );
        assert_eq!(oracle_post_called(&gt, EventId(13)).unwrap().unwrap(), vec![]);
        let tree = oracle_call_tree(&gt, EventId(4)).unwrap();
        let kids: Vec<_> = tree.children.iter().map(|c| c.root.id.0).collect();
        assert_eq!(kids, vec![5, 9, 13]);
        assert_eq!(tree.children[2].children[0].root.id, EventId(14));
        assert_eq!(oracle_call_chain(&gt, EventId(77)), Err(GenError::NotFound(EventId(77))));
    }

    #[test]
    fn oracle_state_unwritten_fields() {
        let (events, gt) = generate(&GenConfig::minimal(3)).unwrap();
        let ExecutionEvent::MethodCall { subject: Subject::Object(obj), .. } = &events[2].event else {
            panic!("constructor expected")
        };
        let state = oracle_object_state(&gt, events[4].id, obj).unwrap();
        assert!(state.values().all(Option::is_none));
    }
}
