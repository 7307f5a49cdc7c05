#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracequery_core::gen::{self, GenConfig, GroundTruth};
use tracequery_core::query::{self, QueryError, Reading};
use tracequery_core::{
    parse_trace, EventId, ExecutionEvent, ObjectRef, Subject, TraceEvent, TraceStore,
};

pub const NPE_TRACE: &str = include_str!("../../fixtures/traveling_null_pointer.jel");

pub fn npe_trace() -> TraceStore {
    TraceStore::load(parse_trace(NPE_TRACE).unwrap()).unwrap()
}

/// A login run: two text boxes, both read, `verify` called with the two
/// values and returning `verified`, then `login` returning the same.
pub fn login_trace(verified: bool) -> TraceStore {
    let v = if verified { "true" } else { "false" };
    let text = format!(
        "
event(0, main, threadstart(main)).
event(1, main, methodcall(l('Login.java', 3), o('LoginForm', 10), login, [])).
event(2, main, setfield(l('Login.java', 4), o('LoginForm', 10), uBox, o('TextBox', 11))).
event(3, main, setfield(l('Login.java', 5), o('LoginForm', 10), pBox, o('TextBox', 12))).
event(4, main, step(l('Login.java', 6), [])).
event(5, main, methodcall(l('Login.java', 6), o('TextBox', 11), getText, [])).
event(6, main, methodexit(5, l('Login.java', 6), o('TextBox', 11), getText, alice)).
event(7, main, methodcall(l('Login.java', 7), o('TextBox', 12), getText, [])).
event(8, main, methodexit(7, l('Login.java', 7), o('TextBox', 12), getText, s3cret)).
event(9, main, methodcall(l('Login.java', 8), c('Auth'), verify, [alice, s3cret])).
event(10, main, methodexit(9, l('Login.java', 8), c('Auth'), verify, '{v}')).
event(11, main, methodexit(1, l('Login.java', 9), o('LoginForm', 10), login, '{v}')).
event(12, main, threaddeath(main)).
"
    );
    TraceStore::load(parse_trace(&text).unwrap()).unwrap()
}

/// Generator settings spread across seeds: thread count, size, depth and
/// exception rate all vary.
pub fn varied_config(seed: u64, max_events_cap: usize) -> GenConfig {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let threads = r.random_range(1..=4);
    GenConfig {
        seed,
        threads,
        max_events: r.random_range(5 * threads..=max_events_cap),
        max_call_depth: r.random_range(1..=12),
        class_count: (1, r.random_range(1..=8)),
        field_count: (0, r.random_range(0..=6)),
        loop_iterations: (0, r.random_range(0..=8)),
        uncaught_exception_probability: r.random_range(0.0..=1.0),
        running_thread_probability: 0.2,
    }
}

fn sample<T: Clone>(r: &mut ChaCha8Rng, items: &[T], n: usize) -> Vec<T> {
    if items.len() <= n {
        items.to_vec()
    } else {
        (0..n).map(|_| items.choose(r).unwrap().clone()).collect()
    }
}

fn ids(v: &[(TraceEvent, TraceEvent)]) -> Vec<(EventId, EventId)> {
    v.iter().map(|(c, x)| (c.id, x.id)).collect()
}

macro_rules! ensure_eq {
    ($what:expr, $engine:expr, $oracle:expr) => {{
        let (e, o) = (&$engine, &$oracle);
        if e != o {
            return Err(format!("{}: engine {:?} != oracle {:?}", $what, e, o));
        }
    }};
}

/// Compares query-engine answers with the replay oracle on one trace.
/// Returns the number of comparisons made, or a description of the first
/// mismatch.
pub fn check_against_oracle(
    events: &[TraceEvent],
    gt: &GroundTruth,
    sample_seed: u64,
    per_query: usize,
) -> Result<usize, String> {
    let s = TraceStore::load(events.to_vec()).map_err(|e| format!("load: {e}"))?;
    let mut r = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut checks = 0usize;
    let all_ids = gt.event_ids().to_vec();
    let call_ids: Vec<EventId> = gt.call_ids().collect();
    let max = s.max_id().unwrap_or(EventId(0));
    let random_id = |r: &mut ChaCha8Rng| EventId(r.random_range(0..=max.0 + 1));

    for id in sample(&mut r, &all_ids, per_query) {
        let engine = query::call_chain(&s, id).map_err(|e| e.to_string())?;
        let oracle = gen::oracle_call_chain(gt, id).map_err(|e| e.to_string())?;
        ensure_eq!(format!("call_chain({id})"), engine, oracle);
        let spans = query::any_enclosing_method(&s, id).map_err(|e| e.to_string())?;
        for sp in spans {
            ensure_eq!(
                format!("terminator of {} at {id}", sp.call_id),
                Some(sp.terminator),
                gt.terminator(sp.call_id)
            );
        }
        checks += 1;

        let pre = query::pre_event_called_methods(&s, id);
        let post = query::post_event_called_methods(&s, id);
        match gen::oracle_pre_called(gt, id).map_err(|e| e.to_string())? {
            None => {
                ensure_eq!(format!("pre({id})"), pre, Err(QueryError::NoEnclosingEnvironment(id)));
                ensure_eq!(format!("post({id})"), post, Err(QueryError::NoEnclosingEnvironment(id)));
            }
            Some(oracle_pre) => {
                ensure_eq!(format!("pre({id})"), ids(&pre.map_err(|e| e.to_string())?), oracle_pre);
                let oracle_post = gen::oracle_post_called(gt, id)
                    .map_err(|e| e.to_string())?
                    .unwrap_or_default();
                ensure_eq!(format!("post({id})"), ids(&post.map_err(|e| e.to_string())?), oracle_post);
            }
        }
        checks += 2;
    }

    for c in sample(&mut r, &call_ids, per_query / 4 + 1) {
        let engine = query::call_tree(&s, c).map_err(|e| e.to_string())?;
        let oracle = gen::oracle_call_tree(gt, c).map_err(|e| e.to_string())?;
        ensure_eq!(format!("call_tree({c})"), engine, oracle);
        checks += 1;
    }

    let objects: Vec<(ObjectRef, EventId)> = {
        let mut v: Vec<_> = gt.objects().map(|(o, id)| (o.clone(), id)).collect();
        v.sort();
        v
    };
    for (obj, born) in sample(&mut r, &objects, per_query / 4 + 1) {
        let end = if r.random_bool(0.1) && born.0 > 0 {
            EventId(r.random_range(0..born.0))
        } else {
            EventId(r.random_range(born.0..=max.0))
        };
        let engine = query::object_state(&s, end, &obj);
        match gen::oracle_object_state(gt, end, &obj) {
            Err(_) => ensure_eq!(
                format!("object_state({end}, {obj})"),
                engine.map(|_| ()),
                Err(QueryError::NoInstantiation(obj.clone()))
            ),
            Ok(oracle) => {
                let st = engine.map_err(|e| format!("object_state({end}, {obj}): {e}"))?;
                let got: BTreeMap<String, Option<(EventId, tracequery_core::Value)>> = st
                    .fields
                    .into_iter()
                    .map(|f| {
                        let v = match f.reading {
                            Reading::Assigned { event_id, value } => Some((event_id, value)),
                            Reading::Unassigned => None,
                        };
                        (f.name, v)
                    })
                    .collect();
                ensure_eq!(format!("object_state({end}, {obj})"), got, oracle);
            }
        }
        checks += 1;
    }

    ensure_eq!("thread_status", query::thread_status(&s), gen::oracle_thread_status(gt));
    checks += 1;

    // Histories.
    let mut writes: Vec<(Subject, String)> = Vec::new();
    let mut locals: Vec<(String, String)> = Vec::new();
    let mut methods: Vec<(String, Subject)> = Vec::new();
    let mut ds_locations = Vec::new();
    for e in events {
        match &e.event {
            ExecutionEvent::SetField {
                subject, field_name, ..
            } => writes.push((subject.clone(), field_name.clone())),
            ExecutionEvent::Step { locals: lv, .. } => {
                if let Some(l) = lv.first() {
                    locals.push((e.thread.clone(), l.name.clone()));
                }
            }
            ExecutionEvent::MethodCall { subject, name, .. } => {
                methods.push((name.clone(), subject.clone()))
            }
            ExecutionEvent::DataStructure { location, .. } => ds_locations.push(location.clone()),
            _ => {}
        }
    }
    let n = per_query / 8 + 1;
    for (subject, field) in sample(&mut r, &writes, n) {
        let (lo, hi) = (random_id(&mut r), random_id(&mut r));
        let engine: Vec<(EventId, tracequery_core::Value)> = match &subject {
            Subject::Object(o) => query::instance_field_history(&s, lo, hi, o, &field),
            Subject::Class(c) => query::class_field_history(&s, lo, hi, c, &field),
        }
        .into_iter()
        .map(|f| (f.event_id, f.value))
        .collect();
        let oracle = gen::oracle_field_history(gt, lo, hi, &subject, &field);
        ensure_eq!(format!("field_history({subject}, {field}, {lo}, {hi})"), engine, oracle);
        checks += 1;
    }
    for (thread, name) in sample(&mut r, &locals, n) {
        let (lo, hi) = (random_id(&mut r), random_id(&mut r));
        let engine: Vec<_> = query::local_variable_history(&s, lo, hi, &thread, &name)
            .into_iter()
            .map(|f| (f.event_id, f.value))
            .collect();
        let oracle = gen::oracle_local_history(gt, lo, hi, &thread, &name);
        ensure_eq!(format!("local_history({thread}, {name}, {lo}, {hi})"), engine, oracle);
        checks += 1;
    }
    for (name, subject) in sample(&mut r, &methods, n) {
        let subject = r.random_bool(0.5).then_some(subject);
        ensure_eq!(
            format!("argument_history({name}, {subject:?})"),
            query::argument_history(&s, &name, subject.as_ref()),
            gen::oracle_argument_history(gt, &name, subject.as_ref())
        );
        ensure_eq!(
            format!("return_value_history({name}, {subject:?})"),
            query::return_value_history(&s, &name, subject.as_ref()),
            gen::oracle_return_history(gt, &name, subject.as_ref())
        );
        checks += 2;
    }
    for _ in 0..n.min(4) {
        let (lo, hi) = (random_id(&mut r), random_id(&mut r));
        let at = if r.random_bool(0.5) {
            ds_locations.choose(&mut r).cloned()
        } else {
            None
        };
        ensure_eq!(
            format!("ds_history({lo}, {hi}, {at:?})"),
            query::data_structure_history(&s, lo, hi, at.as_ref()),
            gen::oracle_ds_history(gt, lo, hi, at.as_ref())
        );
        checks += 1;
    }

    Ok(checks)
}
