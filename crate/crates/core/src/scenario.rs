//! Ordered multi-event patterns with variable bindings.
//!
//! A scenario is a list of labelled steps. Each step is an event pattern
//! whose `$Var` slots bind on first use and must agree afterwards, plus
//! `after` constraints demanding a strictly larger id than earlier steps.
//!
//! ```text
//! scenario login
//! step ubox: match setfield name='uBox' value=$UBox
//! step got-user: match methodexit subject=$UBox name='getText' value=$Username
//! step verify: match methodcall name='verify' args=[$Username, _] id=$V; after got-user
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::jel::{ParseError, Pos, Quoted, TermReader, Tok};
use crate::model::{EventId, EventPattern, TraceEvent, Value};
use crate::pattern::{read_pattern, PatternText, Slot};
use crate::store::TraceStore;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("scenario {0}")]
    SpecParseError(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioStep {
    pub label: String,
    pub pattern: EventPattern,
    pub vars: Vec<(Slot, String)>,
    pub after: Vec<String>,
}

impl ScenarioStep {
    pub fn new(label: impl Into<String>, pattern: EventPattern) -> Self {
        ScenarioStep {
            label: label.into(),
            pattern,
            vars: Vec::new(),
            after: Vec::new(),
        }
    }

    pub fn bind(mut self, slot: Slot, var: impl Into<String>) -> Self {
        self.vars.push((slot, var.into()));
        self
    }

    pub fn after(mut self, label: impl Into<String>) -> Self {
        self.after.push(label.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub name: String,
    pub steps: Vec<ScenarioStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Binding {
    Value(Value),
    Id(EventId),
}

pub type Bindings = BTreeMap<String, Binding>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioResult {
    Matched {
        bindings: Bindings,
        matched_ids: Vec<EventId>,
    },
    FailedAt {
        label: String,
        bindings: Bindings,
    },
}

impl ScenarioResult {
    pub fn is_matched(&self) -> bool {
        matches!(self, ScenarioResult::Matched { .. })
    }
}

fn slot_value(e: &TraceEvent, slot: Slot) -> Option<Binding> {
    let ev = &e.event;
    Some(match slot {
        Slot::Thread => Binding::Value(Value::Scalar(e.thread.clone())),
        Slot::Subject => Binding::Value(ev.subject()?.into()),
        Slot::Name => Binding::Value(Value::Scalar(ev.name()?.to_string())),
        Slot::Arg(i) => Binding::Value(ev.args()?.get(i)?.clone()),
        Slot::Value => Binding::Value(ev.value()?.clone()),
        Slot::CallId => Binding::Id(ev.call_id()?),
        Slot::Id => Binding::Id(e.id),
    })
}

/// Unifies the step's slots against `e`, extending `b`. Returns the names
/// newly bound so the caller can undo them.
fn unify(step: &ScenarioStep, e: &TraceEvent, b: &mut Bindings) -> Option<Vec<String>> {
    let mut fresh = Vec::new();
    for (slot, var) in &step.vars {
        let Some(v) = slot_value(e, *slot) else {
            undo(b, &fresh);
            return None;
        };
        match b.get(var) {
            Some(bound) if *bound != v => {
                undo(b, &fresh);
                return None;
            }
            Some(_) => {}
            None => {
                b.insert(var.clone(), v);
                fresh.push(var.clone());
            }
        }
    }
    Some(fresh)
}

fn undo(b: &mut Bindings, names: &[String]) {
    for n in names {
        b.remove(n);
    }
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ScenarioSpec {
            name: name.into(),
            steps: Vec::new(),
        }
    }

    pub fn step(mut self, step: ScenarioStep) -> Self {
        self.steps.push(step);
        self
    }

    /// Indices of each step's `after` targets. Fails on duplicate labels
    /// and on references to unknown or later steps.
    fn constraint_indices(&self) -> Result<Vec<Vec<usize>>, ScenarioError> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            let mut refs = Vec::new();
            for a in &step.after {
                match seen.get(a.as_str()) {
                    Some(&j) => refs.push(j),
                    None => {
                        return Err(ScenarioError::InvalidSpec(format!(
                            "step `{}` is ordered after unknown or later step `{}`",
                            step.label, a
                        )))
                    }
                }
            }
            if seen.insert(&step.label, i).is_some() {
                return Err(ScenarioError::InvalidSpec(format!(
                    "duplicate step label `{}`",
                    step.label
                )));
            }
            out.push(refs);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.constraint_indices().map(|_| ())
    }

    /// Checks a proposed assignment without searching. Returns the
    /// resulting bindings when every pattern, binding and order constraint
    /// holds.
    pub fn check_assignment(&self, s: &TraceStore, ids: &[EventId]) -> Option<Bindings> {
        let after = self.constraint_indices().ok()?;
        if ids.len() != self.steps.len() {
            return None;
        }
        let mut b = Bindings::new();
        for (i, (step, &id)) in self.steps.iter().zip(ids).enumerate() {
            let e = s.get(id).ok()?;
            if !step.pattern.matches(e) || after[i].iter().any(|&j| ids[j] >= id) {
                return None;
            }
            unify(step, e, &mut b)?;
        }
        Some(b)
    }
}

struct Search<'a> {
    spec: &'a ScenarioSpec,
    after: Vec<Vec<usize>>,
    candidates: Vec<Vec<&'a TraceEvent>>,
    chosen: Vec<EventId>,
    bindings: Bindings,
    deepest: usize,
    deepest_bindings: Bindings,
    /// Per step: earlier steps and variables that later steps depend on.
    frontier: Vec<(Vec<usize>, Vec<String>)>,
    failed: HashSet<FailKey>,
}

type FailKey = (usize, Vec<EventId>, Vec<Option<Binding>>);

impl Search<'_> {
    fn frontier(spec: &ScenarioSpec, after: &[Vec<usize>]) -> Vec<(Vec<usize>, Vec<String>)> {
        (0..spec.steps.len())
            .map(|k| {
                let steps: BTreeSet<usize> =
                    after[k..].iter().flatten().copied().filter(|&j| j < k).collect();
                let vars: BTreeSet<String> = spec.steps[k..]
                    .iter()
                    .flat_map(|s| s.vars.iter().map(|(_, v)| v.clone()))
                    .collect();
                (steps.into_iter().collect(), vars.into_iter().collect())
            })
            .collect()
    }

    /// Everything the remaining search from step `k` depends on.
    fn key(&self, k: usize) -> FailKey {
        let (steps, vars) = &self.frontier[k];
        (
            k,
            steps.iter().map(|&j| self.chosen[j]).collect(),
            vars.iter().map(|v| self.bindings.get(v).cloned()).collect(),
        )
    }

    fn run(&mut self, k: usize) -> bool {
        if k > self.deepest {
            self.deepest = k;
            self.deepest_bindings = self.bindings.clone();
        }
        if k == self.spec.steps.len() {
            return true;
        }
        let key = self.key(k);
        if self.failed.contains(&key) {
            return false;
        }
        let step = &self.spec.steps[k];
        let floor = self.after[k].iter().map(|&j| self.chosen[j]).max();
        let cands = &self.candidates[k];
        let start = floor.map_or(0, |f| cands.partition_point(|e| e.id <= f));
        for i in start..cands.len() {
            let e = self.candidates[k][i];
            let Some(fresh) = unify(step, e, &mut self.bindings) else {
                continue;
            };
            self.chosen.push(e.id);
            if self.run(k + 1) {
                return true;
            }
            self.chosen.pop();
            undo(&mut self.bindings, &fresh);
        }
        self.failed.insert(key);
        false
    }
}

/// Finds the lexicographically smallest assignment of events to steps, by
/// step order and then event id, satisfying all patterns, bindings and
/// order constraints. On failure reports the deepest step the search could
/// not satisfy together with the bindings of the first partial match that
/// reached it.
pub fn run_scenario(s: &TraceStore, spec: &ScenarioSpec) -> Result<ScenarioResult, ScenarioError> {
    let after = spec.constraint_indices()?;
    let candidates = spec.steps.iter().map(|st| s.scan(&st.pattern)).collect();
    let frontier = Search::frontier(spec, &after);
    let mut search = Search {
        spec,
        after,
        candidates,
        chosen: Vec::with_capacity(spec.steps.len()),
        bindings: Bindings::new(),
        deepest: 0,
        deepest_bindings: Bindings::new(),
        frontier,
        failed: HashSet::new(),
    };
    Ok(if search.run(0) {
        ScenarioResult::Matched {
            bindings: search.bindings,
            matched_ids: search.chosen,
        }
    } else {
        ScenarioResult::FailedAt {
            label: spec.steps[search.deepest].label.clone(),
            bindings: search.deepest_bindings,
        }
    })
}

/// Strips a `#` comment that is not inside a quoted atom.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn label(r: &mut TermReader) -> Result<(String, Pos), ParseError> {
    match r.next()? {
        (Tok::Atom { text, .. }, pos) => Ok((text, pos)),
        (other, pos) => Err(pos.error("step label", other.to_string())),
    }
}

fn keyword(r: &mut TermReader, word: &str) -> Result<(), ParseError> {
    match r.next()? {
        (Tok::Atom { text, quoted: false }, _) if text == word => Ok(()),
        (other, pos) => Err(pos.error(format!("`{}`", word), other.to_string())),
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let mut spec = ScenarioSpec::default();
    let mut labels = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        let mut r = TermReader::at(line, Pos { line: n + 1, column: 1 });
        if r.at_eof()? {
            continue;
        }
        let (head, pos) = label(&mut r)?;
        match head.as_str() {
            "scenario" if spec.steps.is_empty() && spec.name.is_empty() => {
                spec.name = label(&mut r)?.0;
            }
            "step" => {
                let (name, at) = label(&mut r)?;
                if !labels.insert(name.clone()) {
                    return Err(at.error("unique step label", format!("duplicate `{}`", name)).into());
                }
                r.expect_punct(':')?;
                keyword(&mut r, "match")?;
                let (pattern, vars) = read_pattern(&mut r, true)?;
                let mut step = ScenarioStep {
                    label: name,
                    pattern,
                    vars,
                    after: Vec::new(),
                };
                if r.eat_punct(';')? {
                    keyword(&mut r, "after")?;
                    loop {
                        let (target, at) = label(&mut r)?;
                        if !spec.steps.iter().any(|s| s.label == target) {
                            return Err(at
                                .error("label of an earlier step", format!("`{}`", target))
                                .into());
                        }
                        step.after.push(target);
                        if !r.eat_punct(',')? {
                            break;
                        }
                    }
                }
                let (tok, pos) = r.next()?;
                if tok != Tok::Eof {
                    return Err(pos.error("end of step", tok.to_string()).into());
                }
                spec.steps.push(step);
            }
            _ => return Err(pos.error("`step`", format!("`{}`", head)).into()),
        }
    }
    Ok(spec)
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.name.is_empty() {
            writeln!(f, "scenario {}", Quoted(&self.name))?;
        }
        for step in &self.steps {
            write!(
                f,
                "step {}: match {}",
                Quoted(&step.label),
                PatternText {
                    pattern: &step.pattern,
                    slots: &step.vars
                }
            )?;
            if !step.after.is_empty() {
                let labels: Vec<String> = step.after.iter().map(|l| Quoted(l).to_string()).collect();
                write!(f, "; after {}", labels.join(", "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    spec.to_string()
}

/// The login behavior view: user name and password boxes, both `getText`
/// reads, a `verify` call with those values returning true and a `login`
/// returning true.
pub const LOGIN_SCENARIO: &str = "\
scenario login
step ubox: match setfield name='uBox' value=$UBox
step pbox: match setfield name='pBox' value=$PBox
step got-user: match methodexit subject=$UBox name='getText' value=$Username
step got-pass: match methodexit subject=$PBox name='getText' value=$Password; after got-user
step verify: match methodcall name='verify' args=[$Username, $Password] id=$V; after got-pass
step verify-exit-true: match methodexit name='verify' value='true' call=$V; after verify
step login-exit-true: match methodexit name='login' value='true'; after verify-exit-true
";
