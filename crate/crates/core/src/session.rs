//! Saved queries, cached answers and result comparison.
//!
//! Answers are cached under the query name and a fingerprint of the store
//! they were computed on, so re-running a saved query against the same
//! trace and window is free while any edit or window change forces a
//! fresh evaluation. The session file is plain text:
//!
//! ```text
//! tracequery-session 1
//! query 'npe-env' where-exception 'main'
//! scenario 'login' {
//!   step got-user: match methodexit name='getText' value=$U
//! }
//! answer {"evaluation_count":1,"fingerprint":"…","kind":"event",…}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::command::{rows_to_table, CommandError, Query, QueryResult, Row, ID_COLUMNS};
use crate::jel::{serialize_trace, Quoted};
use crate::scenario::{parse_scenario, run_scenario, ScenarioError, ScenarioSpec};
use crate::store::TraceStore;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SESSION_HEADER: &str = "tracequery-session 1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("a saved query named `{0}` already exists")]
    DuplicateName(String),
    #[error("no saved query named `{0}`")]
    UnknownQuery(String),
    #[error("cannot compare a {0} result with a {1} result")]
    IncompatibleResults(String, String),
    #[error("invalid query name `{0}`")]
    InvalidName(String),
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("session file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("session file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum SavedKind {
    Query(Query),
    Scenario(ScenarioSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SavedQuery {
    pub name: String,
    pub kind: SavedKind,
}

impl SavedQuery {
    pub fn query(name: impl Into<String>, q: Query) -> Self {
        SavedQuery {
            name: name.into(),
            kind: SavedKind::Query(q),
        }
    }

    pub fn scenario(name: impl Into<String>, spec: ScenarioSpec) -> Self {
        SavedQuery {
            name: name.into(),
            kind: SavedKind::Scenario(spec),
        }
    }

    /// Evaluates directly, bypassing any cache.
    pub fn evaluate(&self, s: &TraceStore) -> Result<QueryResult, SessionError> {
        Ok(match &self.kind {
            SavedKind::Query(q) => q.evaluate(s).map_err(CommandError::from)?,
            SavedKind::Scenario(spec) => QueryResult::Scenario {
                labels: spec.steps.iter().map(|st| st.label.clone()).collect(),
                result: run_scenario(s, spec)?,
            },
        })
    }
}

/// A serialized query result: its shape, canonical JSON and flat rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub kind: String,
    pub result: Json,
    pub rows: Vec<Row>,
}

impl From<&QueryResult> for Answer {
    fn from(r: &QueryResult) -> Self {
        Answer {
            kind: r.kind().to_string(),
            result: r.to_json(),
            rows: r.rows(),
        }
    }
}

impl Answer {
    pub fn to_json_string(&self) -> String {
        self.result.to_string()
    }

    pub fn to_table(&self) -> String {
        match &self.result {
            Json::Bool(b) if self.kind == "bool" => format!("{}\n", b),
            _ => rows_to_table(&self.rows),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedAnswer {
    pub query_name: String,
    pub trace_fingerprint: String,
    pub answer: Answer,
    /// Evaluations of this query at the time the answer was computed.
    pub evaluation_count: u64,
}

/// Content hash of the store's events, its active window and the engine
/// version.
pub fn fingerprint(s: &TraceStore) -> String {
    let mut h = Sha256::new();
    h.update(serialize_trace(s.events()).as_bytes());
    match s.interval() {
        Some(iv) => h.update(format!("interval {} {}\n", iv.lo(), iv.hi()).as_bytes()),
        None => h.update(b"interval off\n"),
    }
    h.update(format!("engine {}\n", ENGINE_VERSION).as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Default)]
pub struct Session {
    queries: Vec<SavedQuery>,
    answers: BTreeMap<(String, String), SavedAnswer>,
    counts: BTreeMap<String, u64>,
    path: Option<PathBuf>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(['\n', '\r'])
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a session backed by `path`, reading it when it exists. Later
    /// changes are written back to the same file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let path = path.as_ref();
        let mut s = if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| SessionError::Io(e.to_string()))?;
            Session::from_text(&text)?
        } else {
            Session::new()
        };
        s.path = Some(path.to_path_buf());
        Ok(s)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn persist(&self) -> Result<(), SessionError> {
        match &self.path {
            Some(p) => fs::write(p, self.to_text()).map_err(|e| SessionError::Io(e.to_string())),
            None => Ok(()),
        }
    }

    pub fn queries(&self) -> &[SavedQuery] {
        &self.queries
    }

    pub fn get(&self, name: &str) -> Option<&SavedQuery> {
        self.queries.iter().find(|q| q.name == name)
    }

    pub fn answers(&self) -> impl Iterator<Item = &SavedAnswer> {
        self.answers.values()
    }

    pub fn save_query(&mut self, q: SavedQuery) -> Result<(), SessionError> {
        if !valid_name(&q.name) {
            return Err(SessionError::InvalidName(q.name));
        }
        if self.get(&q.name).is_some() {
            return Err(SessionError::DuplicateName(q.name));
        }
        if let SavedKind::Scenario(spec) = &q.kind {
            spec.validate()?;
        }
        self.queries.push(q);
        self.persist()
    }

    /// Number of cache misses so far for `name`.
    pub fn evaluation_count(&self, name: &str) -> u64 {
        self.counts.get(name).copied().unwrap_or(0)
    }

    pub fn clear_cache(&mut self) {
        self.answers.clear();
    }

    /// Returns the cached answer for this store's fingerprint, evaluating
    /// and caching it on a miss.
    pub fn run_saved(&mut self, name: &str, s: &TraceStore) -> Result<Answer, SessionError> {
        let q = self
            .get(name)
            .ok_or_else(|| SessionError::UnknownQuery(name.to_string()))?;
        let fp = fingerprint(s);
        let key = (name.to_string(), fp.clone());
        if let Some(hit) = self.answers.get(&key) {
            return Ok(hit.answer.clone());
        }
        let answer = Answer::from(&q.evaluate(s)?);
        let count = self.counts.entry(name.to_string()).or_insert(0);
        *count += 1;
        let saved = SavedAnswer {
            query_name: name.to_string(),
            trace_fingerprint: fp,
            answer: answer.clone(),
            evaluation_count: *count,
        };
        self.answers.insert(key, saved);
        self.persist()?;
        Ok(answer)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", SESSION_HEADER);
        for q in &self.queries {
            match &q.kind {
                SavedKind::Query(query) => {
                    let _ = writeln!(out, "query {} {}", Quoted(&q.name), query);
                }
                SavedKind::Scenario(spec) => {
                    let _ = writeln!(out, "scenario {} {{", Quoted(&q.name));
                    for line in spec.to_string().lines() {
                        let _ = writeln!(out, "  {}", line);
                    }
                    out.push_str("}\n");
                }
            }
        }
        for a in self.answers.values() {
            let rows: Vec<Json> = a
                .answer
                .rows
                .iter()
                .map(|r| Json::Object(r.clone().into_iter().collect()))
                .collect();
            let record = json!({
                "query": a.query_name,
                "fingerprint": a.trace_fingerprint,
                "evaluation_count": a.evaluation_count,
                "kind": a.answer.kind,
                "result": a.answer.result,
                "rows": rows,
            });
            let _ = writeln!(out, "answer {}", record);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SessionError> {
        let err = |line: usize, message: String| SessionError::Format { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, h)) if h.trim_end() == SESSION_HEADER => {}
            _ => return Err(err(1, format!("expected header `{}`", SESSION_HEADER))),
        }
        let mut s = Session::new();
        while let Some((n, line)) = lines.next() {
            let line = line.trim_end();
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("query ") {
                let (name, body) = split_name(rest).ok_or_else(|| err(n, "bad query name".into()))?;
                let q = Query::parse(body).map_err(|e| err(n, e.to_string()))?;
                s.insert_loaded(SavedQuery::query(name, q), n)?;
            } else if let Some(rest) = line.strip_prefix("scenario ") {
                let (name, body) = split_name(rest).ok_or_else(|| err(n, "bad scenario name".into()))?;
                if body.trim() != "{" {
                    return Err(err(n, "expected `{` after scenario name".into()));
                }
                let mut spec_text = String::new();
                loop {
                    match lines.next() {
                        Some((_, "}")) => break,
                        Some((_, l)) => {
                            spec_text.push_str(l.strip_prefix("  ").unwrap_or(l));
                            spec_text.push('\n');
                        }
                        None => return Err(err(n, "unterminated scenario block".into())),
                    }
                }
                let spec = parse_scenario(&spec_text).map_err(|e| err(n, e.to_string()))?;
                s.insert_loaded(SavedQuery::scenario(name, spec), n)?;
            } else if let Some(rest) = line.strip_prefix("answer ") {
                let a = parse_answer(rest).ok_or_else(|| err(n, "malformed answer record".into()))?;
                let count = s.counts.entry(a.query_name.clone()).or_insert(0);
                *count = (*count).max(a.evaluation_count);
                s.answers
                    .insert((a.query_name.clone(), a.trace_fingerprint.clone()), a);
            } else {
                return Err(err(n, format!("unexpected line `{}`", line)));
            }
        }
        Ok(s)
    }

    fn insert_loaded(&mut self, q: SavedQuery, line: usize) -> Result<(), SessionError> {
        if self.get(&q.name).is_some() {
            return Err(SessionError::Format {
                line,
                message: format!("duplicate query name `{}`", q.name),
            });
        }
        self.queries.push(q);
        Ok(())
    }
}

/// Splits a leading quoted or bare name from the rest of the line.
fn split_name(s: &str) -> Option<(String, &str)> {
    if let Some(body) = s.strip_prefix('\'') {
        let mut name = String::new();
        let mut chars = body.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if c == '\'' {
                if let Some((_, '\'')) = chars.peek() {
                    chars.next();
                    name.push('\'');
                } else {
                    return Some((name, body[i + 1..].trim_start()));
                }
            } else {
                name.push(c);
            }
        }
        None
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        (end > 0).then(|| (s[..end].to_string(), s[end..].trim_start()))
    }
}

fn parse_answer(text: &str) -> Option<SavedAnswer> {
    let v: Json = serde_json::from_str(text).ok()?;
    let rows = v["rows"]
        .as_array()?
        .iter()
        .map(|r| r.as_object().map(|m| m.clone().into_iter().collect::<Row>()))
        .collect::<Option<Vec<_>>>()?;
    Some(SavedAnswer {
        query_name: v["query"].as_str()?.to_string(),
        trace_fingerprint: v["fingerprint"].as_str()?.to_string(),
        evaluation_count: v["evaluation_count"].as_u64()?,
        answer: Answer {
            kind: v["kind"].as_str()?.to_string(),
            result: v["result"].clone(),
            rows,
        },
    })
}

/// Which columns take part in a comparison.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Projection {
    /// Every column except event ids, which differ across runs.
    #[default]
    DropIds,
    All,
    Keep(Vec<String>),
    Drop(Vec<String>),
}

impl Projection {
    fn keeps(&self, column: &str) -> bool {
        match self {
            Projection::DropIds => !ID_COLUMNS.contains(&column),
            Projection::All => true,
            Projection::Keep(cols) => cols.iter().any(|c| c == column),
            Projection::Drop(cols) => !cols.iter().any(|c| c == column),
        }
    }

    fn apply(&self, r: &Row) -> Row {
        r.iter()
            .filter(|(k, _)| self.keeps(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffReport {
    pub only_in_a: Vec<Row>,
    pub only_in_b: Vec<Row>,
    pub common: Vec<Row>,
    /// Columns compared, sorted.
    pub projection: Vec<String>,
}

impl DiffReport {
    pub fn is_identical(&self) -> bool {
        self.only_in_a.is_empty() && self.only_in_b.is_empty()
    }

    /// One table per part, each headed by its name and row count.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (name, rows) in [("only in a", &self.only_in_a), ("only in b", &self.only_in_b), ("common", &self.common)] {
            out.push_str(&format!("{} ({}):\n", name, rows.len()));
            if !rows.is_empty() {
                out.push_str(&rows_to_table(rows));
            }
        }
        out
    }

    pub fn to_json(&self) -> Json {
        let rows = |v: &[Row]| -> Json {
            Json::Array(
                v.iter()
                    .map(|r| Json::Object(r.clone().into_iter().collect()))
                    .collect(),
            )
        };
        json!({
            "only_in_a": rows(&self.only_in_a),
            "only_in_b": rows(&self.only_in_b),
            "common": rows(&self.common),
            "projection": self.projection,
        })
    }
}

/// Multiset difference of two answers' rows after projecting columns.
/// Rows in each part are sorted by their canonical JSON text.
pub fn diff_results(a: &Answer, b: &Answer, projection: &Projection) -> Result<DiffReport, SessionError> {
    if a.kind != b.kind {
        return Err(SessionError::IncompatibleResults(a.kind.clone(), b.kind.clone()));
    }
    let mut counts: BTreeMap<String, (Row, usize, usize)> = BTreeMap::new();
    let mut columns = std::collections::BTreeSet::new();
    for (rows, side) in [(&a.rows, 0), (&b.rows, 1)] {
        for r in rows {
            let p = projection.apply(r);
            columns.extend(p.keys().cloned());
            let key = Json::Object(p.clone().into_iter().collect()).to_string();
            let entry = counts.entry(key).or_insert((p, 0, 0));
            if side == 0 {
                entry.1 += 1;
            } else {
                entry.2 += 1;
            }
        }
    }
    let mut report = DiffReport {
        projection: columns.into_iter().collect(),
        ..DiffReport::default()
    };
    for (row, ca, cb) in counts.into_values() {
        let both = ca.min(cb);
        report.common.extend(std::iter::repeat_n(row.clone(), both));
        report.only_in_a.extend(std::iter::repeat_n(row.clone(), ca - both));
        report.only_in_b.extend(std::iter::repeat_n(row, cb - both));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jel::parse_trace;
    use crate::scenario::LOGIN_SCENARIO;
    use crate::store::HistoryInterval;

    fn npe_trace() -> TraceStore {
        TraceStore::load(parse_trace(include_str!("../fixtures/traveling_null_pointer.jel")).unwrap()).unwrap()
    }

    #[test]
    fn caching_counts_misses_only() {
        let s = npe_trace();
        let mut sess = Session::new();
        sess.save_query(SavedQuery::query("npe-env", Query::parse("where-exception main").unwrap()))
            .unwrap();
        let a = sess.run_saved("npe-env", &s).unwrap();
        let b = sess.run_saved("npe-env", &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(sess.evaluation_count("npe-env"), 1);
        let windowed = s.restrict(HistoryInterval::new(0, 15).unwrap());
        sess.run_saved("npe-env", &windowed).unwrap();
        assert_eq!(sess.evaluation_count("npe-env"), 2);
        assert_eq!(sess.answers().count(), 2);
    }

    #[test]
    fn edits_invalidate() {
        let s = npe_trace();
        let mut sess = Session::new();
        sess.save_query(SavedQuery::query("ret", Query::parse("returns-history doSomeThing").unwrap()))
            .unwrap();
        sess.run_saved("ret", &s).unwrap();
        let text = include_str!("../fixtures/traveling_null_pointer.jel")
            .replace("'doSomeThing', 'null'", "'doSomeThing', 'some result'");
        let edited = TraceStore::load(parse_trace(&text).unwrap()).unwrap();
        let a = sess.run_saved("ret", &edited).unwrap();
        assert_eq!(sess.evaluation_count("ret"), 2);
        assert_eq!(a.to_json_string(), r#"[{"event_id":10,"return_value":{"scalar":"some result"}}]"#);
    }

    #[test]
    fn errors() {
        let mut sess = Session::new();
        let q = SavedQuery::query("x", Query::Threads);
        sess.save_query(q.clone()).unwrap();
        assert_eq!(sess.save_query(q), Err(SessionError::DuplicateName("x".into())));
        assert_eq!(
            sess.run_saved("nope", &npe_trace()),
            Err(SessionError::UnknownQuery("nope".into()))
        );
        assert!(matches!(
            sess.save_query(SavedQuery::query("", Query::Threads)),
            Err(SessionError::InvalidName(_))
        ));
    }

    #[test]
    fn session_text_round_trip() {
        let mut sess = Session::new();
        sess.save_query(SavedQuery::query("npe env", Query::parse("where-exception main").unwrap()))
            .unwrap();
        sess.save_query(SavedQuery::scenario("login", parse_scenario(LOGIN_SCENARIO).unwrap()))
            .unwrap();
        sess.save_query(SavedQuery::query("it's", Query::parse("pre-called 13").unwrap()))
            .unwrap();
        sess.run_saved("it's", &npe_trace()).unwrap();
        let text = sess.to_text();
        let back = Session::from_text(&text).unwrap();
        assert_eq!(back.queries(), sess.queries());
        assert_eq!(back.to_text(), text);
        assert_eq!(back.evaluation_count("it's"), 1);
    }

    #[test]
    fn cached_answer_survives_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.session");
        let s = npe_trace();
        {
            let mut sess = Session::open(&path).unwrap();
            sess.save_query(SavedQuery::query("cc", Query::parse("call-chain 15").unwrap()))
                .unwrap();
            sess.run_saved("cc", &s).unwrap();
        }
        let mut sess = Session::open(&path).unwrap();
        let a = sess.run_saved("cc", &s).unwrap();
        assert_eq!(a.to_json_string(), "[1,2,4,13,14]");
        assert_eq!(sess.evaluation_count("cc"), 1);
    }

    #[test]
    fn bad_session_files() {
        assert!(matches!(Session::from_text("nope\n"), Err(SessionError::Format { line: 1, .. })));
        let t = format!("{}\nquery a threads\nquery a threads\n", SESSION_HEADER);
        assert!(matches!(Session::from_text(&t), Err(SessionError::Format { line: 3, .. })));
        let t = format!("{}\nscenario s {{\n  step a: match any\n", SESSION_HEADER);
        assert!(Session::from_text(&t).is_err());
    }

    #[test]
    fn diff_reflexive_and_symmetric() {
        let s = npe_trace();
        let a = Answer::from(&Query::parse("scan step").unwrap().evaluate(&s).unwrap());
        let d = diff_results(&a, &a, &Projection::All).unwrap();
        assert!(d.is_identical());
        assert_eq!(d.common.len(), 5);
        let b = Answer::from(&Query::parse("scan step from=8").unwrap().evaluate(&s).unwrap());
        let ab = diff_results(&a, &b, &Projection::All).unwrap();
        let ba = diff_results(&b, &a, &Projection::All).unwrap();
        assert_eq!(ab.only_in_a, ba.only_in_b);
        assert_eq!(ab.only_in_b, ba.only_in_a);
        assert_eq!(ab.common, ba.common);
        assert_eq!(ab.only_in_a.len(), 2);
    }

    #[test]
    fn diff_multiset_under_default_projection() {
        let s = npe_trace();
        // Steps 8 and 11 carry the same locals, so without ids they are
        // two copies of one row.
        let a = Answer::from(&Query::parse("locals 8").unwrap().evaluate(&s).unwrap());
        let b = Answer::from(&Query::parse("locals 11").unwrap().evaluate(&s).unwrap());
        let d = diff_results(&a, &b, &Projection::default()).unwrap();
        assert!(d.is_identical());
        let x = Answer::from(&Query::parse("scan step from=7 to=11").unwrap().evaluate(&s).unwrap());
        let d = diff_results(&x, &x, &Projection::Keep(vec!["locals".into()])).unwrap();
        assert_eq!(d.common.len(), 3);
        assert_eq!(d.projection, vec!["locals".to_string()]);
    }

    #[test]
    fn diff_incompatible() {
        let s = npe_trace();
        let a = Answer::from(&Query::parse("call-chain 15").unwrap().evaluate(&s).unwrap());
        let b = Answer::from(&Query::parse("threads").unwrap().evaluate(&s).unwrap());
        assert!(matches!(
            diff_results(&a, &b, &Projection::All),
            Err(SessionError::IncompatibleResults(..))
        ));
        let e = Answer::from(&QueryResult::Ids(vec![]));
        let d = diff_results(&e, &e, &Projection::All).unwrap();
        assert_eq!(d, DiffReport::default());
    }
}
