//! Python bindings: `Trace` wraps an indexed trace, `Session` holds saved
//! queries and cached answers. Results come back as plain Python values
//! decoded from the canonical JSON output.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use tracequery_core::command::{CommandError, QUERY_VERBS};
use tracequery_core::session::{diff_results, Projection};
use tracequery_core::{
    generate, parse_pattern, parse_scenario, parse_trace, pattern_to_string, serialize_trace, GenConfig,
    HistoryInterval, Query, QueryResult, SavedQuery, ScenarioError, SessionError, TraceStore,
};

create_exception!(tracequery, ParseError, PyException);
create_exception!(tracequery, QueryError, PyException);
create_exception!(tracequery, SessionFailure, PyException);

fn json(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn command_err(e: CommandError) -> PyErr {
    match e {
        CommandError::Parse(p) => ParseError::new_err(p.to_string()),
        CommandError::Query(q) => QueryError::new_err(q.to_string()),
    }
}

fn scenario_err(e: ScenarioError) -> PyErr {
    ParseError::new_err(e.to_string())
}

fn session_err(e: SessionError) -> PyErr {
    match e {
        SessionError::Command(c) => command_err(c),
        SessionError::Scenario(s) => scenario_err(s),
        other => SessionFailure::new_err(other.to_string()),
    }
}

fn parse_query(text: &str) -> PyResult<Query> {
    Query::parse(text).map_err(|e| ParseError::new_err(e.to_string()))
}

/// An indexed, immutable execution trace.
#[pyclass(module = "tracequery", frozen)]
struct Trace {
    store: TraceStore,
}

impl Trace {
    fn eval(&self, text: &str) -> PyResult<QueryResult> {
        parse_query(text)?.evaluate(&self.store).map_err(|e| QueryError::new_err(e.to_string()))
    }
}

#[pymethods]
impl Trace {
    /// Parses trace text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Trace> {
        let events = parse_trace(text).map_err(|e| ParseError::new_err(e.to_string()))?;
        let store = TraceStore::load(events).map_err(|e| ParseError::new_err(e.to_string()))?;
        Ok(Trace { store })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Trace> {
        let text = std::fs::read_to_string(path).map_err(|e| PyValueError::new_err(format!("{}: {}", path, e)))?;
        Trace::parse(&text)
    }

    /// A synthetic trace from the seeded generator.
    #[staticmethod]
    #[pyo3(signature = (seed=0, threads=2, max_events=2000, max_call_depth=8, uncaught_probability=0.3))]
    fn generate(
        seed: u64,
        threads: usize,
        max_events: usize,
        max_call_depth: usize,
        uncaught_probability: f64,
    ) -> PyResult<Trace> {
        let cfg = GenConfig {
            seed,
            threads,
            max_events,
            max_call_depth,
            uncaught_exception_probability: uncaught_probability,
            ..GenConfig::default()
        };
        let (events, _) = generate(&cfg).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let store = TraceStore::load(events).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Trace { store })
    }

    fn __len__(&self) -> usize {
        self.store.len()
    }

    fn __repr__(&self) -> String {
        match self.store.interval() {
            Some(iv) => format!("<Trace {} events in [{}, {}]>", self.store.len(), iv.lo(), iv.hi()),
            None => format!("<Trace {} events>", self.store.len()),
        }
    }

    fn max_id(&self) -> Option<u64> {
        self.store.max_id().map(|i| i.0)
    }

    fn threads(&self) -> Vec<String> {
        self.store.threads().map(str::to_string).collect()
    }

    fn serialize(&self) -> String {
        serialize_trace(self.store.events())
    }

    /// A view holding only events with ids in `[lo, hi]`.
    fn restrict(&self, lo: u64, hi: u64) -> PyResult<Trace> {
        let iv = HistoryInterval::new(lo, hi).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Trace { store: self.store.restrict(iv) })
    }

    /// Evaluates a query such as `"call-chain 15"` and returns its JSON value.
    fn query(&self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        json(py, &self.eval(text)?.to_json_string())
    }

    fn query_json(&self, text: &str) -> PyResult<String> {
        Ok(self.eval(text)?.to_json_string())
    }

    fn query_table(&self, text: &str) -> PyResult<String> {
        Ok(self.eval(text)?.to_table())
    }

    /// Flat rows of a query result, as used by diffs.
    fn rows(&self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let rows = self.eval(text)?.rows();
        json(py, &serde_json::to_string(&rows).expect("rows serialize"))
    }

    /// Searches for a scenario given in scenario text.
    fn run_scenario(&self, py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let spec = parse_scenario(text).map_err(scenario_err)?;
        let r = SavedQuery::scenario(spec.name.clone(), spec).evaluate(&self.store).map_err(session_err)?;
        json(py, &r.to_json_string())
    }
}

/// Saved queries with answers cached per trace fingerprint.
#[pyclass(module = "tracequery")]
struct Session {
    inner: tracequery_core::Session,
}

fn projection(spec: Option<&Bound<'_, PyAny>>) -> PyResult<Projection> {
    let Some(spec) = spec else {
        return Ok(Projection::default());
    };
    if let Ok(s) = spec.extract::<String>() {
        return match s.as_str() {
            "all" => Ok(Projection::All),
            "drop-ids" => Ok(Projection::default()),
            _ => Err(PyValueError::new_err("projection must be 'all', 'drop-ids', or a list of columns")),
        };
    }
    Ok(Projection::Keep(spec.extract::<Vec<String>>()?))
}

#[pymethods]
impl Session {
    /// An in-memory session, or one persisted to `path` when given.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<&str>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => tracequery_core::Session::open(p).map_err(session_err)?,
            None => tracequery_core::Session::new(),
        };
        Ok(Session { inner })
    }

    fn save_query(&mut self, name: &str, text: &str) -> PyResult<()> {
        let q = parse_query(text)?;
        self.inner.save_query(SavedQuery::query(name, q)).map_err(session_err)
    }

    fn save_scenario(&mut self, name: &str, text: &str) -> PyResult<()> {
        let spec = parse_scenario(text).map_err(scenario_err)?;
        self.inner.save_query(SavedQuery::scenario(name, spec)).map_err(session_err)
    }

    fn names(&self) -> Vec<String> {
        self.inner.queries().iter().map(|q| q.name.clone()).collect()
    }

    fn run_saved(&mut self, py: Python<'_>, name: &str, trace: &Trace) -> PyResult<Py<PyAny>> {
        let a = self.inner.run_saved(name, &trace.store).map_err(session_err)?;
        json(py, &a.to_json_string())
    }

    fn evaluation_count(&self, name: &str) -> u64 {
        self.inner.evaluation_count(name)
    }

    fn clear_cache(&mut self) {
        self.inner.clear_cache();
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Compares saved query `a` on `trace_a` with `b` on `trace_b`
    /// (defaulting to `trace_a`). `projection` is `'drop-ids'` (default),
    /// `'all'`, or a list of columns to keep.
    #[pyo3(signature = (a, b, trace_a, trace_b=None, projection=None))]
    fn diff(
        &mut self,
        py: Python<'_>,
        a: &str,
        b: &str,
        trace_a: &Trace,
        trace_b: Option<&Trace>,
        projection: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Py<PyAny>> {
        let p = self::projection(projection)?;
        let ra = self.inner.run_saved(a, &trace_a.store).map_err(session_err)?;
        let rb = self
            .inner
            .run_saved(b, &trace_b.unwrap_or(trace_a).store)
            .map_err(session_err)?;
        let d = diff_results(&ra, &rb, &p).map_err(session_err)?;
        json(py, &d.to_json().to_string())
    }
}

/// Canonical text of an event pattern.
#[pyfunction]
fn canonical_pattern(text: &str) -> PyResult<String> {
    let p = parse_pattern(text).map_err(|e| ParseError::new_err(e.to_string()))?;
    Ok(pattern_to_string(&p))
}

/// Canonical text of a query.
#[pyfunction]
fn canonical_query(text: &str) -> PyResult<String> {
    Ok(parse_query(text)?.to_string())
}

#[pyfunction]
fn query_verbs() -> Vec<(String, String)> {
    QUERY_VERBS.iter().map(|(v, a)| (v.to_string(), a.to_string())).collect()
}

#[pymodule]
fn tracequery(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<Trace>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(canonical_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_query, m)?)?;
    m.add_function(wrap_pyfunction!(query_verbs, m)?)?;
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("QueryError", py.get_type::<QueryError>())?;
    m.add("SessionError", py.get_type::<SessionFailure>())?;
    Ok(())
}
