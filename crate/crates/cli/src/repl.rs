//! Command interpreter shared by the interactive loop and batch mode.

use std::fmt;
use std::fs;
use std::path::Path;

use tracequery_core::command::QUERY_VERBS;
use tracequery_core::scenario::parse_scenario;
use tracequery_core::session::{diff_results, Answer, Projection, SavedKind};
use tracequery_core::{
    generate, parse_trace, serialize_trace, GenConfig, HistoryInterval, Query, QueryResult,
    SavedQuery, ScenarioError, Session, SessionError, TraceStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
}

/// A failed command. Usage errors cover bad syntax, unreadable files and
/// missing state; query errors come from evaluation.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Query(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Query(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Query(m) => f.write_str(m),
        }
    }
}

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Command(tracequery_core::CommandError::Parse(_))
            | SessionError::Scenario(ScenarioError::SpecParseError(_))
            | SessionError::Scenario(ScenarioError::InvalidSpec(_))
            | SessionError::InvalidName(_)
            | SessionError::UnknownQuery(_)
            | SessionError::DuplicateName(_)
            | SessionError::Format { .. }
            | SessionError::Io(_) => CliError::Usage(e.to_string()),
            SessionError::Command(_) | SessionError::IncompatibleResults(..) => CliError::Query(e.to_string()),
        }
    }
}

pub enum Flow {
    Continue,
    Quit,
}

pub const HELP: &str = "\
commands:
  load <file>                         read a trace file
  interval <lo> <hi> | interval off   restrict later queries to an id window
  query <verb> <args>                 evaluate a query (see below)
  scenario run <file>                 search for a scenario
  save-query <name> <verb> <args>     save a query in the session
  save-query <name> scenario <file>   save a scenario in the session
  run-saved <name>                    evaluate a saved query, using the cache
  diff <a> <b> [against <file>] [all | keep <col>,.. | drop <col>,..]
                                      compare two saved answers
  list                                saved queries and evaluation counts
  clear-cache                         drop cached answers
  export json|table [<file>]          set the output format, or write the last result
  generate <file> [seed=N] [threads=N] [events=N] [depth=N] [uncaught=P]
                                      write and load a synthetic trace
  help                                this text
  quit                                leave
queries:
";

pub fn help_text() -> String {
    let mut out = HELP.to_string();
    for (verb, args) in QUERY_VERBS {
        out.push_str(&format!("  {} {}\n", verb, args).replace(" \n", "\n"));
    }
    out
}

/// Something printable in either output format.
enum Output {
    Result(QueryResult),
    Answer(Answer),
    Diff(tracequery_core::DiffReport),
    Text(String),
}

impl Output {
    fn render(&self, f: Format) -> String {
        match (self, f) {
            (Output::Result(r), Format::Json) => format!("{}\n", r.to_json_string()),
            (Output::Result(r), Format::Table) => r.to_table(),
            (Output::Answer(a), Format::Json) => format!("{}\n", a.to_json_string()),
            (Output::Answer(a), Format::Table) => a.to_table(),
            (Output::Diff(d), Format::Json) => format!("{}\n", d.to_json()),
            (Output::Diff(d), Format::Table) => d.to_table(),
            (Output::Text(t), _) => format!("{}\n", t),
        }
    }
}

pub struct State {
    store: Option<TraceStore>,
    interval: Option<HistoryInterval>,
    pub session: Session,
    pub format: Format,
    last: Option<Output>,
}

/// Splits off the first word, which may be single-quoted.
fn word(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    if s.is_empty() {
        return None;
    }
    if let Some(rest) = s.strip_prefix('\'') {
        let end = rest.find('\'')?;
        return Some((rest[..end].to_string(), rest[end + 1..].trim_start()));
    }
    let end = s.find(char::is_whitespace).unwrap_or(s.len());
    Some((s[..end].to_string(), s[end..].trim_start()))
}

fn words(s: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    let mut rest = s;
    while !rest.trim().is_empty() {
        let (w, r) = word(rest).ok_or_else(|| usage("unterminated quote"))?;
        out.push(w);
        rest = r;
    }
    Ok(out)
}

fn read_file(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {}", path, e)))
}

pub fn load_trace(path: &str) -> Result<TraceStore, CliError> {
    let text = read_file(path)?;
    let events = parse_trace(&text).map_err(|e| usage(format!("{}: {}", path, e)))?;
    TraceStore::load(events).map_err(|e| usage(format!("{}: {}", path, e)))
}

fn parse_u64(s: &str, what: &str) -> Result<u64, CliError> {
    s.parse().map_err(|_| usage(format!("expected {} but found `{}`", what, s)))
}

impl State {
    pub fn new(session: Session, format: Format) -> Self {
        State {
            store: None,
            interval: None,
            session,
            format,
            last: None,
        }
    }

    pub fn set_store(&mut self, store: TraceStore) {
        self.store = Some(store);
        self.interval = None;
    }

    pub fn set_interval(&mut self, lo: u64, hi: u64) -> Result<(), CliError> {
        self.interval = Some(HistoryInterval::new(lo, hi).map_err(|e| usage(e.to_string()))?);
        Ok(())
    }

    fn windowed(&self, s: TraceStore) -> TraceStore {
        match self.interval {
            Some(iv) => s.restrict(iv),
            None => s,
        }
    }

    fn active(&self) -> Result<TraceStore, CliError> {
        let s = self.store.as_ref().ok_or_else(|| usage("no trace loaded; use `load <file>`"))?;
        Ok(self.windowed(s.clone()))
    }

    /// Executes one command line, returning the text to print.
    pub fn execute(&mut self, line: &str) -> Result<(String, Flow), CliError> {
        let line = line.trim();
        let Some((verb, rest)) = word(line) else {
            return Ok((String::new(), Flow::Continue));
        };
        if verb.starts_with('#') {
            return Ok((String::new(), Flow::Continue));
        }
        let out = match verb.as_str() {
            "quit" | "exit" => return Ok((String::new(), Flow::Quit)),
            "help" => Output::Text(help_text().trim_end().to_string()),
            "load" => {
                let [path] = &words(rest)?[..] else {
                    return Err(usage("usage: load <file>"));
                };
                let s = load_trace(path)?;
                let msg = format!("loaded {} events from {}", s.len(), path);
                self.set_store(s);
                Output::Text(msg)
            }
            "interval" => match &words(rest)?[..] {
                [off] if off == "off" => {
                    self.interval = None;
                    Output::Text("interval off".into())
                }
                [] => Output::Text(match self.interval {
                    Some(iv) => format!("interval {} {}", iv.lo().0, iv.hi().0),
                    None => "interval off".into(),
                }),
                [lo, hi] => {
                    self.set_interval(parse_u64(lo, "an event id")?, parse_u64(hi, "an event id")?)?;
                    Output::Text(format!("interval {} {}", lo, hi))
                }
                _ => return Err(usage("usage: interval <lo> <hi> | interval off")),
            },
            "query" => {
                let q = Query::parse(rest).map_err(|e| usage(format!("parse error: {}", e)))?;
                let s = self.active()?;
                Output::Result(q.evaluate(&s).map_err(|e| CliError::Query(e.to_string()))?)
            }
            "scenario" => {
                let [sub, path] = &words(rest)?[..] else {
                    return Err(usage("usage: scenario run <file>"));
                };
                if sub != "run" {
                    return Err(usage("usage: scenario run <file>"));
                }
                let spec = parse_scenario(&read_file(path)?).map_err(|e| usage(format!("{}: {}", path, e)))?;
                let s = self.active()?;
                let q = SavedQuery::scenario(spec.name.clone(), spec);
                Output::Result(q.evaluate(&s)?)
            }
            "save-query" => {
                let (name, body) = word(rest).ok_or_else(|| usage("usage: save-query <name> <query>"))?;
                let saved = match word(body) {
                    Some((kw, path)) if kw == "scenario" => {
                        let path = path.trim();
                        let spec = parse_scenario(&read_file(path)?).map_err(|e| usage(format!("{}: {}", path, e)))?;
                        SavedQuery::scenario(name.clone(), spec)
                    }
                    Some(_) => SavedQuery::query(
                        name.clone(),
                        Query::parse(body).map_err(|e| usage(format!("parse error: {}", e)))?,
                    ),
                    None => return Err(usage("usage: save-query <name> <query>")),
                };
                self.session.save_query(saved)?;
                Output::Text(format!("saved {}", name))
            }
            "run-saved" => {
                let [name] = &words(rest)?[..] else {
                    return Err(usage("usage: run-saved <name>"));
                };
                let s = self.active()?;
                Output::Answer(self.session.run_saved(name, &s)?)
            }
            "diff" => self.diff(&words(rest)?)?,
            "list" => {
                let mut lines = Vec::new();
                for q in self.session.queries() {
                    let text = match &q.kind {
                        SavedKind::Query(q) => q.to_string(),
                        SavedKind::Scenario(spec) => format!("scenario {} ({} steps)", spec.name, spec.steps.len()),
                    };
                    lines.push(format!("{}  [{} evaluations]  {}", q.name, self.session.evaluation_count(&q.name), text));
                }
                if lines.is_empty() {
                    lines.push("(no saved queries)".into());
                }
                Output::Text(lines.join("\n"))
            }
            "clear-cache" => {
                self.session.clear_cache();
                Output::Text("cache cleared".into())
            }
            "export" => {
                let w = words(rest)?;
                let format = match w.first().map(String::as_str) {
                    Some("json") => Format::Json,
                    Some("table") => Format::Table,
                    _ => return Err(usage("usage: export json|table [<file>]")),
                };
                match &w[1..] {
                    [] => {
                        self.format = format;
                        return Ok((String::new(), Flow::Continue));
                    }
                    [path] => {
                        let last = self.last.as_ref().ok_or_else(|| usage("nothing to export yet"))?;
                        fs::write(path, last.render(format)).map_err(|e| usage(format!("{}: {}", path, e)))?;
                        return Ok((format!("wrote {}\n", path), Flow::Continue));
                    }
                    _ => return Err(usage("usage: export json|table [<file>]")),
                }
            }
            "generate" => self.generate(&words(rest)?)?,
            other => return Err(usage(format!("unknown command `{}`; try `help`", other))),
        };
        let text = out.render(self.format);
        if !matches!(out, Output::Text(_)) {
            self.last = Some(out);
        }
        Ok((text, Flow::Continue))
    }

    fn diff(&mut self, args: &[String]) -> Result<Output, CliError> {
        const USAGE: &str = "usage: diff <a> <b> [against <file>] [all | keep <col>,.. | drop <col>,..]";
        let [a, b, rest @ ..] = args else {
            return Err(usage(USAGE));
        };
        let mut other = None;
        let mut projection = Projection::default();
        let mut i = 0;
        let cols = |s: Option<&String>| -> Result<Vec<String>, CliError> {
            let s = s.ok_or_else(|| usage(USAGE))?;
            Ok(s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect())
        };
        while i < rest.len() {
            match rest[i].as_str() {
                "against" => {
                    let path = rest.get(i + 1).ok_or_else(|| usage(USAGE))?;
                    other = Some(self.windowed(load_trace(path)?));
                    i += 2;
                }
                "all" => {
                    projection = Projection::All;
                    i += 1;
                }
                "keep" => {
                    projection = Projection::Keep(cols(rest.get(i + 1))?);
                    i += 2;
                }
                "drop" => {
                    projection = Projection::Drop(cols(rest.get(i + 1))?);
                    i += 2;
                }
                _ => return Err(usage(USAGE)),
            }
        }
        let s = self.active()?;
        let ra = self.session.run_saved(a, &s)?;
        let rb = self.session.run_saved(b, other.as_ref().unwrap_or(&s))?;
        Ok(Output::Diff(diff_results(&ra, &rb, &projection)?))
    }

    fn generate(&mut self, args: &[String]) -> Result<Output, CliError> {
        let [path, opts @ ..] = args else {
            return Err(usage("usage: generate <file> [seed=N] [threads=N] [events=N] [depth=N] [uncaught=P]"));
        };
        let mut cfg = GenConfig::default();
        for o in opts {
            let (k, v) = o.split_once('=').ok_or_else(|| usage(format!("expected key=value but found `{}`", o)))?;
            match k {
                "seed" => cfg.seed = parse_u64(v, "a seed")?,
                "threads" => cfg.threads = parse_u64(v, "a thread count")? as usize,
                "events" => cfg.max_events = parse_u64(v, "an event count")? as usize,
                "depth" => cfg.max_call_depth = parse_u64(v, "a call depth")? as usize,
                "uncaught" => {
                    cfg.uncaught_exception_probability =
                        v.parse().map_err(|_| usage(format!("expected a probability but found `{}`", v)))?
                }
                _ => return Err(usage(format!("unknown generate option `{}`", k))),
            }
        }
        let (events, _) = generate(&cfg).map_err(|e| usage(e.to_string()))?;
        fs::write(Path::new(path), serialize_trace(&events)).map_err(|e| usage(format!("{}: {}", path, e)))?;
        let n = events.len();
        self.set_store(TraceStore::load(events).map_err(|e| CliError::Query(e.to_string()))?);
        Ok(Output::Text(format!("generated {} events into {}", n, path)))
    }
}
