//! Postmortem analysis of recorded program executions.
//!
//! A trace in the JEL fact format is parsed ([`jel`]), loaded into an
//! indexed immutable store ([`store`]) and queried with a catalog of
//! debugging primitives ([`query`]): call chains, enclosing environments,
//! object-state reconstruction, histories and existence checks. Ordered
//! multi-event patterns are matched by [`scenario`], saved queries with
//! cached answers and result diffing live in [`session`], and [`gen`]
//! produces seeded synthetic traces together with a replay oracle.

pub mod command;
pub mod gen;
pub mod jel;
pub mod model;
pub mod pattern;
pub mod query;
pub mod scenario;
pub mod session;
pub mod store;

pub use command::{rows_to_table, run_query, CommandError, Query, QueryResult, Range};
pub use gen::{generate, GenConfig, GenError, GroundTruth};
pub use jel::{parse_trace, serialize_trace, ParseError};
pub use model::{
    Catch, CatchFilter, EventId, EventKind, EventPattern, ExecutionEvent, FieldDecl, FieldKind,
    LocalVar, Location, ObjectRef, Subject, TraceEvent, Value,
};
pub use pattern::{parse_pattern, pattern_to_string, Slot};
pub use query::QueryError;
pub use scenario::{
    parse_scenario, run_scenario, serialize_scenario, Binding, ScenarioError, ScenarioResult,
    ScenarioSpec, ScenarioStep,
};
pub use session::{diff_results, Answer, DiffReport, Projection, SavedQuery, Session, SessionError};
pub use store::{HistoryInterval, StoreError, TraceStore};
