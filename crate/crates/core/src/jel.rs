//! Reader and writer for the JEL textual trace format.
//!
//! A trace is a sequence of Prolog-style facts:
//!
//! ```text
//! event(0, 'main', threadstart('main')).
//! event(1, 'main', methodcall(l('Example.java', 20), c('Example'), 'main', [o('java.lang.String[]', 641)])).
//! ```
//!
//! Reading happens in two layers. A small lexer and recursive-descent term
//! reader turn text into generic [`Term`]s; a decoder then maps terms onto
//! the typed [`ExecutionEvent`] payloads. The term layer is shared with the
//! scenario and query-command grammars, which embed JEL terms.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{
    Catch, EventId, ExecutionEvent, FieldDecl, FieldKind, LocalVar, Location, ObjectRef, Subject,
    TraceEvent, Value,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line_number}, column {column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line_number: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl Pos {
    pub(crate) fn error(self, expected: impl Into<String>, found: impl Into<String>) -> ParseError {
        ParseError {
            line_number: self.line,
            column: self.column,
            expected: expected.into(),
            found: found.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Atom { text: String, quoted: bool },
    Number(String),
    Var(String),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Atom { text, quoted: true } => write!(f, "'{}'", text),
            Tok::Atom { text, .. } => write!(f, "`{}`", text),
            Tok::Number(n) => write!(f, "number {}", n),
            Tok::Var(v) => write!(f, "variable ${}", v),
            Tok::Punct(c) => write!(f, "`{}`", c),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

/// Length in bytes of the numeric literal starting at `s`, if any.
fn number_prefix(s: &[u8]) -> Option<usize> {
    let mut i = 0;
    if s.first() == Some(&b'-') {
        i += 1;
    }
    let digits = |from: usize| s[from..].iter().take_while(|b| b.is_ascii_digit()).count();
    let int = digits(i);
    if int == 0 {
        return None;
    }
    i += int;
    if s.get(i) == Some(&b'.') {
        let frac = digits(i + 1);
        if frac > 0 {
            i += 1 + frac;
        }
    }
    if matches!(s.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(s.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        let exp = digits(j);
        if exp > 0 {
            i = j + exp;
        }
    }
    Some(i)
}

/// True when `s` re-lexes as exactly one number token.
pub(crate) fn is_number_token(s: &str) -> bool {
    number_prefix(s.as_bytes()) == Some(s.len())
}

fn is_atom_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_atom_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'-'
}

pub(crate) struct Lexer<'a> {
    src: &'a [u8],
    i: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Self::at(src, Pos { line: 1, column: 1 })
    }

    /// Lexes `src` as if it started at `origin` within a larger document.
    pub(crate) fn at(src: &'a str, origin: Pos) -> Self {
        Lexer {
            src: src.as_bytes(),
            i: 0,
            line: origin.line,
            col: origin.column,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.col,
        }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.i];
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn skip_trivia(&mut self) {
        while self.i < self.src.len() {
            match self.src[self.i] {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'%' => {
                    while self.i < self.src.len() && self.src[self.i] != b'\n' {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    pub(crate) fn next_token(&mut self) -> Result<(Tok, Pos), ParseError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(&c) = self.src.get(self.i) else {
            return Ok((Tok::Eof, pos));
        };
        if c == b'\'' {
            self.bump();
            let mut text = Vec::new();
            loop {
                match self.src.get(self.i) {
                    None => return Err(pos.error("closing quote", "end of input")),
                    Some(b'\'') => {
                        self.bump();
                        if self.src.get(self.i) == Some(&b'\'') {
                            self.bump();
                            text.push(b'\'');
                        } else {
                            break;
                        }
                    }
                    Some(_) => text.push(self.bump()),
                }
            }
            let text = String::from_utf8(text).map_err(|_| pos.error("text", "invalid UTF-8"))?;
            return Ok((Tok::Atom { text, quoted: true }, pos));
        }
        if let Some(n) = number_prefix(&self.src[self.i..]) {
            let start = self.i;
            for _ in 0..n {
                self.bump();
            }
            let text = String::from_utf8_lossy(&self.src[start..self.i]).into_owned();
            return Ok((Tok::Number(text), pos));
        }
        if is_atom_start(c) || c == b'$' {
            let var = c == b'$';
            if var {
                self.bump();
            }
            let start = self.i;
            while self.i < self.src.len() && is_atom_char(self.src[self.i]) {
                self.bump();
            }
            let text = String::from_utf8_lossy(&self.src[start..self.i]).into_owned();
            if var {
                if text.is_empty() {
                    return Err(pos.error("variable name", "`$`"));
                }
                return Ok((Tok::Var(text), pos));
            }
            return Ok((Tok::Atom {
                text,
                quoted: false,
            }, pos));
        }
        if b"()[],.=:;".contains(&c) {
            self.bump();
            return Ok((Tok::Punct(c as char), pos));
        }
        let found = std::str::from_utf8(&self.src[self.i..])
            .ok()
            .and_then(|s| s.chars().next())
            .unwrap_or(c as char);
        Err(pos.error("term", format!("`{}`", found)))
    }
}

/// A generic Prolog-style term with the position it started at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub kind: TermKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermKind {
    Atom(String),
    Number(String),
    Var(String),
    Compound(String, Vec<Term>),
    List(Vec<Term>),
}

impl Term {
    fn describe(&self) -> String {
        match &self.kind {
            TermKind::Atom(a) => format!("atom '{}'", a),
            TermKind::Number(n) => format!("number {}", n),
            TermKind::Var(v) => format!("variable ${}", v),
            TermKind::Compound(f, args) => format!("{}/{}", f, args.len()),
            TermKind::List(_) => "list".to_string(),
        }
    }

    pub(crate) fn error(&self, expected: impl Into<String>) -> ParseError {
        self.pos.error(expected, self.describe())
    }

    pub(crate) fn as_atom(&self) -> Option<&str> {
        match &self.kind {
            TermKind::Atom(a) => Some(a),
            _ => None,
        }
    }
}

/// Recursive-descent term reader with one token of lookahead.
pub(crate) struct TermReader<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Tok, Pos)>,
}

impl<'a> TermReader<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        TermReader {
            lexer: Lexer::new(src),
            peeked: None,
        }
    }

    pub(crate) fn at(src: &'a str, origin: Pos) -> Self {
        TermReader {
            lexer: Lexer::at(src, origin),
            peeked: None,
        }
    }

    pub(crate) fn peek(&mut self) -> Result<&(Tok, Pos), ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().expect("peeked"))
    }

    pub(crate) fn next(&mut self) -> Result<(Tok, Pos), ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_token(),
        }
    }

    pub(crate) fn at_eof(&mut self) -> Result<bool, ParseError> {
        Ok(self.peek()?.0 == Tok::Eof)
    }

    pub(crate) fn eat_punct(&mut self, c: char) -> Result<bool, ParseError> {
        if self.peek()?.0 == Tok::Punct(c) {
            self.next()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub(crate) fn expect_punct(&mut self, c: char) -> Result<Pos, ParseError> {
        let (tok, pos) = self.next()?;
        if tok == Tok::Punct(c) {
            Ok(pos)
        } else {
            Err(pos.error(format!("`{}`", c), tok.to_string()))
        }
    }

    pub(crate) fn term(&mut self) -> Result<Term, ParseError> {
        let (tok, pos) = self.next()?;
        let kind = match tok {
            Tok::Atom { text, .. } => {
                if self.peek()?.0 == Tok::Punct('(') {
                    self.next()?;
                    let args = self.sequence(')')?;
                    if args.is_empty() {
                        return Err(pos.error("arguments", "`()`"));
                    }
                    TermKind::Compound(text, args)
                } else {
                    TermKind::Atom(text)
                }
            }
            Tok::Number(n) => TermKind::Number(n),
            Tok::Var(v) => TermKind::Var(v),
            Tok::Punct('[') => TermKind::List(self.sequence(']')?),
            other => return Err(pos.error("term", other.to_string())),
        };
        Ok(Term { kind, pos })
    }

    /// Comma-separated terms up to and including `close`.
    fn sequence(&mut self, close: char) -> Result<Vec<Term>, ParseError> {
        let mut items = Vec::new();
        if self.eat_punct(close)? {
            return Ok(items);
        }
        loop {
            items.push(self.term()?);
            let (tok, pos) = self.next()?;
            match tok {
                Tok::Punct(',') => continue,
                Tok::Punct(c) if c == close => return Ok(items),
                other => return Err(pos.error(format!("`,` or `{}`", close), other.to_string())),
            }
        }
    }
}

fn args_of<'t>(t: &'t Term, functor: &str, arity: usize) -> Option<&'t [Term]> {
    match &t.kind {
        TermKind::Compound(f, args) if f == functor && args.len() == arity => Some(args),
        _ => None,
    }
}

pub(crate) fn decode_atom(t: &Term, what: &str) -> Result<String, ParseError> {
    match &t.kind {
        TermKind::Atom(a) if !a.is_empty() => Ok(a.clone()),
        _ => Err(t.error(what)),
    }
}

pub(crate) fn decode_u64(t: &Term, what: &str) -> Result<u64, ParseError> {
    match &t.kind {
        TermKind::Number(n) => n.parse().map_err(|_| t.error(what)),
        _ => Err(t.error(what)),
    }
}

pub(crate) fn decode_location(t: &Term) -> Result<Location, ParseError> {
    let args = args_of(t, "l", 2).ok_or_else(|| t.error("location l(File, Line)"))?;
    let file = decode_atom(&args[0], "source file name")?;
    let line = decode_u64(&args[1], "positive line number")?;
    if line == 0 || line > u32::MAX as u64 {
        return Err(args[1].error("positive line number"));
    }
    Ok(Location::new(file, line as u32))
}

pub(crate) fn decode_object(t: &Term) -> Result<ObjectRef, ParseError> {
    let args = args_of(t, "o", 2).ok_or_else(|| t.error("instance o(Class, Id)"))?;
    Ok(ObjectRef::new(
        decode_atom(&args[0], "class name")?,
        decode_u64(&args[1], "object id")?,
    ))
}

pub(crate) fn decode_subject(t: &Term) -> Result<Subject, ParseError> {
    if let Some(args) = args_of(t, "c", 1) {
        return Ok(Subject::Class(decode_atom(&args[0], "class name")?));
    }
    if args_of(t, "o", 2).is_some() {
        return Ok(Subject::Object(decode_object(t)?));
    }
    Err(t.error("instance o(Class, Id) or class c(Class)"))
}

pub(crate) fn decode_value(t: &Term) -> Result<Value, ParseError> {
    match &t.kind {
        TermKind::Atom(a) => Ok(Value::atom(a.clone())),
        TermKind::Number(n) => Ok(Value::Scalar(n.clone())),
        TermKind::Compound(..) => Ok(decode_subject(t)?.into()),
        _ => Err(t.error("value")),
    }
}

fn decode_list<'t>(t: &'t Term, what: &str) -> Result<&'t [Term], ParseError> {
    match &t.kind {
        TermKind::List(items) => Ok(items),
        _ => Err(t.error(what)),
    }
}

fn decode_values(t: &Term) -> Result<Vec<Value>, ParseError> {
    decode_list(t, "value list")?.iter().map(decode_value).collect()
}

fn decode_local(t: &Term) -> Result<LocalVar, ParseError> {
    let args = args_of(t, "lv", 2).ok_or_else(|| t.error("local variable lv(Name, Value)"))?;
    Ok(LocalVar::new(
        decode_atom(&args[0], "variable name")?,
        decode_value(&args[1])?,
    ))
}

fn decode_field_decl(t: &Term) -> Result<FieldDecl, ParseError> {
    if let Some(args) = args_of(t, "cf", 1) {
        return Ok(FieldDecl::class(decode_atom(&args[0], "field name")?));
    }
    if let Some(args) = args_of(t, "of", 1) {
        return Ok(FieldDecl::instance(decode_atom(&args[0], "field name")?));
    }
    Err(t.error("field declaration cf(Name) or of(Name)"))
}

fn decode_class_name(t: &Term) -> Result<String, ParseError> {
    match args_of(t, "c", 1) {
        Some(args) => decode_atom(&args[0], "class name"),
        None => decode_atom(t, "class c(Class)"),
    }
}

fn decode_catch(t: &Term) -> Result<Catch, ParseError> {
    if t.as_atom() == Some("uncaught") {
        return Ok(Catch::Uncaught);
    }
    decode_location(t)
        .map(Catch::At)
        .map_err(|_| t.error("catch location l(File, Line) or `uncaught`"))
}

pub(crate) fn decode_payload(t: &Term) -> Result<ExecutionEvent, ParseError> {
    let TermKind::Compound(functor, a) = &t.kind else {
        return Err(t.error("execution event"));
    };
    let arity = |n: usize| {
        if a.len() == n {
            Ok(())
        } else {
            Err(t.pos.error(
                format!("{} with {} arguments", functor, n),
                format!("{} arguments", a.len()),
            ))
        }
    };
    let ev = match functor.as_str() {
        "methodcall" => {
            arity(4)?;
            ExecutionEvent::MethodCall {
                location: decode_location(&a[0])?,
                subject: decode_subject(&a[1])?,
                name: decode_atom(&a[2], "method name")?,
                args: decode_values(&a[3])?,
            }
        }
        "methodexit" => {
            arity(5)?;
            ExecutionEvent::MethodExit {
                call_id: EventId(decode_u64(&a[0], "call event id")?),
                location: decode_location(&a[1])?,
                subject: decode_subject(&a[2])?,
                name: decode_atom(&a[3], "method name")?,
                return_value: decode_value(&a[4])?,
            }
        }
        "setfield" => {
            arity(4)?;
            ExecutionEvent::SetField {
                location: decode_location(&a[0])?,
                subject: decode_subject(&a[1])?,
                field_name: decode_atom(&a[2], "field name")?,
                value: decode_value(&a[3])?,
            }
        }
        "datastructure" => {
            arity(2)?;
            ExecutionEvent::DataStructure {
                location: decode_location(&a[0])?,
                contents: decode_values(&a[1])?,
            }
        }
        "step" => {
            arity(2)?;
            ExecutionEvent::Step {
                location: decode_location(&a[0])?,
                locals: decode_list(&a[1], "local variable list")?
                    .iter()
                    .map(decode_local)
                    .collect::<Result<_, _>>()?,
            }
        }
        "exception" => {
            arity(4)?;
            ExecutionEvent::Exception {
                location: decode_location(&a[0])?,
                instance: decode_object(&a[1])?,
                message: decode_value(&a[2])?,
                catch: decode_catch(&a[3])?,
            }
        }
        "threadstart" => {
            arity(1)?;
            ExecutionEvent::ThreadStart {
                group: decode_atom(&a[0], "thread group")?,
            }
        }
        "threaddeath" => {
            arity(1)?;
            ExecutionEvent::ThreadDeath {
                group: decode_atom(&a[0], "thread group")?,
            }
        }
        "memberfields" => {
            arity(2)?;
            ExecutionEvent::MemberFields {
                class_name: decode_class_name(&a[0])?,
                fields: decode_list(&a[1], "member field list")?
                    .iter()
                    .map(decode_field_decl)
                    .collect::<Result<_, _>>()?,
            }
        }
        other => {
            return Err(t.pos.error(
                "event kind (methodcall, methodexit, setfield, datastructure, step, exception, threadstart, threaddeath, memberfields)",
                format!("`{}`", other),
            ))
        }
    };
    Ok(ev)
}

/// Parses a whole JEL document into events, in file order.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>, ParseError> {
    let mut r = TermReader::new(text);
    let mut events = Vec::new();
    loop {
        let (tok, pos) = r.next()?;
        match tok {
            Tok::Eof => break,
            Tok::Atom { ref text, .. } if text == "event" => {}
            other => return Err(pos.error("`event`", other.to_string())),
        }
        r.expect_punct('(')?;
        let id = r.term()?;
        let id = EventId(decode_u64(&id, "non-negative integer event id")?);
        r.expect_punct(',')?;
        let thread = decode_atom(&r.term()?, "thread name")?;
        r.expect_punct(',')?;
        let payload = decode_payload(&r.term()?)?;
        r.expect_punct(')')?;
        r.expect_punct('.')?;
        events.push(TraceEvent {
            id,
            thread,
            event: payload,
        });
    }
    Ok(events)
}

/// Canonical single-line rendering of every event.
pub fn serialize_trace(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let _ = writeln!(out, "{}.", e);
    }
    out
}

pub(crate) struct Quoted<'a>(pub &'a str);

impl fmt::Display for Quoted<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('\'')?;
        for c in self.0.chars() {
            if c == '\'' {
                f.write_str("''")?;
            } else {
                f.write_char(c)?;
            }
        }
        f.write_char('\'')
    }
}

struct Seq<'a, T>(&'a [T]);

impl<T: fmt::Display> fmt::Display for Seq<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('[')?;
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", item)?;
        }
        f.write_char(']')
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l({}, {})", Quoted(&self.file), self.line)
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o({}, {})", Quoted(&self.class_name), self.object_id)
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Class(c) => write!(f, "c({})", Quoted(c)),
            Subject::Object(o) => o.fmt(f),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("'null'"),
            Value::Void => f.write_str("'void'"),
            Value::Scalar(s) if is_number_token(s) => f.write_str(s),
            Value::Scalar(s) => Quoted(s).fmt(f),
            Value::Object(o) => o.fmt(f),
            Value::Class(c) => write!(f, "c({})", Quoted(c)),
        }
    }
}

impl fmt::Display for LocalVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lv({}, {})", Quoted(&self.name), self.value)
    }
}

impl fmt::Display for FieldDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let functor = match self.kind {
            FieldKind::Class => "cf",
            FieldKind::Instance => "of",
        };
        write!(f, "{}({})", functor, Quoted(&self.name))
    }
}

impl fmt::Display for Catch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Catch::At(l) => l.fmt(f),
            Catch::Uncaught => f.write_str("uncaught"),
        }
    }
}

impl fmt::Display for ExecutionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecutionEvent::MethodCall {
                location,
                subject,
                name,
                args,
            } => write!(
                f,
                "methodcall({}, {}, {}, {})",
                location,
                subject,
                Quoted(name),
                Seq(args)
            ),
            ExecutionEvent::MethodExit {
                call_id,
                location,
                subject,
                name,
                return_value,
            } => write!(
                f,
                "methodexit({}, {}, {}, {}, {})",
                call_id,
                location,
                subject,
                Quoted(name),
                return_value
            ),
            ExecutionEvent::SetField {
                location,
                subject,
                field_name,
                value,
            } => write!(
                f,
                "setfield({}, {}, {}, {})",
                location,
                subject,
                Quoted(field_name),
                value
            ),
            ExecutionEvent::DataStructure { location, contents } => {
                write!(f, "datastructure({}, {})", location, Seq(contents))
            }
            ExecutionEvent::Step { location, locals } => {
                write!(f, "step({}, {})", location, Seq(locals))
            }
            ExecutionEvent::Exception {
                location,
                instance,
                message,
                catch,
            } => write!(
                f,
                "exception({}, {}, {}, {})",
                location, instance, message, catch
            ),
            ExecutionEvent::ThreadStart { group } => write!(f, "threadstart({})", Quoted(group)),
            ExecutionEvent::ThreadDeath { group } => write!(f, "threaddeath({})", Quoted(group)),
            ExecutionEvent::MemberFields { class_name, fields } => write!(
                f,
                "memberfields(c({}), {})",
                Quoted(class_name),
                Seq(fields)
            ),
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event({}, {}, {})", self.id, Quoted(&self.thread), self.event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventKind;

    #[test]
    fn single_threadstart() {
        let es = parse_trace("event(0, 'main', threadstart('main')).").unwrap();
        assert_eq!(
            es,
            vec![TraceEvent::new(
                0,
                "main",
                ExecutionEvent::ThreadStart {
                    group: "main".into()
                }
            )]
        );
    }

    #[test]
    fn empty_and_comment_only() {
        assert!(parse_trace("").unwrap().is_empty());
        assert!(parse_trace("  % nothing here\n\n").unwrap().is_empty());
        assert_eq!(serialize_trace(&[]), "");
    }

    #[test]
    fn step_serialization_is_canonical() {
        let e = TraceEvent::new(
            3,
            "main",
            ExecutionEvent::Step {
                location: Location::new("Example.java", 3),
                locals: vec![],
            },
        );
        assert_eq!(
            serialize_trace(&[e]),
            "event(3, 'main', step(l('Example.java', 3), [])).\n"
        );
    }

    #[test]
    fn unquoted_atoms_equal_quoted() {
        let a = parse_trace("event(0, main, exception(l('A.java', 1), o(e, 1), null, uncaught)).")
            .unwrap();
        let b = parse_trace(
            "event(0, 'main', exception(l('A.java', 1), o('e', 1), 'null', 'uncaught')).",
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].event.value(), Some(&Value::Null));
    }

    #[test]
    fn embedded_quotes_round_trip() {
        let e = TraceEvent::new(
            9,
            "it's",
            ExecutionEvent::SetField {
                location: Location::new("O'Brien.java", 4),
                subject: Subject::class("K"),
                field_name: "f".into(),
                value: Value::Scalar("don't".into()),
            },
        );
        let text = serialize_trace(std::slice::from_ref(&e));
        assert!(text.contains("'don''t'"));
        assert_eq!(parse_trace(&text).unwrap(), vec![e]);
    }

    #[test]
    fn numeric_scalars_keep_their_text() {
        let es = parse_trace(
            "event(1, t, datastructure(l(f, 2), [007, -3, 2.50, 1e9, 'x y', c('K')])).",
        )
        .unwrap();
        let ExecutionEvent::DataStructure { contents, .. } = &es[0].event else {
            panic!()
        };
        assert_eq!(
            contents,
            &vec![
                Value::Scalar("007".into()),
                Value::Scalar("-3".into()),
                Value::Scalar("2.50".into()),
                Value::Scalar("1e9".into()),
                Value::Scalar("x y".into()),
                Value::Class("K".into()),
            ]
        );
        let again = parse_trace(&serialize_trace(&es)).unwrap();
        assert_eq!(again, es);
    }

    #[test]
    fn memberfields_and_locals() {
        let es = parse_trace(
            "event(2, t, memberfields(c('Acct'), [cf('count'), of('balance')])).\n\
             event(3, t, step(l('A.java', 7), [lv('i', 0), lv(o, o('Acct', 5))])).",
        )
        .unwrap();
        assert_eq!(es[0].kind(), EventKind::MemberFields);
        assert_eq!(
            es[0].event,
            ExecutionEvent::MemberFields {
                class_name: "Acct".into(),
                fields: vec![FieldDecl::class("count"), FieldDecl::instance("balance")]
            }
        );
        assert_eq!(parse_trace(&serialize_trace(&es)).unwrap(), es);
    }

    #[test]
    fn missing_period_is_reported() {
        let err = parse_trace("event(0, 'main', threadstart('main'))\nevent(1, 'main', threaddeath('main')).")
            .unwrap_err();
        assert_eq!(err.line_number, 2);
        assert_eq!(err.column, 1);
        assert_eq!(err.expected, "`.`");
    }

    #[test]
    fn unbalanced_parens() {
        let err = parse_trace("event(0, 'main', threadstart('main').").unwrap_err();
        assert_eq!(err.line_number, 1);
        assert!(err.expected.contains(')'), "{err}");
    }

    #[test]
    fn unknown_functor_is_hard_error() {
        let err = parse_trace("event(0, 'main', monitorenter('main')).").unwrap_err();
        assert_eq!((err.line_number, err.column), (1, 18));
        assert_eq!(err.found, "`monitorenter`");
    }

    #[test]
    fn non_integer_id() {
        let err = parse_trace("event(x, 'main', threadstart('main')).").unwrap_err();
        assert_eq!(err.column, 7);
        assert!(parse_trace("event(-1, 'main', threadstart('main')).").is_err());
        assert!(parse_trace("event(1.5, 'main', threadstart('main')).").is_err());
    }

    #[test]
    fn line_zero_rejected() {
        assert!(parse_trace("event(0, t, step(l('A.java', 0), [])).").is_err());
        assert!(parse_trace("event(0, t, step(l('', 3), [])).").is_err());
    }

    #[test]
    fn unterminated_quote() {
        let err = parse_trace("event(0, 'main").unwrap_err();
        assert_eq!(err.expected, "closing quote");
    }

    #[test]
    fn number_token_detection() {
        for s in ["0", "42", "-7", "3.14", "1e5", "2.5E-3"] {
            assert!(is_number_token(s), "{s}");
        }
        for s in ["", "-", "1.", ".5", "1e", "12a", "x1"] {
            assert!(!is_number_token(s), "{s}");
        }
    }
}
