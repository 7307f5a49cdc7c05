//! Textual event patterns: `<kind|any> key=term ...`.
//!
//! Keys are `thread`, `subject`, `class`, `name`, `argc`, `args`, `value`,
//! `call`, `id`, `from`, `to`, `at` and `catch`. A `$Var` in place of a
//! term records a variable slot instead of a constraint; `_` is a wildcard.

use std::fmt;

use crate::jel::{
    decode_atom, decode_location, decode_subject, decode_u64, decode_value, ParseError, Pos,
    Quoted, Term, TermKind, TermReader, Tok,
};
use crate::model::{CatchFilter, EventId, EventKind, EventPattern};

/// Event attribute a scenario variable binds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Thread,
    Subject,
    Name,
    Arg(usize),
    Value,
    CallId,
    Id,
}

pub type Slots = Vec<(Slot, String)>;

enum Item {
    Wild,
    Var(String, Pos),
    Term(Term),
}

fn item(r: &mut TermReader) -> Result<Item, ParseError> {
    if let (
        Tok::Atom {
            text,
            quoted: false,
        },
        _,
    ) = r.peek()?
    {
        if text == "_" {
            r.next()?;
            return Ok(Item::Wild);
        }
    }
    let t = r.term()?;
    Ok(match t.kind {
        TermKind::Var(v) => Item::Var(v, t.pos),
        _ => Item::Term(t),
    })
}

/// Reads a pattern up to (not including) `;` or end of input. Variables are
/// rejected unless `allow_vars` is set.
pub(crate) fn read_pattern(
    r: &mut TermReader,
    allow_vars: bool,
) -> Result<(EventPattern, Slots), ParseError> {
    let (tok, pos) = r.next()?;
    let kind = match &tok {
        Tok::Atom { text, .. } if text == "any" => None,
        Tok::Atom { text, .. } => Some(
            EventKind::from_functor(text).ok_or_else(|| pos.error("event kind or `any`", tok.to_string()))?,
        ),
        _ => return Err(pos.error("event kind or `any`", tok.to_string())),
    };
    let mut p = EventPattern {
        kind,
        ..EventPattern::default()
    };
    let mut slots = Slots::new();
    loop {
        let (tok, pos) = r.peek()?.clone();
        let key = match tok {
            Tok::Eof | Tok::Punct(';') => break,
            Tok::Atom { text, .. } => text,
            other => return Err(pos.error("pattern key", other.to_string())),
        };
        r.next()?;
        r.expect_punct('=')?;
        let mut var = |slot: Slot, name: String, at: Pos| {
            if allow_vars {
                slots.push((slot, name));
                Ok(())
            } else {
                Err(at.error("constant", format!("variable ${}", name)))
            }
        };
        if key == "args" {
            r.expect_punct('[')?;
            let mut args = Vec::new();
            if !r.eat_punct(']')? {
                loop {
                    match item(r)? {
                        Item::Wild => args.push(None),
                        Item::Var(v, at) => {
                            var(Slot::Arg(args.len()), v, at)?;
                            args.push(None);
                        }
                        Item::Term(t) => args.push(Some(decode_value(&t)?)),
                    }
                    if r.eat_punct(']')? {
                        break;
                    }
                    r.expect_punct(',')?;
                }
            }
            p.args = Some(args);
            continue;
        }
        let t = match item(r)? {
            Item::Wild => continue,
            Item::Var(v, at) => {
                let slot = match key.as_str() {
                    "thread" => Slot::Thread,
                    "subject" => Slot::Subject,
                    "name" => Slot::Name,
                    "value" => Slot::Value,
                    "call" => Slot::CallId,
                    "id" => Slot::Id,
                    _ => return Err(at.error(format!("constant for `{}`", key), format!("variable ${}", v))),
                };
                var(slot, v, at)?;
                continue;
            }
            Item::Term(t) => t,
        };
        match key.as_str() {
            "thread" => p.thread = Some(decode_atom(&t, "thread name")?),
            "subject" => p.subject = Some(decode_subject(&t)?),
            "class" => p.class_name = Some(decode_atom(&t, "class name")?),
            "name" => p.name = Some(decode_atom(&t, "name")?),
            "argc" => p.arg_count = Some(decode_u64(&t, "argument count")? as usize),
            "value" => p.value = Some(decode_value(&t)?),
            "call" => p.call_id = Some(EventId(decode_u64(&t, "call event id")?)),
            "id" => {
                let id = EventId(decode_u64(&t, "event id")?);
                p.min_id = Some(id);
                p.max_id = Some(id);
            }
            "from" => p.min_id = Some(EventId(decode_u64(&t, "event id")?)),
            "to" => p.max_id = Some(EventId(decode_u64(&t, "event id")?)),
            "at" => p.location = Some(decode_location(&t)?),
            "catch" => {
                p.catch = Some(match t.kind {
                    TermKind::Atom(ref a) if a == "uncaught" => CatchFilter::Uncaught,
                    TermKind::Atom(ref a) if a == "caught" => CatchFilter::Caught,
                    _ => CatchFilter::At(
                        decode_location(&t).map_err(|_| t.error("`uncaught`, `caught` or l(File, Line)"))?,
                    ),
                })
            }
            _ => return Err(pos.error("pattern key", format!("`{}`", key))),
        }
    }
    Ok((p, slots))
}

/// Parses a complete constant pattern.
pub fn parse_pattern(text: &str) -> Result<EventPattern, ParseError> {
    let mut r = TermReader::new(text);
    let (p, _) = read_pattern(&mut r, false)?;
    let (tok, pos) = r.next()?;
    if tok != Tok::Eof {
        return Err(pos.error("end of pattern", tok.to_string()));
    }
    Ok(p)
}

/// Canonical text of a pattern with its variable slots.
pub(crate) struct PatternText<'a> {
    pub pattern: &'a EventPattern,
    pub slots: &'a [(Slot, String)],
}

impl PatternText<'_> {
    fn var(&self, slot: Slot) -> Option<&str> {
        self.slots
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for PatternText<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.pattern;
        match p.kind {
            Some(k) => f.write_str(k.functor())?,
            None => f.write_str("any")?,
        }
        let mut field = |key: &str, slot: Option<Slot>, constant: Option<String>| -> fmt::Result {
            if let Some(v) = slot.and_then(|s| self.var(s)) {
                write!(f, " {}=${}", key, v)
            } else if let Some(c) = constant {
                write!(f, " {}={}", key, c)
            } else {
                Ok(())
            }
        };
        field("thread", Some(Slot::Thread), p.thread.as_deref().map(|t| Quoted(t).to_string()))?;
        field("subject", Some(Slot::Subject), p.subject.as_ref().map(ToString::to_string))?;
        field("class", None, p.class_name.as_deref().map(|c| Quoted(c).to_string()))?;
        field("name", Some(Slot::Name), p.name.as_deref().map(|n| Quoted(n).to_string()))?;
        field("argc", None, p.arg_count.map(|n| n.to_string()))?;
        if let Some(args) = &p.args {
            let items: Vec<String> = args
                .iter()
                .enumerate()
                .map(|(i, a)| match (self.var(Slot::Arg(i)), a) {
                    (Some(v), _) => format!("${}", v),
                    (None, Some(a)) => a.to_string(),
                    (None, None) => "_".to_string(),
                })
                .collect();
            field("args", None, Some(format!("[{}]", items.join(", "))))?;
        }
        field("value", Some(Slot::Value), p.value.as_ref().map(ToString::to_string))?;
        field("call", Some(Slot::CallId), p.call_id.map(|c| c.to_string()))?;
        match (p.min_id, p.max_id) {
            (Some(lo), Some(hi)) if lo == hi => field("id", Some(Slot::Id), Some(lo.to_string()))?,
            (lo, hi) => {
                field("id", Some(Slot::Id), None)?;
                field("from", None, lo.map(|i| i.to_string()))?;
                field("to", None, hi.map(|i| i.to_string()))?;
            }
        }
        field("at", None, p.location.as_ref().map(ToString::to_string))?;
        field(
            "catch",
            None,
            p.catch.as_ref().map(|c| match c {
                CatchFilter::Uncaught => "uncaught".to_string(),
                CatchFilter::Caught => "caught".to_string(),
                CatchFilter::At(l) => l.to_string(),
            }),
        )
    }
}

/// Canonical text of a constant pattern.
pub fn pattern_to_string(p: &EventPattern) -> String {
    PatternText { pattern: p, slots: &[] }.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Location, Subject, Value};

    #[test]
    fn constant_round_trip() {
        let p = EventPattern::any()
            .kind(EventKind::MethodCall)
            .thread("main")
            .subject(Subject::object("Example", 643))
            .name("mN")
            .location(Location::new("Example.java", 14));
        let text = pattern_to_string(&p);
        assert_eq!(
            text,
            "methodcall thread='main' subject=o('Example', 643) name='mN' at=l('Example.java', 14)"
        );
        assert_eq!(parse_pattern(&text).unwrap(), p);
    }

    #[test]
    fn args_with_wildcards() {
        let p = parse_pattern("methodcall args=[_, 'null', 3]").unwrap();
        assert_eq!(p.args, Some(vec![None, Some(Value::Null), Some(Value::Scalar("3".into()))]));
        assert_eq!(parse_pattern(&pattern_to_string(&p)).unwrap(), p);
    }

    #[test]
    fn quoted_underscore_is_literal() {
        let p = parse_pattern("any name='_'").unwrap();
        assert_eq!(p.name.as_deref(), Some("_"));
        assert!(parse_pattern("any name=_").unwrap().is_empty());
    }

    #[test]
    fn ranges_and_catch() {
        let p = parse_pattern("exception from=3 to=9 catch=uncaught").unwrap();
        assert_eq!((p.min_id, p.max_id), (Some(EventId(3)), Some(EventId(9))));
        assert_eq!(p.catch, Some(CatchFilter::Uncaught));
        assert_eq!(parse_pattern(&pattern_to_string(&p)).unwrap(), p);
        let q = parse_pattern("any id=7").unwrap();
        assert_eq!(pattern_to_string(&q), "any id=7");
    }

    #[test]
    fn variables_rejected_in_constant_patterns() {
        let e = parse_pattern("methodcall name=$N").unwrap_err();
        assert_eq!(e.column, 17);
        assert!(parse_pattern("bogus").is_err());
        assert!(parse_pattern("any color=red").is_err());
    }

    #[test]
    fn variables_collected() {
        let mut r = TermReader::new("methodexit call=$V subject=$S args=[$A, _] value=$V2");
        let (p, slots) = read_pattern(&mut r, true).unwrap();
        assert_eq!(p.args, Some(vec![None, None]));
        assert_eq!(
            slots,
            vec![
                (Slot::CallId, "V".to_string()),
                (Slot::Subject, "S".to_string()),
                (Slot::Arg(0), "A".to_string()),
                (Slot::Value, "V2".to_string()),
            ]
        );
        let text = PatternText { pattern: &p, slots: &slots }.to_string();
        assert_eq!(text, "methodexit subject=$S args=[$A, _] value=$V2 call=$V");
    }
}
