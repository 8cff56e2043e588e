//! Text form of [`EventTerm`].
//!
//! Infix grammar, loosest first: `+` (or), `.` (and), then the temporal
//! operators `<` / `◁` (before), `<=` / `⊴` (inclusive before) and `~` / `Δ`
//! (simultaneous). All are left-associative. The prefix spellings
//! `D_OR a b`, `D_AND a b`, `D_BEFORE a b`, `D_INCLUSIVE_BEFORE a b`,
//! `D_SIMULT a b` and the gate names `PAND`, `FDEP`, `WSP`, `CSP`, `HSP`,
//! `shared_spare` are also accepted so prefix-form statements can be pasted
//! verbatim.

use std::str::FromStr;

use thiserror::Error;

use super::{desugar_gate, EventTerm, GateKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("term syntax error at byte {offset}: {message}")]
pub struct ParseTermError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Plus,
    Dot,
    Before,
    InclBefore,
    Simult,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseTermError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        let tok = match c {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '+' => Tok::Plus,
            '.' | '·' => Tok::Dot,
            '~' | 'Δ' => Tok::Simult,
            '◁' => Tok::Before,
            '⊴' => Tok::InclBefore,
            '<' => {
                chars.next();
                if matches!(chars.peek(), Some(&(_, '='))) {
                    chars.next();
                    out.push((i, Tok::InclBefore));
                } else {
                    out.push((i, Tok::Before));
                }
                continue;
            }
            '"' => {
                chars.next();
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, ch)) => name.push(ch),
                        None => {
                            return Err(ParseTermError {
                                offset: i,
                                message: "unterminated quoted name".into(),
                            })
                        }
                    }
                }
                out.push((i, Tok::Ident(name)));
                continue;
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut name = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if ch.is_alphanumeric() || ch == '_' {
                        name.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((i, Tok::Ident(name)));
                continue;
            }
            other => {
                return Err(ParseTermError {
                    offset: i,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        chars.next();
        out.push((i, tok));
    }
    Ok(out)
}

enum Prefix {
    Op(fn(EventTerm, EventTerm) -> EventTerm),
    Gate(GateKind, usize),
}

fn prefix(name: &str) -> Option<Prefix> {
    Some(match name {
        "D_OR" => Prefix::Op(EventTerm::or),
        "D_AND" => Prefix::Op(EventTerm::and),
        "D_BEFORE" => Prefix::Op(EventTerm::before),
        "D_INCLUSIVE_BEFORE" => Prefix::Op(EventTerm::incl_before),
        "D_SIMULT" => Prefix::Op(EventTerm::simult),
        "PAND" => Prefix::Gate(GateKind::Pand, 2),
        "FDEP" => Prefix::Gate(GateKind::Fdep, 2),
        "WSP" => Prefix::Gate(GateKind::Wsp, 3),
        "CSP" => Prefix::Gate(GateKind::Csp, 2),
        "HSP" => Prefix::Gate(GateKind::Hsp, 2),
        "shared_spare" => Prefix::Gate(GateKind::SharedSpare, 4),
        _ => return None,
    })
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error(&self, message: impl Into<String>) -> ParseTermError {
        ParseTermError {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<EventTerm, ParseTermError> {
        let mut acc = self.product()?;
        while self.eat(&Tok::Plus) {
            acc = EventTerm::or(acc, self.product()?);
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<EventTerm, ParseTermError> {
        let mut acc = self.temporal()?;
        while self.eat(&Tok::Dot) {
            acc = EventTerm::and(acc, self.temporal()?);
        }
        Ok(acc)
    }

    fn temporal(&mut self) -> Result<EventTerm, ParseTermError> {
        let mut acc = self.application()?;
        loop {
            let op: fn(EventTerm, EventTerm) -> EventTerm = match self.peek() {
                Some(Tok::Before) => EventTerm::before,
                Some(Tok::InclBefore) => EventTerm::incl_before,
                Some(Tok::Simult) => EventTerm::simult,
                _ => return Ok(acc),
            };
            self.pos += 1;
            acc = op(acc, self.application()?);
        }
    }

    fn application(&mut self) -> Result<EventTerm, ParseTermError> {
        let Some(Tok::Ident(name)) = self.peek() else {
            return self.atom();
        };
        let Some(head) = prefix(name) else {
            return self.atom();
        };
        let start = self.offset();
        self.pos += 1;
        match head {
            Prefix::Op(op) => {
                let l = self.atom()?;
                let r = self.atom()?;
                Ok(op(l, r))
            }
            Prefix::Gate(kind, n) => {
                let args = (0..n).map(|_| self.atom()).collect::<Result<Vec<_>, _>>()?;
                desugar_gate(kind, args).map_err(|e| ParseTermError {
                    offset: start,
                    message: e.to_string(),
                })
            }
        }
    }

    fn atom(&mut self) -> Result<EventTerm, ParseTermError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if prefix(&name).is_some() {
                    return self.application();
                }
                self.pos += 1;
                Ok(match name.as_str() {
                    "ALWAYS" => EventTerm::Always,
                    "NEVER" => EventTerm::Never,
                    _ => EventTerm::Var(name),
                })
            }
            Some(other) => Err(self.error(format!("unexpected token {other:?}"))),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

impl FromStr for EventTerm {
    type Err = ParseTermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser {
            toks: tokenize(s)?,
            pos: 0,
            end: s.len(),
        };
        let term = p.sum()?;
        if p.pos != p.toks.len() {
            return Err(p.error("trailing input"));
        }
        Ok(term)
    }
}
