//! Reader for the Galileo subset. One statement per `;`:
//!
//! ```text
//! toplevel "System";
//! "System" or "Pump" "Valve";
//! "Pump" wsp "P" "S";
//! "Voter" 2of3 "A" "B" "C";
//! "P" lambda=0.01 dorm=0.5;
//! ```
//!
//! Names are double-quoted (bare identifiers are also accepted). `//` starts a
//! comment that runs to the end of the line.

use std::collections::BTreeMap;

use super::{BasicEvent, DftModel, Gate, GateType, Node, NodeKind, ParseError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Word(String),
    Eq,
    Semi,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let push = |tok, out: &mut Vec<Spanned>| out.push(Spanned { tok, line, col });
            match c {
                c if c.is_whitespace() => i += 1,
                '/' if chars.get(i + 1) == Some(&'/') => break,
                '=' => {
                    push(Tok::Eq, &mut out);
                    i += 1;
                }
                ';' => {
                    push(Tok::Semi, &mut out);
                    i += 1;
                }
                '"' => {
                    let start = i + 1;
                    let Some(len) = chars[start..].iter().position(|&c| c == '"') else {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            expected: "closing `\"`".into(),
                        });
                    };
                    push(Tok::Name(chars[start..start + len].iter().collect()), &mut out);
                    i = start + len + 1;
                }
                c if c.is_alphanumeric() || "_.-+".contains(c) => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || "_.-+".contains(chars[i])) {
                        i += 1;
                    }
                    push(Tok::Word(chars[start..i].iter().collect()), &mut out);
                }
                other => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        expected: format!("a name, keyword or `;`, found `{other}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.eof, |s| (s.line, s.col))
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax {
            line,
            col,
            expected: expected.to_string(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Name(n)) | Some(Tok::Word(n)) => {
                let n = n.clone();
                self.pos += 1;
                Ok(n)
            }
            _ => self.fail("a node name"),
        }
    }

    fn semi(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Semi) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail("`;`"),
        }
    }
}

fn gate_type(word: &str) -> Option<GateType> {
    Some(match word.to_ascii_lowercase().as_str() {
        "and" => GateType::And,
        "or" => GateType::Or,
        "pand" => GateType::Pand,
        "fdep" => GateType::Fdep,
        "wsp" => GateType::Wsp,
        "csp" => GateType::Csp,
        "hsp" => GateType::Hsp,
        other => {
            let (k, n) = other.split_once("of")?;
            GateType::Vote {
                k: k.parse().ok()?,
                n: n.parse().ok()?,
            }
        }
    })
}

pub(super) fn parse(text: &str) -> Result<DftModel, ParseError> {
    let toks = lex(text)?;
    let line_count = text.lines().count().max(1);
    let last_len = text.lines().last().map_or(0, |l| l.chars().count());
    let mut c = Cursor {
        toks,
        pos: 0,
        eof: (line_count, last_len + 1),
    };
    let mut toplevel: Option<String> = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut lines: BTreeMap<String, usize> = BTreeMap::new();

    while c.peek().is_some() {
        let (line, _) = c.here();
        if matches!(c.peek(), Some(Tok::Word(w)) if w == "toplevel") {
            c.pos += 1;
            let name = c.name()?;
            c.semi()?;
            if toplevel.is_some() {
                return Err(ParseError::DuplicateDefinition { name: "toplevel".into(), line });
            }
            toplevel = Some(name);
            continue;
        }
        let name = c.name()?;
        let kind = match (c.toks.get(c.pos).map(|s| &s.tok), c.toks.get(c.pos + 1).map(|s| &s.tok)) {
            (Some(Tok::Word(_)), Some(Tok::Eq)) => NodeKind::Basic(attributes(&mut c)?),
            (Some(Tok::Word(w)), _) => {
                let Some(kind) = gate_type(w) else {
                    return c.fail("a gate type (and, or, pand, fdep, wsp, csp, hsp, <k>of<n>) or attributes");
                };
                c.pos += 1;
                let mut children = Vec::new();
                while !matches!(c.peek(), Some(Tok::Semi) | None) {
                    children.push(c.name()?);
                }
                c.semi()?;
                NodeKind::Gate(Gate { kind, children })
            }
            _ => return c.fail("a gate type or `lambda=`"),
        };
        if lines.contains_key(&name) {
            return Err(ParseError::DuplicateDefinition { name, line });
        }
        lines.insert(name.clone(), line);
        nodes.push(Node { name, kind });
    }

    let toplevel = toplevel.ok_or(ParseError::MissingToplevel)?;
    let model = DftModel::new(toplevel, nodes);
    if let Some(name) = model.references().find(|r| model.get(r).is_none()) {
        return Err(ParseError::UnknownReference { name: name.to_string() });
    }
    Ok(model)
}

fn attributes(c: &mut Cursor) -> Result<BasicEvent, ParseError> {
    let mut rate = None;
    let mut dormancy = None;
    loop {
        match c.peek() {
            Some(Tok::Semi) => {
                c.pos += 1;
                break;
            }
            Some(Tok::Word(key)) => {
                let key = key.clone();
                let at = c.here();
                c.pos += 1;
                if c.next() != Some(Tok::Eq) {
                    c.pos -= 1;
                    return c.fail("`=`");
                }
                let value = match c.next() {
                    Some(Tok::Word(v)) => v.parse::<f64>().ok(),
                    _ => None,
                };
                let Some(value) = value else {
                    c.pos -= 1;
                    return c.fail("a number");
                };
                let slot = match key.as_str() {
                    "lambda" => &mut rate,
                    "dorm" => &mut dormancy,
                    _ => {
                        return Err(ParseError::Syntax {
                            line: at.0,
                            col: at.1,
                            expected: "`lambda` or `dorm`".into(),
                        })
                    }
                };
                *slot = Some(value);
            }
            _ => return c.fail("an attribute or `;`"),
        }
    }
    let Some(rate) = rate else {
        return c.fail("a `lambda=` attribute before `;`");
    };
    Ok(BasicEvent {
        rate,
        dormancy: dormancy.unwrap_or(BasicEvent::DEFAULT_DORMANCY),
    })
}
