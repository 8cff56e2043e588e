//! Galileo-style fault tree models: parsing, validation, and translation into a
//! structure function over the failure-time algebra.

mod parser;
mod structure;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use structure::{to_structure_function, EventDynamics, StructureError, StructureFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GateType {
    And,
    Or,
    Pand,
    /// Children are `[trigger, dependent...]`.
    Fdep,
    /// Children are `[primary, spare...]`; spares use their own dormancy.
    Wsp,
    /// Like `wsp` but spares never fail while dormant.
    Csp,
    /// Like `wsp` but spares are always active.
    Hsp,
    Vote { k: usize, n: usize },
}

impl GateType {
    pub fn is_spare(self) -> bool {
        matches!(self, GateType::Wsp | GateType::Csp | GateType::Hsp)
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateType::And => f.write_str("and"),
            GateType::Or => f.write_str("or"),
            GateType::Pand => f.write_str("pand"),
            GateType::Fdep => f.write_str("fdep"),
            GateType::Wsp => f.write_str("wsp"),
            GateType::Csp => f.write_str("csp"),
            GateType::Hsp => f.write_str("hsp"),
            GateType::Vote { k, n } => write!(f, "{k}of{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub kind: GateType,
    pub children: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasicEvent {
    /// Failures per time unit while active.
    pub rate: f64,
    /// Multiplier on `rate` while the event is a dormant spare.
    pub dormancy: f64,
}

impl BasicEvent {
    pub const DEFAULT_DORMANCY: f64 = 1.0;

    pub fn is_cold(&self) -> bool {
        self.dormancy == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeKind {
    Gate(Gate),
    Basic(BasicEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub name: String,
    #[serde(flatten)]
    pub kind: NodeKind,
}

/// A fault tree in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DftModel {
    pub toplevel: String,
    pub nodes: Vec<Node>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("line {line}: `{name}` is defined twice")]
    DuplicateDefinition { name: String, line: usize },
    #[error("`{name}` is referenced but never defined")]
    UnknownReference { name: String },
    #[error("no `toplevel` directive")]
    MissingToplevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation")]
pub enum Violation {
    NonPositiveRate { event: String, rate: f64 },
    DormancyOutOfRange { event: String, dormancy: f64 },
    CycleDetected { path: Vec<String> },
    UnknownReference { node: String, name: String },
    ToplevelUndefined { name: String },
    ArityMismatch { gate: String, kind: GateType, got: usize },
    BadVoteThreshold { gate: String, k: usize, n: usize, children: usize },
    SpareNotBasicEvent { gate: String, child: String },
    DependentNotBasicEvent { gate: String, child: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveRate { event, rate } => {
                write!(f, "basic event `{event}` has non-positive rate {rate}")
            }
            Violation::DormancyOutOfRange { event, dormancy } => {
                write!(f, "basic event `{event}` has dormancy {dormancy} outside [0, 1]")
            }
            Violation::CycleDetected { path } => write!(f, "cycle: {}", path.join(" -> ")),
            Violation::UnknownReference { node, name } => {
                write!(f, "`{node}` references undefined `{name}`")
            }
            Violation::ToplevelUndefined { name } => write!(f, "toplevel `{name}` is not defined"),
            Violation::ArityMismatch { gate, kind, got } => {
                write!(f, "gate `{gate}` ({kind}) has {got} children")
            }
            Violation::BadVoteThreshold { gate, k, n, children } => {
                write!(f, "gate `{gate}` is {k}of{n} with {children} children")
            }
            Violation::SpareNotBasicEvent { gate, child } => {
                write!(f, "spare `{child}` of gate `{gate}` is not a basic event")
            }
            Violation::DependentNotBasicEvent { gate, child } => {
                write!(f, "dependent `{child}` of fdep `{gate}` is not a basic event")
            }
        }
    }
}

impl DftModel {
    /// Later definitions of a duplicated name shadow earlier ones in lookups.
    pub fn new(toplevel: impl Into<String>, nodes: Vec<Node>) -> Self {
        let index = nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect();
        DftModel {
            toplevel: toplevel.into(),
            nodes,
            index,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parser::parse(text)
    }

    pub fn get(&self, name: &str) -> Option<&Node> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn basic_event(&self, name: &str) -> Option<&BasicEvent> {
        match &self.get(name)?.kind {
            NodeKind::Basic(e) => Some(e),
            NodeKind::Gate(_) => None,
        }
    }

    pub fn gates(&self) -> impl Iterator<Item = (&str, &Gate)> {
        self.nodes.iter().filter_map(|n| match &n.kind {
            NodeKind::Gate(g) => Some((n.name.as_str(), g)),
            NodeKind::Basic(_) => None,
        })
    }

    pub fn basic_events(&self) -> impl Iterator<Item = (&str, &BasicEvent)> {
        self.nodes.iter().filter_map(|n| match &n.kind {
            NodeKind::Basic(e) => Some((n.name.as_str(), e)),
            NodeKind::Gate(_) => None,
        })
    }

    /// Every name mentioned as a gate child, plus the toplevel.
    pub fn references(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.toplevel.as_str())
            .chain(self.gates().flat_map(|(_, g)| g.children.iter().map(String::as_str)))
    }

    /// Checks every model invariant and reports all violations found.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.get(&self.toplevel).is_none() {
            out.push(Violation::ToplevelUndefined {
                name: self.toplevel.clone(),
            });
        }
        for node in &self.nodes {
            match &node.kind {
                NodeKind::Basic(e) => {
                    if !(e.rate > 0.0 && e.rate.is_finite()) {
                        out.push(Violation::NonPositiveRate {
                            event: node.name.clone(),
                            rate: e.rate,
                        });
                    }
                    if !(0.0..=1.0).contains(&e.dormancy) {
                        out.push(Violation::DormancyOutOfRange {
                            event: node.name.clone(),
                            dormancy: e.dormancy,
                        });
                    }
                }
                NodeKind::Gate(g) => self.check_gate(&node.name, g, &mut out),
            }
        }
        if let Some(path) = self.find_cycle() {
            out.push(Violation::CycleDetected { path });
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    fn check_gate(&self, name: &str, g: &Gate, out: &mut Vec<Violation>) {
        for child in &g.children {
            if self.get(child).is_none() {
                out.push(Violation::UnknownReference {
                    node: name.to_string(),
                    name: child.clone(),
                });
            }
        }
        let n = g.children.len();
        let min = match g.kind {
            GateType::And | GateType::Or => 1,
            GateType::Pand | GateType::Fdep | GateType::Wsp | GateType::Csp | GateType::Hsp => 2,
            GateType::Vote { k, n: declared } => {
                if k == 0 || k > n || declared != n {
                    out.push(Violation::BadVoteThreshold {
                        gate: name.to_string(),
                        k,
                        n: declared,
                        children: n,
                    });
                }
                1
            }
        };
        if n < min {
            out.push(Violation::ArityMismatch {
                gate: name.to_string(),
                kind: g.kind,
                got: n,
            });
        }
        let not_basic = |c: &String| self.get(c).is_some() && self.basic_event(c).is_none();
        if g.kind.is_spare() {
            for child in g.children.iter().skip(1).filter(|c| not_basic(c)) {
                out.push(Violation::SpareNotBasicEvent {
                    gate: name.to_string(),
                    child: child.clone(),
                });
            }
        }
        if g.kind == GateType::Fdep {
            for child in g.children.iter().skip(1).filter(|c| not_basic(c)) {
                out.push(Violation::DependentNotBasicEvent {
                    gate: name.to_string(),
                    child: child.clone(),
                });
            }
        }
    }

    /// First cycle found by depth-first search in declaration order, as a path
    /// that starts and ends at the same node.
    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        fn visit<'a>(
            m: &'a DftModel,
            name: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            match marks.get(name).copied().unwrap_or(Mark::New) {
                Mark::Done => return None,
                Mark::Open => {
                    let start = stack.iter().position(|&s| s == name).expect("open node is on stack");
                    let mut path: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                    path.push(name.to_string());
                    return Some(path);
                }
                Mark::New => {}
            }
            marks.insert(name, Mark::Open);
            stack.push(name);
            if let Some(Node {
                kind: NodeKind::Gate(g),
                ..
            }) = m.get(name)
            {
                for child in &g.children {
                    if let Some(c) = visit(m, child, marks, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            marks.insert(name, Mark::Done);
            None
        }
        let mut marks = BTreeMap::new();
        self.nodes
            .iter()
            .find_map(|n| visit(self, &n.name, &mut marks, &mut Vec::new()))
    }
}

impl std::str::FromStr for DftModel {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DftModel::parse(s)
    }
}

/// Writes the model back in the dialect accepted by [`DftModel::parse`].
impl fmt::Display for DftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "toplevel \"{}\";", self.toplevel)?;
        for node in &self.nodes {
            write!(f, "\"{}\"", node.name)?;
            match &node.kind {
                NodeKind::Gate(g) => {
                    write!(f, " {}", g.kind)?;
                    for c in &g.children {
                        write!(f, " \"{c}\"")?;
                    }
                }
                NodeKind::Basic(e) => write!(f, " lambda={} dorm={}", e.rate, e.dormancy)?,
            }
            writeln!(f, ";")?;
        }
        Ok(())
    }
}
