//! Failure-time semantics for the temporal operators and the gate library.
//!
//! Every event is identified with the instant at which it fails. `ALWAYS`
//! fails at time zero, `NEVER` never fails (+inf). The static gates become
//! `max`/`min`, and the three temporal operators select either their left
//! input or `NEVER` depending on how the two inputs compare.

mod compiled;
mod syntax;
mod time;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compiled::CompiledTerm;
pub use syntax::ParseTermError;
pub use time::{FailureTime, InvalidTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("valuation has no entry for variable `{0}`")]
    MissingVariable(String),
    #[error("gate {kind} expects {expected} inputs, got {got}")]
    ArityMismatch {
        kind: &'static str,
        expected: String,
        got: usize,
    },
    #[error("vote threshold {k} is not within 1..={n}")]
    BadVoteThreshold { k: usize, n: usize },
}

/// Structure-function AST. Gate sugar never appears here; see [`desugar_gate`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventTerm {
    Var(String),
    Always,
    Never,
    And(Box<EventTerm>, Box<EventTerm>),
    Or(Box<EventTerm>, Box<EventTerm>),
    Simult(Box<EventTerm>, Box<EventTerm>),
    Before(Box<EventTerm>, Box<EventTerm>),
    InclBefore(Box<EventTerm>, Box<EventTerm>),
}

impl EventTerm {
    pub fn var(name: impl Into<String>) -> Self {
        EventTerm::Var(name.into())
    }

    pub fn and(l: EventTerm, r: EventTerm) -> Self {
        EventTerm::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: EventTerm, r: EventTerm) -> Self {
        EventTerm::Or(Box::new(l), Box::new(r))
    }

    pub fn simult(l: EventTerm, r: EventTerm) -> Self {
        EventTerm::Simult(Box::new(l), Box::new(r))
    }

    pub fn before(l: EventTerm, r: EventTerm) -> Self {
        EventTerm::Before(Box::new(l), Box::new(r))
    }

    pub fn incl_before(l: EventTerm, r: EventTerm) -> Self {
        EventTerm::InclBefore(Box::new(l), Box::new(r))
    }

    /// Left fold with `Or`; `NEVER` for an empty list.
    pub fn or_all(terms: impl IntoIterator<Item = EventTerm>) -> Self {
        terms
            .into_iter()
            .reduce(EventTerm::or)
            .unwrap_or(EventTerm::Never)
    }

    /// Left fold with `And`; `ALWAYS` for an empty list.
    pub fn and_all(terms: impl IntoIterator<Item = EventTerm>) -> Self {
        terms
            .into_iter()
            .reduce(EventTerm::and)
            .unwrap_or(EventTerm::Always)
    }

    pub fn children(&self) -> Option<(&EventTerm, &EventTerm)> {
        match self {
            EventTerm::And(l, r)
            | EventTerm::Or(l, r)
            | EventTerm::Simult(l, r)
            | EventTerm::Before(l, r)
            | EventTerm::InclBefore(l, r) => Some((l, r)),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children().is_none()
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self.children() {
            Some((l, r)) => 1 + l.size() + r.size(),
            None => 1,
        }
    }

    /// Replaces every `Var` leaf by `f(name)`.
    pub fn substitute(&self, f: &mut impl FnMut(&str) -> EventTerm) -> EventTerm {
        self.map_vars(f)
    }

    fn map_vars(&self, f: &mut dyn FnMut(&str) -> EventTerm) -> EventTerm {
        match self {
            EventTerm::Var(name) => f(name),
            EventTerm::Always | EventTerm::Never => self.clone(),
            _ => {
                let (l, r) = self.children().expect("binary");
                let (l, r) = (l.map_vars(f), r.map_vars(f));
                self.with_children(l, r)
            }
        }
    }

    /// Same operator as `self` applied to new operands. Leaves are returned unchanged.
    pub fn with_children(&self, l: EventTerm, r: EventTerm) -> EventTerm {
        match self {
            EventTerm::And(..) => EventTerm::and(l, r),
            EventTerm::Or(..) => EventTerm::or(l, r),
            EventTerm::Simult(..) => EventTerm::simult(l, r),
            EventTerm::Before(..) => EventTerm::before(l, r),
            EventTerm::InclBefore(..) => EventTerm::incl_before(l, r),
            leaf => leaf.clone(),
        }
    }

    /// Flat `a . b + c . (d < e)` rendering: summands and factors without the
    /// nesting parentheses, every other subterm fully parenthesised.
    pub fn to_sop_string(&self) -> String {
        self.summands()
            .iter()
            .map(|p| p.factors().iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" . "))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Flattens nested `Or` nodes into their operands (left to right).
    pub fn summands(&self) -> Vec<&EventTerm> {
        let mut out = Vec::new();
        collect_assoc(self, &mut out, |t| matches!(t, EventTerm::Or(..)));
        out
    }

    /// Flattens nested `And` nodes into their operands (left to right).
    pub fn factors(&self) -> Vec<&EventTerm> {
        let mut out = Vec::new();
        collect_assoc(self, &mut out, |t| matches!(t, EventTerm::And(..)));
        out
    }
}

fn collect_assoc<'a>(t: &'a EventTerm, out: &mut Vec<&'a EventTerm>, is_op: fn(&EventTerm) -> bool) {
    if is_op(t) {
        let (l, r) = t.children().expect("binary");
        collect_assoc(l, out, is_op);
        collect_assoc(r, out, is_op);
    } else {
        out.push(t);
    }
}

impl fmt::Display for EventTerm {
    /// Fully parenthesised infix form: `+` or, `.` and, `~` simultaneous,
    /// `<` before, `<=` inclusive before. Parses back with `str::parse`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventTerm::Var(name) => write!(f, "{name}"),
            EventTerm::Always => write!(f, "ALWAYS"),
            EventTerm::Never => write!(f, "NEVER"),
            EventTerm::And(l, r) => write!(f, "({l} . {r})"),
            EventTerm::Or(l, r) => write!(f, "({l} + {r})"),
            EventTerm::Simult(l, r) => write!(f, "({l} ~ {r})"),
            EventTerm::Before(l, r) => write!(f, "({l} < {r})"),
            EventTerm::InclBefore(l, r) => write!(f, "({l} <= {r})"),
        }
    }
}

/// Assignment of failure times to variable names.
pub type Valuation = BTreeMap<String, FailureTime>;

/// Evaluates `term` to its failure time under `v`.
pub fn eval_term(term: &EventTerm, v: &Valuation) -> Result<FailureTime, AlgebraError> {
    Ok(match term {
        EventTerm::Var(name) => *v
            .get(name)
            .ok_or_else(|| AlgebraError::MissingVariable(name.clone()))?,
        EventTerm::Always => FailureTime::ALWAYS,
        EventTerm::Never => FailureTime::NEVER,
        EventTerm::And(l, r) => eval_term(l, v)?.max(eval_term(r, v)?),
        EventTerm::Or(l, r) => eval_term(l, v)?.min(eval_term(r, v)?),
        EventTerm::Simult(l, r) => {
            let (a, b) = (eval_term(l, v)?, eval_term(r, v)?);
            if a == b {
                a
            } else {
                FailureTime::NEVER
            }
        }
        EventTerm::Before(l, r) => {
            let (a, b) = (eval_term(l, v)?, eval_term(r, v)?);
            if a < b {
                a
            } else {
                FailureTime::NEVER
            }
        }
        EventTerm::InclBefore(l, r) => {
            let (a, b) = (eval_term(l, v)?, eval_term(r, v)?);
            if a <= b {
                a
            } else {
                FailureTime::NEVER
            }
        }
    })
}

/// Free variables in lexicographic order.
pub fn free_variables(term: &EventTerm) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_vars(term, &mut out);
    out
}

fn collect_vars(term: &EventTerm, out: &mut BTreeSet<String>) {
    match term {
        EventTerm::Var(name) => {
            out.insert(name.clone());
        }
        EventTerm::Always | EventTerm::Never => {}
        _ => {
            let (l, r) = term.children().expect("binary");
            collect_vars(l, out);
            collect_vars(r, out);
        }
    }
}

/// Hypotheses under which a reduction is claimed to hold.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SideCondition {
    /// No two listed variables share the same finite failure time.
    AllDistinct(Vec<String>),
    /// The dormant copy of a cold spare never fails.
    ColdSpare(String),
    /// At most one of the two events ever occurs: `a . b = NEVER`.
    NeverEvents(String, String),
    TermEqNever(EventTerm),
}

impl SideCondition {
    pub fn holds(&self, v: &Valuation) -> Result<bool, AlgebraError> {
        let lookup = |name: &String| {
            v.get(name)
                .copied()
                .ok_or_else(|| AlgebraError::MissingVariable(name.clone()))
        };
        Ok(match self {
            SideCondition::AllDistinct(names) => {
                let mut seen = Vec::with_capacity(names.len());
                for name in names {
                    let t = lookup(name)?;
                    if !t.is_never() {
                        seen.push(t);
                    }
                }
                seen.sort();
                seen.windows(2).all(|w| w[0] != w[1])
            }
            SideCondition::ColdSpare(name) => lookup(name)?.is_never(),
            SideCondition::NeverEvents(a, b) => lookup(a)?.max(lookup(b)?).is_never(),
            SideCondition::TermEqNever(t) => eval_term(t, v)?.is_never(),
        })
    }

    pub fn variables(&self) -> BTreeSet<String> {
        match self {
            SideCondition::AllDistinct(names) => names.iter().cloned().collect(),
            SideCondition::ColdSpare(a) => BTreeSet::from([a.clone()]),
            SideCondition::NeverEvents(a, b) => BTreeSet::from([a.clone(), b.clone()]),
            SideCondition::TermEqNever(t) => free_variables(t),
        }
    }
}

impl fmt::Display for SideCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SideCondition::AllDistinct(names) => write!(f, "ALL_DISTINCT [{}]", names.join("; ")),
            SideCondition::ColdSpare(a) => write!(f, "COLD_SPARE {a}"),
            SideCondition::NeverEvents(a, b) => write!(f, "NEVER_events {a} {b}"),
            SideCondition::TermEqNever(t) => write!(f, "{t} = NEVER"),
        }
    }
}

/// Gate vocabulary accepted by [`desugar_gate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Or,
    /// Inputs must fail left to right.
    Pand,
    /// `[dependent, trigger]`.
    Fdep,
    /// `[primary, active spare, dormant spare]`.
    Wsp,
    /// `[primary, spare]`.
    Csp,
    /// `[primary, spare]`.
    Hsp,
    /// `[this primary, other primary, active spare, dormant spare]`.
    SharedSpare,
    Vote(usize),
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Pand => "PAND",
            GateKind::Fdep => "FDEP",
            GateKind::Wsp => "WSP",
            GateKind::Csp => "CSP",
            GateKind::Hsp => "HSP",
            GateKind::SharedSpare => "shared_spare",
            GateKind::Vote(_) => "VOTE",
        }
    }
}

/// Expands a gate into the operator algebra. N-ary `And`/`Or`/`Pand` are
/// folded left to right.
pub fn desugar_gate(kind: GateKind, inputs: Vec<EventTerm>) -> Result<EventTerm, AlgebraError> {
    let arity = |expected: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(AlgebraError::ArityMismatch {
                kind: kind.name(),
                expected: expected.to_string(),
                got: inputs.len(),
            })
        }
    };
    match kind {
        GateKind::And => {
            arity("at least 1", !inputs.is_empty())?;
            Ok(EventTerm::and_all(inputs))
        }
        GateKind::Or => {
            arity("at least 1", !inputs.is_empty())?;
            Ok(EventTerm::or_all(inputs))
        }
        GateKind::Pand => {
            arity("at least 2", inputs.len() >= 2)?;
            let mut it = inputs.into_iter();
            let first = it.next().expect("checked");
            Ok(it.fold(first, |acc, next| {
                EventTerm::and(next.clone(), EventTerm::incl_before(acc, next))
            }))
        }
        GateKind::Fdep => {
            arity("2", inputs.len() == 2)?;
            let [dependent, trigger] = take::<2>(inputs);
            Ok(EventTerm::or(dependent, trigger))
        }
        GateKind::Wsp => {
            arity("3", inputs.len() == 3)?;
            let [a, ba, bd] = take::<3>(inputs);
            Ok(warm_spare(a, ba, bd))
        }
        GateKind::Csp => {
            arity("2", inputs.len() == 2)?;
            let [a, b] = take::<2>(inputs);
            Ok(EventTerm::and(b.clone(), EventTerm::before(a, b)))
        }
        GateKind::Hsp => {
            arity("2", inputs.len() == 2)?;
            let [a, b] = take::<2>(inputs);
            Ok(EventTerm::and(a, b))
        }
        GateKind::SharedSpare => {
            arity("4", inputs.len() == 4)?;
            let [a, other, ca, cd] = take::<4>(inputs);
            Ok(shared_spare(a, other, ca, cd))
        }
        GateKind::Vote(k) => {
            let n = inputs.len();
            arity("at least 1", n >= 1)?;
            if k == 0 || k > n {
                return Err(AlgebraError::BadVoteThreshold { k, n });
            }
            Ok(EventTerm::or_all(
                inputs
                    .into_iter()
                    .combinations(k)
                    .map(EventTerm::and_all),
            ))
        }
    }
}

fn take<const N: usize>(v: Vec<EventTerm>) -> [EventTerm; N] {
    v.try_into().unwrap_or_else(|_| unreachable!("arity checked"))
}

/// `A.(Bd ◁ A) + Ba.(A ◁ Ba) + A Δ Ba + A Δ Bd`
pub fn warm_spare(a: EventTerm, ba: EventTerm, bd: EventTerm) -> EventTerm {
    EventTerm::or(
        EventTerm::or(
            EventTerm::or(
                EventTerm::and(a.clone(), EventTerm::before(bd.clone(), a.clone())),
                EventTerm::and(ba.clone(), EventTerm::before(a.clone(), ba.clone())),
            ),
            EventTerm::simult(a.clone(), ba),
        ),
        EventTerm::simult(a, bd),
    )
}

/// `A.(Cd ◁ A) + Ca.(A ◁ Ca) + A.(B ◁ A)`: spare `C` shared with the gate whose
/// primary is `B`.
pub fn shared_spare(a: EventTerm, other: EventTerm, ca: EventTerm, cd: EventTerm) -> EventTerm {
    EventTerm::or(
        EventTerm::or(
            EventTerm::and(a.clone(), EventTerm::before(cd, a.clone())),
            EventTerm::and(ca.clone(), EventTerm::before(a.clone(), ca)),
        ),
        EventTerm::and(a.clone(), EventTerm::before(other, a)),
    )
}

#[cfg(test)]
pub(crate) mod tests;
