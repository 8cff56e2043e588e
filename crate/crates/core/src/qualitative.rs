//! Cut sequences read off a normalized structure function.
//!
//! Each product of a sum-of-products term is one way the top event can occur:
//! a set of events that must fail together with the order constraints between
//! them.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::EventTerm;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Literal {
    Event { name: String },
    Before { a: String, b: String },
    InclBefore { a: String, b: String },
    Simult { a: String, b: String },
}

impl Literal {
    pub fn events(&self) -> Vec<&str> {
        match self {
            Literal::Event { name } => vec![name],
            Literal::Before { a, b } | Literal::InclBefore { a, b } | Literal::Simult { a, b } => vec![a, b],
        }
    }

    fn from_term(t: &EventTerm) -> Option<Literal> {
        let pair = |l: &EventTerm, r: &EventTerm| match (l, r) {
            (EventTerm::Var(a), EventTerm::Var(b)) => Some((a.clone(), b.clone())),
            _ => None,
        };
        Some(match t {
            EventTerm::Var(name) => Literal::Event { name: name.clone() },
            EventTerm::Before(l, r) => {
                let (a, b) = pair(l, r)?;
                Literal::Before { a, b }
            }
            EventTerm::InclBefore(l, r) => {
                let (a, b) = pair(l, r)?;
                Literal::InclBefore { a, b }
            }
            EventTerm::Simult(l, r) => {
                let (a, b) = pair(l, r)?;
                Literal::Simult { a, b }
            }
            _ => return None,
        })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Event { name } => f.write_str(name),
            Literal::Before { a, b } => write!(f, "{a} < {b}"),
            Literal::InclBefore { a, b } => write!(f, "{a} <= {b}"),
            Literal::Simult { a, b } => write!(f, "{a} ~ {b}"),
        }
    }
}

/// A conjunction of literals, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutSequence {
    pub literals: Vec<Literal>,
}

impl CutSequence {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        let set: BTreeSet<Literal> = literals.into_iter().collect();
        CutSequence {
            literals: set.into_iter().collect(),
        }
    }

    /// Event names mentioned anywhere in the sequence.
    pub fn events(&self) -> BTreeSet<String> {
        self.literals
            .iter()
            .flat_map(|l| l.events())
            .map(str::to_string)
            .collect()
    }

    fn is_subset_of(&self, other: &CutSequence) -> bool {
        self.literals.iter().all(|l| other.literals.binary_search(l).is_ok())
    }
}

impl fmt::Display for CutSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.literals.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutSummary {
    pub sequences: Vec<CutSequence>,
    /// Event names of each sequence with the order constraints dropped.
    pub static_cut_sets: Vec<Vec<String>>,
}

impl CutSummary {
    fn from_sequences(sequences: Vec<CutSequence>) -> Self {
        let static_cut_sets = sequences.iter().map(|s| s.events().into_iter().collect()).collect();
        CutSummary {
            sequences,
            static_cut_sets,
        }
    }
}

impl fmt::Display for CutSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sequences.iter().enumerate() {
            writeln!(f, "{:>3}  {s}", i + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QualitativeError {
    #[error("not a sum of products of literals: `{0}`")]
    NotCanonical(String),
}

/// One cut sequence per product of a normalized term. Products that contain
/// `NEVER` are dropped; a product that is just `ALWAYS` yields an empty sequence.
pub fn extract_cut_sequences(canonical: &EventTerm) -> Result<CutSummary, QualitativeError> {
    let mut sequences = Vec::new();
    'products: for product in canonical.summands() {
        let mut literals = Vec::new();
        for factor in product.factors() {
            match factor {
                EventTerm::Never => continue 'products,
                EventTerm::Always => {}
                other => literals.push(
                    Literal::from_term(other).ok_or_else(|| QualitativeError::NotCanonical(other.to_string()))?,
                ),
            }
        }
        sequences.push(CutSequence::new(literals));
    }
    Ok(CutSummary::from_sequences(sequences))
}

/// Drops every sequence whose literals include all literals of another one.
/// Of two identical sequences the first is kept.
pub fn minimize(summary: &CutSummary) -> CutSummary {
    let seqs = &summary.sequences;
    let kept = seqs
        .iter()
        .enumerate()
        .filter(|&(i, s)| {
            !seqs.iter().enumerate().any(|(j, other)| {
                j != i && other.is_subset_of(s) && (other.literals.len() < s.literals.len() || j < i)
            })
        })
        .map(|(_, s)| s.clone())
        .collect();
    CutSummary::from_sequences(kept)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn t(s: &str) -> EventTerm {
        s.parse().unwrap()
    }

    fn ev(n: &str) -> Literal {
        Literal::Event { name: n.into() }
    }

    fn before(a: &str, b: &str) -> Literal {
        Literal::Before { a: a.into(), b: b.into() }
    }

    #[test]
    fn ahrs_reduced_form() {
        let q2 = t("Tr + A3_a . (A1 < A2_a) . (A2_a < A3_a) + B3_a . (B1 < B2_a) . (B2_a < B3_a)");
        let s = extract_cut_sequences(&q2).unwrap();
        assert_eq!(s.sequences.len(), 3);
        assert_eq!(s.sequences[0], CutSequence::new([ev("Tr")]));
        assert_eq!(
            s.sequences[1],
            CutSequence::new([ev("A3_a"), before("A1", "A2_a"), before("A2_a", "A3_a")])
        );
        assert_eq!(s.static_cut_sets[2], ["B1", "B2_a", "B3_a"]);
    }

    #[test]
    fn never_products_are_dropped() {
        assert!(extract_cut_sequences(&EventTerm::Never).unwrap().sequences.is_empty());
        let s = extract_cut_sequences(&t("A . NEVER + B")).unwrap();
        assert_eq!(s.sequences, vec![CutSequence::new([ev("B")])]);
    }

    #[test]
    fn nested_structure_is_rejected() {
        assert!(matches!(
            extract_cut_sequences(&t("A . (B + C)")),
            Err(QualitativeError::NotCanonical(_))
        ));
        assert!(matches!(
            extract_cut_sequences(&t("(A . B) < C")),
            Err(QualitativeError::NotCanonical(_))
        ));
    }

    #[test]
    fn minimize_absorbs_supersets() {
        let s = extract_cut_sequences(&t("A . B + A + B . (A < B) + C + C")).unwrap();
        let m = minimize(&s);
        // Absorption is syntactic: `A < B` does not mention the literal `A`.
        assert_eq!(
            m.sequences,
            vec![
                CutSequence::new([ev("A")]),
                CutSequence::new([ev("B"), before("A", "B")]),
                CutSequence::new([ev("C")])
            ]
        );
    }

    fn arb_sop() -> impl Strategy<Value = EventTerm> {
        let lit = prop_oneof![
            (0usize..4).prop_map(|i| EventTerm::var(["A", "B", "C", "D"][i])),
            (0usize..4, 0usize..4).prop_map(|(i, j)| EventTerm::before(
                EventTerm::var(["A", "B", "C", "D"][i]),
                EventTerm::var(["A", "B", "C", "D"][j])
            )),
        ];
        let product = proptest::collection::vec(lit, 1..4).prop_map(EventTerm::and_all);
        proptest::collection::vec(product, 1..6).prop_map(EventTerm::or_all)
    }

    proptest! {
        #[test]
        fn minimize_keeps_an_antichain(term in arb_sop()) {
            let s = extract_cut_sequences(&term).unwrap();
            let m = minimize(&s);
            prop_assert!(m.sequences.len() <= s.sequences.len());
            for (i, a) in m.sequences.iter().enumerate() {
                for (j, b) in m.sequences.iter().enumerate() {
                    prop_assert!(i == j || !a.is_subset_of(b));
                }
            }
            // Every dropped sequence is covered by a survivor.
            for seq in &s.sequences {
                prop_assert!(m.sequences.iter().any(|k| k.is_subset_of(seq)));
            }
            prop_assert_eq!(minimize(&m), m.clone());
        }
    }
}
