//! Simplification theorems, one rule per printed table row.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::algebra::{EventTerm, SideCondition};

/// Metavariables are the `Var` leaves of `lhs`; they match arbitrary subterms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RewriteRule {
    pub lhs: EventTerm,
    pub rhs: EventTerm,
    pub conditions: Vec<SideCondition>,
    pub provenance: String,
}

pub type Bindings = BTreeMap<String, EventTerm>;

impl RewriteRule {
    pub fn new(lhs: &str, rhs: &str, provenance: impl Into<String>) -> Self {
        RewriteRule {
            lhs: lhs.parse().unwrap_or_else(|e| panic!("bad rule lhs `{lhs}`: {e}")),
            rhs: rhs.parse().unwrap_or_else(|e| panic!("bad rule rhs `{rhs}`: {e}")),
            conditions: Vec::new(),
            provenance: provenance.into(),
        }
    }

    /// Binds the metavariables of `lhs` so that it equals `term`, if possible.
    pub fn match_root(&self, term: &EventTerm) -> Option<Bindings> {
        let mut b = Bindings::new();
        match_pattern(&self.lhs, term, &mut b).then_some(b)
    }

    /// Rewrites `term` at the root if the left-hand side matches.
    pub fn apply_root(&self, term: &EventTerm) -> Option<EventTerm> {
        let b = self.match_root(term)?;
        Some(instantiate(&self.rhs, &b))
    }

    /// Rewrites the first matching subterm, innermost-first and left to right.
    pub fn apply_innermost(&self, term: &EventTerm) -> Option<EventTerm> {
        if let Some((l, r)) = term.children() {
            if let Some(l2) = self.apply_innermost(l) {
                return Some(term.with_children(l2, r.clone()));
            }
            if let Some(r2) = self.apply_innermost(r) {
                return Some(term.with_children(l.clone(), r2));
            }
        }
        self.apply_root(term)
    }
}

fn match_pattern(pattern: &EventTerm, term: &EventTerm, b: &mut Bindings) -> bool {
    match pattern {
        EventTerm::Var(meta) => match b.get(meta) {
            Some(bound) => bound == term,
            None => {
                b.insert(meta.clone(), term.clone());
                true
            }
        },
        EventTerm::Always | EventTerm::Never => pattern == term,
        _ => {
            let (pl, pr) = pattern.children().expect("binary");
            let Some((tl, tr)) = term.children() else {
                return false;
            };
            std::mem::discriminant(pattern) == std::mem::discriminant(term)
                && match_pattern(pl, tl, b)
                && match_pattern(pr, tr, b)
        }
    }
}

/// Replaces metavariables by their bindings; unbound names stay as variables.
pub fn instantiate(pattern: &EventTerm, b: &Bindings) -> EventTerm {
    pattern.substitute(&mut |name| b.get(name).cloned().unwrap_or_else(|| EventTerm::var(name)))
}

/// Rule rows grouped by operator family, left side first. The distributivity
/// row and the last inclusive-before absorption row use their algebraic form.
const TABLES: [(&str, &[(&str, &str)]); 5] = [
    (
        "Table 1 (OR/AND)",
        &[
            ("A + B", "B + A"),
            ("A . B", "B . A"),
            ("A + (B + C)", "(A + B) + C"),
            ("A . (B . C)", "(A . B) . C"),
            ("A + A", "A"),
            ("A . A", "A"),
            ("A . (B + C)", "A . B + A . C"),
            ("A + NEVER", "A"),
            ("A . ALWAYS", "A"),
            ("A + ALWAYS", "ALWAYS"),
            ("A . NEVER", "NEVER"),
            ("A + B . C", "(A + B) . (A + C)"),
            ("A + A . B", "A"),
            ("A . (A + B)", "A"),
        ],
    ),
    (
        "Table 2 (Before)",
        &[
            ("(A < B) . (B < A)", "NEVER"),
            ("A < (B < C)", "(A < B) + A . B . ((C < B) + (C ~ B))"),
            ("A < (B < C)", "(A < B) + A . B . (C <= B)"),
            ("(A < B) < C", "(A < B) . (A < C)"),
            ("NEVER < A", "NEVER"),
            ("A < NEVER", "A"),
            ("A < A", "NEVER"),
            ("A < (B + C)", "(A < B) . (A < C)"),
            ("A < (B . C)", "(A < B) + (A < C)"),
            ("A < (B ~ C)", "A . (B < C) + A . (C < B) + (A < B) + (A < C)"),
            ("A < (B <= C)", "(A < B) + A . B . (C < B)"),
            ("(A + B) < C", "(A < C) + (B < C)"),
            ("(A . B) < C", "(A < C) . (B < C)"),
            ("(A ~ B) < C", "(A ~ B) . (A < C)"),
            ("(A ~ B) < C", "(A ~ B) . (B < C)"),
            ("(A ~ B) < C", "(A < C) ~ (B < C)"),
            ("(A <= B) < C", "(A <= B) . (A < C)"),
            ("A + (A < B)", "A"),
            ("(A < B) + B", "A + B"),
            ("A . (A < B)", "A < B"),
            ("(A < B) . (B < C) . (A < C)", "(A < B) . (B < C)"),
        ],
    ),
    (
        "Table 3 (Simultaneous)",
        &[
            ("A ~ B", "B ~ A"),
            ("A ~ (B ~ C)", "(A ~ B) ~ C"),
            ("A ~ (B ~ C)", "(A ~ B) . (B ~ C)"),
            ("A ~ (B ~ C)", "(A ~ C) . (C ~ B)"),
            ("A ~ NEVER", "NEVER"),
            ("A ~ A", "A"),
            ("A ~ (B + C)", "(A ~ B) . (B ~ C) + (A ~ B) . (B < C) + (A ~ C) . (C < B)"),
            ("A ~ (B + C)", "(A ~ B) . (B <= C) + (A ~ C) . (C <= B)"),
            ("A ~ (B . C)", "(A ~ B) . (B ~ C) + (A ~ B) . (C < B) + (A ~ C) . (B < C)"),
            ("A ~ (B . C)", "(A ~ B) . (C <= B) + (A ~ C) . (B <= C)"),
            ("A ~ (B < C)", "(A ~ B) . (B < C)"),
            ("A ~ (B <= C)", "(A ~ B) . (B <= C)"),
            ("A + (A ~ B)", "A"),
            ("A . (A ~ B)", "A ~ B"),
            ("(A ~ B) . (B ~ C) . (A ~ C)", "(A ~ B) . (B ~ C)"),
        ],
    ),
    (
        "Table 4 (Inclusive Before)",
        &[
            ("(A <= B) . (B <= A)", "A ~ B"),
            ("A <= (B <= C)", "(A < B) + A . B . (C < B) + (A ~ B) . (B <= C)"),
            ("(A <= B) <= C", "(A <= B) . (A <= C)"),
            ("NEVER <= A", "NEVER"),
            ("A <= NEVER", "A"),
            ("A <= A", "A"),
            ("A <= (B + C)", "(A <= B) . (A <= C)"),
            ("A <= (B . C)", "(A <= B) + (A <= C)"),
            ("A <= (B < C)", "(A < B) + A . B . (C <= B) + (A ~ B) . (B < C)"),
            (
                "A <= (B ~ C)",
                "A . (B < C) + A . (C < B) + (A < B) + (A < C) + (A ~ B) . (B ~ C)",
            ),
            ("(A + B) <= C", "(A <= C) + (B <= C)"),
            ("(A . B) <= C", "(A <= C) . (B <= C)"),
            ("(A ~ B) <= C", "(A ~ B) . (A <= C)"),
            ("(A ~ B) <= C", "(A ~ B) . (B <= C)"),
            ("(A ~ B) <= C", "(A <= C) ~ (B <= C)"),
            ("(A < B) <= C", "(A < B) . (A <= C)"),
            ("A + (A <= B)", "A"),
            ("B + (A <= B)", "A + B"),
            ("A . (A <= B)", "A <= B"),
            ("(A <= B) + (B <= A)", "A + B"),
            ("A . (B <= A) + B . (A <= B)", "A . B"),
            ("(A <= B) + A . (B <= A)", "A"),
            ("(A <= B) . (B <= C) . (A <= C)", "(A <= B) . (B <= C)"),
        ],
    ),
    (
        "Table 5 (combinations)",
        &[
            ("(A <= B) + (A < B)", "A <= B"),
            ("(A <= B) + (A ~ B)", "A <= B"),
            ("(A < B) . (A ~ B)", "NEVER"),
            ("(A < B) . (B ~ C)", "(A < C) . (B ~ C)"),
            ("(A <= B) . (A < B)", "A < B"),
            ("(A < B) . (B <= A)", "NEVER"),
            ("(A <= B) . (A ~ B)", "A ~ B"),
            ("(A < B) + (A ~ B) + (B < A)", "A + B"),
            ("A . (B < A) + (A ~ B) + B . (A < B)", "A . B"),
            ("(A < B) + (A ~ B) + A . (B < A)", "A"),
            ("(A < B) . (B < C) . (A <= C)", "(A < B) . (B < C)"),
        ],
    ),
];

/// Every simplification theorem, directed left to right as printed.
pub fn rule_catalog() -> Vec<RewriteRule> {
    TABLES
        .iter()
        .flat_map(|(table, rows)| {
            rows.iter()
                .enumerate()
                .map(move |(i, (l, r))| RewriteRule::new(l, r, format!("{table}, row {}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::free_variables;

    fn t(s: &str) -> EventTerm {
        s.parse().unwrap()
    }

    #[test]
    fn catalog_has_every_row() {
        let rules = rule_catalog();
        assert!(rules.len() >= 80, "only {} rules", rules.len());
        assert_eq!(rules.len(), 84);
        for rule in &rules {
            assert!(free_variables(&rule.lhs).len() <= 3, "{}", rule.provenance);
            assert!(free_variables(&rule.rhs).is_subset(&free_variables(&rule.lhs)));
        }
    }

    #[test]
    fn catalog_contains_printed_examples() {
        let rules = rule_catalog();
        let has = |l: &str, r: &str| rules.iter().any(|x| x.lhs == t(l) && x.rhs == t(r));
        assert!(has("A + A", "A"));
        assert!(has("A < NEVER", "A"));
        assert!(has("(A + B) <= C", "(A <= C) + (B <= C)"));
        assert!(has("(A < B) . (B < A)", "NEVER"));
        assert!(has("A ~ A", "A"));
        assert!(has("(A <= B) . (B <= A)", "A ~ B"));
        assert!(has("(A < B) . (A ~ B)", "NEVER"));
    }

    #[test]
    fn matching_respects_repeated_metavariables() {
        let idem = RewriteRule::new("A + A", "A", "test");
        assert_eq!(idem.apply_root(&t("(x . y) + (x . y)")), Some(t("x . y")));
        assert_eq!(idem.apply_root(&t("(x . y) + (y . x)")), None);
    }

    #[test]
    fn innermost_application() {
        let r = RewriteRule::new("A < NEVER", "A", "test");
        assert_eq!(r.apply_innermost(&t("p + ((q < NEVER) < NEVER)")), Some(t("p + (q < NEVER)")));
        assert_eq!(r.apply_innermost(&t("p + q")), None);
    }
}
