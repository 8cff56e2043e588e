use proptest::prelude::*;

use super::*;
use crate::algebra::{free_variables, EventTerm, SideCondition};

fn t(s: &str) -> EventTerm {
    s.parse().unwrap()
}

fn norm(s: &str) -> EventTerm {
    normalize(&t(s), DEFAULT_BUDGET).unwrap()
}

#[test]
fn normalize_examples() {
    assert_eq!(norm("A + A . B"), t("A"));
    assert_eq!(norm("A . NEVER"), EventTerm::Never);
    assert_eq!(norm("(A + B) < C"), t("(A < C) + (B < C)"));
    assert_eq!(norm("A + (A < B)"), t("A"));
    assert_eq!(norm("(A < B) + B"), t("A + B"));
    assert_eq!(norm("(A <= B) . (B <= A)"), t("A ~ B"));
    assert_eq!(norm("(A < B) . (B < C) . (A < C)"), t("(A < B) . (B < C)"));
    assert_eq!(norm("A + ALWAYS"), EventTerm::Always);
}

#[test]
fn normalize_uses_distinctness() {
    let c = [SideCondition::AllDistinct(vec!["A".into(), "B".into()])];
    let r = normalize_under(&t("(A ~ B) + (A <= B)"), &c, DEFAULT_BUDGET).unwrap();
    assert_eq!(r, t("A < B"));
}

#[test]
fn normalize_budget() {
    assert!(matches!(
        normalize(&t("A + A . B"), 1),
        Err(NormalizeError::BudgetExhausted { .. })
    ));
    assert_eq!(normalize(&t("A"), 1).unwrap(), t("A"));
}

#[test]
fn reduction_of_a_variable() {
    let r = apply_reduction(&t("A"), &[]).unwrap();
    assert_eq!(r.reduced, t("A"));
    assert!(matches!(r.certificate, Verdict::Equivalent { .. }));
}

#[test]
fn cold_warm_spare_reduces_to_cold_spare_form() {
    let c = [
        SideCondition::ColdSpare("Bd".into()),
        SideCondition::AllDistinct(vec!["A".into(), "Ba".into(), "Bd".into()]),
    ];
    let wsp = normalize_under(&t("WSP A Ba Bd"), &c, DEFAULT_BUDGET).unwrap();
    let csp = normalize_under(&t("CSP A Ba"), &c, DEFAULT_BUDGET).unwrap();
    assert_eq!(wsp, csp);
}

fn arb_term() -> impl Strategy<Value = EventTerm> {
    crate::algebra::tests::arb_term()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]

    #[test]
    fn normal_form_is_equivalent_and_idempotent(x in arb_term()) {
        let n = normalize(&x, DEFAULT_BUDGET).unwrap();
        let v = decide_equivalence(&x, &n, &[], Mode::exact()).unwrap();
        prop_assert!(v.is_equivalent(), "{} vs {}: {:?}", x, n, v);
        prop_assert_eq!(normalize(&n, DEFAULT_BUDGET).unwrap(), n.clone());
        prop_assert!(free_variables(&n).is_subset(&free_variables(&x)));
    }

    #[test]
    fn commutative_children_canonicalise(x in arb_term(), y in arb_term()) {
        let a = normalize(&EventTerm::and(x.clone(), y.clone()), DEFAULT_BUDGET).unwrap();
        let b = normalize(&EventTerm::and(y.clone(), x.clone()), DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(a, b);
        let a = normalize(&EventTerm::or(x.clone(), y.clone()), DEFAULT_BUDGET).unwrap();
        let b = normalize(&EventTerm::or(y, x), DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sampling_never_contradicts_exact(x in arb_term(), y in arb_term()) {
        let exact = decide_equivalence(&x, &y, &[], Mode::exact()).unwrap();
        let sampled = decide_equivalence(&x, &y, &[], Mode::Sampled { trials: 500, seed: 3 }).unwrap();
        if exact.is_equivalent() {
            prop_assert!(sampled.is_equivalent());
        }
        if let Some(w) = sampled.witness() {
            let l = crate::algebra::eval_term(&x, w).unwrap();
            let r = crate::algebra::eval_term(&y, w).unwrap();
            prop_assert_ne!(l, r);
        }
    }
}
