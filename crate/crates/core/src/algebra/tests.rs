use proptest::prelude::*;

use super::*;

fn v(name: &str) -> EventTerm {
    EventTerm::var(name)
}

fn val(pairs: &[(&str, FailureTime)]) -> Valuation {
    pairs.iter().map(|(k, t)| (k.to_string(), *t)).collect()
}

fn at(t: f64) -> FailureTime {
    FailureTime::at(t)
}

#[test]
fn eval_examples() {
    let a_b = |x: f64, y: f64| val(&[("a", at(x)), ("b", at(y))]);
    assert_eq!(eval_term(&EventTerm::and(v("a"), v("b")), &a_b(3.0, 5.0)).unwrap(), at(5.0));
    assert_eq!(
        eval_term(&EventTerm::before(v("a"), v("b")), &a_b(7.0, 2.0)).unwrap(),
        FailureTime::NEVER
    );
    assert_eq!(eval_term(&EventTerm::simult(v("a"), v("b")), &a_b(4.0, 4.0)).unwrap(), at(4.0));
    assert_eq!(eval_term(&EventTerm::incl_before(v("a"), v("b")), &a_b(2.0, 2.0)).unwrap(), at(2.0));
}

#[test]
fn missing_variable_is_reported() {
    let err = eval_term(&EventTerm::or(v("a"), v("zz")), &val(&[("a", at(1.0))])).unwrap_err();
    assert_eq!(err, AlgebraError::MissingVariable("zz".into()));
}

#[test]
fn desugar_examples() {
    let pand = desugar_gate(GateKind::Pand, vec![v("A"), v("B")]).unwrap();
    assert_eq!(pand, EventTerm::and(v("B"), EventTerm::incl_before(v("A"), v("B"))));
    let fdep = desugar_gate(GateKind::Fdep, vec![v("A"), v("T")]).unwrap();
    assert_eq!(fdep, EventTerm::or(v("A"), v("T")));
    let hsp = desugar_gate(GateKind::Hsp, vec![v("A"), v("B")]).unwrap();
    assert_eq!(hsp, EventTerm::and(v("A"), v("B")));
    let vote = desugar_gate(GateKind::Vote(2), vec![v("A"), v("B"), v("C")]).unwrap();
    assert_eq!(vote.to_string(), "(((A . B) + (A . C)) + (B . C))");
}

#[test]
fn desugar_arity_errors() {
    assert!(matches!(
        desugar_gate(GateKind::Pand, vec![v("A")]),
        Err(AlgebraError::ArityMismatch { .. })
    ));
    assert!(matches!(
        desugar_gate(GateKind::Wsp, vec![v("A"), v("B")]),
        Err(AlgebraError::ArityMismatch { .. })
    ));
    assert_eq!(
        desugar_gate(GateKind::Vote(4), vec![v("A"), v("B"), v("C")]),
        Err(AlgebraError::BadVoteThreshold { k: 4, n: 3 })
    );
    assert_eq!(
        desugar_gate(GateKind::Vote(0), vec![v("A")]),
        Err(AlgebraError::BadVoteThreshold { k: 0, n: 1 })
    );
}

#[test]
fn free_variable_examples() {
    let names = |t: &EventTerm| free_variables(t).into_iter().collect::<Vec<_>>();
    assert_eq!(names(&EventTerm::and(v("b"), v("a"))), ["a", "b"]);
    assert!(names(&EventTerm::Never).is_empty());
    assert_eq!(names(&EventTerm::or(v("a"), EventTerm::and(v("a"), v("b")))), ["a", "b"]);
}

#[test]
fn all_distinct_ignores_never() {
    let c = SideCondition::AllDistinct(vec!["a".into(), "b".into(), "c".into()]);
    let ok = val(&[("a", at(1.0)), ("b", FailureTime::NEVER), ("c", FailureTime::NEVER)]);
    let clash = val(&[("a", at(1.0)), ("b", at(1.0)), ("c", FailureTime::NEVER)]);
    assert!(c.holds(&ok).unwrap());
    assert!(!c.holds(&clash).unwrap());
}

const NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn arb_time() -> impl Strategy<Value = FailureTime> {
    // Small integer grid so ties and NEVER are frequent.
    prop_oneof![
        4 => (0u8..4).prop_map(|k| FailureTime::at(k as f64 + 1.0)),
        1 => Just(FailureTime::NEVER),
    ]
}

fn arb_valuation() -> impl Strategy<Value = Valuation> {
    proptest::collection::vec(arb_time(), NAMES.len())
        .prop_map(|ts| NAMES.iter().map(|n| n.to_string()).zip(ts).collect())
}

pub(crate) fn arb_term() -> impl Strategy<Value = EventTerm> {
    let leaf = prop_oneof![
        6 => proptest::sample::select(&NAMES[..]).prop_map(EventTerm::var),
        1 => Just(EventTerm::Always),
        1 => Just(EventTerm::Never),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        (0u8..5, inner.clone(), inner).prop_map(|(op, l, r)| match op {
            0 => EventTerm::and(l, r),
            1 => EventTerm::or(l, r),
            2 => EventTerm::simult(l, r),
            3 => EventTerm::before(l, r),
            _ => EventTerm::incl_before(l, r),
        })
    })
}

proptest! {
    #[test]
    fn and_is_max_or_is_min(x in arb_term(), y in arb_term(), s in arb_valuation()) {
        let (ex, ey) = (eval_term(&x, &s).unwrap(), eval_term(&y, &s).unwrap());
        prop_assert_eq!(eval_term(&EventTerm::and(x.clone(), y.clone()), &s).unwrap(), ex.max(ey));
        prop_assert_eq!(eval_term(&EventTerm::or(x, y), &s).unwrap(), ex.min(ey));
    }

    #[test]
    fn identities(t in arb_term(), s in arb_valuation()) {
        let e = eval_term(&t, &s).unwrap();
        prop_assert_eq!(eval_term(&EventTerm::or(t.clone(), EventTerm::Never), &s).unwrap(), e);
        prop_assert_eq!(eval_term(&EventTerm::and(t, EventTerm::Always), &s).unwrap(), e);
    }

    #[test]
    fn compiled_matches_tree_eval(t in arb_term(), s in arb_valuation()) {
        let names: Vec<String> = NAMES.iter().map(|n| n.to_string()).collect();
        let c = CompiledTerm::new(&t, &names).unwrap();
        prop_assert_eq!(c.eval_valuation(&s).unwrap(), eval_term(&t, &s).unwrap());
    }

    #[test]
    fn display_parse_round_trip(t in arb_term()) {
        let back: EventTerm = t.to_string().parse().unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn distinct_events_never_simultaneous(a in 0.0f64..10.0, d in 0.001f64..10.0) {
        let s = val(&[("a", at(a)), ("b", at(a + d))]);
        prop_assert!(eval_term(&EventTerm::simult(v("a"), v("b")), &s).unwrap().is_never());
    }

    #[test]
    fn csp_matches_definition(s in arb_valuation()) {
        // Def 12: if A < B then B else NEVER.
        let (a, b) = (s["A"], s["B"]);
        let expected = if a < b { b } else { FailureTime::NEVER };
        let csp = desugar_gate(GateKind::Csp, vec![v("A"), v("B")]).unwrap();
        prop_assert_eq!(eval_term(&csp, &s).unwrap(), expected);
    }

    #[test]
    fn warm_spare_with_cold_dormant_is_csp(s in arb_valuation()) {
        let mut s = s;
        s.insert("C".into(), FailureTime::NEVER);
        let distinct = SideCondition::AllDistinct(vec!["A".into(), "B".into()]);
        prop_assume!(distinct.holds(&s).unwrap());
        let wsp = desugar_gate(GateKind::Wsp, vec![v("A"), v("B"), v("C")]).unwrap();
        let csp = desugar_gate(GateKind::Csp, vec![v("A"), v("B")]).unwrap();
        prop_assert_eq!(eval_term(&wsp, &s).unwrap(), eval_term(&csp, &s).unwrap());
    }

    #[test]
    fn warm_spare_with_one_state_is_hsp(s in arb_valuation()) {
        let wsp = desugar_gate(GateKind::Wsp, vec![v("A"), v("B"), v("B")]).unwrap();
        let hsp = desugar_gate(GateKind::Hsp, vec![v("A"), v("B")]).unwrap();
        prop_assert_eq!(eval_term(&wsp, &s).unwrap(), eval_term(&hsp, &s).unwrap());
    }
}

#[test]
fn sop_string_flattens_sums_and_products() {
    let t: EventTerm = "(A . B) + (((C < D) . E) + (F + G . H))".parse().unwrap();
    let s = t.to_sop_string();
    assert_eq!(s, "A . B + (C < D) . E + F + G . H");
    let back: EventTerm = s.parse().unwrap();
    assert_eq!(back.summands(), t.summands());
}
