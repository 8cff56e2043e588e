//! Parse, reduce and solve randomly generated fault trees end to end.

use dft_core::galileo::{to_structure_function, DftModel};
use dft_core::markov::{build_ctmc, transient_failure_probability, DEFAULT_STATE_BUDGET};
use dft_core::rewrite::apply_reduction;
use proptest::prelude::*;

const EVENTS: usize = 4;
const RATES: [f64; EVENTS] = [0.4, 0.1, 0.25, 0.05];

#[derive(Debug, Clone)]
enum Tree {
    Leaf(usize),
    And(Box<Tree>, Box<Tree>),
    Or(Box<Tree>, Box<Tree>),
    Pand(Box<Tree>, Box<Tree>),
}

fn tree(dynamic: bool) -> impl Strategy<Value = Tree> {
    let leaf = (0..EVENTS).prop_map(Tree::Leaf);
    leaf.prop_recursive(3, 12, 2, move |inner| {
        let pair = (inner.clone(), inner);
        let arms = if dynamic { 3 } else { 2 };
        (pair, 0..arms).prop_map(|((a, b), k)| {
            let (a, b) = (Box::new(a), Box::new(b));
            match k {
                0 => Tree::And(a, b),
                1 => Tree::Or(a, b),
                _ => Tree::Pand(a, b),
            }
        })
    })
}

/// Galileo text for `t`; every event is declared even when unused.
fn galileo(t: &Tree) -> String {
    fn emit(t: &Tree, gates: &mut Vec<String>) -> String {
        let (kind, a, b) = match t {
            Tree::Leaf(i) => return format!("E{i}"),
            Tree::And(a, b) => ("and", a, b),
            Tree::Or(a, b) => ("or", a, b),
            Tree::Pand(a, b) => ("pand", a, b),
        };
        let (a, b) = (emit(a, gates), emit(b, gates));
        let name = format!("G{}", gates.len());
        gates.push(format!("\"{name}\" {kind} \"{a}\" \"{b}\";"));
        name
    }
    let mut gates = Vec::new();
    let top = emit(t, &mut gates);
    let mut text = format!("toplevel \"{top}\";\n");
    for g in gates {
        text.push_str(&g);
        text.push('\n');
    }
    for (i, r) in RATES.iter().enumerate() {
        text.push_str(&format!("\"E{i}\" lambda={r};\n"));
    }
    text
}

fn fails(t: &Tree, failed: u32) -> bool {
    match t {
        Tree::Leaf(i) => failed & (1 << i) != 0,
        Tree::And(a, b) => fails(a, failed) && fails(b, failed),
        Tree::Or(a, b) => fails(a, failed) || fails(b, failed),
        Tree::Pand(..) => unreachable!("static trees only"),
    }
}

/// Failure probability of a static tree by enumerating failed-event sets.
fn static_probability(t: &Tree, time: f64) -> f64 {
    (0..1u32 << EVENTS)
        .filter(|&set| fails(t, set))
        .map(|set| {
            (0..EVENTS)
                .map(|i| {
                    let q = 1.0 - (-RATES[i] * time).exp();
                    if set & (1 << i) != 0 {
                        q
                    } else {
                        1.0 - q
                    }
                })
                .product::<f64>()
        })
        .sum()
}

fn probability(sf: &dft_core::galileo::StructureFunction, time: f64) -> f64 {
    let ctmc = build_ctmc(sf, DEFAULT_STATE_BUDGET).unwrap();
    transient_failure_probability(&ctmc, time, 1e-12).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn static_trees_match_enumeration(t in tree(false), time in 0.5f64..20.0) {
        let model = DftModel::parse(&galileo(&t)).unwrap();
        let sf = to_structure_function(&model).unwrap();
        let p = probability(&sf, time);
        let want = static_probability(&t, time);
        prop_assert!((p - want).abs() < 1e-9, "{p} vs {want}");
    }

    #[test]
    fn reduction_preserves_probability(t in tree(true), time in 0.5f64..20.0) {
        let model = DftModel::parse(&galileo(&t)).unwrap();
        let sf = to_structure_function(&model).unwrap();
        let reduction = apply_reduction(&sf.term, &sf.conditions).unwrap();
        prop_assert!(reduction.certificate.is_equivalent());
        let before = probability(&sf, time);
        let after = probability(&sf.with_term(reduction.reduced.clone()), time);
        prop_assert!((before - after).abs() < 1e-9, "{before} vs {after} for {}", reduction.reduced);
    }
}

#[test]
fn benchmark_reductions_are_certified() {
    for bench in dft_core::bench::builtin_models() {
        if bench.name == "cpand" {
            // Covered by the acceptance suite; it takes several seconds.
            continue;
        }
        let sf = bench.original_structure().unwrap();
        let reduction = apply_reduction(&sf.term, &sf.conditions).unwrap();
        assert!(reduction.certificate.is_equivalent(), "{}", bench.name);
    }
}
