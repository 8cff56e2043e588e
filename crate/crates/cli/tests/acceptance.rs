//! End-to-end acceptance checks over the built-in benchmarks.
//!
//! Several checks measure wall time, so the tests take a shared lock and run
//! one at a time. Benchmark comparisons are computed once and reused.

use dft_core::algebra::free_variables;
use dft_core::bench::{builtin_model, run_comparison, ComparisonEntry, BENCHMARK_NAMES};
use dft_core::galileo::DftModel;
use dft_core::markov::{
    build_model_ctmc, mean_time_to_failure, transient_failure_probability, Mttf, DEFAULT_STATE_BUDGET,
};
use dft_core::rewrite::{apply_reduction, Verdict};
use dft_core::simulate::simulate_model;
use std::collections::HashMap;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

const TOL: f64 = 1e-10;
const MC_TRIALS: u64 = 1_000_000;
const MC_SEED: u64 = 2019;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Comparison of one benchmark at time bound `t`, computed on first use.
fn comparison(name: &str, t: f64) -> ComparisonEntry {
    static CACHE: OnceLock<Mutex<HashMap<(String, u64), ComparisonEntry>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (name.to_string(), t.to_bits());
    if let Some(e) = cache.lock().unwrap().get(&key) {
        return e.clone();
    }
    let entry = run_comparison(name, t, TOL, DEFAULT_STATE_BUDGET)
        .unwrap_or_else(|e| panic!("{name} at t={t}: {e}"));
    cache.lock().unwrap().insert(key, entry.clone());
    entry
}

#[test]
fn c1_rule_catalog_verifies_quickly() {
    let _g = serial();
    let clock = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_dft"))
        .args(["--format", "json", "verify-rules", "--max-vars", "4"])
        .output()
        .unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rules = report["rules"].as_u64().unwrap();
    assert!(rules >= 80, "only {rules} rules");
    assert_eq!(report["failures"], 0);
    assert!(elapsed < 5.0, "verify-rules took {elapsed:.2} s");
}

#[test]
fn c2_every_benchmark_is_certified() {
    let _g = serial();
    let mut total = 0.0;
    for name in BENCHMARK_NAMES {
        let e = comparison(name, 10.0);
        match e.equivalence_certificate {
            Verdict::Equivalent { .. } => assert!(e.variables <= 7, "{name}: exact check on {} variables", e.variables),
            Verdict::SampledEquivalent { trials, .. } => {
                assert!(e.variables > 7, "{name}: sampled check on {} variables", e.variables);
                assert_eq!(trials, 1_000_000, "{name}");
            }
            Verdict::NotEquivalent { .. } => panic!("{name}: not equivalent"),
        }
        total += e.wall_time_certificate.unwrap();
    }
    assert!(total < 60.0, "certificates took {total:.1} s");
}

#[test]
fn c3_cpand_reduction_drops_irrelevant_events() {
    let _g = serial();
    let bench = builtin_model("cpand").unwrap();
    let sf = bench.original_structure().unwrap();
    let reduction = apply_reduction(&sf.term, &sf.conditions).unwrap();
    assert!(reduction.certificate.is_equivalent());
    let vars = free_variables(&reduction.reduced);
    for gone in ["N1", "O1", "P1", "N2", "O2", "P2"] {
        assert!(!vars.contains(gone), "{gone} survives in {}", reduction.reduced);
    }
    let reference = free_variables(&bench.reduced_term);
    for gone in ["N1", "O1", "P1", "N2", "O2", "P2"] {
        assert!(!reference.contains(gone));
    }
}

#[test]
fn c4_reduction_shrinks_every_state_space() {
    let _g = serial();
    let mut report = Vec::new();
    for name in BENCHMARK_NAMES {
        let e = comparison(name, 10.0);
        report.push(format!("{name}: {} -> {}", e.states_before, e.states_after));
    }
    let not_smaller: Vec<&String> = report
        .iter()
        .zip(BENCHMARK_NAMES)
        .filter(|(_, name)| {
            let e = comparison(name, 10.0);
            e.states_after >= e.states_before
        })
        .map(|(line, _)| line)
        .collect();
    assert!(
        not_smaller.is_empty(),
        "state space not reduced for {not_smaller:?} (all: {report:?})"
    );
}

#[test]
fn c5_reduction_preserves_unreliability() {
    let _g = serial();
    for t in [10.0, 1000.0] {
        for name in ["cpand", "ahrs", "mcs", "hecs"] {
            let e = comparison(name, t);
            assert!(
                e.relative_difference <= 1e-6,
                "{name} at t={t}: {} vs {} (rel {:e})",
                e.prob_before,
                e.prob_after,
                e.relative_difference
            );
        }
        let e = comparison("hcas", t);
        let model = builtin_model("hcas").unwrap().original;
        let est = simulate_model(&model, t, MC_TRIALS, MC_SEED).unwrap();
        assert!(
            est.brackets(e.prob_after, 3.0),
            "hcas at t={t}: reduced {} vs simulated {} +- {}",
            e.prob_after,
            est.p_hat,
            est.stderr
        );
    }
}

fn probability(text: &str, t: f64) -> f64 {
    let model = DftModel::parse(text).unwrap();
    let ctmc = build_model_ctmc(&model, DEFAULT_STATE_BUDGET).unwrap();
    transient_failure_probability(&ctmc, t, TOL).unwrap()
}

fn mttf(text: &str) -> f64 {
    let model = DftModel::parse(text).unwrap();
    match mean_time_to_failure(&build_model_ctmc(&model, DEFAULT_STATE_BUDGET).unwrap()).unwrap() {
        Mttf::Finite(m) => m,
        Mttf::Infinite => panic!("infinite mttf"),
    }
}

fn close(got: f64, want: f64, what: &str) {
    assert!((got - want).abs() <= 1e-8, "{what}: {got} vs {want}");
}

#[test]
fn c6_closed_forms() {
    let _g = serial();
    let (a, b) = (0.3f64, 0.05f64);
    let single = "toplevel \"A\";\n\"A\" lambda=0.3;\n";
    let or = "toplevel \"T\";\n\"T\" or \"A\" \"B\";\n\"A\" lambda=0.3;\n\"B\" lambda=0.05;\n";
    let and = "toplevel \"T\";\n\"T\" and \"A\" \"B\";\n\"A\" lambda=0.3;\n\"B\" lambda=0.05;\n";
    for t in [0.5, 10.0, 100.0] {
        let fa = 1.0 - (-a * t).exp();
        let fb = 1.0 - (-b * t).exp();
        close(probability(single, t), fa, "single event");
        close(probability(or, t), 1.0 - (-(a + b) * t).exp(), "or");
        close(probability(and, t), fa * fb, "and");
    }
    close(mttf(single), 1.0 / a, "single event mttf");
    close(mttf(or), 1.0 / (a + b), "or mttf");
    close(mttf(and), 1.0 / a + 1.0 / b - 1.0 / (a + b), "and mttf");
}

#[test]
fn c7_simulation_brackets_uniformization() {
    let _g = serial();
    for name in BENCHMARK_NAMES {
        let e = comparison(name, 10.0);
        let model = builtin_model(name).unwrap().original;
        let est = simulate_model(&model, 10.0, MC_TRIALS, MC_SEED).unwrap();
        assert!(
            est.brackets(e.prob_before, 3.0),
            "{name}: uniformization {} vs simulated {} +- {}",
            e.prob_before,
            est.p_hat,
            est.stderr
        );
    }
}

#[test]
fn c8_each_benchmark_runs_within_ten_seconds() {
    let _g = serial();
    for t in [10.0, 1000.0] {
        for name in BENCHMARK_NAMES {
            let e = comparison(name, t);
            let wall = e.total_wall_time().unwrap();
            assert!(wall < 10.0, "{name} at t={t} took {wall:.2} s");
        }
    }
}
