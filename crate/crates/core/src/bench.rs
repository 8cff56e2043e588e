//! Built-in benchmark trees and the before/after-reduction comparison.
//!
//! Each benchmark pairs a gate-level model with a hand-reduced top term. The
//! comparison certifies that the two terms agree under the model's side
//! conditions, then builds a Markov chain for each and compares state counts
//! and failure probabilities.

use std::fmt;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{free_variables, EventTerm, SideCondition, Valuation};
use crate::galileo::{to_structure_function, DftModel, StructureError, StructureFunction};
use crate::markov::{build_ctmc, transient_failure_probability, MarkovError};
use crate::rewrite::{decide_equivalence, EquivError, Mode, Verdict, CERTIFICATE_SEED};

/// How simultaneous functional-dependency failures are ordered. Reported with
/// every comparison because it fixes the semantics of the original models.
pub const FDEP_RESOLUTION: &str = "dependents fail with their trigger, in declaration order";

/// Basic-event rates are chosen here, not taken from a published source.
pub const RATE_NOTE: &str = "illustrative rates (lambda 0.01 by default; see each model file)";

/// Names of the built-in benchmarks, in report order.
pub const BENCHMARK_NAMES: [&str; 5] = ["cpand", "ahrs", "mcs", "hecs", "hcas"];

const SOURCES: [(&str, &str, &str, &str); 5] = [
    (
        "cpand",
        "scaled cascaded PAND",
        include_str!("../benchmarks/cpand.dft"),
        include_str!("../benchmarks/cpand.reduced"),
    ),
    (
        "ahrs",
        "active heat rejection system",
        include_str!("../benchmarks/ahrs.dft"),
        include_str!("../benchmarks/ahrs.reduced"),
    ),
    (
        "mcs",
        "multiprocessor computing system",
        include_str!("../benchmarks/mcs.dft"),
        include_str!("../benchmarks/mcs.reduced"),
    ),
    (
        "hecs",
        "hypothetical example computer system",
        include_str!("../benchmarks/hecs.dft"),
        include_str!("../benchmarks/hecs.reduced"),
    ),
    (
        "hcas",
        "hypothetical cardiac assist system",
        include_str!("../benchmarks/hcas.dft"),
        include_str!("../benchmarks/hcas.reduced"),
    ),
];

/// One built-in benchmark.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub description: &'static str,
    /// Model text in the Galileo dialect.
    pub source: &'static str,
    pub original: DftModel,
    pub reduced_term: EventTerm,
    /// Hypotheses of the reduction beyond those the model itself implies.
    pub extra_conditions: Vec<SideCondition>,
}

impl Benchmark {
    /// Structure function of the original model with all reduction hypotheses.
    pub fn original_structure(&self) -> Result<StructureFunction, StructureError> {
        let mut sf = to_structure_function(&self.original)?;
        sf.conditions.extend(self.extra_conditions.iter().cloned());
        Ok(sf)
    }

    /// The original dynamics driven by the reduced top term.
    pub fn reduced_structure(&self) -> Result<StructureFunction, StructureError> {
        Ok(self.original_structure()?.with_term(self.reduced_term.clone()))
    }
}

fn extra_conditions(name: &str) -> Vec<SideCondition> {
    let t = |s: &str| s.parse::<EventTerm>().expect("built-in condition parses");
    match name {
        // The CPU spare cannot fail before the CPU, and the pump spare cannot
        // fail before the first pump failure.
        "hcas" => vec![
            SideCondition::TermEqNever(t("B_a < P")),
            SideCondition::TermEqNever(t("(BP_a < P1) . (P1 < P2)")),
            SideCondition::TermEqNever(t("(BP_a < P2) . (P2 < P1)")),
        ],
        _ => Vec::new(),
    }
}

/// All five benchmarks, in report order.
pub fn builtin_models() -> Vec<Benchmark> {
    SOURCES
        .iter()
        .map(|&(name, description, source, reduced)| Benchmark {
            name,
            description,
            source,
            original: DftModel::parse(source).expect("built-in model parses"),
            reduced_term: reduced.parse().expect("built-in reduced term parses"),
            extra_conditions: extra_conditions(name),
        })
        .collect()
}

/// The benchmark called `name`, if there is one.
pub fn builtin_model(name: &str) -> Option<Benchmark> {
    builtin_models().into_iter().find(|b| b.name == name)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}` (expected one of {names})", names = BENCHMARK_NAMES.join(", "))]
    UnknownModel(String),
    #[error("the reduced term of `{model}` differs from the original at {witness:?}")]
    NotEquivalent { model: String, witness: Valuation },
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Equivalence(#[from] EquivError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// Before/after figures for one benchmark at one time bound.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonEntry {
    pub model: String,
    pub time_bound: f64,
    pub variables: usize,
    pub states_before: usize,
    pub states_after: usize,
    pub transitions_before: usize,
    pub transitions_after: usize,
    pub prob_before: f64,
    pub prob_after: f64,
    /// `|prob_before - prob_after| / prob_before`, or 0 when both are 0.
    pub relative_difference: f64,
    pub equivalence_certificate: Verdict,
    /// Chain construction plus transient solve, in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_before: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_after: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_certificate: Option<f64>,
}

impl ComparisonEntry {
    /// Total wall time of the entry, if timings were kept.
    pub fn total_wall_time(&self) -> Option<f64> {
        Some(self.wall_time_before? + self.wall_time_after? + self.wall_time_certificate?)
    }

    pub fn clear_timings(&mut self) {
        self.wall_time_before = None;
        self.wall_time_after = None;
        self.wall_time_certificate = None;
    }
}

/// Certificate, chain sizes and probabilities for benchmark `name` at time `t`.
pub fn run_comparison(name: &str, t: f64, tol: f64, budget: usize) -> Result<ComparisonEntry, BenchError> {
    let bench = builtin_model(name).ok_or_else(|| BenchError::UnknownModel(name.to_string()))?;
    let original = bench.original_structure()?;
    let reduced = bench.reduced_structure()?;

    let clock = Instant::now();
    let mut vars = free_variables(&original.term);
    vars.extend(free_variables(&reduced.term));
    for c in &original.conditions {
        vars.extend(c.variables());
    }
    let mode = Mode::auto(vars.len(), CERTIFICATE_SEED);
    let certificate = decide_equivalence(&original.term, &reduced.term, &original.conditions, mode)?;
    if let Verdict::NotEquivalent { witness, .. } = certificate {
        return Err(BenchError::NotEquivalent {
            model: name.to_string(),
            witness,
        });
    }
    let wall_certificate = clock.elapsed().as_secs_f64();

    let solve = |sf: &StructureFunction| -> Result<(usize, usize, f64, f64), BenchError> {
        let clock = Instant::now();
        let ctmc = build_ctmc(sf, budget)?;
        let p = transient_failure_probability(&ctmc, t, tol)?;
        Ok((ctmc.state_count(), ctmc.transition_count(), p, clock.elapsed().as_secs_f64()))
    };
    let (states_before, transitions_before, prob_before, wall_before) = solve(&original)?;
    let (states_after, transitions_after, prob_after, wall_after) = solve(&reduced)?;

    let relative_difference = if prob_before == 0.0 && prob_after == 0.0 {
        0.0
    } else {
        (prob_before - prob_after).abs() / prob_before
    };
    Ok(ComparisonEntry {
        model: name.to_string(),
        time_bound: t,
        variables: original.variables().len(),
        states_before,
        states_after,
        transitions_before,
        transitions_after,
        prob_before,
        prob_after,
        relative_difference,
        equivalence_certificate: certificate,
        wall_time_before: Some(wall_before),
        wall_time_after: Some(wall_after),
        wall_time_certificate: Some(wall_certificate),
    })
}

/// Comparison entries for several benchmarks, with the semantic choices they
/// depend on.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub fdep_resolution: &'static str,
    pub rates: &'static str,
    pub tolerance: f64,
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonReport {
    /// Runs the named benchmarks one after another so timings are uncontended.
    pub fn run(names: &[&str], t: f64, tol: f64, budget: usize) -> Result<Self, BenchError> {
        let entries = names
            .iter()
            .map(|n| run_comparison(n, t, tol, budget))
            .collect::<Result<_, _>>()?;
        Ok(ComparisonReport {
            fdep_resolution: FDEP_RESOLUTION,
            rates: RATE_NOTE,
            tolerance: tol,
            entries,
        })
    }

    pub fn clear_timings(&mut self) {
        self.entries.iter_mut().for_each(ComparisonEntry::clear_timings);
    }
}

fn certificate_label(v: &Verdict) -> String {
    match v {
        Verdict::Equivalent { patterns } => format!("exact ({patterns} patterns)"),
        Verdict::SampledEquivalent { trials, accepted, .. } => format!("sampled ({accepted}/{trials})"),
        Verdict::NotEquivalent { .. } => "NOT EQUIVALENT".to_string(),
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
        writeln!(
            f,
            "{:<6} {:>7} {:>10} {:>10} {:>16} {:>16} {:>10} {:>9} {:>9}  certificate",
            "model", "time", "states", "states'", "probability", "probability'", "rel.diff", "wall(s)", "wall'(s)"
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<6} {:>7} {:>10} {:>10} {:>16.9e} {:>16.9e} {:>10.2e} {:>9} {:>9}  {}",
                e.model,
                e.time_bound,
                e.states_before,
                e.states_after,
                e.prob_before,
                e.prob_after,
                e.relative_difference,
                secs(e.wall_time_before),
                secs(e.wall_time_after),
                certificate_label(&e.equivalence_certificate)
            )?;
        }
        writeln!(f, "fdep resolution: {}", self.fdep_resolution)?;
        write!(f, "rates: {}", self.rates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_models_in_order() {
        let names: Vec<_> = builtin_models().iter().map(|b| b.name).collect();
        assert_eq!(names, BENCHMARK_NAMES);
        assert!(builtin_model("nope").is_none());
    }

    #[test]
    fn ahrs_reduced_has_three_summands() {
        assert_eq!(builtin_model("ahrs").unwrap().reduced_term.summands().len(), 3);
    }

    #[test]
    fn cpand_has_thirty_events() {
        assert_eq!(builtin_model("cpand").unwrap().original.basic_events().count(), 30);
    }

    #[test]
    fn hcas_states_the_spare_ordering_hypothesis() {
        let b = builtin_model("hcas").unwrap();
        let cond = SideCondition::TermEqNever("B_a < P".parse().unwrap());
        assert!(b.original_structure().unwrap().conditions.contains(&cond));
    }

    #[test]
    fn reduced_terms_use_model_variables() {
        for b in builtin_models() {
            let sf = b.original_structure().unwrap();
            let vars = sf.variables();
            for v in free_variables(&b.reduced_term) {
                assert!(vars.contains(&v), "{}: {v}", b.name);
            }
        }
    }

    #[test]
    fn unknown_model_is_an_error() {
        assert_eq!(
            run_comparison("nope", 1.0, 1e-10, 10).unwrap_err(),
            BenchError::UnknownModel("nope".into())
        );
    }
}
