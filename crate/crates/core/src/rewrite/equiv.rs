//! Deciding equality of two terms under side conditions.
//!
//! Every operator only compares its inputs and returns one of them, `0` or
//! `NEVER`, so a term's value depends on nothing but the relative order of the
//! variables and which of them are `NEVER`. Enumerating those comparison
//! patterns is therefore a complete check; sampling is the fallback when there
//! are too many variables.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::RewriteRule;
use crate::algebra::{free_variables, CompiledTerm, EventTerm, FailureTime, SideCondition, Valuation};

/// Largest variable count accepted by exact mode unless overridden.
pub const DEFAULT_EXACT_BOUND: usize = 7;
/// Sample size used by certificates when exact mode is out of reach.
pub const DEFAULT_SAMPLED_TRIALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Exact { max_vars: usize },
    Sampled { trials: u64, seed: u64 },
}

impl Mode {
    pub fn exact() -> Self {
        Mode::Exact {
            max_vars: DEFAULT_EXACT_BOUND,
        }
    }

    /// Exact when the variable count allows it, otherwise the default sample size.
    pub fn auto(variable_count: usize, seed: u64) -> Self {
        if variable_count <= DEFAULT_EXACT_BOUND {
            Mode::exact()
        } else {
            Mode::Sampled {
                trials: DEFAULT_SAMPLED_TRIALS,
                seed,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Verdict {
    /// `patterns` counts the comparison patterns that satisfied the conditions.
    Equivalent { patterns: u64 },
    NotEquivalent {
        witness: Valuation,
        left: FailureTime,
        right: FailureTime,
    },
    /// `accepted` of the `trials` draws satisfied the conditions; none differed.
    SampledEquivalent { trials: u64, accepted: u64, seed: u64 },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        !matches!(self, Verdict::NotEquivalent { .. })
    }

    pub fn witness(&self) -> Option<&Valuation> {
        match self {
            Verdict::NotEquivalent { witness, .. } => Some(witness),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("exact mode supports at most {bound} variables, got {found}")]
    TooManyVariables { found: usize, bound: usize },
    #[error("no valuation satisfies the side conditions")]
    UnsatisfiableConditions,
    #[error("sampled mode needs at least one trial")]
    ZeroTrials,
}

/// One equivalence class of valuations: which variables are `NEVER`, and the
/// order (with ties) of the others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonPattern {
    pub never_set: Vec<String>,
    /// Earlier blocks fail strictly earlier; a block's members fail together.
    pub blocks: Vec<Vec<String>>,
}

impl ComparisonPattern {
    /// Block `i` fails at time `i + 1`; the never set at `NEVER`.
    pub fn representative(&self) -> Valuation {
        let mut v = Valuation::new();
        for name in &self.never_set {
            v.insert(name.clone(), FailureTime::NEVER);
        }
        for (i, block) in self.blocks.iter().enumerate() {
            for name in block {
                v.insert(name.clone(), FailureTime::at(i as f64 + 1.0));
            }
        }
        v
    }
}

/// Calls `f` with a rank per variable (`None` for `NEVER`, `Some(i)` for the
/// `i`-th distinct failure time). Order: never sets by size then
/// lexicographically, then fully distinct orderings before ones with ties,
/// each group in lexicographic rank order.
fn for_each_ranking(n: usize, mut f: impl FnMut(&[Option<usize>]) -> ControlFlow<()>) {
    let mut ranks = vec![None; n];
    for never_count in 0..=n {
        for never in (0..n).combinations(never_count) {
            let finite: Vec<usize> = (0..n).filter(|i| !never.contains(i)).collect();
            let m = finite.len();
            for i in 0..n {
                ranks[i] = None;
            }
            if m == 0 {
                if f(&ranks).is_break() {
                    return;
                }
                continue;
            }
            for k in (1..=m).rev() {
                let mut used = vec![0usize; k];
                if surjections(&finite, 0, k, 0, &mut used, &mut ranks, &mut f).is_break() {
                    return;
                }
            }
        }
    }
}

fn surjections(
    finite: &[usize],
    j: usize,
    k: usize,
    distinct: usize,
    used: &mut [usize],
    ranks: &mut [Option<usize>],
    f: &mut impl FnMut(&[Option<usize>]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    if j == finite.len() {
        return if distinct == k { f(ranks) } else { ControlFlow::Continue(()) };
    }
    let remaining_after = finite.len() - j - 1;
    for r in 0..k {
        let fresh = used[r] == 0;
        let now = distinct + usize::from(fresh);
        if k - now > remaining_after {
            continue;
        }
        used[r] += 1;
        ranks[finite[j]] = Some(r);
        let flow = surjections(finite, j + 1, k, now, used, ranks, f);
        used[r] -= 1;
        flow?;
    }
    ControlFlow::Continue(())
}

/// All comparison patterns over `vars`, in the order exact mode visits them.
pub fn comparison_patterns(vars: &[String]) -> Vec<ComparisonPattern> {
    let mut out = Vec::new();
    for_each_ranking(vars.len(), |ranks| {
        let k = ranks.iter().flatten().map(|r| r + 1).max().unwrap_or(0);
        let mut blocks = vec![Vec::new(); k];
        let mut never_set = Vec::new();
        for (name, r) in vars.iter().zip(ranks) {
            match r {
                Some(r) => blocks[*r].push(name.clone()),
                None => never_set.push(name.clone()),
            }
        }
        out.push(ComparisonPattern { never_set, blocks });
        ControlFlow::Continue(())
    });
    out
}

/// Side conditions over variable slots.
enum Check {
    Distinct(Vec<usize>),
    Never(usize),
    NeverPair(usize, usize),
    TermNever(CompiledTerm),
}

struct Problem {
    vars: Vec<String>,
    left: CompiledTerm,
    right: CompiledTerm,
    checks: Vec<Check>,
}

impl Problem {
    fn new(t1: &EventTerm, t2: &EventTerm, conditions: &[SideCondition]) -> Self {
        let mut vars: BTreeSet<String> = free_variables(t1);
        vars.extend(free_variables(t2));
        for c in conditions {
            vars.extend(c.variables());
        }
        let vars: Vec<String> = vars.into_iter().collect();
        let slot = |name: &String| vars.binary_search(name).expect("collected above");
        let checks = conditions
            .iter()
            .map(|c| match c {
                SideCondition::AllDistinct(names) => Check::Distinct(names.iter().map(slot).collect()),
                SideCondition::ColdSpare(a) => Check::Never(slot(a)),
                SideCondition::NeverEvents(a, b) => Check::NeverPair(slot(a), slot(b)),
                SideCondition::TermEqNever(t) => {
                    Check::TermNever(CompiledTerm::new(t, &vars).expect("variables collected"))
                }
            })
            .collect();
        Problem {
            left: CompiledTerm::new(t1, &vars).expect("variables collected"),
            right: CompiledTerm::new(t2, &vars).expect("variables collected"),
            vars,
            checks,
        }
    }

    fn admits(&self, times: &[f64], scratch: &mut Vec<f64>) -> bool {
        self.checks.iter().all(|c| match c {
            Check::Distinct(slots) => {
                let mut seen: Vec<f64> = slots.iter().map(|&s| times[s]).filter(|t| t.is_finite()).collect();
                seen.sort_by(f64::total_cmp);
                seen.windows(2).all(|w| w[0] != w[1])
            }
            Check::Never(s) => times[*s].is_infinite(),
            Check::NeverPair(a, b) => times[*a].max(times[*b]).is_infinite(),
            Check::TermNever(t) => t.eval(times, scratch).is_infinite(),
        })
    }

    /// `Some((left, right))` when the two terms disagree.
    fn disagreement(&self, times: &[f64], scratch: &mut Vec<f64>) -> Option<(f64, f64)> {
        let l = self.left.eval(times, scratch);
        let r = self.right.eval(times, scratch);
        (l != r).then_some((l, r))
    }

    fn not_equivalent(&self, times: &[f64], (l, r): (f64, f64)) -> Verdict {
        Verdict::NotEquivalent {
            witness: self
                .vars
                .iter()
                .cloned()
                .zip(times.iter().map(|&t| FailureTime::at(t)))
                .collect(),
            left: FailureTime::at(l),
            right: FailureTime::at(r),
        }
    }

    /// Forced values for cold spares and one side of each never-pair, chosen
    /// so that sampling does not waste most draws on rejected valuations.
    fn sample(&self, rng: &mut ChaCha8Rng, times: &mut [f64]) {
        for t in times.iter_mut() {
            *t = if rng.gen_ratio(1, 4) {
                f64::INFINITY
            } else {
                1.0 - rng.gen::<f64>()
            };
        }
        for c in &self.checks {
            match c {
                Check::Never(s) => times[*s] = f64::INFINITY,
                Check::NeverPair(a, b) => {
                    let s = if rng.gen_bool(0.5) { *a } else { *b };
                    times[s] = f64::INFINITY;
                }
                _ => {}
            }
        }
    }
}

/// Decides whether `t1` and `t2` agree on every valuation satisfying `conditions`.
pub fn decide_equivalence(
    t1: &EventTerm,
    t2: &EventTerm,
    conditions: &[SideCondition],
    mode: Mode,
) -> Result<Verdict, EquivError> {
    let problem = Problem::new(t1, t2, conditions);
    match mode {
        Mode::Exact { max_vars } => exact(&problem, max_vars),
        Mode::Sampled { trials, seed } => sampled(&problem, trials, seed),
    }
}

fn exact(p: &Problem, bound: usize) -> Result<Verdict, EquivError> {
    let n = p.vars.len();
    if n > bound {
        return Err(EquivError::TooManyVariables { found: n, bound });
    }
    let mut times = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut admitted = 0u64;
    let mut verdict = None;
    for_each_ranking(n, |ranks| {
        for (t, r) in times.iter_mut().zip(ranks) {
            *t = r.map_or(f64::INFINITY, |r| r as f64 + 1.0);
        }
        if !p.admits(&times, &mut scratch) {
            return ControlFlow::Continue(());
        }
        admitted += 1;
        match p.disagreement(&times, &mut scratch) {
            Some(d) => {
                verdict = Some(p.not_equivalent(&times, d));
                ControlFlow::Break(())
            }
            None => ControlFlow::Continue(()),
        }
    });
    match verdict {
        Some(v) => Ok(v),
        None if admitted == 0 => Err(EquivError::UnsatisfiableConditions),
        None => Ok(Verdict::Equivalent { patterns: admitted }),
    }
}

#[derive(Default)]
struct Tally {
    accepted: u64,
    first_witness: Option<(u64, Vec<f64>, (f64, f64))>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.accepted += other.accepted;
        self.first_witness = match (self.first_witness, other.first_witness) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn sampled(p: &Problem, trials: u64, seed: u64) -> Result<Verdict, EquivError> {
    if trials == 0 {
        return Err(EquivError::ZeroTrials);
    }
    const CHUNK: u64 = 4096;
    let chunks = trials.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut times = vec![0.0; p.vars.len()];
            let mut scratch = Vec::new();
            let mut tally = Tally::default();
            for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                p.sample(&mut trial_rng(seed, trial), &mut times);
                if !p.admits(&times, &mut scratch) {
                    continue;
                }
                tally.accepted += 1;
                if let Some(d) = p.disagreement(&times, &mut scratch) {
                    tally.first_witness = Some((trial, times.clone(), d));
                    break;
                }
            }
            tally
        })
        .reduce(Tally::default, Tally::merge);
    if let Some((_, times, d)) = tally.first_witness {
        return Ok(p.not_equivalent(&times, d));
    }
    if tally.accepted == 0 {
        return Err(EquivError::UnsatisfiableConditions);
    }
    Ok(Verdict::SampledEquivalent {
        trials,
        accepted: tally.accepted,
        seed,
    })
}

/// Outcome of exact-checking one rule.
#[derive(Debug, Clone, Serialize)]
pub struct RuleCheck {
    pub provenance: String,
    pub lhs: String,
    pub rhs: String,
    pub passed: bool,
    pub patterns: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Valuation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogReport {
    pub rules: usize,
    pub failures: usize,
    pub entries: Vec<RuleCheck>,
}

/// Exact-checks every rule; failures become report entries rather than errors.
pub fn verify_rules(rules: &[RewriteRule], max_vars: usize) -> CatalogReport {
    let entries: Vec<RuleCheck> = rules
        .iter()
        .map(|rule| {
            let outcome = decide_equivalence(&rule.lhs, &rule.rhs, &rule.conditions, Mode::Exact { max_vars });
            let (passed, patterns, witness, error) = match outcome {
                Ok(Verdict::Equivalent { patterns }) => (true, patterns, None, None),
                Ok(Verdict::NotEquivalent { witness, .. }) => (false, 0, Some(witness), None),
                Ok(Verdict::SampledEquivalent { .. }) => unreachable!("exact mode"),
                Err(e) => (false, 0, None, Some(e.to_string())),
            };
            RuleCheck {
                provenance: rule.provenance.clone(),
                lhs: rule.lhs.to_string(),
                rhs: rule.rhs.to_string(),
                passed,
                patterns,
                witness,
                error,
            }
        })
        .collect();
    CatalogReport {
        rules: entries.len(),
        failures: entries.iter().filter(|e| !e.passed).count(),
        entries,
    }
}

/// [`verify_rules`] over the full catalog with the default exact bound.
pub fn verify_catalog() -> CatalogReport {
    verify_rules(&super::rule_catalog(), DEFAULT_EXACT_BOUND)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> EventTerm {
        s.parse().unwrap()
    }

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    /// Ordered Bell numbers (Fubini) summed over never subsets.
    #[test]
    fn pattern_counts() {
        let expected = [1, 2, 6, 26, 150, 1082, 9366, 94586];
        for (n, want) in expected.iter().enumerate() {
            let mut count = 0u64;
            for_each_ranking(n, |_| {
                count += 1;
                ControlFlow::Continue(())
            });
            assert_eq!(count, *want, "n = {n}");
        }
    }

    #[test]
    fn patterns_are_well_formed() {
        let vars = names(&["a", "b", "c"]);
        let pats = comparison_patterns(&vars);
        assert_eq!(pats.len(), 26);
        assert_eq!(pats[0].blocks, vec![names(&["a"]), names(&["b"]), names(&["c"])]);
        for p in &pats {
            assert!(p.blocks.iter().all(|b| !b.is_empty()));
            let mut all: Vec<_> = p.blocks.iter().flatten().chain(&p.never_set).cloned().collect();
            all.sort();
            assert_eq!(all, vars);
        }
    }

    #[test]
    fn mutual_before_is_never() {
        let v = decide_equivalence(&t("(A < B) . (B < A)"), &EventTerm::Never, &[], Mode::exact()).unwrap();
        assert!(matches!(v, Verdict::Equivalent { .. }));
    }

    #[test]
    fn before_is_not_symmetric() {
        let v = decide_equivalence(&t("A < B"), &t("B < A"), &[], Mode::exact()).unwrap();
        let Verdict::NotEquivalent { witness, left, right } = v else {
            panic!("expected a witness, got {v:?}");
        };
        assert_eq!(witness["A"], FailureTime::at(1.0));
        assert_eq!(witness["B"], FailureTime::at(2.0));
        assert_eq!(left, FailureTime::at(1.0));
        assert_eq!(right, FailureTime::NEVER);
    }

    #[test]
    fn warm_spare_with_cold_dormant_is_cold_spare() {
        let conditions = [
            SideCondition::ColdSpare("Bd".into()),
            SideCondition::AllDistinct(names(&["A", "Ba"])),
        ];
        let v = decide_equivalence(&t("WSP A Ba Bd"), &t("CSP A Ba"), &conditions, Mode::exact()).unwrap();
        assert!(matches!(v, Verdict::Equivalent { .. }));
        let unconditional = decide_equivalence(&t("WSP A Ba Bd"), &t("CSP A Ba"), &[], Mode::exact()).unwrap();
        assert!(!unconditional.is_equivalent());
    }

    #[test]
    fn exact_bound_and_unsatisfiable_conditions() {
        let wide = t("a + b + c + d + e + f + g + h");
        assert_eq!(
            decide_equivalence(&wide, &wide, &[], Mode::exact()),
            Err(EquivError::TooManyVariables { found: 8, bound: 7 })
        );
        // The first condition forces a = NEVER, the second forbids it.
        let conds = [SideCondition::TermEqNever(t("a")), SideCondition::TermEqNever(t("ALWAYS < a"))];
        assert_eq!(
            decide_equivalence(&t("a"), &t("a"), &conds, Mode::exact()),
            Err(EquivError::UnsatisfiableConditions)
        );
        assert_eq!(
            decide_equivalence(&t("a"), &t("a"), &[], Mode::Sampled { trials: 0, seed: 1 }),
            Err(EquivError::ZeroTrials)
        );
    }

    #[test]
    fn sampled_mode_is_deterministic_and_finds_witnesses() {
        let mode = Mode::Sampled { trials: 20_000, seed: 7 };
        let a = decide_equivalence(&t("A < B"), &t("B < A"), &[], mode).unwrap();
        let b = decide_equivalence(&t("A < B"), &t("B < A"), &[], mode).unwrap();
        assert!(!a.is_equivalent());
        assert_eq!(a, b);
        let ok = decide_equivalence(&t("PAND A B"), &t("B . (A <= B)"), &[], mode).unwrap();
        assert!(matches!(ok, Verdict::SampledEquivalent { trials: 20_000, .. }));
    }

    #[test]
    fn catalog_verifies() {
        let report = verify_catalog();
        assert_eq!(report.rules, 84);
        let failed: Vec<_> = report.entries.iter().filter(|e| !e.passed).map(|e| &e.provenance).collect();
        assert!(failed.is_empty(), "failing rules: {failed:?}");
    }

    #[test]
    fn corrupted_rule_is_caught() {
        let mut rules = super::super::rule_catalog();
        rules.push(RewriteRule::new("A < B", "B < A", "corrupted"));
        let report = verify_rules(&rules, DEFAULT_EXACT_BOUND);
        assert_eq!(report.failures, 1);
        let bad = report.entries.iter().find(|e| !e.passed).unwrap();
        assert_eq!(bad.provenance, "corrupted");
        assert!(bad.witness.is_some());
    }

    #[test]
    fn empty_catalog_gives_empty_report() {
        let report = verify_rules(&[], DEFAULT_EXACT_BOUND);
        assert_eq!((report.rules, report.failures), (0, 0));
    }
}
