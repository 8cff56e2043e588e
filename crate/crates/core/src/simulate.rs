//! Monte Carlo estimate of the failure probability by discrete-event simulation.
//!
//! This is an oracle for the Markov chain numerics: it evaluates the structure
//! function on sampled failure times and shares no code with the state-space
//! exploration. Each trial draws from its own ChaCha stream, so estimates do
//! not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{AlgebraError, CompiledTerm};
use crate::galileo::{to_structure_function, DftModel, EventDynamics, StructureError, StructureFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Event-by-event trajectories with spare activation.
    Trajectory,
    /// Independent failure times, valid only without spares.
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub trials: u64,
    pub failures: u64,
    /// `sqrt(p_hat (1 - p_hat) / trials)`.
    pub stderr: f64,
    pub seed: u64,
    pub time: f64,
    pub method: Method,
}

impl McEstimate {
    fn new(failures: u64, trials: u64, seed: u64, time: f64, method: Method) -> Self {
        let p_hat = failures as f64 / trials as f64;
        McEstimate {
            p_hat,
            trials,
            failures,
            stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
            seed,
            time,
            method,
        }
    }

    /// Whether `p` lies within `k` standard errors of the estimate.
    ///
    /// The larger of the sample standard error and the binomial standard
    /// error at `p` is used. The sample error alone is zero when every trial
    /// fails (or none does), which would reject any `p` other than 0 or 1.
    pub fn brackets(&self, p: f64, k: f64) -> bool {
        let at_p = (p * (1.0 - p) / self.trials as f64).sqrt();
        (p - self.p_hat).abs() <= k * self.stderr.max(at_p)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("at least one trial is required")]
    ZeroTrials,
    #[error("time must be finite and >= 0, got {0}")]
    InvalidTime(f64),
    #[error("the static sampler does not handle spare `{0}`")]
    NotStatic(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

const CHUNK: u64 = 4096;

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn check(t: f64, trials: u64) -> Result<(), SimError> {
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SimError::InvalidTime(t));
    }
    Ok(())
}

fn count_failures(trials: u64, trial: impl Fn(u64) -> bool + Sync) -> u64 {
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(trials)).filter(|&i| trial(i)).count() as u64)
        .sum()
}

/// Per-variable sampling plan.
#[derive(Debug, Clone)]
enum Slot {
    Plain { rate: f64 },
    Active { spare: usize, rate: f64 },
    Dormant { rate: f64 },
}

struct Plan {
    top: CompiledTerm,
    slots: Vec<Slot>,
    /// `(active slot, dormant slot, activation term)` per spare.
    spares: Vec<(usize, usize, CompiledTerm)>,
}

impl Plan {
    fn new(sf: &StructureFunction) -> Result<Self, SimError> {
        let names = sf.variables();
        let mut slots = Vec::with_capacity(names.len());
        let mut spares = Vec::new();
        for d in &sf.dynamics {
            match d {
                EventDynamics::Plain { rate, .. } => slots.push(Slot::Plain { rate: *rate }),
                EventDynamics::Spare {
                    rate,
                    dormancy,
                    activation,
                    ..
                } => {
                    let active = slots.len();
                    slots.push(Slot::Active {
                        spare: spares.len(),
                        rate: *rate,
                    });
                    slots.push(Slot::Dormant { rate: rate * dormancy });
                    spares.push((active, active + 1, CompiledTerm::new(activation, &names)?));
                }
            }
        }
        Ok(Plan {
            top: CompiledTerm::new(&sf.term, &names)?,
            slots,
            spares,
        })
    }
}

/// Samples an exponential delay, or `INFINITY` for a zero rate.
fn delay(rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    if rate > 0.0 {
        Exp::new(rate).expect("positive rate").sample(rng)
    } else {
        f64::INFINITY
    }
}

struct Trajectory<'p> {
    plan: &'p Plan,
    /// Failure time of each variable that has fired; `INFINITY` otherwise.
    fired: Vec<f64>,
    /// Scheduled firing time of each variable; `INFINITY` if none.
    due: Vec<f64>,
    activated: Vec<bool>,
    scratch: Vec<f64>,
}

impl<'p> Trajectory<'p> {
    fn new(plan: &'p Plan) -> Self {
        let n = plan.slots.len();
        Trajectory {
            plan,
            fired: vec![f64::INFINITY; n],
            due: vec![f64::INFINITY; n],
            activated: vec![false; plan.spares.len()],
            scratch: Vec::new(),
        }
    }

    /// Whether the top event occurs by `horizon`. Firing times beyond the
    /// horizon are never realized; every operator decides whether its value is
    /// at most `horizon` from the events up to `horizon` alone.
    fn run(&mut self, rng: &mut ChaCha8Rng, horizon: f64) -> bool {
        self.fired.fill(f64::INFINITY);
        self.activated.fill(false);
        for (i, slot) in self.plan.slots.iter().enumerate() {
            self.due[i] = match *slot {
                Slot::Plain { rate } | Slot::Dormant { rate } => delay(rate, rng),
                Slot::Active { .. } => f64::INFINITY,
            };
        }
        self.activate(0.0, rng);
        loop {
            let (next, at) = self
                .due
                .iter()
                .enumerate()
                .fold((usize::MAX, f64::INFINITY), |best, (i, &d)| if d < best.1 { (i, d) } else { best });
            if next == usize::MAX || at > horizon {
                break;
            }
            self.due[next] = f64::INFINITY;
            self.fired[next] = at;
            if let Slot::Dormant { .. } = self.plan.slots[next] {
                // A spare that failed while dormant can no longer be used.
                self.due[next - 1] = f64::INFINITY;
                let spare = self.spare_of(next - 1);
                self.activated[spare] = true;
            }
            self.activate(at, rng);
        }
        self.plan.top.eval(&self.fired, &mut self.scratch) <= horizon
    }

    fn spare_of(&self, active_slot: usize) -> usize {
        match self.plan.slots[active_slot] {
            Slot::Active { spare, .. } => spare,
            _ => unreachable!("dormant slot follows its active slot"),
        }
    }

    /// Switches on every spare whose activation term has occurred by `now`.
    fn activate(&mut self, now: f64, rng: &mut ChaCha8Rng) {
        for s in 0..self.plan.spares.len() {
            if self.activated[s] {
                continue;
            }
            let (active, dormant, ref act) = self.plan.spares[s];
            if act.eval(&self.fired, &mut self.scratch).is_finite() {
                self.activated[s] = true;
                self.due[dormant] = f64::INFINITY;
                let Slot::Active { rate, .. } = self.plan.slots[active] else {
                    unreachable!("active slot")
                };
                self.due[active] = now + delay(rate, rng);
            }
        }
    }
}

/// Trajectory simulation of `trials` independent runs up to time `t`.
pub fn simulate(sf: &StructureFunction, t: f64, trials: u64, seed: u64) -> Result<McEstimate, SimError> {
    check(t, trials)?;
    let plan = Plan::new(sf)?;
    let failures = count_failures(trials, |i| {
        let mut rng = trial_rng(seed, i);
        Trajectory::new(&plan).run(&mut rng, t)
    });
    Ok(McEstimate::new(failures, trials, seed, t, Method::Trajectory))
}

/// Samples every failure time independently and evaluates the top term once.
/// Only valid for models without spares.
pub fn simulate_static(sf: &StructureFunction, t: f64, trials: u64, seed: u64) -> Result<McEstimate, SimError> {
    check(t, trials)?;
    if let Some(d) = sf.dynamics.iter().find(|d| matches!(d, EventDynamics::Spare { .. })) {
        return Err(SimError::NotStatic(d.event().to_string()));
    }
    let plan = Plan::new(sf)?;
    let failures = count_failures(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let times: Vec<f64> = plan
            .slots
            .iter()
            .map(|s| match *s {
                Slot::Plain { rate } => delay(rate, &mut rng),
                _ => unreachable!("no spares"),
            })
            .collect();
        plan.top.eval(&times, &mut Vec::new()) <= t
    });
    Ok(McEstimate::new(failures, trials, seed, t, Method::Static))
}

/// Simulates a gate-level model, using the static sampler when it has no spares.
pub fn simulate_model(model: &DftModel, t: f64, trials: u64, seed: u64) -> Result<McEstimate, SimError> {
    let sf = to_structure_function(model)?;
    if sf.dynamics.iter().all(|d| matches!(d, EventDynamics::Plain { .. })) {
        simulate_static(&sf, t, trials, seed)
    } else {
        simulate(&sf, t, trials, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{build_ctmc, transient_failure_probability, DEFAULT_STATE_BUDGET};

    fn sf(text: &str) -> StructureFunction {
        to_structure_function(&DftModel::parse(text).unwrap()).unwrap()
    }

    fn exact(s: &StructureFunction, t: f64) -> f64 {
        let c = build_ctmc(s, DEFAULT_STATE_BUDGET).unwrap();
        transient_failure_probability(&c, t, 1e-12).unwrap()
    }

    #[test]
    fn brackets_handles_saturated_estimates() {
        let all = McEstimate::new(1000, 1000, 0, 1.0, Method::Static);
        assert_eq!(all.stderr, 0.0);
        assert!(all.brackets(1.0 - 1e-9, 3.0));
        assert!(!all.brackets(0.9, 3.0));
        let half = McEstimate::new(500, 1000, 0, 1.0, Method::Static);
        assert!(half.brackets(0.52, 3.0));
        assert!(!half.brackets(0.6, 3.0));
    }

    #[test]
    fn zero_trials_is_an_error() {
        let s = sf("toplevel \"A\"; \"A\" lambda=0.1;");
        assert_eq!(simulate(&s, 1.0, 0, 1), Err(SimError::ZeroTrials));
        assert!(matches!(simulate(&s, -1.0, 10, 1), Err(SimError::InvalidTime(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = sf("toplevel \"T\"; \"T\" wsp \"A\" \"B\"; \"A\" lambda=0.1; \"B\" lambda=0.1 dorm=0.5;");
        let a = simulate(&s, 10.0, 20_000, 7).unwrap();
        assert_eq!(a, simulate(&s, 10.0, 20_000, 7).unwrap());
        assert_ne!(a.failures, simulate(&s, 10.0, 20_000, 8).unwrap().failures);
        assert_eq!(a.stderr, (a.p_hat * (1.0 - a.p_hat) / a.trials as f64).sqrt());
    }

    #[test]
    fn static_path_refuses_spares() {
        let s = sf("toplevel \"T\"; \"T\" csp \"A\" \"B\"; \"A\" lambda=0.1; \"B\" lambda=0.1;");
        assert_eq!(simulate_static(&s, 1.0, 10, 1), Err(SimError::NotStatic("B".into())));
    }

    #[test]
    fn static_and_trajectory_agree() {
        let s = sf("toplevel \"T\"; \"T\" or \"P\" \"V\"; \"P\" pand \"A\" \"B\"; \"V\" 2of3 \"A\" \"C\" \"D\";
            \"F\" fdep \"Tr\" \"C\"; \"A\" lambda=0.1; \"B\" lambda=0.2; \"C\" lambda=0.05; \"D\" lambda=0.1; \"Tr\" lambda=0.02;");
        let a = simulate(&s, 5.0, 200_000, 3).unwrap();
        let b = simulate_static(&s, 5.0, 200_000, 4).unwrap();
        let sigma = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.p_hat - b.p_hat).abs() <= 4.0 * sigma, "{a:?} {b:?}");
    }

    /// Small models exercising each dynamic feature against the Markov chain.
    #[test]
    fn agrees_with_markov_chain() {
        let models = [
            "toplevel \"T\"; \"T\" pand \"A\" \"B\"; \"A\" lambda=0.1; \"B\" lambda=0.1;",
            "toplevel \"T\"; \"T\" wsp \"A\" \"B\"; \"A\" lambda=0.2; \"B\" lambda=0.3 dorm=0.5;",
            "toplevel \"T\"; \"T\" wsp \"A\" \"B\" \"C\"; \"A\" lambda=0.2; \"B\" lambda=0.3 dorm=0.4; \"C\" lambda=0.1 dorm=0.2;",
            "toplevel \"T\"; \"T\" and \"G1\" \"G2\"; \"G1\" wsp \"M1\" \"S\"; \"G2\" wsp \"M2\" \"S\";
             \"M1\" lambda=0.2; \"M2\" lambda=0.1; \"S\" lambda=0.15 dorm=0.5;",
            "toplevel \"T\"; \"T\" or \"G\" \"H\"; \"G\" csp \"P\" \"S\"; \"H\" pand \"X\" \"P\";
             \"F\" fdep \"Tr\" \"P\" \"S\"; \"P\" lambda=0.2; \"S\" lambda=0.2; \"X\" lambda=0.1; \"Tr\" lambda=0.03;",
        ];
        for (i, text) in models.iter().enumerate() {
            let s = sf(text);
            let p = exact(&s, 8.0);
            let mc = simulate(&s, 8.0, 200_000, 11 + i as u64).unwrap();
            assert!(mc.brackets(p, 4.0), "model {i}: exact {p}, {mc:?}");
        }
    }
}
