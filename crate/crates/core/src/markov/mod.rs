//! Continuous-time Markov chains generated from a structure function, with
//! transient failure probability by uniformization and mean time to failure.

mod build;
mod solve;

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::galileo::{to_structure_function, DftModel, StructureError, StructureFunction};

pub use solve::{mean_time_to_failure, transient_failure_probability, Mttf};

/// Default cap on explored states.
pub const DEFAULT_STATE_BUDGET: usize = 10_000_000;

/// Environment variable that overrides [`DEFAULT_STATE_BUDGET`].
pub const STATE_BUDGET_VAR: &str = "DFT_STATE_BUDGET";

/// The state budget from `DFT_STATE_BUDGET`, or the default when unset.
pub fn state_budget_from_env() -> Result<usize, MarkovError> {
    parse_state_budget(std::env::var(STATE_BUDGET_VAR).ok().as_deref())
}

/// Interprets a `DFT_STATE_BUDGET` value; `None` means unset.
pub fn parse_state_budget(value: Option<&str>) -> Result<usize, MarkovError> {
    match value {
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| MarkovError::InvalidArgument(format!("{STATE_BUDGET_VAR}={s} is not a count"))),
        None => Ok(DEFAULT_STATE_BUDGET),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("state budget of {budget} exceeded ({explored} states discovered)")]
    StateBudgetExceeded { budget: usize, explored: usize },
    #[error("variable `{0}` has no rate")]
    UnknownVariable(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Explicit chain with at most one absorbing failure state and at most one
/// absorbing safe state (the top event can no longer occur).
#[derive(Debug, Clone)]
pub struct Ctmc {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    exit: Vec<f64>,
    initial: usize,
    failed: Option<usize>,
    sink: Option<usize>,
    keys: Vec<Option<Box<[u8]>>>,
    layout: build::Layout,
}

/// Human-readable description of one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkovState {
    /// The top event has occurred.
    Failed,
    /// The top event can no longer occur.
    Safe,
    Operational {
        /// Variables that have fired.
        failed: Vec<String>,
        /// Variables that can no longer fire.
        dead: Vec<String>,
        /// Spare variables currently able to fire as active spares.
        active_spares: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

impl Ctmc {
    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        rates: Vec<f64>,
        initial: usize,
        failed: Option<usize>,
        sink: Option<usize>,
        keys: Vec<Option<Box<[u8]>>>,
        layout: build::Layout,
    ) -> Self {
        let exit = row_ptr.windows(2).map(|w| rates[w[0]..w[1]].iter().sum()).collect();
        Ctmc {
            row_ptr,
            cols,
            rates,
            exit,
            initial,
            failed,
            sink,
            keys,
            layout,
        }
    }

    pub fn state_count(&self) -> usize {
        self.keys.len()
    }

    pub fn transition_count(&self) -> usize {
        self.cols.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Index of the absorbing failure state, if it is reachable.
    pub fn failed_state(&self) -> Option<usize> {
        self.failed
    }

    /// Index of the absorbing safe state, if it is reachable.
    pub fn safe_state(&self) -> Option<usize> {
        self.sink
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        self.exit[state]
    }

    pub fn successors(&self, state: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[state], self.row_ptr[state + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.rates[a..b])
            .map(|(&j, &r)| (j as usize, r))
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.state_count()).flat_map(move |from| {
            self.successors(from).map(move |(to, rate)| Transition { from, to, rate })
        })
    }

    pub fn state(&self, i: usize) -> MarkovState {
        if Some(i) == self.failed {
            return MarkovState::Failed;
        }
        if Some(i) == self.sink {
            return MarkovState::Safe;
        }
        let key = self.keys[i].as_ref().expect("transient states have keys");
        let mut st = Vec::new();
        build::unpack(key, self.layout_len(), &mut st);
        let mut failed = Vec::new();
        let mut dead = Vec::new();
        for (name, node) in &self.layout.var_nodes {
            match st[*node] {
                build::FAILED => failed.push(name.clone()),
                build::DEAD => dead.push(name.clone()),
                _ => {}
            }
        }
        let active_spares = self.layout.active_spares(&st);
        MarkovState::Operational {
            failed,
            dead,
            active_spares,
        }
    }

    fn layout_len(&self) -> usize {
        self.layout.node_count()
    }

    /// Writes one `from to rate` line per transition.
    pub fn write_transitions(&self, mut w: impl Write) -> io::Result<()> {
        for t in self.transitions() {
            writeln!(w, "{} {} {}", t.from, t.to, t.rate)?;
        }
        Ok(())
    }

    /// Writes one `index label` line per state.
    pub fn write_labels(&self, mut w: impl Write) -> io::Result<()> {
        for i in 0..self.state_count() {
            let label = match self.state(i) {
                MarkovState::Failed => "FAILED".to_string(),
                MarkovState::Safe => "SAFE".to_string(),
                MarkovState::Operational { failed, dead, .. } => {
                    format!("failed={{{}}} dead={{{}}}", failed.join(","), dead.join(","))
                }
            };
            let init = if i == self.initial { " initial" } else { "" };
            writeln!(w, "{i} {label}{init}")?;
        }
        Ok(())
    }

    /// Status of every term node in state `i`, for debugging.
    pub fn node_statuses(&self, i: usize) -> Option<Vec<&'static str>> {
        let key = self.keys[i].as_ref()?;
        let mut st = Vec::new();
        build::unpack(key, self.layout_len(), &mut st);
        Some(st.into_iter().map(build::status_name).collect())
    }
}

/// Builds the chain of a structure function and its rate dynamics.
pub fn build_ctmc(sf: &StructureFunction, budget: usize) -> Result<Ctmc, MarkovError> {
    build::explore(sf, budget)
}

/// Builds the chain of a gate-level model.
pub fn build_model_ctmc(model: &DftModel, budget: usize) -> Result<Ctmc, MarkovError> {
    build_ctmc(&to_structure_function(model)?, budget)
}
