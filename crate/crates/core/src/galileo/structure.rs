//! Translation of a gate-level model into a structure function.
//!
//! Every warm or cold spare event `X` becomes two variables: `X_a`, its failure
//! time once activated, and `X_d`, its failure time while still dormant. At most
//! one of them is finite. Functional dependencies are folded into the terms: each
//! occurrence of a dependent event is replaced by `Or(event, trigger)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::{DftModel, Gate, GateType, NodeKind, Violation};
use crate::algebra::{desugar_gate, free_variables, shared_spare, warm_spare, AlgebraError, EventTerm, GateKind, SideCondition};

/// Rate information for one basic event, in terms of structure-function variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EventDynamics {
    /// Always active; fails at `rate`.
    Plain { event: String, var: String, rate: f64 },
    /// Fails as `dormant` at `rate * dormancy` until `activation` has occurred,
    /// then as `active` at `rate`.
    Spare {
        event: String,
        active: String,
        dormant: String,
        rate: f64,
        dormancy: f64,
        activation: EventTerm,
    },
}

impl EventDynamics {
    pub fn event(&self) -> &str {
        match self {
            EventDynamics::Plain { event, .. } | EventDynamics::Spare { event, .. } => event,
        }
    }

    pub fn variables(&self) -> Vec<&str> {
        match self {
            EventDynamics::Plain { var, .. } => vec![var],
            EventDynamics::Spare { active, dormant, .. } => vec![active, dormant],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureFunction {
    pub term: EventTerm,
    pub conditions: Vec<SideCondition>,
    pub dynamics: Vec<EventDynamics>,
}

impl StructureFunction {
    /// Every variable the model can assign, in declaration order.
    pub fn variables(&self) -> Vec<String> {
        self.dynamics
            .iter()
            .flat_map(|d| d.variables().into_iter().map(str::to_string))
            .collect()
    }

    /// Same dynamics and conditions, different top term.
    pub fn with_term(&self, term: EventTerm) -> StructureFunction {
        StructureFunction {
            term,
            conditions: self.conditions.clone(),
            dynamics: self.dynamics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("spare `{spare}` is shared by gates {gates:?}; only two single-spare gates may share a spare")]
    UnsupportedSharing { spare: String, gates: Vec<String> },
    #[error("functional dependencies form a loop through `{0}`")]
    DependencyCycle(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub fn active_alias(event: &str) -> String {
    format!("{event}_a")
}

pub fn dormant_alias(event: &str) -> String {
    format!("{event}_d")
}

struct Builder<'m> {
    model: &'m DftModel,
    /// Spare events claimed by warm or cold spare gates, with the claiming gates.
    claims: BTreeMap<&'m str, Vec<&'m str>>,
    cold: BTreeSet<&'m str>,
    triggers: BTreeMap<&'m str, Vec<&'m str>>,
    memo: BTreeMap<String, EventTerm>,
    in_progress: BTreeSet<String>,
}

impl<'m> Builder<'m> {
    fn new(model: &'m DftModel) -> Result<Self, StructureError> {
        let mut claims: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut cold = BTreeSet::new();
        let mut triggers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (name, g) in model.gates() {
            match g.kind {
                GateType::Wsp | GateType::Csp => {
                    for s in &g.children[1..] {
                        claims.entry(s).or_default().push(name);
                        let e = model.basic_event(s).expect("validated");
                        if g.kind == GateType::Csp || e.is_cold() {
                            cold.insert(s.as_str());
                        }
                    }
                }
                GateType::Fdep => {
                    for d in &g.children[1..] {
                        triggers.entry(d).or_default().push(&g.children[0]);
                    }
                }
                _ => {}
            }
        }
        for (spare, gates) in &claims {
            let single = |g: &&str| match &model.get(g).expect("validated").kind {
                NodeKind::Gate(gate) => gate.children.len() == 2,
                NodeKind::Basic(_) => false,
            };
            if gates.len() > 2 || (gates.len() == 2 && !gates.iter().all(single)) {
                return Err(StructureError::UnsupportedSharing {
                    spare: spare.to_string(),
                    gates: gates.iter().map(|g| g.to_string()).collect(),
                });
            }
        }
        Ok(Builder {
            model,
            claims,
            cold,
            triggers,
            memo: BTreeMap::new(),
            in_progress: BTreeSet::new(),
        })
    }

    /// `var` joined with every trigger of `event`.
    fn dependent(&mut self, event: &str, var: String) -> Result<EventTerm, StructureError> {
        let mut parts = vec![EventTerm::Var(var)];
        for t in self.triggers.get(event).cloned().unwrap_or_default() {
            parts.push(self.node(t)?);
        }
        Ok(EventTerm::or_all(parts))
    }

    fn active(&mut self, event: &str) -> Result<EventTerm, StructureError> {
        self.dependent(event, active_alias(event))
    }

    fn dormant(&mut self, event: &str) -> Result<EventTerm, StructureError> {
        self.dependent(event, dormant_alias(event))
    }

    fn node(&mut self, name: &str) -> Result<EventTerm, StructureError> {
        if let Some(t) = self.memo.get(name) {
            return Ok(t.clone());
        }
        if !self.in_progress.insert(name.to_string()) {
            return Err(StructureError::DependencyCycle(name.to_string()));
        }
        let node = self.model.get(name).expect("validated");
        let term = match &node.kind {
            NodeKind::Basic(_) if self.claims.contains_key(name) => {
                EventTerm::or(self.active(name)?, self.dormant(name)?)
            }
            NodeKind::Basic(_) => self.dependent(name, name.to_string())?,
            NodeKind::Gate(g) => self.gate(name, g)?,
        };
        self.in_progress.remove(name);
        self.memo.insert(name.to_string(), term.clone());
        Ok(term)
    }

    fn children(&mut self, names: &[String]) -> Result<Vec<EventTerm>, StructureError> {
        names.iter().map(|c| self.node(c)).collect()
    }

    fn gate(&mut self, name: &str, g: &Gate) -> Result<EventTerm, StructureError> {
        Ok(match g.kind {
            GateType::And => desugar_gate(GateKind::And, self.children(&g.children)?)?,
            GateType::Or => desugar_gate(GateKind::Or, self.children(&g.children)?)?,
            GateType::Pand => desugar_gate(GateKind::Pand, self.children(&g.children)?)?,
            GateType::Vote { k, .. } => desugar_gate(GateKind::Vote(k), self.children(&g.children)?)?,
            // Used as an input, an fdep gate stands for its (triggered) dependents.
            GateType::Fdep => desugar_gate(GateKind::Or, self.children(&g.children[1..])?)?,
            GateType::Hsp => desugar_gate(GateKind::And, self.children(&g.children)?)?,
            GateType::Wsp | GateType::Csp => {
                let primary = self.node(&g.children[0])?;
                let spares = &g.children[1..];
                if let Some(other) = self.co_claimant(name, &spares[0]) {
                    let other_primary = self.primary_of(other)?;
                    let (ca, cd) = (self.active(&spares[0])?, self.dormant(&spares[0])?);
                    shared_spare(primary, other_primary, ca, cd)
                } else {
                    let (ca, cd) = self.chain(spares)?;
                    warm_spare(primary, ca, cd)
                }
            }
        })
    }

    fn co_claimant(&self, gate: &str, spare: &str) -> Option<&'m str> {
        self.claims.get(spare)?.iter().copied().find(|&g| g != gate)
    }

    fn primary_of(&mut self, gate: &str) -> Result<EventTerm, StructureError> {
        match &self.model.get(gate).expect("validated").kind {
            NodeKind::Gate(g) => self.node(&g.children[0]),
            NodeKind::Basic(_) => unreachable!("claimants are gates"),
        }
    }

    /// Active and dormant terms for a spare list used in order: the first spare
    /// takes over the primary, the rest back up the first.
    fn chain(&mut self, spares: &[String]) -> Result<(EventTerm, EventTerm), StructureError> {
        let (a, d) = (self.active(&spares[0])?, self.dormant(&spares[0])?);
        if spares.len() == 1 {
            return Ok((a, d));
        }
        let (ra, rd) = self.chain(&spares[1..])?;
        Ok((warm_spare(a, ra.clone(), rd.clone()), warm_spare(d, ra, rd)))
    }

    /// Activation term for every split spare event.
    fn activations(&mut self) -> Result<BTreeMap<String, EventTerm>, StructureError> {
        let mut out = BTreeMap::new();
        for (spare, gates) in self.claims.clone() {
            if gates.len() == 2 {
                let act = EventTerm::or(self.primary_of(gates[0])?, self.primary_of(gates[1])?);
                out.insert(spare.to_string(), act);
                continue;
            }
            let NodeKind::Gate(g) = &self.model.get(gates[0]).expect("validated").kind else {
                unreachable!("claimants are gates")
            };
            let mut act = self.node(&g.children[0])?;
            for s in g.children[1..].iter().take_while(|s| s.as_str() != spare) {
                act = EventTerm::and(act, EventTerm::or(self.active(s)?, self.dormant(s)?));
            }
            out.insert(spare.to_string(), act);
        }
        Ok(out)
    }
}

/// Structure function, side conditions and rate dynamics of a model.
pub fn to_structure_function(model: &DftModel) -> Result<StructureFunction, StructureError> {
    model.validate().map_err(StructureError::Invalid)?;
    let mut b = Builder::new(model)?;
    let term = b.node(&model.toplevel)?;
    let activations = b.activations()?;

    let mut dynamics = Vec::new();
    let mut spare_conditions = Vec::new();
    for (name, e) in model.basic_events() {
        let Some(activation) = activations.get(name) else {
            dynamics.push(EventDynamics::Plain {
                event: name.to_string(),
                var: name.to_string(),
                rate: e.rate,
            });
            continue;
        };
        let (active, dormant) = (active_alias(name), dormant_alias(name));
        let cold = b.cold.contains(name);
        spare_conditions.push(SideCondition::NeverEvents(active.clone(), dormant.clone()));
        if cold {
            spare_conditions.push(SideCondition::ColdSpare(dormant.clone()));
        }
        spare_conditions.push(SideCondition::TermEqNever(EventTerm::before(
            EventTerm::var(active.clone()),
            activation.clone(),
        )));
        dynamics.push(EventDynamics::Spare {
            event: name.to_string(),
            active,
            dormant,
            rate: e.rate,
            dormancy: if cold { 0.0 } else { e.dormancy },
            activation: activation.clone(),
        });
    }

    let mut conditions = Vec::new();
    let sf = StructureFunction {
        term,
        conditions: Vec::new(),
        dynamics,
    };
    conditions.push(SideCondition::AllDistinct(sf.variables()));
    conditions.extend(spare_conditions);
    debug_assert!(free_variables(&sf.term).iter().all(|v| sf.variables().contains(v)));
    Ok(StructureFunction { conditions, ..sf })
}
