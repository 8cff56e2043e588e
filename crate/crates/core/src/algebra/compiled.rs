use std::collections::BTreeMap;

use super::{AlgebraError, EventTerm, FailureTime, Valuation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Var(usize),
    Always,
    Never,
    And(usize, usize),
    Or(usize, usize),
    Simult(usize, usize),
    Before(usize, usize),
    InclBefore(usize, usize),
}

/// Post-order flattening of a term over an explicit variable table; evaluates
/// on raw `f64` slices (`f64::INFINITY` is `NEVER`) without allocation per call
/// beyond the scratch buffer.
#[derive(Debug, Clone)]
pub struct CompiledTerm {
    ops: Vec<Op>,
    variables: Vec<String>,
}

impl CompiledTerm {
    /// `variables` fixes the slot order; every free variable of `term` must appear.
    pub fn new(term: &EventTerm, variables: &[String]) -> Result<Self, AlgebraError> {
        let index: BTreeMap<&str, usize> = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let mut ops = Vec::with_capacity(term.size());
        push(term, &index, &mut ops)?;
        Ok(CompiledTerm {
            ops,
            variables: variables.to_vec(),
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// `scratch` is resized as needed and can be reused across calls.
    pub fn eval(&self, times: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.reserve(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Var(i) => times[i],
                Op::Always => 0.0,
                Op::Never => f64::INFINITY,
                Op::And(l, r) => scratch[l].max(scratch[r]),
                Op::Or(l, r) => scratch[l].min(scratch[r]),
                Op::Simult(l, r) => {
                    if scratch[l] == scratch[r] {
                        scratch[l]
                    } else {
                        f64::INFINITY
                    }
                }
                Op::Before(l, r) => {
                    if scratch[l] < scratch[r] {
                        scratch[l]
                    } else {
                        f64::INFINITY
                    }
                }
                Op::InclBefore(l, r) => {
                    if scratch[l] <= scratch[r] {
                        scratch[l]
                    } else {
                        f64::INFINITY
                    }
                }
            };
            scratch.push(v);
        }
        *scratch.last().expect("non-empty program")
    }

    pub fn eval_valuation(&self, v: &Valuation) -> Result<FailureTime, AlgebraError> {
        let times = self
            .variables
            .iter()
            .map(|name| {
                v.get(name)
                    .map(|t| t.as_f64())
                    .ok_or_else(|| AlgebraError::MissingVariable(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FailureTime::at(self.eval(&times, &mut Vec::new())))
    }
}

fn push(term: &EventTerm, index: &BTreeMap<&str, usize>, ops: &mut Vec<Op>) -> Result<usize, AlgebraError> {
    let op = match term {
        EventTerm::Var(name) => Op::Var(
            *index
                .get(name.as_str())
                .ok_or_else(|| AlgebraError::MissingVariable(name.clone()))?,
        ),
        EventTerm::Always => Op::Always,
        EventTerm::Never => Op::Never,
        _ => {
            let (l, r) = term.children().expect("binary");
            let l = push(l, index, ops)?;
            let r = push(r, index, ops)?;
            match term {
                EventTerm::And(..) => Op::And(l, r),
                EventTerm::Or(..) => Op::Or(l, r),
                EventTerm::Simult(..) => Op::Simult(l, r),
                EventTerm::Before(..) => Op::Before(l, r),
                EventTerm::InclBefore(..) => Op::InclBefore(l, r),
                _ => unreachable!(),
            }
        }
    };
    ops.push(op);
    Ok(ops.len() - 1)
}
