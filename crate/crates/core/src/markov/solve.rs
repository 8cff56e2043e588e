//! Numerical solutions on an explored chain.

use std::fmt;

use serde::{Serialize, Serializer};

use super::{Ctmc, MarkovError};

/// Most uniformization intervals one transient solve may use.
const MAX_INTERVALS: usize = 64;
/// Target Poisson mean per interval; shorter intervals give more chances to
/// shed fast states.
const INTERVAL_STEPS: f64 = 64.0;

/// Probability that the absorbing failure state has been entered by time `t`,
/// within `tol` of the exact value.
///
/// The horizon is split into intervals, each solved by uniformization with the
/// largest exit rate still reachable from the states that hold probability
/// mass. Half of `tol` bounds the Poisson truncation over all intervals. The
/// other half is spent at interval boundaries by discarding the mass of states
/// whose reachable rates are highest. Discarded mass can only lower the result,
/// so the returned value lies in `[p - tol, p]`.
pub fn transient_failure_probability(c: &Ctmc, t: f64, tol: f64) -> Result<f64, MarkovError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(MarkovError::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(MarkovError::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let Some(failed) = c.failed else {
        return Ok(0.0);
    };
    if t == 0.0 {
        return Ok(if c.initial == failed { 1.0 } else { 0.0 });
    }
    let n = c.state_count();
    let reach = reachable_max_rate(c);
    let tail_tol = tol / (2.0 * MAX_INTERVALS as f64);
    let mut drop_budget = tol / 2.0;

    let mut pi = vec![0.0f64; n];
    pi[c.initial] = 1.0;
    let mut scratch = (vec![0.0f64; n], vec![0.0f64; n]);
    let mut now = 0.0;
    for interval in 0..MAX_INTERVALS {
        drop_budget -= shed_fast_states(&mut pi, &reach, drop_budget / 2.0);
        let lambda = pi
            .iter()
            .zip(&reach)
            .filter(|(&p, _)| p > 0.0)
            .map(|(_, &r)| r)
            .fold(0.0, f64::max);
        if lambda == 0.0 {
            break;
        }
        let left = t - now;
        let h = if interval + 1 == MAX_INTERVALS {
            left
        } else {
            left.min((INTERVAL_STEPS / lambda).max(left / (MAX_INTERVALS - interval) as f64))
        };
        uniformize(c, &mut pi, &mut scratch, lambda, lambda * h, tail_tol);
        now += h;
        if now >= t {
            break;
        }
    }
    Ok(pi[failed].clamp(0.0, 1.0))
}

/// Largest exit rate over each state and everything reachable from it. On the
/// acyclic chains built here one backward sweep suffices; otherwise every state
/// gets the global maximum.
fn reachable_max_rate(c: &Ctmc) -> Vec<f64> {
    match topological_order(c) {
        Some(order) => {
            let mut reach = c.exit.clone();
            for &i in order.iter().rev() {
                let downstream = c.successors(i).map(|(j, _)| reach[j]).fold(0.0, f64::max);
                reach[i] = reach[i].max(downstream);
            }
            reach
        }
        None => vec![c.exit.iter().copied().fold(0.0, f64::max); c.state_count()],
    }
}

/// Zeroes the mass of the states with the highest reachable rates as long as
/// the total zeroed stays within `budget`. Returns the mass removed.
fn shed_fast_states(pi: &mut [f64], reach: &[f64], budget: f64) -> f64 {
    let mut support: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] > 0.0 && reach[i] > 0.0).collect();
    support.sort_by(|&a, &b| reach[b].total_cmp(&reach[a]).then(a.cmp(&b)));
    let mut removed = 0.0;
    let mut i = 0;
    while i < support.len() {
        // States sharing a rate are removed together or not at all.
        let rate = reach[support[i]];
        let group_end = support[i..].iter().position(|&s| reach[s] != rate).map_or(support.len(), |p| i + p);
        let group: f64 = support[i..group_end].iter().map(|&s| pi[s]).sum();
        if removed + group > budget {
            break;
        }
        removed += group;
        for &s in &support[i..group_end] {
            pi[s] = 0.0;
        }
        i = group_end;
    }
    removed
}

/// Advances `pi` by one interval of uniformization with rate `lambda` and
/// Poisson mean `q`, truncating once the discarded tail is at most `tail_tol`.
fn uniformize(c: &Ctmc, pi: &mut [f64], scratch: &mut (Vec<f64>, Vec<f64>), lambda: f64, q: f64, tail_tol: f64) {
    let (v, next) = scratch;
    v.copy_from_slice(pi);
    pi.iter_mut().for_each(|x| *x = 0.0);
    let ln_q = q.ln();
    let mut log_w = -q;
    let mut weight_sum = 0.0;
    for k in 0usize.. {
        let w = log_w.exp();
        if w > 0.0 {
            for (acc, &x) in pi.iter_mut().zip(v.iter()) {
                *acc += w * x;
            }
        }
        weight_sum += w;
        if (k as f64) >= q && ((1.0 - weight_sum).max(0.0) <= tail_tol || poisson_tail_bound(q, k) <= tail_tol) {
            break;
        }
        for (j, x) in next.iter_mut().enumerate() {
            *x = v[j] * (1.0 - c.exit[j] / lambda);
        }
        for (i, &p) in v.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, r) in c.successors(i) {
                next[j] += p * r / lambda;
            }
        }
        std::mem::swap(v, next);
        log_w += ln_q - ((k + 1) as f64).ln();
    }
}

/// Upper bound on `P(N > k)` for `N ~ Poisson(q)` and `k >= q` (Bernstein).
fn poisson_tail_bound(q: f64, k: usize) -> f64 {
    let x = k as f64 + 1.0 - q;
    (-(x * x) / (2.0 * (q + x / 3.0))).exp()
}

/// Kahn order of the chain's states, or `None` if it has a cycle.
fn topological_order(c: &Ctmc) -> Option<Vec<usize>> {
    let n = c.state_count();
    let mut indegree = vec![0usize; n];
    for t in c.transitions() {
        indegree[t.to] += 1;
    }
    let mut order = Vec::with_capacity(n);
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    while let Some(i) = ready.pop() {
        order.push(i);
        for (j, _) in c.successors(i) {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(j);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Expected time to absorption in the failure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mttf {
    Finite(f64),
    /// Some execution never fails.
    Infinite,
}

impl fmt::Display for Mttf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mttf::Finite(x) => write!(f, "{x}"),
            Mttf::Infinite => f.write_str("infinite"),
        }
    }
}

impl Serialize for Mttf {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Mttf::Finite(x) => s.serialize_f64(*x),
            Mttf::Infinite => s.serialize_str("infinite"),
        }
    }
}

/// Solves `exit(i)·m(i) = 1 + Σ rate(i→j)·m(j)` over transient states.
///
/// Every transition fires one more variable, so the chain is acyclic and the
/// system is solved exactly by back-substitution in reverse topological order.
/// The result is infinite as soon as a non-failing absorbing state is reachable.
pub fn mean_time_to_failure(c: &Ctmc) -> Result<Mttf, MarkovError> {
    let Some(failed) = c.failed else {
        return Ok(Mttf::Infinite);
    };
    let n = c.state_count();
    if c.sink.is_some() || (0..n).any(|i| i != failed && c.exit[i] == 0.0) {
        return Ok(Mttf::Infinite);
    }
    let order = topological_order(c).ok_or(MarkovError::SingularSystem)?;
    let mut m = vec![0.0f64; n];
    for &i in order.iter().rev() {
        if i == failed {
            continue;
        }
        let inflow: f64 = c.successors(i).map(|(j, r)| r * m[j]).sum();
        m[i] = (1.0 + inflow) / c.exit[i];
    }
    Ok(Mttf::Finite(m[c.initial]))
}
