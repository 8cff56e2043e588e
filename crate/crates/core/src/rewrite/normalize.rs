//! Canonical sum-of-products form.
//!
//! A term is rebuilt bottom-up as a set of products, each product a set of
//! literals `x`, `x ◁ y`, `x ⊴ y`, `x Δ y` over variables. The temporal
//! operators are pushed down to variable pairs with the distribution rules
//! of the catalogue, after which products are simplified with the contradiction,
//! transitivity and absorption rows. Side conditions prune products that can
//! only be finite on valuations the conditions exclude.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::equiv::{decide_equivalence, EquivError, Mode, Verdict};
use crate::algebra::{free_variables, EventTerm, SideCondition, Valuation};

/// Pass budget used when callers do not choose one.
pub const DEFAULT_BUDGET: usize = 64;
/// Largest intermediate sum the normalizer will build.
pub const MAX_PRODUCTS: usize = 50_000;
const SELF_CHECK_TRIALS: u64 = 4096;
const SELF_CHECK_SEED: u64 = 0x5eed_cafe;
/// Seed for sampled reduction certificates.
pub const CERTIFICATE_SEED: u64 = 20_190_601;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormalizeError {
    #[error("no fixpoint within the pass budget")]
    BudgetExhausted { partial: EventTerm },
    #[error("normal form disagrees with the input at {witness:?}")]
    SelfCheckFailed { witness: Valuation },
    #[error(transparent)]
    Equivalence(#[from] EquivError),
}

type Var = u32;

/// Literal over interned variables. `Sim(a, b)` always has `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Lit {
    Ev(Var),
    Before(Var, Var),
    Incl(Var, Var),
    Sim(Var, Var),
}

impl Lit {
    /// The variable whose failure time the literal takes when it holds.
    fn head(self) -> Var {
        match self {
            Lit::Ev(a) | Lit::Before(a, _) | Lit::Incl(a, _) | Lit::Sim(a, _) => a,
        }
    }
}

/// Sorted, duplicate-free. Empty means `ALWAYS`.
type Product = Vec<Lit>;
/// Sorted, duplicate-free. Empty means `NEVER`.
type Sop = Vec<Product>;

fn never() -> Sop {
    Vec::new()
}

fn always() -> Sop {
    vec![Vec::new()]
}

fn edges(p: &[Lit], skip: Option<usize>) -> impl Iterator<Item = (Var, Var, bool)> + '_ {
    p.iter()
        .enumerate()
        .filter(move |(i, _)| Some(*i) != skip)
        .flat_map(|(_, l)| {
            let (first, second) = match *l {
                Lit::Ev(_) => (None, None),
                Lit::Before(a, b) => (Some((a, b, true)), None),
                Lit::Incl(a, b) => (Some((a, b, false)), None),
                Lit::Sim(a, b) => (Some((a, b, false)), Some((b, a, false))),
            };
            first.into_iter().chain(second)
        })
}

/// Variables a product forces to be finite.
fn finite_in(p: &[Lit], skip: Option<usize>, x: Var) -> bool {
    p.iter().enumerate().any(|(i, l)| {
        Some(i) != skip
            && match *l {
                Lit::Sim(a, b) => a == x || b == x,
                other => other.head() == x,
            }
    })
}

/// Whether the literals force `from ≤ to` (or `<` when `strict`).
fn reaches(p: &[Lit], skip: Option<usize>, from: Var, to: Var, strict: bool) -> bool {
    let mut seen: Vec<(Var, bool)> = vec![(from, false)];
    let mut stack = vec![(from, false)];
    while let Some((v, s)) = stack.pop() {
        for (a, b, e) in edges(p, skip) {
            if a != v {
                continue;
            }
            let next = (b, s || e);
            if b == to && (next.1 || !strict) {
                return true;
            }
            if !seen.contains(&next) {
                seen.push(next);
                stack.push(next);
            }
        }
    }
    false
}

fn implies(p: &[Lit], skip: Option<usize>, lit: Lit) -> bool {
    match lit {
        Lit::Ev(x) => finite_in(p, skip, x),
        Lit::Before(a, c) => reaches(p, skip, a, c, true),
        Lit::Incl(a, c) => reaches(p, skip, a, c, false),
        Lit::Sim(a, c) => reaches(p, skip, a, c, false) && reaches(p, skip, c, a, false),
    }
}

/// `q` forces every literal of `p`, hence `p ≤ q` wherever `q` is finite.
fn subsumes(p: &[Lit], q: &[Lit]) -> bool {
    p.iter().all(|&l| q.binary_search(&l).is_ok() || implies(q, None, l))
}

struct Ctx {
    names: Vec<String>,
    index: BTreeMap<String, Var>,
    distinct: Vec<BTreeSet<Var>>,
    never_pairs: Vec<(Var, Var)>,
    forbidden: Vec<Product>,
    /// `(x, y)`: whenever `x` is finite, `y ⊴ x` (from `x ◁ y = NEVER`).
    saturate: Vec<(Var, Sop)>,
    cold: BTreeSet<String>,
    created: usize,
}

impl Ctx {
    fn var(&self, name: &str) -> Var {
        self.index[name]
    }

    fn distinct(&self, a: Var, b: Var) -> bool {
        self.distinct.iter().any(|g| g.contains(&a) && g.contains(&b))
    }

    fn lit(&self, l: Lit) -> Sop {
        match l {
            Lit::Ev(_) => vec![vec![l]],
            Lit::Before(a, b) => {
                if a == b {
                    never()
                } else {
                    vec![vec![l]]
                }
            }
            Lit::Incl(a, b) => {
                if a == b {
                    vec![vec![Lit::Ev(a)]]
                } else if self.distinct(a, b) {
                    vec![vec![Lit::Before(a, b)]]
                } else {
                    vec![vec![l]]
                }
            }
            Lit::Sim(a, b) => {
                if a == b {
                    vec![vec![Lit::Ev(a)]]
                } else if self.distinct(a, b) {
                    never()
                } else {
                    vec![vec![Lit::Sim(a.min(b), a.max(b))]]
                }
            }
        }
    }

    fn before_vv(&self, a: Var, b: Var) -> Sop {
        self.lit(Lit::Before(a, b))
    }

    fn incl_vv(&self, a: Var, b: Var) -> Sop {
        self.lit(Lit::Incl(a, b))
    }

    fn sim_vv(&self, a: Var, b: Var) -> Sop {
        self.lit(Lit::Sim(a, b))
    }

    fn ev(&self, a: Var) -> Sop {
        self.lit(Lit::Ev(a))
    }

    fn guard(&mut self, n: usize) -> Result<(), ()> {
        self.created += n;
        if n > MAX_PRODUCTS {
            Err(())
        } else {
            Ok(())
        }
    }

    fn or(&mut self, l: Sop, r: Sop) -> Result<Sop, ()> {
        let mut all = l;
        all.extend(r);
        self.guard(all.len())?;
        Ok(self.simplify_sum(all))
    }

    fn or_all(&mut self, parts: Vec<Sop>) -> Result<Sop, ()> {
        let all: Sop = parts.into_iter().flatten().collect();
        self.guard(all.len())?;
        Ok(self.simplify_sum(all))
    }

    /// Distributivity: every product of `l` joined with every product of `r`.
    fn and(&mut self, l: Sop, r: Sop) -> Result<Sop, ()> {
        self.guard(l.len() * r.len())?;
        let mut out = Vec::with_capacity(l.len() * r.len());
        for p in &l {
            for q in &r {
                let mut joined = p.clone();
                joined.extend_from_slice(q);
                if let Some(s) = self.simplify_product(joined) {
                    out.push(s);
                }
            }
        }
        Ok(self.simplify_sum(out))
    }

    fn and_all(&mut self, parts: Vec<Sop>) -> Result<Sop, ()> {
        let mut acc = always();
        for p in parts {
            acc = self.and(acc, p)?;
            if acc.is_empty() {
                break;
            }
        }
        Ok(acc)
    }

    fn singleton(p: &Product) -> Sop {
        vec![p.clone()]
    }

    // ----- Before -----

    /// `(P1 + P2) ◁ R = P1 ◁ R + P2 ◁ R`, `P ◁ (R1 + R2) = (P ◁ R1).(P ◁ R2)`,
    /// `A ◁ NEVER = A`.
    fn before(&mut self, l: Sop, r: Sop) -> Result<Sop, ()> {
        if r.is_empty() {
            return Ok(l);
        }
        let mut parts = Vec::with_capacity(l.len());
        for p in &l {
            let mut acc = always();
            for q in &r {
                let piece = self.before_pp(p, q)?;
                acc = self.and(acc, piece)?;
                if acc.is_empty() {
                    break;
                }
            }
            parts.push(acc);
        }
        self.or_all(parts)
    }

    /// `(A.B) ◁ C = (A ◁ C).(B ◁ C)`; `ALWAYS ◁ Q` holds unless `Q` is `ALWAYS`.
    fn before_pp(&mut self, p: &Product, q: &Product) -> Result<Sop, ()> {
        if p.is_empty() {
            return Ok(if q.is_empty() { never() } else { always() });
        }
        let mut parts = Vec::with_capacity(p.len());
        for &l in p {
            // (A ◁ B) ◁ C = (A ◁ B).(A ◁ C), likewise for ⊴ and Δ heads.
            let head = self.var_before_p(l.head(), q)?;
            parts.push(if matches!(l, Lit::Ev(_)) {
                head
            } else {
                self.and(vec![vec![l]], head)?
            });
        }
        self.and_all(parts)
    }

    /// `A ◁ (B.C) = (A ◁ B) + (A ◁ C)`; `A ◁ ALWAYS = NEVER`.
    fn var_before_p(&mut self, a: Var, q: &Product) -> Result<Sop, ()> {
        let parts: Vec<Sop> = q.iter().map(|&m| self.var_before_lit(a, m)).collect::<Result<_, _>>()?;
        self.or_all(parts)
    }

    fn var_before_lit(&mut self, a: Var, m: Lit) -> Result<Sop, ()> {
        Ok(match m {
            Lit::Ev(b) => self.before_vv(a, b),
            // A ◁ (B ◁ C) = (A ◁ B) + A.B.(C ⊴ B)
            Lit::Before(b, c) => {
                let tail = self.and_all(vec![self.ev(a), self.ev(b), self.incl_vv(c, b)])?;
                self.or(self.before_vv(a, b), tail)?
            }
            // A ◁ (B ⊴ C) = (A ◁ B) + A.B.(C ◁ B)
            Lit::Incl(b, c) => {
                let tail = self.and_all(vec![self.ev(a), self.ev(b), self.before_vv(c, b)])?;
                self.or(self.before_vv(a, b), tail)?
            }
            // A ◁ (B Δ C) = A.(B ◁ C) + A.(C ◁ B) + (A ◁ B) + (A ◁ C)
            Lit::Sim(b, c) => {
                let x = self.and(self.ev(a), self.before_vv(b, c))?;
                let y = self.and(self.ev(a), self.before_vv(c, b))?;
                self.or_all(vec![x, y, self.before_vv(a, b), self.before_vv(a, c)])?
            }
        })
    }

    // ----- Inclusive before -----

    fn incl(&mut self, l: Sop, r: Sop) -> Result<Sop, ()> {
        if r.is_empty() {
            return Ok(l);
        }
        let mut parts = Vec::with_capacity(l.len());
        for p in &l {
            let mut acc = always();
            for q in &r {
                let piece = self.incl_pp(p, q)?;
                acc = self.and(acc, piece)?;
                if acc.is_empty() {
                    break;
                }
            }
            parts.push(acc);
        }
        self.or_all(parts)
    }

    /// `(A.B) ⊴ C = (A ⊴ C).(B ⊴ C)`; `ALWAYS ⊴ Q` always holds.
    fn incl_pp(&mut self, p: &Product, q: &Product) -> Result<Sop, ()> {
        if p.is_empty() {
            return Ok(always());
        }
        let mut parts = Vec::with_capacity(p.len());
        for &l in p {
            let head = self.var_incl_p(l.head(), q)?;
            parts.push(if matches!(l, Lit::Ev(_)) {
                head
            } else {
                self.and(vec![vec![l]], head)?
            });
        }
        self.and_all(parts)
    }

    /// `A ⊴ (B.C) = (A ⊴ B) + (A ⊴ C)`; `A ⊴ ALWAYS = NEVER`.
    fn var_incl_p(&mut self, a: Var, q: &Product) -> Result<Sop, ()> {
        let parts: Vec<Sop> = q.iter().map(|&m| self.var_incl_lit(a, m)).collect::<Result<_, _>>()?;
        self.or_all(parts)
    }

    fn var_incl_lit(&mut self, a: Var, m: Lit) -> Result<Sop, ()> {
        Ok(match m {
            Lit::Ev(b) => self.incl_vv(a, b),
            // A ⊴ (B ◁ C) = (A ◁ B) + A.B.(C ⊴ B) + (A Δ B).(B ◁ C)
            Lit::Before(b, c) => {
                let mid = self.and_all(vec![self.ev(a), self.ev(b), self.incl_vv(c, b)])?;
                let last = self.and(self.sim_vv(a, b), self.before_vv(b, c))?;
                self.or_all(vec![self.before_vv(a, b), mid, last])?
            }
            // A ⊴ (B ⊴ C) = (A ◁ B) + A.B.(C ◁ B) + (A Δ B).(B ⊴ C)
            Lit::Incl(b, c) => {
                let mid = self.and_all(vec![self.ev(a), self.ev(b), self.before_vv(c, b)])?;
                let last = self.and(self.sim_vv(a, b), self.incl_vv(b, c))?;
                self.or_all(vec![self.before_vv(a, b), mid, last])?
            }
            // A ⊴ (B Δ C) = A.(B ◁ C) + A.(C ◁ B) + (A ◁ B) + (A ◁ C) + (A Δ B).(B Δ C)
            Lit::Sim(b, c) => {
                let x = self.and(self.ev(a), self.before_vv(b, c))?;
                let y = self.and(self.ev(a), self.before_vv(c, b))?;
                let z = self.and(self.sim_vv(a, b), self.sim_vv(b, c))?;
                self.or_all(vec![x, y, self.before_vv(a, b), self.before_vv(a, c), z])?
            }
        })
    }

    // ----- Simultaneous -----

    /// `A Δ (B1 + … + Bn) = Σi (A Δ Bi).Πj≠i (Bi ⊴ Bj)`, the n-ary form of the
    /// catalogue row `A Δ (B + C) = (A Δ B).(B ⊴ C) + (A Δ C).(C ⊴ B)`.
    fn sim(&mut self, l: Sop, r: Sop) -> Result<Sop, ()> {
        if l.is_empty() || r.is_empty() {
            return Ok(never());
        }
        let mut parts = Vec::new();
        for (i, p) in l.iter().enumerate() {
            let p_first = self.minimal_among(&l, i)?;
            if p_first.is_empty() {
                continue;
            }
            for (j, q) in r.iter().enumerate() {
                let q_first = self.minimal_among(&r, j)?;
                if q_first.is_empty() {
                    continue;
                }
                let core = self.sim_pp(p, q)?;
                let term = self.and_all(vec![core, p_first.clone(), q_first])?;
                parts.push(term);
            }
        }
        self.or_all(parts)
    }

    /// `Πj≠i (Pi ⊴ Pj)`: product `i` is no later than any other summand.
    fn minimal_among(&mut self, sop: &Sop, i: usize) -> Result<Sop, ()> {
        let mut acc = always();
        for (j, other) in sop.iter().enumerate() {
            if j != i {
                let piece = self.incl(Self::singleton(&sop[i]), Self::singleton(other))?;
                acc = self.and(acc, piece)?;
            }
        }
        Ok(acc)
    }

    /// `P Δ (q1.….qn) = Σi (P Δ qi).Πj≠i (qj ⊴ qi)` (the `A Δ (B.C)` row),
    /// applied on both sides down to literal pairs.
    fn sim_pp(&mut self, p: &Product, q: &Product) -> Result<Sop, ()> {
        match (p.is_empty(), q.is_empty()) {
            (true, true) => return Ok(always()),
            (true, false) | (false, true) => return Ok(never()),
            _ => {}
        }
        let mut parts = Vec::new();
        for (i, &pl) in p.iter().enumerate() {
            let p_last = self.maximal_among(p, i)?;
            for (j, &ql) in q.iter().enumerate() {
                let q_last = self.maximal_among(q, j)?;
                // (A ◁ B) Δ C = (A ◁ B).(A Δ C) and its mirror images.
                let core = self.and_all(vec![vec![vec![pl]], vec![vec![ql]], self.sim_vv(pl.head(), ql.head())])?;
                parts.push(self.and_all(vec![core, p_last.clone(), q_last])?);
            }
        }
        self.or_all(parts)
    }

    /// `Πj≠i (lj ⊴ li)`: literal `i` carries the product's value.
    fn maximal_among(&mut self, p: &Product, i: usize) -> Result<Sop, ()> {
        let mut acc = always();
        for (j, &other) in p.iter().enumerate() {
            if j != i {
                let piece = self.incl(vec![vec![other]], vec![vec![p[i]]])?;
                acc = self.and(acc, piece)?;
            }
        }
        Ok(acc)
    }

    // ----- simplification -----

    fn simplify_product(&self, mut p: Product) -> Option<Product> {
        p.sort_unstable();
        p.dedup();
        loop {
            let mut changed = false;
            for i in 0..p.len() {
                match p[i] {
                    Lit::Before(a, b) if a == b => return None,
                    Lit::Sim(a, b) if a == b => {
                        p[i] = Lit::Ev(a);
                        changed = true;
                    }
                    Lit::Incl(a, b) if a == b => {
                        p[i] = Lit::Ev(a);
                        changed = true;
                    }
                    Lit::Sim(a, b) if self.distinct(a, b) => return None,
                    Lit::Incl(a, b) if self.distinct(a, b) => {
                        p[i] = Lit::Before(a, b);
                        changed = true;
                    }
                    _ => {}
                }
            }
            // (A ◁ B).(B ◁ A) = NEVER, (A ◁ B).(B ⊴ A) = NEVER and
            // (A ◁ B).(A Δ B) = NEVER, generalised to any order cycle with a strict step.
            for (a, b, strict) in edges(&p, None).collect::<Vec<_>>() {
                if strict && reaches(&p, None, b, a, false) {
                    return None;
                }
            }
            // (A ⊴ B).(B ⊴ A) = A Δ B.
            for i in 0..p.len() {
                if let Lit::Incl(a, b) = p[i] {
                    if reaches(&p, Some(i), b, a, false) {
                        p[i] = Lit::Sim(a.min(b), a.max(b));
                        changed = true;
                    }
                }
            }
            if changed {
                p.sort_unstable();
                p.dedup();
                continue;
            }
            // Absorption and transitivity rows (A.(A ◁ B) = A ◁ B,
            // (A ⊴ B).(A ◁ B) = A ◁ B, (A ◁ B).(B ◁ C).(A ◁ C) = (A ◁ B).(B ◁ C), …):
            // drop any literal the others already force.
            if let Some(i) = (0..p.len()).rev().find(|&i| implies(&p, Some(i), p[i])) {
                p.remove(i);
                continue;
            }
            break;
        }
        for &(a, b) in &self.never_pairs {
            if finite_in(&p, None, a) && finite_in(&p, None, b) {
                return None;
            }
        }
        if self.forbidden.iter().any(|f| subsumes(f, &p)) {
            return None;
        }
        Some(p)
    }

    fn simplify_sum(&self, mut sop: Sop) -> Sop {
        loop {
            sop.sort_unstable();
            sop.dedup();
            if sop.iter().any(|p| p.is_empty()) {
                return always();
            }
            // (A ◁ B) + B = A + B and B + (A ⊴ B) = A + B, inside any product.
            let atoms: BTreeSet<Var> = sop
                .iter()
                .filter_map(|p| match p.as_slice() {
                    [Lit::Ev(t)] => Some(*t),
                    _ => None,
                })
                .collect();
            let mut changed = false;
            if !atoms.is_empty() {
                let mut next = Vec::with_capacity(sop.len());
                for p in sop.drain(..) {
                    let hit = p.iter().any(|l| matches!(l, Lit::Before(_, t) | Lit::Incl(_, t) if atoms.contains(t)));
                    if !hit {
                        next.push(p);
                        continue;
                    }
                    changed = true;
                    let rewritten: Product = p
                        .into_iter()
                        .map(|l| match l {
                            Lit::Before(x, t) | Lit::Incl(x, t) if atoms.contains(&t) => Lit::Ev(x),
                            other => other,
                        })
                        .collect();
                    if let Some(q) = self.simplify_product(rewritten) {
                        next.push(q);
                    }
                }
                sop = next;
            }
            if changed {
                continue;
            }
            // A + A.B = A, A + (A ◁ B) = A, (A ⊴ B) + (A ◁ B) = A ⊴ B, …
            sop.sort_by(|p, q| p.len().cmp(&q.len()).then_with(|| p.cmp(q)));
            let mut kept: Sop = Vec::with_capacity(sop.len());
            for q in sop.drain(..) {
                if !kept.iter().any(|p| subsumes(p, &q)) {
                    kept.push(q);
                }
            }
            kept.sort_unstable();
            return kept;
        }
    }

    /// Multiplies every product in which `x` is finite by `y ⊴ x`, which holds
    /// there because the conditions rule out `x ◁ y`.
    fn saturate(&mut self, mut sop: Sop) -> Result<Sop, ()> {
        for _ in 0..8 {
            let mut changed = false;
            let mut out = Vec::with_capacity(sop.len());
            for p in sop {
                let mut current: Sop = vec![p];
                for (x, y) in self.saturate.clone() {
                    let mut next = Vec::new();
                    for q in current {
                        if !finite_in(&q, None, x) {
                            next.push(q);
                            continue;
                        }
                        let bound = self.incl(y.clone(), vec![vec![Lit::Ev(x)]])?;
                        if bound.iter().any(|b| subsumes(b, &q)) {
                            next.push(q);
                            continue;
                        }
                        changed = true;
                        next.extend(self.and(vec![q], bound)?);
                    }
                    current = next;
                }
                out.extend(current);
            }
            self.guard(out.len())?;
            sop = self.simplify_sum(out);
            if !changed {
                break;
            }
        }
        Ok(sop)
    }

    // ----- term conversion -----

    fn build(&mut self, t: &EventTerm) -> Result<Sop, ()> {
        Ok(match t {
            EventTerm::Var(name) if self.cold.contains(name) => never(),
            EventTerm::Var(name) => self.ev(self.var(name)),
            EventTerm::Always => always(),
            EventTerm::Never => never(),
            EventTerm::Or(l, r) => {
                let (l, r) = (self.build(l)?, self.build(r)?);
                self.or(l, r)?
            }
            EventTerm::And(l, r) => {
                let (l, r) = (self.build(l)?, self.build(r)?);
                self.and(l, r)?
            }
            // X ⊴ W = X when W can never fail before X.
            EventTerm::InclBefore(l, r) if precedes(l, r) => self.build(l)?,
            EventTerm::Before(l, r) if precedes(r, l) => never(),
            EventTerm::Before(l, r) => {
                let (l, r) = (self.build(l)?, self.build(r)?);
                self.before(l, r)?
            }
            EventTerm::InclBefore(l, r) => {
                let (l, r) = (self.build(l)?, self.build(r)?);
                self.incl(l, r)?
            }
            EventTerm::Simult(l, r) => {
                let (l, r) = (self.build(l)?, self.build(r)?);
                self.sim(l, r)?
            }
        })
    }

    fn lit_term(&self, l: Lit) -> EventTerm {
        let v = |x: Var| EventTerm::var(self.names[x as usize].clone());
        match l {
            Lit::Ev(a) => v(a),
            Lit::Before(a, b) => EventTerm::before(v(a), v(b)),
            Lit::Incl(a, b) => EventTerm::incl_before(v(a), v(b)),
            Lit::Sim(a, b) => EventTerm::simult(v(a), v(b)),
        }
    }

    fn to_term(&self, sop: &Sop) -> EventTerm {
        let mut products: Vec<(String, EventTerm)> = sop
            .iter()
            .map(|p| {
                let mut lits: Vec<(String, EventTerm)> = p
                    .iter()
                    .map(|&l| {
                        let t = self.lit_term(l);
                        (t.to_string(), t)
                    })
                    .collect();
                lits.sort_by(|a, b| a.0.cmp(&b.0));
                let t = EventTerm::and_all(lits.into_iter().map(|(_, t)| t));
                (t.to_string(), t)
            })
            .collect();
        products.sort_by(|a, b| a.0.cmp(&b.0));
        EventTerm::or_all(products.into_iter().map(|(_, t)| t))
    }
}

/// Sufficient syntactic test for `x ≤ w` under every valuation.
fn precedes(x: &EventTerm, w: &EventTerm) -> bool {
    if x == w || matches!(x, EventTerm::Always) || matches!(w, EventTerm::Never) {
        return true;
    }
    match (x, w) {
        (EventTerm::Or(a, b), _) if precedes(a, w) || precedes(b, w) => true,
        (EventTerm::And(a, b), _) if precedes(a, w) && precedes(b, w) => true,
        (_, EventTerm::And(a, b)) => precedes(x, a) || precedes(x, b),
        (_, EventTerm::Or(a, b)) => precedes(x, a) && precedes(x, b),
        // These take their left input's value or NEVER.
        (_, EventTerm::Before(a, _) | EventTerm::InclBefore(a, _) | EventTerm::Simult(a, _)) => precedes(x, a),
        _ => false,
    }
}

fn context(term: &EventTerm, conditions: &[SideCondition]) -> Result<Ctx, ()> {
    let mut names: BTreeSet<String> = free_variables(term);
    for c in conditions {
        names.extend(c.variables());
    }
    let names: Vec<String> = names.into_iter().collect();
    let index = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i as Var))
        .collect::<BTreeMap<_, _>>();
    let mut ctx = Ctx {
        names,
        index,
        distinct: Vec::new(),
        never_pairs: Vec::new(),
        forbidden: Vec::new(),
        saturate: Vec::new(),
        cold: BTreeSet::new(),
        created: 0,
    };
    for c in conditions {
        match c {
            SideCondition::AllDistinct(vs) => {
                let g = vs.iter().map(|v| ctx.var(v)).collect();
                ctx.distinct.push(g);
            }
            SideCondition::ColdSpare(v) => {
                ctx.cold.insert(v.clone());
            }
            SideCondition::NeverEvents(a, b) => {
                let pair = (ctx.var(a), ctx.var(b));
                ctx.never_pairs.push(pair);
            }
            SideCondition::TermEqNever(_) => {}
        }
    }
    // Forbidden products and saturation bounds are computed once the plain
    // conditions are in place, so they are already simplified by them.
    for c in conditions {
        if let SideCondition::TermEqNever(t) = c {
            let sop = ctx.build(t)?;
            ctx.forbidden.extend(sop);
            if let EventTerm::Before(x, y) = t {
                if let EventTerm::Var(x) = x.as_ref() {
                    if !ctx.cold.contains(x) {
                        let y = ctx.build(y)?;
                        let x = ctx.var(x);
                        ctx.saturate.push((x, y));
                    }
                }
            }
        }
    }
    Ok(ctx)
}

fn one_pass(term: &EventTerm, conditions: &[SideCondition]) -> Result<EventTerm, ()> {
    let mut ctx = context(term, conditions)?;
    let sop = ctx.build(term)?;
    let sop = ctx.saturate(sop)?;
    Ok(ctx.to_term(&sop))
}

/// [`normalize_under`] with no side conditions.
pub fn normalize(term: &EventTerm, budget: usize) -> Result<EventTerm, NormalizeError> {
    normalize_under(term, &[], budget)
}

/// Sum-of-products form of `term`, simplified using `conditions`, repeated
/// until a pass changes nothing (at most `budget` passes). The result is
/// sample-checked against the input before it is returned.
pub fn normalize_under(
    term: &EventTerm,
    conditions: &[SideCondition],
    budget: usize,
) -> Result<EventTerm, NormalizeError> {
    let mut current = term.clone();
    let mut converged = false;
    for _ in 0..budget {
        let next = one_pass(&current, conditions).map_err(|()| NormalizeError::BudgetExhausted {
            partial: current.clone(),
        })?;
        if next == current {
            converged = true;
            break;
        }
        current = next;
    }
    if !converged {
        return Err(NormalizeError::BudgetExhausted { partial: current });
    }
    let mode = Mode::Sampled {
        trials: SELF_CHECK_TRIALS,
        seed: SELF_CHECK_SEED,
    };
    if let Verdict::NotEquivalent { witness, .. } = decide_equivalence(term, &current, conditions, mode)? {
        return Err(NormalizeError::SelfCheckFailed { witness });
    }
    Ok(current)
}

#[derive(Debug, Clone, Serialize)]
pub struct Reduction {
    pub reduced: EventTerm,
    pub certificate: Verdict,
}

/// Normalizes `term` under `conditions` and certifies the result: exactly when
/// there are few enough variables, otherwise by seeded sampling.
pub fn apply_reduction(term: &EventTerm, conditions: &[SideCondition]) -> Result<Reduction, NormalizeError> {
    let reduced = normalize_under(term, conditions, DEFAULT_BUDGET)?;
    let mut vars = free_variables(term);
    vars.extend(free_variables(&reduced));
    for c in conditions {
        vars.extend(c.variables());
    }
    let certificate = decide_equivalence(term, &reduced, conditions, Mode::auto(vars.len(), CERTIFICATE_SEED))?;
    if let Verdict::NotEquivalent { witness, .. } = certificate {
        return Err(NormalizeError::SelfCheckFailed { witness });
    }
    Ok(Reduction { reduced, certificate })
}
