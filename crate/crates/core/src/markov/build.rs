//! State-space exploration driven by the structure function.
//!
//! A state records, for every node of the (hash-consed) top term and of every
//! spare activation term, whether it has failed, can no longer fail, or is
//! still pending. Only one basic variable fires per transition, so two
//! variables never fail at the same instant, while nodes sharing a failed
//! variable (functional dependencies) do fail together. Nodes that can no
//! longer influence the top event or a spare activation are forgotten, which
//! merges states that differ only in irrelevant history.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{Ctmc, MarkovError};
use crate::algebra::{free_variables, EventTerm};
use crate::galileo::{EventDynamics, StructureFunction};

pub(super) const PENDING: u8 = 0;
pub(super) const FAILED: u8 = 1;
pub(super) const DEAD: u8 = 2;
pub(super) const FORGOTTEN: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    Var(u32),
    Always,
    Never,
    And,
    Or,
    Simult,
    Before,
    Incl,
}

#[derive(Debug, Clone, Copy)]
struct NodeDef {
    op: Op,
    l: u32,
    r: u32,
}

#[derive(Debug, Clone, Copy)]
enum VarKind {
    Plain { rate: f64 },
    Active { spare: usize, rate: f64 },
    Dormant { rate: f64 },
}

#[derive(Debug, Clone)]
struct Spare {
    active: usize,
    dormant: usize,
    activation: usize,
}

/// Hash-consed node graph shared by the top term and the activation terms.
#[derive(Debug, Clone)]
pub(super) struct Layout {
    nodes: Vec<NodeDef>,
    var_kind: Vec<VarKind>,
    /// Node index of each variable, in dynamics order.
    pub(super) var_nodes: Vec<(String, usize)>,
    spares: Vec<Spare>,
    top: usize,
}

impl Layout {
    fn new(sf: &StructureFunction) -> Result<Self, MarkovError> {
        let mut b = Interner::default();
        let mut var_nodes = Vec::new();
        let mut kinds: BTreeMap<String, VarKind> = BTreeMap::new();
        let mut spare_defs = Vec::new();
        for d in &sf.dynamics {
            match d {
                EventDynamics::Plain { var, rate, .. } => {
                    kinds.insert(var.clone(), VarKind::Plain { rate: *rate });
                }
                EventDynamics::Spare {
                    active,
                    dormant,
                    rate,
                    dormancy,
                    activation,
                    ..
                } => {
                    let spare = spare_defs.len();
                    kinds.insert(active.clone(), VarKind::Active { spare, rate: *rate });
                    kinds.insert(dormant.clone(), VarKind::Dormant { rate: rate * dormancy });
                    spare_defs.push((active.clone(), dormant.clone(), activation.clone()));
                }
            }
        }
        let mut roots = vec![&sf.term];
        roots.extend(spare_defs.iter().map(|(_, _, act)| act));
        for root in &roots {
            if let Some(v) = free_variables(root).into_iter().find(|v| !kinds.contains_key(v)) {
                return Err(MarkovError::UnknownVariable(v));
            }
        }
        for d in &sf.dynamics {
            for v in d.variables() {
                let idx = b.var(v);
                var_nodes.push((v.to_string(), idx));
            }
        }
        let top = b.intern(&sf.term);
        let spares = spare_defs
            .iter()
            .map(|(a, d, act)| Spare {
                active: b.var(a),
                dormant: b.var(d),
                activation: b.intern(act),
            })
            .collect();
        let var_kind = b
            .var_names
            .iter()
            .map(|name| kinds[name])
            .collect();
        Ok(Layout {
            nodes: b.nodes,
            var_kind,
            var_nodes,
            spares,
            top,
        })
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Default)]
struct Interner {
    nodes: Vec<NodeDef>,
    index: HashMap<(Op, u32, u32), usize>,
    var_names: Vec<String>,
    var_ids: HashMap<String, u32>,
}

impl Interner {
    fn push(&mut self, op: Op, l: u32, r: u32) -> usize {
        *self.index.entry((op, l, r)).or_insert_with(|| {
            self.nodes.push(NodeDef { op, l, r });
            self.nodes.len() - 1
        })
    }

    fn var(&mut self, name: &str) -> usize {
        let id = match self.var_ids.get(name) {
            Some(&id) => id,
            None => {
                let id = self.var_names.len() as u32;
                self.var_names.push(name.to_string());
                self.var_ids.insert(name.to_string(), id);
                id
            }
        };
        self.push(Op::Var(id), 0, 0)
    }

    fn intern(&mut self, t: &EventTerm) -> usize {
        let op = match t {
            EventTerm::Var(v) => return self.var(v),
            EventTerm::Always => return self.push(Op::Always, 0, 0),
            EventTerm::Never => return self.push(Op::Never, 0, 0),
            EventTerm::And(..) => Op::And,
            EventTerm::Or(..) => Op::Or,
            EventTerm::Simult(..) => Op::Simult,
            EventTerm::Before(..) => Op::Before,
            EventTerm::InclBefore(..) => Op::Incl,
        };
        let (l, r) = t.children().expect("binary operator");
        let l = self.intern(l) as u32;
        let r = self.intern(r) as u32;
        self.push(op, l, r)
    }
}

/// Scratch buffers reused across transitions.
struct Work {
    st: Vec<u8>,
    newly: Vec<bool>,
    relevant: Vec<bool>,
}

impl Layout {
    fn var_of(&self, node: usize) -> Option<VarKind> {
        match self.nodes[node].op {
            Op::Var(id) => Some(self.var_kind[id as usize]),
            _ => None,
        }
    }

    /// Propagates failures and deaths after `newly` nodes failed at the current
    /// instant. Only pending nodes are recomputed.
    fn settle(&self, st: &mut [u8], newly: &mut [bool]) {
        loop {
            for (i, n) in self.nodes.iter().enumerate() {
                if st[i] != PENDING {
                    continue;
                }
                let (l, r) = (n.l as usize, n.r as usize);
                let (sl, sr) = (st[l], st[r]);
                let next = match n.op {
                    Op::Var(_) => PENDING,
                    Op::Always => FAILED,
                    Op::Never => DEAD,
                    Op::And => {
                        if sl == DEAD || sr == DEAD {
                            DEAD
                        } else if sl == FAILED && sr == FAILED {
                            FAILED
                        } else {
                            PENDING
                        }
                    }
                    Op::Or => {
                        if sl == FAILED || sr == FAILED {
                            FAILED
                        } else if sl == DEAD && sr == DEAD {
                            DEAD
                        } else {
                            PENDING
                        }
                    }
                    Op::Simult => match (sl, sr) {
                        (DEAD, _) | (_, DEAD) => DEAD,
                        (FAILED, FAILED) if newly[l] && newly[r] => FAILED,
                        (FAILED, _) | (_, FAILED) => DEAD,
                        _ => PENDING,
                    },
                    Op::Before | Op::Incl => match (sl, sr) {
                        (DEAD, _) => DEAD,
                        (FAILED, FAILED) if newly[l] && newly[r] && n.op == Op::Incl => FAILED,
                        (FAILED, FAILED) => DEAD,
                        (FAILED, _) => FAILED,
                        (_, FAILED) => DEAD,
                        _ => PENDING,
                    },
                };
                if next != PENDING {
                    st[i] = next;
                    newly[i] = next == FAILED;
                }
            }
            let mut changed = false;
            for s in &self.spares {
                let act = st[s.activation];
                let dormant_rate = match self.var_of(s.dormant) {
                    Some(VarKind::Dormant { rate }) => rate,
                    _ => unreachable!("spare dormant node is a dormant variable"),
                };
                if st[s.dormant] == PENDING && (act == FAILED || dormant_rate == 0.0) {
                    st[s.dormant] = DEAD;
                    changed = true;
                }
                if st[s.active] == PENDING && (st[s.dormant] == FAILED || act == DEAD) {
                    st[s.active] = DEAD;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Forgets every node that no pending consumer can observe any more.
    fn canonicalize(&self, st: &mut [u8], relevant: &mut [bool]) {
        relevant.iter_mut().for_each(|r| *r = false);
        relevant[self.top] = true;
        loop {
            for i in (0..self.len()).rev() {
                if relevant[i] && st[i] == PENDING {
                    let n = self.nodes[i];
                    if !matches!(n.op, Op::Var(_) | Op::Always | Op::Never) {
                        relevant[n.l as usize] = true;
                        relevant[n.r as usize] = true;
                    }
                }
            }
            let mut changed = false;
            for s in &self.spares {
                let active_live = relevant[s.active] && st[s.active] == PENDING;
                let dormant_live = relevant[s.dormant] && st[s.dormant] == PENDING;
                if (active_live || dormant_live) && !relevant[s.activation] {
                    relevant[s.activation] = true;
                    changed = true;
                }
                if active_live && !relevant[s.dormant] {
                    relevant[s.dormant] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (s, &r) in st.iter_mut().zip(relevant.iter()) {
            if !r {
                *s = FORGOTTEN;
            }
        }
    }

    fn rate(&self, st: &[u8], node: usize) -> f64 {
        match self.var_of(node) {
            Some(VarKind::Plain { rate }) => rate,
            Some(VarKind::Active { spare, rate }) => {
                if st[self.spares[spare].activation] == FAILED {
                    rate
                } else {
                    0.0
                }
            }
            Some(VarKind::Dormant { rate }) => rate,
            None => 0.0,
        }
    }

    pub(super) fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Names of active spare variables that are currently able to fire.
    pub(super) fn active_spares(&self, st: &[u8]) -> Vec<String> {
        self.spares
            .iter()
            .filter(|s| st[s.activation] == FAILED && st[s.active] == PENDING)
            .filter_map(|s| self.var_nodes.iter().find(|(_, n)| *n == s.active))
            .map(|(name, _)| name.clone())
            .collect()
    }
}

pub(super) fn pack(st: &[u8]) -> Box<[u8]> {
    st.chunks(4)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &s)| acc | (s << (2 * i))))
        .collect()
}

pub(super) fn unpack(key: &[u8], n: usize, out: &mut Vec<u8>) {
    out.clear();
    out.extend((0..n).map(|i| (key[i / 4] >> (2 * (i % 4))) & 3));
}

enum Target {
    Failed,
    Sink,
    State(Box<[u8]>),
}

pub(super) fn explore(sf: &StructureFunction, budget: usize) -> Result<Ctmc, MarkovError> {
    let layout = Layout::new(sf)?;
    let n = layout.len();
    let mut work = Work {
        st: vec![PENDING; n],
        newly: vec![false; n],
        relevant: vec![false; n],
    };

    let mut keys: Vec<Option<Box<[u8]>>> = Vec::new();
    let mut index: HashMap<Box<[u8]>, u32> = HashMap::new();
    let mut failed: Option<usize> = None;
    let mut sink: Option<usize> = None;
    let mut queue = VecDeque::new();

    let mut intern = |target: Target, keys: &mut Vec<Option<Box<[u8]>>>, queue: &mut VecDeque<usize>| {
        let slot = match target {
            Target::Failed => &mut failed,
            Target::Sink => &mut sink,
            Target::State(key) => {
                if let Some(&i) = index.get(&key) {
                    return Ok(i as usize);
                }
                let i = keys.len();
                index.insert(key.clone(), i as u32);
                keys.push(Some(key));
                queue.push_back(i);
                return check_budget(keys.len(), budget).map(|_| i);
            }
        };
        if let Some(i) = *slot {
            return Ok(i);
        }
        let i = keys.len();
        keys.push(None);
        *slot = Some(i);
        queue.push_back(i);
        check_budget(keys.len(), budget).map(|_| i)
    };

    let classify = |layout: &Layout, work: &mut Work| -> Target {
        match work.st[layout.top] {
            FAILED => Target::Failed,
            DEAD => Target::Sink,
            _ => {
                layout.canonicalize(&mut work.st, &mut work.relevant);
                Target::State(pack(&work.st))
            }
        }
    };

    layout.settle(&mut work.st, &mut work.newly);
    let initial = intern(classify(&layout, &mut work), &mut keys, &mut queue)?;

    let mut row_ptr = vec![0usize];
    let mut cols: Vec<u32> = Vec::new();
    let mut rates: Vec<f64> = Vec::new();
    let mut base = Vec::with_capacity(n);
    let mut row: Vec<(u32, f64)> = Vec::new();
    while let Some(i) = queue.pop_front() {
        debug_assert_eq!(i + 1, row_ptr.len(), "rows are emitted in index order");
        row.clear();
        if let Some(key) = &keys[i] {
            unpack(key, n, &mut base);
            for (_, v) in &layout.var_nodes {
                let v = *v;
                if base[v] != PENDING {
                    continue;
                }
                let rate = layout.rate(&base, v);
                if rate <= 0.0 {
                    continue;
                }
                work.st.clone_from(&base);
                work.newly.iter_mut().for_each(|x| *x = false);
                work.st[v] = FAILED;
                work.newly[v] = true;
                layout.settle(&mut work.st, &mut work.newly);
                let target = classify(&layout, &mut work);
                let j = intern(target, &mut keys, &mut queue)?;
                row.push((j as u32, rate));
            }
        }
        row.sort_by_key(|&(j, _)| j);
        let mut k = 0;
        while k < row.len() {
            let (j, mut r) = row[k];
            k += 1;
            while k < row.len() && row[k].0 == j {
                r += row[k].1;
                k += 1;
            }
            cols.push(j);
            rates.push(r);
        }
        row_ptr.push(cols.len());
    }

    Ok(Ctmc::from_parts(
        row_ptr,
        cols,
        rates,
        initial,
        failed,
        sink,
        keys,
        layout,
    ))
}

fn check_budget(count: usize, budget: usize) -> Result<(), MarkovError> {
    if count > budget {
        Err(MarkovError::StateBudgetExceeded { budget, explored: count })
    } else {
        Ok(())
    }
}

pub(super) fn status_name(s: u8) -> &'static str {
    match s {
        PENDING => "pending",
        FAILED => "failed",
        DEAD => "dead",
        _ => "forgotten",
    }
}
