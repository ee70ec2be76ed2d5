// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use super::store::{ConcreteEnv, ConcreteStore};
use crate::error::{Error, Result};
use crate::memory::AbstractMem;
use crate::numeric::{NumDomain, NumExpr, Sym};
use crate::shape::{DefTable, ShapeGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    /// No match found, but some inductive edge hit the depth bound.
    Unknown,
}

struct Search<'a, N> {
    store: &'a ConcreteStore,
    defs: &'a DefTable,
    num: &'a N,
    depth: usize,
    offsets: Vec<i64>,
    cut: bool,
}

#[derive(Clone)]
struct St {
    g: ShapeGraph,
    nu: BTreeMap<Sym, i64>,
    covered: BTreeSet<i64>,
    cons: Vec<NumExpr>,
    /// Non-empty unfoldings above each inductive root.
    level: BTreeMap<Sym, usize>,
}

/// Decides whether `(env, store)` is described by `mem`, unfolding each
/// chain of inductive edges at most `depth` times.
pub fn member_gamma<N: NumDomain>(
    env: &ConcreteEnv,
    store: &ConcreteStore,
    mem: &AbstractMem<N>,
    defs: &DefTable,
    depth: usize,
) -> Verdict {
    if mem.is_bottom() || env.addrs.keys().ne(mem.env.keys()) {
        return Verdict::No;
    }
    let mut nu = BTreeMap::new();
    for (v, a) in &env.addrs {
        let s = mem.env[v];
        if nu.insert(s, *a).is_some_and(|prev| prev != *a) {
            return Verdict::No;
        }
    }
    let mut offsets: Vec<i64> = defs.layout().offsets().values().copied().collect();
    offsets.push(0);
    offsets.sort_unstable();
    offsets.dedup();
    let mut search = Search { store, defs, num: &mem.elem.num, depth, offsets, cut: false };
    let st = St { g: mem.elem.graph.clone(), nu, covered: BTreeSet::new(), cons: Vec::new(), level: BTreeMap::new() };
    if search.solve(st) {
        Verdict::Yes
    } else if search.cut {
        Verdict::Unknown
    } else {
        Verdict::No
    }
}

impl<N: NumDomain> Search<'_, N> {
    fn solve(&mut self, mut st: St) -> bool {
        // Cells whose owner is known are matched deterministically.
        loop {
            if st.cons.iter().any(|c| c.eval(&st.nu) == Some(0)) {
                return false;
            }
            let Some(e) = st.g.pts().find(|e| st.nu.contains_key(&e.src)) else {
                break;
            };
            let base = st.nu[&e.src];
            let Some(addr) = base.checked_add(e.field.offset()) else {
                return false;
            };
            if base < 1 || st.covered.contains(&addr) {
                return false;
            }
            let Some(v) = self.store.get(addr) else {
                return false;
            };
            if *st.nu.entry(e.dst).or_insert(v) != v {
                return false;
            }
            st.covered.insert(addr);
            if st.g.remove_pt(e.src, e.field.offset()).is_err() {
                return false;
            }
        }
        let bound = st.g.inds().find(|e| st.nu.contains_key(&e.root));
        if let Some(e) = bound {
            return self.unfold(st, e.root, &e.def);
        }
        if let Some(e) = st.g.pts().next() {
            let off = e.field.offset();
            for cand in self.free_addresses(&st, &[off]) {
                let mut next = st.clone();
                next.nu.insert(e.src, cand);
                if self.solve(next) {
                    return true;
                }
            }
            return false;
        }
        if let Some(e) = st.g.inds().next() {
            let mut cands = vec![0];
            cands.extend(self.free_addresses(&st, &self.offsets.clone()));
            for cand in cands {
                let mut next = st.clone();
                next.nu.insert(e.root, cand);
                if self.solve(next) {
                    return true;
                }
            }
            return false;
        }
        if !st.g.open && st.covered.len() != self.store.cells().len() {
            return false;
        }
        if st.cons.iter().any(|c| c.eval(&st.nu) == Some(0)) {
            return false;
        }
        let dims = self.num.dims();
        let nu: BTreeMap<Sym, i64> = st.nu.into_iter().filter(|(s, _)| dims.contains(s)).collect();
        self.num.satisfiable_with(&nu)
    }

    fn unfold(&mut self, st: St, root: Sym, def: &str) -> bool {
        let Some(d) = self.defs.get(def) else {
            return false;
        };
        let k = st.level.get(&root).copied().unwrap_or(0);
        let mut base = st.g.clone();
        if base.remove_ind(root, def).is_err() {
            return false;
        }
        for rule in &d.rules {
            let grow = !rule.is_empty_heap();
            if grow && k >= self.depth {
                self.cut = true;
                continue;
            }
            let Ok(u) = d.instantiate(&base, root, rule) else {
                continue;
            };
            let mut next = st.clone();
            next.g = u.graph;
            next.cons.extend(u.constraint);
            for n in u.new_nodes {
                next.level.insert(n, k + grow as usize);
            }
            if self.solve(next) {
                return true;
            }
        }
        false
    }

    /// Candidate block addresses: an uncovered cell minus a field offset.
    fn free_addresses(&self, st: &St, offsets: &[i64]) -> Vec<i64> {
        let mut out = BTreeSet::new();
        for a in self.store.cells().keys().filter(|a| !st.covered.contains(a)) {
            for o in offsets {
                if a - o >= 1 {
                    out.insert(a - o);
                }
            }
        }
        out.into_iter().collect()
    }
}

/// Builds a concrete instance of `def` with `len` non-empty unfoldings and
/// returns its root value. Only rules whose cells all belong to the root
/// are supported. `data` supplies values for non-recursive fields.
pub fn build_instance(
    defs: &DefTable,
    def: &str,
    len: usize,
    store: &mut ConcreteStore,
    data: &mut dyn FnMut() -> i64,
) -> Result<i64> {
    let d = defs.get(def).ok_or_else(|| Error::Definition(format!("unknown definition '{def}'")))?;
    if len == 0 {
        return match d.rules.iter().find(|r| r.is_empty_heap()) {
            Some(_) => Ok(0),
            None => Err(Error::Definition(format!("'{def}' has no empty rule"))),
        };
    }
    let rule = d
        .rules
        .iter()
        .find(|r| !r.is_empty_heap() && r.pts.iter().all(|(s, _, _)| *s == d.formal))
        .ok_or_else(|| Error::Definition(format!("'{def}' has no buildable rule")))?;
    let mut cells = Vec::new();
    let mut first = true;
    for (_, f, dst) in &rule.pts {
        let v = match rule.inds.iter().find(|(_, r)| r == dst) {
            Some((sub, _)) => {
                let n = if first { len - 1 } else { 0 };
                first = false;
                build_instance(defs, sub, n, store, data)?
            }
            None => data(),
        };
        cells.push((f.offset(), v));
    }
    let offs: Vec<i64> = cells.iter().map(|c| c.0).collect();
    let base = store.malloc(&offs);
    for (o, v) in cells {
        store.set(base + o, v);
    }
    Ok(base)
}
