// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use super::graph::ShapeGraph;
use super::inductive::DefTable;
use crate::numeric::{NumExpr, Sym};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareMode {
    /// The pattern must describe the whole host; host edges left over are
    /// accepted only when the pattern is open.
    Inclusion,
    /// The pattern describes part of the host; other host edges are ignored.
    Fragment,
}

/// A successful match of a pattern graph against a host graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    /// Pattern node to host node.
    pub phi: BTreeMap<Sym, Sym>,
    /// Side constraints of the pattern rules used, over pattern symbols.
    pub obligations: Vec<NumExpr>,
    /// Pattern nodes created by unfolding.
    pub new_nodes: Vec<Sym>,
    pub used_pts: BTreeSet<(Sym, i64)>,
    pub used_inds: BTreeSet<(Sym, String)>,
}

impl MatchResult {
    /// Obligations rewritten over host symbols; `None` if one mentions an
    /// unmatched pattern node.
    pub fn host_obligations(&self) -> Option<Vec<NumExpr>> {
        self.obligations
            .iter()
            .map(|o| o.syms().iter().all(|s| self.phi.contains_key(s)).then(|| o.rename(&self.phi)))
            .collect()
    }
}

#[derive(Clone)]
struct State {
    pat: ShapeGraph,
    phi: BTreeMap<Sym, Sym>,
    used_pts: BTreeSet<(Sym, i64)>,
    used_inds: BTreeSet<(Sym, String)>,
    obligations: Vec<NumExpr>,
    new_nodes: Vec<Sym>,
    budget: usize,
}

struct Search<'a> {
    host: &'a ShapeGraph,
    defs: &'a DefTable,
    mode: CompareMode,
    pattern_open: bool,
    initial_pts: &'a BTreeSet<(Sym, i64)>,
    initial_inds: &'a BTreeSet<(Sym, String)>,
}

impl Search<'_> {
    fn run(&self, st: State, accept: &mut dyn FnMut(&MatchResult) -> bool) -> Option<MatchResult> {
        let pending_pt = st.pat.pts().find(|e| st.phi.contains_key(&e.src));
        if let Some(e) = pending_pt {
            let h = st.phi[&e.src];
            let key = (h, e.field.offset());
            let (_, hd) = self.host.pt_at(h, key.1)?;
            if st.used_pts.contains(&key) || st.phi.get(&e.dst).is_some_and(|m| *m != hd) {
                return None;
            }
            let mut next = st;
            next.pat.remove_pt(e.src, key.1).ok()?;
            next.used_pts.insert(key);
            next.phi.insert(e.dst, hd);
            return self.run(next, accept);
        }
        let pending_ind = st.pat.inds().find(|e| st.phi.contains_key(&e.root));
        if let Some(e) = pending_ind {
            let h = st.phi[&e.root];
            let hkey = (h, e.def.clone());
            if self.host.has_ind(h, &e.def) && !st.used_inds.contains(&hkey) {
                let mut next = st.clone();
                next.pat.remove_ind(e.root, &e.def).ok()?;
                next.used_inds.insert(hkey);
                if let Some(r) = self.run(next, accept) {
                    return Some(r);
                }
            }
            if st.budget == 0 {
                return None;
            }
            let def = self.defs.get(&e.def)?;
            let host_has_cells = self.host.pts_from(h).iter().any(|p| !st.used_pts.contains(&(h, p.field.offset())));
            let mut rules: Vec<_> = def.rules.iter().collect();
            // Try the rules that can consume host cells first when there are some.
            rules.sort_by_key(|r| r.is_empty_heap() == host_has_cells);
            let mut base = st.pat.clone();
            base.remove_ind(e.root, &e.def).ok()?;
            for rule in rules {
                let u = def.instantiate(&base, e.root, rule).ok()?;
                let mut next = st.clone();
                next.pat = u.graph;
                next.obligations.extend(u.constraint);
                next.new_nodes.extend(u.new_nodes);
                next.budget -= 1;
                if let Some(r) = self.run(next, accept) {
                    return Some(r);
                }
            }
            return None;
        }
        if st.pat.edge_count() > 0 {
            return None;
        }
        if self.mode == CompareMode::Inclusion && !self.pattern_open {
            let leftover = self.host.pts().any(|p| !st.used_pts.contains(&(p.src, p.field.offset())))
                || self.host.inds().any(|i| !st.used_inds.contains(&(i.root, i.def.clone())));
            if leftover || self.host.open {
                return None;
            }
        }
        let res = MatchResult {
            phi: st.phi,
            obligations: st.obligations,
            new_nodes: st.new_nodes,
            used_pts: st.used_pts.difference(self.initial_pts).cloned().collect(),
            used_inds: st.used_inds.difference(self.initial_inds).cloned().collect(),
        };
        accept(&res).then_some(res)
    }
}

/// Checks that `right` describes every state of `left`, starting from the
/// root correspondence `phi0` (right node to left node). Only `right` is
/// unfolded, at most `budget` times. `accept` gets the final match and may
/// reject it, which resumes the search.
pub fn shape_compare(
    phi0: &BTreeMap<Sym, Sym>,
    left: &ShapeGraph,
    right: &ShapeGraph,
    defs: &DefTable,
    budget: usize,
    accept: &mut dyn FnMut(&MatchResult) -> bool,
) -> Option<MatchResult> {
    let none_p = BTreeSet::new();
    let none_i = BTreeSet::new();
    let s = Search {
        host: left,
        defs,
        mode: CompareMode::Inclusion,
        pattern_open: right.open,
        initial_pts: &none_p,
        initial_inds: &none_i,
    };
    let st = State {
        pat: right.clone(),
        phi: phi0.clone(),
        used_pts: BTreeSet::new(),
        used_inds: BTreeSet::new(),
        obligations: Vec::new(),
        new_nodes: Vec::new(),
        budget,
    };
    s.run(st, accept)
}

/// Tries to show that the not-yet-used part of `host` reachable from `root`
/// is an instance of `def(root)`. `entails` decides side constraints over
/// host symbols. Returns the newly used host edges.
#[allow(clippy::too_many_arguments)]
pub fn fold_into(
    host: &ShapeGraph,
    used_pts: &BTreeSet<(Sym, i64)>,
    used_inds: &BTreeSet<(Sym, String)>,
    root: Sym,
    def: &str,
    defs: &DefTable,
    budget: usize,
    entails: &mut dyn FnMut(&NumExpr) -> bool,
) -> Option<MatchResult> {
    let mut pat = ShapeGraph::new();
    let p = pat.fresh();
    pat.add_ind(p, def).ok()?;
    let s = Search {
        host,
        defs,
        mode: CompareMode::Fragment,
        pattern_open: false,
        initial_pts: used_pts,
        initial_inds: used_inds,
    };
    let st = State {
        pat,
        phi: BTreeMap::from([(p, root)]),
        used_pts: used_pts.clone(),
        used_inds: used_inds.clone(),
        obligations: Vec::new(),
        new_nodes: Vec::new(),
        budget,
    };
    s.run(st, &mut |m| match m.host_obligations() {
        Some(obs) => obs.iter().all(|o| entails(o)),
        None => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{BinOp, Field};

    fn f(n: &str, o: i64) -> Field {
        Field::new(n, o)
    }

    /// x ↦ a, a.next ↦ b, a.d ↦ c, list(b)
    fn one_then_list() -> (ShapeGraph, Sym, Sym) {
        let mut g = ShapeGraph::new();
        let (x, a, b, c) = (g.fresh(), g.fresh(), g.fresh(), g.fresh());
        g.add_pt(x, Field::zero(), a).unwrap();
        g.add_pt(a, f("next", 0), b).unwrap();
        g.add_pt(a, f("d", 4), c).unwrap();
        g.add_ind(b, "list").unwrap();
        (g, x, a)
    }

    fn list_at_var() -> (ShapeGraph, Sym, Sym) {
        let mut g = ShapeGraph::new();
        let (x, a) = (g.fresh(), g.fresh());
        g.add_pt(x, Field::zero(), a).unwrap();
        g.add_ind(a, "list").unwrap();
        (g, x, a)
    }

    #[test]
    fn reflexive() {
        let (g, x, _) = one_then_list();
        let defs = DefTable::builtin();
        let m = shape_compare(&BTreeMap::from([(x, x)]), &g, &g, &defs, 8, &mut |_| true).unwrap();
        assert!(m.phi.iter().all(|(k, v)| k == v));
        assert_eq!(m.phi.len(), g.nodes().len());
        assert!(m.obligations.is_empty());
    }

    #[test]
    fn nonempty_list_below_list() {
        let (l, lx, la) = one_then_list();
        let (r, rx, ra) = list_at_var();
        let defs = DefTable::builtin();
        let m = shape_compare(&BTreeMap::from([(rx, lx)]), &l, &r, &defs, 8, &mut |_| true).unwrap();
        assert_eq!(m.phi[&ra], la);
        assert_eq!(m.obligations, vec![NumExpr::cmp(ra, BinOp::Ne, 0)]);
        // The other direction needs unfolding on the left, which compare never does.
        assert!(shape_compare(&BTreeMap::from([(lx, rx)]), &r, &l, &defs, 8, &mut |_| true).is_none());
    }

    #[test]
    fn leftover_edge_fails_unless_open() {
        let (mut l, lx, _) = list_at_var();
        let extra = l.fresh();
        let v = l.fresh();
        l.add_pt(extra, f("next", 0), v).unwrap();
        let (mut r, rx, _) = list_at_var();
        let defs = DefTable::builtin();
        let phi = BTreeMap::from([(rx, lx)]);
        assert!(shape_compare(&phi, &l, &r, &defs, 8, &mut |_| true).is_none());
        r.open = true;
        assert!(shape_compare(&phi, &l, &r, &defs, 8, &mut |_| true).is_some());
    }

    #[test]
    fn accept_can_force_backtracking() {
        let (l, lx, _) = list_at_var();
        let (r, rx, _) = list_at_var();
        let defs = DefTable::builtin();
        let phi = BTreeMap::from([(rx, lx)]);
        // Rejecting the direct ind-ind match leaves only unfoldings, none of which fit.
        let mut seen = 0;
        let res = shape_compare(&phi, &l, &r, &defs, 8, &mut |m| {
            seen += 1;
            m.used_inds.is_empty()
        });
        assert!(res.is_none());
        assert_eq!(seen, 1);
    }

    #[test]
    fn fold_cell_into_list() {
        let (g, _, a) = one_then_list();
        let defs = DefTable::builtin();
        let none = BTreeSet::new();
        let m = fold_into(&g, &none, &BTreeSet::new(), a, "list", &defs, 4, &mut |_| true).unwrap();
        assert_eq!(m.used_pts.len(), 2);
        assert_eq!(m.used_inds.len(), 1);
        // An empty fragment folds only when its root is known to be null.
        let mut e = ShapeGraph::new();
        let n = e.fresh();
        let deny = fold_into(&e, &none, &BTreeSet::new(), n, "list", &defs, 4, &mut |_| false);
        assert!(deny.is_none());
        let allow = fold_into(&e, &none, &BTreeSet::new(), n, "list", &defs, 4, &mut |_| true).unwrap();
        assert_eq!(allow.host_obligations().unwrap(), vec![NumExpr::cmp(n, BinOp::Eq, 0)]);
    }
}
