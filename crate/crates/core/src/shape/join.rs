// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use super::graph::ShapeGraph;
use super::inductive::DefTable;
use super::matcher::{fold_into, MatchResult};
use crate::error::Result;
use crate::numeric::{NumExpr, Sym};

/// The two inputs of a join, each with a decision procedure for side
/// constraints over its own symbols.
pub struct JoinSides<'a> {
    pub left: &'a ShapeGraph,
    pub right: &'a ShapeGraph,
    pub entails_left: &'a mut dyn FnMut(&NumExpr) -> bool,
    pub entails_right: &'a mut dyn FnMut(&NumExpr) -> bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinOut {
    pub graph: ShapeGraph,
    /// (left, right, output) triples, in creation order.
    pub psi: Vec<(Sym, Sym, Sym)>,
    /// Some input edges could not be matched and were dropped.
    pub lossy: bool,
}

struct Used {
    pts: BTreeSet<(Sym, i64)>,
    inds: BTreeSet<(Sym, String)>,
}

impl Used {
    fn new() -> Self {
        Used { pts: BTreeSet::new(), inds: BTreeSet::new() }
    }

    fn take(&mut self, m: &MatchResult) {
        self.pts.extend(m.used_pts.iter().cloned());
        self.inds.extend(m.used_inds.iter().cloned());
    }

    fn free_pts(&self, g: &ShapeGraph, n: Sym) -> bool {
        g.pts_from(n).iter().any(|e| !self.pts.contains(&(n, e.field.offset())))
    }

    fn free_inds(&self, g: &ShapeGraph, n: Sym) -> Vec<String> {
        g.inds_at(n).into_iter().filter(|d| !self.inds.contains(&(n, d.clone()))).collect()
    }

    fn leftover(&self, g: &ShapeGraph) -> bool {
        g.pts().any(|e| !self.pts.contains(&(e.src, e.field.offset())))
            || g.inds().any(|e| !self.inds.contains(&(e.root, e.def.clone())))
    }
}

struct Pairs {
    out: ShapeGraph,
    map: BTreeMap<(Sym, Sym), Sym>,
    order: Vec<(Sym, Sym)>,
}

impl Pairs {
    fn get(&mut self, l: Sym, r: Sym) -> Sym {
        if let Some(o) = self.map.get(&(l, r)) {
            return *o;
        }
        let o = self.out.fresh();
        self.map.insert((l, r), o);
        self.order.push((l, r));
        o
    }
}

/// Joins two graphs. Output nodes stand for (left, right) node pairs,
/// seeded from `roots`. Matching cells are paired up; regions that differ
/// are folded into inductive edges when one side already has a summary or
/// both sides fold into the same definition. With `node_cap`, edges leaving
/// nodes beyond the cap are dropped, which bounds the output for widening.
pub fn shape_join(
    sides: JoinSides<'_>,
    roots: &[(Sym, Sym)],
    defs: &DefTable,
    budget: usize,
    node_cap: Option<usize>,
) -> Result<JoinOut> {
    let JoinSides { left: l, right: r, entails_left, entails_right } = sides;
    let mut p = Pairs { out: ShapeGraph::new(), map: BTreeMap::new(), order: Vec::new() };
    let (mut ul, mut ur) = (Used::new(), Used::new());
    for (a, b) in roots {
        p.get(*a, *b);
    }

    // Cells present on both sides.
    let mut i = 0;
    while i < p.order.len() {
        let (a, b) = p.order[i];
        let o = p.map[&(a, b)];
        for e in l.pts_from(a) {
            let off = e.field.offset();
            if ul.pts.contains(&(a, off)) || ur.pts.contains(&(b, off)) {
                continue;
            }
            if let Some((_, rd)) = r.pt_at(b, off) {
                ul.pts.insert((a, off));
                ur.pts.insert((b, off));
                let od = p.get(e.dst, rd);
                p.out.add_pt(o, e.field.clone(), od)?;
            }
        }
        for def in ul.free_inds(l, a) {
            if ur.free_inds(r, b).contains(&def) {
                ul.inds.insert((a, def.clone()));
                ur.inds.insert((b, def.clone()));
                p.out.add_ind(o, &def)?;
            }
        }
        i += 1;
    }

    // Summaries for the regions that differ.
    for (a, b) in p.order.clone() {
        let o = p.map[&(a, b)];
        let (l_inds, r_inds) = (ul.free_inds(l, a), ur.free_inds(r, b));
        for def in &l_inds {
            if let Some(m) = fold_into(r, &ur.pts, &ur.inds, b, def, defs, budget, entails_right) {
                ur.take(&m);
                ul.inds.insert((a, def.clone()));
                if !p.out.has_ind(o, def) {
                    p.out.add_ind(o, def)?;
                }
            }
        }
        for def in &r_inds {
            if ur.inds.contains(&(b, def.clone())) {
                continue;
            }
            if let Some(m) = fold_into(l, &ul.pts, &ul.inds, a, def, defs, budget, entails_left) {
                ul.take(&m);
                ur.inds.insert((b, def.clone()));
                if !p.out.has_ind(o, def) {
                    p.out.add_ind(o, def)?;
                }
            }
        }
        if l_inds.is_empty() && r_inds.is_empty() && (ul.free_pts(l, a) || ur.free_pts(r, b)) {
            for def in defs.names() {
                let Some(ml) = fold_into(l, &ul.pts, &ul.inds, a, def, defs, budget, entails_left) else { continue };
                let Some(mr) = fold_into(r, &ur.pts, &ur.inds, b, def, defs, budget, entails_right) else { continue };
                ul.take(&ml);
                ur.take(&mr);
                p.out.add_ind(o, def)?;
                break;
            }
        }
    }

    let mut lossy = ul.leftover(l) || ur.leftover(r);
    if let Some(cap) = node_cap {
        if p.out.nodes().len() > cap {
            let keep: BTreeSet<Sym> = p.order.iter().take(cap).map(|k| p.map[k]).collect();
            for e in p.out.pts().collect::<Vec<_>>() {
                if !keep.contains(&e.src) {
                    p.out.remove_pt(e.src, e.field.offset())?;
                    lossy = true;
                }
            }
            for e in p.out.inds().collect::<Vec<_>>() {
                if !keep.contains(&e.root) {
                    p.out.remove_ind(e.root, &e.def)?;
                    lossy = true;
                }
            }
        }
    }
    p.out.open = l.open || r.open || lossy;
    let psi = p.order.iter().map(|k| (k.0, k.1, p.map[k])).collect();
    Ok(JoinOut { graph: p.out, psi, lossy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Field;

    fn var_to(g: &mut ShapeGraph) -> (Sym, Sym) {
        let (x, a) = (g.fresh(), g.fresh());
        g.add_pt(x, Field::zero(), a).unwrap();
        (x, a)
    }

    #[test]
    fn identical_inputs_give_isomorphic_output() {
        let mut g = ShapeGraph::new();
        let (x, a) = var_to(&mut g);
        g.add_ind(a, "list").unwrap();
        let defs = DefTable::builtin();
        let out = shape_join(
            JoinSides { left: &g, right: &g, entails_left: &mut |_| false, entails_right: &mut |_| false },
            &[(x, x)],
            &defs,
            8,
            None,
        )
        .unwrap();
        assert_eq!(out.graph.nodes().len(), 2);
        assert_eq!(out.graph.edge_count(), 2);
        assert!(!out.lossy);
        assert!(out.psi.iter().all(|(l, r, _)| l == r));
    }

    #[test]
    fn cell_and_null_fold_into_list() {
        let mut l = ShapeGraph::new();
        let (lx, la) = var_to(&mut l);
        let (n, d) = (l.fresh(), l.fresh());
        l.add_pt(la, Field::new("next", 0), n).unwrap();
        l.add_pt(la, Field::new("d", 4), d).unwrap();
        let mut r = ShapeGraph::new();
        let (rx, _) = var_to(&mut r);
        let defs = DefTable::builtin();
        // Left: the tail is null; right: the content is null.
        let out = shape_join(
            JoinSides { left: &l, right: &r, entails_left: &mut |_| true, entails_right: &mut |_| true },
            &[(lx, rx)],
            &defs,
            8,
            None,
        )
        .unwrap();
        assert!(!out.lossy, "{}", out.graph);
        assert_eq!(out.graph.ind_count(), 1);
        assert_eq!(out.graph.pt_count(), 1);
    }

    #[test]
    fn unmatched_cells_are_dropped() {
        let mut l = ShapeGraph::new();
        let (lx, la) = var_to(&mut l);
        let v = l.fresh();
        l.add_pt(la, Field::new("q", 8), v).unwrap();
        let mut r = ShapeGraph::new();
        let (rx, _) = var_to(&mut r);
        let defs = DefTable::builtin();
        let out = shape_join(
            JoinSides { left: &l, right: &r, entails_left: &mut |_| false, entails_right: &mut |_| false },
            &[(lx, rx)],
            &defs,
            8,
            None,
        )
        .unwrap();
        assert!(out.lossy && out.graph.open);
        assert_eq!(out.graph.pt_count(), 1);
    }
}
