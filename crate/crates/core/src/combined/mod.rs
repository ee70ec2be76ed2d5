// SPDX-License-Identifier: Apache-2.0

//! Shape graphs paired with a numeric element over their nodes.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{internal, Error, Result};
use crate::lang::{BinOp, Expr, Field, LocExpr};
use crate::numeric::{NumDomain, NumExpr, Sym};
use crate::shape::{fold_into, shape_compare, shape_join, DefTable, EvalFail, JoinSides, ShapeGraph};

/// A shape graph and a numeric element whose dimensions are exactly the
/// graph's nodes. The element is empty when `num` is bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct Combined<N> {
    pub graph: ShapeGraph,
    pub num: N,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AlarmKind {
    /// A dereference that may hit null, freed or unknown memory.
    InvalidDeref,
    /// A free of something that may not be a live block.
    InvalidFree,
    /// An expression outside what the domain handles.
    Unsupported,
    /// Part of a join could not be summarized and was forgotten.
    PrecisionLoss,
}

impl AlarmKind {
    /// Alarms that stand for a possible runtime error.
    pub fn is_memory_error(self) -> bool {
        matches!(self, AlarmKind::InvalidDeref | AlarmKind::InvalidFree | AlarmKind::Unsupported)
    }
}

impl fmt::Display for AlarmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AlarmKind::InvalidDeref => "invalid-deref",
            AlarmKind::InvalidFree => "invalid-free",
            AlarmKind::Unsupported => "unsupported",
            AlarmKind::PrecisionLoss => "precision-loss",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Alarm {
    pub kind: AlarmKind,
    pub detail: String,
}

/// Results of a transfer function: the surviving disjuncts and the alarms
/// raised for dropped ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<T> {
    pub elems: Vec<T>,
    pub alarms: Vec<Alarm>,
}

impl<T> Outcome<T> {
    pub fn empty() -> Self {
        Outcome { elems: Vec::new(), alarms: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DomainConfig {
    /// Unfoldings allowed while evaluating one transfer function.
    pub unfold_budget: usize,
    /// Unfoldings allowed in one inclusion check or fold.
    pub compare_budget: usize,
    /// Node count above which widening drops edges.
    pub widen_nodes: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { unfold_budget: 3, compare_budget: 8, widen_nodes: 12 }
    }
}

/// Operations of the combined domain for a given definition table.
#[derive(Clone, Copy, Debug)]
pub struct Domain<'a> {
    pub defs: &'a DefTable,
    pub cfg: DomainConfig,
}

/// Right-hand side of an assignment after evaluation in the graph.
enum Rhs {
    Node(Sym),
    Value(NumExpr),
}

fn lower(g: &ShapeGraph, e: &Expr<Sym>) -> std::result::Result<NumExpr, EvalFail> {
    Ok(match e {
        Expr::Loc(_) | Expr::AddrOf(_) => NumExpr::Sym(g.eval_exp(e)?),
        Expr::IntLit(k) => NumExpr::Const(*k),
        Expr::Binary(op, a, b) => NumExpr::bin(*op, lower(g, a)?, lower(g, b)?),
        Expr::Not(a) => NumExpr::not(lower(g, a)?),
    })
}

impl<N: NumDomain> Combined<N> {
    pub fn empty() -> Self {
        Combined { graph: ShapeGraph::new(), num: N::top(&BTreeSet::new()) }
    }

    pub fn is_bottom(&self) -> bool {
        self.num.is_bottom()
    }

    pub fn consistent(&self) -> bool {
        &self.num.dims() == self.graph.nodes()
    }

    pub fn new_node(&mut self) -> Result<Sym> {
        let s = self.graph.fresh();
        self.num = self.num.add_dim(s)?;
        Ok(s)
    }

    pub fn guard(&mut self, e: &NumExpr) -> Result<()> {
        self.num = self.num.guard(e)?;
        Ok(())
    }

    pub fn render(&self) -> String {
        format!("⟨{} | {}⟩", self.graph, self.num.render())
    }
}

impl<'a> Domain<'a> {
    pub fn new(defs: &'a DefTable) -> Self {
        Domain { defs, cfg: DomainConfig::default() }
    }

    /// Adds the facts every member satisfies: cell owners are non-null
    /// addresses, and roots of null-or-block summaries are non-negative.
    pub fn reduce<N: NumDomain>(&self, x: &mut Combined<N>) -> Result<()> {
        let srcs: BTreeSet<Sym> = x.graph.pts().map(|e| e.src).collect();
        for s in srcs {
            x.guard(&NumExpr::cmp(s, BinOp::Ge, 1))?;
        }
        let roots: Vec<_> = x.graph.inds().collect();
        for e in roots {
            if self.defs.get(&e.def).is_some_and(|d| d.root_nonneg) {
                x.guard(&NumExpr::cmp(e.root, BinOp::Ge, 0))?;
            }
        }
        Ok(())
    }

    /// Unfolds the inductive edge at `root`; bottom results are dropped.
    pub fn unfold<N: NumDomain>(&self, x: &Combined<N>, root: Sym) -> Result<Vec<Combined<N>>> {
        let mut out = Vec::new();
        for u in self.defs.unfold(&x.graph, root)? {
            let mut y = Combined { graph: u.graph, num: x.num.add_dims(u.new_nodes.iter().copied())? };
            for c in &u.constraint {
                y.guard(c)?;
            }
            self.reduce(&mut y)?;
            if !y.is_bottom() {
                out.push(y);
            }
        }
        Ok(out)
    }

    /// Runs `f` on `x`, unfolding where `f` reports a missing cell, up to
    /// the unfold budget. Disjuncts that still fail raise alarms.
    pub fn materialize<N: NumDomain, T>(
        &self,
        x: &Combined<N>,
        f: &dyn Fn(&Combined<N>) -> std::result::Result<T, EvalFail>,
    ) -> Result<Outcome<(Combined<N>, T)>> {
        let mut out = Outcome::empty();
        let mut work = vec![(x.clone(), self.cfg.unfold_budget)];
        while let Some((y, budget)) = work.pop() {
            if y.is_bottom() {
                continue;
            }
            match f(&y) {
                Ok(t) => out.elems.push((y, t)),
                Err(EvalFail::Missing(b, fld)) => {
                    if budget > 0 && !y.graph.inds_at(b).is_empty() {
                        let mut kids = self.unfold(&y, b)?;
                        kids.reverse();
                        work.extend(kids.into_iter().map(|k| (k, budget - 1)));
                    } else {
                        let null = if y.num.interval_of(b).contains(0) { " (may be null)" } else { "" };
                        out.alarms.push(Alarm {
                            kind: AlarmKind::InvalidDeref,
                            detail: format!("no cell at {b}·{fld}{null}"),
                        });
                    }
                }
                Err(EvalFail::Unsupported(m)) => out.alarms.push(Alarm { kind: AlarmKind::Unsupported, detail: m }),
            }
        }
        // Keep the order in which unfolding produced the disjuncts.
        Ok(out)
    }

    pub fn assign<N: NumDomain>(&self, x: &Combined<N>, loc: &LocExpr<Sym>, e: &Expr<Sym>) -> Result<Outcome<Combined<N>>> {
        let res = self.materialize(x, &|y| {
            let g = &y.graph;
            let rhs = match e {
                Expr::Loc(_) | Expr::AddrOf(_) => Rhs::Node(g.eval_exp(e)?),
                _ => Rhs::Value(lower(g, e)?),
            };
            let (a, f) = g.eval_loc(loc)?;
            if g.pt_at(a, f.offset()).is_none() {
                return Err(EvalFail::Missing(a, f));
            }
            Ok((a, f.offset(), rhs))
        })?;
        let mut out = Outcome { elems: Vec::new(), alarms: res.alarms };
        for (mut y, (a, off, rhs)) in res.elems {
            let dst = match rhs {
                Rhs::Node(b) => b,
                Rhs::Value(v) => {
                    let d = y.new_node()?;
                    y.num = y.num.assign(d, &v)?;
                    d
                }
            };
            y.graph.mutate(a, off, dst)?;
            if !y.is_bottom() {
                out.elems.push(y);
            }
        }
        Ok(out)
    }

    pub fn guard<N: NumDomain>(&self, x: &Combined<N>, e: &Expr<Sym>) -> Result<Outcome<Combined<N>>> {
        let res = self.materialize(x, &|y| lower(&y.graph, e))?;
        let mut out = Outcome { elems: Vec::new(), alarms: res.alarms };
        for (mut y, c) in res.elems {
            y.guard(&c)?;
            if !y.is_bottom() {
                out.elems.push(y);
            }
        }
        Ok(out)
    }

    /// Allocates a block with one cell per field and stores its address.
    pub fn alloc<N: NumDomain>(&self, x: &Combined<N>, loc: &LocExpr<Sym>, fields: &[Field]) -> Result<Outcome<Combined<N>>> {
        let mut y = x.clone();
        let blk = y.new_node()?;
        y.guard(&NumExpr::cmp(blk, BinOp::Ge, 1))?;
        for f in fields {
            let c = y.new_node()?;
            y.graph.add_pt(blk, f.clone(), c)?;
        }
        let res = self.materialize(&y, &|z| {
            let (a, f) = z.graph.eval_loc(loc)?;
            match z.graph.pt_at(a, f.offset()) {
                Some(_) => Ok((a, f.offset())),
                None => Err(EvalFail::Missing(a, f)),
            }
        })?;
        let mut out = Outcome { elems: Vec::new(), alarms: res.alarms };
        for (mut z, (a, off)) in res.elems {
            z.graph.mutate(a, off, blk)?;
            out.elems.push(z);
        }
        Ok(out)
    }

    /// Frees the block whose address is stored at `loc`. Nodes in
    /// `protected` (variable cells) are never blocks.
    pub fn free<N: NumDomain>(&self, x: &Combined<N>, loc: &LocExpr<Sym>, protected: &BTreeSet<Sym>) -> Result<Outcome<Combined<N>>> {
        let res = self.materialize(x, &|y| {
            let b = y.graph.eval_exp(&Expr::Loc(loc.clone()))?;
            if !y.graph.inds_at(b).is_empty() {
                return Err(EvalFail::Missing(b, Field::zero()));
            }
            Ok(b)
        })?;
        let mut out = Outcome { elems: Vec::new(), alarms: res.alarms };
        for (mut y, b) in res.elems {
            let cells = y.graph.pts_from(b);
            if cells.is_empty() || protected.contains(&b) {
                let null = if y.num.interval_of(b).contains(0) { " (may be null)" } else { "" };
                out.alarms.push(Alarm { kind: AlarmKind::InvalidFree, detail: format!("{b} is not a block{null}") });
                continue;
            }
            for c in cells {
                y.graph.remove_pt(b, c.field.offset())?;
            }
            out.elems.push(y);
        }
        Ok(out)
    }

    /// Drops every node unreachable from `roots`. Their cells still exist
    /// in memory, so removing an edge marks the graph open.
    pub fn reclaim<N: NumDomain>(&self, x: &Combined<N>, roots: &BTreeSet<Sym>) -> Result<Combined<N>> {
        let reach = x.graph.reachable(roots.iter().copied());
        let mut y = x.clone();
        let dead: Vec<Sym> = y.graph.nodes().iter().filter(|n| !reach.contains(n)).copied().collect();
        for &n in &dead {
            for e in y.graph.pts_from(n) {
                y.graph.remove_pt(n, e.field.offset())?;
                y.graph.open = true;
            }
            for d in y.graph.inds_at(n) {
                y.graph.remove_ind(n, &d)?;
                y.graph.open = true;
            }
        }
        for &n in &dead {
            y.graph.delete_node(n)?;
        }
        y.num = y.num.remove_dims(dead)?;
        Ok(y)
    }

    /// Inclusion check from a root correspondence (right node to left node).
    /// Returns the full correspondence when `x0` is included in `x1`.
    pub fn compare<N: NumDomain>(
        &self,
        phi0: &BTreeMap<Sym, Sym>,
        x0: &Combined<N>,
        x1: &Combined<N>,
    ) -> Result<Option<BTreeMap<Sym, Sym>>> {
        if x0.is_bottom() {
            return Ok(Some(phi0.clone()));
        }
        let err: RefCell<Option<Error>> = RefCell::new(None);
        let found = shape_compare(phi0, &x0.graph, &x1.graph, self.defs, self.cfg.compare_budget, &mut |m| {
            match numeric_inclusion(x0, x1, &m.phi, &m.new_nodes, &m.obligations) {
                Ok(b) => b,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    false
                }
            }
        });
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(found.map(|m| m.phi))
    }

    /// Join (or widening) seeded by root pairs. Returns the result and the
    /// output node of every (left, right) pair.
    pub fn join<N: NumDomain>(
        &self,
        x0: &Combined<N>,
        x1: &Combined<N>,
        roots: &[(Sym, Sym)],
        widen: bool,
    ) -> Result<(Combined<N>, BTreeMap<(Sym, Sym), Sym>, bool)> {
        let mut el = |e: &NumExpr| x0.num.entails(e).unwrap_or(false);
        let mut er = |e: &NumExpr| x1.num.entails(e).unwrap_or(false);
        let out = shape_join(
            JoinSides { left: &x0.graph, right: &x1.graph, entails_left: &mut el, entails_right: &mut er },
            roots,
            self.defs,
            self.cfg.compare_budget,
            widen.then_some(self.cfg.widen_nodes),
        )?;
        let lmap: BTreeMap<Sym, Sym> = out.psi.iter().map(|(l, _, o)| (*o, *l)).collect();
        let rmap: BTreeMap<Sym, Sym> = out.psi.iter().map(|(_, r, o)| (*o, *r)).collect();
        let (ln, rn) = (x0.num.rename(&lmap)?, x1.num.rename(&rmap)?);
        let num = if widen { ln.widen(&rn)? } else { ln.join(&rn)? };
        let mut y = Combined { graph: out.graph, num };
        self.reduce(&mut y)?;
        let pairs = out.psi.iter().map(|(l, r, o)| ((*l, *r), *o)).collect();
        Ok((y, pairs, out.lossy))
    }

    /// Whether the region at `root` in `x` is an instance of `def(root)`.
    pub fn folds<N: NumDomain>(&self, x: &Combined<N>, root: Sym, def: &str) -> bool {
        let none = BTreeSet::new();
        fold_into(&x.graph, &none, &BTreeSet::new(), root, def, self.defs, self.cfg.compare_budget, &mut |e| {
            x.num.entails(e).unwrap_or(false)
        })
        .is_some()
    }
}

/// Numeric half of the inclusion check: the right element, extended with
/// the unfolding constraints and moved onto left symbols through `phi`,
/// must contain the left element.
fn numeric_inclusion<N: NumDomain>(
    x0: &Combined<N>,
    x1: &Combined<N>,
    phi: &BTreeMap<Sym, Sym>,
    new_nodes: &[Sym],
    obligations: &[NumExpr],
) -> Result<bool> {
    let mut rn = x1.num.add_dims(new_nodes.iter().copied())?;
    for o in obligations {
        rn = rn.guard(o)?;
    }
    let unmapped: Vec<Sym> = rn.dims().into_iter().filter(|s| !phi.contains_key(s)).collect();
    rn = rn.remove_dims(unmapped)?;
    // Right nodes sent to the same left node are equal.
    let mut rep: BTreeMap<Sym, Sym> = BTreeMap::new();
    for (r, l) in phi {
        match rep.get(l) {
            Some(first) => {
                rn = rn.guard(&NumExpr::bin(BinOp::Eq, NumExpr::Sym(*first), NumExpr::Sym(*r)))?;
                rn = rn.remove_dim(*r)?;
            }
            None => {
                rep.insert(*l, *r);
            }
        }
    }
    if rep.keys().any(|l| !x0.graph.has_node(*l)) {
        return internal("node correspondence leaves the left graph");
    }
    let mut moved = rn.rename(&rep)?;
    let missing: Vec<Sym> = x0.graph.nodes().iter().filter(|n| !rep.contains_key(n)).copied().collect();
    moved = moved.add_dims(missing)?;
    x0.num.leq(&moved)
}
