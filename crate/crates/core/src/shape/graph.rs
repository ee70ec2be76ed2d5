// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{internal, Result};
use crate::lang::{Expr, Field, LocExpr};
use crate::numeric::{Sym, SymSupply};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PtEdge {
    pub src: Sym,
    pub field: Field,
    pub dst: Sym,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndEdge {
    pub root: Sym,
    pub def: String,
}

/// Why a symbolic location or value could not be evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalFail {
    /// No points-to edge for this cell; unfolding may expose it.
    Missing(Sym, Field),
    /// The expression is not a location, or takes the address of an
    /// interior field.
    Unsupported(String),
}

/// A separating shape graph. Edges denote disjoint cells; nodes denote
/// values. An `open` graph may leave some allocated cells undescribed.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ShapeGraph {
    nodes: BTreeSet<Sym>,
    pts: BTreeMap<(Sym, i64), (Field, Sym)>,
    inds: BTreeSet<(Sym, String)>,
    pub open: bool,
    supply: SymSupply,
}

impl ShapeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a fresh node.
    pub fn fresh(&mut self) -> Sym {
        let s = self.supply.fresh();
        self.nodes.insert(s);
        s
    }

    /// Adds a node with a chosen name; it must not be present.
    pub fn add_node(&mut self, s: Sym) -> Result<()> {
        if !self.nodes.insert(s) {
            return internal(format!("node {s} already present"));
        }
        self.supply.reserve(s);
        Ok(())
    }

    pub fn next_sym(&self) -> u32 {
        self.supply.peek()
    }

    pub fn nodes(&self) -> &BTreeSet<Sym> {
        &self.nodes
    }

    pub fn has_node(&self, s: Sym) -> bool {
        self.nodes.contains(&s)
    }

    pub fn pts(&self) -> impl Iterator<Item = PtEdge> + '_ {
        self.pts.iter().map(|((src, _), (field, dst))| PtEdge { src: *src, field: field.clone(), dst: *dst })
    }

    pub fn inds(&self) -> impl Iterator<Item = IndEdge> + '_ {
        self.inds.iter().map(|(root, def)| IndEdge { root: *root, def: def.clone() })
    }

    pub fn pt_count(&self) -> usize {
        self.pts.len()
    }

    pub fn ind_count(&self) -> usize {
        self.inds.len()
    }

    pub fn edge_count(&self) -> usize {
        self.pts.len() + self.inds.len()
    }

    pub fn pt_at(&self, src: Sym, off: i64) -> Option<(&Field, Sym)> {
        self.pts.get(&(src, off)).map(|(f, d)| (f, *d))
    }

    pub fn pts_from(&self, src: Sym) -> Vec<PtEdge> {
        self.pts
            .range((src, i64::MIN)..=(src, i64::MAX))
            .map(|((s, _), (f, d))| PtEdge { src: *s, field: f.clone(), dst: *d })
            .collect()
    }

    pub fn inds_at(&self, root: Sym) -> Vec<String> {
        self.inds.iter().filter(|(r, _)| *r == root).map(|(_, d)| d.clone()).collect()
    }

    pub fn has_ind(&self, root: Sym, def: &str) -> bool {
        self.inds.contains(&(root, def.to_string()))
    }

    fn check_node(&self, s: Sym) -> Result<()> {
        if self.nodes.contains(&s) {
            Ok(())
        } else {
            internal(format!("{s} is not a node"))
        }
    }

    pub fn add_pt(&mut self, src: Sym, field: Field, dst: Sym) -> Result<()> {
        self.check_node(src)?;
        self.check_node(dst)?;
        let key = (src, field.offset());
        if self.pts.contains_key(&key) {
            return internal(format!("cell {src}·{field} described twice"));
        }
        self.pts.insert(key, (field, dst));
        Ok(())
    }

    pub fn add_ind(&mut self, root: Sym, def: &str) -> Result<()> {
        self.check_node(root)?;
        if !self.inds.insert((root, def.to_string())) {
            return internal(format!("{def}({root}) present twice"));
        }
        Ok(())
    }

    pub fn remove_pt(&mut self, src: Sym, off: i64) -> Result<PtEdge> {
        match self.pts.remove(&(src, off)) {
            Some((field, dst)) => Ok(PtEdge { src, field, dst }),
            None => internal(format!("no points-to edge at {src}+{off}")),
        }
    }

    pub fn remove_ind(&mut self, root: Sym, def: &str) -> Result<()> {
        if !self.inds.remove(&(root, def.to_string())) {
            return internal(format!("no edge {def}({root})"));
        }
        Ok(())
    }

    /// Swings the edge at `(src, off)` to `new_dst`.
    pub fn mutate(&mut self, src: Sym, off: i64, new_dst: Sym) -> Result<()> {
        self.check_node(new_dst)?;
        match self.pts.get_mut(&(src, off)) {
            Some(e) => {
                e.1 = new_dst;
                Ok(())
            }
            None => internal(format!("mutation of absent edge at {src}+{off}")),
        }
    }

    pub fn has_incident_edges(&self, s: Sym) -> bool {
        self.pts.iter().any(|((src, _), (_, dst))| *src == s || *dst == s) || self.inds.iter().any(|(r, _)| *r == s)
    }

    pub fn delete_node(&mut self, s: Sym) -> Result<()> {
        self.check_node(s)?;
        if self.has_incident_edges(s) {
            return internal(format!("node {s} still has edges"));
        }
        self.nodes.remove(&s);
        Ok(())
    }

    /// Nodes reachable from `roots` through points-to edges.
    pub fn reachable(&self, roots: impl IntoIterator<Item = Sym>) -> BTreeSet<Sym> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<Sym> = roots.into_iter().collect();
        while let Some(s) = stack.pop() {
            if !self.nodes.contains(&s) || !seen.insert(s) {
                continue;
            }
            for e in self.pts_from(s) {
                stack.push(e.dst);
            }
        }
        seen
    }

    /// Address of a symbolic location.
    pub fn eval_loc(&self, l: &LocExpr<Sym>) -> std::result::Result<(Sym, Field), EvalFail> {
        match l {
            LocExpr::Var(a) => Ok((*a, Field::zero())),
            LocExpr::FieldOf(base, f) => {
                let (a, g) = self.eval_loc(base)?;
                Ok((a, g.then(f)))
            }
            LocExpr::Deref(e) => Ok((self.eval_exp(e)?, Field::zero())),
        }
    }

    /// Value of a location-valued expression.
    pub fn eval_exp(&self, e: &Expr<Sym>) -> std::result::Result<Sym, EvalFail> {
        match e {
            Expr::Loc(l) => {
                let (a, f) = self.eval_loc(l)?;
                self.pt_at(a, f.offset()).map(|(_, d)| d).ok_or(EvalFail::Missing(a, f))
            }
            Expr::AddrOf(l) => {
                let (a, f) = self.eval_loc(l)?;
                if f.offset() == 0 {
                    Ok(a)
                } else {
                    Err(EvalFail::Unsupported(format!("address of interior field {a}·{f}")))
                }
            }
            _ => Err(EvalFail::Unsupported("not a location expression".into())),
        }
    }
}

impl fmt::Display for ShapeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.pts().map(|e| format!("{}·{}↦{}", e.src, e.field, e.dst)).collect();
        parts.extend(self.inds().map(|e| format!("{}({})", e.def, e.root)));
        if self.open {
            parts.push("…".into());
        }
        if parts.is_empty() {
            write!(f, "emp")
        } else {
            write!(f, "{}", parts.join(" ✱ "))
        }
    }
}
