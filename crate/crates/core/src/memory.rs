// SPDX-License-Identifier: Apache-2.0

//! Abstract memories: a node per program variable plus a combined element.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::combined::{Combined, Domain, Outcome};
use crate::error::{internal, Error, Result};
use crate::lang::{BinOp, Expr, Field, LocExpr, Program};
use crate::numeric::{NumDomain, NumExpr, Sym};

/// Initial content of a variable's cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Precondition {
    Top,
    Null,
    /// Integer in `[lo, hi]`.
    Int(i64, i64),
    /// Head pointer of an instance of the named inductive definition.
    Ind(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbstractMem<N> {
    /// Address node of each variable's cell.
    pub env: BTreeMap<String, Sym>,
    pub elem: Combined<N>,
}

impl<N: NumDomain> AbstractMem<N> {
    /// One cell per variable with unconstrained contents.
    pub fn init(dom: &Domain, p: &Program) -> Result<Self> {
        Self::init_with(dom, p, &[])
    }

    pub fn init_with(dom: &Domain, p: &Program, pre: &[(&str, Precondition)]) -> Result<Self> {
        let mut elem = Combined::<N>::empty();
        let mut env = BTreeMap::new();
        for v in &p.vars {
            let a = elem.new_node()?;
            let c = elem.new_node()?;
            elem.graph.add_pt(a, Field::zero(), c)?;
            env.insert(v.clone(), a);
        }
        for (v, cond) in pre {
            let Some(&a) = env.get(*v) else {
                return Err(Error::Definition(format!("precondition on undeclared variable {v}")));
            };
            let c = elem.graph.pt_at(a, 0).map(|(_, c)| c).expect("variable cell");
            match cond {
                Precondition::Top => {}
                Precondition::Null => elem.guard(&NumExpr::cmp(c, BinOp::Eq, 0))?,
                Precondition::Int(lo, hi) => {
                    elem.guard(&NumExpr::cmp(c, BinOp::Ge, *lo))?;
                    elem.guard(&NumExpr::cmp(c, BinOp::Le, *hi))?;
                }
                Precondition::Ind(def) => {
                    if dom.defs.get(def).is_none() {
                        return Err(Error::Definition(format!("unknown inductive definition {def}")));
                    }
                    elem.graph.add_ind(c, def)?;
                }
            }
        }
        dom.reduce(&mut elem)?;
        Ok(AbstractMem { env, elem })
    }

    pub fn is_bottom(&self) -> bool {
        self.elem.is_bottom()
    }

    pub fn roots(&self) -> BTreeSet<Sym> {
        self.env.values().copied().collect()
    }

    /// Node holding the current content of `var`.
    pub fn content(&self, var: &str) -> Option<Sym> {
        self.env.get(var).and_then(|a| self.elem.graph.pt_at(*a, 0)).map(|(_, c)| c)
    }

    fn subst_loc(&self, l: &LocExpr) -> Result<LocExpr<Sym>> {
        l.try_map_vars(&mut |v: &String| self.node_of(v))
    }

    fn subst_exp(&self, e: &Expr) -> Result<Expr<Sym>> {
        e.try_map_vars(&mut |v: &String| self.node_of(v))
    }

    fn node_of(&self, v: &str) -> Result<Sym> {
        self.env.get(v).copied().ok_or_else(|| Error::Definition(format!("undeclared variable {v}")))
    }

    fn wrap(&self, dom: &Domain, out: Outcome<Combined<N>>) -> Result<Outcome<Self>> {
        let roots = self.roots();
        let mut elems = Vec::with_capacity(out.elems.len());
        for e in out.elems {
            elems.push(AbstractMem { env: self.env.clone(), elem: dom.reclaim(&e, &roots)? });
        }
        Ok(Outcome { elems, alarms: out.alarms })
    }

    pub fn assign(&self, dom: &Domain, loc: &LocExpr, e: &Expr) -> Result<Outcome<Self>> {
        let out = dom.assign(&self.elem, &self.subst_loc(loc)?, &self.subst_exp(e)?)?;
        self.wrap(dom, out)
    }

    pub fn guard(&self, dom: &Domain, e: &Expr) -> Result<Outcome<Self>> {
        let out = dom.guard(&self.elem, &self.subst_exp(e)?)?;
        self.wrap(dom, out)
    }

    pub fn alloc(&self, dom: &Domain, loc: &LocExpr, fields: &[Field]) -> Result<Outcome<Self>> {
        let out = dom.alloc(&self.elem, &self.subst_loc(loc)?, fields)?;
        self.wrap(dom, out)
    }

    pub fn free(&self, dom: &Domain, loc: &LocExpr) -> Result<Outcome<Self>> {
        let out = dom.free(&self.elem, &self.subst_loc(loc)?, &self.roots())?;
        self.wrap(dom, out)
    }

    fn same_vars(&self, other: &Self) -> Result<()> {
        if self.env.keys().ne(other.env.keys()) {
            return internal("abstract memories over different variables");
        }
        Ok(())
    }

    /// Inclusion check. Returns the node correspondence (node of `other`
    /// to node of `self`) when it holds.
    pub fn compare_with(&self, dom: &Domain, other: &Self) -> Result<Option<BTreeMap<Sym, Sym>>> {
        self.same_vars(other)?;
        let mut phi0 = BTreeMap::new();
        for (v, a1) in &other.env {
            let a0 = self.env[v];
            if phi0.insert(*a1, a0).is_some_and(|prev| prev != a0) {
                return Ok(None);
            }
        }
        dom.compare(&phi0, &self.elem, &other.elem)
    }

    pub fn compare(&self, dom: &Domain, other: &Self) -> Result<bool> {
        Ok(self.compare_with(dom, other)?.is_some())
    }

    /// Join or widening. The boolean reports a lossy shape join.
    pub fn join(&self, dom: &Domain, other: &Self, widen: bool) -> Result<(Self, bool)> {
        self.same_vars(other)?;
        if other.is_bottom() {
            return Ok((self.clone(), false));
        }
        if self.is_bottom() && !widen {
            return Ok((other.clone(), false));
        }
        let roots: Vec<(Sym, Sym)> = self.env.iter().map(|(v, a)| (*a, other.env[v])).collect();
        let (elem, pairs, lossy) = dom.join(&self.elem, &other.elem, &roots, widen)?;
        let env: BTreeMap<String, Sym> = self.env.iter().map(|(v, a)| (v.clone(), pairs[&(*a, other.env[v])])).collect();
        let roots: BTreeSet<Sym> = env.values().copied().collect();
        Ok((AbstractMem { elem: dom.reclaim(&elem, &roots)?, env }, lossy))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, (v, a)) in self.env.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(s, "{v}@{a}");
        }
        let _ = write!(s, " | {}", self.elem.render());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::numeric::{Intervals, Itv};
    use crate::shape::DefTable;

    type M = AbstractMem<Intervals>;

    fn first(o: Outcome<M>) -> M {
        assert!(o.alarms.is_empty(), "{:?}", o.alarms);
        assert_eq!(o.elems.len(), 1);
        o.elems.into_iter().next().unwrap()
    }

    #[test]
    fn init_gives_one_cell_per_variable() {
        let defs = DefTable::builtin();
        let dom = Domain::new(&defs);
        let p = parse_program("var x, y; x = 1;").unwrap();
        let m = M::init(&dom, &p).unwrap();
        assert_eq!(m.elem.graph.pt_count(), 2);
        assert_eq!(m.elem.graph.nodes().len(), 4);
        let none = parse_program("x = 1;");
        assert!(none.is_err());
        let empty = M::init(&dom, &parse_program("").unwrap()).unwrap();
        assert!(empty.elem.graph.nodes().is_empty());
        assert_eq!(M::init(&dom, &p).unwrap(), m);
    }

    #[test]
    fn assign_constant_then_copy() {
        let defs = DefTable::builtin();
        let dom = Domain::new(&defs);
        let p = parse_program("var x, y; x = 1; y = x;").unwrap();
        let m = M::init(&dom, &p).unwrap();
        let m = first(m.assign(&dom, &LocExpr::var("x"), &Expr::IntLit(1)).unwrap());
        let m = first(m.assign(&dom, &LocExpr::var("y"), &Expr::var("x")).unwrap());
        assert_eq!(m.content("x"), m.content("y"));
        assert_eq!(m.elem.num.interval_of(m.content("y").unwrap()), Itv::cst(1));
        assert_eq!(m.elem.graph.nodes().len(), 3);
    }

    #[test]
    fn guard_on_list_keeps_nonempty_case() {
        let defs = DefTable::builtin();
        let dom = Domain::new(&defs);
        let p = parse_program("var x; x = x;").unwrap();
        let m = M::init_with(&dom, &p, &[("x", Precondition::Ind("list".into()))]).unwrap();
        let ne = Expr::bin(BinOp::Ne, Expr::var("x"), Expr::IntLit(0));
        let g = first(m.guard(&dom, &ne).unwrap());
        assert!(g.elem.graph.has_ind(g.content("x").unwrap(), "list"));
        assert!(m.compare(&dom, &m).unwrap());
        assert!(g.compare(&dom, &m).unwrap());
        assert!(!m.compare(&dom, &g).unwrap());
    }

    #[test]
    fn free_of_maybe_null_alarms() {
        let defs = DefTable::builtin();
        let dom = Domain::new(&defs);
        let p = parse_program("var x; free(x);").unwrap();
        let m = M::init_with(&dom, &p, &[("x", Precondition::Ind("list".into()))]).unwrap();
        let out = m.free(&dom, &LocExpr::var("x")).unwrap();
        assert_eq!(out.elems.len(), 1);
        assert_eq!(out.alarms.len(), 1);
        assert!(out.elems[0].elem.graph.open);
    }

    #[test]
    fn join_of_null_and_cell_is_list() {
        let defs = DefTable::builtin();
        let dom = Domain::new(&defs);
        let p = parse_program("var x; x = malloc{next, d}; x->next = 0;").unwrap();
        let null = M::init_with(&dom, &p, &[("x", Precondition::Null)]).unwrap();
        let one = first(null.alloc(&dom, &LocExpr::var("x"), &[p.field("next").unwrap(), p.field("d").unwrap()]).unwrap());
        let nx = LocExpr::arrow(Expr::var("x"), p.field("next").unwrap());
        let one = first(one.assign(&dom, &nx, &Expr::IntLit(0)).unwrap());
        let (j, lossy) = null.join(&dom, &one, false).unwrap();
        assert!(!lossy);
        assert!(j.elem.graph.has_ind(j.content("x").unwrap(), "list"));
        assert!(null.compare(&dom, &j).unwrap() && one.compare(&dom, &j).unwrap());
    }
}
