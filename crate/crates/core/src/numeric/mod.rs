// SPDX-License-Identifier: Apache-2.0

//! Numeric abstract domains over a declared set of symbolic variables.

mod interval;
mod linear;
mod zone;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::lang::BinOp;

pub use interval::{Intervals, Itv};
pub use linear::{constraints_of, Atom, Lin};
pub use zone::Zone;

/// Symbolic variable: an abstract value or address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Sym(pub u32);

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "α{}", self.0)
    }
}

/// Monotone supply of fresh symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymSupply {
    next: u32,
}

impl SymSupply {
    pub fn starting_at(next: u32) -> Self {
        SymSupply { next }
    }

    pub fn fresh(&mut self) -> Sym {
        let s = Sym(self.next);
        self.next += 1;
        s
    }

    pub fn peek(&self) -> u32 {
        self.next
    }

    /// Makes sure `s` will never be issued.
    pub fn reserve(&mut self, s: Sym) {
        self.next = self.next.max(s.0 + 1);
    }
}

/// Expressions over symbolic variables, as seen by the numeric layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NumExpr {
    Sym(Sym),
    Const(i64),
    Bin(BinOp, Box<NumExpr>, Box<NumExpr>),
    Not(Box<NumExpr>),
    /// A value the domain cannot interpret.
    Opaque,
}

impl NumExpr {
    pub fn bin(op: BinOp, a: NumExpr, b: NumExpr) -> Self {
        NumExpr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn not(e: NumExpr) -> Self {
        NumExpr::Not(Box::new(e))
    }

    pub fn cmp(a: Sym, op: BinOp, k: i64) -> Self {
        NumExpr::bin(op, NumExpr::Sym(a), NumExpr::Const(k))
    }

    pub fn syms(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<Sym>) {
        match self {
            NumExpr::Sym(s) => {
                out.insert(*s);
            }
            NumExpr::Bin(_, a, b) => {
                a.collect(out);
                b.collect(out);
            }
            NumExpr::Not(e) => e.collect(out),
            NumExpr::Const(_) | NumExpr::Opaque => {}
        }
    }

    /// Concrete value under a valuation; `None` when a symbol is unbound, the
    /// expression is opaque, or arithmetic overflows.
    pub fn eval(&self, nu: &BTreeMap<Sym, i64>) -> Option<i64> {
        match self {
            NumExpr::Sym(s) => nu.get(s).copied(),
            NumExpr::Const(k) => Some(*k),
            NumExpr::Bin(op, a, b) => op.apply(a.eval(nu)?, b.eval(nu)?),
            NumExpr::Not(e) => Some((e.eval(nu)? == 0) as i64),
            NumExpr::Opaque => None,
        }
    }

    /// Replaces symbols through `map`; unmapped symbols are kept.
    pub fn rename(&self, map: &BTreeMap<Sym, Sym>) -> NumExpr {
        match self {
            NumExpr::Sym(s) => NumExpr::Sym(*map.get(s).unwrap_or(s)),
            NumExpr::Bin(op, a, b) => NumExpr::bin(*op, a.rename(map), b.rename(map)),
            NumExpr::Not(e) => NumExpr::not(e.rename(map)),
            other => other.clone(),
        }
    }
}

impl fmt::Display for NumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumExpr::Sym(s) => write!(f, "{s}"),
            NumExpr::Const(k) => write!(f, "{k}"),
            NumExpr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            NumExpr::Not(e) => write!(f, "!{e}"),
            NumExpr::Opaque => write!(f, "?"),
        }
    }
}

/// Interface of a numeric abstract domain. Every element carries its set of
/// dimensions; operations on two elements require equal dimension sets.
pub trait NumDomain: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    fn top(dims: &BTreeSet<Sym>) -> Self;
    fn bottom(dims: &BTreeSet<Sym>) -> Self;
    fn dims(&self) -> BTreeSet<Sym>;
    fn is_bottom(&self) -> bool;

    fn assign(&self, target: Sym, e: &NumExpr) -> Result<Self>;
    fn guard(&self, e: &NumExpr) -> Result<Self>;
    /// Adds an unconstrained dimension.
    fn add_dim(&self, s: Sym) -> Result<Self>;
    /// Existentially projects a dimension away.
    fn remove_dim(&self, s: Sym) -> Result<Self>;
    /// Builds an element over the keys of `map` where each key takes the
    /// constraints of the dimension it maps to.
    fn rename(&self, map: &BTreeMap<Sym, Sym>) -> Result<Self>;

    fn leq(&self, other: &Self) -> Result<bool>;
    fn join(&self, other: &Self) -> Result<Self>;
    fn widen(&self, other: &Self) -> Result<Self>;

    /// Membership of a valuation defined on every dimension.
    fn contains(&self, nu: &BTreeMap<Sym, i64>) -> bool;
    /// Whether some member agrees with `nu` on the dimensions `nu` defines.
    fn satisfiable_with(&self, nu: &BTreeMap<Sym, i64>) -> bool;
    /// Bounds of one dimension.
    fn interval_of(&self, s: Sym) -> Itv;
    fn render(&self) -> String;

    fn remove_dims(&self, syms: impl IntoIterator<Item = Sym>) -> Result<Self> {
        let mut out = self.clone();
        for s in syms {
            out = out.remove_dim(s)?;
        }
        Ok(out)
    }

    fn add_dims(&self, syms: impl IntoIterator<Item = Sym>) -> Result<Self> {
        let mut out = self.clone();
        for s in syms {
            out = out.add_dim(s)?;
        }
        Ok(out)
    }

    /// True when every member satisfies `e`.
    fn entails(&self, e: &NumExpr) -> Result<bool> {
        Ok(self.guard(&NumExpr::not(e.clone()))?.is_bottom())
    }
}
