// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::{NumExpr, Sym};
use crate::lang::BinOp;

/// `Σ coef·sym + k`, with zero coefficients removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lin {
    pub terms: BTreeMap<Sym, i64>,
    pub k: i64,
}

impl Lin {
    pub fn constant(k: i64) -> Self {
        Lin { terms: BTreeMap::new(), k }
    }

    pub fn sym(s: Sym) -> Self {
        Lin { terms: BTreeMap::from([(s, 1)]), k: 0 }
    }

    pub fn of(e: &NumExpr) -> Option<Lin> {
        match e {
            NumExpr::Sym(s) => Some(Lin::sym(*s)),
            NumExpr::Const(k) => Some(Lin::constant(*k)),
            NumExpr::Bin(BinOp::Add, a, b) => Lin::of(a)?.add(&Lin::of(b)?),
            NumExpr::Bin(BinOp::Sub, a, b) => Lin::of(a)?.add(&Lin::of(b)?.neg()?),
            _ => None,
        }
    }

    pub fn add(&self, o: &Lin) -> Option<Lin> {
        let mut terms = self.terms.clone();
        for (s, c) in &o.terms {
            let e = terms.entry(*s).or_insert(0);
            *e = e.checked_add(*c)?;
        }
        terms.retain(|_, c| *c != 0);
        Some(Lin { terms, k: self.k.checked_add(o.k)? })
    }

    pub fn neg(&self) -> Option<Lin> {
        let mut terms = BTreeMap::new();
        for (s, c) in &self.terms {
            terms.insert(*s, c.checked_neg()?);
        }
        Some(Lin { terms, k: self.k.checked_neg()? })
    }

    pub fn plus(&self, k: i64) -> Option<Lin> {
        Some(Lin { terms: self.terms.clone(), k: self.k.checked_add(k)? })
    }
}

/// A normalized constraint: `lin ≤ 0` or `lin ≠ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    Le(Lin),
    Ne(Lin),
}

/// Conjunction of atoms equivalent to `e` being true (or false when
/// `positive` is false). `None` when `e` has no linear reading; guards then
/// leave the element unchanged.
pub fn constraints_of(e: &NumExpr, positive: bool) -> Option<Vec<Atom>> {
    match e {
        NumExpr::Not(inner) => constraints_of(inner, !positive),
        NumExpr::Bin(op, a, b) if op.is_comparison() => {
            let op = if positive { *op } else { op.negate()? };
            let d = Lin::of(a)?.add(&Lin::of(b)?.neg()?)?;
            Some(match op {
                BinOp::Eq => vec![Atom::Le(d.clone()), Atom::Le(d.neg()?)],
                BinOp::Ne => vec![Atom::Ne(d)],
                BinOp::Lt => vec![Atom::Le(d.plus(1)?)],
                BinOp::Le => vec![Atom::Le(d)],
                BinOp::Gt => vec![Atom::Le(d.neg()?.plus(1)?)],
                BinOp::Ge => vec![Atom::Le(d.neg()?)],
                BinOp::Add | BinOp::Sub => unreachable!(),
            })
        }
        _ => {
            let l = Lin::of(e)?;
            Some(if positive { vec![Atom::Ne(l)] } else { vec![Atom::Le(l.clone()), Atom::Le(l.neg()?)] })
        }
    }
}
