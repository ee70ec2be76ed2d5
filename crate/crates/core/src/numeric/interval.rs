// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::linear::{constraints_of, Atom};
use super::{NumDomain, NumExpr, Sym};
use crate::error::{internal, Result};
use crate::lang::BinOp;

/// Integer interval; `None` bounds are infinite. May be empty (`lo > hi`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Itv {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl Itv {
    pub const TOP: Itv = Itv { lo: None, hi: None };

    pub fn new(lo: i64, hi: i64) -> Self {
        Itv { lo: Some(lo), hi: Some(hi) }
    }

    pub fn cst(k: i64) -> Self {
        Itv::new(k, k)
    }

    pub fn at_least(lo: i64) -> Self {
        Itv { lo: Some(lo), hi: None }
    }

    pub fn at_most(hi: i64) -> Self {
        Itv { lo: None, hi: Some(hi) }
    }

    pub fn is_empty(&self) -> bool {
        matches!((self.lo, self.hi), (Some(l), Some(h)) if l > h)
    }

    pub fn is_top(&self) -> bool {
        self.lo.is_none() && self.hi.is_none()
    }

    pub fn singleton(&self) -> Option<i64> {
        match (self.lo, self.hi) {
            (Some(l), Some(h)) if l == h => Some(l),
            _ => None,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo.is_none_or(|l| l <= v) && self.hi.is_none_or(|h| v <= h)
    }

    pub fn leq(&self, o: &Itv) -> bool {
        if self.is_empty() {
            return true;
        }
        let lo_ok = match (o.lo, self.lo) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => a <= b,
        };
        let hi_ok = match (o.hi, self.hi) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => b <= a,
        };
        lo_ok && hi_ok
    }

    pub fn join(&self, o: &Itv) -> Itv {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        Itv {
            lo: self.lo.zip(o.lo).map(|(a, b)| a.min(b)),
            hi: self.hi.zip(o.hi).map(|(a, b)| a.max(b)),
        }
    }

    pub fn meet(&self, o: &Itv) -> Itv {
        Itv {
            lo: match (self.lo, o.lo) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
            hi: match (self.hi, o.hi) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }

    /// Bounds that grew jump to infinity.
    pub fn widen(&self, o: &Itv) -> Itv {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        Itv {
            lo: match (self.lo, o.lo) {
                (Some(a), Some(b)) if a <= b => Some(a),
                _ => None,
            },
            hi: match (self.hi, o.hi) {
                (Some(a), Some(b)) if b <= a => Some(a),
                _ => None,
            },
        }
    }

    pub fn add(&self, o: &Itv) -> Itv {
        Itv {
            lo: self.lo.zip(o.lo).and_then(|(a, b)| a.checked_add(b)),
            hi: self.hi.zip(o.hi).and_then(|(a, b)| a.checked_add(b)),
        }
    }

    pub fn neg(&self) -> Itv {
        Itv { lo: self.hi.and_then(i64::checked_neg), hi: self.lo.and_then(i64::checked_neg) }
    }

    pub fn scale(&self, c: i64) -> Itv {
        let m = |b: Option<i64>| b.and_then(|b| b.checked_mul(c));
        if c >= 0 {
            Itv { lo: m(self.lo), hi: m(self.hi) }
        } else {
            Itv { lo: m(self.hi), hi: m(self.lo) }
        }
    }

    /// Sound abstraction of a comparison between two intervals.
    fn compare(op: BinOp, a: &Itv, b: &Itv) -> Itv {
        let d = a.add(&b.neg());
        let always = |f: &dyn Fn(&Itv) -> bool| f(&d);
        let (t, f) = match op {
            BinOp::Eq => (d.singleton() == Some(0), !d.contains(0)),
            BinOp::Ne => (!d.contains(0), d.singleton() == Some(0)),
            BinOp::Lt => (always(&|d| d.hi.is_some_and(|h| h < 0)), always(&|d| d.lo.is_some_and(|l| l >= 0))),
            BinOp::Le => (always(&|d| d.hi.is_some_and(|h| h <= 0)), always(&|d| d.lo.is_some_and(|l| l > 0))),
            BinOp::Gt => (always(&|d| d.lo.is_some_and(|l| l > 0)), always(&|d| d.hi.is_some_and(|h| h <= 0))),
            BinOp::Ge => (always(&|d| d.lo.is_some_and(|l| l >= 0)), always(&|d| d.hi.is_some_and(|h| h < 0))),
            BinOp::Add | BinOp::Sub => unreachable!(),
        };
        match (t, f) {
            (true, _) => Itv::cst(1),
            (_, true) => Itv::cst(0),
            _ => Itv::new(0, 1),
        }
    }

    /// Interval evaluation of `e` with symbol bounds from `env`.
    pub fn eval(e: &NumExpr, env: &dyn Fn(Sym) -> Itv) -> Itv {
        match e {
            NumExpr::Sym(s) => env(*s),
            NumExpr::Const(k) => Itv::cst(*k),
            NumExpr::Bin(BinOp::Add, a, b) => Itv::eval(a, env).add(&Itv::eval(b, env)),
            NumExpr::Bin(BinOp::Sub, a, b) => Itv::eval(a, env).add(&Itv::eval(b, env).neg()),
            NumExpr::Bin(op, a, b) => {
                let (a, b) = (Itv::eval(a, env), Itv::eval(b, env));
                if a.is_empty() || b.is_empty() {
                    return Itv::new(1, 0);
                }
                Itv::compare(*op, &a, &b)
            }
            NumExpr::Not(inner) => {
                let v = Itv::eval(inner, env);
                if v.singleton() == Some(0) {
                    Itv::cst(1)
                } else if !v.contains(0) {
                    Itv::cst(0)
                } else {
                    Itv::new(0, 1)
                }
            }
            NumExpr::Opaque => Itv::TOP,
        }
    }
}

impl fmt::Display for Itv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lo, self.hi) {
            _ if self.is_empty() => write!(f, "∅"),
            (None, None) => write!(f, "⊤"),
            (Some(l), Some(h)) => write!(f, "[{l},{h}]"),
            (Some(l), None) => write!(f, "[{l},+∞)"),
            (None, Some(h)) => write!(f, "(-∞,{h}]"),
        }
    }
}

/// Non-relational product of intervals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intervals {
    bounds: BTreeMap<Sym, Itv>,
    bottom: bool,
}

impl Intervals {
    pub fn with_bounds(bounds: BTreeMap<Sym, Itv>) -> Self {
        let bottom = bounds.values().any(Itv::is_empty);
        Intervals { bounds, bottom }
    }

    pub fn get(&self, s: Sym) -> Option<Itv> {
        self.bounds.get(&s).copied()
    }

    fn check_same_dims(&self, o: &Self) -> Result<()> {
        if self.bounds.keys().ne(o.bounds.keys()) {
            return internal("interval elements over different dimensions");
        }
        Ok(())
    }

    fn check_syms(&self, e: &NumExpr) -> Result<()> {
        match e.syms().into_iter().find(|s| !self.bounds.contains_key(s)) {
            Some(s) => internal(format!("symbol {s} is not a dimension")),
            None => Ok(()),
        }
    }

    fn normalize(mut self) -> Self {
        if self.bounds.values().any(Itv::is_empty) {
            self.bottom = true;
        }
        self
    }

    fn refine(&mut self, s: Sym, by: Itv) {
        let cur = self.bounds[&s];
        self.bounds.insert(s, cur.meet(&by));
    }

    fn apply_atom(&mut self, a: &Atom) {
        match a {
            Atom::Le(lin) => {
                if lin.terms.is_empty() {
                    if lin.k > 0 {
                        self.bottom = true;
                    }
                    return;
                }
                // For each unit-coefficient variable v: c·v ≤ -(k + rest).
                let snapshot = self.bounds.clone();
                for (&v, &c) in &lin.terms {
                    if c != 1 && c != -1 {
                        continue;
                    }
                    let mut rest = Itv::cst(lin.k);
                    for (&w, &cw) in &lin.terms {
                        if w != v {
                            rest = rest.add(&snapshot[&w].scale(cw));
                        }
                    }
                    if let Some(lo) = rest.lo {
                        let Some(bound) = lo.checked_neg() else { continue };
                        let by = if c == 1 { Itv::at_most(bound) } else { Itv::at_least(lo) };
                        self.refine(v, by);
                    }
                }
            }
            Atom::Ne(lin) => {
                let mut val = Itv::cst(lin.k);
                for (&w, &cw) in &lin.terms {
                    val = val.add(&self.bounds[&w].scale(cw));
                }
                if val.singleton() == Some(0) {
                    self.bottom = true;
                    return;
                }
                if lin.terms.len() == 1 {
                    let (&v, &c) = lin.terms.iter().next().unwrap();
                    if c != 1 && c != -1 {
                        return;
                    }
                    // v ≠ -k·c
                    let Some(bad) = lin.k.checked_neg().and_then(|k| k.checked_mul(c)) else { return };
                    let cur = self.bounds[&v];
                    let mut next = cur;
                    if cur.lo == Some(bad) {
                        next.lo = bad.checked_add(1);
                    }
                    if cur.hi == Some(bad) {
                        next.hi = bad.checked_sub(1);
                    }
                    self.bounds.insert(v, next);
                }
            }
        }
        if self.bounds.values().any(Itv::is_empty) {
            self.bottom = true;
        }
    }
}

impl NumDomain for Intervals {
    fn top(dims: &BTreeSet<Sym>) -> Self {
        Intervals { bounds: dims.iter().map(|s| (*s, Itv::TOP)).collect(), bottom: false }
    }

    fn bottom(dims: &BTreeSet<Sym>) -> Self {
        Intervals { bottom: true, ..Self::top(dims) }
    }

    fn dims(&self) -> BTreeSet<Sym> {
        self.bounds.keys().copied().collect()
    }

    fn is_bottom(&self) -> bool {
        self.bottom
    }

    fn assign(&self, target: Sym, e: &NumExpr) -> Result<Self> {
        self.check_syms(e)?;
        if !self.bounds.contains_key(&target) {
            return internal(format!("assignment to {target}, which is not a dimension"));
        }
        if self.bottom {
            return Ok(self.clone());
        }
        let v = Itv::eval(e, &|s| self.bounds[&s]);
        let mut out = self.clone();
        out.bounds.insert(target, v);
        Ok(out.normalize())
    }

    fn guard(&self, e: &NumExpr) -> Result<Self> {
        self.check_syms(e)?;
        if self.bottom {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        match constraints_of(e, true) {
            Some(atoms) => {
                // Two rounds let bounds learned from one atom feed the others.
                for _ in 0..2 {
                    for a in &atoms {
                        out.apply_atom(a);
                        if out.bottom {
                            return Ok(out);
                        }
                    }
                }
            }
            None => {
                if Itv::eval(e, &|s| self.bounds[&s]).singleton() == Some(0) {
                    out.bottom = true;
                }
            }
        }
        Ok(out)
    }

    fn add_dim(&self, s: Sym) -> Result<Self> {
        if self.bounds.contains_key(&s) {
            return internal(format!("dimension {s} already present"));
        }
        let mut out = self.clone();
        out.bounds.insert(s, Itv::TOP);
        Ok(out)
    }

    fn remove_dim(&self, s: Sym) -> Result<Self> {
        let mut out = self.clone();
        if out.bounds.remove(&s).is_none() {
            return internal(format!("dimension {s} absent"));
        }
        Ok(out)
    }

    fn rename(&self, map: &BTreeMap<Sym, Sym>) -> Result<Self> {
        let mut bounds = BTreeMap::new();
        for (new, old) in map {
            match self.bounds.get(old) {
                Some(b) => bounds.insert(*new, *b),
                None => return internal(format!("renaming from {old}, which is not a dimension")),
            };
        }
        Ok(Intervals { bounds, bottom: self.bottom })
    }

    fn leq(&self, o: &Self) -> Result<bool> {
        self.check_same_dims(o)?;
        if self.bottom {
            return Ok(true);
        }
        if o.bottom {
            return Ok(false);
        }
        Ok(self.bounds.iter().all(|(s, b)| b.leq(&o.bounds[s])))
    }

    fn join(&self, o: &Self) -> Result<Self> {
        self.check_same_dims(o)?;
        if self.bottom {
            return Ok(o.clone());
        }
        if o.bottom {
            return Ok(self.clone());
        }
        let bounds = self.bounds.iter().map(|(s, b)| (*s, b.join(&o.bounds[s]))).collect();
        Ok(Intervals { bounds, bottom: false })
    }

    fn widen(&self, o: &Self) -> Result<Self> {
        self.check_same_dims(o)?;
        if self.bottom {
            return Ok(o.clone());
        }
        if o.bottom {
            return Ok(self.clone());
        }
        let bounds = self.bounds.iter().map(|(s, b)| (*s, b.widen(&o.bounds[s]))).collect();
        Ok(Intervals { bounds, bottom: false })
    }

    fn contains(&self, nu: &BTreeMap<Sym, i64>) -> bool {
        !self.bottom && self.bounds.iter().all(|(s, b)| nu.get(s).is_some_and(|v| b.contains(*v)))
    }

    fn satisfiable_with(&self, nu: &BTreeMap<Sym, i64>) -> bool {
        !self.bottom && self.bounds.iter().all(|(s, b)| nu.get(s).is_none_or(|v| b.contains(*v)))
    }

    fn interval_of(&self, s: Sym) -> Itv {
        if self.bottom {
            return Itv::new(1, 0);
        }
        self.bounds.get(&s).copied().unwrap_or(Itv::TOP)
    }

    fn render(&self) -> String {
        if self.bottom {
            return "⊥".into();
        }
        let parts: Vec<String> = self.bounds.iter().map(|(s, b)| format!("{s}∈{b}")).collect();
        format!("{{{}}}", parts.join(", "))
    }
}
