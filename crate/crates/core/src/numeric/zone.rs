// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use super::interval::Itv;
use super::linear::{constraints_of, Atom, Lin};
use super::{NumDomain, NumExpr, Sym};
use crate::error::{internal, Result};

/// Difference-bound matrix. Index 0 is the constant zero; index `i + 1`
/// is `dims[i]`. Entry `(i, j)` bounds `x_i - x_j`; `None` is +∞.
///
/// Elements are kept closed except for widening results, which are left as
/// computed so that widening sequences terminate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Zone {
    dims: Vec<Sym>,
    m: Vec<Option<i64>>,
    bottom: bool,
}

fn add(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    // Overflowing finite sums become +∞, which only loses precision.
    a.zip(b).and_then(|(a, b)| a.checked_add(b))
}

fn min(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

fn le(a: Option<i64>, b: Option<i64>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(a), Some(b)) => a <= b,
    }
}

impl Zone {
    fn n(&self) -> usize {
        self.dims.len() + 1
    }

    fn at(&self, i: usize, j: usize) -> Option<i64> {
        self.m[i * self.n() + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Option<i64>) {
        let n = self.n();
        self.m[i * n + j] = v;
    }

    fn tighten(&mut self, i: usize, j: usize, v: i64) {
        let cur = self.at(i, j);
        self.set(i, j, min(cur, Some(v)));
    }

    fn idx(&self, s: Sym) -> Option<usize> {
        self.dims.binary_search(&s).ok().map(|i| i + 1)
    }

    fn need(&self, s: Sym) -> Result<usize> {
        self.idx(s).map_or_else(|| internal(format!("symbol {s} is not a dimension")), Ok)
    }

    fn check_syms(&self, e: &NumExpr) -> Result<()> {
        for s in e.syms() {
            self.need(s)?;
        }
        Ok(())
    }

    fn check_same_dims(&self, o: &Zone) -> Result<()> {
        if self.dims != o.dims {
            return internal("zone elements over different dimensions");
        }
        Ok(())
    }

    fn with_dims(dims: Vec<Sym>, bottom: bool) -> Zone {
        let n = dims.len() + 1;
        let mut m = vec![None; n * n];
        for i in 0..n {
            m[i * n + i] = Some(0);
        }
        Zone { dims, m, bottom }
    }

    /// Shortest-path closure; detects emptiness.
    pub fn closed(&self) -> Zone {
        let mut z = self.clone();
        if z.bottom {
            return z;
        }
        let n = z.n();
        for k in 0..n {
            for i in 0..n {
                let ik = z.at(i, k);
                if ik.is_none() {
                    continue;
                }
                for j in 0..n {
                    let via = add(ik, z.at(k, j));
                    if !le(z.at(i, j), via) {
                        z.set(i, j, via);
                    }
                }
            }
        }
        if (0..n).any(|i| z.at(i, i).is_some_and(|d| d < 0)) {
            return Zone::with_dims(z.dims, true);
        }
        z
    }

    fn itv_at(&self, i: usize) -> Itv {
        Itv { lo: self.at(0, i).and_then(i64::checked_neg), hi: self.at(i, 0) }
    }

    fn forget(&mut self, i: usize) {
        for j in 0..self.n() {
            if j != i {
                self.set(i, j, None);
                self.set(j, i, None);
            }
        }
    }

    /// Adds `lin ≤ 0` where expressible; other shapes fall back to bounds
    /// derived through intervals. Expects a closed element.
    fn add_le(&mut self, lin: &Lin) {
        let terms: Vec<(Sym, i64)> = lin.terms.iter().map(|(s, c)| (*s, *c)).collect();
        let Some(nk) = lin.k.checked_neg() else { return };
        match terms.as_slice() {
            [] => {
                if lin.k > 0 {
                    self.bottom = true;
                }
            }
            [(x, 1)] => {
                let i = self.idx(*x).unwrap();
                self.tighten(i, 0, nk);
            }
            [(x, -1)] => {
                let i = self.idx(*x).unwrap();
                self.tighten(0, i, nk);
            }
            [(x, 1), (y, -1)] | [(y, -1), (x, 1)] => {
                let (i, j) = (self.idx(*x).unwrap(), self.idx(*y).unwrap());
                self.tighten(i, j, nk);
            }
            _ => {
                let snapshot = self.clone();
                for &(v, c) in &terms {
                    if c != 1 && c != -1 {
                        continue;
                    }
                    let mut rest = Itv::cst(lin.k);
                    for &(w, cw) in &terms {
                        if w != v {
                            rest = rest.add(&snapshot.itv_at(snapshot.idx(w).unwrap()).scale(cw));
                        }
                    }
                    let (Some(lo), i) = (rest.lo, self.idx(v).unwrap()) else { continue };
                    if c == 1 {
                        if let Some(b) = lo.checked_neg() {
                            self.tighten(i, 0, b);
                        }
                    } else {
                        self.tighten(0, i, lo);
                    }
                }
            }
        }
    }

    /// `lin ≠ 0` prunes only a bound that equals the excluded value.
    /// Expects a closed element.
    fn add_ne(&mut self, lin: &Lin) {
        let terms: Vec<(Sym, i64)> = lin.terms.iter().map(|(s, c)| (*s, *c)).collect();
        // Bounds of the difference x_i - x_j for the shapes we track.
        let (i, j, bad) = match terms.as_slice() {
            [] => {
                if lin.k == 0 {
                    self.bottom = true;
                }
                return;
            }
            [(x, 1)] => (self.idx(*x).unwrap(), 0, lin.k.checked_neg()),
            [(x, -1)] => (0, self.idx(*x).unwrap(), lin.k.checked_neg()),
            [(x, 1), (y, -1)] | [(y, -1), (x, 1)] => (self.idx(*x).unwrap(), self.idx(*y).unwrap(), lin.k.checked_neg()),
            _ => return,
        };
        let Some(bad) = bad else { return };
        let hi = self.at(i, j);
        let lo = self.at(j, i).and_then(i64::checked_neg);
        if hi == Some(bad) && lo == Some(bad) {
            self.bottom = true;
            return;
        }
        if hi == Some(bad) {
            self.set(i, j, bad.checked_sub(1));
        } else if lo == Some(bad) {
            if let Some(b) = bad.checked_add(1).and_then(i64::checked_neg) {
                self.set(j, i, Some(b));
            }
        }
    }

    /// Bound `x_i - x_j ≤ c` for rendering and tests.
    pub fn diff_bound(&self, x: Sym, y: Sym) -> Option<i64> {
        let z = self.closed();
        if z.bottom {
            return Some(i64::MIN);
        }
        z.at(z.idx(x)?, z.idx(y)?)
    }
}

impl NumDomain for Zone {
    fn top(dims: &BTreeSet<Sym>) -> Self {
        Zone::with_dims(dims.iter().copied().collect(), false)
    }

    fn bottom(dims: &BTreeSet<Sym>) -> Self {
        Zone::with_dims(dims.iter().copied().collect(), true)
    }

    fn dims(&self) -> BTreeSet<Sym> {
        self.dims.iter().copied().collect()
    }

    fn is_bottom(&self) -> bool {
        self.bottom || self.closed().bottom
    }

    fn assign(&self, target: Sym, e: &NumExpr) -> Result<Self> {
        self.check_syms(e)?;
        let t = self.need(target)?;
        let mut z = self.closed();
        if z.bottom {
            return Ok(z);
        }
        let lin = Lin::of(e);
        let shape = lin.as_ref().map(|l| (l.terms.iter().map(|(s, c)| (*s, *c)).collect::<Vec<_>>(), l.k));
        match shape {
            Some((terms, k)) if terms.as_slice() == [(target, 1)] => {
                // x := x + k shifts every bound involving x.
                for j in 0..z.n() {
                    if j != t {
                        let r = z.at(t, j).and_then(|v| v.checked_add(k));
                        let c = z.at(j, t).and_then(|v| v.checked_sub(k));
                        z.set(t, j, r);
                        z.set(j, t, c);
                    }
                }
            }
            Some((terms, k)) if terms.len() == 1 && terms[0].1 == 1 => {
                let y = z.idx(terms[0].0).unwrap();
                z.forget(t);
                z.set(t, y, Some(k));
                z.set(y, t, k.checked_neg());
            }
            Some((terms, k)) if terms.is_empty() => {
                z.forget(t);
                z.set(t, 0, Some(k));
                z.set(0, t, k.checked_neg());
            }
            _ => {
                let v = Itv::eval(e, &|s| z.itv_at(z.idx(s).unwrap()));
                z.forget(t);
                z.set(t, 0, v.hi);
                z.set(0, t, v.lo.and_then(i64::checked_neg));
            }
        }
        Ok(z.closed())
    }

    fn guard(&self, e: &NumExpr) -> Result<Self> {
        self.check_syms(e)?;
        let mut z = self.closed();
        if z.bottom {
            return Ok(z);
        }
        match constraints_of(e, true) {
            Some(atoms) => {
                for _ in 0..2 {
                    for a in &atoms {
                        match a {
                            Atom::Le(l) => z.add_le(l),
                            Atom::Ne(l) => z.add_ne(l),
                        }
                        z = z.closed();
                        if z.bottom {
                            return Ok(z);
                        }
                    }
                }
            }
            None => {
                if Itv::eval(e, &|s| z.itv_at(z.idx(s).unwrap())).singleton() == Some(0) {
                    z.bottom = true;
                }
            }
        }
        Ok(z)
    }

    fn add_dim(&self, s: Sym) -> Result<Self> {
        if self.idx(s).is_some() {
            return internal(format!("dimension {s} already present"));
        }
        let mut dims = self.dims.clone();
        dims.push(s);
        dims.sort();
        let mut out = Zone::with_dims(dims, self.bottom);
        let map: Vec<usize> = (0..self.n()).map(|i| if i == 0 { 0 } else { out.idx(self.dims[i - 1]).unwrap() }).collect();
        for i in 0..self.n() {
            for j in 0..self.n() {
                out.set(map[i], map[j], self.at(i, j));
            }
        }
        Ok(out)
    }

    fn remove_dim(&self, s: Sym) -> Result<Self> {
        self.need(s)?;
        let keep: BTreeMap<Sym, Sym> = self.dims.iter().filter(|d| **d != s).map(|d| (*d, *d)).collect();
        self.rename(&keep)
    }

    fn rename(&self, map: &BTreeMap<Sym, Sym>) -> Result<Self> {
        let src = self.closed();
        let dims: Vec<Sym> = map.keys().copied().collect();
        let mut idx = vec![0usize];
        for old in map.values() {
            idx.push(src.need(*old)?);
        }
        let mut out = Zone::with_dims(dims, src.bottom);
        if src.bottom {
            return Ok(out);
        }
        for i in 0..out.n() {
            for j in 0..out.n() {
                if i != j {
                    out.set(i, j, src.at(idx[i], idx[j]));
                }
            }
        }
        Ok(out)
    }

    fn leq(&self, o: &Self) -> Result<bool> {
        self.check_same_dims(o)?;
        let a = self.closed();
        if a.bottom {
            return Ok(true);
        }
        if o.is_bottom() {
            return Ok(false);
        }
        Ok(a.m.iter().zip(&o.m).all(|(x, y)| le(*x, *y)))
    }

    fn join(&self, o: &Self) -> Result<Self> {
        self.check_same_dims(o)?;
        let (a, b) = (self.closed(), o.closed());
        if a.bottom {
            return Ok(b);
        }
        if b.bottom {
            return Ok(a);
        }
        let m = a.m.iter().zip(&b.m).map(|(x, y)| x.zip(*y).map(|(x, y)| x.max(y))).collect();
        Ok(Zone { dims: a.dims, m, bottom: false })
    }

    fn widen(&self, o: &Self) -> Result<Self> {
        self.check_same_dims(o)?;
        if self.is_bottom() {
            return Ok(o.closed());
        }
        let b = o.closed();
        if b.bottom {
            return Ok(self.clone());
        }
        let m = self.m.iter().zip(&b.m).map(|(x, y)| if le(*y, *x) { *x } else { None }).collect();
        Ok(Zone { dims: self.dims.clone(), m, bottom: false })
    }

    fn contains(&self, nu: &BTreeMap<Sym, i64>) -> bool {
        if self.is_bottom() {
            return false;
        }
        let val = |i: usize| if i == 0 { Some(0) } else { nu.get(&self.dims[i - 1]).copied() };
        for i in 0..self.n() {
            for j in 0..self.n() {
                let (Some(vi), Some(vj)) = (val(i), val(j)) else { return false };
                if let Some(c) = self.at(i, j) {
                    if (vi as i128) - (vj as i128) > c as i128 {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn satisfiable_with(&self, nu: &BTreeMap<Sym, i64>) -> bool {
        let mut z = self.closed();
        if z.bottom {
            return false;
        }
        for (s, v) in nu {
            if let Some(i) = z.idx(*s) {
                z.tighten(i, 0, *v);
                match v.checked_neg() {
                    Some(nv) => z.tighten(0, i, nv),
                    None => return z.itv_at(i).contains(*v),
                }
            }
        }
        !z.closed().bottom
    }

    fn interval_of(&self, s: Sym) -> Itv {
        let z = self.closed();
        if z.bottom {
            return Itv::new(1, 0);
        }
        z.idx(s).map_or(Itv::TOP, |i| z.itv_at(i))
    }

    fn render(&self) -> String {
        let z = self.closed();
        if z.bottom {
            return "⊥".into();
        }
        let mut parts: Vec<String> = z.dims.iter().enumerate().map(|(i, s)| format!("{s}∈{}", z.itv_at(i + 1))).collect();
        let mut rel = Vec::new();
        for i in 1..z.n() {
            for j in 1..z.n() {
                if let (true, Some(c)) = (i != j, z.at(i, j)) {
                    rel.push(format!("{}-{}≤{c}", z.dims[i - 1], z.dims[j - 1]));
                }
            }
        }
        if !rel.is_empty() {
            parts.push(format!("; {}", rel.join(", ")));
        }
        format!("{{{}}}", parts.join(", ").replace(", ; ", "; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::BinOp;

    fn top(syms: &[u32]) -> Zone {
        Zone::top(&syms.iter().map(|s| Sym(*s)).collect())
    }

    fn le_e(a: u32, b: u32) -> NumExpr {
        NumExpr::bin(BinOp::Le, NumExpr::Sym(Sym(a)), NumExpr::Sym(Sym(b)))
    }

    #[test]
    fn transitive_difference() {
        let z = top(&[3, 5, 7]).guard(&le_e(3, 5)).unwrap().guard(&le_e(5, 7)).unwrap();
        assert_eq!(z.diff_bound(Sym(3), Sym(7)), Some(0));
        let weaker = top(&[3, 5, 7]).guard(&le_e(3, 5)).unwrap();
        assert!(z.leq(&weaker).unwrap());
        assert!(!weaker.leq(&z).unwrap());
    }

    #[test]
    fn assign_forms() {
        let z = top(&[0, 1]).guard(&NumExpr::cmp(Sym(1), BinOp::Eq, 2)).unwrap();
        let plus = NumExpr::bin(BinOp::Add, NumExpr::Sym(Sym(1)), NumExpr::Const(3));
        let a = z.assign(Sym(0), &plus).unwrap();
        assert_eq!(a.interval_of(Sym(0)), Itv::cst(5));
        assert_eq!(a.diff_bound(Sym(0), Sym(1)), Some(3));
        let shift = NumExpr::bin(BinOp::Sub, NumExpr::Sym(Sym(0)), NumExpr::Const(1));
        let b = a.assign(Sym(0), &shift).unwrap();
        assert_eq!(b.diff_bound(Sym(0), Sym(1)), Some(2));
        let c = a.assign(Sym(0), &NumExpr::Opaque).unwrap();
        assert_eq!(c.interval_of(Sym(0)), Itv::TOP);
        assert_eq!(c.interval_of(Sym(1)), Itv::cst(2));
    }

    #[test]
    fn not_equal_prunes_bounds() {
        let z = top(&[0]).guard(&NumExpr::cmp(Sym(0), BinOp::Ge, 0)).unwrap();
        let nz = z.guard(&NumExpr::cmp(Sym(0), BinOp::Ne, 0)).unwrap();
        assert_eq!(nz.interval_of(Sym(0)), Itv::at_least(1));
        assert!(nz.guard(&NumExpr::cmp(Sym(0), BinOp::Eq, 0)).unwrap().is_bottom());
    }

    #[test]
    fn rename_pulls_back() {
        let z = top(&[3, 5]).guard(&le_e(3, 5)).unwrap();
        let r = z.rename(&BTreeMap::from([(Sym(13), Sym(3)), (Sym(15), Sym(5))])).unwrap();
        assert_eq!(r.diff_bound(Sym(13), Sym(15)), Some(0));
        let dup = top(&[2]).guard(&NumExpr::cmp(Sym(2), BinOp::Eq, 1)).unwrap();
        let d = dup.rename(&BTreeMap::from([(Sym(0), Sym(2)), (Sym(1), Sym(2))])).unwrap();
        assert_eq!(d.interval_of(Sym(0)), Itv::cst(1));
        assert_eq!(d.diff_bound(Sym(0), Sym(1)), Some(0));
    }

    #[test]
    fn widening_drops_unstable_bounds() {
        let a = top(&[0]).guard(&NumExpr::cmp(Sym(0), BinOp::Eq, 0)).unwrap();
        let b = top(&[0]).guard(&NumExpr::cmp(Sym(0), BinOp::Le, 1)).unwrap().guard(&NumExpr::cmp(Sym(0), BinOp::Ge, 0)).unwrap();
        let w = a.widen(&b).unwrap();
        assert_eq!(w.interval_of(Sym(0)), Itv::at_least(0));
        assert!(w.widen(&b).unwrap() == w);
    }

    #[test]
    fn membership() {
        let z = top(&[0, 1]).guard(&le_e(0, 1)).unwrap();
        assert!(z.contains(&BTreeMap::from([(Sym(0), 1), (Sym(1), 2)])));
        assert!(!z.contains(&BTreeMap::from([(Sym(0), 3), (Sym(1), 2)])));
        assert!(z.satisfiable_with(&BTreeMap::from([(Sym(0), 3)])));
        assert!(!z.satisfiable_with(&BTreeMap::from([(Sym(0), 3), (Sym(1), 2)])));
    }
}
