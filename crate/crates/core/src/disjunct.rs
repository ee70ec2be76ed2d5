// SPDX-License-Identifier: Apache-2.0

//! Finite disjunctions of abstract memories tagged by the control point
//! and branch that produced them.

use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::combined::{Alarm, AlarmKind, Domain, Outcome};
use crate::error::Result;
use crate::lang::{Expr, Field, Label, LocExpr};
use crate::memory::AbstractMem;
use crate::numeric::NumDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Context {
    pub label: Label,
    pub branch: Option<bool>,
}

impl Context {
    pub fn at(label: Label) -> Self {
        Context { label, branch: None }
    }

    pub fn branch(label: Label, b: bool) -> Self {
        Context { label, branch: Some(b) }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.branch {
            None => write!(f, "{}", self.label),
            Some(b) => write!(f, "{}:{b}", self.label),
        }
    }
}

pub type Tagged<N> = (Option<Context>, AbstractMem<N>);

/// An empty list denotes no reachable state.
#[derive(Clone, Debug, PartialEq)]
pub struct DisjState<N> {
    pub items: Vec<Tagged<N>>,
}

impl<N: NumDomain> DisjState<N> {
    pub fn empty() -> Self {
        DisjState { items: Vec::new() }
    }

    pub fn single(m: AbstractMem<N>) -> Self {
        DisjState { items: vec![(None, m)] }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn mems(&self) -> impl Iterator<Item = &AbstractMem<N>> {
        self.items.iter().map(|(_, m)| m)
    }

    pub fn render(&self) -> String {
        if self.items.is_empty() {
            return "⊥\n".to_string();
        }
        let mut s = String::new();
        for (i, (c, m)) in self.items.iter().enumerate() {
            let tag = c.map_or("-".to_string(), |c| c.to_string());
            let _ = writeln!(s, "#{i} [{tag}] {}", m.render());
        }
        s
    }
}

/// Disjunctive operations with a bound on the number of disjuncts.
#[derive(Clone, Copy, Debug)]
pub struct DisjDomain<'a> {
    pub dom: Domain<'a>,
    pub cap: usize,
}

impl<'a> DisjDomain<'a> {
    pub fn new(dom: Domain<'a>, cap: usize) -> Self {
        DisjDomain { dom, cap: cap.max(1) }
    }

    /// Unions the batch; untagged disjuncts receive `c`.
    pub fn partition<N: NumDomain>(&self, c: Context, batch: Vec<DisjState<N>>) -> DisjState<N> {
        let items = batch
            .into_iter()
            .flat_map(|s| s.items)
            .filter(|(_, m)| !m.is_bottom())
            .map(|(t, m)| (t.or(Some(c)), m))
            .collect();
        DisjState { items }
    }

    /// Joins disjuncts until at most `cap` remain, same-context pairs first.
    pub fn collapse<N: NumDomain>(&self, s: DisjState<N>, alarms: &mut Vec<Alarm>) -> Result<DisjState<N>> {
        let mut items = s.items;
        items.retain(|(_, m)| !m.is_bottom());
        // Stable by context, then insertion.
        items.sort_by_key(|(c, _)| *c);
        let mut i = 0;
        while i + 1 < items.len() {
            if items[i].1 == items[i + 1].1 && items[i].0 == items[i + 1].0 {
                items.remove(i + 1);
            } else {
                i += 1;
            }
        }
        while items.len() > self.cap {
            let pos = (0..items.len() - 1).find(|&i| items[i].0 == items[i + 1].0).unwrap_or(items.len() - 2);
            let (_, b) = items.remove(pos + 1);
            let (c, a) = &items[pos];
            let (j, lossy) = a.join(&self.dom, &b, false)?;
            if lossy {
                alarms.push(Alarm { kind: AlarmKind::PrecisionLoss, detail: "disjuncts merged with loss".into() });
            }
            items[pos] = (*c, j);
        }
        Ok(DisjState { items })
    }

    fn lift<N: NumDomain>(
        &self,
        c: Context,
        s: &DisjState<N>,
        f: impl Fn(&AbstractMem<N>) -> Result<Outcome<AbstractMem<N>>>,
    ) -> Result<(DisjState<N>, Vec<Alarm>)> {
        let mut alarms = Vec::new();
        let mut batch = Vec::new();
        for (tag, m) in &s.items {
            let out = f(m)?;
            alarms.extend(out.alarms);
            batch.push(DisjState { items: out.elems.into_iter().map(|e| (*tag, e)).collect() });
        }
        let joined = self.partition(c, batch);
        Ok((self.collapse(joined, &mut alarms)?, alarms))
    }

    pub fn assign<N: NumDomain>(&self, c: Context, s: &DisjState<N>, loc: &LocExpr, e: &Expr) -> Result<(DisjState<N>, Vec<Alarm>)> {
        self.lift(c, s, |m| m.assign(&self.dom, loc, e))
    }

    pub fn alloc<N: NumDomain>(&self, c: Context, s: &DisjState<N>, loc: &LocExpr, fields: &[Field]) -> Result<(DisjState<N>, Vec<Alarm>)> {
        self.lift(c, s, |m| m.alloc(&self.dom, loc, fields))
    }

    pub fn free<N: NumDomain>(&self, c: Context, s: &DisjState<N>, loc: &LocExpr) -> Result<(DisjState<N>, Vec<Alarm>)> {
        self.lift(c, s, |m| m.free(&self.dom, loc))
    }

    /// Guard; every output disjunct is retagged with `c`.
    pub fn guard<N: NumDomain>(&self, c: Context, s: &DisjState<N>, e: &Expr) -> Result<(DisjState<N>, Vec<Alarm>)> {
        let untagged = DisjState { items: s.items.iter().map(|(_, m)| (None, m.clone())).collect() };
        self.lift(c, &untagged, |m| m.guard(&self.dom, e))
    }

    /// Every left disjunct is included in some right disjunct.
    pub fn compare<N: NumDomain>(&self, s0: &DisjState<N>, s1: &DisjState<N>) -> Result<bool> {
        'left: for (_, m0) in &s0.items {
            for (_, m1) in &s1.items {
                if m0.compare(&self.dom, m1)? {
                    continue 'left;
                }
            }
            return Ok(false);
        }
        Ok(true)
    }

    pub fn join<N: NumDomain>(&self, s0: &DisjState<N>, s1: &DisjState<N>) -> Result<(DisjState<N>, Vec<Alarm>)> {
        let mut alarms = Vec::new();
        let mut items = s0.items.clone();
        items.extend(s1.items.iter().cloned());
        Ok((self.collapse(DisjState { items }, &mut alarms)?, alarms))
    }

    /// Widens per context: the right disjuncts of a context are widened
    /// into the left representative of that context.
    pub fn widen<N: NumDomain>(&self, s0: &DisjState<N>, s1: &DisjState<N>) -> Result<(DisjState<N>, Vec<Alarm>)> {
        let mut alarms = Vec::new();
        let left = self.representatives(s0, &mut alarms)?;
        let right = self.representatives(s1, &mut alarms)?;
        let mut items = Vec::new();
        for (c, l) in &left {
            match right.iter().find(|(rc, _)| rc == c) {
                Some((_, r)) => {
                    let (w, lossy) = l.join(&self.dom, r, true)?;
                    if lossy {
                        alarms.push(Alarm { kind: AlarmKind::PrecisionLoss, detail: format!("widening at {}", tag(c)) });
                    }
                    items.push((*c, w));
                }
                None => items.push((*c, l.clone())),
            }
        }
        for (c, r) in right {
            if !left.iter().any(|(lc, _)| *lc == c) {
                items.push((c, r));
            }
        }
        Ok((self.collapse(DisjState { items }, &mut alarms)?, alarms))
    }

    fn representatives<N: NumDomain>(&self, s: &DisjState<N>, alarms: &mut Vec<Alarm>) -> Result<Vec<Tagged<N>>> {
        let mut reps: Vec<Tagged<N>> = Vec::new();
        for (c, m) in &s.items {
            match reps.iter_mut().find(|(rc, _)| rc == c) {
                Some(slot) => {
                    let (j, lossy) = slot.1.join(&self.dom, m, false)?;
                    if lossy {
                        alarms.push(Alarm { kind: AlarmKind::PrecisionLoss, detail: format!("merging at {}", tag(c)) });
                    }
                    slot.1 = j;
                }
                None => reps.push((*c, m.clone())),
            }
        }
        Ok(reps)
    }
}

fn tag(c: &Option<Context>) -> String {
    c.map_or("-".to_string(), |c| c.to_string())
}
