// SPDX-License-Identifier: Apache-2.0

//! Abstract interpreter over program syntax, result export and a
//! cross-check against concrete runs.

mod check;
mod export;

use std::collections::BTreeMap;

use crate::combined::{Alarm, AlarmKind, Domain, DomainConfig};
use crate::disjunct::{Context, DisjDomain, DisjState};
use crate::error::{Error, Result};
use crate::lang::{Expr, Label, Program, Stmt, StmtKind};
use crate::memory::{AbstractMem, Precondition};
use crate::numeric::NumDomain;

pub use check::{cross_check, initial_states, parse_pre, parse_pre_directives, CheckReport, Finding, FindingKind};
pub use export::{to_dot, to_json, to_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Config {
    pub unfold_bound: usize,
    pub widen_delay: usize,
    pub max_disjuncts: usize,
    pub oracle_depth: usize,
    pub widen_nodes: usize,
    pub compare_budget: usize,
    pub max_iterations: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            unfold_bound: 3,
            widen_delay: 1,
            max_disjuncts: 4,
            oracle_depth: 3,
            widen_nodes: 12,
            compare_budget: 8,
            max_iterations: 1000,
        }
    }
}

impl Config {
    pub fn domain<'a>(&self, p: &'a Program) -> Domain<'a> {
        Domain {
            defs: &p.defs,
            cfg: DomainConfig {
                unfold_budget: self.unfold_bound,
                compare_budget: self.compare_budget,
                widen_nodes: self.widen_nodes,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisResult<N> {
    /// State before each statement; at a loop head, the loop invariant.
    pub states: BTreeMap<Label, DisjState<N>>,
    /// First detail reported for each (label, kind).
    pub alarms: BTreeMap<(Label, AlarmKind), String>,
    /// Whether each assertion was proven.
    pub asserts: BTreeMap<Label, bool>,
    /// Iterations each loop needed to stabilize (the most over all visits).
    pub loop_iterations: BTreeMap<Label, usize>,
}

impl<N: NumDomain> AnalysisResult<N> {
    pub fn has_memory_alarm(&self, l: Label) -> bool {
        self.alarms.keys().any(|(al, k)| *al == l && k.is_memory_error())
    }

    pub fn all_asserts_proven(&self) -> bool {
        self.asserts.values().all(|b| *b)
    }

    pub fn exit(&self) -> &DisjState<N> {
        &self.states[&Label::EXIT]
    }
}

/// Analyzes `p` from the initial memory built with `pre`.
pub fn analyze_with<N: NumDomain>(p: &Program, pre: &[(&str, Precondition)], cfg: &Config) -> Result<AnalysisResult<N>> {
    let m = AbstractMem::init_with(&cfg.domain(p), p, pre)?;
    analyze(p, DisjState::single(m), cfg)
}

pub fn analyze<N: NumDomain>(p: &Program, init: DisjState<N>, cfg: &Config) -> Result<AnalysisResult<N>> {
    let mut a = Analyzer {
        dd: DisjDomain::new(cfg.domain(p), cfg.max_disjuncts),
        cfg: *cfg,
        res: AnalysisResult {
            states: BTreeMap::new(),
            alarms: BTreeMap::new(),
            asserts: BTreeMap::new(),
            loop_iterations: BTreeMap::new(),
        },
    };
    for l in p.labels() {
        a.res.states.insert(l, DisjState::empty());
    }
    let out = a.exec(&p.body, init)?;
    a.res.states.insert(Label::EXIT, out);
    Ok(a.res)
}

struct Analyzer<'a, N> {
    dd: DisjDomain<'a>,
    cfg: Config,
    res: AnalysisResult<N>,
}

impl<N: NumDomain> Analyzer<'_, N> {
    fn note(&mut self, l: Label, alarms: Vec<Alarm>) {
        for a in alarms {
            self.res.alarms.entry((l, a.kind)).or_insert(a.detail);
        }
    }

    fn exec(&mut self, s: &Stmt, x: DisjState<N>) -> Result<DisjState<N>> {
        let l = s.label;
        self.res.states.insert(l, x.clone());
        let ctx = Context::at(l);
        let (out, alarms) = match &s.kind {
            StmtKind::Assign(loc, e) => self.dd.assign(ctx, &x, loc, e)?,
            StmtKind::Malloc(loc, fields) => self.dd.alloc(ctx, &x, loc, fields)?,
            StmtKind::Free(loc) => self.dd.free(ctx, &x, loc)?,
            StmtKind::Skip => return Ok(x),
            StmtKind::Seq(a, b) => {
                let y = self.exec(a, x)?;
                return self.exec(b, y);
            }
            StmtKind::If(c, t, f) => {
                let (xt, at) = self.dd.guard(Context::branch(l, true), &x, c)?;
                let (xf, af) = self.dd.guard(Context::branch(l, false), &x, &Expr::not(c.clone()))?;
                self.note(l, at);
                self.note(l, af);
                let yt = self.exec(t, xt)?;
                let yf = self.exec(f, xf)?;
                self.dd.join(&yt, &yf)?
            }
            StmtKind::While(c, body) => {
                let inv = self.lfp(l, c, body, x)?;
                self.res.states.insert(l, inv.clone());
                self.dd.guard(Context::branch(l, false), &inv, &Expr::not(c.clone()))?
            }
            StmtKind::Assert(c) => {
                let (bad, alarms) = self.dd.guard(ctx, &x, &Expr::not(c.clone()))?;
                let proven = bad.is_empty() && alarms.is_empty();
                let entry = self.res.asserts.entry(l).or_insert(true);
                *entry = proven;
                (x, alarms)
            }
        };
        self.note(l, alarms);
        Ok(out)
    }

    /// Post-fixpoint of `X ↦ X0 ⊔ body(guard(c, X))`: plain joins for the
    /// first `widen_delay` rounds, widening afterwards.
    fn lfp(&mut self, l: Label, c: &Expr, body: &Stmt, x0: DisjState<N>) -> Result<DisjState<N>> {
        let mut x = x0;
        for k in 0..self.cfg.max_iterations {
            let (g, alarms) = self.dd.guard(Context::branch(l, true), &x, c)?;
            self.note(l, alarms);
            let y = self.exec(body, g)?;
            if self.dd.compare(&y, &x)? {
                let it = self.res.loop_iterations.entry(l).or_insert(0);
                *it = (*it).max(k + 1);
                return Ok(x);
            }
            let (next, alarms) = if k < self.cfg.widen_delay { self.dd.join(&x, &y)? } else { self.dd.widen(&x, &y)? };
            self.note(l, alarms);
            x = next;
        }
        Err(Error::IterationBudget(self.cfg.max_iterations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::numeric::{Intervals, Itv};

    fn content_range(r: &AnalysisResult<Intervals>, l: Label, v: &str) -> Itv {
        let s = &r.states[&l];
        s.mems().map(|m| m.elem.num.interval_of(m.content(v).unwrap())).reduce(|a, b| a.join(&b)).unwrap()
    }

    #[test]
    fn straight_line_constants() {
        let p = parse_program("var x, y; x = 1; y = x;").unwrap();
        let r = analyze_with::<Intervals>(&p, &[], &Config::default()).unwrap();
        assert_eq!(content_range(&r, Label::EXIT, "x"), Itv::cst(1));
        assert_eq!(content_range(&r, Label::EXIT, "y"), Itv::cst(1));
    }

    #[test]
    fn branches_join_to_hull() {
        let p = parse_program("var x, y; if (x == 0) { y = 1; } else { y = 2; }").unwrap();
        let r = analyze_with::<Intervals>(&p, &[], &Config::default()).unwrap();
        assert_eq!(content_range(&r, Label::EXIT, "y"), Itv::new(1, 2));
    }

    #[test]
    fn counter_loop_exit() {
        let p = parse_program("var i; i = 0; while (i < 10) { i = i + 1; }").unwrap();
        let r = analyze_with::<Intervals>(&p, &[], &Config::default()).unwrap();
        let head = content_range(&r, Label(3), "i");
        assert!(Itv::new(0, 10).leq(&head));
        assert!(content_range(&r, Label::EXIT, "i").contains(10));
        assert!(content_range(&r, Label::EXIT, "i").lo.is_some_and(|lo| lo >= 10));
    }

    #[test]
    fn identity_body_stabilizes_at_once() {
        let p = parse_program("var x; while (x != 0) { }").unwrap();
        let r = analyze_with::<Intervals>(&p, &[], &Config::default()).unwrap();
        assert_eq!(r.loop_iterations[&Label(1)], 1);
    }

    #[test]
    fn asserts() {
        let p = parse_program("var x; x = 1; assert(1 == 1); if (x != 0) { assert(x != 0); } x = x - 1; assert(x == 1);").unwrap();
        let r = analyze_with::<Intervals>(&p, &[], &Config::default()).unwrap();
        let v: Vec<bool> = r.asserts.values().copied().collect();
        assert_eq!(v, vec![true, true, false]);
        let q = parse_program("var x; if (x == 0) { x = 0; } else { x = 1; } assert(x == 1);").unwrap();
        let r = analyze_with::<Intervals>(&q, &[], &Config::default()).unwrap();
        assert!(!r.all_asserts_proven());
    }

    #[test]
    fn list_traversal_invariant() {
        let p = parse_program("var x; while (x != 0) { x = x->next; }").unwrap();
        let pre = [("x", Precondition::Ind("list".into()))];
        let r = analyze_with::<Intervals>(&p, &pre, &Config::default()).unwrap();
        let head = &r.states[&Label(1)];
        assert!(head.mems().all(|m| m.elem.graph.has_ind(m.content("x").unwrap(), "list")));
        assert_eq!(content_range(&r, Label::EXIT, "x"), Itv::cst(0));
        assert!(!r.alarms.keys().any(|(_, k)| k.is_memory_error()), "{:?}", r.alarms);
    }
}
