// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use super::store::{ConcreteEnv, ConcreteState, ConcreteStore};
use crate::lang::{Expr, Label, LocExpr, Program, Stmt, StmtKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    NullDeref,
    Unmapped(i64),
    InvalidFree(i64),
    DoubleFree(i64),
    AssertFailed,
    Overflow,
    Undeclared(String),
}

impl RuntimeErrorKind {
    /// Errors the analyzer is expected to report as memory alarms.
    pub fn is_memory_error(&self) -> bool {
        matches!(
            self,
            RuntimeErrorKind::NullDeref | RuntimeErrorKind::Unmapped(_) | RuntimeErrorKind::InvalidFree(_) | RuntimeErrorKind::DoubleFree(_)
        )
    }
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeErrorKind::NullDeref => write!(f, "null dereference"),
            RuntimeErrorKind::Unmapped(a) => write!(f, "unmapped address {a}"),
            RuntimeErrorKind::InvalidFree(a) => write!(f, "free of non-block address {a}"),
            RuntimeErrorKind::DoubleFree(a) => write!(f, "double free of {a}"),
            RuntimeErrorKind::AssertFailed => write!(f, "assertion failed"),
            RuntimeErrorKind::Overflow => write!(f, "arithmetic overflow"),
            RuntimeErrorKind::Undeclared(v) => write!(f, "undeclared variable {v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuntimeError {
    pub label: Label,
    pub kind: RuntimeErrorKind,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "runtime error at {}: {}", self.label, self.kind)
    }
}

type Eval<T> = Result<T, RuntimeErrorKind>;

pub fn eval_loc(env: &ConcreteEnv, store: &ConcreteStore, l: &LocExpr) -> Eval<i64> {
    match l {
        LocExpr::Var(v) => env.addr(v).ok_or_else(|| RuntimeErrorKind::Undeclared(v.clone())),
        LocExpr::FieldOf(inner, f) => eval_loc(env, store, inner)?.checked_add(f.offset()).ok_or(RuntimeErrorKind::Overflow),
        LocExpr::Deref(e) => match eval_exp(env, store, e)? {
            0 => Err(RuntimeErrorKind::NullDeref),
            a => Ok(a),
        },
    }
}

fn read(store: &ConcreteStore, a: i64) -> Eval<i64> {
    match store.get(a) {
        Some(v) => Ok(v),
        None if a == 0 => Err(RuntimeErrorKind::NullDeref),
        None => Err(RuntimeErrorKind::Unmapped(a)),
    }
}

pub fn eval_exp(env: &ConcreteEnv, store: &ConcreteStore, e: &Expr) -> Eval<i64> {
    match e {
        Expr::Loc(l) => read(store, eval_loc(env, store, l)?),
        Expr::AddrOf(l) => eval_loc(env, store, l),
        Expr::IntLit(k) => Ok(*k),
        Expr::Binary(op, a, b) => {
            let (x, y) = (eval_exp(env, store, a)?, eval_exp(env, store, b)?);
            op.apply(x, y).ok_or(RuntimeErrorKind::Overflow)
        }
        Expr::Not(a) => Ok((eval_exp(env, store, a)? == 0) as i64),
    }
}

/// Small-step machine: a continuation stack of statements. Sequences and
/// empty blocks are expanded eagerly, so the top of the stack is always
/// the next statement to execute.
#[derive(Clone, Debug)]
pub struct Machine<'p> {
    stack: Vec<&'p Stmt>,
    pub state: ConcreteState,
}

impl<'p> Machine<'p> {
    pub fn new(p: &'p Program, env: ConcreteEnv, store: ConcreteStore) -> Self {
        let mut m = Machine { stack: vec![&p.body], state: ConcreteState { label: Label::EXIT, env, store } };
        m.normalize();
        m
    }

    pub fn finished(&self) -> bool {
        self.stack.is_empty()
    }

    fn normalize(&mut self) {
        while let Some(top) = self.stack.last() {
            match &top.kind {
                StmtKind::Seq(a, b) => {
                    self.stack.pop();
                    self.stack.push(b);
                    self.stack.push(a);
                }
                StmtKind::Skip => {
                    self.stack.pop();
                }
                _ => break,
            }
        }
        self.state.label = self.stack.last().map_or(Label::EXIT, |s| s.label);
    }

    /// Executes the statement on top of the stack.
    pub fn step(&mut self) -> Result<(), RuntimeError> {
        let Some(s) = self.stack.pop() else {
            return Ok(());
        };
        let err = |kind| RuntimeError { label: s.label, kind };
        let st = &mut self.state;
        match &s.kind {
            StmtKind::Assign(loc, e) => {
                let v = eval_exp(&st.env, &st.store, e).map_err(err)?;
                let a = eval_loc(&st.env, &st.store, loc).map_err(err)?;
                read(&st.store, a).map_err(err)?;
                st.store.set(a, v);
            }
            StmtKind::Malloc(loc, fields) => {
                let a = eval_loc(&st.env, &st.store, loc).map_err(err)?;
                read(&st.store, a).map_err(err)?;
                let offs: Vec<i64> = fields.iter().map(|f| f.offset()).collect();
                let b = st.store.malloc(&offs);
                st.store.set(a, b);
            }
            StmtKind::Free(loc) => {
                let a = eval_loc(&st.env, &st.store, loc).map_err(err)?;
                let b = read(&st.store, a).map_err(err)?;
                if st.store.is_block(b) {
                    st.store.free(b);
                } else if st.store.was_freed(b) {
                    return Err(err(RuntimeErrorKind::DoubleFree(b)));
                } else {
                    return Err(err(RuntimeErrorKind::InvalidFree(b)));
                }
            }
            StmtKind::If(c, t, f) => {
                let v = eval_exp(&st.env, &st.store, c).map_err(err)?;
                self.stack.push(if v != 0 { t } else { f });
            }
            StmtKind::While(c, body) => {
                if eval_exp(&st.env, &st.store, c).map_err(err)? != 0 {
                    self.stack.push(s);
                    self.stack.push(body);
                }
            }
            StmtKind::Assert(c) => {
                if eval_exp(&st.env, &st.store, c).map_err(err)? == 0 {
                    return Err(err(RuntimeErrorKind::AssertFailed));
                }
            }
            StmtKind::Seq(..) | StmtKind::Skip => unreachable!("expanded by normalize"),
        }
        self.normalize();
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Finished,
    OutOfFuel,
    Error(RuntimeError),
}

#[derive(Clone, Debug)]
pub struct Collected {
    pub trace: Vec<ConcreteState>,
    /// Distinct (env, store) pairs seen before executing each label.
    pub per_label: BTreeMap<Label, Vec<(ConcreteEnv, ConcreteStore)>>,
    pub outcome: RunOutcome,
}

/// Runs at most `fuel` steps from `env`/`store`, recording every state.
pub fn run_collect(p: &Program, env: ConcreteEnv, store: ConcreteStore, fuel: usize) -> Collected {
    let mut m = Machine::new(p, env, store);
    let mut trace = vec![m.state.clone()];
    let mut outcome = RunOutcome::OutOfFuel;
    for _ in 0..fuel {
        if m.finished() {
            outcome = RunOutcome::Finished;
            break;
        }
        if let Err(e) = m.step() {
            outcome = RunOutcome::Error(e);
            break;
        }
        trace.push(m.state.clone());
    }
    if outcome == RunOutcome::OutOfFuel && m.finished() {
        outcome = RunOutcome::Finished;
    }
    let mut per_label: BTreeMap<Label, Vec<(ConcreteEnv, ConcreteStore)>> = BTreeMap::new();
    for s in &trace {
        let seen = per_label.entry(s.label).or_default();
        let pair = (s.env.clone(), s.store.clone());
        if !seen.contains(&pair) {
            seen.push(pair);
        }
    }
    Collected { trace, per_label, outcome }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn start(p: &Program, vals: &[i64]) -> (ConcreteEnv, ConcreteStore) {
        let s = ConcreteState::initial(p, vals);
        (s.env, s.store)
    }

    #[test]
    fn straight_line_trace_length() {
        let p = parse_program("var x, y; x = 1; y = x; x = y + 1;").unwrap();
        let (e, s) = start(&p, &[]);
        let c = run_collect(&p, e, s, 10);
        assert_eq!(c.trace.len(), 4);
        assert_eq!(c.outcome, RunOutcome::Finished);
        let last = c.trace.last().unwrap();
        assert!(last.label.is_exit());
        assert_eq!(last.store.get(4), Some(2));
    }

    #[test]
    fn infinite_loop_runs_out_of_fuel() {
        let p = parse_program("var x; while (1) { x = x + 1; }").unwrap();
        let (e, s) = start(&p, &[]);
        let c = run_collect(&p, e, s, 5);
        assert_eq!(c.trace.len(), 6);
        assert_eq!(c.outcome, RunOutcome::OutOfFuel);
    }

    #[test]
    fn list_building_loop() {
        let p = parse_program("var x, t, k; x = 0; while (k != 0) { t = malloc{next, d}; t->next = x; x = t; k = k - 1; }").unwrap();
        let (e, s) = start(&p, &[0, 0, 3]);
        let c = run_collect(&p, e, s, 200);
        assert_eq!(c.outcome, RunOutcome::Finished);
        let end = &c.trace.last().unwrap().store;
        assert_eq!(end.blocks().len(), 3);
        let head = p.stmt(Label(3)).map(|s| s.label).unwrap();
        let sizes: Vec<usize> = c.per_label[&head].iter().map(|(_, s)| s.blocks().len()).collect();
        assert_eq!(sizes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn memory_errors() {
        let cases = [
            ("var x; x = 0; x->next = 1;", RuntimeErrorKind::NullDeref),
            ("var x; x = 8; free(x);", RuntimeErrorKind::InvalidFree(8)),
            ("var x; x = malloc{next}; free(x); free(x);", RuntimeErrorKind::DoubleFree(4096)),
            ("var x; x = malloc{next}; free(x); x->next = 0;", RuntimeErrorKind::Unmapped(4096)),
            ("var x; assert(x == 1);", RuntimeErrorKind::AssertFailed),
        ];
        for (src, kind) in cases {
            let p = parse_program(src).unwrap();
            let (e, s) = start(&p, &[]);
            match run_collect(&p, e, s, 50).outcome {
                RunOutcome::Error(err) => assert_eq!(err.kind, kind, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn eval_basics() {
        let p = parse_program("var x; x = 1;").unwrap();
        let (e, s) = start(&p, &[7]);
        assert_eq!(eval_loc(&e, &s, &LocExpr::var("x")), Ok(4));
        assert_eq!(eval_exp(&e, &s, &Expr::AddrOf(LocExpr::var("x"))), Ok(4));
        assert_eq!(eval_exp(&e, &s, &Expr::bin(crate::lang::BinOp::Add, Expr::IntLit(2), Expr::IntLit(3))), Ok(5));
        assert_eq!(eval_loc(&e, &s, &LocExpr::Deref(Box::new(Expr::IntLit(0)))), Err(RuntimeErrorKind::NullDeref));
    }
}
