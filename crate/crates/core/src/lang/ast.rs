// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::shape::DefTable;

/// Size in bytes of every store cell.
pub const WORD: i64 = 4;

/// Control point of a program. Statement labels start at 1; `Label::EXIT`
/// marks the point after the whole program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Label(pub u32);

impl Label {
    pub const EXIT: Label = Label(0);

    pub fn is_exit(self) -> bool {
        self == Label::EXIT
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exit() {
            write!(f, "exit")
        } else {
            write!(f, "L{}", self.0)
        }
    }
}

/// A named word offset inside a block. The zero field (`∅`) names offset 0
/// with no field name; it is how a variable's own cell is addressed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Field {
    name: Arc<str>,
    offset: i64,
}

impl Field {
    pub fn new(name: &str, offset: i64) -> Self {
        Field {
            name: Arc::from(name),
            offset,
        }
    }

    pub fn zero() -> Self {
        Field::new("", 0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn is_zero(&self) -> bool {
        self.name.is_empty() && self.offset == 0
    }

    /// Offset composition `f + g` used when a field is applied to a location
    /// that already carries an offset.
    pub fn then(&self, g: &Field) -> Field {
        if self.is_zero() {
            return g.clone();
        }
        if g.is_zero() {
            return self.clone();
        }
        Field {
            name: Arc::from(format!("{}.{}", self.name, g.name)),
            offset: self.offset + g.offset,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.name.is_empty() {
            write!(f, "∅")
        } else {
            write!(f, "{}", self.name)
        }
    }
}

/// Maps field names to offsets for a whole program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Layout {
    offsets: BTreeMap<String, i64>,
    loose: i64,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the fields of one block; a field keeps the offset of the
    /// first block that named it.
    pub fn declare_block<S: AsRef<str>>(&mut self, fields: &[S]) {
        for (i, name) in fields.iter().enumerate() {
            self.offsets
                .entry(name.as_ref().to_string())
                .or_insert(i as i64 * WORD);
        }
    }

    /// Registers a field that is only ever used, never allocated.
    pub fn declare_loose(&mut self, name: &str) {
        if !self.offsets.contains_key(name) {
            self.offsets.insert(name.to_string(), self.loose * WORD);
            self.loose += 1;
        }
    }

    pub fn field(&self, name: &str) -> Option<Field> {
        self.offsets.get(name).map(|&off| Field::new(name, off))
    }

    pub fn offsets(&self) -> &BTreeMap<String, i64> {
        &self.offsets
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        !matches!(self, BinOp::Add | BinOp::Sub)
    }

    /// The comparison that holds exactly when `self` fails.
    pub fn negate(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            BinOp::Add | BinOp::Sub => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }

    /// Concrete evaluation; `None` on overflow.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        let truth = |c: bool| Some(c as i64);
        match self {
            BinOp::Add => a.checked_add(b),
            BinOp::Sub => a.checked_sub(b),
            BinOp::Eq => truth(a == b),
            BinOp::Ne => truth(a != b),
            BinOp::Lt => truth(a < b),
            BinOp::Le => truth(a <= b),
            BinOp::Gt => truth(a > b),
            BinOp::Ge => truth(a >= b),
        }
    }
}

/// Location expressions. `V` is the type of variable leaves: program
/// variable names in source programs, symbolic nodes in the abstract layers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LocExpr<V = String> {
    Var(V),
    FieldOf(Box<LocExpr<V>>, Field),
    Deref(Box<Expr<V>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr<V = String> {
    Loc(LocExpr<V>),
    AddrOf(LocExpr<V>),
    IntLit(i64),
    Binary(BinOp, Box<Expr<V>>, Box<Expr<V>>),
    Not(Box<Expr<V>>),
}

impl<V> LocExpr<V> {
    pub fn var(v: impl Into<V>) -> Self {
        LocExpr::Var(v.into())
    }

    pub fn field(self, f: Field) -> Self {
        LocExpr::FieldOf(Box::new(self), f)
    }

    /// `e->f`, i.e. `(*e).f`.
    pub fn arrow(e: Expr<V>, f: Field) -> Self {
        LocExpr::FieldOf(Box::new(LocExpr::Deref(Box::new(e))), f)
    }

    pub fn try_map_vars<W, E>(&self, f: &mut impl FnMut(&V) -> Result<W, E>) -> Result<LocExpr<W>, E> {
        Ok(match self {
            LocExpr::Var(v) => LocExpr::Var(f(v)?),
            LocExpr::FieldOf(l, fld) => LocExpr::FieldOf(Box::new(l.try_map_vars(f)?), fld.clone()),
            LocExpr::Deref(e) => LocExpr::Deref(Box::new(e.try_map_vars(f)?)),
        })
    }

    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a V)) {
        match self {
            LocExpr::Var(v) => f(v),
            LocExpr::FieldOf(l, _) => l.visit_vars(f),
            LocExpr::Deref(e) => e.visit_vars(f),
        }
    }
}

impl<V> Expr<V> {
    pub fn loc(l: LocExpr<V>) -> Self {
        Expr::Loc(l)
    }

    pub fn var(v: impl Into<V>) -> Self {
        Expr::Loc(LocExpr::Var(v.into()))
    }

    pub fn bin(op: BinOp, a: Expr<V>, b: Expr<V>) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn not(e: Expr<V>) -> Self {
        Expr::Not(Box::new(e))
    }

    pub fn try_map_vars<W, E>(&self, f: &mut impl FnMut(&V) -> Result<W, E>) -> Result<Expr<W>, E> {
        Ok(match self {
            Expr::Loc(l) => Expr::Loc(l.try_map_vars(f)?),
            Expr::AddrOf(l) => Expr::AddrOf(l.try_map_vars(f)?),
            Expr::IntLit(n) => Expr::IntLit(*n),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.try_map_vars(f)?), Box::new(b.try_map_vars(f)?)),
            Expr::Not(e) => Expr::Not(Box::new(e.try_map_vars(f)?)),
        })
    }

    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a V)) {
        match self {
            Expr::Loc(l) | Expr::AddrOf(l) => l.visit_vars(f),
            Expr::IntLit(_) => {}
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::Not(e) => e.visit_vars(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub label: Label,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Assign(LocExpr, Expr),
    Malloc(LocExpr, Vec<Field>),
    Free(LocExpr),
    Seq(Box<Stmt>, Box<Stmt>),
    If(Expr, Box<Stmt>, Box<Stmt>),
    While(Expr, Box<Stmt>),
    Assert(Expr),
    /// Body of an empty block.
    Skip,
}

impl Stmt {
    /// Builds an unlabeled statement; `Program::new` numbers labels.
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            label: Label::EXIT,
            kind,
        }
    }

    /// Right-nested sequence of `stmts`, or `Skip` when empty.
    pub fn seq(mut stmts: Vec<Stmt>) -> Self {
        let Some(mut acc) = stmts.pop() else {
            return Stmt::new(StmtKind::Skip);
        };
        while let Some(s) = stmts.pop() {
            acc = Stmt::new(StmtKind::Seq(Box::new(s), Box::new(acc)));
        }
        acc
    }

    /// Flattens nested `Seq` nodes.
    pub fn flatten(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    fn flatten_into<'a>(&'a self, out: &mut Vec<&'a Stmt>) {
        match &self.kind {
            StmtKind::Seq(a, b) => {
                a.flatten_into(out);
                b.flatten_into(out);
            }
            StmtKind::Skip => {}
            _ => out.push(self),
        }
    }

    fn number(&mut self, next: &mut u32) {
        self.label = Label(*next);
        *next += 1;
        match &mut self.kind {
            StmtKind::Seq(a, b) | StmtKind::If(_, a, b) => {
                a.number(next);
                b.number(next);
            }
            StmtKind::While(_, body) => body.number(next),
            _ => {}
        }
    }

    /// Every statement of the tree, in label order.
    pub fn walk(&self) -> Vec<&Stmt> {
        let mut out = vec![self];
        match &self.kind {
            StmtKind::Seq(a, b) | StmtKind::If(_, a, b) => {
                out.extend(a.walk());
                out.extend(b.walk());
            }
            StmtKind::While(_, body) => out.extend(body.walk()),
            _ => {}
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub vars: Vec<String>,
    pub body: Stmt,
    pub layout: Layout,
    pub defs: DefTable,
}

impl Program {
    /// Assembles a program and numbers its statements in preorder.
    pub fn new(vars: Vec<String>, mut body: Stmt, layout: Layout, defs: DefTable) -> Self {
        let mut next = 1;
        body.number(&mut next);
        Program {
            vars,
            body,
            layout,
            defs,
        }
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut labels: Vec<Label> = self.body.walk().iter().map(|s| s.label).collect();
        labels.push(Label::EXIT);
        labels
    }

    pub fn stmt(&self, label: Label) -> Option<&Stmt> {
        self.body.walk().into_iter().find(|s| s.label == label)
    }

    pub fn field(&self, name: &str) -> Option<Field> {
        self.layout.field(name)
    }
}
