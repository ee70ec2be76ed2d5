// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use super::graph::ShapeGraph;
use crate::error::{Error, Result};
use crate::lang::{lex, BinOp, Field, Layout, Tok, Token};
use crate::numeric::{NumExpr, Sym};

/// Built-in definition of singly linked lists with a data field.
pub const LIST_DEF: &str = "ind list(a) := | emp, a == 0 | a.next |-> b0 * a.d |-> b1 * list(b0), a != 0";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleTerm {
    Var(String),
    Const(i64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleAtom {
    pub lhs: String,
    pub op: BinOp,
    pub rhs: RuleTerm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    /// Rule variables other than the formal parameter.
    pub locals: Vec<String>,
    pub pts: Vec<(String, Field, String)>,
    pub inds: Vec<(String, String)>,
    pub constraint: Vec<RuleAtom>,
}

impl Rule {
    pub fn is_empty_heap(&self) -> bool {
        self.pts.is_empty() && self.inds.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InductiveDef {
    pub name: String,
    pub formal: String,
    pub rules: Vec<Rule>,
    /// Some rule has an empty heap, so bounded unfolding can stop.
    pub terminating: bool,
    /// Every rule makes the root null or a block address.
    pub root_nonneg: bool,
}

/// Inductive definitions together with the field layout they induce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefTable {
    defs: BTreeMap<String, InductiveDef>,
    layout: Layout,
}

/// Result of replacing one inductive edge by one rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unfolded {
    pub graph: ShapeGraph,
    pub new_nodes: Vec<Sym>,
    /// The rule's side constraint over the instantiated symbols.
    pub constraint: Vec<NumExpr>,
}

impl Default for DefTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl DefTable {
    pub fn empty() -> Self {
        DefTable { defs: BTreeMap::new(), layout: Layout::new() }
    }

    pub fn builtin() -> Self {
        Self::parse(LIST_DEF).expect("built-in definition parses")
    }

    pub fn get(&self, name: &str) -> Option<&InductiveDef> {
        self.defs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(String::as_str)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn parse(text: &str) -> Result<Self> {
        let toks = lex(text).map_err(|e| Error::Definition(e.to_string()))?;
        let mut p = DefParser { toks: &toks, pos: 0 };
        let mut raw = Vec::new();
        while p.cur().tok != Tok::Eof {
            raw.push(p.def()?);
        }
        let mut layout = Layout::new();
        for d in &raw {
            let mut fields: Vec<&str> = Vec::new();
            for r in &d.rules {
                for (_, f, _) in &r.pts {
                    if !fields.contains(&f.as_str()) {
                        fields.push(f);
                    }
                }
            }
            layout.declare_block(&fields);
        }
        let names: BTreeSet<&str> = raw.iter().map(|d| d.name.as_str()).collect();
        let mut defs = BTreeMap::new();
        for d in &raw {
            let def = d.resolve(&layout, &names)?;
            if defs.insert(def.name.clone(), def).is_some() {
                return Err(Error::Definition(format!("definition '{}' given twice", d.name)));
            }
        }
        Ok(DefTable { defs, layout })
    }

    /// Replaces the edge `def(root)` by each rule in turn.
    pub fn unfold_edge(&self, g: &ShapeGraph, root: Sym, def: &str) -> Result<Vec<Unfolded>> {
        let d = self.get(def).ok_or_else(|| Error::Definition(format!("unknown definition '{def}'")))?;
        if !g.has_ind(root, def) {
            return Err(Error::NoIndEdge(format!("{root}")));
        }
        let mut base = g.clone();
        base.remove_ind(root, def)?;
        d.rules.iter().map(|r| d.instantiate(&base, root, r)).collect()
    }

    /// Unfolds the first inductive edge rooted at `root`.
    pub fn unfold(&self, g: &ShapeGraph, root: Sym) -> Result<Vec<Unfolded>> {
        match g.inds_at(root).first() {
            Some(def) => self.unfold_edge(g, root, def),
            None => Err(Error::NoIndEdge(format!("{root}"))),
        }
    }
}

impl InductiveDef {
    /// Adds the heap of `rule` to `g` with `formal := root`.
    pub fn instantiate(&self, g: &ShapeGraph, root: Sym, rule: &Rule) -> Result<Unfolded> {
        let mut graph = g.clone();
        let mut map = BTreeMap::from([(self.formal.clone(), root)]);
        let mut new_nodes = Vec::new();
        for l in &rule.locals {
            let s = graph.fresh();
            new_nodes.push(s);
            map.insert(l.clone(), s);
        }
        for (src, f, dst) in &rule.pts {
            graph.add_pt(map[src], f.clone(), map[dst])?;
        }
        for (def, r) in &rule.inds {
            graph.add_ind(map[r], def)?;
        }
        let constraint = rule
            .constraint
            .iter()
            .map(|a| {
                let rhs = match &a.rhs {
                    RuleTerm::Var(v) => NumExpr::Sym(map[v]),
                    RuleTerm::Const(k) => NumExpr::Const(*k),
                };
                NumExpr::bin(a.op, NumExpr::Sym(map[&a.lhs]), rhs)
            })
            .collect();
        Ok(Unfolded { graph, new_nodes, constraint })
    }
}

struct RawRule {
    pts: Vec<(String, String, String)>,
    inds: Vec<(String, String)>,
    constraint: Vec<RuleAtom>,
}

struct RawDef {
    name: String,
    formal: String,
    rules: Vec<RawRule>,
}

impl RawDef {
    fn resolve(&self, layout: &Layout, names: &BTreeSet<&str>) -> Result<InductiveDef> {
        let bad = |m: String| Error::Definition(format!("in '{}': {m}", self.name));
        let mut rules = Vec::new();
        for r in &self.rules {
            let mut locals: Vec<String> = Vec::new();
            let mut note = |v: &String| {
                if *v != self.formal && !locals.contains(v) {
                    locals.push(v.clone());
                }
            };
            for (s, _, d) in &r.pts {
                note(s);
                note(d);
            }
            for (_, v) in &r.inds {
                note(v);
            }
            let mut pts = Vec::new();
            let mut cells = BTreeSet::new();
            for (s, f, d) in &r.pts {
                let field = layout.field(f).expect("declared above");
                if !cells.insert((s.clone(), field.offset())) {
                    return Err(bad(format!("cell {s}.{f} appears twice")));
                }
                pts.push((s.clone(), field, d.clone()));
            }
            for (def, _) in &r.inds {
                if !names.contains(def.as_str()) {
                    return Err(bad(format!("unknown definition '{def}'")));
                }
            }
            for a in &r.constraint {
                let mut vars = vec![&a.lhs];
                if let RuleTerm::Var(v) = &a.rhs {
                    vars.push(v);
                }
                for v in vars {
                    if *v != self.formal && !locals.contains(v) {
                        return Err(bad(format!("constraint mentions '{v}', which is not bound by the heap")));
                    }
                }
            }
            rules.push(Rule { locals, pts, inds: r.inds.clone(), constraint: r.constraint.clone() });
        }
        let terminating = rules.iter().any(Rule::is_empty_heap);
        let root_nonneg = rules.iter().all(|r| {
            r.pts.iter().any(|(s, _, _)| *s == self.formal)
                || r.constraint.iter().any(|a| a.lhs == self.formal && a.op == BinOp::Eq && a.rhs == RuleTerm::Const(0))
        });
        Ok(InductiveDef { name: self.name.clone(), formal: self.formal.clone(), rules, terminating, root_nonneg })
    }
}

struct DefParser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> DefParser<'a> {
    fn cur(&self) -> &'a Token {
        &self.toks[self.pos]
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let t = self.cur();
        Error::Definition(format!("{}:{}: {}", t.line, t.col, msg.into()))
    }

    fn is(&self, p: &str) -> bool {
        matches!(self.cur().tok, Tok::Punct(q) if q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        let hit = self.is(p);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect(&mut self, p: &str) -> Result<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{p}'")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match &self.cur().tok {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn def(&mut self) -> Result<RawDef> {
        if self.ident()? != "ind" {
            self.pos -= 1;
            return Err(self.err("expected 'ind'"));
        }
        let name = self.ident()?;
        self.expect("(")?;
        let formal = self.ident()?;
        self.expect(")")?;
        self.expect(":=")?;
        let mut rules = Vec::new();
        while self.eat("|") {
            rules.push(self.rule()?);
        }
        if rules.is_empty() {
            return Err(self.err(format!("definition '{name}' has no rules")));
        }
        Ok(RawDef { name, formal, rules })
    }

    fn rule(&mut self) -> Result<RawRule> {
        let mut r = RawRule { pts: Vec::new(), inds: Vec::new(), constraint: Vec::new() };
        if matches!(&self.cur().tok, Tok::Ident(s) if s == "emp") {
            self.pos += 1;
        } else {
            loop {
                let a = self.ident()?;
                if self.eat("(") {
                    let v = self.ident()?;
                    self.expect(")")?;
                    r.inds.push((a, v));
                } else {
                    self.expect(".")?;
                    let f = self.ident()?;
                    self.expect("|->")?;
                    let d = self.ident()?;
                    r.pts.push((a, f, d));
                }
                if !self.eat("*") {
                    break;
                }
            }
        }
        if self.eat(",") {
            loop {
                let lhs = self.ident()?;
                let op = match self.cur().tok {
                    Tok::Punct("==") => BinOp::Eq,
                    Tok::Punct("!=") => BinOp::Ne,
                    Tok::Punct("<") => BinOp::Lt,
                    Tok::Punct("<=") => BinOp::Le,
                    Tok::Punct(">") => BinOp::Gt,
                    Tok::Punct(">=") => BinOp::Ge,
                    _ => return Err(self.err("expected a comparison; constraints are conjunctions of comparisons")),
                };
                self.pos += 1;
                let neg = self.eat("-");
                let rhs = match &self.cur().tok {
                    Tok::Int(n) => {
                        let v = if neg { -*n } else { *n };
                        self.pos += 1;
                        RuleTerm::Const(i64::try_from(v).map_err(|_| self.err("constant out of range"))?)
                    }
                    Tok::Ident(s) if !neg => {
                        let s = s.clone();
                        self.pos += 1;
                        RuleTerm::Var(s)
                    }
                    _ => return Err(self.err("expected a variable or constant")),
                };
                r.constraint.push(RuleAtom { lhs, op, rhs });
                if !self.eat("&&") {
                    break;
                }
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_list() {
        let t = DefTable::builtin();
        let l = t.get("list").unwrap();
        assert_eq!(l.rules.len(), 2);
        assert!(l.terminating && l.root_nonneg);
        assert_eq!(t.layout().field("next").unwrap().offset(), 0);
        assert_eq!(t.layout().field("d").unwrap().offset(), 4);
        assert_eq!(l.rules[1].locals, vec!["b0".to_string(), "b1".to_string()]);
    }

    #[test]
    fn unfold_gives_one_result_per_rule() {
        let t = DefTable::builtin();
        let mut g = ShapeGraph::new();
        let (x, b) = (g.fresh(), g.fresh());
        g.add_pt(x, Field::zero(), b).unwrap();
        g.add_ind(b, "list").unwrap();
        let out = t.unfold(&g, b).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].graph.edge_count(), 1);
        assert_eq!(out[0].constraint, vec![NumExpr::cmp(b, BinOp::Eq, 0)]);
        assert_eq!(out[1].graph.pt_count(), 3);
        assert!(out[1].graph.has_ind(out[1].new_nodes[0], "list"));
        assert_eq!(out[1].constraint, vec![NumExpr::cmp(b, BinOp::Ne, 0)]);
        assert!(matches!(t.unfold(&g, x), Err(Error::NoIndEdge(_))));
    }

    #[test]
    fn rejects_bad_definitions() {
        assert!(DefTable::parse("ind t(a) := | a.l |-> b * u(b)").is_err());
        assert!(DefTable::parse("ind t(a) := | emp, c == 0").is_err());
        assert!(DefTable::parse("ind t(a) := | emp, a * 2").is_err());
        assert!(DefTable::parse("ind t(a) :=").is_err());
        let tree = DefTable::parse("ind tree(a) := | emp, a == 0 | a.l |-> b * a.r |-> c * tree(b) * tree(c), a != 0").unwrap();
        assert_eq!(tree.layout().field("r").unwrap().offset(), 4);
    }
}
