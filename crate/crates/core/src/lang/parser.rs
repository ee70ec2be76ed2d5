// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use crate::error::{Error, Result};
use crate::shape::DefTable;

const KEYWORDS: &[&str] = &["var", "if", "else", "while", "free", "assert", "malloc"];

/// Parses a program against the built-in `list` definition.
pub fn parse_program(text: &str) -> Result<Program> {
    parse_program_with_defs(text, DefTable::builtin())
}

pub fn parse_program_with_defs(text: &str, defs: DefTable) -> Result<Program> {
    let toks = lex(text)?;
    let layout = scan_layout(&toks, &defs)?;
    let mut p = Parser { toks: &toks, pos: 0, layout: &layout, vars: BTreeSet::new() };
    let mut vars = Vec::new();
    while p.peek_ident("var") {
        p.bump();
        loop {
            let (name, tok) = p.ident()?;
            if !p.vars.insert(name.clone()) {
                return Err(p.err_at(&tok, format!("variable '{name}' declared twice")));
            }
            vars.push(name);
            if !p.eat(",") {
                break;
            }
        }
        p.expect(";")?;
    }
    let mut stmts = Vec::new();
    while p.cur().tok != Tok::Eof {
        stmts.push(p.stmt()?);
    }
    Ok(Program::new(vars, Stmt::seq(stmts), layout, defs))
}

/// Field offsets are fixed before parsing: definition fields, then malloc
/// lists in text order, then fields that only appear after `.` or `->`.
fn scan_layout(toks: &[Token], defs: &DefTable) -> Result<Layout> {
    let mut layout = defs.layout().clone();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].tok == Tok::Ident("malloc".into()) && toks.get(i + 1).map(|t| &t.tok) == Some(&Tok::Punct("{")) {
            let mut names = Vec::new();
            let mut j = i + 2;
            while let Some(Token { tok: Tok::Ident(n), .. }) = toks.get(j) {
                names.push(n.clone());
                j += 1;
                if toks.get(j).map(|t| &t.tok) == Some(&Tok::Punct(",")) {
                    j += 1;
                }
            }
            layout.declare_block(&names);
            let offs: BTreeSet<i64> = names.iter().filter_map(|n| layout.field(n)).map(|f| f.offset()).collect();
            let distinct: BTreeSet<&String> = names.iter().collect();
            if offs.len() != distinct.len() {
                let t = &toks[i];
                return Err(Error::Syntax {
                    line: t.line,
                    col: t.col,
                    msg: format!("fields {{{}}} do not have distinct offsets", names.join(", ")),
                });
            }
            i = j;
        }
        i += 1;
    }
    for w in toks.windows(2) {
        if let (Tok::Punct("." | "->"), Tok::Ident(n)) = (&w[0].tok, &w[1].tok) {
            layout.declare_loose(n);
        }
    }
    Ok(layout)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    layout: &'a Layout,
    vars: BTreeSet<String>,
}

impl<'a> Parser<'a> {
    fn cur(&self) -> &'a Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, t: &Token, msg: String) -> Error {
        Error::Syntax { line: t.line, col: t.col, msg }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        self.err_at(self.cur(), msg.into())
    }

    fn is(&self, p: &str) -> bool {
        matches!(self.cur().tok, Tok::Punct(q) if q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{p}', found {}", describe(&self.cur().tok))))
        }
    }

    fn peek_ident(&self, kw: &str) -> bool {
        matches!(&self.cur().tok, Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<(String, &'a Token)> {
        let t = self.cur();
        match &t.tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok((s.clone(), t))
            }
            other => Err(self.err(format!("expected identifier, found {}", describe(other)))),
        }
    }

    fn field(&mut self) -> Result<Field> {
        let (name, tok) = self.ident()?;
        self.layout
            .field(&name)
            .ok_or_else(|| self.err_at(tok, format!("unknown field '{name}'")))
    }

    fn block(&mut self) -> Result<Stmt> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.is("}") {
            if self.cur().tok == Tok::Eof {
                return Err(self.err("unterminated block"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(Stmt::seq(stmts))
    }

    fn paren_expr(&mut self) -> Result<Expr> {
        self.expect("(")?;
        let e = self.expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let kind = if self.peek_ident("if") {
            self.bump();
            let c = self.paren_expr()?;
            let t = self.block()?;
            let f = if self.peek_ident("else") {
                self.bump();
                self.block()?
            } else {
                Stmt::new(StmtKind::Skip)
            };
            StmtKind::If(c, Box::new(t), Box::new(f))
        } else if self.peek_ident("while") {
            self.bump();
            let c = self.paren_expr()?;
            StmtKind::While(c, Box::new(self.block()?))
        } else if self.peek_ident("free") {
            self.bump();
            let start = self.cur();
            let e = self.paren_expr()?;
            self.expect(";")?;
            StmtKind::Free(self.as_loc(e, start)?)
        } else if self.peek_ident("assert") {
            self.bump();
            let e = self.paren_expr()?;
            self.expect(";")?;
            StmtKind::Assert(e)
        } else {
            let start = self.cur();
            let lhs = self.expr()?;
            let loc = self.as_loc(lhs, start)?;
            self.expect("=")?;
            let kind = if self.peek_ident("malloc") {
                self.bump();
                self.expect("{")?;
                let mut fields = Vec::new();
                if !self.is("}") {
                    loop {
                        fields.push(self.field()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect("}")?;
                StmtKind::Malloc(loc, fields)
            } else {
                StmtKind::Assign(loc, self.expr()?)
            };
            self.expect(";")?;
            kind
        };
        Ok(Stmt::new(kind))
    }

    fn as_loc(&self, e: Expr, at: &Token) -> Result<LocExpr> {
        match e {
            Expr::Loc(l) => Ok(l),
            _ => Err(self.err_at(at, "expected a location".into())),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.cur().tok {
                Tok::Punct("==") => BinOp::Eq,
                Tok::Punct("!=") => BinOp::Ne,
                Tok::Punct("<") => BinOp::Lt,
                Tok::Punct("<=") => BinOp::Le,
                Tok::Punct(">") => BinOp::Gt,
                Tok::Punct(">=") => BinOp::Ge,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.additive()?);
        }
    }

    fn additive(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.cur().tok {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        let start = self.cur();
        if self.eat("!") {
            return Ok(Expr::not(self.unary()?));
        }
        if self.eat("&") {
            let e = self.unary()?;
            return Ok(Expr::AddrOf(self.as_loc(e, start)?));
        }
        if self.eat("*") {
            return Ok(Expr::Loc(LocExpr::Deref(Box::new(self.unary()?))));
        }
        if self.eat("-") {
            return match self.cur().tok {
                Tok::Int(n) => {
                    self.bump();
                    i64::try_from(-n)
                        .map(Expr::IntLit)
                        .map_err(|_| self.err_at(start, "integer literal out of range".into()))
                }
                _ => Err(self.err("unary minus applies only to integer literals")),
            };
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        loop {
            let at = self.cur();
            if self.eat(".") {
                let f = self.field()?;
                e = Expr::Loc(self.as_loc(e, at)?.field(f));
            } else if self.eat("->") {
                let f = self.field()?;
                e = Expr::Loc(LocExpr::arrow(e, f));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.cur();
        match &t.tok {
            Tok::Int(n) => {
                self.bump();
                i64::try_from(*n)
                    .map(Expr::IntLit)
                    .map_err(|_| self.err_at(t, "integer literal out of range".into()))
            }
            Tok::Punct("(") => self.paren_expr(),
            Tok::Ident(_) => {
                let (name, tok) = self.ident()?;
                if !self.vars.contains(&name) {
                    return Err(self.err_at(tok, format!("undeclared variable '{name}'")));
                }
                Ok(Expr::var(name))
            }
            other => Err(self.err(format!("expected expression, found {}", describe(other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Int(n) => format!("'{n}'"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".into(),
    }
}
