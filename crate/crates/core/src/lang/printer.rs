// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::ast::*;

// Binding strength: comparisons < additive < prefix operators < postfix/atoms.
const CMP: u8 = 0;
const ADD: u8 = 1;
const PREFIX: u8 = 2;
const ATOM: u8 = 3;

fn level<V>(e: &Expr<V>) -> u8 {
    match e {
        Expr::Binary(op, ..) if op.is_comparison() => CMP,
        Expr::Binary(..) => ADD,
        Expr::Not(_) | Expr::AddrOf(_) | Expr::Loc(LocExpr::Deref(_)) => PREFIX,
        Expr::IntLit(n) if *n < 0 => PREFIX,
        _ => ATOM,
    }
}

fn expr_at<V: std::fmt::Display>(e: &Expr<V>, min: u8, out: &mut String) {
    let paren = level(e) < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Loc(l) => loc_at(l, out),
        Expr::AddrOf(l) => {
            out.push('&');
            loc_at(l, out);
        }
        Expr::IntLit(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Binary(op, a, b) => {
            let lv = level(e);
            expr_at(a, lv, out);
            let _ = write!(out, " {} ", op.symbol());
            expr_at(b, lv + 1, out);
        }
        Expr::Not(inner) => {
            out.push('!');
            expr_at(inner, PREFIX, out);
        }
    }
    if paren {
        out.push(')');
    }
}

fn loc_at<V: std::fmt::Display>(l: &LocExpr<V>, out: &mut String) {
    match l {
        LocExpr::Var(v) => {
            let _ = write!(out, "{v}");
        }
        LocExpr::FieldOf(base, f) => {
            match &**base {
                LocExpr::Deref(e) => {
                    expr_at(e, ATOM, out);
                    out.push_str("->");
                }
                other => {
                    loc_at(other, out);
                    out.push('.');
                }
            }
            out.push_str(f.name());
        }
        LocExpr::Deref(e) => {
            out.push('*');
            expr_at(e, PREFIX, out);
        }
    }
}

pub fn print_expr<V: std::fmt::Display>(e: &Expr<V>) -> String {
    let mut s = String::new();
    expr_at(e, CMP, &mut s);
    s
}

pub fn print_loc<V: std::fmt::Display>(l: &LocExpr<V>) -> String {
    let mut s = String::new();
    loc_at(l, &mut s);
    s
}

fn stmt(s: &Stmt, indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    match &s.kind {
        StmtKind::Seq(..) => {
            for part in s.flatten() {
                stmt(part, indent, out);
            }
        }
        StmtKind::Skip => {}
        StmtKind::Assign(l, e) => {
            let _ = writeln!(out, "{pad}{} = {};", print_loc(l), print_expr(e));
        }
        StmtKind::Malloc(l, fs) => {
            let names: Vec<&str> = fs.iter().map(|f| f.name()).collect();
            let _ = writeln!(out, "{pad}{} = malloc{{{}}};", print_loc(l), names.join(", "));
        }
        StmtKind::Free(l) => {
            let _ = writeln!(out, "{pad}free({});", print_loc(l));
        }
        StmtKind::If(c, t, f) => {
            let _ = writeln!(out, "{pad}if ({}) {{", print_expr(c));
            stmt(t, indent + 1, out);
            let _ = writeln!(out, "{pad}}} else {{");
            stmt(f, indent + 1, out);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::While(c, body) => {
            let _ = writeln!(out, "{pad}while ({}) {{", print_expr(c));
            stmt(body, indent + 1, out);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "{pad}assert({});", print_expr(e));
        }
    }
}

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    if !p.vars.is_empty() {
        let _ = writeln!(out, "var {};", p.vars.join(", "));
    }
    stmt(&p.body, 0, &mut out);
    out
}

/// Prints a single statement, without the statements nested in it.
pub fn print_stmt_head(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::If(c, ..) => format!("if ({})", print_expr(c)),
        StmtKind::While(c, _) => format!("while ({})", print_expr(c)),
        StmtKind::Seq(..) => "seq".into(),
        StmtKind::Skip => "skip".into(),
        _ => {
            let mut out = String::new();
            stmt(s, 0, &mut out);
            out.trim_end().to_string()
        }
    }
}
