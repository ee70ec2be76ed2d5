// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use shapenum::combined::{Combined, Domain};
use shapenum::disjunct::{Context, DisjState};
use shapenum::lang::{BinOp, Expr, Label, LocExpr, Program};
use shapenum::memory::{AbstractMem, Precondition};
use shapenum::numeric::{NumDomain, NumExpr, Sym};

/// Shipped fixture programs as (file name, text), sorted by name.
pub fn fixtures() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/programs");
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .expect("fixture directory")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "sp"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

/// Adds node `αi` to a combined element.
pub fn node<N: NumDomain>(c: &mut Combined<N>, i: u32) -> Sym {
    let s = Sym(i);
    c.graph.add_node(s).unwrap();
    c.num = c.num.add_dim(s).unwrap();
    s
}

/// Mutual inclusion from a root correspondence, with equal node and edge
/// counts: isomorphism up to renaming for these small graphs.
pub fn iso<N: NumDomain>(dom: &Domain, a: &Combined<N>, b: &Combined<N>, roots: &BTreeMap<Sym, Sym>) -> bool {
    let back: BTreeMap<Sym, Sym> = roots.iter().map(|(k, v)| (*v, *k)).collect();
    a.graph.nodes().len() == b.graph.nodes().len()
        && a.graph.pt_count() == b.graph.pt_count()
        && a.graph.ind_count() == b.graph.ind_count()
        && dom.compare(roots, a, b).unwrap().is_some()
        && dom.compare(&back, b, a).unwrap().is_some()
}

pub const MEM_PROGRAM: &str = "var x, y, t, n; x = malloc{next, d};";

fn var(v: &str) -> Expr {
    Expr::var(v)
}

fn first<N: NumDomain>(m: &AbstractMem<N>, out: shapenum::Result<shapenum::combined::Outcome<AbstractMem<N>>>) -> AbstractMem<N> {
    match out {
        Ok(o) => o.elems.into_iter().next().unwrap_or_else(|| m.clone()),
        Err(e) => panic!("transfer function failed: {e}"),
    }
}

/// A well-formed abstract memory over `MEM_PROGRAM`'s variables, built by
/// running random transfer functions from a random precondition.
pub fn random_mem<N: NumDomain>(rng: &mut impl Rng, dom: &Domain, p: &Program) -> AbstractMem<N> {
    let mut pre = Vec::new();
    for v in ["x", "y", "t", "n"] {
        let c = match rng.gen_range(0..4) {
            0 => Precondition::Top,
            1 => Precondition::Null,
            2 => {
                let lo = rng.gen_range(-3..4);
                Precondition::Int(lo, lo + rng.gen_range(0..5))
            }
            _ => Precondition::Ind("list".into()),
        };
        pre.push((v, c));
    }
    let mut m = AbstractMem::<N>::init_with(dom, p, &pre).unwrap();
    let next = p.field("next").unwrap();
    let d = p.field("d").unwrap();
    let fields = [next.clone(), d.clone()];
    let vars = ["x", "y", "t"];
    for _ in 0..rng.gen_range(0..6) {
        let a = *vars.choose(rng).unwrap();
        let b = *vars.choose(rng).unwrap();
        let k = rng.gen_range(-2..6);
        m = match rng.gen_range(0..7) {
            0 => first(&m, m.alloc(dom, &LocExpr::var(a), &fields)),
            1 => first(&m, m.assign(dom, &LocExpr::var(a), &var(b))),
            2 => first(&m, m.assign(dom, &LocExpr::arrow(var(a), next.clone()), &var(b))),
            3 => first(&m, m.assign(dom, &LocExpr::arrow(var(a), d.clone()), &Expr::IntLit(k))),
            4 => first(&m, m.guard(dom, &Expr::bin(BinOp::Ne, var(a), Expr::IntLit(0)))),
            5 => first(&m, m.assign(dom, &LocExpr::var("n"), &Expr::bin(BinOp::Add, var("n"), Expr::IntLit(k)))),
            _ => first(&m, m.guard(dom, &Expr::bin(BinOp::Le, var("n"), Expr::IntLit(k)))),
        };
    }
    m
}

pub const SEQ_PROGRAM: &str = "var x, t, n; x = 0;";

/// One disjunct for an ascending sequence: `x` is null, a list or an
/// exact prefix of `len` cells before a list; `n` lies in `[-lo, hi]`.
pub fn seq_mem<N: NumDomain>(dom: &Domain, p: &Program, shape: u32, len: usize, lo: i64, hi: i64) -> AbstractMem<N> {
    let x = match shape {
        0 => Precondition::Null,
        _ => Precondition::Ind("list".into()),
    };
    let pre = [("x", x), ("t", Precondition::Null), ("n", Precondition::Int(-lo, hi))];
    let mut m = AbstractMem::<N>::init_with(dom, p, &pre).unwrap();
    if shape == 2 {
        let next = p.field("next").unwrap();
        let fields = [next.clone(), p.field("d").unwrap()];
        for _ in 0..len {
            m = first(&m, m.alloc(dom, &LocExpr::var("t"), &fields));
            m = first(&m, m.assign(dom, &LocExpr::arrow(var("t"), next.clone()), &var("x")));
            m = first(&m, m.assign(dom, &LocExpr::var("x"), &var("t")));
        }
        m = first(&m, m.assign(dom, &LocExpr::var("t"), &Expr::IntLit(0)));
    }
    m
}

/// Builds a strictly ascending chain of disjunctive states: each step adds
/// one disjunct and widens the numeric range of `n`.
pub fn ascending_chain<N: NumDomain>(rng: &mut impl Rng, dom: &Domain, p: &Program, steps: usize) -> Vec<DisjState<N>> {
    let contexts = [Context::at(Label(1)), Context::branch(Label(2), true), Context::branch(Label(2), false)];
    let (mut lo, mut hi) = (0, 0);
    let mut items = Vec::new();
    let mut out = Vec::new();
    for _ in 0..steps {
        lo += rng.gen_range(0..3);
        hi += rng.gen_range(1..4);
        let m = seq_mem(dom, p, rng.gen_range(0..3), rng.gen_range(0..4), lo, hi);
        items.push((Some(*contexts.choose(rng).unwrap()), m));
        out.push(DisjState { items: items.clone() });
    }
    out
}

/// Every valuation of `dims` over `range`.
pub fn grid(dims: &BTreeSet<Sym>, range: std::ops::RangeInclusive<i64>) -> Vec<BTreeMap<Sym, i64>> {
    let mut out = vec![BTreeMap::new()];
    for d in dims {
        let mut next = Vec::new();
        for nu in &out {
            for v in range.clone() {
                let mut n = nu.clone();
                n.insert(*d, v);
                next.push(n);
            }
        }
        out = next;
    }
    out
}

const OPS: [BinOp; 6] = [BinOp::Le, BinOp::Ge, BinOp::Lt, BinOp::Gt, BinOp::Eq, BinOp::Ne];

pub fn random_constraint(rng: &mut impl Rng, dims: &[Sym]) -> NumExpr {
    let op = *OPS.choose(rng).unwrap();
    let x = NumExpr::Sym(*dims.choose(rng).unwrap());
    let y = NumExpr::Sym(*dims.choose(rng).unwrap());
    let k = NumExpr::Const(rng.gen_range(-2..6));
    match rng.gen_range(0..4) {
        0 | 1 => NumExpr::bin(op, x, k),
        2 => NumExpr::bin(op, x, y),
        _ => NumExpr::bin(op, NumExpr::bin(BinOp::Sub, x, y), k),
    }
}

pub fn random_value_expr(rng: &mut impl Rng, dims: &[Sym]) -> NumExpr {
    let x = NumExpr::Sym(*dims.choose(rng).unwrap());
    let y = NumExpr::Sym(*dims.choose(rng).unwrap());
    let k = NumExpr::Const(rng.gen_range(-2..6));
    match rng.gen_range(0..5) {
        0 => k,
        1 => NumExpr::bin(BinOp::Add, x, k),
        2 => NumExpr::bin(BinOp::Sub, x, y),
        3 => NumExpr::bin(BinOp::Add, x, y),
        _ => x,
    }
}

/// A random numeric element over 1 to 3 dimensions.
pub fn random_num<N: NumDomain>(rng: &mut impl Rng, dims: &[Sym]) -> N {
    let set: BTreeSet<Sym> = dims.iter().copied().collect();
    let mut n = N::top(&set);
    for _ in 0..rng.gen_range(0..4) {
        n = n.guard(&random_constraint(rng, dims)).unwrap();
    }
    n
}
