// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write;

use super::graph::ShapeGraph;
use crate::numeric::Sym;

/// Graphviz rendering: circles for nodes, thin labeled edges for cells and
/// bold edges for inductive predicates. `names` labels variable address
/// nodes. Node ids are prefixed with `prefix` so several graphs can share
/// one file.
pub fn to_dot(g: &ShapeGraph, names: &BTreeMap<Sym, String>, prefix: &str) -> String {
    let mut out = String::new();
    for n in g.nodes() {
        let label = match names.get(n) {
            Some(v) => format!("{v}@{n}"),
            None => n.to_string(),
        };
        let _ = writeln!(out, "  {prefix}{} [shape=circle, label=\"{label}\"];", n.0);
    }
    for e in g.pts() {
        let _ = writeln!(out, "  {prefix}{} -> {prefix}{} [label=\"{}\"];", e.src.0, e.dst.0, e.field);
    }
    for e in g.inds() {
        let id = format!("{prefix}{}_{}", e.root.0, e.def);
        let _ = writeln!(out, "  {id} [shape=point];");
        let _ = writeln!(out, "  {prefix}{} -> {id} [style=bold, penwidth=3, label=\"{}\"];", e.root.0, e.def);
    }
    if g.open {
        let _ = writeln!(out, "  {prefix}open [shape=plaintext, label=\"…\"];");
    }
    out
}
