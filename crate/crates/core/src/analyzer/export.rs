// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};

use super::AnalysisResult;
use crate::lang::{print_stmt_head, Label, Program};
use crate::memory::AbstractMem;
use crate::numeric::{NumDomain, Sym};
use crate::shape;

fn head(p: &Program, l: Label) -> String {
    match p.stmt(l) {
        Some(s) => print_stmt_head(s),
        None => "end of program".to_string(),
    }
}

pub fn to_text<N: NumDomain>(p: &Program, r: &AnalysisResult<N>) -> String {
    let mut s = String::new();
    for l in p.labels() {
        let _ = writeln!(s, "== {l}: {}", head(p, l));
        s.push_str(&r.states[&l].render());
    }
    s.push_str("== alarms\n");
    for ((l, k), d) in &r.alarms {
        let _ = writeln!(s, "{l} {k}: {d}");
    }
    s.push_str("== asserts\n");
    for (l, ok) in &r.asserts {
        let _ = writeln!(s, "{l} {}", if *ok { "proven" } else { "unproven" });
    }
    s
}

fn mem_json<N: NumDomain>(m: &AbstractMem<N>) -> Value {
    let g = &m.elem.graph;
    let env: BTreeMap<&String, String> = m.env.iter().map(|(v, a)| (v, a.to_string())).collect();
    let nodes: Vec<String> = g.nodes().iter().map(Sym::to_string).collect();
    let pts: Vec<Value> = g
        .pts()
        .map(|e| json!({"src": e.src.to_string(), "field": e.field.name(), "offset": e.field.offset(), "dst": e.dst.to_string()}))
        .collect();
    let inds: Vec<Value> = g.inds().map(|e| json!({"root": e.root.to_string(), "def": e.def})).collect();
    let bounds: BTreeMap<String, Value> = g
        .nodes()
        .iter()
        .map(|n| {
            let i = m.elem.num.interval_of(*n);
            (n.to_string(), json!([i.lo, i.hi]))
        })
        .collect();
    json!({
        "env": env,
        "graph": {"nodes": nodes, "pt_edges": pts, "ind_edges": inds, "open": g.open},
        "num": m.elem.num.render(),
        "bounds": bounds,
    })
}

pub fn to_json<N: NumDomain>(p: &Program, r: &AnalysisResult<N>) -> Value {
    let mut labels = serde_json::Map::new();
    for l in p.labels() {
        let items: Vec<Value> = r.states[&l]
            .items
            .iter()
            .map(|(c, m)| {
                let mut v = mem_json(m);
                v["context"] = c.map_or(Value::Null, |c| Value::String(c.to_string()));
                v
            })
            .collect();
        labels.insert(l.to_string(), Value::Array(items));
    }
    let alarms: Vec<Value> = r
        .alarms
        .iter()
        .map(|((l, k), d)| json!({"label": l.to_string(), "kind": k.to_string(), "detail": d}))
        .collect();
    let asserts: Vec<Value> = r.asserts.iter().map(|(l, ok)| json!({"label": l.to_string(), "proven": ok})).collect();
    json!({"labels": labels, "alarms": alarms, "asserts": asserts})
}

/// One cluster per label and disjunct.
pub fn to_dot<N: NumDomain>(p: &Program, r: &AnalysisResult<N>) -> String {
    let mut s = String::from("digraph analysis {\n  compound=true;\n");
    for l in p.labels() {
        for (i, (_, m)) in r.states[&l].items.iter().enumerate() {
            let names: BTreeMap<Sym, String> = m.env.iter().map(|(v, a)| (*a, v.clone())).collect();
            let prefix = format!("{l}_{i}_");
            let _ = writeln!(s, " subgraph cluster_{l}_{i} {{\n  label=\"{l} #{i}\";");
            s.push_str(&shape::to_dot(&m.elem.graph, &names, &prefix));
            s.push_str(" }\n");
        }
    }
    s.push_str("}\n");
    s
}
