// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapenum::analyzer::{self, Config, FindingKind};
use shapenum::combined::Domain;
use shapenum::concrete::{member_gamma, run_collect, ConcreteEnv, ConcreteState, ConcreteStore, Machine, Verdict};
use shapenum::disjunct::{Context, DisjDomain, DisjState};
use shapenum::lang::{parse_program, pretty_print, Label, Program, StmtKind};
use shapenum::memory::{AbstractMem, Precondition};
use shapenum::numeric::{Intervals, NumDomain, Sym, Zone};
use shapenum::shape::DefTable;

use common::*;

const VARS: [&str; 4] = ["x", "y", "t", "n"];

fn rand_exp(rng: &mut ChaCha8Rng, depth: u32) -> String {
    let v = *VARS.choose(rng).unwrap();
    if depth == 0 {
        return match rng.gen_range(0..6) {
            0 => rng.gen_range(-3..10).to_string(),
            1 => format!("{v}->next"),
            2 => format!("{v}->d"),
            3 => format!("&{v}"),
            _ => v.to_string(),
        };
    }
    let ops = ["+", "-", "==", "!=", "<", "<=", ">", ">="];
    match rng.gen_range(0..4) {
        0 => format!("!({})", rand_exp(rng, depth - 1)),
        1 => format!("({})", rand_exp(rng, depth - 1)),
        _ => format!("{} {} {}", rand_exp(rng, depth - 1), ops.choose(rng).unwrap(), rand_exp(rng, depth - 1)),
    }
}

fn rand_block(rng: &mut ChaCha8Rng, depth: u32, out: &mut String) {
    for _ in 0..rng.gen_range(0..4) {
        let v = *VARS[..3].choose(rng).unwrap();
        let w = *VARS[..3].choose(rng).unwrap();
        let s = match rng.gen_range(0..11) {
            0 => format!("{v} = malloc{{next, d}};"),
            1 => format!("{v}->next = {w};"),
            2 => format!("{v}->d = n;"),
            3 => format!("{v} = {w};"),
            4 => format!("{v} = {v}->next;"),
            5 => "n = n + 1;".to_string(),
            6 => format!("free({v});"),
            7 => format!("{v} = 0;"),
            8 if depth > 0 => {
                let mut a = String::new();
                let mut b = String::new();
                rand_block(rng, depth - 1, &mut a);
                rand_block(rng, depth - 1, &mut b);
                format!("if ({v} != 0) {{ {a} }} else {{ {b} }}")
            }
            9 if depth > 0 => {
                let mut a = String::new();
                rand_block(rng, depth - 1, &mut a);
                format!("while ({v} != 0) {{ {a} {v} = {v}->next; }}")
            }
            _ => format!("assert({} );", rand_exp(rng, 1)),
        };
        out.push_str(&s);
        out.push('\n');
    }
}

fn rand_program(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = String::new();
    rand_block(&mut rng, 2, &mut body);
    format!("var x, y, t, n;\n{body}")
}

fn rand_pre(seed: u64) -> Vec<(String, Precondition)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    VARS.iter()
        .map(|v| {
            let c = match rng.gen_range(0..4) {
                0 if *v != "n" => Precondition::Ind("list".into()),
                1 => Precondition::Null,
                2 => Precondition::Int(0, 2),
                _ => Precondition::Top,
            };
            (v.to_string(), c)
        })
        .collect()
}

fn strip_labels(p: &Program) -> Vec<StmtKind> {
    p.body.flatten().into_iter().map(|s| s.kind.clone()).collect()
}

fn check_numeric<N: NumDomain>(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<Sym> = (0..rng.gen_range(1..=3u32)).map(Sym).collect();
    let a: N = random_num(&mut rng, &dims);
    let b: N = random_num(&mut rng, &dims);
    let j = a.join(&b).unwrap();
    let w = a.widen(&b).unwrap();
    prop_assert!(a.leq(&a).unwrap());
    prop_assert!(a.leq(&j).unwrap() && b.leq(&j).unwrap());
    prop_assert!(a.leq(&w).unwrap() && j.leq(&w).unwrap());
    let g = a.guard(&random_constraint(&mut rng, &dims)).unwrap();
    prop_assert!(g.leq(&a).unwrap());
    prop_assert!(N::bottom(&a.dims()).leq(&a).unwrap());
    Ok(())
}

/// Cells of `store` each matched to one edge: every way of sending edges
/// to distinct cells is tried.
fn brute_force<N: NumDomain>(env: &ConcreteEnv, store: &ConcreteStore, m: &AbstractMem<N>) -> bool {
    let edges: Vec<_> = m.elem.graph.pts().collect();
    let cells: Vec<i64> = store.cells().keys().copied().collect();
    if edges.len() != cells.len() && !m.elem.graph.open {
        return false;
    }
    let mut used = vec![false; cells.len()];
    fn go<N: NumDomain>(
        i: usize,
        edges: &[shapenum::shape::PtEdge],
        cells: &[i64],
        used: &mut [bool],
        nu: &BTreeMap<Sym, i64>,
        store: &ConcreteStore,
        m: &AbstractMem<N>,
        open: bool,
    ) -> bool {
        if i == edges.len() {
            return (open || used.iter().all(|u| *u)) && m.elem.num.satisfiable_with(nu);
        }
        let e = &edges[i];
        for (c, &addr) in cells.iter().enumerate() {
            if used[c] {
                continue;
            }
            let src = addr - e.field.offset();
            let val = store.get(addr).unwrap();
            let mut n = nu.clone();
            if src < 1 || *n.entry(e.src).or_insert(src) != src || *n.entry(e.dst).or_insert(val) != val {
                continue;
            }
            used[c] = true;
            if go(i + 1, edges, cells, used, &n, store, m, open) {
                return true;
            }
            used[c] = false;
        }
        false
    }
    let nu: BTreeMap<Sym, i64> = m.env.iter().map(|(v, a)| (*a, env.addrs[v])).collect();
    go(0, &edges, &cells, &mut used, &nu, store, m, m.elem.graph.open)
}

/// A store matching `m` when possible: block addresses for cell owners,
/// values within the numeric bounds for the rest.
fn concretize<N: NumDomain>(rng: &mut ChaCha8Rng, p: &Program, m: &AbstractMem<N>) -> (ConcreteEnv, ConcreteStore) {
    let st = ConcreteState::initial(p, &[]);
    let mut nu: BTreeMap<Sym, i64> = m.env.iter().map(|(v, a)| (*a, st.env.addrs[v])).collect();
    let mut next = 4096;
    for e in m.elem.graph.pts() {
        nu.entry(e.src).or_insert_with(|| {
            next += 64;
            next
        });
    }
    for n in m.elem.graph.nodes() {
        let itv = m.elem.num.interval_of(*n);
        nu.entry(*n).or_insert_with(|| itv.lo.or(itv.hi).unwrap_or(rng.gen_range(0..3)));
    }
    let mut store = ConcreteStore::new();
    for e in m.elem.graph.pts() {
        store.set(nu[&e.src] + e.field.offset(), nu[&e.dst]);
    }
    if rng.gen_bool(0.4) {
        let cells: Vec<i64> = store.cells().keys().copied().collect();
        let a = *cells.choose(rng).unwrap();
        match rng.gen_range(0..3) {
            0 => store.set(a, store.get(a).unwrap() + 1),
            1 => store.set(a + 100_000, 1),
            _ => store.set(a, 0),
        }
    }
    (st.env, store)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>()) {
        let text = rand_program(seed);
        let p = parse_program(&text).unwrap();
        let printed = pretty_print(&p);
        let q = parse_program(&printed).unwrap();
        prop_assert_eq!(strip_labels(&p), strip_labels(&q));
        prop_assert_eq!(pretty_print(&q), printed);
    }

    #[test]
    fn interval_lattice_laws(seed in any::<u64>()) {
        check_numeric::<Intervals>(seed)?;
    }

    #[test]
    fn zone_lattice_laws(seed in any::<u64>()) {
        check_numeric::<Zone>(seed)?;
    }

    #[test]
    fn concrete_runs_replay(seed in any::<u64>(), k in 0i64..3) {
        let p = parse_program(&rand_program(seed)).unwrap();
        let s = ConcreteState::initial(&p, &[k, 0, 0, k]);
        let a = run_collect(&p, s.env.clone(), s.store.clone(), 100);
        let b = run_collect(&p, s.env, s.store, 100);
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.outcome, b.outcome);
    }

    #[test]
    fn assignment_changes_one_cell(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = parse_program("var x, y, n; x = malloc{next, d}; y = malloc{next, d}; x->next = y; n = 3;").unwrap();
        let s = ConcreteState::initial(&p, &[]);
        let c = run_collect(&p, s.env, s.store, 10);
        let last = c.trace.last().unwrap().clone();
        let lhs = ["x", "y", "n", "x->next", "x->d", "y->d", "x->next->d"];
        let rhs = ["0", "n", "x", "y->d", "n + 1", "&y", "x->next"];
        let text = format!("var x, y, n; {} = {};", lhs.choose(&mut rng).unwrap(), rhs.choose(&mut rng).unwrap());
        let q = parse_program(&text).unwrap();
        let mut m = Machine::new(&q, last.env.clone(), last.store.clone());
        if m.step().is_ok() {
            let before = last.store.cells();
            let after = m.state.store.cells();
            prop_assert_eq!(before.len(), after.len());
            let changed = after.iter().filter(|(a, v)| before.get(a) != Some(v)).count();
            prop_assert!(changed <= 1);
        }
    }

    #[test]
    fn oracle_matches_brute_force_on_exact_graphs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let defs = DefTable::builtin();
        let dom = Domain::new(&defs);
        let p = parse_program(MEM_PROGRAM).unwrap();
        let m = random_mem::<Intervals>(&mut rng, &dom, &p);
        prop_assume!(m.elem.graph.ind_count() == 0 && !m.is_bottom());
        let (env, store) = concretize(&mut rng, &p, &m);
        let v = member_gamma(&env, &store, &m, &defs, 3);
        prop_assert_ne!(v, Verdict::Unknown);
        prop_assert_eq!(v == Verdict::Yes, brute_force(&env, &store, &m));
    }

    #[test]
    fn memory_operations_keep_env_cells(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let defs = DefTable::builtin();
        let dom = Domain::new(&defs);
        let p = parse_program(MEM_PROGRAM).unwrap();
        let m = random_mem::<Zone>(&mut rng, &dom, &p);
        let nodes: BTreeSet<Sym> = m.env.values().copied().collect();
        prop_assert_eq!(nodes.len(), m.env.len());
        for a in m.env.values() {
            prop_assert!(m.elem.graph.pt_at(*a, 0).is_some());
            prop_assert_eq!(m.elem.graph.pts_from(*a).len(), 1);
        }
        prop_assert!(m.elem.consistent());
    }

    #[test]
    fn disjunct_cap_holds(seed in any::<u64>(), cap in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let defs = DefTable::builtin();
        let dd = DisjDomain::new(Domain::new(&defs), cap);
        let p = parse_program(MEM_PROGRAM).unwrap();
        let mk = |rng: &mut ChaCha8Rng| {
            let items = (0..rng.gen_range(0..6))
                .map(|i| (Some(Context::at(Label(i % 3))), random_mem::<Intervals>(rng, &dd.dom, &p)))
                .collect();
            DisjState { items }
        };
        let (a, b) = (mk(&mut rng), mk(&mut rng));
        let (j, _) = dd.join(&a, &b).unwrap();
        let (w, _) = dd.widen(&a, &b).unwrap();
        prop_assert!(j.len() <= cap && w.len() <= cap);
        prop_assert!(dd.compare(&j, &j).unwrap());
    }

    #[test]
    fn analysis_of_random_programs_is_sound(seed in any::<u64>()) {
        let text = rand_program(seed);
        let p = parse_program(&text).unwrap();
        let pre = rand_pre(seed);
        let refs: Vec<(&str, Precondition)> = pre.iter().map(|(v, c)| (v.as_str(), c.clone())).collect();
        let cfg = Config::default();
        let init = DisjState::single(AbstractMem::<Intervals>::init_with(&cfg.domain(&p), &p, &refs).unwrap());
        let res = analyzer::analyze(&p, init.clone(), &cfg).unwrap();
        let inits = analyzer::initial_states(&p, &pre, 3).unwrap();
        let rep = analyzer::cross_check(&p, &init, &res, &inits, 200, 3);
        let bad: Vec<String> = rep
            .findings
            .iter()
            .filter(|f| !matches!(f.kind, FindingKind::Excused | FindingKind::Inconclusive))
            .map(|f| f.to_string())
            .collect();
        prop_assert!(bad.is_empty(), "{}\n{}", text, bad.join("\n"));
    }
}
