// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::AnalysisResult;
use crate::concrete::{build_instance, member_gamma, run_collect, ConcreteEnv, ConcreteState, ConcreteStore, RunOutcome, RuntimeErrorKind, Verdict};
use crate::disjunct::DisjState;
use crate::error::{Error, Result};
use crate::lang::{Label, Program};
use crate::memory::Precondition;
use crate::numeric::NumDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FindingKind {
    /// A concrete state the analysis result does not describe.
    Rejected,
    /// The oracle hit its depth bound without finding a match.
    Inconclusive,
    /// Rejected, but the analyzer raised a memory alarm earlier on the run.
    Excused,
    /// A concrete memory error at a label without a matching alarm.
    UnreportedError,
    /// An assertion reported as proven failed concretely.
    FailedProvenAssert,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub kind: FindingKind,
    pub run: usize,
    pub label: Label,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run {} at {}: {:?}: {}", self.run, self.label, self.kind, self.detail)
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub runs: usize,
    /// Runs whose initial state the initial abstract state rejects.
    pub skipped: usize,
    pub states_checked: usize,
    pub accepted: usize,
    pub concrete_errors: usize,
    pub findings: Vec<Finding>,
}

impl CheckReport {
    pub fn count(&self, k: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == k).count()
    }

    pub fn violations(&self) -> usize {
        self.count(FindingKind::Rejected) + self.count(FindingKind::UnreportedError) + self.count(FindingKind::FailedProvenAssert)
    }

    pub fn is_sound(&self) -> bool {
        self.violations() == 0
    }
}

fn verdict_in<N: NumDomain>(env: &ConcreteEnv, store: &ConcreteStore, s: &DisjState<N>, p: &Program, depth: usize) -> Verdict {
    let mut out = Verdict::No;
    for m in s.mems() {
        match member_gamma(env, store, m, &p.defs, depth) {
            Verdict::Yes => return Verdict::Yes,
            Verdict::Unknown => out = Verdict::Unknown,
            Verdict::No => {}
        }
    }
    out
}

/// Runs `p` concretely from each initial state and checks every visited
/// state against the analysis result at its label.
pub fn cross_check<N: NumDomain>(
    p: &Program,
    init: &DisjState<N>,
    res: &AnalysisResult<N>,
    inits: &[(ConcreteEnv, ConcreteStore)],
    fuel: usize,
    depth: usize,
) -> CheckReport {
    let mut rep = CheckReport::default();
    let mut cache: HashMap<(Label, ConcreteEnv, ConcreteStore), Verdict> = HashMap::new();
    for (run, (env, store)) in inits.iter().enumerate() {
        if verdict_in(env, store, init, p, depth) != Verdict::Yes {
            rep.skipped += 1;
            continue;
        }
        rep.runs += 1;
        let c = run_collect(p, env.clone(), store.clone(), fuel);
        let mut visited: BTreeSet<Label> = BTreeSet::new();
        for st in &c.trace {
            rep.states_checked += 1;
            let key = (st.label, st.env.clone(), st.store.clone());
            let v = *cache.entry(key).or_insert_with(|| verdict_in(&st.env, &st.store, &res.states[&st.label], p, depth));
            let earlier_alarm = visited.iter().any(|l| res.has_memory_alarm(*l));
            let kind = match v {
                Verdict::Yes => None,
                _ if earlier_alarm => Some(FindingKind::Excused),
                Verdict::Unknown => Some(FindingKind::Inconclusive),
                Verdict::No => Some(FindingKind::Rejected),
            };
            match kind {
                None => rep.accepted += 1,
                Some(kind) => rep.findings.push(Finding { kind, run, label: st.label, detail: short(st) }),
            }
            visited.insert(st.label);
        }
        if let RunOutcome::Error(e) = &c.outcome {
            rep.concrete_errors += 1;
            let missed = match &e.kind {
                RuntimeErrorKind::AssertFailed => res.asserts.get(&e.label).copied().unwrap_or(false).then_some(FindingKind::FailedProvenAssert),
                k if k.is_memory_error() => (!res.has_memory_alarm(e.label)).then_some(FindingKind::UnreportedError),
                _ => None,
            };
            if let Some(kind) = missed {
                rep.findings.push(Finding { kind, run, label: e.label, detail: e.kind.to_string() });
            }
        }
    }
    rep
}

fn short(s: &ConcreteState) -> String {
    let text = s.to_string();
    match text.char_indices().nth(160) {
        Some((i, _)) => format!("{}…", &text[..i]),
        None => text,
    }
}

/// Parses `x=list`, `x=null`, `x=top` or `x=LO..HI`.
pub fn parse_pre(item: &str) -> Result<(String, Precondition)> {
    let bad = || Error::Definition(format!("bad precondition '{item}'"));
    let (v, k) = item.split_once('=').ok_or_else(bad)?;
    let (v, k) = (v.trim(), k.trim());
    if v.is_empty() || k.is_empty() {
        return Err(bad());
    }
    let cond = match k {
        "top" => Precondition::Top,
        "null" => Precondition::Null,
        _ => match k.split_once("..") {
            Some((lo, hi)) => {
                let lo = lo.trim().parse().map_err(|_| bad())?;
                let hi = hi.trim().parse().map_err(|_| bad())?;
                Precondition::Int(lo, hi)
            }
            None => Precondition::Ind(k.to_string()),
        },
    };
    Ok((v.to_string(), cond))
}

/// Collects `//@pre x=list` lines from program text.
pub fn parse_pre_directives(text: &str) -> Result<Vec<(String, Precondition)>> {
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix("//@pre") {
            for item in rest.split(',') {
                out.push(parse_pre(item)?);
            }
        }
    }
    Ok(out)
}

/// Deterministic initial states: all zeros, all ones, then values from the
/// variable index. Summarized variables get instances with as many
/// elements as the state's index.
pub fn initial_states(p: &Program, pre: &[(String, Precondition)], count: usize) -> Result<Vec<(ConcreteEnv, ConcreteStore)>> {
    let mut out = Vec::new();
    for scheme in 0..count {
        let mut st = ConcreteState::initial(p, &[]);
        let mut data = 100 * scheme as i64;
        for (i, v) in p.vars.iter().enumerate() {
            let base = match scheme {
                0 => 0,
                1 => 1,
                k => (i + k - 1) as i64,
            };
            let val = match pre.iter().find(|(x, _)| x == v).map(|(_, c)| c) {
                None | Some(Precondition::Top) => base,
                Some(Precondition::Null) => 0,
                Some(Precondition::Int(lo, hi)) => base.clamp(*lo, (*hi).max(*lo)),
                Some(Precondition::Ind(def)) => build_instance(&p.defs, def, scheme, &mut st.store, &mut || {
                    data += 1;
                    data
                })?,
            };
            let a = st.env.addr(v).expect("declared variable");
            st.store.set(a, val);
        }
        out.push((st.env, st.store));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{analyze_with, Config};
    use crate::lang::parse_program;
    use crate::numeric::Intervals;

    #[test]
    fn pre_directives() {
        let pre = parse_pre_directives("//@pre x=list, n=0..3\n//@pre y = null\nvar x;").unwrap();
        assert_eq!(pre[0], ("x".into(), Precondition::Ind("list".into())));
        assert_eq!(pre[1], ("n".into(), Precondition::Int(0, 3)));
        assert_eq!(pre[2], ("y".into(), Precondition::Null));
        assert!(parse_pre("x").is_err());
    }

    #[test]
    fn traversal_is_sound_on_small_lists() {
        let p = parse_program("var x, n; n = 0; while (x != 0) { x = x->next; n = n + 1; }").unwrap();
        let pre = vec![("x".to_string(), Precondition::Ind("list".into()))];
        let refs: Vec<(&str, Precondition)> = pre.iter().map(|(v, c)| (v.as_str(), c.clone())).collect();
        let cfg = Config::default();
        let r = analyze_with::<Intervals>(&p, &refs, &cfg).unwrap();
        let init = DisjState::single(crate::memory::AbstractMem::init_with(&cfg.domain(&p), &p, &refs).unwrap());
        let inits = initial_states(&p, &pre, 4).unwrap();
        let rep = cross_check(&p, &init, &r, &inits, 200, 3);
        assert_eq!(rep.runs, 4);
        assert!(rep.findings.is_empty(), "{:?}", rep.findings);
    }

    #[test]
    fn missing_alarm_is_reported() {
        let p = parse_program("var x; x = 0; x = x + 1;").unwrap();
        let r = analyze_with::<Intervals>(&p, &[], &Config::default()).unwrap();
        let mut bad = r.clone();
        bad.states.insert(Label(2), DisjState::empty());
        let init = DisjState::single(crate::memory::AbstractMem::init(&Config::default().domain(&p), &p).unwrap());
        let inits = initial_states(&p, &[], 1).unwrap();
        assert!(cross_check(&p, &init, &r, &inits, 50, 3).is_sound());
        let rep = cross_check(&p, &init, &bad, &inits, 50, 3);
        assert_eq!(rep.count(FindingKind::Rejected), 1);
    }
}
