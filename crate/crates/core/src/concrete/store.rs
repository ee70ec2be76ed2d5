// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lang::{Label, Program, WORD};

/// First address handed out by `malloc`.
pub const HEAP_BASE: i64 = 4096;

/// Word-addressed store. Blocks record the cells each allocation owns so
/// that `free` can release exactly those.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ConcreteStore {
    cells: BTreeMap<i64, i64>,
    blocks: BTreeMap<i64, Vec<i64>>,
    freed: BTreeSet<i64>,
    next: i64,
}

impl ConcreteStore {
    pub fn new() -> Self {
        ConcreteStore { next: HEAP_BASE, ..Default::default() }
    }

    pub fn cells(&self) -> &BTreeMap<i64, i64> {
        &self.cells
    }

    pub fn get(&self, addr: i64) -> Option<i64> {
        self.cells.get(&addr).copied()
    }

    pub fn contains(&self, addr: i64) -> bool {
        self.cells.contains_key(&addr)
    }

    /// Writes an existing cell or creates one outside any block.
    pub fn set(&mut self, addr: i64, v: i64) {
        self.cells.insert(addr, v);
    }

    pub fn is_block(&self, base: i64) -> bool {
        self.blocks.contains_key(&base)
    }

    pub fn was_freed(&self, base: i64) -> bool {
        self.freed.contains(&base)
    }

    pub fn blocks(&self) -> &BTreeMap<i64, Vec<i64>> {
        &self.blocks
    }

    /// Registers a block at `base` whose cells at the given offsets hold the
    /// given values. Used to build fixtures with chosen addresses.
    pub fn add_block(&mut self, base: i64, cells: &[(i64, i64)]) {
        for &(off, v) in cells {
            self.cells.insert(base + off, v);
        }
        self.blocks.insert(base, cells.iter().map(|c| c.0).collect());
        let end = base + cells.iter().map(|c| c.0 + WORD).max().unwrap_or(WORD);
        self.next = self.next.max(end);
    }

    /// Allocates zeroed cells at the given offsets and returns the base.
    pub fn malloc(&mut self, offsets: &[i64]) -> i64 {
        let base = self.next;
        let size = offsets.iter().map(|o| o + WORD).max().unwrap_or(WORD).max(WORD);
        self.next += size;
        for &o in offsets {
            self.cells.insert(base + o, 0);
        }
        self.blocks.insert(base, offsets.to_vec());
        base
    }

    /// Removes the block's cells; the caller checks `is_block` first.
    pub fn free(&mut self, base: i64) {
        if let Some(offs) = self.blocks.remove(&base) {
            for o in offs {
                self.cells.remove(&(base + o));
            }
            self.freed.insert(base);
        }
    }
}

impl fmt::Display for ConcreteStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, v)) in self.cells.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}:{v}")?;
        }
        Ok(())
    }
}

/// Variable addresses; variables live outside the heap at 4, 8, ...
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ConcreteEnv {
    pub addrs: BTreeMap<String, i64>,
}

impl ConcreteEnv {
    pub fn addr(&self, v: &str) -> Option<i64> {
        self.addrs.get(v).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteState {
    pub label: Label,
    pub env: ConcreteEnv,
    pub store: ConcreteStore,
}

impl ConcreteState {
    /// Standard layout for `p`: variable cells at 4, 8, ... holding `values`
    /// in declaration order (missing values are 0).
    pub fn initial(p: &Program, values: &[i64]) -> Self {
        let mut env = ConcreteEnv::default();
        let mut store = ConcreteStore::new();
        for (i, v) in p.vars.iter().enumerate() {
            let a = (i as i64 + 1) * WORD;
            env.addrs.insert(v.clone(), a);
            store.set(a, values.get(i).copied().unwrap_or(0));
        }
        let label = p.body.flatten().first().map_or(Label::EXIT, |s| s.label);
        ConcreteState { label, env, store }
    }
}

impl fmt::Display for ConcreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |", self.label)?;
        for (i, (v, a)) in self.env.addrs.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            let val = self.store.get(*a).map_or("?".to_string(), |x| x.to_string());
            write!(f, "{sep}{v}@{a}={val}")?;
        }
        write!(f, " | {}", self.store)
    }
}
