// SPDX-License-Identifier: Apache-2.0

//! Separating shape graphs with points-to and inductive edges.

mod dot;
mod graph;
mod inductive;
mod join;
mod matcher;

pub use crate::numeric::{Sym, SymSupply};
pub use dot::to_dot;
pub use graph::{EvalFail, IndEdge, PtEdge, ShapeGraph};
pub use inductive::{DefTable, InductiveDef, Rule, RuleAtom, RuleTerm, Unfolded};
pub use join::{shape_join, JoinOut, JoinSides};
pub use matcher::{fold_into, shape_compare, CompareMode, MatchResult};
