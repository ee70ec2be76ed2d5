// SPDX-License-Identifier: Apache-2.0

//! Concrete store semantics, trace collection and a membership oracle for
//! abstract memories.

mod interp;
mod oracle;
mod store;

pub use interp::{eval_exp, eval_loc, run_collect, Collected, Machine, RunOutcome, RuntimeError, RuntimeErrorKind};
pub use oracle::{build_instance, member_gamma, Verdict};
pub use store::{ConcreteEnv, ConcreteState, ConcreteStore, HEAP_BASE};
