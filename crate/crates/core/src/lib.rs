// SPDX-License-Identifier: Apache-2.0

//! Shape and numeric abstract interpretation for a small heap-manipulating
//! language, with a concrete interpreter used as a soundness oracle.

pub mod analyzer;
pub mod combined;
pub mod concrete;
pub mod disjunct;
pub mod error;
pub mod lang;
pub mod memory;
pub mod numeric;
pub mod shape;

pub use error::{Error, Result};
