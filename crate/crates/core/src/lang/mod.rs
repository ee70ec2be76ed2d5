// SPDX-License-Identifier: Apache-2.0

//! Syntax of the analyzed language: AST, parser and printer.

mod ast;
mod lexer;
mod parser;
mod printer;

pub use ast::*;
pub use lexer::{lex, Tok, Token};
pub use parser::{parse_program, parse_program_with_defs};
pub use printer::{pretty_print, print_expr, print_loc, print_stmt_head};
