//! A small quantity-expression language.
//!
//! A program is a sequence of declarations (`unit`, `derive`, `const`,
//! `var`) and statements (`check`, `eval`, `assert`). The checker assigns a
//! dimension to every statement without evaluating anything, so mixing a
//! velocity with a time, or adding a bare number to a duration, is caught
//! before any value exists.
//!
//! ```text
//! var currentTime : decisecond
//! var T_extend : decisecond
//! check currentTime > T_extend + 10 second
//! ```

pub mod ast;
mod check;
mod eval;
pub mod lexer;
mod parser;

pub use ast::{BinOp, Decl, Expr, ExprKind, Ident, Item, Program, Stmt, StmtKind};
pub use check::{
    check_program, check_source, check_with_scope, infer_dimension, run_program, run_source, CheckReport, Diagnostic,
    Entry, ErrorKind, Scope, Ty, Verdict,
};
pub use eval::{evaluate, EvalError, Value};
pub use lexer::{tokenize, LexError, Pos, Token, TokenKind};
pub use parser::{parse, parse_expr, parse_source, ParseError, Parsed, SourceError, MAX_POWER};

#[cfg(test)]
mod tests;
