//! Frontend for the VQuel query language: tokenizer, recursive-descent
//! parser, pretty-printer, shorthand desugarer, and semantic validator.
//!
//! A program is a sequence of `range` declarations and `retrieve`
//! statements. Iterators range over versions, the relations/files inside a
//! version, the records inside a container, record provenance, or the
//! version graph itself (`P`/`D`/`N`). Inline filters on path steps, as in
//! `Version(id = "v01").Relations(name = "Employee").Tuples`, are sugar;
//! [`desugar`] rewrites them away without changing query results.

pub mod analysis;
pub mod ast;
pub mod desugar;
pub mod error;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod validate;

pub use ast::Program;
pub use desugar::{desugar, Desugarer};
pub use error::{FrontendError, Severity};
pub use lexer::tokenize;
pub use parser::{parse, parse_statements};
pub use printer::print_program;
pub use validate::{reject_reserved_names, validate};

/// Reserved prefix for iterators introduced by the desugarer.
pub const FRESH_PREFIX: &str = "__g";
