//! Evaluation engine for VQuel programs.
//!
//! Programs run against any [`vquel_core::VersionRepo`]. Execution follows
//! the language's nested-iterator model: a retrieve enumerates the
//! iterators it references outside aggregate expressions (plus every
//! aggregate's grouping key), evaluates aggregates from the iterator
//! ranges alone, and emits one row per surviving binding. Statement order
//! matters: `retrieve into` registers a derived set that later statements
//! iterate.
//!
//! The engine accepts both desugared programs and raw ones with inline
//! path filters; results are identical, which the desugarer's equivalence
//! tests rely on.

mod aggregate;
mod entity;
mod error;
mod eval;
mod exec;
mod result;

pub use entity::EntityRef;
pub use error::EngineError;
pub use exec::{execute_program, run_pipeline, ExecSession, StatementOutcome};
pub use result::ResultSet;
