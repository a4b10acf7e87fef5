//! Test support shared across the workspace: deterministic commit scripts,
//! a naive full-copy repository builder, a brute-force reference evaluator
//! for query results, randomized repository/program generators, and the
//! worked example fixtures with their query corpus.
//!
//! Everything here exists to check the real implementations from the
//! outside: the reference evaluator interprets parsed programs directly
//! (inline filters and all) with per-binding aggregate recomputation, and
//! the naive store keeps every version fully expanded. Neither shares the
//! delta-storage or engine evaluation code paths they are used to test.

pub mod bfs;
pub mod fixtures;
pub mod genprog;
pub mod genrepo;
pub mod naive;
pub mod refeval;
pub mod rewrite;
pub mod script;

pub use script::{apply_to_store, CommitScript, CommitSpec, ScriptFile, ScriptRelation};
