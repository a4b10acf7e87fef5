//! Core data model for a versioned dataset repository.
//!
//! A repository holds an immutable DAG of versions. Each version groups
//! relations (schema-bearing tuple sets) and files (schemaless record sets),
//! and every record can carry provenance edges to records in ancestor
//! versions. This crate defines those entities, the dynamically typed
//! [`Value`] they store, the comparison semantics queries rely on, and the
//! integrity checks (`validate_repository`, `compute_changed`) that keep a
//! repository honest.

pub mod changed;
pub mod graph;
pub mod model;
pub mod repo;
pub mod validate;
pub mod value;

pub use changed::compute_changed;
pub use model::{
    Author, ColumnType, Container, ContainerKey, FileSnapshot, InMemoryRepo, MaterializedVersion,
    Record, RecordRef, RelationSnapshot, VersionMeta,
};
pub use repo::{RepoError, VersionRepo};
pub use validate::{validate_repository, Violation, ViolationKind};
pub use value::Value;
