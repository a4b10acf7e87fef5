//! Persistent repository of dataset versions with delta-compressed storage.
//!
//! Versions are immutable once committed. Each container (relation or file)
//! is stored either as a full snapshot or as a delta against the same-named
//! container in the commit's first parent; delta chains are capped so any
//! version can be recreated in a bounded number of hops.
//!
//! On-disk layout under the repository root:
//!
//! ```text
//! manifest.json          version index (id, author, timestamps, parents,
//!                        container entries with storage refs)
//! objects/<ref>.json     snapshot or delta payload for one container
//! prov/<id>.json         record-level provenance edges of one version
//! ```

pub mod ingest;
mod layout;
mod repository;

pub use ingest::{load_data_dir, load_prov_file, DataPayload};
pub use repository::{
    disk_usage, full_copy_bytes, CommitInput, FileInput, RecordInput, RelationInput, Repository,
    StoreError, NEW_VERSION_REF,
};
