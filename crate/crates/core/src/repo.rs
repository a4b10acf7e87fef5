//! Read access to a repository, abstracted over storage.
//!
//! The query engine runs against anything implementing [`VersionRepo`]: the
//! delta-compressed on-disk store or an [`InMemoryRepo`] holding every
//! version in full.

use std::sync::Arc;

use thiserror::Error;

use crate::model::{InMemoryRepo, MaterializedVersion, VersionMeta};

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("unknown version {0:?}")]
    UnknownVersion(String),
    #[error("storage error: {0}")]
    Storage(String),
}

/// Read-only view of a repository. Implementations are safe for concurrent
/// readers; all mutation goes through the store's commit path.
pub trait VersionRepo {
    /// All version ids ordered by (creation_ts, id), the enumeration order
    /// queries observe.
    fn version_ids(&self) -> Vec<String>;

    fn meta(&self, id: &str) -> Option<VersionMeta>;

    /// Fully expand one version.
    fn materialize(&self, id: &str) -> Result<Arc<MaterializedVersion>, RepoError>;
}

impl VersionRepo for InMemoryRepo {
    fn version_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self
            .iter()
            .map(|v| (v.meta.creation_ts, v.meta.id.clone()))
            .collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    fn meta(&self, id: &str) -> Option<VersionMeta> {
        self.get(id).map(|v| v.meta.clone())
    }

    fn materialize(&self, id: &str) -> Result<Arc<MaterializedVersion>, RepoError> {
        self.get(id)
            .cloned()
            .ok_or_else(|| RepoError::UnknownVersion(id.to_string()))
    }
}
