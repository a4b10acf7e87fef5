//! Derivation of the per-container `changed` flag.

use std::collections::BTreeMap;

use crate::model::{same_content, ContainerKey, InMemoryRepo};
use crate::repo::RepoError;

/// Recompute `changed` for every container of `version_id`: true iff no
/// parent version holds a same-named container of the same kind with
/// identical content. Root versions have every flag true.
pub fn compute_changed(
    repo: &InMemoryRepo,
    version_id: &str,
) -> Result<BTreeMap<ContainerKey, bool>, RepoError> {
    let version = repo
        .get(version_id)
        .ok_or_else(|| RepoError::UnknownVersion(version_id.to_string()))?;
    let parents: Vec<_> = version
        .meta
        .parents
        .iter()
        .map(|p| repo.get(p).ok_or_else(|| RepoError::UnknownVersion(p.clone())))
        .collect::<Result<_, _>>()?;

    let mut out = BTreeMap::new();
    for container in version.containers() {
        let key = container.key();
        let unchanged = parents.iter().any(|parent| {
            parent
                .containers()
                .find(|c| c.key() == key)
                .is_some_and(|c| same_content(c.records(), container.records()))
        });
        out.insert(key, !unchanged);
    }
    Ok(out)
}
