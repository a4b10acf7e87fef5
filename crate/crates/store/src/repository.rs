//! Repository lifecycle: init/open, commit, checkout, log, traversal.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use thiserror::Error;

use vquel_core::graph;
use vquel_core::model::{
    same_content, Author, ColumnType, ContainerKey, ContainerMeta, FileSnapshot,
    MaterializedVersion, Record, RecordRef, RelationSnapshot, VersionMeta,
};
use vquel_core::repo::{RepoError, VersionRepo};
use vquel_core::value::parse_timestamp;
use vquel_core::Value;

use crate::layout::{
    self, file_value_ok, record_from_json, record_to_json, schema_from_dto, schema_to_dto,
    ContainerEntry, ManifestVersion, ObjectFile,
};

/// Delta chains never grow past this many entries before a fresh snapshot
/// is taken, bounding recreation cost.
const CHAIN_CAP: u32 = 10;

/// Placeholder version id accepted in provenance child refs at commit time,
/// standing for the version being committed.
pub const NEW_VERSION_REF: &str = "@new";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}: {1}")]
    Json(PathBuf, serde_json::Error),
    #[error("{0} exists and is not empty")]
    NotEmpty(PathBuf),
    #[error("{0} is not a repository (missing manifest.json)")]
    NotARepository(PathBuf),
    #[error("repository is locked by another writer")]
    Locked,
    #[error("unknown parent version {0:?}")]
    UnknownParent(String),
    #[error("unknown version {0:?}")]
    UnknownVersion(String),
    #[error("version id {0:?} already exists")]
    DuplicateVersion(String),
    #[error("invalid version id {0:?}: {1}")]
    BadVersionId(String, &'static str),
    #[error("duplicate {0} in commit")]
    DuplicateDiscriminator(ContainerKey),
    #[error("duplicate record id {rid} in container {container:?}")]
    DuplicateRid { container: String, rid: u64 },
    #[error("schema error in {container:?}: {detail}")]
    Schema { container: String, detail: String },
    #[error("unsupported value in file {container:?}: {detail}")]
    UnsupportedValue { container: String, detail: String },
    #[error("provenance error: {0}")]
    Provenance(String),
    #[error("author name must not be empty")]
    EmptyAuthor,
    #[error("corrupt repository: {0}")]
    Corrupt(String),
}

impl From<StoreError> for RepoError {
    fn from(e: StoreError) -> RepoError {
        match e {
            StoreError::UnknownVersion(id) => RepoError::UnknownVersion(id),
            other => RepoError::Storage(other.to_string()),
        }
    }
}

/// A record handed to `commit`. With `rid: None` the store assigns one,
/// re-using the rid of a content-identical record in the base container so
/// unchanged records keep their identity across versions.
#[derive(Debug, Clone)]
pub struct RecordInput {
    pub rid: Option<u64>,
    pub fields: BTreeMap<String, Value>,
}

impl RecordInput {
    pub fn new(fields: BTreeMap<String, Value>) -> RecordInput {
        RecordInput { rid: None, fields }
    }

    pub fn with_rid(rid: u64, fields: BTreeMap<String, Value>) -> RecordInput {
        RecordInput { rid: Some(rid), fields }
    }
}

#[derive(Debug, Clone)]
pub struct RelationInput {
    pub name: String,
    pub schema: Vec<(String, ColumnType)>,
    pub tuples: Vec<RecordInput>,
}

#[derive(Debug, Clone)]
pub struct FileInput {
    pub full_path: String,
    pub records: Vec<RecordInput>,
}

/// Everything a commit needs. Timestamps are caller-supplied so commit
/// sequences replay deterministically.
#[derive(Debug, Clone)]
pub struct CommitInput {
    /// Explicit version id; `None` assigns the next `v<nn>` counter id.
    pub id: Option<String>,
    pub parents: Vec<String>,
    pub author: Author,
    pub creation_ts: DateTime<Utc>,
    pub message: String,
    pub relations: Vec<RelationInput>,
    pub files: Vec<FileInput>,
    /// (child, parent) record-level provenance edges. Child refs may use
    /// [`NEW_VERSION_REF`] or an empty version id for the commit in flight.
    pub provenance: Vec<(RecordRef, RecordRef)>,
}

impl CommitInput {
    pub fn new(parents: Vec<String>, author: Author, creation_ts: DateTime<Utc>, message: impl Into<String>) -> CommitInput {
        CommitInput {
            id: None,
            parents,
            author,
            creation_ts,
            message: message.into(),
            relations: Vec::new(),
            files: Vec::new(),
            provenance: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
enum StorageKind {
    Snapshot,
    Delta { base: String },
}

#[derive(Debug, Clone)]
struct StoredEntry {
    storage_ref: String,
    kind: StorageKind,
    depth: u32,
}

#[derive(Default)]
struct Inner {
    versions: Vec<VersionMeta>, // commit order
    index: HashMap<String, usize>,
    storage: HashMap<(String, ContainerKey), StoredEntry>,
    prov: HashMap<String, Vec<(RecordRef, RecordRef)>>,
    children_of: HashMap<RecordRef, BTreeSet<RecordRef>>,
    cache: HashMap<String, Arc<MaterializedVersion>>,
    object_refs: HashSet<String>,
    counter: u64,
}

/// A repository rooted at a directory. Reads share the instance freely; a
/// commit serializes on an internal mutex plus an on-disk lock file, so a
/// single repository directory has one writer at a time even across
/// processes.
pub struct Repository {
    root: PathBuf,
    inner: Mutex<Inner>,
}

impl Repository {
    /// Create an empty repository. The path must be absent or an empty
    /// directory.
    pub fn init(path: impl AsRef<Path>) -> Result<Repository, StoreError> {
        let root = path.as_ref().to_path_buf();
        if root.exists() {
            if !root.is_dir() || fs::read_dir(&root)?.next().is_some() {
                return Err(StoreError::NotEmpty(root));
            }
        } else {
            fs::create_dir_all(&root)?;
        }
        fs::create_dir_all(root.join("objects"))?;
        fs::create_dir_all(root.join("prov"))?;
        write_atomic(&root.join("manifest.json"), b"[]\n")?;
        Ok(Repository { root, inner: Mutex::new(Inner { counter: 1, ..Inner::default() }) })
    }

    /// Open an existing repository.
    pub fn open(path: impl AsRef<Path>) -> Result<Repository, StoreError> {
        let root = path.as_ref().to_path_buf();
        let manifest_path = root.join("manifest.json");
        if !manifest_path.is_file() {
            return Err(StoreError::NotARepository(root));
        }
        let raw = fs::read_to_string(&manifest_path)?;
        let manifest: Vec<ManifestVersion> =
            serde_json::from_str(&raw).map_err(|e| StoreError::Json(manifest_path.clone(), e))?;

        let mut inner = Inner { counter: 1, ..Inner::default() };
        for mv in &manifest {
            let meta = Self::meta_from_manifest(mv)?;
            for entry in &mv.containers {
                let key = container_key(&entry.kind, &entry.name_or_path)?;
                inner.object_refs.insert(entry.storage_ref.clone());
                inner.storage.insert(
                    (meta.id.clone(), key),
                    StoredEntry {
                        storage_ref: entry.storage_ref.clone(),
                        kind: StorageKind::Snapshot, // fixed up below
                        depth: 0,
                    },
                );
            }
            if let Some(n) = counter_of(&meta.id) {
                inner.counter = inner.counter.max(n + 1);
            }
            inner.index.insert(meta.id.clone(), inner.versions.len());
            inner.versions.push(meta);
        }
        // children edges derive from parents
        let mut children: HashMap<String, Vec<String>> = HashMap::new();
        for v in &inner.versions {
            for p in &v.parents {
                if !inner.index.contains_key(p) {
                    return Err(StoreError::Corrupt(format!(
                        "version {:?} lists unknown parent {:?}",
                        v.id, p
                    )));
                }
                children.entry(p.clone()).or_default().push(v.id.clone());
            }
        }
        for v in &mut inner.versions {
            v.children = children.remove(&v.id).unwrap_or_default();
            v.children.sort();
        }
        // storage kinds and chain depths come from the object files
        let mut kinds: HashMap<String, StorageKind> = HashMap::new();
        for entry in inner.storage.values() {
            let obj = read_object(&root, &entry.storage_ref)?;
            let kind = match obj {
                ObjectFile::Snapshot { .. } => StorageKind::Snapshot,
                ObjectFile::Delta { base, .. } => StorageKind::Delta { base },
            };
            kinds.insert(entry.storage_ref.clone(), kind);
        }
        let mut depth_memo: HashMap<String, u32> = HashMap::new();
        for entry in inner.storage.values_mut() {
            entry.kind = kinds
                .get(&entry.storage_ref)
                .cloned()
                .ok_or_else(|| StoreError::Corrupt(format!("missing object {}", entry.storage_ref)))?;
            entry.depth = chain_depth(&entry.storage_ref, &kinds, &mut depth_memo)?;
        }
        // provenance files
        for v in &inner.versions {
            let path = root.join("prov").join(format!("{}.json", v.id));
            if path.is_file() {
                let raw = fs::read_to_string(&path)?;
                let pairs: Vec<(String, String)> =
                    serde_json::from_str(&raw).map_err(|e| StoreError::Json(path.clone(), e))?;
                let mut edges = Vec::new();
                for (child, parent) in pairs {
                    let c = RecordRef::parse(&child)
                        .ok_or_else(|| StoreError::Corrupt(format!("bad record ref {child:?}")))?;
                    let p = RecordRef::parse(&parent)
                        .ok_or_else(|| StoreError::Corrupt(format!("bad record ref {parent:?}")))?;
                    inner.children_of.entry(p.clone()).or_default().insert(c.clone());
                    edges.push((c, p));
                }
                inner.prov.insert(v.id.clone(), edges);
            }
        }
        Ok(Repository { root, inner: Mutex::new(inner) })
    }

    fn meta_from_manifest(mv: &ManifestVersion) -> Result<VersionMeta, StoreError> {
        let ts = parse_timestamp(&mv.creation_ts)
            .ok_or_else(|| StoreError::Corrupt(format!("bad creation_ts {:?}", mv.creation_ts)))?;
        let mut containers = Vec::new();
        for entry in &mv.containers {
            let key = container_key(&entry.kind, &entry.name_or_path)?;
            let schema = match &entry.schema {
                Some(dto) => Some(schema_from_dto(dto).map_err(StoreError::Corrupt)?),
                None => None,
            };
            containers.push(ContainerMeta { key, changed: entry.changed, schema });
        }
        Ok(VersionMeta {
            id: mv.id.clone(),
            author: Author { name: mv.author.name.clone(), email: mv.author.email.clone() },
            creation_ts: ts,
            commit_msg: mv.commit_msg.clone(),
            parents: mv.parents.clone(),
            children: vec![],
            containers,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn version_count(&self) -> usize {
        self.inner.lock().unwrap().versions.len()
    }

    /// Append a new immutable version; returns its id.
    pub fn commit(&self, input: CommitInput) -> Result<String, StoreError> {
        let _disk_lock = LockFile::acquire(&self.root)?;
        let mut inner = self.inner.lock().unwrap();
        let inner = &mut *inner;

        if input.author.name.is_empty() {
            return Err(StoreError::EmptyAuthor);
        }
        for p in &input.parents {
            if !inner.index.contains_key(p) {
                return Err(StoreError::UnknownParent(p.clone()));
            }
        }

        let id = match &input.id {
            Some(id) => {
                if id.is_empty() || id == NEW_VERSION_REF {
                    return Err(StoreError::BadVersionId(id.clone(), "reserved"));
                }
                if id.contains('/') {
                    return Err(StoreError::BadVersionId(id.clone(), "must not contain '/'"));
                }
                if inner.index.contains_key(id) {
                    return Err(StoreError::DuplicateVersion(id.clone()));
                }
                id.clone()
            }
            None => loop {
                let candidate = format!("v{:02}", inner.counter);
                inner.counter += 1;
                if !inner.index.contains_key(&candidate) {
                    break candidate;
                }
            },
        };

        // discriminator uniqueness within the commit
        let mut keys = HashSet::new();
        for r in &input.relations {
            if !keys.insert(ContainerKey::Relation(r.name.clone())) {
                return Err(StoreError::DuplicateDiscriminator(ContainerKey::Relation(r.name.clone())));
            }
        }
        for f in &input.files {
            if !keys.insert(ContainerKey::File(f.full_path.clone())) {
                return Err(StoreError::DuplicateDiscriminator(ContainerKey::File(f.full_path.clone())));
            }
        }

        let first_parent = input
            .parents
            .first()
            .map(|p| materialize_inner(&self.root, inner, p))
            .transpose()?;
        let all_parents: Vec<Arc<MaterializedVersion>> = input
            .parents
            .iter()
            .map(|p| materialize_inner(&self.root, inner, p))
            .collect::<Result<_, _>>()?;

        // resolve rids and build containers
        let mut relations = Vec::new();
        for r in &input.relations {
            validate_schema(r)?;
            let base = first_parent.as_ref().and_then(|p| p.relation(&r.name));
            let base_same_schema = base.filter(|b| b.schema == r.schema);
            let tuples = assign_rids(&r.name, &r.tuples, base_same_schema.map(|b| b.tuples.as_slice()))?;
            relations.push(RelationSnapshot { name: r.name.clone(), schema: r.schema.clone(), tuples, changed: true });
        }
        let mut files = Vec::new();
        for f in &input.files {
            for (i, rec) in f.records.iter().enumerate() {
                if let Some((k, v)) = rec.fields.iter().find(|(_, v)| !file_value_ok(v)) {
                    return Err(StoreError::UnsupportedValue {
                        container: f.full_path.clone(),
                        detail: format!("record {i}: field {k:?} holds {}", v.type_name()),
                    });
                }
            }
            let base = first_parent.as_ref().and_then(|p| p.file(&f.full_path));
            let records = assign_rids(&f.full_path, &f.records, base.map(|b| b.records.as_slice()))?;
            files.push(FileSnapshot { full_path: f.full_path.clone(), records, changed: true });
        }

        // changed flags: true iff content differs from every parent
        for rel in &mut relations {
            rel.changed = !all_parents.iter().any(|p| {
                p.relation(&rel.name).is_some_and(|b| same_content(&b.tuples, &rel.tuples))
            });
        }
        for file in &mut files {
            file.changed = !all_parents.iter().any(|p| {
                p.file(&file.full_path).is_some_and(|b| same_content(&b.records, &file.records))
            });
        }

        // provenance: resolve child refs, check edges point into strict ancestors
        let mut strict_ancestors: BTreeSet<String> = input.parents.iter().cloned().collect();
        for p in &input.parents {
            strict_ancestors.extend(graph::ancestors(&InnerView { inner }, p, None).map_err(|e| {
                StoreError::Corrupt(format!("ancestor walk failed: {e}"))
            })?);
        }
        let mut edges: Vec<(RecordRef, RecordRef)> = Vec::new();
        for (child, parent) in &input.provenance {
            let child = if child.version_id == NEW_VERSION_REF || child.version_id.is_empty() {
                RecordRef::new(id.clone(), child.container.clone(), child.rid)
            } else if child.version_id == id {
                child.clone()
            } else {
                return Err(StoreError::Provenance(format!(
                    "child ref {child} must target the new version (use {NEW_VERSION_REF})"
                )));
            };
            let child_exists = relations
                .iter()
                .find(|r| r.name == child.container)
                .map(|r| r.tuples.iter().any(|t| t.rid == child.rid))
                .or_else(|| {
                    files
                        .iter()
                        .find(|f| f.full_path == child.container)
                        .map(|f| f.records.iter().any(|r| r.rid == child.rid))
                })
                .unwrap_or(false);
            if !child_exists {
                return Err(StoreError::Provenance(format!("child ref {child} does not resolve in the commit")));
            }
            if !strict_ancestors.contains(&parent.version_id) {
                return Err(StoreError::Provenance(format!(
                    "parent ref {parent} is not in a strict ancestor of {id}"
                )));
            }
            let pv = materialize_inner(&self.root, inner, &parent.version_id)?;
            if pv.record(&parent.container, parent.rid).is_none() {
                return Err(StoreError::Provenance(format!("parent ref {parent} does not resolve")));
            }
            edges.push((child, parent.clone()));
        }
        // attach parent edges to the new records
        for (child, parent) in &edges {
            if let Some(r) = relations.iter_mut().find(|r| r.name == child.container) {
                if let Some(t) = r.tuples.iter_mut().find(|t| t.rid == child.rid) {
                    t.parents.insert(parent.clone());
                }
            } else if let Some(f) = files.iter_mut().find(|f| f.full_path == child.container) {
                if let Some(rec) = f.records.iter_mut().find(|rec| rec.rid == child.rid) {
                    rec.parents.insert(parent.clone());
                }
            }
        }

        // write storage objects
        let mut container_entries = Vec::new();
        let mut new_entries = Vec::new();
        for rel in &relations {
            let key = ContainerKey::Relation(rel.name.clone());
            let base_ok = first_parent
                .as_ref()
                .and_then(|p| p.relation(&rel.name))
                .is_some_and(|b| b.schema == rel.schema);
            let (entry, object) = self.plan_storage(
                inner,
                &id,
                &key,
                &rel.tuples,
                if base_ok { first_parent.as_deref() } else { None },
            )?;
            write_object(&self.root, &entry.storage_ref, &object)?;
            container_entries.push(ContainerEntry {
                name_or_path: rel.name.clone(),
                kind: "relation".into(),
                changed: rel.changed,
                schema: Some(schema_to_dto(&rel.schema)),
                storage_ref: entry.storage_ref.clone(),
            });
            new_entries.push((key, entry));
        }
        for file in &files {
            let key = ContainerKey::File(file.full_path.clone());
            let (entry, object) =
                self.plan_storage(inner, &id, &key, &file.records, first_parent.as_deref())?;
            write_object(&self.root, &entry.storage_ref, &object)?;
            container_entries.push(ContainerEntry {
                name_or_path: file.full_path.clone(),
                kind: "file".into(),
                changed: file.changed,
                schema: None,
                storage_ref: entry.storage_ref.clone(),
            });
            new_entries.push((key, entry));
        }

        // provenance file
        if !edges.is_empty() {
            let pairs: Vec<(String, String)> =
                edges.iter().map(|(c, p)| (c.to_string(), p.to_string())).collect();
            let path = self.root.join("prov").join(format!("{id}.json"));
            write_atomic(&path, serde_json::to_string_pretty(&pairs).unwrap().as_bytes())?;
        }

        // in-memory index update
        let meta = VersionMeta {
            id: id.clone(),
            author: input.author.clone(),
            creation_ts: input.creation_ts,
            commit_msg: input.message.clone(),
            parents: input.parents.clone(),
            children: vec![],
            containers: relations
                .iter()
                .map(|r| ContainerMeta {
                    key: ContainerKey::Relation(r.name.clone()),
                    changed: r.changed,
                    schema: Some(r.schema.clone()),
                })
                .chain(files.iter().map(|f| ContainerMeta {
                    key: ContainerKey::File(f.full_path.clone()),
                    changed: f.changed,
                    schema: None,
                }))
                .collect(),
        };
        for p in &input.parents {
            let idx = inner.index[p];
            let children = &mut inner.versions[idx].children;
            if !children.contains(&id) {
                children.push(id.clone());
                children.sort();
            }
        }
        for (key, entry) in new_entries {
            inner.object_refs.insert(entry.storage_ref.clone());
            inner.storage.insert((id.clone(), key), entry);
        }
        for (c, p) in &edges {
            inner.children_of.entry(p.clone()).or_default().insert(c.clone());
        }
        if !edges.is_empty() {
            inner.prov.insert(id.clone(), edges);
        }
        inner.index.insert(id.clone(), inner.versions.len());
        inner.versions.push(meta.clone());
        // provenance children changed for ancestor records: drop stale cache
        inner.cache.clear();
        inner.cache.insert(
            id.clone(),
            Arc::new(MaterializedVersion::new(meta, relations, files)),
        );

        self.write_manifest(inner)?;
        Ok(id)
    }

    fn plan_storage(
        &self,
        inner: &Inner,
        vid: &str,
        key: &ContainerKey,
        records: &[Record],
        first_parent: Option<&MaterializedVersion>,
    ) -> Result<(StoredEntry, ObjectFile), StoreError> {
        let storage_ref = fresh_ref(&inner.object_refs, vid, key);
        let base = first_parent.and_then(|p| {
            let entry = inner.storage.get(&(p.meta.id.clone(), key.clone()))?;
            let base_records = match key {
                ContainerKey::Relation(name) => p.relation(name).map(|r| r.tuples.as_slice()),
                ContainerKey::File(path) => p.file(path).map(|f| f.records.as_slice()),
            }?;
            Some((entry, base_records))
        });
        match base {
            Some((base_entry, base_records)) if base_entry.depth < CHAIN_CAP => {
                let (added, removed, modified) = diff_records(base_records, records);
                let object = ObjectFile::Delta {
                    base: base_entry.storage_ref.clone(),
                    added: added.iter().map(|r| record_to_json(r)).collect(),
                    removed,
                    modified: modified.iter().map(|r| record_to_json(r)).collect(),
                };
                Ok((
                    StoredEntry {
                        storage_ref,
                        kind: StorageKind::Delta { base: base_entry.storage_ref.clone() },
                        depth: base_entry.depth + 1,
                    },
                    object,
                ))
            }
            _ => {
                let object = ObjectFile::Snapshot {
                    records: records.iter().map(record_to_json).collect(),
                };
                Ok((StoredEntry { storage_ref, kind: StorageKind::Snapshot, depth: 0 }, object))
            }
        }
    }

    fn write_manifest(&self, inner: &Inner) -> Result<(), StoreError> {
        let manifest: Vec<ManifestVersion> = inner
            .versions
            .iter()
            .map(|v| ManifestVersion {
                id: v.id.clone(),
                author: layout::AuthorDto { name: v.author.name.clone(), email: v.author.email.clone() },
                creation_ts: layout::ts_to_rfc3339(&v.creation_ts),
                commit_msg: v.commit_msg.clone(),
                parents: v.parents.clone(),
                containers: v
                    .containers
                    .iter()
                    .map(|c| {
                        let entry = &inner.storage[&(v.id.clone(), c.key.clone())];
                        ContainerEntry {
                            name_or_path: c.key.name().to_string(),
                            kind: c.key.kind().to_string(),
                            changed: c.changed,
                            schema: c.schema.as_deref().map(schema_to_dto),
                            storage_ref: entry.storage_ref.clone(),
                        }
                    })
                    .collect(),
            })
            .collect();
        let body = serde_json::to_string_pretty(&manifest).unwrap();
        write_atomic(&self.root.join("manifest.json"), body.as_bytes())
    }

    /// Recreate a version in its entirety. Pure: repeated checkouts return
    /// the same content.
    pub fn checkout(&self, id: &str) -> Result<Arc<MaterializedVersion>, StoreError> {
        let mut inner = self.inner.lock().unwrap();
        materialize_inner(&self.root, &mut inner, id)
    }

    /// Ancestor version ids within `hops` parent steps (unbounded if None).
    pub fn ancestors(&self, id: &str, hops: Option<usize>) -> Result<BTreeSet<String>, StoreError> {
        graph::ancestors(self, id, hops).map_err(repo_err)
    }

    /// Descendant version ids within `hops` child steps (unbounded if None).
    pub fn descendants(&self, id: &str, hops: Option<usize>) -> Result<BTreeSet<String>, StoreError> {
        graph::descendants(self, id, hops).map_err(repo_err)
    }

    /// Versions within undirected distance `hops`.
    pub fn neighborhood(&self, id: &str, hops: usize) -> Result<BTreeSet<String>, StoreError> {
        graph::neighborhood(self, id, hops).map_err(repo_err)
    }

    /// Versions at undirected distance exactly `hops`.
    pub fn neighborhood_exact(&self, id: &str, hops: usize) -> Result<BTreeSet<String>, StoreError> {
        graph::neighborhood_exact(self, id, hops).map_err(repo_err)
    }

    /// Version metadata newest-first; with a container name, only versions
    /// where that container changed.
    pub fn log(&self, container: Option<&str>) -> Vec<VersionMeta> {
        let inner = self.inner.lock().unwrap();
        let mut versions: Vec<VersionMeta> = inner
            .versions
            .iter()
            .filter(|v| match container {
                None => true,
                Some(name) => v
                    .containers
                    .iter()
                    .any(|c| c.key.name() == name && c.changed),
            })
            .cloned()
            .collect();
        versions.sort_by(|a, b| {
            (b.creation_ts, &b.id).cmp(&(a.creation_ts, &a.id))
        });
        versions
    }
}

fn repo_err(e: RepoError) -> StoreError {
    match e {
        RepoError::UnknownVersion(id) => StoreError::UnknownVersion(id),
        RepoError::Storage(s) => StoreError::Corrupt(s),
    }
}

/// Borrowing adapter so graph walks can run while `commit` holds the lock.
struct InnerView<'a> {
    inner: &'a Inner,
}

impl VersionRepo for InnerView<'_> {
    fn version_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self
            .inner
            .versions
            .iter()
            .map(|v| (v.creation_ts, v.id.clone()))
            .collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    fn meta(&self, id: &str) -> Option<VersionMeta> {
        self.inner.index.get(id).map(|&i| self.inner.versions[i].clone())
    }

    fn materialize(&self, id: &str) -> Result<Arc<MaterializedVersion>, RepoError> {
        Err(RepoError::Storage(format!("cannot materialize {id} during commit")))
    }
}

impl VersionRepo for Repository {
    fn version_ids(&self) -> Vec<String> {
        let inner = self.inner.lock().unwrap();
        InnerView { inner: &inner }.version_ids()
    }

    fn meta(&self, id: &str) -> Option<VersionMeta> {
        let inner = self.inner.lock().unwrap();
        inner.index.get(id).map(|&i| inner.versions[i].clone())
    }

    fn materialize(&self, id: &str) -> Result<Arc<MaterializedVersion>, RepoError> {
        self.checkout(id).map_err(RepoError::from)
    }
}

fn materialize_inner(
    root: &Path,
    inner: &mut Inner,
    id: &str,
) -> Result<Arc<MaterializedVersion>, StoreError> {
    if let Some(hit) = inner.cache.get(id) {
        return Ok(hit.clone());
    }
    let idx = *inner
        .index
        .get(id)
        .ok_or_else(|| StoreError::UnknownVersion(id.to_string()))?;
    let meta = inner.versions[idx].clone();
    let mut relations = Vec::new();
    let mut files = Vec::new();
    for c in &meta.containers {
        let entry = inner
            .storage
            .get(&(id.to_string(), c.key.clone()))
            .ok_or_else(|| StoreError::Corrupt(format!("no storage entry for {} in {id}", c.key)))?;
        let records = load_chain(root, &entry.storage_ref, c.schema.as_deref())?;
        match &c.key {
            ContainerKey::Relation(name) => relations.push(RelationSnapshot {
                name: name.clone(),
                schema: c.schema.clone().unwrap_or_default(),
                tuples: records,
                changed: c.changed,
            }),
            ContainerKey::File(path) => files.push(FileSnapshot {
                full_path: path.clone(),
                records,
                changed: c.changed,
            }),
        }
    }
    // attach provenance edges
    let own_edges = inner.prov.get(id).cloned().unwrap_or_default();
    let mut parents_of: HashMap<(String, u64), BTreeSet<RecordRef>> = HashMap::new();
    for (c, p) in &own_edges {
        parents_of.entry((c.container.clone(), c.rid)).or_default().insert(p.clone());
    }
    let attach = |records: &mut Vec<Record>, container: &str| {
        for rec in records.iter_mut() {
            if let Some(ps) = parents_of.get(&(container.to_string(), rec.rid)) {
                rec.parents = ps.clone();
            }
            let me = RecordRef::new(id.to_string(), container.to_string(), rec.rid);
            if let Some(cs) = inner.children_of.get(&me) {
                rec.children = cs.clone();
            }
        }
    };
    for r in &mut relations {
        let name = r.name.clone();
        attach(&mut r.tuples, &name);
    }
    for f in &mut files {
        let path = f.full_path.clone();
        attach(&mut f.records, &path);
    }
    let version = Arc::new(MaterializedVersion::new(meta, relations, files));
    inner.cache.insert(id.to_string(), version.clone());
    Ok(version)
}

fn load_chain(
    root: &Path,
    storage_ref: &str,
    schema: Option<&[(String, ColumnType)]>,
) -> Result<Vec<Record>, StoreError> {
    match read_object(root, storage_ref)? {
        ObjectFile::Snapshot { records } => records
            .iter()
            .map(|o| record_from_json(o, schema).map_err(StoreError::Corrupt))
            .collect(),
        ObjectFile::Delta { base, added, removed, modified } => {
            let base_records = load_chain(root, &base, schema)?;
            let mut by_rid: BTreeMap<u64, Record> =
                base_records.into_iter().map(|r| (r.rid, r)).collect();
            for rid in removed {
                if by_rid.remove(&rid).is_none() {
                    return Err(StoreError::Corrupt(format!(
                        "{storage_ref}: removes rid {rid} absent from base"
                    )));
                }
            }
            for obj in modified {
                let rec = record_from_json(&obj, schema).map_err(StoreError::Corrupt)?;
                if !by_rid.contains_key(&rec.rid) {
                    return Err(StoreError::Corrupt(format!(
                        "{storage_ref}: modifies rid {} absent from base",
                        rec.rid
                    )));
                }
                by_rid.insert(rec.rid, rec);
            }
            for obj in added {
                let rec = record_from_json(&obj, schema).map_err(StoreError::Corrupt)?;
                if by_rid.contains_key(&rec.rid) {
                    return Err(StoreError::Corrupt(format!(
                        "{storage_ref}: adds rid {} already in base",
                        rec.rid
                    )));
                }
                by_rid.insert(rec.rid, rec);
            }
            Ok(by_rid.into_values().collect())
        }
    }
}

fn diff_records<'a>(
    base: &'a [Record],
    new: &'a [Record],
) -> (Vec<&'a Record>, Vec<u64>, Vec<&'a Record>) {
    let base_by_rid: BTreeMap<u64, &Record> = base.iter().map(|r| (r.rid, r)).collect();
    let new_rids: HashSet<u64> = new.iter().map(|r| r.rid).collect();
    let mut added = Vec::new();
    let mut modified = Vec::new();
    for rec in new {
        match base_by_rid.get(&rec.rid) {
            None => added.push(rec),
            Some(b) if b.fields != rec.fields => modified.push(rec),
            Some(_) => {}
        }
    }
    let removed: Vec<u64> = base
        .iter()
        .filter(|r| !new_rids.contains(&r.rid))
        .map(|r| r.rid)
        .collect();
    (added, removed, modified)
}

/// Resolve record ids for one container. Explicit rids are honored; records
/// without one inherit the rid of an unclaimed content-identical base record
/// or get a fresh id above every rid seen so far.
fn assign_rids(
    container: &str,
    inputs: &[RecordInput],
    base: Option<&[Record]>,
) -> Result<Vec<Record>, StoreError> {
    let mut used: BTreeSet<u64> = BTreeSet::new();
    for r in inputs.iter().filter_map(|r| r.rid) {
        if !used.insert(r) {
            return Err(StoreError::DuplicateRid { container: container.to_string(), rid: r });
        }
    }
    let base_records = base.unwrap_or(&[]);
    let mut next = base_records
        .iter()
        .map(|r| r.rid)
        .chain(used.iter().copied())
        .max()
        .unwrap_or(0)
        + 1;
    // base records not claimed by an explicit rid, available for inheritance
    let mut available: Vec<&Record> = base_records.iter().filter(|r| !used.contains(&r.rid)).collect();

    let mut out = Vec::with_capacity(inputs.len());
    for input in inputs {
        let rid = match input.rid {
            Some(rid) => rid,
            None => {
                let found = available.iter().position(|b| b.fields == input.fields);
                match found {
                    Some(pos) => {
                        let rid = available[pos].rid;
                        available.remove(pos);
                        if !used.insert(rid) {
                            return Err(StoreError::DuplicateRid {
                                container: container.to_string(),
                                rid,
                            });
                        }
                        rid
                    }
                    None => {
                        let rid = next;
                        next += 1;
                        used.insert(rid);
                        rid
                    }
                }
            }
        };
        out.push(Record::new(rid, input.fields.clone()));
    }
    Ok(out)
}

fn validate_schema(input: &RelationInput) -> Result<(), StoreError> {
    let mut names = HashSet::new();
    for (col, _) in &input.schema {
        if col == layout::RID_KEY {
            return Err(StoreError::Schema {
                container: input.name.clone(),
                detail: format!("{:?} is reserved", layout::RID_KEY),
            });
        }
        if !names.insert(col.as_str()) {
            return Err(StoreError::Schema {
                container: input.name.clone(),
                detail: format!("duplicate column {col:?}"),
            });
        }
    }
    let columns: BTreeSet<&str> = input.schema.iter().map(|(n, _)| n.as_str()).collect();
    for (i, rec) in input.tuples.iter().enumerate() {
        let fields: BTreeSet<&str> = rec.fields.keys().map(|s| s.as_str()).collect();
        if fields != columns {
            return Err(StoreError::Schema {
                container: input.name.clone(),
                detail: format!("tuple {i} has fields {fields:?}, schema declares {columns:?}"),
            });
        }
        for (col, ty) in &input.schema {
            let v = &rec.fields[col];
            if !ty.admits(v) {
                return Err(StoreError::Schema {
                    container: input.name.clone(),
                    detail: format!("tuple {i}: column {col:?} declared {} holds {}", ty.name(), v.type_name()),
                });
            }
        }
    }
    Ok(())
}

fn container_key(kind: &str, name: &str) -> Result<ContainerKey, StoreError> {
    match kind {
        "relation" => Ok(ContainerKey::Relation(name.to_string())),
        "file" => Ok(ContainerKey::File(name.to_string())),
        other => Err(StoreError::Corrupt(format!("unknown container kind {other:?}"))),
    }
}

fn counter_of(id: &str) -> Option<u64> {
    id.strip_prefix('v').and_then(|n| n.parse().ok())
}

fn chain_depth(
    storage_ref: &str,
    kinds: &HashMap<String, StorageKind>,
    memo: &mut HashMap<String, u32>,
) -> Result<u32, StoreError> {
    if let Some(&d) = memo.get(storage_ref) {
        return Ok(d);
    }
    let mut chain = Vec::new();
    let mut current = storage_ref.to_string();
    let depth = loop {
        if let Some(&d) = memo.get(&current) {
            break d;
        }
        match kinds.get(&current) {
            None => return Err(StoreError::Corrupt(format!("missing object {current}"))),
            Some(StorageKind::Snapshot) => break 0,
            Some(StorageKind::Delta { base }) => {
                if chain.len() > kinds.len() {
                    return Err(StoreError::Corrupt(format!("delta cycle through {storage_ref}")));
                }
                chain.push(current.clone());
                current = base.clone();
            }
        }
    };
    memo.insert(current, depth);
    for (i, r) in chain.iter().rev().enumerate() {
        memo.insert(r.clone(), depth + 1 + i as u32);
    }
    Ok(memo[storage_ref])
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn fresh_ref(existing: &HashSet<String>, vid: &str, key: &ContainerKey) -> String {
    let prefix = match key {
        ContainerKey::Relation(n) => format!("{}_rel_{}", sanitize(vid), sanitize(n)),
        ContainerKey::File(p) => format!("{}_file_{}", sanitize(vid), sanitize(p)),
    };
    if !existing.contains(&prefix) {
        return prefix;
    }
    let mut i = 2;
    loop {
        let candidate = format!("{prefix}_{i}");
        if !existing.contains(&candidate) {
            return candidate;
        }
        i += 1;
    }
}

fn object_path(root: &Path, storage_ref: &str) -> PathBuf {
    root.join("objects").join(format!("{storage_ref}.json"))
}

fn read_object(root: &Path, storage_ref: &str) -> Result<ObjectFile, StoreError> {
    let path = object_path(root, storage_ref);
    let raw = fs::read_to_string(&path)?;
    serde_json::from_str(&raw).map_err(|e| StoreError::Json(path, e))
}

fn write_object(root: &Path, storage_ref: &str, object: &ObjectFile) -> Result<(), StoreError> {
    let path = object_path(root, storage_ref);
    write_atomic(&path, serde_json::to_string_pretty(object).unwrap().as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Exclusive on-disk writer lock, released on drop.
struct LockFile {
    path: PathBuf,
}

impl LockFile {
    fn acquire(root: &Path) -> Result<LockFile, StoreError> {
        let path = root.join(".lock");
        let deadline = std::time::Instant::now() + Duration::from_secs(5);
        loop {
            match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(LockFile { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if std::time::Instant::now() >= deadline {
                        return Err(StoreError::Locked);
                    }
                    std::thread::sleep(Duration::from_millis(25));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Bytes a version would occupy if every container were stored as a full
/// snapshot in this store's object encoding. Baseline for storage-size
/// comparisons.
pub fn full_copy_bytes(version: &MaterializedVersion) -> u64 {
    let mut total = 0;
    for container in version.containers() {
        let object = ObjectFile::Snapshot {
            records: container.records().iter().map(layout::record_to_json).collect(),
        };
        total += serde_json::to_string_pretty(&object).unwrap().len() as u64;
    }
    total
}

/// (serialized object bytes, manifest bytes), used by storage-size checks.
pub fn disk_usage(root: &Path) -> std::io::Result<(u64, u64)> {
    let mut objects = 0;
    for entry in fs::read_dir(root.join("objects"))? {
        objects += entry?.metadata()?.len();
    }
    let manifest = fs::metadata(root.join("manifest.json"))?.len();
    Ok((objects, manifest))
}
