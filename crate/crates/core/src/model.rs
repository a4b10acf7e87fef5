//! Entities of the conceptual data model: versions, relations, files,
//! records, and record-level provenance references.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::value::{canon_cmp_fields, Value};

/// Commit author. The name is required and non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Author {
    pub name: String,
    pub email: Option<String>,
}

impl Author {
    pub fn new(name: impl Into<String>) -> Author {
        Author { name: name.into(), email: None }
    }

    pub fn with_email(name: impl Into<String>, email: impl Into<String>) -> Author {
        Author { name: name.into(), email: Some(email.into()) }
    }
}

/// Column types a relation schema may declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnType {
    Int,
    Float,
    Bool,
    Str,
    Timestamp,
}

impl ColumnType {
    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Int => "int",
            ColumnType::Float => "float",
            ColumnType::Bool => "bool",
            ColumnType::Str => "string",
            ColumnType::Timestamp => "timestamp",
        }
    }

    pub fn parse(s: &str) -> Option<ColumnType> {
        Some(match s {
            "int" => ColumnType::Int,
            "float" => ColumnType::Float,
            "bool" => ColumnType::Bool,
            "string" => ColumnType::Str,
            "timestamp" => ColumnType::Timestamp,
            _ => return None,
        })
    }

    /// Null conforms to every column type.
    pub fn admits(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (_, Value::Null)
                | (ColumnType::Int, Value::Int(_))
                | (ColumnType::Float, Value::Float(_))
                | (ColumnType::Bool, Value::Bool(_))
                | (ColumnType::Str, Value::Str(_))
                | (ColumnType::Timestamp, Value::Timestamp(_))
        )
    }
}

/// Reference to a single record: version, container discriminator, record id.
/// When a version holds a relation and a file with the same name the relation
/// wins at resolution time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordRef {
    pub version_id: String,
    pub container: String,
    pub rid: u64,
}

impl fmt::Display for RecordRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.version_id, self.container, self.rid)
    }
}

impl RecordRef {
    pub fn new(version_id: impl Into<String>, container: impl Into<String>, rid: u64) -> RecordRef {
        RecordRef { version_id: version_id.into(), container: container.into(), rid }
    }

    /// Parse `<version>/<container>/<rid>`. Container names may contain `/`,
    /// so the version is everything before the first slash and the rid
    /// everything after the last.
    pub fn parse(s: &str) -> Option<RecordRef> {
        let (version, rest) = s.split_once('/')?;
        let (container, rid) = rest.rsplit_once('/')?;
        if version.is_empty() || container.is_empty() {
            return None;
        }
        Some(RecordRef { version_id: version.to_string(), container: container.to_string(), rid: rid.parse().ok()? })
    }
}

/// A record: system-assigned id, field map, provenance edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub rid: u64,
    pub fields: BTreeMap<String, Value>,
    pub parents: BTreeSet<RecordRef>,
    pub children: BTreeSet<RecordRef>,
}

impl Record {
    pub fn new(rid: u64, fields: BTreeMap<String, Value>) -> Record {
        Record { rid, fields, parents: BTreeSet::new(), children: BTreeSet::new() }
    }
}

/// Relation within one version: fixed schema, tuple multiset, `changed` flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSnapshot {
    pub name: String,
    pub schema: Vec<(String, ColumnType)>,
    pub tuples: Vec<Record>,
    pub changed: bool,
}

/// File within one version: schemaless record multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSnapshot {
    pub full_path: String,
    pub records: Vec<Record>,
    pub changed: bool,
}

/// Discriminator for a container within a version.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContainerKey {
    Relation(String),
    File(String),
}

impl ContainerKey {
    pub fn name(&self) -> &str {
        match self {
            ContainerKey::Relation(n) | ContainerKey::File(n) => n,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ContainerKey::Relation(_) => "relation",
            ContainerKey::File(_) => "file",
        }
    }
}

impl fmt::Display for ContainerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind(), self.name())
    }
}

/// Borrowed view over either container kind.
#[derive(Debug, Clone, Copy)]
pub enum Container<'a> {
    Relation(&'a RelationSnapshot),
    File(&'a FileSnapshot),
}

impl<'a> Container<'a> {
    pub fn key(&self) -> ContainerKey {
        match self {
            Container::Relation(r) => ContainerKey::Relation(r.name.clone()),
            Container::File(f) => ContainerKey::File(f.full_path.clone()),
        }
    }

    pub fn records(&self) -> &'a [Record] {
        match self {
            Container::Relation(r) => &r.tuples,
            Container::File(f) => &f.records,
        }
    }

    pub fn changed(&self) -> bool {
        match self {
            Container::Relation(r) => r.changed,
            Container::File(f) => f.changed,
        }
    }
}

/// Per-container metadata as recorded in the version index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerMeta {
    pub key: ContainerKey,
    pub changed: bool,
    pub schema: Option<Vec<(String, ColumnType)>>,
}

/// Version metadata: everything except container contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionMeta {
    pub id: String,
    pub author: Author,
    pub creation_ts: DateTime<Utc>,
    pub commit_msg: String,
    pub parents: Vec<String>,
    pub children: Vec<String>,
    pub containers: Vec<ContainerMeta>,
}

/// A fully expanded version: metadata plus all container contents.
/// Construction canonicalizes order (relations by name, files by path,
/// records by rid) so downstream enumeration is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializedVersion {
    pub meta: VersionMeta,
    pub relations: Vec<RelationSnapshot>,
    pub files: Vec<FileSnapshot>,
}

impl MaterializedVersion {
    pub fn new(
        meta: VersionMeta,
        mut relations: Vec<RelationSnapshot>,
        mut files: Vec<FileSnapshot>,
    ) -> MaterializedVersion {
        relations.sort_by(|a, b| a.name.cmp(&b.name));
        files.sort_by(|a, b| a.full_path.cmp(&b.full_path));
        for r in &mut relations {
            r.tuples.sort_by_key(|t| t.rid);
        }
        for f in &mut files {
            f.records.sort_by_key(|r| r.rid);
        }
        MaterializedVersion { meta, relations, files }
    }

    pub fn containers(&self) -> impl Iterator<Item = Container<'_>> {
        self.relations
            .iter()
            .map(Container::Relation)
            .chain(self.files.iter().map(Container::File))
    }

    pub fn relation(&self, name: &str) -> Option<&RelationSnapshot> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn file(&self, path: &str) -> Option<&FileSnapshot> {
        self.files.iter().find(|f| f.full_path == path)
    }

    /// Resolve a container by discriminator name; relations shadow files.
    pub fn container_named(&self, name: &str) -> Option<Container<'_>> {
        if let Some(r) = self.relation(name) {
            return Some(Container::Relation(r));
        }
        self.file(name).map(Container::File)
    }

    pub fn record(&self, container: &str, rid: u64) -> Option<&Record> {
        self.container_named(container)?.records().iter().find(|r| r.rid == rid)
    }
}

/// Content equality of two record multisets: field maps compared as
/// multisets, ignoring rids and provenance edges.
pub fn same_content(a: &[Record], b: &[Record]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fa: Vec<&BTreeMap<String, Value>> = a.iter().map(|r| &r.fields).collect();
    let mut fb: Vec<&BTreeMap<String, Value>> = b.iter().map(|r| &r.fields).collect();
    fa.sort_by(|x, y| canon_cmp_fields(x, y));
    fb.sort_by(|x, y| canon_cmp_fields(x, y));
    fa == fb
}

/// A repository held entirely in memory, every version fully expanded.
/// This is both the model container that `validate_repository` checks and
/// the full-copy baseline that the delta store is measured against.
#[derive(Debug, Clone, Default)]
pub struct InMemoryRepo {
    versions: Vec<Arc<MaterializedVersion>>,
    index: HashMap<String, usize>,
}

impl InMemoryRepo {
    pub fn new() -> InMemoryRepo {
        InMemoryRepo::default()
    }

    /// Insert a version. Parent/child edges are taken as given; call
    /// [`InMemoryRepo::link_edges`] to derive children from parents.
    pub fn insert(&mut self, version: MaterializedVersion) {
        let id = version.meta.id.clone();
        self.index.insert(id, self.versions.len());
        self.versions.push(Arc::new(version));
    }

    /// Recompute every version's `children` list from the parent edges.
    pub fn link_edges(&mut self) {
        let mut children: HashMap<String, Vec<String>> = HashMap::new();
        for v in &self.versions {
            for p in &v.meta.parents {
                children.entry(p.clone()).or_default().push(v.meta.id.clone());
            }
        }
        for v in &mut self.versions {
            let m = Arc::make_mut(v);
            m.meta.children = children.remove(&m.meta.id).unwrap_or_default();
            m.meta.children.sort();
        }
    }

    /// Recompute record `children` sets from the `parents` sets.
    pub fn link_provenance(&mut self) {
        let mut by_parent: HashMap<RecordRef, BTreeSet<RecordRef>> = HashMap::new();
        for v in &self.versions {
            let vid = &v.meta.id;
            for c in v.containers() {
                let cname = c.key().name().to_string();
                for rec in c.records() {
                    let child = RecordRef::new(vid.clone(), cname.clone(), rec.rid);
                    for p in &rec.parents {
                        by_parent.entry(p.clone()).or_default().insert(child.clone());
                    }
                }
            }
        }
        for v in &mut self.versions {
            let m = Arc::make_mut(v);
            let vid = m.meta.id.clone();
            for i in 0..m.relations.len() {
                let name = m.relations[i].name.clone();
                for t in &mut m.relations[i].tuples {
                    let me = RecordRef::new(vid.clone(), name.clone(), t.rid);
                    t.children = by_parent.get(&me).cloned().unwrap_or_default();
                }
            }
            for i in 0..m.files.len() {
                let path = m.files[i].full_path.clone();
                for r in &mut m.files[i].records {
                    let me = RecordRef::new(vid.clone(), path.clone(), r.rid);
                    r.children = by_parent.get(&me).cloned().unwrap_or_default();
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.versions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.versions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Arc<MaterializedVersion>> {
        self.index.get(id).map(|&i| &self.versions[i])
    }

    /// Versions in insertion (commit) order.
    pub fn iter(&self) -> impl Iterator<Item = &Arc<MaterializedVersion>> {
        self.versions.iter()
    }

    /// Mutable access for tests that seed corruptions.
    pub fn get_mut(&mut self, id: &str) -> Option<&mut MaterializedVersion> {
        let i = *self.index.get(id)?;
        Some(Arc::make_mut(&mut self.versions[i]))
    }
}
