//! Runtime entity references and entity attribute access.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use vquel_core::model::{Author, Container, ContainerKey, MaterializedVersion, Record};
use vquel_core::repo::VersionRepo;
use vquel_core::value::format_timestamp;
use vquel_core::{graph, Value};

use vquel_frontend::ast::{Span, Step, StepKind};

use crate::error::EngineError;
use crate::eval::filter_admits;

/// The value of an iterator binding: a handle to an entity somewhere in the
/// repository, or a row of a derived set. Records and containers carry
/// their enclosing version, so up-references resolve from the handle alone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EntityRef {
    Version { vid: String },
    Relation { vid: String, name: String },
    File { vid: String, path: String },
    Record { vid: String, container: ContainerKey, rid: u64 },
    /// Derived-set row without an entity origin.
    Row { set: String, index: usize },
}

impl EntityRef {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EntityRef::Version { .. } => "version",
            EntityRef::Relation { .. } => "relation",
            EntityRef::File { .. } => "file",
            EntityRef::Record { .. } => "record",
            EntityRef::Row { .. } => "derived row",
        }
    }
}

/// Rows of a `retrieve into` result, iterable by later statements. When
/// the defining target list was a single `.all` over entities, each row
/// remembers the entity it came from, so entity attributes, provenance
/// steps, and up-references keep working on the derived iterator.
#[derive(Debug, Clone)]
pub struct DerivedSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub origins: Option<Vec<EntityRef>>,
}

/// Read-only evaluation context: the repository plus derived sets built by
/// earlier statements.
pub struct Ctx<'a, R: VersionRepo + ?Sized> {
    pub repo: &'a R,
    pub derived: HashMap<String, Rc<DerivedSet>>,
}

impl<'a, R: VersionRepo + ?Sized> Ctx<'a, R> {
    pub fn new(repo: &'a R) -> Ctx<'a, R> {
        Ctx { repo, derived: HashMap::new() }
    }

    pub fn materialize(&self, vid: &str, span: Span) -> Result<Arc<MaterializedVersion>, EngineError> {
        self.repo
            .materialize(vid)
            .map_err(|e| EngineError::new(e.to_string(), span))
    }

    fn container<'v>(
        &self,
        version: &'v MaterializedVersion,
        key: &ContainerKey,
        span: Span,
    ) -> Result<Container<'v>, EngineError> {
        match key {
            ContainerKey::Relation(name) => version.relation(name).map(Container::Relation),
            ContainerKey::File(path) => version.file(path).map(Container::File),
        }
        .ok_or_else(|| {
            EngineError::new(format!("{key} not found in version {:?}", version.meta.id), span)
        })
    }

    pub fn record(
        &self,
        vid: &str,
        key: &ContainerKey,
        rid: u64,
        span: Span,
    ) -> Result<Record, EngineError> {
        let version = self.materialize(vid, span)?;
        let container = self.container(&version, key, span)?;
        let records = container.records();
        records
            .binary_search_by_key(&rid, |r| r.rid)
            .ok()
            .map(|i| records[i].clone())
            .ok_or_else(|| EngineError::new(format!("record {rid} not found in {vid}/{key}"), span))
    }

    /// Scalar attribute of an entity, with the conventional aliases
    /// (`commit_id` = `id`, `commit_ts` = `creation_ts`, `commit_message` =
    /// `commit_msg`, record `id` = its rid unless shadowed by a field).
    pub fn scalar_attr(&self, entity: &EntityRef, attr: &str, span: Span) -> Result<Value, EngineError> {
        match entity {
            EntityRef::Version { vid } => {
                let meta = self
                    .repo
                    .meta(vid)
                    .ok_or_else(|| EngineError::new(format!("unknown version {vid:?}"), span))?;
                match attr {
                    "id" | "commit_id" => Ok(Value::Str(meta.id)),
                    "creation_ts" | "commit_ts" => Ok(Value::timestamp(meta.creation_ts)),
                    "commit_msg" | "commit_message" => Ok(Value::Str(meta.commit_msg)),
                    _ => Err(EngineError::new(format!("versions have no attribute {attr:?}"), span)),
                }
            }
            EntityRef::Relation { vid, name } => {
                let version = self.materialize(vid, span)?;
                let rel = version
                    .relation(name)
                    .ok_or_else(|| EngineError::new(format!("relation {name:?} missing"), span))?;
                match attr {
                    "name" => Ok(Value::Str(rel.name.clone())),
                    "changed" => Ok(Value::Bool(rel.changed)),
                    _ => Err(EngineError::new(format!("relations have no attribute {attr:?}"), span)),
                }
            }
            EntityRef::File { vid, path } => {
                let version = self.materialize(vid, span)?;
                let file = version
                    .file(path)
                    .ok_or_else(|| EngineError::new(format!("file {path:?} missing"), span))?;
                match attr {
                    "full_path" => Ok(Value::Str(file.full_path.clone())),
                    "changed" => Ok(Value::Bool(file.changed)),
                    _ => Err(EngineError::new(format!("files have no attribute {attr:?}"), span)),
                }
            }
            EntityRef::Record { vid, container, rid } => {
                let record = self.record(vid, container, *rid, span)?;
                if let Some(v) = record.fields.get(attr) {
                    return Ok(v.clone());
                }
                if attr == "id" {
                    return Ok(Value::Int(*rid as i64));
                }
                Ok(Value::Null)
            }
            EntityRef::Row { set, index } => {
                let ds = self
                    .derived
                    .get(set)
                    .ok_or_else(|| EngineError::new(format!("unknown derived set {set:?}"), span))?;
                let col = ds.columns.iter().position(|c| c == attr).ok_or_else(|| {
                    EngineError::new(format!("derived set {set} has no column {attr:?}"), span)
                })?;
                Ok(ds.rows[*index][col].clone())
            }
        }
    }

    pub fn author_of(&self, entity: &EntityRef, span: Span) -> Result<Author, EngineError> {
        match entity {
            EntityRef::Version { vid } => self
                .repo
                .meta(vid)
                .map(|m| m.author)
                .ok_or_else(|| EngineError::new(format!("unknown version {vid:?}"), span)),
            other => Err(EngineError::new(
                format!("attribute .author does not apply to a {} binding", other.kind_name()),
                span,
            )),
        }
    }

    /// All attributes of an entity in display order: version metadata in
    /// fixed order, relation tuples in schema order, file records by field
    /// name, derived rows in column order.
    pub fn all_fields(&self, entity: &EntityRef, span: Span) -> Result<Vec<(String, Value)>, EngineError> {
        match entity {
            EntityRef::Version { vid } => {
                let meta = self
                    .repo
                    .meta(vid)
                    .ok_or_else(|| EngineError::new(format!("unknown version {vid:?}"), span))?;
                Ok(vec![
                    ("id".into(), Value::Str(meta.id.clone())),
                    ("creation_ts".into(), Value::timestamp(meta.creation_ts)),
                    ("commit_msg".into(), Value::Str(meta.commit_msg.clone())),
                    ("author_name".into(), Value::Str(meta.author.name.clone())),
                ])
            }
            EntityRef::Relation { .. } => Ok(vec![
                ("name".into(), self.scalar_attr(entity, "name", span)?),
                ("changed".into(), self.scalar_attr(entity, "changed", span)?),
            ]),
            EntityRef::File { .. } => Ok(vec![
                ("full_path".into(), self.scalar_attr(entity, "full_path", span)?),
                ("changed".into(), self.scalar_attr(entity, "changed", span)?),
            ]),
            EntityRef::Record { vid, container, rid } => {
                let record = self.record(vid, container, *rid, span)?;
                if let ContainerKey::Relation(name) = container {
                    let version = self.materialize(vid, span)?;
                    let schema = &version.relation(name).unwrap().schema;
                    return Ok(schema
                        .iter()
                        .map(|(col, _)| (col.clone(), record.fields.get(col).cloned().unwrap_or(Value::Null)))
                        .collect());
                }
                Ok(record.fields.into_iter().collect())
            }
            EntityRef::Row { set, index } => {
                let ds = self
                    .derived
                    .get(set)
                    .ok_or_else(|| EngineError::new(format!("unknown derived set {set:?}"), span))?;
                Ok(ds
                    .columns
                    .iter()
                    .cloned()
                    .zip(ds.rows[*index].iter().cloned())
                    .collect())
            }
        }
    }

    /// Version ids ordered the way queries enumerate them.
    pub fn ordered_versions(&self, ids: impl IntoIterator<Item = String>) -> Vec<String> {
        let mut keyed: Vec<(_, String)> = ids
            .into_iter()
            .map(|id| {
                let ts = self.repo.meta(&id).map(|m| m.creation_ts);
                (ts.map(|t| format_timestamp(&t)), id)
            })
            .collect();
        keyed.sort();
        keyed.into_iter().map(|(_, id)| id).collect()
    }

    /// Expand one set-valued step from an entity, applying its inline
    /// filter. Deterministic order: versions by (creation_ts, id),
    /// containers by name, records by rid, provenance refs by
    /// (version, container, rid).
    pub fn enumerate_step(&self, entity: &EntityRef, step: &Step) -> Result<Vec<EntityRef>, EngineError> {
        let span = step.span;
        let not_applicable = || {
            EngineError::new(
                format!(
                    "attribute .{} does not apply to a {} binding",
                    step.kind.name(),
                    entity.kind_name()
                ),
                span,
            )
        };
        let out: Vec<EntityRef> = match (&step.kind, entity) {
            (StepKind::Relations, EntityRef::Version { vid }) => {
                let version = self.materialize(vid, span)?;
                version
                    .relations
                    .iter()
                    .map(|r| EntityRef::Relation { vid: vid.clone(), name: r.name.clone() })
                    .collect()
            }
            (StepKind::Files, EntityRef::Version { vid }) => {
                let version = self.materialize(vid, span)?;
                version
                    .files
                    .iter()
                    .map(|f| EntityRef::File { vid: vid.clone(), path: f.full_path.clone() })
                    .collect()
            }
            (StepKind::Tuples, EntityRef::Relation { vid, name }) => {
                let version = self.materialize(vid, span)?;
                let rel = version
                    .relation(name)
                    .ok_or_else(|| EngineError::new(format!("relation {name:?} missing"), span))?;
                rel.tuples
                    .iter()
                    .map(|t| EntityRef::Record {
                        vid: vid.clone(),
                        container: ContainerKey::Relation(name.clone()),
                        rid: t.rid,
                    })
                    .collect()
            }
            (StepKind::Records, EntityRef::File { vid, path }) => {
                let version = self.materialize(vid, span)?;
                let file = version
                    .file(path)
                    .ok_or_else(|| EngineError::new(format!("file {path:?} missing"), span))?;
                file.records
                    .iter()
                    .map(|r| EntityRef::Record {
                        vid: vid.clone(),
                        container: ContainerKey::File(path.clone()),
                        rid: r.rid,
                    })
                    .collect()
            }
            (StepKind::Parents, EntityRef::Version { vid }) => {
                let meta = self
                    .repo
                    .meta(vid)
                    .ok_or_else(|| EngineError::new(format!("unknown version {vid:?}"), span))?;
                self.ordered_versions(meta.parents)
                    .into_iter()
                    .map(|vid| EntityRef::Version { vid })
                    .collect()
            }
            (StepKind::Children, EntityRef::Version { vid }) => {
                let meta = self
                    .repo
                    .meta(vid)
                    .ok_or_else(|| EngineError::new(format!("unknown version {vid:?}"), span))?;
                self.ordered_versions(meta.children)
                    .into_iter()
                    .map(|vid| EntityRef::Version { vid })
                    .collect()
            }
            (StepKind::Parents, EntityRef::Record { vid, container, rid }) => {
                let record = self.record(vid, container, *rid, span)?;
                self.resolve_record_refs(record.parents.into_iter(), span)?
            }
            (StepKind::Children, EntityRef::Record { vid, container, rid }) => {
                let record = self.record(vid, container, *rid, span)?;
                self.resolve_record_refs(record.children.into_iter(), span)?
            }
            (
                StepKind::Ancestors | StepKind::Descendants | StepKind::Neighbors,
                EntityRef::Version { vid },
            ) => {
                if step.hops == Some(0) {
                    vec![]
                } else {
                    let hops = step.hops.map(|h| h as usize);
                    let set = match step.kind {
                        StepKind::Ancestors => graph::ancestors(self.repo, vid, hops),
                        StepKind::Descendants => graph::descendants(self.repo, vid, hops),
                        StepKind::Neighbors => {
                            graph::neighborhood(self.repo, vid, hops.unwrap_or(usize::MAX))
                        }
                        _ => unreachable!(),
                    }
                    .map_err(|e| EngineError::new(e.to_string(), span))?;
                    self.ordered_versions(set)
                        .into_iter()
                        .map(|vid| EntityRef::Version { vid })
                        .collect()
                }
            }
            _ => return Err(not_applicable()),
        };
        if step.filter.is_empty() {
            return Ok(out);
        }
        let mut kept = Vec::new();
        for entity in out {
            if filter_admits(self, &entity, &step.filter)? {
                kept.push(entity);
            }
        }
        Ok(kept)
    }

    fn resolve_record_refs(
        &self,
        refs: impl Iterator<Item = vquel_core::RecordRef>,
        span: Span,
    ) -> Result<Vec<EntityRef>, EngineError> {
        let mut out = Vec::new();
        for r in refs {
            let version = self.materialize(&r.version_id, span)?;
            let container = version
                .container_named(&r.container)
                .ok_or_else(|| {
                    EngineError::new(
                        format!("provenance ref {r} names a missing container"),
                        span,
                    )
                })?
                .key();
            out.push(EntityRef::Record { vid: r.version_id, container, rid: r.rid });
        }
        Ok(out)
    }
}
