//! Whole-repository integrity checking. Violations are data, not errors:
//! the caller gets every broken invariant at once.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::changed::compute_changed;
use crate::graph::{ancestors, topo_sort};
use crate::model::{ContainerKey, InMemoryRepo, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// The version graph contains a cycle.
    GraphCycle,
    /// A parent or child edge names a missing version, or the two edge sets
    /// disagree.
    DanglingEdge,
    /// A provenance edge does not resolve, or resolves outside the strict
    /// ancestors of the record's version.
    ProvenanceViolation,
    /// A tuple does not conform to its relation's schema.
    SchemaViolation,
    /// A stored `changed` flag disagrees with recomputation.
    ChangedFlagMismatch,
    /// Relation name or file path repeated within one version.
    DuplicateDiscriminator,
    /// Record id repeated within one container.
    DuplicateRecordId,
    /// Version id repeated across the repository.
    DuplicateVersionId,
    /// Author name empty.
    EmptyAuthorName,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::GraphCycle => "graph cycle",
            ViolationKind::DanglingEdge => "dangling edge",
            ViolationKind::ProvenanceViolation => "provenance edge violates version graph",
            ViolationKind::SchemaViolation => "schema violation",
            ViolationKind::ChangedFlagMismatch => "changed flag mismatch",
            ViolationKind::DuplicateDiscriminator => "duplicate discriminator",
            ViolationKind::DuplicateRecordId => "duplicate record id",
            ViolationKind::DuplicateVersionId => "duplicate version id",
            ViolationKind::EmptyAuthorName => "empty author name",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

/// Check every repository invariant; an empty result means the repository is
/// valid.
pub fn validate_repository(repo: &InMemoryRepo) -> Vec<Violation> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Violation>, kind, detail: String| {
        out.push(Violation { kind, detail });
    };

    let mut seen_ids = HashSet::new();
    for v in repo.iter() {
        if !seen_ids.insert(v.meta.id.clone()) {
            push(&mut out, ViolationKind::DuplicateVersionId, format!("version {:?}", v.meta.id));
        }
        if v.meta.author.name.is_empty() {
            push(&mut out, ViolationKind::EmptyAuthorName, format!("version {:?}", v.meta.id));
        }
    }

    // edges exist and are mutually consistent
    for v in repo.iter() {
        for p in &v.meta.parents {
            match repo.get(p) {
                None => push(
                    &mut out,
                    ViolationKind::DanglingEdge,
                    format!("version {:?} lists missing parent {:?}", v.meta.id, p),
                ),
                Some(parent) => {
                    if !parent.meta.children.contains(&v.meta.id) {
                        push(
                            &mut out,
                            ViolationKind::DanglingEdge,
                            format!("{:?} -> parent {:?} edge not mirrored", v.meta.id, p),
                        );
                    }
                }
            }
        }
        for c in &v.meta.children {
            match repo.get(c) {
                None => push(
                    &mut out,
                    ViolationKind::DanglingEdge,
                    format!("version {:?} lists missing child {:?}", v.meta.id, c),
                ),
                Some(child) => {
                    if !child.meta.parents.contains(&v.meta.id) {
                        push(
                            &mut out,
                            ViolationKind::DanglingEdge,
                            format!("{:?} -> child {:?} edge not mirrored", v.meta.id, c),
                        );
                    }
                }
            }
        }
    }

    if topo_sort(repo).is_none() {
        push(&mut out, ViolationKind::GraphCycle, "version graph is not a DAG".to_string());
    }

    for v in repo.iter() {
        // discriminators
        let mut keys = HashSet::new();
        for c in v.containers() {
            if !keys.insert(c.key()) {
                push(
                    &mut out,
                    ViolationKind::DuplicateDiscriminator,
                    format!("{} repeated in version {:?}", c.key(), v.meta.id),
                );
            }
        }
        // schema conformance and duplicate rids
        for r in &v.relations {
            check_rids(&mut out, &v.meta.id, &r.name, &r.tuples);
            let columns: BTreeSet<&str> = r.schema.iter().map(|(n, _)| n.as_str()).collect();
            for t in &r.tuples {
                let fields: BTreeSet<&str> = t.fields.keys().map(|s| s.as_str()).collect();
                if fields != columns {
                    push(
                        &mut out,
                        ViolationKind::SchemaViolation,
                        format!(
                            "tuple {} of relation {:?} in {:?} has fields {:?}, schema declares {:?}",
                            t.rid, r.name, v.meta.id, fields, columns
                        ),
                    );
                    continue;
                }
                for (col, ty) in &r.schema {
                    let val = &t.fields[col];
                    if !ty.admits(val) {
                        push(
                            &mut out,
                            ViolationKind::SchemaViolation,
                            format!(
                                "tuple {} of relation {:?} in {:?}: column {:?} declared {} holds {}",
                                t.rid, r.name, v.meta.id, col, ty.name(), val.type_name()
                            ),
                        );
                    }
                }
            }
        }
        for f in &v.files {
            check_rids(&mut out, &v.meta.id, &f.full_path, &f.records);
        }
    }

    // provenance obeys the version graph
    let cyclic = topo_sort(repo).is_none();
    for v in repo.iter() {
        let strict_ancestors = if cyclic {
            BTreeSet::new()
        } else {
            ancestors(repo, &v.meta.id, None).unwrap_or_default()
        };
        for c in v.containers() {
            for rec in c.records() {
                for p in &rec.parents {
                    let resolves = repo
                        .get(&p.version_id)
                        .and_then(|pv| pv.record(&p.container, p.rid))
                        .is_some();
                    if !resolves {
                        push(
                            &mut out,
                            ViolationKind::ProvenanceViolation,
                            format!(
                                "record {}/{}/{} lists unresolvable parent {}",
                                v.meta.id, c.key().name(), rec.rid, p
                            ),
                        );
                    } else if !strict_ancestors.contains(&p.version_id) {
                        push(
                            &mut out,
                            ViolationKind::ProvenanceViolation,
                            format!(
                                "record {}/{}/{} has parent {} outside its ancestor versions",
                                v.meta.id, c.key().name(), rec.rid, p
                            ),
                        );
                    }
                }
            }
        }
    }

    // stored changed flags match recomputation
    for v in repo.iter() {
        if let Ok(expected) = compute_changed(repo, &v.meta.id) {
            for c in v.containers() {
                let key: ContainerKey = c.key();
                if let Some(&want) = expected.get(&key) {
                    if want != c.changed() {
                        push(
                            &mut out,
                            ViolationKind::ChangedFlagMismatch,
                            format!(
                                "{} in {:?} stored changed={}, recomputed {}",
                                key, v.meta.id, c.changed(), want
                            ),
                        );
                    }
                }
            }
        }
    }

    out
}

fn check_rids(out: &mut Vec<Violation>, vid: &str, container: &str, records: &[Record]) {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.rid) {
            out.push(Violation {
                kind: ViolationKind::DuplicateRecordId,
                detail: format!("rid {} repeated in {}/{}", r.rid, vid, container),
            });
        }
    }
}
