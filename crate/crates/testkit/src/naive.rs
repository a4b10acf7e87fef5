//! Full-copy repository builder: every version held fully expanded, with
//! `changed` flags recomputed by direct multiset matching. Serves as the
//! storage oracle the delta store is compared against.

use std::collections::BTreeMap;

use vquel_core::model::{
    Author, ContainerMeta, FileSnapshot, InMemoryRepo, MaterializedVersion, Record,
    RelationSnapshot, VersionMeta,
};
use vquel_core::{ContainerKey, Value};

use crate::script::{CommitScript, CommitSpec};

/// Build the full-copy repository a script describes.
pub fn build_naive(script: &CommitScript) -> InMemoryRepo {
    let mut repo = InMemoryRepo::new();
    for spec in script {
        let version = naive_version(&repo, spec);
        repo.insert(version);
    }
    repo.link_edges();
    repo.link_provenance();
    repo
}

fn naive_version(repo: &InMemoryRepo, spec: &CommitSpec) -> MaterializedVersion {
    let parents: Vec<_> = spec
        .parents
        .iter()
        .map(|p| repo.get(p).expect("script parent must exist").clone())
        .collect();

    let mut relations = Vec::new();
    for r in &spec.relations {
        let tuples: Vec<Record> = r.rows.iter().map(|(rid, f)| make_record(spec, &r.name, *rid, f)).collect();
        let changed = !parents.iter().any(|p| {
            p.relation(&r.name)
                .is_some_and(|b| naive_same_content(&b.tuples, &tuples))
        });
        relations.push(RelationSnapshot {
            name: r.name.clone(),
            schema: r.schema.clone(),
            tuples,
            changed,
        });
    }
    let mut files = Vec::new();
    for f in &spec.files {
        let records: Vec<Record> = f.rows.iter().map(|(rid, fl)| make_record(spec, &f.path, *rid, fl)).collect();
        let changed = !parents.iter().any(|p| {
            p.file(&f.path).is_some_and(|b| naive_same_content(&b.records, &records))
        });
        files.push(FileSnapshot { full_path: f.path.clone(), records, changed });
    }

    let meta = VersionMeta {
        id: spec.id.clone(),
        author: Author { name: spec.author.name.clone(), email: spec.author.email.clone() },
        creation_ts: spec.ts,
        commit_msg: spec.message.clone(),
        parents: spec.parents.clone(),
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
    MaterializedVersion::new(meta, relations, files)
}

fn make_record(spec: &CommitSpec, container: &str, rid: u64, fields: &BTreeMap<String, Value>) -> Record {
    let mut record = Record::new(rid, fields.clone());
    for (child, parent) in &spec.provenance {
        if child.container == container && child.rid == rid {
            record.parents.insert(parent.clone());
        }
    }
    record
}

/// Multiset equality of record contents by direct greedy matching,
/// deliberately the dumbest possible implementation.
fn naive_same_content(a: &[Record], b: &[Record]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    for x in a {
        let hit = b
            .iter()
            .enumerate()
            .find(|(i, y)| !used[*i] && y.fields == x.fields);
        match hit {
            Some((i, _)) => used[i] = true,
            None => return false,
        }
    }
    true
}
