//! Invariant checks over a hand-built two-version repository: one root
//! version with Employee/Department relations, one child that extends both
//! and adds a file, with record-level provenance between them.

use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use vquel_core::graph::{ancestors, descendants, neighborhood, neighborhood_exact, topo_sort};
use vquel_core::model::same_content;
use vquel_core::{
    compute_changed, validate_repository, Author, ColumnType, ContainerKey, FileSnapshot,
    InMemoryRepo, MaterializedVersion, Record, RecordRef, RelationSnapshot, VersionMeta, Value,
    ViolationKind,
};

fn rec(rid: u64, pairs: &[(&str, Value)]) -> Record {
    let fields: BTreeMap<String, Value> =
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    Record::new(rid, fields)
}

fn s(v: &str) -> Value {
    Value::Str(v.to_string())
}

fn employee_schema() -> Vec<(String, ColumnType)> {
    vec![
        ("employee_id".into(), ColumnType::Str),
        ("last_name".into(), ColumnType::Str),
        ("age".into(), ColumnType::Int),
    ]
}

fn meta(id: &str, ts_secs: i64, parents: &[&str]) -> VersionMeta {
    VersionMeta {
        id: id.into(),
        author: Author::new("Alice"),
        creation_ts: Utc.timestamp_opt(ts_secs, 0).unwrap(),
        commit_msg: format!("commit {id}"),
        parents: parents.iter().map(|p| p.to_string()).collect(),
        children: vec![],
        containers: vec![],
    }
}

/// Two versions in a chain, mirroring the running example: the child adds
/// records to both relations and introduces a new file.
fn two_version_repo() -> InMemoryRepo {
    let mut repo = InMemoryRepo::new();

    let v1_employee = RelationSnapshot {
        name: "Employee".into(),
        schema: employee_schema(),
        tuples: vec![
            rec(1, &[("employee_id", s("e01")), ("last_name", s("Smith")), ("age", Value::Int(34))]),
            rec(2, &[("employee_id", s("e02")), ("last_name", s("Jones")), ("age", Value::Int(52))]),
            rec(3, &[("employee_id", s("e03")), ("last_name", s("Smith")), ("age", Value::Int(45))]),
        ],
        changed: true,
    };
    let v1_department = RelationSnapshot {
        name: "Department".into(),
        schema: vec![("dept_id".into(), ColumnType::Str), ("name".into(), ColumnType::Str)],
        tuples: vec![
            rec(1, &[("dept_id", s("d01")), ("name", s("Engineering"))]),
            rec(2, &[("dept_id", s("d02")), ("name", s("Sales"))]),
        ],
        changed: true,
    };
    repo.insert(MaterializedVersion::new(
        meta("v01", 1_000, &[]),
        vec![v1_employee.clone(), v1_department.clone()],
        vec![],
    ));

    let mut v2_employee = v1_employee.clone();
    let mut e4 = rec(4, &[("employee_id", s("e04")), ("last_name", s("Brown")), ("age", Value::Int(61))]);
    e4.parents.insert(RecordRef::new("v01", "Employee", 2));
    v2_employee.tuples.push(e4);
    v2_employee.tuples.push(rec(
        5,
        &[("employee_id", s("e05")), ("last_name", s("Davis")), ("age", Value::Int(28))],
    ));
    let mut v2_department = v1_department.clone();
    v2_department.tuples.push(rec(3, &[("dept_id", s("d03")), ("name", s("Marketing"))]));
    let forms = FileSnapshot {
        full_path: "Forms.csv".into(),
        records: vec![
            rec(1, &[("form", s("W2")), ("year", Value::Int(2015))]),
            rec(2, &[("form", s("I9"))]),
        ],
        changed: true,
    };
    repo.insert(MaterializedVersion::new(
        meta("v02", 2_000, &["v01"]),
        vec![v2_employee, v2_department],
        vec![forms],
    ));

    repo.link_edges();
    repo.link_provenance();
    repo
}

#[test]
fn valid_repository_has_no_violations() {
    let repo = two_version_repo();
    assert_eq!(validate_repository(&repo), vec![]);
}

#[test]
fn singleton_repository_is_valid() {
    let mut repo = InMemoryRepo::new();
    repo.insert(MaterializedVersion::new(meta("only", 1, &[]), vec![], vec![]));
    repo.link_edges();
    assert_eq!(validate_repository(&repo), vec![]);
}

#[test]
fn provenance_into_non_ancestor_is_rejected() {
    let mut repo = two_version_repo();
    // give a v01 record a parent living in v02: the edge runs against the graph
    {
        let v1 = repo.get_mut("v01").unwrap();
        v1.relations[1].tuples[0]
            .parents
            .insert(RecordRef::new("v02", "Employee", 4));
    }
    let violations = validate_repository(&repo);
    assert_eq!(violations.len(), 1);
    assert_eq!(violations[0].kind, ViolationKind::ProvenanceViolation);
}

#[test]
fn seeded_corruptions_report_their_kind() {
    // cycle
    let mut repo = two_version_repo();
    repo.get_mut("v01").unwrap().meta.parents.push("v02".into());
    repo.get_mut("v02").unwrap().meta.children.push("v01".into());
    assert!(validate_repository(&repo).iter().any(|v| v.kind == ViolationKind::GraphCycle));

    // dangling edge
    let mut repo = two_version_repo();
    repo.get_mut("v02").unwrap().meta.parents.push("ghost".into());
    assert!(validate_repository(&repo).iter().any(|v| v.kind == ViolationKind::DanglingEdge));

    // schema violation
    let mut repo = two_version_repo();
    repo.get_mut("v01").unwrap().relations[1].tuples[0]
        .fields
        .insert("age".into(), Value::Str("old".into()));
    assert!(validate_repository(&repo).iter().any(|v| v.kind == ViolationKind::SchemaViolation));

    // wrong changed flag
    let mut repo = two_version_repo();
    repo.get_mut("v02").unwrap().relations[0].changed = false;
    assert!(validate_repository(&repo)
        .iter()
        .any(|v| v.kind == ViolationKind::ChangedFlagMismatch));
}

#[test]
fn changed_flags_recompute() {
    let repo = two_version_repo();
    let v2 = compute_changed(&repo, "v02").unwrap();
    assert_eq!(v2[&ContainerKey::Relation("Employee".into())], true);
    assert_eq!(v2[&ContainerKey::Relation("Department".into())], true);
    assert_eq!(v2[&ContainerKey::File("Forms.csv".into())], true);
    // root: everything changed
    let v1 = compute_changed(&repo, "v01").unwrap();
    assert!(v1.values().all(|&c| c));
}

#[test]
fn identity_commit_is_unchanged() {
    let mut repo = two_version_repo();
    let v2 = repo.get("v02").unwrap().as_ref().clone();
    let mut v3 = MaterializedVersion::new(
        meta("v03", 3_000, &["v02"]),
        v2.relations.clone(),
        v2.files.clone(),
    );
    for r in &mut v3.relations {
        r.changed = false;
        for t in &mut r.tuples {
            t.parents.clear();
            t.children.clear();
        }
    }
    for f in &mut v3.files {
        f.changed = false;
    }
    repo.insert(v3);
    repo.link_edges();
    repo.link_provenance();
    let flags = compute_changed(&repo, "v03").unwrap();
    assert!(flags.values().all(|&c| !c));
    assert_eq!(validate_repository(&repo), vec![]);
}

#[test]
fn merge_identical_to_one_parent_is_unchanged() {
    let mut repo = two_version_repo();
    // v03: merge of v01 and v02 whose Employee matches v01's exactly
    let v1 = repo.get("v01").unwrap().as_ref().clone();
    let mut employee = v1.relations[1].clone(); // relations sorted: Department, Employee
    assert_eq!(employee.name, "Employee");
    employee.changed = false;
    let mut merged = MaterializedVersion::new(meta("v03", 3_000, &["v01", "v02"]), vec![employee], vec![]);
    merged.relations[0].changed = false;
    repo.insert(merged);
    repo.link_edges();
    let flags = compute_changed(&repo, "v03").unwrap();
    assert_eq!(flags[&ContainerKey::Relation("Employee".into())], false);
}

#[test]
fn content_equality_ignores_rid_and_provenance() {
    let mut a = rec(1, &[("x", Value::Int(1))]);
    a.parents.insert(RecordRef::new("v", "c", 9));
    let b = rec(7, &[("x", Value::Int(1))]);
    assert!(same_content(&[a], &[b]));
    assert!(!same_content(&[rec(1, &[("x", Value::Int(1))])], &[rec(1, &[("x", Value::Int(2))])]));
    // multisets respect multiplicity
    let one = rec(1, &[("x", Value::Int(1))]);
    assert!(!same_content(&[one.clone(), one.clone()], &[one.clone()]));
}

#[test]
fn neighborhood_of_singleton_graph_is_empty() {
    let mut repo = InMemoryRepo::new();
    repo.insert(MaterializedVersion::new(meta("only", 1, &[]), vec![], vec![]));
    repo.link_edges();
    assert_eq!(neighborhood(&repo, "only", 3).unwrap().len(), 0);
}

#[test]
fn graph_traversals() {
    let repo = two_version_repo();
    assert_eq!(ancestors(&repo, "v02", Some(1)).unwrap(), ["v01".to_string()].into());
    assert_eq!(ancestors(&repo, "v01", None).unwrap().len(), 0);
    assert_eq!(descendants(&repo, "v01", Some(1)).unwrap(), ["v02".to_string()].into());
    assert_eq!(descendants(&repo, "v02", None).unwrap().len(), 0);
    assert_eq!(neighborhood(&repo, "v01", 1).unwrap(), ["v02".to_string()].into());
    assert_eq!(neighborhood_exact(&repo, "v01", 2).unwrap().len(), 0);
    assert!(ancestors(&repo, "nope", None).is_err());
    assert!(topo_sort(&repo).is_some());
}
