//! Worked-example fixtures and the query corpus exercised against them.
//!
//! `figure_1b` is the running two-version example: V1 holds Employee
//! {E1,E2,E3} and Department {D1,D2}; V2 extends both relations, modifies
//! one employee, and adds the file Forms.csv, with record-level provenance
//! back into V1. The other fixtures target specific query families:
//! an exact-count fixture (100 Smiths), a join-size fixture (relations S
//! and T), a three-deep chain for graph traversal, and a provenance
//! fixture whose v01 records have parents.

use chrono::{DateTime, Utc};

use vquel_core::model::{ColumnType, RecordRef};
use vquel_core::Value;

use crate::script::{fields, CommitScript, CommitSpec, ScriptFile, ScriptRelation};

fn s(v: &str) -> Value {
    Value::Str(v.to_string())
}

fn i(v: i64) -> Value {
    Value::Int(v)
}

fn ts(spec: &str) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(spec).unwrap().with_timezone(&Utc)
}

fn employee_schema() -> Vec<(String, ColumnType)> {
    vec![
        ("employee_id".into(), ColumnType::Str),
        ("last_name".into(), ColumnType::Str),
        ("age".into(), ColumnType::Int),
    ]
}

fn employee(rows: &[(u64, &str, &str, i64)]) -> ScriptRelation {
    ScriptRelation {
        name: "Employee".into(),
        schema: employee_schema(),
        rows: rows
            .iter()
            .map(|(rid, id, name, age)| {
                (*rid, fields(&[("employee_id", s(id)), ("last_name", s(name)), ("age", i(*age))]))
            })
            .collect(),
    }
}

fn department(rows: &[(u64, &str, &str)]) -> ScriptRelation {
    ScriptRelation {
        name: "Department".into(),
        schema: vec![("dept_id".into(), ColumnType::Str), ("name".into(), ColumnType::Str)],
        rows: rows
            .iter()
            .map(|(rid, id, name)| (*rid, fields(&[("dept_id", s(id)), ("name", s(name))])))
            .collect(),
    }
}

/// The two-version repository of the running example. Version v01 predates
/// 2015; v02 modifies employee e01's age, hires e04/e05, adds a department
/// and the Forms.csv file, and records provenance for the touched rows.
pub fn figure_1b() -> CommitScript {
    let mut v01 = CommitSpec::new("v01", &[], ts("2014-12-01T10:00:00Z"), "initial census data");
    v01.relations = vec![
        employee(&[(1, "e01", "Smith", 34), (2, "e02", "Jones", 52), (3, "e03", "Smith", 45)]),
        department(&[(1, "d01", "Engineering"), (2, "d02", "Sales")]),
    ];

    let mut v02 = CommitSpec::new("v02", &["v01"], ts("2015-03-15T09:30:00Z"), "add spring hires and forms");
    v02.relations = vec![
        employee(&[
            (1, "e01", "Smith", 35),
            (2, "e02", "Jones", 52),
            (3, "e03", "Smith", 45),
            (4, "e04", "Brown", 61),
            (5, "e05", "Davis", 28),
        ]),
        department(&[(1, "d01", "Engineering"), (2, "d02", "Sales"), (3, "d03", "Marketing")]),
    ];
    v02.files = vec![ScriptFile {
        path: "Forms.csv".into(),
        rows: vec![
            (1, fields(&[("form", s("W2")), ("year", i(2015))])),
            (2, fields(&[("form", s("I9"))])),
        ],
    }];
    v02.provenance = vec![
        (RecordRef::new("v02", "Employee", 1), RecordRef::new("v01", "Employee", 1)),
        (RecordRef::new("v02", "Employee", 4), RecordRef::new("v01", "Employee", 2)),
    ];
    vec![v01, v02]
}

/// v01 holds exactly 100 Smith employees (plus one Jones); v02 drops one
/// Smith, leaving 99.
pub fn smith() -> CommitScript {
    let smith_rows = |n: u64| -> Vec<(u64, String, String, i64)> {
        let mut rows: Vec<(u64, String, String, i64)> = (1..=n)
            .map(|k| (k, format!("s{k:03}"), "Smith".to_string(), 20 + (k as i64 % 40)))
            .collect();
        rows.push((n + 1, "j001".into(), "Jones".into(), 44));
        rows
    };
    let to_rel = |rows: Vec<(u64, String, String, i64)>| ScriptRelation {
        name: "Employee".into(),
        schema: employee_schema(),
        rows: rows
            .into_iter()
            .map(|(rid, id, name, age)| {
                (rid, fields(&[("employee_id", s(&id)), ("last_name", s(&name)), ("age", i(age))]))
            })
            .collect(),
    };
    let mut v01 = CommitSpec::new("v01", &[], ts("2015-01-01T00:00:00Z"), "hundred smiths");
    v01.relations = vec![to_rel(smith_rows(100))];
    let mut v02 = CommitSpec::new("v02", &["v01"], ts("2015-02-01T00:00:00Z"), "one smith left");
    let mut fewer = smith_rows(100);
    fewer.remove(0);
    v02.relations = vec![to_rel(fewer)];
    vec![v01, v02]
}

/// Relations S and T whose natural join has 3 rows in v01 and exactly 100
/// in v02.
pub fn join() -> CommitScript {
    let s_rel = |ids: &[i64]| ScriptRelation {
        name: "S".into(),
        schema: vec![("id".into(), ColumnType::Int), ("attr".into(), ColumnType::Str)],
        rows: ids
            .iter()
            .enumerate()
            .map(|(k, id)| ((k + 1) as u64, fields(&[("id", i(*id)), ("attr", s("a"))])))
            .collect(),
    };
    let t_rel = |s_ids: &[i64]| ScriptRelation {
        name: "T".into(),
        schema: vec![("s_id".into(), ColumnType::Int), ("note".into(), ColumnType::Str)],
        rows: s_ids
            .iter()
            .enumerate()
            .map(|(k, sid)| ((k + 1) as u64, fields(&[("s_id", i(*sid)), ("note", s("n"))])))
            .collect(),
    };
    let mut v01 = CommitSpec::new("v01", &[], ts("2016-01-01T00:00:00Z"), "small join");
    v01.relations = vec![s_rel(&[1, 2]), t_rel(&[1, 1, 2])];
    let mut v02 = CommitSpec::new("v02", &["v01"], ts("2016-02-01T00:00:00Z"), "big join");
    let s_ids: Vec<i64> = (1..=10).collect();
    let t_ids: Vec<i64> = (1..=10).flat_map(|x| std::iter::repeat(x).take(10)).collect();
    v02.relations = vec![s_rel(&s_ids), t_rel(&t_ids)];
    vec![v01, v02]
}

/// Three-version chain ending at v01 (the tip): v03 → v02 → v01. Employee
/// grows one row per version; v01 also adds a large Filler relation so its
/// delta from v02 exceeds 100 tuples.
pub fn chain() -> CommitScript {
    let filler = |n: u64| ScriptRelation {
        name: "Filler".into(),
        schema: vec![("k".into(), ColumnType::Int)],
        rows: (1..=n).map(|k| (k, fields(&[("k", i(k as i64))]))).collect(),
    };
    let mut v03 = CommitSpec::new("v03", &[], ts("2020-01-01T00:00:00Z"), "chain root");
    v03.relations = vec![employee(&[(1, "e01", "Garcia", 40)])];
    let mut v02 = CommitSpec::new("v02", &["v03"], ts("2020-02-01T00:00:00Z"), "chain middle");
    v02.relations = vec![
        employee(&[(1, "e01", "Garcia", 40), (2, "e02", "Lopez", 55)]),
        filler(10),
    ];
    let mut v01 = CommitSpec::new("v01", &["v02"], ts("2020-03-01T00:00:00Z"), "chain tip");
    v01.relations = vec![
        employee(&[(1, "e01", "Garcia", 40), (2, "e02", "Lopez", 55), (3, "e03", "Chen", 30)]),
        filler(161),
    ];
    vec![v03, v02, v01]
}

/// A root v00 plus a child v01 whose relation S carries provenance edges
/// back into v00.
pub fn provenance() -> CommitScript {
    let s_rel = |rows: &[(u64, &str, i64)]| ScriptRelation {
        name: "S".into(),
        schema: vec![("attr".into(), ColumnType::Str), ("val".into(), ColumnType::Int)],
        rows: rows
            .iter()
            .map(|(rid, attr, val)| (*rid, fields(&[("attr", s(attr)), ("val", i(*val))])))
            .collect(),
    };
    let mut v00 = CommitSpec::new("v00", &[], ts("2021-01-01T00:00:00Z"), "seed data");
    v00.relations = vec![s_rel(&[(1, "seed", 1), (2, "seed2", 2)])];
    let mut v01 = CommitSpec::new("v01", &["v00"], ts("2021-02-01T00:00:00Z"), "derived data");
    v01.relations = vec![s_rel(&[(1, "x", 10), (2, "y", 20), (3, "x", 30)])];
    v01.provenance = vec![
        (RecordRef::new("v01", "S", 1), RecordRef::new("v00", "S", 1)),
        (RecordRef::new("v01", "S", 3), RecordRef::new("v00", "S", 1)),
        (RecordRef::new("v01", "S", 3), RecordRef::new("v00", "S", 2)),
    ];
    vec![v00, v01]
}

/// Which fixture a corpus query runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FixtureKind {
    Figure1b,
    Smith,
    Join,
    Chain,
    Provenance,
}

impl FixtureKind {
    pub fn script(self) -> CommitScript {
        match self {
            FixtureKind::Figure1b => figure_1b(),
            FixtureKind::Smith => smith(),
            FixtureKind::Join => join(),
            FixtureKind::Chain => chain(),
            FixtureKind::Provenance => provenance(),
        }
    }

    pub fn all() -> [FixtureKind; 5] {
        [
            FixtureKind::Figure1b,
            FixtureKind::Smith,
            FixtureKind::Join,
            FixtureKind::Chain,
            FixtureKind::Provenance,
        ]
    }
}

/// The sixteen corpus queries, verbatim with the source's own attribute
/// alias spellings, plus the fixture each runs against.
pub const QUERY_CORPUS: [(&str, FixtureKind, &str); 16] = [
    (
        "q01_author_of_version",
        FixtureKind::Figure1b,
        "range of V is Version\nretrieve V.author.name\nwhere V.id = \"v01\"",
    ),
    (
        "q02_commits_after_date",
        FixtureKind::Figure1b,
        "range of V is Version\nretrieve V.all\nwhere V.author.name = \"Alice\" and V.creation_ts >= \"01/01/2015\"",
    ),
    (
        "q03_versions_with_relation",
        FixtureKind::Figure1b,
        "range of V is Version\nrange of R is V.Relations\nretrieve V.commit_ts\nwhere R.name = \"Employee\"",
    ),
    (
        "q04_commit_history",
        FixtureKind::Figure1b,
        "range of V is Version\nrange of R is V.Relations\nretrieve V.creation_ts, V.author.name, V.commit_message\nwhere R.name = \"Employee\" and R.changed = true\nsort by V.creation_ts desc",
    ),
    (
        "q05_tuple_history",
        FixtureKind::Figure1b,
        "range of V is Version\nrange of R is V.Relations\nrange of E is R.Tuples\nretrieve E.all, V.commit_id, V.creation_ts\nwhere E.employee_id = \"e01\" and R.name = \"Employee\"\nsort by V.creation_ts",
    ),
    (
        "q06_tuples_differing_between_versions",
        FixtureKind::Figure1b,
        "range of E1 is Version(id = \"v01\").Relations(name = \"Employee\").Tuples\nrange of E2 is Version(id = \"v02\").Relations(name = \"Employee\").Tuples\nretrieve E1.all\nwhere E1.employee_id = E2.employee_id and E1.all != E2.all",
    ),
    (
        "q07_count_relations_per_version",
        FixtureKind::Figure1b,
        "range of V is Version\nrange of R is V.Relations\nretrieve V.id, count(R)",
    ),
    (
        "q08_exactly_100_smiths",
        FixtureKind::Smith,
        "range of V is Version\nrange of E is V.Relations(name = \"Employee\").Tuples\nretrieve V.commit_id\nwhere count(E.employee_id where E.last_name = \"Smith\") = 100",
    ),
    (
        "q09_exactly_100_smiths_count_all",
        FixtureKind::Smith,
        "range of V is Version\nrange of R is V.Relations(name = \"Employee\")\nrange of E is R.Tuples\nretrieve V.commit_id\nwhere count_all(E.employee_id group by R, V where E.last_name = \"Smith\") = 100",
    ),
    (
        "q10_100_tuples_total",
        FixtureKind::Figure1b,
        "range of V is Version\nrange of R is V.Relations\nrange of T is R.Tuples\nretrieve V.all\nwhere count_all(T group by V) = 100",
    ),
    (
        "q11_most_over_50",
        FixtureKind::Figure1b,
        "range of V is Version\nrange of E is V.Relations(name = \"Employee\").Tuples\nretrieve into T (V.id as id, count(E.id where E.age > 50) as c)\nretrieve T.id\nwhere T.c = max(T.c)",
    ),
    (
        "q12_join_size",
        FixtureKind::Join,
        "range of V is Version\nrange of S is V.Relations(name = \"S\").Tuples\nrange of T is V.Relations(name = \"T\").Tuples\nretrieve into Q(V.id as id,\n    count_all(S.id group by V where S.id = T.s_id and Version(S).id = Version(T).id) as c)\nretrieve Q.id\nwhere Q.c >= 100",
    ),
    (
        "q13_neighborhood",
        FixtureKind::Chain,
        "range of V is Version(id = \"v01\")\nrange of N is V.N(2)\nrange of E is N.Relations(name = \"Employee\").Tuples\nretrieve N.all\nwhere count(E) < 100",
    ),
    (
        "q14_large_delta",
        FixtureKind::Chain,
        "range of V is Version\nrange of P is V.P(1)\nretrieve unique V.all\nwhere abs(count(V.Relations.Tuples) - count(P.Relations.Tuples)) > 100",
    ),
    (
        "q15_first_appearance",
        FixtureKind::Chain,
        "range of V is Version(id = \"v01\")\nrange of E is V.Relations(name = \"Employee\").Tuples\nrange of P is V.P()\nrange of PE is P.Relations(name = \"Employee\").Tuples\nretrieve E.id, P.id\nwhere E.employee_id = PE.employee_id and P.commit_ts = min(P.commit_ts)",
    ),
    (
        "q16_provenance_parents",
        FixtureKind::Provenance,
        "range of E is Version(id = \"v01\").Relations(name = \"S\").Tuples\nrange of P is E.parents\nretrieve E.id, P.id\nwhere E.attr = \"x\"",
    ),
];

/// The shorthand/expanded pairs used to pin the equivalence of sugared and
/// desugared forms: (a1)/(b1) filter a root range, (a2)/(b2) spell out the
/// tuple-difference query.
pub const SHORTHAND_PAIRS: [(&str, &str, FixtureKind); 2] = [
    (
        "range of V is Version(id = \"v01\")\nretrieve V.id",
        "range of T is Version\nretrieve into V (T.all)\nwhere T.id = \"v01\"\nretrieve V.id",
        FixtureKind::Figure1b,
    ),
    (
        "range of E1 is Version(id = \"v01\").Relations(name = \"Employee\").Tuples\nrange of E2 is Version(id = \"v02\").Relations(name = \"Employee\").Tuples\nretrieve E1.all\nwhere E1.employee_id = E2.employee_id and E1.all != E2.all",
        "range of V1 is Version\nrange of R1 is V1.Relations\nrange of E1 is R1.Tuples\nrange of V2 is Version\nrange of R2 is V2.Relations\nrange of E2 is R2.Tuples\nretrieve E1.all\nwhere V1.id = \"v01\" and R1.name = \"Employee\"\nand V2.id = \"v02\" and R2.name = \"Employee\"\nand E1.employee_id = E2.employee_id and E1.all != E2.all",
        FixtureKind::Figure1b,
    ),
];
