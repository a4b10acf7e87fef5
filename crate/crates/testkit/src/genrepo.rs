//! Randomized commit scripts: branching version histories with bounded
//! churn, plus bare random DAGs for traversal tests.

use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use rand::prelude::*;

use vquel_core::model::{ColumnType, RecordRef};
use vquel_core::Value;

use crate::script::{CommitScript, CommitSpec, ScriptFile, ScriptRelation};

/// Field catalog shared with the program generator. Field names map to one
/// type everywhere, so random comparisons never mix types.
pub const RELATION_CATALOG: &[(&str, &[(&str, ColumnType)])] = &[
    ("Employee", &[("employee_id", ColumnType::Str), ("last_name", ColumnType::Str), ("age", ColumnType::Int)]),
    ("Department", &[("dept_id", ColumnType::Str), ("dept_name", ColumnType::Str)]),
    ("S", &[("id", ColumnType::Int), ("attr", ColumnType::Str)]),
    ("T", &[("s_id", ColumnType::Int), ("note", ColumnType::Str)]),
];

pub const FILE_CATALOG: &[(&str, &[(&str, ColumnType)])] = &[
    ("Forms.csv", &[("form", ColumnType::Str), ("year", ColumnType::Int)]),
    ("notes.txt", &[("text", ColumnType::Str), ("level", ColumnType::Int)]),
];

pub const STR_POOL: &[&str] = &["Smith", "Jones", "Brown", "x", "y", "alpha", "W2"];

pub fn random_value(rng: &mut impl Rng, ty: ColumnType) -> Value {
    if rng.gen_bool(0.06) {
        return Value::Null;
    }
    match ty {
        ColumnType::Int => Value::Int(rng.gen_range(0..60)),
        ColumnType::Float => Value::Float(rng.gen_range(0..1000) as f64 / 4.0),
        ColumnType::Bool => Value::Bool(rng.gen_bool(0.5)),
        ColumnType::Str => Value::Str(STR_POOL.choose(rng).unwrap().to_string()),
        ColumnType::Timestamp => {
            Value::timestamp(Utc.timestamp_opt(rng.gen_range(0..2_000_000_000), 0).unwrap())
        }
    }
}

pub struct RepoGenConfig {
    pub versions: usize,
    /// Cap on children per version (branch factor).
    pub max_children: usize,
    pub allow_merges: bool,
    /// Fraction of existing records touched per commit.
    pub churn: f64,
    pub seed_rows: usize,
    pub with_files: bool,
    pub with_provenance: bool,
}

impl RepoGenConfig {
    /// Small repositories for engine fuzzing.
    pub fn small() -> RepoGenConfig {
        RepoGenConfig {
            versions: 6,
            max_children: 3,
            allow_merges: true,
            churn: 0.4,
            seed_rows: 3,
            with_files: true,
            with_provenance: true,
        }
    }

    /// Longer histories for the storage oracle.
    pub fn storage() -> RepoGenConfig {
        RepoGenConfig {
            versions: 50,
            max_children: 3,
            allow_merges: true,
            churn: 0.10,
            seed_rows: 30,
            with_files: true,
            with_provenance: true,
        }
    }
}

#[derive(Clone)]
struct SimContainer {
    schema: Vec<(String, ColumnType)>,
    rows: Vec<(u64, BTreeMap<String, Value>)>,
    next_rid: u64,
}

#[derive(Clone, Default)]
struct SimVersion {
    relations: BTreeMap<String, SimContainer>,
    files: BTreeMap<String, SimContainer>,
}

pub fn random_script(rng: &mut impl Rng, cfg: &RepoGenConfig) -> CommitScript {
    let mut script = CommitScript::new();
    let mut states: Vec<SimVersion> = Vec::new();
    let mut children_count: Vec<usize> = Vec::new();

    for idx in 0..cfg.versions {
        let id = format!("v{:02}", idx + 1);
        let ts = Utc.timestamp_opt(1_500_000_000 + idx as i64 * 3_600, 0).unwrap();
        let mut spec = CommitSpec::new(&id, &[], ts, &format!("commit {}", idx + 1));

        let mut state;
        if idx == 0 {
            state = SimVersion::default();
            let n_rel = rng.gen_range(1..=2);
            let picks = RELATION_CATALOG.choose_multiple(rng, n_rel);
            for (name, schema) in picks {
                let schema: Vec<(String, ColumnType)> =
                    schema.iter().map(|(c, t)| (c.to_string(), *t)).collect();
                let mut c = SimContainer { schema, rows: Vec::new(), next_rid: 1 };
                for _ in 0..cfg.seed_rows {
                    add_row(rng, &mut c);
                }
                state.relations.insert(name.to_string(), c);
            }
            if cfg.with_files && rng.gen_bool(0.6) {
                let (path, schema) = FILE_CATALOG.choose(rng).unwrap();
                let schema: Vec<(String, ColumnType)> =
                    schema.iter().map(|(c, t)| (c.to_string(), *t)).collect();
                let mut c = SimContainer { schema, rows: Vec::new(), next_rid: 1 };
                for _ in 0..cfg.seed_rows.min(3) {
                    add_row(rng, &mut c);
                }
                state.files.insert(path.to_string(), c);
            }
        } else {
            let eligible: Vec<usize> = (0..idx)
                .filter(|&i| children_count[i] < cfg.max_children)
                .collect();
            let first = *eligible.choose(rng).unwrap_or(&(idx - 1));
            spec.parents.push(script[first].id.clone());
            children_count[first] += 1;
            if cfg.allow_merges && idx >= 2 && rng.gen_bool(0.2) {
                let second: Vec<usize> = (0..idx)
                    .filter(|&i| i != first && children_count[i] < cfg.max_children)
                    .collect();
                if let Some(&s) = second.choose(rng) {
                    spec.parents.push(script[s].id.clone());
                    children_count[s] += 1;
                }
            }
            state = states[first].clone();
            let parent_state = states[first].clone();
            mutate(rng, cfg, &mut state, &mut spec, &script[first].id, &parent_state);
            // drop provenance for child records an op later removed
            spec.provenance.retain(|(child, _)| {
                state
                    .relations
                    .get(&child.container)
                    .or_else(|| state.files.get(&child.container))
                    .is_some_and(|c| c.rows.iter().any(|(r, _)| *r == child.rid))
            });
        }

        spec.relations = state
            .relations
            .iter()
            .map(|(name, c)| ScriptRelation {
                name: name.clone(),
                schema: c.schema.clone(),
                rows: c.rows.clone(),
            })
            .collect();
        spec.files = state
            .files
            .iter()
            .map(|(path, c)| ScriptFile { path: path.clone(), rows: c.rows.clone() })
            .collect();

        states.push(state);
        children_count.push(0);
        script.push(spec);
    }
    script
}

fn add_row(rng: &mut impl Rng, c: &mut SimContainer) -> u64 {
    let rid = c.next_rid;
    c.next_rid += 1;
    let fields: BTreeMap<String, Value> = c
        .schema
        .iter()
        .map(|(name, ty)| (name.clone(), random_value(rng, *ty)))
        .collect();
    c.rows.push((rid, fields));
    rid
}

fn mutate(
    rng: &mut impl Rng,
    cfg: &RepoGenConfig,
    state: &mut SimVersion,
    spec: &mut CommitSpec,
    parent_id: &str,
    parent_state: &SimVersion,
) {
    let total: usize = state
        .relations
        .values()
        .chain(state.files.values())
        .map(|c| c.rows.len())
        .sum();
    let ops = ((total as f64 * cfg.churn).floor() as usize).max(1);

    // occasionally introduce a relation absent so far
    if rng.gen_bool(0.08) {
        let unused: Vec<_> = RELATION_CATALOG
            .iter()
            .filter(|(n, _)| !state.relations.contains_key(*n))
            .collect();
        if let Some((name, schema)) = unused.choose(rng) {
            let schema: Vec<(String, ColumnType)> =
                schema.iter().map(|(c, t)| (c.to_string(), *t)).collect();
            let mut c = SimContainer { schema, rows: Vec::new(), next_rid: 1 };
            for _ in 0..cfg.seed_rows.min(3) {
                add_row(rng, &mut c);
            }
            state.relations.insert(name.to_string(), c);
        }
    }

    for _ in 0..ops {
        let rel_names: Vec<String> = state.relations.keys().cloned().collect();
        let file_names: Vec<String> = state.files.keys().cloned().collect();
        let use_file = !file_names.is_empty() && rng.gen_bool(0.25);
        let (container_name, container) = if use_file {
            let n = file_names.choose(rng).unwrap().clone();
            let c = state.files.get_mut(&n).unwrap();
            (n, c)
        } else if !rel_names.is_empty() {
            let n = rel_names.choose(rng).unwrap().clone();
            let c = state.relations.get_mut(&n).unwrap();
            (n, c)
        } else {
            continue;
        };
        let parent_rids: Vec<u64> = parent_state
            .relations
            .get(&container_name)
            .or_else(|| parent_state.files.get(&container_name))
            .map(|c| c.rows.iter().map(|(r, _)| *r).collect())
            .unwrap_or_default();
        match rng.gen_range(0..3) {
            0 => {
                let rid = add_row(rng, container);
                maybe_provenance(rng, cfg, spec, &container_name, rid, parent_id, &parent_rids);
            }
            1 if !container.rows.is_empty() => {
                let i = rng.gen_range(0..container.rows.len());
                container.rows.remove(i);
            }
            _ if !container.rows.is_empty() => {
                let i = rng.gen_range(0..container.rows.len());
                let (col, ty) = container.schema.choose(rng).unwrap().clone();
                let rid = container.rows[i].0;
                container.rows[i].1.insert(col, random_value(rng, ty));
                maybe_provenance(rng, cfg, spec, &container_name, rid, parent_id, &parent_rids);
            }
            _ => {}
        }
    }
}

/// Link a touched record back to a record of the same container in the
/// first parent (a strict ancestor by construction).
fn maybe_provenance(
    rng: &mut impl Rng,
    cfg: &RepoGenConfig,
    spec: &mut CommitSpec,
    container_name: &str,
    rid: u64,
    parent_id: &str,
    parent_rids: &[u64],
) {
    if !cfg.with_provenance || !rng.gen_bool(0.4) {
        return;
    }
    if let Some(&target) = parent_rids.choose(rng) {
        let child = RecordRef::new(spec.id.clone(), container_name, rid);
        let parent = RecordRef::new(parent_id, container_name, target);
        let edge = (child, parent);
        if !spec.provenance.contains(&edge) {
            spec.provenance.push(edge);
        }
    }
}

/// Random DAG with empty containers, for traversal oracles. Multiple roots
/// allowed; parents always point at earlier nodes.
pub fn random_dag(rng: &mut impl Rng, nodes: usize) -> CommitScript {
    let mut script = CommitScript::new();
    for idx in 0..nodes {
        let id = format!("n{idx:03}");
        let ts = Utc.timestamp_opt(1_600_000_000 + idx as i64 * 60, 0).unwrap();
        let mut spec = CommitSpec::new(&id, &[], ts, "node");
        if idx > 0 && !rng.gen_bool(0.05) {
            let n_parents = if rng.gen_bool(0.25) { 2.min(idx) } else { 1 };
            let mut picks: Vec<usize> = (0..idx).collect();
            picks.shuffle(rng);
            for &p in picks.iter().take(n_parents) {
                spec.parents.push(format!("n{p:03}"));
            }
        }
        script.push(spec);
    }
    script
}
