//! Deterministic commit scripts, replayable against both the real store
//! and the naive in-memory builder.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};

use vquel_core::model::{Author, ColumnType, RecordRef};
use vquel_core::Value;
use vquel_store::{CommitInput, FileInput, RecordInput, RelationInput, Repository, StoreError};

#[derive(Debug, Clone)]
pub struct ScriptRelation {
    pub name: String,
    pub schema: Vec<(String, ColumnType)>,
    /// (rid, fields); rids are explicit so both stores agree exactly.
    pub rows: Vec<(u64, BTreeMap<String, Value>)>,
}

#[derive(Debug, Clone)]
pub struct ScriptFile {
    pub path: String,
    pub rows: Vec<(u64, BTreeMap<String, Value>)>,
}

#[derive(Debug, Clone)]
pub struct CommitSpec {
    pub id: String,
    pub parents: Vec<String>,
    pub author: Author,
    pub ts: DateTime<Utc>,
    pub message: String,
    pub relations: Vec<ScriptRelation>,
    pub files: Vec<ScriptFile>,
    /// (child, parent); child refs name this commit's id.
    pub provenance: Vec<(RecordRef, RecordRef)>,
}

pub type CommitScript = Vec<CommitSpec>;

pub fn fields(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl CommitSpec {
    pub fn new(id: &str, parents: &[&str], ts: DateTime<Utc>, message: &str) -> CommitSpec {
        CommitSpec {
            id: id.to_string(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            author: Author::new("Alice"),
            ts,
            message: message.to_string(),
            relations: Vec::new(),
            files: Vec::new(),
            provenance: Vec::new(),
        }
    }
}

/// Write one commit's payload as a CLI data directory: `<name>.csv` +
/// `<name>.schema.json` per relation (with explicit `_rid` columns) and
/// `<path>.jsonl` per file. Returns the provenance file path when the
/// commit has edges.
pub fn write_data_dir(
    spec: &CommitSpec,
    dir: &std::path::Path,
) -> std::io::Result<Option<std::path::PathBuf>> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    for rel in &spec.relations {
        let mut schema = serde_json::Map::new();
        for (col, ty) in &rel.schema {
            schema.insert(col.clone(), serde_json::Value::String(ty.name().to_string()));
        }
        std::fs::write(
            dir.join(format!("{}.schema.json", rel.name)),
            serde_json::to_string_pretty(&serde_json::Value::Object(schema)).unwrap(),
        )?;
        let mut csv = String::new();
        let mut header = vec!["_rid".to_string()];
        header.extend(rel.schema.iter().map(|(c, _)| c.clone()));
        csv.push_str(&header.join(","));
        csv.push('\n');
        for (rid, fields) in &rel.rows {
            let mut cells = vec![rid.to_string()];
            for (col, _) in &rel.schema {
                cells.push(csv_cell(&fields[col]));
            }
            csv.push_str(&cells.join(","));
            csv.push('\n');
        }
        std::fs::write(dir.join(format!("{}.csv", rel.name)), csv)?;
    }
    for file in &spec.files {
        let path = dir.join(format!("{}.jsonl", file.path));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = std::fs::File::create(path)?;
        for (rid, fields) in &file.rows {
            let mut obj = serde_json::Map::new();
            obj.insert("_rid".to_string(), serde_json::Value::from(*rid));
            for (k, v) in fields {
                obj.insert(k.clone(), vquel_core::value::value_to_json(v));
            }
            writeln!(out, "{}", serde_json::Value::Object(obj))?;
        }
    }
    if spec.provenance.is_empty() {
        return Ok(None);
    }
    let pairs: Vec<(String, String)> = spec
        .provenance
        .iter()
        .map(|(c, p)| (format!("@new/{}/{}", c.container, c.rid), p.to_string()))
        .collect();
    let prov_path = dir.join("provenance.json");
    std::fs::write(&prov_path, serde_json::to_string_pretty(&pairs).unwrap())?;
    Ok(Some(prov_path))
}

fn csv_cell(v: &Value) -> String {
    let text = v.to_string();
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text
    }
}

/// Replay a script through the real commit path.
pub fn apply_to_store(script: &CommitScript, repo: &Repository) -> Result<(), StoreError> {
    for spec in script {
        let input = CommitInput {
            id: Some(spec.id.clone()),
            parents: spec.parents.clone(),
            author: spec.author.clone(),
            creation_ts: spec.ts,
            message: spec.message.clone(),
            relations: spec
                .relations
                .iter()
                .map(|r| RelationInput {
                    name: r.name.clone(),
                    schema: r.schema.clone(),
                    tuples: r
                        .rows
                        .iter()
                        .map(|(rid, fields)| RecordInput::with_rid(*rid, fields.clone()))
                        .collect(),
                })
                .collect(),
            files: spec
                .files
                .iter()
                .map(|f| FileInput {
                    full_path: f.path.clone(),
                    records: f
                        .rows
                        .iter()
                        .map(|(rid, fields)| RecordInput::with_rid(*rid, fields.clone()))
                        .collect(),
                })
                .collect(),
            provenance: spec.provenance.clone(),
        };
        let id = repo.commit(input)?;
        assert_eq!(id, spec.id, "store assigned a different id than the script");
    }
    Ok(())
}
