//! Data-directory ingestion for commits.
//!
//! Relations arrive as `<name>.csv` with a sidecar `<name>.schema.json`
//! mapping column name to declared type in schema order. Files arrive as
//! `<path>.jsonl`, one JSON object per line. A reserved `_rid` column/key
//! pins record ids explicitly; otherwise the store assigns them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value as Json;

use vquel_core::model::{ColumnType, RecordRef};
use vquel_core::value::{parse_timestamp, value_from_json};
use vquel_core::Value;

use crate::layout::RID_KEY;
use crate::repository::{FileInput, RecordInput, RelationInput, StoreError};

#[derive(Debug, Default)]
pub struct DataPayload {
    pub relations: Vec<RelationInput>,
    pub files: Vec<FileInput>,
}

/// Walk a data directory and collect every relation and file payload.
pub fn load_data_dir(dir: &Path) -> Result<DataPayload, StoreError> {
    let mut payload = DataPayload::default();
    let mut paths = Vec::new();
    walk(dir, &mut paths)?;
    paths.sort();
    for path in paths {
        let rel = path.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
        if rel.ends_with(".csv") {
            let stem = Path::new(&rel).file_stem().unwrap().to_string_lossy().to_string();
            let sidecar = path.with_file_name(format!("{stem}.schema.json"));
            if !sidecar.is_file() {
                return Err(StoreError::Schema {
                    container: stem,
                    detail: format!("missing sidecar {}", sidecar.display()),
                });
            }
            payload.relations.push(load_relation(&stem, &path, &sidecar)?);
        } else if rel.ends_with(".jsonl") {
            let full_path = rel.trim_end_matches(".jsonl").to_string();
            payload.files.push(load_file(&full_path, &path)?);
        }
        // schema sidecars and anything else are not containers themselves
    }
    Ok(payload)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), StoreError> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn load_relation(name: &str, csv_path: &Path, sidecar: &Path) -> Result<RelationInput, StoreError> {
    let schema_err = |detail: String| StoreError::Schema { container: name.to_string(), detail };
    let raw = fs::read_to_string(sidecar)?;
    let json: Json = serde_json::from_str(&raw).map_err(|e| StoreError::Json(sidecar.to_path_buf(), e))?;
    let obj = json
        .as_object()
        .ok_or_else(|| schema_err("schema sidecar must be a JSON object".into()))?;
    let mut schema = Vec::new();
    for (col, ty) in obj {
        let ty_name = ty
            .as_str()
            .ok_or_else(|| schema_err(format!("type of column {col:?} must be a string")))?;
        let ty = ColumnType::parse(ty_name)
            .ok_or_else(|| schema_err(format!("unknown column type {ty_name:?}")))?;
        schema.push((col.clone(), ty));
    }

    let mut reader = csv::ReaderBuilder::new()
        .from_path(csv_path)
        .map_err(|e| schema_err(format!("csv: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| schema_err(format!("csv: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    for h in &headers {
        if h != RID_KEY && !schema.iter().any(|(c, _)| c == h) {
            return Err(schema_err(format!("csv column {h:?} not in schema")));
        }
    }
    for (c, _) in &schema {
        if !headers.iter().any(|h| h == c) {
            return Err(schema_err(format!("schema column {c:?} missing from csv header")));
        }
    }

    let mut tuples = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| schema_err(format!("csv row {}: {e}", line + 2)))?;
        let mut rid = None;
        let mut fields = BTreeMap::new();
        for (h, cell) in headers.iter().zip(row.iter()) {
            if h == RID_KEY {
                if !cell.is_empty() {
                    rid = Some(cell.parse().map_err(|_| {
                        schema_err(format!("csv row {}: bad {RID_KEY} {cell:?}", line + 2))
                    })?);
                }
                continue;
            }
            let (_, ty) = schema.iter().find(|(c, _)| c == h).unwrap();
            fields.insert(
                h.clone(),
                parse_cell(cell, *ty).map_err(|d| {
                    schema_err(format!("csv row {}, column {h:?}: {d}", line + 2))
                })?,
            );
        }
        tuples.push(RecordInput { rid, fields });
    }
    Ok(RelationInput { name: name.to_string(), schema, tuples })
}

/// Empty cells read as Null in every column.
fn parse_cell(cell: &str, ty: ColumnType) -> Result<Value, String> {
    if cell.is_empty() {
        return Ok(Value::Null);
    }
    match ty {
        ColumnType::Int => cell.parse().map(Value::Int).map_err(|_| format!("bad int {cell:?}")),
        ColumnType::Float => cell
            .parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .map(Value::Float)
            .ok_or_else(|| format!("bad float {cell:?}")),
        ColumnType::Bool => match cell {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("bad bool {cell:?}")),
        },
        ColumnType::Str => Ok(Value::Str(cell.to_string())),
        ColumnType::Timestamp => parse_timestamp(cell)
            .map(Value::timestamp)
            .ok_or_else(|| format!("bad timestamp {cell:?}")),
    }
}

fn load_file(full_path: &str, path: &Path) -> Result<FileInput, StoreError> {
    let raw = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let json: Json = serde_json::from_str(line).map_err(|e| StoreError::Json(path.to_path_buf(), e))?;
        let obj = json.as_object().ok_or_else(|| StoreError::UnsupportedValue {
            container: full_path.to_string(),
            detail: format!("line {}: not a JSON object", i + 1),
        })?;
        let mut rid = None;
        let mut fields = BTreeMap::new();
        for (k, v) in obj {
            if k == RID_KEY {
                rid = Some(v.as_u64().ok_or_else(|| StoreError::UnsupportedValue {
                    container: full_path.to_string(),
                    detail: format!("line {}: {RID_KEY} must be a non-negative integer", i + 1),
                })?);
                continue;
            }
            let value = value_from_json(v).ok_or_else(|| StoreError::UnsupportedValue {
                container: full_path.to_string(),
                detail: format!("line {}: field {k:?} holds unsupported JSON", i + 1),
            })?;
            fields.insert(k.clone(), value);
        }
        records.push(RecordInput { rid, fields });
    }
    Ok(FileInput { full_path: full_path.to_string(), records })
}

/// Provenance file: JSON array of `[child, parent]` record ref strings.
/// Child refs use `@new` (or an empty id) for the version being committed.
pub fn load_prov_file(path: &Path) -> Result<Vec<(RecordRef, RecordRef)>, StoreError> {
    let raw = fs::read_to_string(path)?;
    let pairs: Vec<(String, String)> =
        serde_json::from_str(&raw).map_err(|e| StoreError::Json(path.to_path_buf(), e))?;
    pairs
        .into_iter()
        .map(|(c, p)| {
            let child = parse_child_ref(&c)
                .ok_or_else(|| StoreError::Provenance(format!("bad record ref {c:?}")))?;
            let parent = RecordRef::parse(&p)
                .ok_or_else(|| StoreError::Provenance(format!("bad record ref {p:?}")))?;
            Ok((child, parent))
        })
        .collect()
}

fn parse_child_ref(s: &str) -> Option<RecordRef> {
    if let Some(rest) = s.strip_prefix('/') {
        let (container, rid) = rest.rsplit_once('/')?;
        return Some(RecordRef::new("", container, rid.parse().ok()?));
    }
    RecordRef::parse(s)
}
