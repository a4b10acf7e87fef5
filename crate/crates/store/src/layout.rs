//! Serde shapes for the on-disk layout and record (de)serialization.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use std::collections::BTreeMap;

use vquel_core::value::{format_timestamp, parse_timestamp, value_from_json, value_to_json};
use vquel_core::{ColumnType, Record, Value};

pub const RID_KEY: &str = "_rid";

#[derive(Debug, Serialize, Deserialize)]
pub struct AuthorDto {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub email: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ColumnDto {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContainerEntry {
    pub name_or_path: String,
    pub kind: String, // "relation" | "file"
    pub changed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub schema: Option<Vec<ColumnDto>>,
    pub storage_ref: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestVersion {
    pub id: String,
    pub author: AuthorDto,
    pub creation_ts: String,
    pub commit_msg: String,
    pub parents: Vec<String>,
    pub containers: Vec<ContainerEntry>,
}

/// One `objects/<ref>.json` payload.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectFile {
    Snapshot {
        records: Vec<Map<String, Json>>,
    },
    Delta {
        base: String,
        added: Vec<Map<String, Json>>,
        removed: Vec<u64>,
        modified: Vec<Map<String, Json>>,
    },
}

pub fn schema_to_dto(schema: &[(String, ColumnType)]) -> Vec<ColumnDto> {
    schema
        .iter()
        .map(|(name, ty)| ColumnDto { name: name.clone(), ty: ty.name().to_string() })
        .collect()
}

pub fn schema_from_dto(dto: &[ColumnDto]) -> Result<Vec<(String, ColumnType)>, String> {
    dto.iter()
        .map(|c| {
            ColumnType::parse(&c.ty)
                .map(|ty| (c.name.clone(), ty))
                .ok_or_else(|| format!("unknown column type {:?}", c.ty))
        })
        .collect()
}

/// Encode a record as a JSON object with the reserved `_rid` key.
pub fn record_to_json(rec: &Record) -> Map<String, Json> {
    let mut m = Map::new();
    m.insert(RID_KEY.to_string(), Json::from(rec.rid));
    for (k, v) in &rec.fields {
        m.insert(k.clone(), value_to_json(v));
    }
    m
}

/// Decode a record object. With a schema, string-encoded timestamps in
/// timestamp columns are restored and numeric columns are type-checked;
/// without one, plain JSON typing applies.
pub fn record_from_json(
    obj: &Map<String, Json>,
    schema: Option<&[(String, ColumnType)]>,
) -> Result<Record, String> {
    let rid = obj
        .get(RID_KEY)
        .and_then(Json::as_u64)
        .ok_or_else(|| format!("record object missing numeric {RID_KEY}"))?;
    let mut fields = BTreeMap::new();
    for (k, v) in obj {
        if k == RID_KEY {
            continue;
        }
        let col_ty = schema.and_then(|s| s.iter().find(|(n, _)| n == k)).map(|(_, t)| *t);
        fields.insert(k.clone(), decode_value(k, v, col_ty)?);
    }
    Ok(Record::new(rid, fields))
}

fn decode_value(field: &str, v: &Json, ty: Option<ColumnType>) -> Result<Value, String> {
    match ty {
        Some(ColumnType::Timestamp) => match v {
            Json::Null => Ok(Value::Null),
            Json::String(s) => parse_timestamp(s)
                .map(Value::timestamp)
                .ok_or_else(|| format!("field {field:?}: invalid timestamp {s:?}")),
            _ => Err(format!("field {field:?}: timestamp column holds {v}")),
        },
        Some(ColumnType::Int) => match v {
            Json::Null => Ok(Value::Null),
            Json::Number(n) if n.is_i64() => Ok(Value::Int(n.as_i64().unwrap())),
            _ => Err(format!("field {field:?}: int column holds {v}")),
        },
        Some(ColumnType::Float) => match v {
            Json::Null => Ok(Value::Null),
            Json::Number(n) => n
                .as_f64()
                .filter(|f| f.is_finite())
                .map(Value::Float)
                .ok_or_else(|| format!("field {field:?}: non-finite float")),
            _ => Err(format!("field {field:?}: float column holds {v}")),
        },
        Some(ColumnType::Bool) => match v {
            Json::Null => Ok(Value::Null),
            Json::Bool(b) => Ok(Value::Bool(*b)),
            _ => Err(format!("field {field:?}: bool column holds {v}")),
        },
        Some(ColumnType::Str) => match v {
            Json::Null => Ok(Value::Null),
            Json::String(s) => Ok(Value::Str(s.clone())),
            _ => Err(format!("field {field:?}: string column holds {v}")),
        },
        None => value_from_json(v).ok_or_else(|| format!("field {field:?}: unsupported JSON value {v}")),
    }
}

/// Values storable in schemaless file records: everything except Timestamp,
/// which would not survive the JSON round trip.
pub fn file_value_ok(v: &Value) -> bool {
    !matches!(v, Value::Timestamp(_))
}

pub fn ts_to_rfc3339(ts: &chrono::DateTime<chrono::Utc>) -> String {
    format_timestamp(ts)
}
