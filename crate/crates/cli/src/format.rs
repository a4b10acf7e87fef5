//! Result rendering. Table output pads columns and truncates long cells;
//! csv and json are loss-free machine formats encoding the same data.

use vquel_core::value::value_to_json;
use vquel_core::Value;
use vquel_engine::ResultSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<OutputFormat, String> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected table, csv, or json)")),
        }
    }
}

/// Text form shared by table and csv cells; Null renders empty.
pub fn value_text(v: &Value) -> String {
    v.to_string()
}

const MAX_TABLE_CELL: usize = 64;

fn truncate_cell(text: String) -> String {
    if text.chars().count() <= MAX_TABLE_CELL {
        return text;
    }
    let mut out: String = text.chars().take(MAX_TABLE_CELL - 1).collect();
    out.push('…');
    out
}

pub fn render_table(result: &ResultSet) -> String {
    let header: Vec<String> = result.columns.clone();
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|row| row.iter().map(|v| truncate_cell(value_text(v))).collect())
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        let line: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    emit(&mut out, &header);
    let dashes: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    emit(&mut out, &dashes);
    for row in &rows {
        emit(&mut out, row);
    }
    out
}

pub fn render_csv(result: &ResultSet) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(&result.columns).expect("csv write");
    for row in &result.rows {
        let cells: Vec<String> = row.iter().map(value_text).collect();
        writer.write_record(&cells).expect("csv write");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv utf8")
}

pub fn render_json(result: &ResultSet) -> String {
    let rows: Vec<serde_json::Value> = result
        .rows
        .iter()
        .map(|row| serde_json::Value::Array(row.iter().map(value_to_json).collect()))
        .collect();
    serde_json::json!({ "columns": result.columns, "rows": rows }).to_string()
}

/// Render a sequence of result sets in one format: json emits one object
/// per line, table and csv separate sets with a blank line.
pub fn render_all(results: &[ResultSet], format: OutputFormat) -> String {
    let mut out = String::new();
    for (i, result) in results.iter().enumerate() {
        match format {
            OutputFormat::Table => {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&render_table(result));
            }
            OutputFormat::Csv => {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&render_csv(result));
            }
            OutputFormat::Json => {
                out.push_str(&render_json(result));
                out.push('\n');
            }
        }
    }
    out
}
