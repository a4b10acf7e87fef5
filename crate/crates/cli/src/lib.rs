//! Command implementations behind the `vquel` binary: repository
//! lifecycle, data ingestion commits, query execution with table/csv/json
//! output, and the interactive REPL.

pub mod commands;
pub mod format;
pub mod repl;

pub use commands::{cmd_commit, cmd_init, cmd_log, cmd_query, CliError, CommitArgs};
pub use format::{render_csv, render_json, render_table, OutputFormat};
