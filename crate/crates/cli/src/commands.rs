//! Non-interactive commands. Errors carry the exit-code class: repository
//! and IO problems exit 1, query problems exit 2.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::Utc;

use vquel_core::model::Author;
use vquel_core::value::parse_timestamp;
use vquel_engine::run_pipeline;
use vquel_store::{load_data_dir, load_prov_file, CommitInput, Repository};

use crate::format::{render_all, OutputFormat};

#[derive(Debug)]
pub enum CliError {
    /// Repository or IO failure → exit code 1.
    Repo(String),
    /// Parse, validation, or evaluation failure → exit code 2.
    Query(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Repo(_) => 1,
            CliError::Query(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Repo(m) | CliError::Query(m) => f.write_str(m),
        }
    }
}

pub fn cmd_init(path: &Path) -> Result<(), CliError> {
    Repository::init(path).map_err(|e| CliError::Repo(e.to_string()))?;
    Ok(())
}

pub struct CommitArgs {
    pub repo: PathBuf,
    pub parents: Vec<String>,
    pub author: String,
    pub message: String,
    pub data: PathBuf,
    pub prov: Option<PathBuf>,
    pub ts: Option<String>,
    pub id: Option<String>,
}

/// Split `"Ada Lovelace <ada@example.org>"` into name and email.
fn parse_author(spec: &str) -> Result<Author, CliError> {
    let spec = spec.trim();
    if let Some(start) = spec.find('<') {
        if let Some(end) = spec.rfind('>') {
            if end > start {
                let name = spec[..start].trim();
                let email = spec[start + 1..end].trim();
                if name.is_empty() {
                    return Err(CliError::Repo("author name must not be empty".into()));
                }
                return Ok(Author::with_email(name, email));
            }
        }
    }
    if spec.is_empty() {
        return Err(CliError::Repo("author name must not be empty".into()));
    }
    Ok(Author::new(spec))
}

/// Commit a data directory; prints the fresh version id on stdout.
pub fn cmd_commit(args: CommitArgs, out: &mut impl std::io::Write) -> Result<(), CliError> {
    let repo = Repository::open(&args.repo).map_err(|e| CliError::Repo(e.to_string()))?;
    let payload = load_data_dir(&args.data).map_err(|e| CliError::Repo(e.to_string()))?;
    let provenance = match &args.prov {
        Some(path) => load_prov_file(path).map_err(|e| CliError::Repo(e.to_string()))?,
        None => Vec::new(),
    };
    let creation_ts = match &args.ts {
        Some(spec) => parse_timestamp(spec)
            .ok_or_else(|| CliError::Repo(format!("invalid --ts value {spec:?}")))?,
        None => Utc::now(),
    };
    let input = CommitInput {
        id: args.id.clone(),
        parents: args.parents.clone(),
        author: parse_author(&args.author)?,
        creation_ts,
        message: args.message.clone(),
        relations: payload.relations,
        files: payload.files,
        provenance,
    };
    let id = repo.commit(input).map_err(|e| CliError::Repo(e.to_string()))?;
    writeln!(out, "{id}").map_err(|e| CliError::Repo(e.to_string()))?;
    Ok(())
}

/// Run a program from `-q` text, a file, or stdin (`-f -`).
pub fn cmd_query(
    repo_path: &Path,
    query: Option<&str>,
    file: Option<&str>,
    format: OutputFormat,
    out: &mut impl std::io::Write,
    err: &mut impl std::io::Write,
) -> Result<(), CliError> {
    let source = match (query, file) {
        (Some(q), _) => q.to_string(),
        (None, Some("-")) => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| CliError::Repo(e.to_string()))?;
            buf
        }
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| CliError::Repo(e.to_string()))?,
        (None, None) => return Err(CliError::Query("no query given (use -q or -f)".into())),
    };
    let repo = Repository::open(repo_path).map_err(|e| CliError::Repo(e.to_string()))?;
    let (results, warnings) =
        run_pipeline(&source, &repo).map_err(|e| CliError::Query(e.to_string()))?;
    for warning in warnings {
        writeln!(err, "{warning}").map_err(|e| CliError::Repo(e.to_string()))?;
    }
    write!(out, "{}", render_all(&results, format)).map_err(|e| CliError::Repo(e.to_string()))?;
    Ok(())
}

/// Print version metadata newest-first, optionally only versions where a
/// named container changed.
pub fn cmd_log(
    repo_path: &Path,
    container: Option<&str>,
    out: &mut impl std::io::Write,
) -> Result<(), CliError> {
    let repo = Repository::open(repo_path).map_err(|e| CliError::Repo(e.to_string()))?;
    for meta in repo.log(container) {
        writeln!(
            out,
            "{}  {}  {}  {}",
            meta.id,
            vquel_core::value::format_timestamp(&meta.creation_ts),
            meta.author.name,
            meta.commit_msg
        )
        .map_err(|e| CliError::Repo(e.to_string()))?;
    }
    Ok(())
}
