use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vquel_cli::repl::cmd_repl;
use vquel_cli::{cmd_commit, cmd_init, cmd_log, cmd_query, CommitArgs, OutputFormat};

/// Version-aware query CLI over delta-compressed dataset repositories.
#[derive(Parser)]
#[command(name = "vquel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty repository at PATH.
    Init { path: PathBuf },
    /// Commit a data directory as a new version and print its id.
    Commit {
        #[arg(short = 'r', long)]
        repo: PathBuf,
        /// Parent version ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        parents: Vec<String>,
        /// Author, as `Name` or `Name <email>`.
        #[arg(long)]
        author: String,
        #[arg(short = 'm', long)]
        message: String,
        /// Directory of <name>.csv + <name>.schema.json relations and
        /// <path>.jsonl files.
        #[arg(long)]
        data: PathBuf,
        /// JSON file of [child, parent] record-ref pairs; child refs use
        /// `@new` as the version.
        #[arg(long)]
        prov: Option<PathBuf>,
        /// Commit timestamp (RFC 3339); defaults to now.
        #[arg(long)]
        ts: Option<String>,
        /// Explicit version id; defaults to the next v<nn> counter value.
        #[arg(long)]
        id: Option<String>,
    },
    /// Run a query program.
    Query {
        #[arg(short = 'r', long)]
        repo: PathBuf,
        /// Program text.
        #[arg(short = 'q', long)]
        query: Option<String>,
        /// Program file (`-` for stdin).
        #[arg(short = 'f', long)]
        file: Option<String>,
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Interactive session.
    Repl {
        #[arg(short = 'r', long)]
        repo: PathBuf,
    },
    /// List versions newest-first, optionally only those where CONTAINER
    /// changed.
    Log {
        #[arg(short = 'r', long)]
        repo: PathBuf,
        container: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let outcome = match cli.command {
        Command::Init { path } => cmd_init(&path),
        Command::Commit { repo, parents, author, message, data, prov, ts, id } => cmd_commit(
            CommitArgs { repo, parents, author, message, data, prov, ts, id },
            &mut stdout,
        ),
        Command::Query { repo, query, file, format } => match format.parse::<OutputFormat>() {
            Ok(format) => {
                cmd_query(&repo, query.as_deref(), file.as_deref(), format, &mut stdout, &mut stderr)
            }
            Err(e) => Err(vquel_cli::CliError::Query(e)),
        },
        Command::Repl { repo } => cmd_repl(&repo),
        Command::Log { repo, container } => cmd_log(&repo, container.as_deref(), &mut stdout),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vquel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
