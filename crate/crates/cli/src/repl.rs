//! Interactive session. Statements are submitted with `;`. Range
//! declarations (and `retrieve into` sets) accumulate; each plain retrieve
//! executes against everything declared so far. `\reset` clears the
//! session, `\q` quits. Errors print inline and the session continues.

use std::io::{BufRead, Write};

use vquel_engine::{ExecSession, StatementOutcome};
use vquel_frontend::ast::{Program, Statement};
use vquel_frontend::{parse_statements, reject_reserved_names, validate, Desugarer, Severity};
use vquel_store::Repository;

use crate::format::render_table;
use crate::CliError;

pub fn cmd_repl(repo_path: &std::path::Path) -> Result<(), CliError> {
    let repo = Repository::open(repo_path).map_err(|e| CliError::Repo(e.to_string()))?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    run_session(&repo, &mut stdin.lock(), &mut stdout, &mut stderr)
}

/// REPL loop over explicit streams (testable without a terminal).
pub fn run_session(
    repo: &Repository,
    input: &mut impl BufRead,
    out: &mut impl Write,
    err: &mut impl Write,
) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Repo(e.to_string());
    let mut session = ExecSession::new(repo);
    let mut desugarer = Desugarer::new();
    let mut accepted: Vec<Statement> = Vec::new();
    let mut buffer = String::new();

    let _ = write!(err, "vquel> ");
    let _ = err.flush();
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            return Ok(()); // EOF
        }
        let trimmed = line.trim();
        if buffer.trim().is_empty() {
            match trimmed {
                "\\q" => return Ok(()),
                "\\reset" => {
                    session.reset();
                    desugarer = Desugarer::new();
                    accepted.clear();
                    let _ = write!(err, "vquel> ");
                    let _ = err.flush();
                    continue;
                }
                _ => {}
            }
        }
        buffer.push_str(&line);
        // submit on each `;` outside string literals
        while let Some(pos) = statement_break(&buffer) {
            let chunk: String = buffer[..pos].to_string();
            buffer = buffer[pos + 1..].to_string();
            process_chunk(&chunk, &mut session, &mut desugarer, &mut accepted, out, err)
                .map_err(io_err)?;
        }
        let prompt = if buffer.trim().is_empty() { "vquel> " } else { "  ...> " };
        let _ = write!(err, "{prompt}");
        let _ = err.flush();
    }
}

/// Index of the first `;` not inside a string literal or comment.
fn statement_break(buffer: &str) -> Option<usize> {
    let mut in_string = false;
    let mut in_comment = false;
    let mut prev = '\0';
    for (i, c) in buffer.char_indices() {
        match c {
            '\n' => in_comment = false,
            '"' if !in_comment && prev != '\\' => in_string = !in_string,
            '-' if !in_string && prev == '-' => in_comment = true,
            ';' if !in_string && !in_comment => return Some(i),
            _ => {}
        }
        prev = c;
    }
    None
}

fn process_chunk(
    chunk: &str,
    session: &mut ExecSession<'_, Repository>,
    desugarer: &mut Desugarer,
    accepted: &mut Vec<Statement>,
    out: &mut impl Write,
    err: &mut impl Write,
) -> std::io::Result<()> {
    if chunk.trim().is_empty() {
        return Ok(());
    }
    let statements = match parse_statements(chunk) {
        Ok(s) => s,
        Err(e) => {
            writeln!(err, "{e}")?;
            return Ok(());
        }
    };
    for stmt in statements {
        // validate against everything accepted so far
        let mut candidate = accepted.clone();
        candidate.push(stmt.clone());
        let program = Program { statements: candidate };
        if let Some(e) = reject_reserved_names(&program).into_iter().next() {
            writeln!(err, "{e}")?;
            return Ok(());
        }
        let issues = validate(&program);
        if let Some(e) = issues.iter().find(|i| i.severity == Severity::Error) {
            writeln!(err, "{e}")?;
            return Ok(());
        }
        for warning in issues.iter().filter(|i| i.severity == Severity::Warning) {
            writeln!(err, "{warning}")?;
        }
        let lowered = desugarer.statement(stmt.clone());
        accepted.push(stmt);
        for piece in &lowered {
            match session.statement(piece) {
                Ok(StatementOutcome::Output(result)) => {
                    write!(out, "{}", render_table(&result))?;
                    out.flush()?;
                }
                Ok(_) => {}
                Err(e) => {
                    writeln!(err, "{e}")?;
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}
