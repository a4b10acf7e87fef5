//! Exit-code contract and end-to-end behavior of the binary: init, commit
//! from a data directory, queries in all three formats, log, and a REPL
//! session over piped stdin.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;
use vquel_testkit::fixtures::figure_1b;
use vquel_testkit::script::write_data_dir;

fn vquel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vquel"))
        .args(args)
        .output()
        .expect("spawn vquel")
}

fn code(output: &Output) -> i32 {
    output.status.code().unwrap_or(-1)
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

/// init + replay the two-version example through `vquel commit`.
fn setup_repo(tmp: &TempDir) -> String {
    let repo = tmp.path().join("repo");
    let repo_str = repo.to_str().unwrap().to_string();
    assert_eq!(code(&vquel(&["init", &repo_str])), 0);
    for spec in figure_1b() {
        let data = tmp.path().join(format!("data-{}", spec.id));
        let prov = write_data_dir(&spec, &data).unwrap();
        let ts = vquel_core::value::format_timestamp(&spec.ts);
        let parents = spec.parents.join(",");
        let mut args: Vec<String> = vec![
            "commit".into(),
            "-r".into(),
            repo_str.clone(),
            "--author".into(),
            "Alice <alice@example.org>".into(),
            "-m".into(),
            spec.message.clone(),
            "--data".into(),
            data.to_str().unwrap().into(),
            "--ts".into(),
            ts,
        ];
        if !parents.is_empty() {
            args.push("--parents".into());
            args.push(parents);
        }
        if let Some(prov) = prov {
            args.push("--prov".into());
            args.push(prov.to_str().unwrap().into());
        }
        let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = vquel(&arg_refs);
        assert_eq!(code(&out), 0, "commit failed: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout(&out).trim(), spec.id, "counter ids replay the fixture ids");
    }
    repo_str
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = TempDir::new().unwrap();
    let repo = setup_repo(&tmp);

    // 0: success
    let ok = vquel(&["query", "-r", &repo, "-q", "range of V is Version\nretrieve V.id"]);
    assert_eq!(code(&ok), 0);

    // 1: repository errors
    let reinit = vquel(&["init", &repo]);
    assert_eq!(code(&reinit), 1);
    let missing = vquel(&["query", "-r", "/no/such/repo", "-q", "retrieve 1"]);
    assert_eq!(code(&missing), 1);

    // 2: query errors, with a line:column position
    let bad = vquel(&["query", "-r", &repo, "-q", "range of V Version"]);
    assert_eq!(code(&bad), 2);
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("1:12"), "{err}");
    let semantic = vquel(&["query", "-r", &repo, "-q", "retrieve X.id"]);
    assert_eq!(code(&semantic), 2);
}

#[test]
fn init_then_log_is_empty() {
    let tmp = TempDir::new().unwrap();
    let repo = tmp.path().join("repo");
    assert_eq!(code(&vquel(&["init", repo.to_str().unwrap()])), 0);
    let log = vquel(&["log", "-r", repo.to_str().unwrap()]);
    assert_eq!(code(&log), 0);
    assert_eq!(stdout(&log), "");
}

#[test]
fn log_lists_changed_containers_newest_first() {
    let tmp = TempDir::new().unwrap();
    let repo = setup_repo(&tmp);
    let log = vquel(&["log", "-r", &repo, "Employee"]);
    let lines: Vec<String> = stdout(&log).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("v02"));
    assert!(lines[1].starts_with("v01"));
    let none = vquel(&["log", "-r", &repo, "Ghost"]);
    assert_eq!(stdout(&none), "");
}

#[test]
fn commit_with_unknown_parent_fails() {
    let tmp = TempDir::new().unwrap();
    let repo = tmp.path().join("repo");
    let repo_str = repo.to_str().unwrap();
    vquel(&["init", repo_str]);
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let out = vquel(&[
        "commit", "-r", repo_str, "--parents", "ghost", "--author", "A", "-m", "x", "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn query_formats_agree() {
    let tmp = TempDir::new().unwrap();
    let repo = setup_repo(&tmp);
    let q = "range of V is Version\nrange of R is V.Relations\nretrieve V.id, R.name, R.changed\nsort by V.id";

    let table = vquel(&["query", "-r", &repo, "-q", q, "--format", "table"]);
    assert_eq!(code(&table), 0);
    let text = stdout(&table);
    assert!(text.contains("id") && text.contains("Employee"), "{text}");

    let csv_out = stdout(&vquel(&["query", "-r", &repo, "-q", q, "--format", "csv"]));
    let json_out = stdout(&vquel(&["query", "-r", &repo, "-q", q, "--format", "json"]));

    // decode both and compare cell text
    let mut csv_rows: Vec<Vec<String>> = Vec::new();
    for (i, line) in csv_out.lines().enumerate() {
        if i == 0 {
            assert_eq!(line, "id,name,changed");
            continue;
        }
        csv_rows.push(line.split(',').map(str::to_string).collect());
    }
    let parsed: serde_json::Value = serde_json::from_str(json_out.trim()).unwrap();
    assert_eq!(parsed["columns"], serde_json::json!(["id", "name", "changed"]));
    let json_rows: Vec<Vec<String>> = parsed["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            row.as_array()
                .unwrap()
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect()
        })
        .collect();
    assert_eq!(csv_rows, json_rows);
    assert_eq!(csv_rows.len(), 4);
}

#[test]
fn query_from_file_and_stdin() {
    let tmp = TempDir::new().unwrap();
    let repo = setup_repo(&tmp);
    let qfile = tmp.path().join("q.vql");
    std::fs::write(&qfile, "range of V is Version\nretrieve V.id\nwhere V.id = \"v01\"").unwrap();
    let out = vquel(&["query", "-r", &repo, "-f", qfile.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(stdout(&out), "id\nv01\n");

    let mut child = Command::new(env!("CARGO_BIN_EXE_vquel"))
        .args(["query", "-r", &repo, "-f", "-", "--format", "csv"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"range of V is Version\nretrieve V.id\nwhere V.id = \"v02\"")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), "id\nv02\n");
}

#[test]
fn repl_session_survives_errors_and_resets() {
    let tmp = TempDir::new().unwrap();
    let repo = setup_repo(&tmp);
    let script = "range of V is Version;\n\
        retrieve V.nonsense;\n\
        retrieve V.id\nwhere V.id = \"v01\";\n\
        \\reset\n\
        range of V is Version\nrange of R is V.Relations\nretrieve V.creation_ts\nwhere R.name = \"Employee\";\n\
        \\q\n";
    let mut child = Command::new(env!("CARGO_BIN_EXE_vquel"))
        .args(["repl", "-r", &repo])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    // the error did not kill the session: the valid query printed v01,
    // and after \reset the redeclared V works
    assert!(text.contains("v01"), "{text}");
    assert!(text.contains("2014-12-01"), "{text}");
    assert!(text.contains("2015-03-15"), "{text}");
    let errs = String::from_utf8_lossy(&out.stderr);
    assert!(errs.contains("no attribute"), "{errs}");
}

#[test]
fn repl_quits_cleanly_on_immediate_quit() {
    let tmp = TempDir::new().unwrap();
    let repo = setup_repo(&tmp);
    let mut child = Command::new(env!("CARGO_BIN_EXE_vquel"))
        .args(["repl", "-r", &repo])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"\\q\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "");
}

/// Queries, log, and the REPL leave the repository untouched.
#[test]
fn read_commands_do_not_mutate_the_repository() {
    let tmp = TempDir::new().unwrap();
    let repo = setup_repo(&tmp);
    let snapshot = |root: &str| -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        fn walk(dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
            for entry in std::fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    walk(&path, out);
                } else {
                    out.push((path.to_string_lossy().to_string(), std::fs::read(&path).unwrap()));
                }
            }
        }
        walk(Path::new(root), &mut files);
        files.sort();
        files
    };
    let before = snapshot(&repo);
    vquel(&["query", "-r", &repo, "-q", "range of V is Version\nretrieve V.all"]);
    vquel(&["log", "-r", &repo]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_vquel"))
        .args(["repl", "-r", &repo])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"range of V is Version;\nretrieve V.id;\n\\q\n").unwrap();
    child.wait_with_output().unwrap();
    assert_eq!(before, snapshot(&repo));
}

#[test]
fn ingested_fixture_queries_match_in_process_results() {
    let tmp = TempDir::new().unwrap();
    let repo_path = setup_repo(&tmp);
    // run Query 5 through the process and compare against the library
    let q = vquel_testkit::fixtures::QUERY_CORPUS[4].2;
    let out = vquel(&["query", "-r", &repo_path, "-q", q, "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let repo = vquel_store::Repository::open(Path::new(&repo_path)).unwrap();
    let (results, _) = vquel_engine::run_pipeline(q, &repo).unwrap();
    assert_eq!(stdout(&out), vquel_cli::render_csv(&results[0]));
}
