//! Acceptance suite. Each test covers one criterion end to end and prints
//! a PASS line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! 1. Query corpus golden suite against the brute-force reference
//!    evaluator, through the on-disk store, exact match, under 10 s.
//! 2. Desugaring equivalence on 500 random programs plus the printed
//!    shorthand pairs, exact multisets, under 30 s.
//! 3. Plain aggregates equal their `_all` twins grouped by the argument's
//!    ancestor chain, 200 random cases, exact.
//! 4. Storage oracle: 20 random 50-version histories check out bit-exact
//!    against the full-copy baseline, delta bytes stay under full-copy
//!    bytes, under 30 s.
//! 5. Version-graph traversals equal brute-force BFS on 50 random DAGs of
//!    up to 200 nodes for hop limits 1, 2, 5, and unlimited.
//! 6. Repository validation accepts generated repositories and pinpoints
//!    five seeded corruption classes.
//! 7. Engine/oracle fuzz across 300 random full-grammar programs.
//! 8. The CLI reproduces the golden outputs through the process boundary
//!    in all three output formats, honoring the 0/1/2 exit-code contract.

use std::io::Write as _;
use std::process::{Command, Output, Stdio};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use vquel_core::{validate_repository, InMemoryRepo, Value, ViolationKind};
use vquel_engine::{execute_program, run_pipeline, ResultSet};
use vquel_frontend::{desugar, parse};
use vquel_store::{disk_usage, full_copy_bytes, Repository};
use vquel_testkit::bfs::{self, EdgeList};
use vquel_testkit::fixtures::{FixtureKind, QUERY_CORPUS, SHORTHAND_PAIRS};
use vquel_testkit::genprog::{random_program, ProgGenConfig, Vocab};
use vquel_testkit::genrepo::{random_dag, random_script, RepoGenConfig};
use vquel_testkit::naive::build_naive;
use vquel_testkit::refeval::{ref_execute, RefResult};
use vquel_testkit::rewrite::plain_aggregates_to_all_twins;
use vquel_testkit::script::write_data_dir;
use vquel_testkit::{apply_to_store, CommitScript};

fn to_result_set(r: &RefResult) -> ResultSet {
    ResultSet { columns: r.columns.clone(), rows: r.rows.clone() }
}

fn store_fixture(tmp: &TempDir, kind: FixtureKind) -> (Repository, InMemoryRepo, CommitScript) {
    let script = kind.script();
    let repo = Repository::init(tmp.path().join(format!("{kind:?}"))).unwrap();
    apply_to_store(&script, &repo).unwrap();
    (repo, build_naive(&script), script)
}

fn s(v: &str) -> Value {
    Value::Str(v.to_string())
}

#[test]
fn criterion_1_query_corpus_golden_suite() {
    let started = Instant::now();
    let tmp = TempDir::new().unwrap();
    for kind in FixtureKind::all() {
        let (store, naive, _) = store_fixture(&tmp, kind);
        for (name, qkind, text) in QUERY_CORPUS {
            if qkind != kind {
                continue;
            }
            // the independent reference path: parsed program interpreted
            // directly over the full-copy repository
            let program = parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let expected: Vec<ResultSet> = ref_execute(&program, &naive)
                .unwrap_or_else(|e| panic!("{name}: oracle: {e}"))
                .iter()
                .map(to_result_set)
                .collect();
            // the real path: desugar + validate + engine over the delta store
            let (got, _) = run_pipeline(text, &store).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(got, expected, "{name}: golden mismatch");
        }
    }
    // hand-frozen anchors so both implementations answer to the fixture
    let anchors = TempDir::new().unwrap();
    let (store, _, _) = store_fixture(&anchors, FixtureKind::Figure1b);
    let (q1, _) = run_pipeline(QUERY_CORPUS[0].2, &store).unwrap();
    assert_eq!(q1[0].rows, vec![vec![s("Alice")]]);
    let (q11, _) = run_pipeline(QUERY_CORPUS[10].2, &store).unwrap();
    assert_eq!(q11[0].rows, vec![vec![s("v02")]]);
    let (prov_store, _, _) = store_fixture(&anchors, FixtureKind::Provenance);
    let (q16, _) = run_pipeline(QUERY_CORPUS[15].2, &prov_store).unwrap();
    assert_eq!(
        q16[0].rows,
        vec![
            vec![Value::Int(1), Value::Int(1)],
            vec![Value::Int(3), Value::Int(1)],
            vec![Value::Int(3), Value::Int(2)],
        ]
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "golden suite took {elapsed:?}");
    println!("PASS criterion 1: 16 corpus queries match the reference evaluator exactly ({elapsed:?})");
}

fn random_case(seed: u64) -> (InMemoryRepo, vquel_frontend::Program) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let script = random_script(&mut rng, &RepoGenConfig::small());
    let repo = build_naive(&script);
    let vocab = Vocab { version_ids: script.iter().map(|s| s.id.clone()).collect() };
    let program = random_program(&mut rng, &vocab, &ProgGenConfig::default());
    (repo, program)
}

#[test]
fn criterion_2_desugaring_equivalence() {
    let started = Instant::now();
    for seed in 0..500 {
        let (repo, program) = random_case(seed);
        let raw = execute_program(&program, &repo)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", vquel_frontend::print_program(&program)));
        let cooked = execute_program(&desugar(&program), &repo).unwrap();
        assert_eq!(raw.len(), cooked.len(), "seed {seed}");
        for (a, b) in raw.iter().zip(&cooked) {
            assert!(
                a.same_rows(b),
                "seed {seed}: desugaring changed results\n{}",
                vquel_frontend::print_program(&program)
            );
        }
    }
    // the published shorthand/expanded pairs agree on the fixture
    for (sugar, expanded, kind) in SHORTHAND_PAIRS {
        let repo = build_naive(&kind.script());
        let (a, _) = run_pipeline(sugar, &repo).unwrap();
        let (b, _) = run_pipeline(expanded, &repo).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!(x.same_rows(y), "shorthand pair diverged: {sugar}");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "desugaring equivalence took {elapsed:?}");
    println!("PASS criterion 2: 500 random programs + printed pairs, desugared results identical ({elapsed:?})");
}

#[test]
fn criterion_3_aggregate_law() {
    let started = Instant::now();
    for seed in 1_000..1_200 {
        let (repo, program) = random_case(seed);
        let twin = plain_aggregates_to_all_twins(&program);
        let a = execute_program(&desugar(&program), &repo)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", vquel_frontend::print_program(&program)));
        let b = execute_program(&desugar(&twin), &repo).unwrap();
        assert_eq!(a.len(), b.len(), "seed {seed}");
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                x.rows,
                y.rows,
                "seed {seed}: implicit grouping law broken\n{}",
                vquel_frontend::print_program(&program)
            );
        }
    }
    let elapsed = started.elapsed();
    println!("PASS criterion 3: plain aggregates equal their _all twins on 200 random cases ({elapsed:?})");
}

#[test]
fn criterion_4_storage_oracle() {
    let started = Instant::now();
    let tmp = TempDir::new().unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + seed);
        let script = random_script(&mut rng, &RepoGenConfig::storage());
        assert_eq!(script.len(), 50);
        let repo = Repository::init(tmp.path().join(format!("repo{seed}"))).unwrap();
        apply_to_store(&script, &repo).unwrap();
        let naive = build_naive(&script);
        let mut full_bytes = 0u64;
        for spec in &script {
            let real = repo.checkout(&spec.id).unwrap();
            let full = naive.get(&spec.id).unwrap();
            assert_eq!(real.as_ref(), full.as_ref(), "seed {seed} version {}", spec.id);
            full_bytes += full_copy_bytes(full);
        }
        let (delta_bytes, _) = disk_usage(repo.root()).unwrap();
        assert!(
            delta_bytes <= full_bytes,
            "seed {seed}: delta store ({delta_bytes} B) larger than full copies ({full_bytes} B)"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "storage oracle took {elapsed:?}");
    println!("PASS criterion 4: 20×50-version histories check out bit-exact, delta ≤ full copy ({elapsed:?})");
}

#[test]
fn criterion_5_traversal_oracle() {
    let started = Instant::now();
    let tmp = TempDir::new().unwrap();
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
        let nodes = rng.gen_range(2..=200);
        let script = random_dag(&mut rng, nodes);
        let repo = Repository::init(tmp.path().join(format!("dag{seed}"))).unwrap();
        apply_to_store(&script, &repo).unwrap();
        let mut edges = EdgeList::default();
        for spec in &script {
            for p in &spec.parents {
                edges.add_edge(&spec.id, p);
            }
        }
        for spec in &script {
            for hops in [Some(1), Some(2), Some(5), None] {
                assert_eq!(
                    repo.ancestors(&spec.id, hops).unwrap(),
                    bfs::ancestors(&edges, &spec.id, hops),
                    "seed {seed} P({hops:?}) of {}",
                    spec.id
                );
                assert_eq!(
                    repo.descendants(&spec.id, hops).unwrap(),
                    bfs::descendants(&edges, &spec.id, hops),
                    "seed {seed} D({hops:?}) of {}",
                    spec.id
                );
                let n_hops = hops.unwrap_or(usize::MAX);
                assert_eq!(
                    repo.neighborhood(&spec.id, n_hops).unwrap(),
                    bfs::neighborhood(&edges, &spec.id, n_hops),
                    "seed {seed} N({hops:?}) of {}",
                    spec.id
                );
            }
        }
    }
    let elapsed = started.elapsed();
    println!("PASS criterion 5: P/D/N equal brute-force BFS on 50 random DAGs ({elapsed:?})");
}

#[test]
fn criterion_6_invariant_suite() {
    let started = Instant::now();
    // generated repositories validate cleanly
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(60_000 + seed);
        let script = random_script(&mut rng, &RepoGenConfig::small());
        let naive = build_naive(&script);
        assert_eq!(validate_repository(&naive), vec![], "seed {seed}");
    }
    // each corruption class is caught with its own violation kind
    let base = || build_naive(&FixtureKind::Figure1b.script());

    let mut cycle = base();
    cycle.get_mut("v01").unwrap().meta.parents.push("v02".into());
    cycle.get_mut("v02").unwrap().meta.children.push("v01".into());
    assert!(validate_repository(&cycle).iter().any(|v| v.kind == ViolationKind::GraphCycle));

    let mut dangling = base();
    dangling.get_mut("v02").unwrap().meta.parents.push("ghost".into());
    assert!(validate_repository(&dangling).iter().any(|v| v.kind == ViolationKind::DanglingEdge));

    let mut bad_prov = base();
    {
        let v1 = bad_prov.get_mut("v01").unwrap();
        let idx = v1.relations.iter().position(|r| r.name == "Employee").unwrap();
        v1.relations[idx].tuples[0]
            .parents
            .insert(vquel_core::RecordRef::new("v02", "Employee", 2));
    }
    assert!(validate_repository(&bad_prov)
        .iter()
        .any(|v| v.kind == ViolationKind::ProvenanceViolation));

    let mut bad_schema = base();
    bad_schema.get_mut("v01").unwrap().relations[1].tuples[0]
        .fields
        .insert("age".into(), Value::Str("old".into()));
    assert!(validate_repository(&bad_schema)
        .iter()
        .any(|v| v.kind == ViolationKind::SchemaViolation));

    let mut bad_changed = base();
    bad_changed.get_mut("v02").unwrap().relations[1].changed = false;
    assert!(validate_repository(&bad_changed)
        .iter()
        .any(|v| v.kind == ViolationKind::ChangedFlagMismatch));

    let elapsed = started.elapsed();
    println!("PASS criterion 6: valid repositories accepted, 5 corruption classes rejected by kind ({elapsed:?})");
}

#[test]
fn criterion_7_engine_oracle_fuzz() {
    let started = Instant::now();
    for seed in 2_000..2_300 {
        let (repo, program) = random_case(seed);
        let expected = ref_execute(&program, &repo)
            .unwrap_or_else(|e| panic!("seed {seed}: oracle: {e}\n{}", vquel_frontend::print_program(&program)));
        let got = execute_program(&desugar(&program), &repo)
            .unwrap_or_else(|e| panic!("seed {seed}: engine: {e}\n{}", vquel_frontend::print_program(&program)));
        assert_eq!(got.len(), expected.len(), "seed {seed}");
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!(g.columns, e.columns, "seed {seed}");
            assert!(
                g.same_rows(&to_result_set(e)),
                "seed {seed}: engine diverged from oracle\n{}\nengine: {:?}\noracle: {:?}",
                vquel_frontend::print_program(&program),
                g.rows,
                e.rows
            );
        }
    }
    let elapsed = started.elapsed();
    println!("PASS criterion 7: engine matches the oracle on 300 full-grammar programs ({elapsed:?})");
}

// ---- criterion 8: through the process boundary ----

fn vquel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vquel"))
        .args(args)
        .output()
        .expect("spawn vquel")
}

fn replay_via_cli(tmp: &TempDir, kind: FixtureKind) -> String {
    let repo = tmp.path().join(format!("cli-{kind:?}"));
    let repo_str = repo.to_str().unwrap().to_string();
    assert_eq!(vquel(&["init", &repo_str]).status.code(), Some(0));
    for spec in kind.script() {
        let data = tmp.path().join(format!("data-{kind:?}-{}", spec.id));
        let prov = write_data_dir(&spec, &data).unwrap();
        let ts = vquel_core::value::format_timestamp(&spec.ts);
        let mut args: Vec<String> = vec![
            "commit".into(),
            "-r".into(),
            repo_str.clone(),
            "--author".into(),
            spec.author.name.clone(),
            "-m".into(),
            spec.message.clone(),
            "--data".into(),
            data.to_str().unwrap().into(),
            "--ts".into(),
            ts,
            "--id".into(),
            spec.id.clone(),
        ];
        if !spec.parents.is_empty() {
            args.push("--parents".into());
            args.push(spec.parents.join(","));
        }
        if let Some(prov) = prov {
            args.push("--prov".into());
            args.push(prov.to_str().unwrap().into());
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = vquel(&refs);
        assert_eq!(
            out.status.code(),
            Some(0),
            "commit {}: {}",
            spec.id,
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), spec.id);
    }
    repo_str
}

#[test]
fn criterion_8_cli_contract() {
    let started = Instant::now();
    let tmp = TempDir::new().unwrap();
    let mut repos: std::collections::HashMap<FixtureKind, String> = Default::default();
    for kind in FixtureKind::all() {
        repos.insert(kind, replay_via_cli(&tmp, kind));
    }
    for (name, kind, text) in QUERY_CORPUS {
        let naive = build_naive(&kind.script());
        let program = parse(text).unwrap();
        let expected: Vec<ResultSet> = ref_execute(&program, &naive)
            .unwrap()
            .iter()
            .map(to_result_set)
            .collect();
        let repo = &repos[&kind];
        for format in ["table", "csv", "json"] {
            let out = vquel(&["query", "-r", repo, "-q", text, "--format", format]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "{name} [{format}]: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            let stdout = String::from_utf8_lossy(&out.stdout).to_string();
            let rendered = match format {
                "table" => vquel_cli::format::render_all(&expected, vquel_cli::OutputFormat::Table),
                "csv" => vquel_cli::format::render_all(&expected, vquel_cli::OutputFormat::Csv),
                _ => vquel_cli::format::render_all(&expected, vquel_cli::OutputFormat::Json),
            };
            assert_eq!(stdout, rendered, "{name} [{format}] output mismatch");
        }
    }
    // exit-code contract through the same binary
    let fig = &repos[&FixtureKind::Figure1b];
    assert_eq!(vquel(&["init", fig]).status.code(), Some(1));
    assert_eq!(
        vquel(&["query", "-r", fig, "-q", "range of"]).status.code(),
        Some(2)
    );
    assert_eq!(
        vquel(&["query", "-r", "/definitely/not/here", "-q", "retrieve 1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        vquel(&["query", "-r", fig, "-q", "range of V is Version\nretrieve V.id"])
            .status
            .code(),
        Some(0)
    );
    // json and csv decode to the same data (spot check on a corpus query)
    let q = QUERY_CORPUS[4].2;
    let csv_out = vquel(&["query", "-r", fig, "-q", q, "--format", "csv"]);
    let json_out = vquel(&["query", "-r", fig, "-q", q, "--format", "json"]);
    let csv_text = String::from_utf8_lossy(&csv_out.stdout).to_string();
    let parsed: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&json_out.stdout).trim()).unwrap();
    let csv_lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(csv_lines.len() - 1, parsed["rows"].as_array().unwrap().len());
    let elapsed = started.elapsed();
    println!("PASS criterion 8: CLI reproduces golden outputs in table/csv/json with 0/1/2 exit codes ({elapsed:?})");
}

#[test]
fn repl_pipeline_smoke() {
    // Query 3 entered interactively prints the commit timestamps
    let tmp = TempDir::new().unwrap();
    let repo = replay_via_cli(&tmp, FixtureKind::Figure1b);
    let mut child = Command::new(env!("CARGO_BIN_EXE_vquel"))
        .args(["repl", "-r", &repo])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"range of V is Version\nrange of R is V.Relations\nretrieve V.commit_ts\nwhere R.name = \"Employee\";\n\\q\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("2014-12-01T10:00:00Z"), "{text}");
    assert!(text.contains("2015-03-15T09:30:00Z"), "{text}");
}
