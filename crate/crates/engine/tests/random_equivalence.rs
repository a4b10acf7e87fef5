//! Randomized cross-checks: the engine against the reference evaluator,
//! sugared against desugared programs, and plain aggregates against their
//! explicitly grouped twins. The acceptance suite runs larger counts of
//! the same properties; these keep the crate honest on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vquel_engine::{execute_program, ResultSet};
use vquel_frontend::{desugar, validate, Severity};
use vquel_testkit::genprog::{random_program, ProgGenConfig, Vocab};
use vquel_testkit::genrepo::{random_script, RepoGenConfig};
use vquel_testkit::naive::build_naive;
use vquel_testkit::refeval::ref_execute;
use vquel_testkit::rewrite::plain_aggregates_to_all_twins;

fn multiset_eq(a: &ResultSet, columns: &[String], rows: &[Vec<vquel_core::Value>]) -> bool {
    let b = ResultSet { columns: columns.to_vec(), rows: rows.to_vec() };
    a.same_rows(&b)
}

fn run_case(seed: u64) -> (vquel_core::InMemoryRepo, vquel_frontend::Program) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let script = random_script(&mut rng, &RepoGenConfig::small());
    let repo = build_naive(&script);
    let vocab = Vocab { version_ids: script.iter().map(|s| s.id.clone()).collect() };
    let program = random_program(&mut rng, &vocab, &ProgGenConfig::default());
    (repo, program)
}

#[test]
fn generated_programs_validate_cleanly() {
    for seed in 0..200 {
        let (_, program) = run_case(seed);
        let errors: Vec<_> = validate(&program)
            .into_iter()
            .filter(|i| i.severity == Severity::Error)
            .collect();
        assert!(errors.is_empty(), "seed {seed}: {errors:?}\nprogram:\n{}", vquel_frontend::print_program(&program));
    }
}

#[test]
fn engine_matches_reference_evaluator_on_random_programs() {
    for seed in 0..120 {
        let (repo, program) = run_case(seed);
        let expected = ref_execute(&program, &repo).unwrap_or_else(|e| {
            panic!("seed {seed}: oracle failed: {e}\n{}", vquel_frontend::print_program(&program))
        });
        let desugared = desugar(&program);
        let got = execute_program(&desugared, &repo).unwrap_or_else(|e| {
            panic!("seed {seed}: engine failed: {e}\n{}", vquel_frontend::print_program(&program))
        });
        assert_eq!(got.len(), expected.len(), "seed {seed}");
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!(g.columns, e.columns, "seed {seed}\n{}", vquel_frontend::print_program(&program));
            assert!(
                multiset_eq(g, &e.columns, &e.rows),
                "seed {seed}\nprogram:\n{}\nengine: {:?}\noracle: {:?}",
                vquel_frontend::print_program(&program),
                g.rows,
                e.rows
            );
        }
    }
}

#[test]
fn desugaring_preserves_results() {
    for seed in 0..120 {
        let (repo, program) = run_case(seed);
        let raw = execute_program(&program, &repo).unwrap_or_else(|e| {
            panic!("seed {seed}: raw eval failed: {e}\n{}", vquel_frontend::print_program(&program))
        });
        let desugared = desugar(&program);
        let cooked = execute_program(&desugared, &repo).unwrap();
        assert_eq!(raw.len(), cooked.len());
        for (a, b) in raw.iter().zip(&cooked) {
            assert!(
                multiset_eq(a, &b.columns, &b.rows),
                "seed {seed}\nprogram:\n{}\ndesugared:\n{}\nraw: {:?}\ncooked: {:?}",
                vquel_frontend::print_program(&program),
                vquel_frontend::print_program(&desugared),
                a.rows,
                b.rows
            );
        }
    }
}

#[test]
fn plain_aggregates_equal_their_grouped_twins() {
    for seed in 0..100 {
        let (repo, program) = run_case(seed);
        let twin = plain_aggregates_to_all_twins(&program);
        let a = execute_program(&desugar(&program), &repo).unwrap();
        let b = execute_program(&desugar(&twin), &repo).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            // display column names differ (count vs count_all); rows must not
            assert_eq!(x.rows, y.rows, "seed {seed}\n{}", vquel_frontend::print_program(&program));
        }
    }
}
