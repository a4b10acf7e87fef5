//! Frontend properties over the query corpus and generated programs: the
//! corpus parses and validates verbatim, printing round-trips, and
//! desugared output stays clean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vquel_frontend::ast::{Statement, Program};
use vquel_frontend::{desugar, parse, print_program, reject_reserved_names, validate, Severity};
use vquel_testkit::fixtures::QUERY_CORPUS;
use vquel_testkit::genprog::{random_program, ProgGenConfig, Vocab};

fn no_errors(program: &Program) -> Vec<String> {
    validate(program)
        .into_iter()
        .filter(|i| i.severity == Severity::Error)
        .map(|i| i.to_string())
        .collect()
}

#[test]
fn corpus_parses_validates_and_round_trips() {
    for (name, _, text) in QUERY_CORPUS {
        let program = parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(reject_reserved_names(&program), vec![], "{name}");
        assert_eq!(no_errors(&program), Vec::<String>::new(), "{name}");
        let printed = print_program(&program);
        let reparsed = parse(&printed).unwrap_or_else(|e| panic!("{name} reprint: {e}\n{printed}"));
        assert_eq!(program, reparsed, "{name} round trip");
        // the desugared form validates and has no filters left
        let desugared = desugar(&program);
        assert_eq!(no_errors(&desugared), Vec::<String>::new(), "{name} desugared");
        for stmt in &desugared.statements {
            if let Statement::Range(r) = stmt {
                assert!(!r.source.has_filters(), "{name}: filter survived desugaring");
            }
        }
        assert_eq!(desugar(&desugared), desugared, "{name}: desugar must be idempotent");
    }
}

#[test]
fn generated_programs_round_trip_and_desugar_cleanly() {
    let vocab = Vocab { version_ids: vec!["v01".into(), "v02".into(), "v03".into()] };
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let program = random_program(&mut rng, &vocab, &ProgGenConfig::default());
        let printed = print_program(&program);
        let reparsed = parse(&printed).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{printed}"));
        assert_eq!(program, reparsed, "seed {seed}: round trip\n{printed}");

        let desugared = desugar(&program);
        assert_eq!(no_errors(&desugared), Vec::<String>::new(), "seed {seed}\n{printed}");
        for stmt in &desugared.statements {
            if let Statement::Range(r) = stmt {
                assert!(!r.source.has_filters(), "seed {seed}: filter survived\n{printed}");
            }
        }
        assert_eq!(desugar(&desugared), desugared, "seed {seed}: idempotence");
    }
}
