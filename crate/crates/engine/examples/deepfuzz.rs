//! One-off deep fuzz: engine vs oracle, raw vs desugared, twin rewrite.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vquel_testkit::genprog::{random_program, ProgGenConfig, Vocab};
use vquel_testkit::genrepo::{random_script, RepoGenConfig};
use vquel_testkit::naive::build_naive;
use vquel_testkit::refeval::ref_execute;
use vquel_testkit::rewrite::plain_aggregates_to_all_twins;

fn main() {
    let n: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5000);
    let mut bad = 0;
    for seed in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = RepoGenConfig::small();
        if seed % 3 == 0 { cfg.versions = 4; }
        let script = random_script(&mut rng, &cfg);
        let repo = build_naive(&script);
        let vocab = Vocab { version_ids: script.iter().map(|s| s.id.clone()).collect() };
        let mut pcfg = ProgGenConfig::default();
        if seed % 2 == 0 { pcfg.max_ranges = 5; }
        let program = random_program(&mut rng, &vocab, &pcfg);
        let printed = vquel_frontend::print_program(&program);

        let expected = match ref_execute(&program, &repo) {
            Ok(e) => e,
            Err(e) => { println!("seed {seed}: ORACLE ERR {e}\n{printed}"); bad += 1; continue; }
        };
        let desugared = vquel_frontend::desugar(&program);
        let raw = match vquel_engine::execute_program(&program, &repo) {
            Ok(r) => r,
            Err(e) => { println!("seed {seed}: RAW ERR {e}\n{printed}"); bad += 1; continue; }
        };
        let cooked = match vquel_engine::execute_program(&desugared, &repo) {
            Ok(r) => r,
            Err(e) => { println!("seed {seed}: DESUGARED ERR {e}\n{printed}"); bad += 1; continue; }
        };
        let twin = plain_aggregates_to_all_twins(&program);
        let twinned = vquel_engine::execute_program(&vquel_frontend::desugar(&twin), &repo).unwrap();
        if raw.len() != expected.len() || cooked.len() != expected.len() {
            println!("seed {seed}: LEN mismatch\n{printed}"); bad += 1; continue;
        }
        for i in 0..raw.len() {
            let want = vquel_engine::ResultSet { columns: expected[i].columns.clone(), rows: expected[i].rows.clone() };
            if raw[i].columns != want.columns || !raw[i].same_rows(&want) {
                println!("seed {seed}: RAW!=ORACLE stmt {i}\n{printed}\nraw: {:?}\noracle: {:?}", raw[i].rows, want.rows); bad += 1;
            }
            if !cooked[i].same_rows(&want) {
                println!("seed {seed}: DESUGARED!=ORACLE stmt {i}\n{printed}\ndesugared-src:\n{}\ncooked: {:?}\noracle: {:?}", vquel_frontend::print_program(&desugared), cooked[i].rows, want.rows); bad += 1;
            }
            if twinned[i].rows != cooked[i].rows {
                println!("seed {seed}: TWIN mismatch stmt {i}\n{printed}"); bad += 1;
            }
        }
        if bad > 6 { break; }
    }
    println!("done: {bad} divergences over {n} seeds");
}
