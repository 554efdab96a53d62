// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{foo_table, FOO};
use forkmut::export::{matrix_to_string, read_matrix, trace_lines};
use forkmut::suite::{load_suite, write_suite};
use forkmut::tablefile::{load_table, save_table, TableFileError};
use forkmut_core::corpus::{generate_case, CorpusParams};
use forkmut_core::engines::run_engine;
use forkmut_core::harness::{KillMatrix, Verdict};
use forkmut_core::ir::parse_program;
use forkmut_core::mutgen::{generate_mutants, Operator, OperatorSet};
use forkmut_core::runtime::Limits;
use forkmut_core::{Engine, EngineConfig, MachineState};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn tables_round_trip_byte_exact(seed in 0u64..1_000, mask in 0u16..1024) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = forkmut_core::corpus::generate_source(&mut rng, seed % 2 == 0);
        let p = parse_program(&src).unwrap();
        let ops: OperatorSet = Operator::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, o)| *o)
            .collect();
        let t = generate_mutants(&p, ops);
        let text = save_table(&t);
        let back = load_table(&text, &p).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(save_table(&back), text);
    }

    #[test]
    fn matrices_round_trip(cells in proptest::collection::vec(0usize..6, 0..60), width in 1u32..6) {
        let mut m = KillMatrix::new(width);
        for (t, row) in cells.chunks(width as usize).filter(|r| r.len() == width as usize).enumerate() {
            m.push_row(format!("t{t}"), row.iter().map(|i| Verdict::ALL[*i]).collect());
        }
        let text = matrix_to_string(&m);
        let back = read_matrix(text.as_bytes()).unwrap();
        if m.tests().is_empty() {
            prop_assert!(back.tests().is_empty());
        } else {
            prop_assert_eq!(back, m);
        }
    }
}

#[test]
fn table_errors() {
    let p = parse_program(FOO).unwrap();
    let text = save_table(&foo_table(&p));
    assert!(text.starts_with("forkmut-table v1\nmutants 3\n"));

    let v2 = text.replacen("v1", "v2", 1);
    assert!(matches!(
        load_table(&v2, &p),
        Err(TableFileError::VersionMismatch(_))
    ));

    let edited = text.replacen("arith.mul", "arith.sub", 1);
    assert!(matches!(
        load_table(&edited, &p),
        Err(TableFileError::ChecksumMismatch)
    ));

    // a consistent checksum over a location that is not in the program
    let body_end = text.rfind("checksum ").unwrap();
    let body = text[..body_end].replacen("foo body 0", "foo body 9", 1);
    let forged = format!("{body}checksum {:08x}\n", crc32fast::hash(body.as_bytes()));
    assert!(matches!(
        load_table(&forged, &p),
        Err(TableFileError::NonexistentLocation { .. })
    ));

    let other = parse_program("func main/0 {\ne:\n  print 1\n  ret 0\n}\n").unwrap();
    assert!(load_table(&text, &other).is_err());
}

#[test]
fn suites_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = generate_case(&mut rng, &CorpusParams::default(), 200).unwrap();
    let path = dir.path().join("s.suite");
    write_suite(&path, "fx", &c.tests).unwrap();
    assert_eq!(load_suite(&path).unwrap(), c.tests);
}

#[test]
fn trace_names_fork_sites() {
    let p = parse_program(FOO).unwrap();
    let t = foo_table(&p);
    let s = MachineState::new(&p, &[1], Limits::default()).unwrap();
    let cfg = EngineConfig {
        trace: true,
        ..EngineConfig::default()
    };
    let r = run_engine(Engine::SplitStream, &p, &t, &s, &cfg).unwrap();
    let text = trace_lines(&p, "a", &r.trace);
    let first = text.lines().next().unwrap();
    assert_eq!(
        first,
        "test=a fork parent=0 child=1 at=foo:entry:2 step=3 ids=0"
    );
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("test=a exit process=0 outcome=exit:0 "));
}
