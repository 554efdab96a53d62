// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{foo, foo_table, location};
use forkmut_core::engines::{run_engine, ForkEvent, Outcome};
use forkmut_core::harness::{run_test, TestCase};
use forkmut_core::ir::{enumerate_locations, validate};
use forkmut_core::runtime::{Limits, Variant};
use forkmut_core::{AbstractChange, Engine, EngineConfig, MachineState, MutantId, Verdict};

fn traced() -> EngineConfig {
    EngineConfig {
        trace: true,
        ..EngineConfig::default()
    }
}

fn forks(trace: &[ForkEvent]) -> Vec<(u32, Vec<MutantId>)> {
    trace
        .iter()
        .filter_map(|e| match e {
            ForkEvent::Fork { pc, ids, .. } => Some((pc.index, ids.clone())),
            _ => None,
        })
        .collect()
}

#[test]
fn program_shape() {
    let p = foo();
    assert!(validate(&p).is_empty());
    assert_eq!(p.functions.len(), 3);
    let locs = enumerate_locations(&p);
    let inc = location(&p, "foo", "entry", 2);
    let half = location(&p, "foo", "body", 0);
    assert_ne!(inc, half);
    assert!(locs.iter().any(|l| l.id == inc) && locs.iter().any(|l| l.id == half));
}

#[test]
fn first_increment_changes_are_equal() {
    let p = foo();
    let t = foo_table(&p);
    let mut s = MachineState::new(&p, &[1], Limits::default()).unwrap();
    // main: call foo; foo: two consts
    for _ in 0..3 {
        s.execute(&p, Variant::original(p.instruction(s.pc()).unwrap()));
    }
    let entry = t.location_at(s.pc()).unwrap();
    let instr = p.instruction(s.pc()).unwrap();
    let ori = s.try_variant(Variant::original(instr));
    let m1 = s.try_variant(Variant::mutant(instr, entry.mutants[0].mutation));
    assert_eq!(
        ori,
        AbstractChange::RegWrite {
            reg: forkmut_core::ir::Reg(0),
            value: 2
        }
    );
    assert_eq!(ori, m1);
}

#[test]
fn sse_forks_three_times() {
    let p = foo();
    let t = foo_table(&p);
    let s = MachineState::new(&p, &[1], Limits::default()).unwrap();
    let run = run_engine(Engine::SplitStream, &p, &t, &s, &traced()).unwrap();
    assert_eq!(run.metrics.forks, 3);
    assert_eq!(run.metrics.processes, 4);
    let f = forks(&run.trace);
    assert_eq!(f[0], (2, vec![MutantId(0)]));
    assert_eq!(f[1], (0, vec![MutantId(1)]));
    assert_eq!(f[2], (0, vec![MutantId(2)]));
    let exits = run
        .trace
        .iter()
        .filter(|e| matches!(e, ForkEvent::Exit { .. }))
        .count();
    assert_eq!(exits, 4);
}

#[test]
fn accmut_forks_once_for_m2_and_m3_then_once_more() {
    let p = foo();
    let t = foo_table(&p);
    let s = MachineState::new(&p, &[1], Limits::default()).unwrap();
    let run = run_engine(Engine::AccMut, &p, &t, &s, &traced()).unwrap();
    let f = forks(&run.trace);
    // no fork at the increment; one shared fork at the first halving
    assert!(f.iter().all(|(index, _)| *index == 0));
    assert_eq!(f[0].1, [MutantId(1), MutantId(2)]);
    // the shared child splits when a = 4 gives 6 vs 8
    assert_eq!(f[1].1, [MutantId(2)]);
    assert_eq!(run.metrics.forks, 2);
}

#[test]
fn records_and_verdicts_agree() {
    let p = foo();
    let t = foo_table(&p);
    let s = MachineState::new(&p, &[1], Limits::default()).unwrap();
    let runs: Vec<_> = Engine::ALL
        .iter()
        .map(|e| run_engine(*e, &p, &t, &s, &EngineConfig::default()).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.records, runs[0].records);
        assert_eq!(r.original, runs[0].original);
    }
    // a: 1 -> 2 -> 1 -> 0, res = 100*1 + 100*0
    assert_eq!(runs[0].original.output, b"100\n");
    assert_eq!(runs[0].original.outcome, Outcome::Exited(0));
    let outputs: Vec<&[u8]> = runs[0].records.iter().map(|r| &r.output[..]).collect();
    assert_eq!(outputs, [&b"100\n"[..], b"1000\n", b"1200\n"]);
    assert_eq!(runs[0].metrics.processes, 3);

    let test = TestCase::new("test_foo", vec![1]);
    for e in Engine::ALL {
        let r = run_test(&p, &t, &test, e, &Default::default()).unwrap();
        assert_eq!(
            r.verdicts,
            [
                Verdict::Survived,
                Verdict::KilledOutput,
                Verdict::KilledOutput
            ]
        );
    }
}
