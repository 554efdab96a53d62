// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use forkmut_core::corpus::{generate_case, sample_states, CorpusParams};
use forkmut_core::engines::{
    cluster_changes, filter_mutants, filter_variants, run_engine, ForkEvent, OpCounter, Outcome,
    VariantRef,
};
use forkmut_core::harness::{run_suite, RunConfig, TestCase};
use forkmut_core::ir::{parse_program, BinOp, LocationId, Program};
use forkmut_core::mutgen::{Mutation, MutationTable, Operator};
use forkmut_core::runtime::{Limits, Variant};
use forkmut_core::{
    AbstractChange, Engine, EngineConfig, MachineState, MutantId, MutantIdSet, VariantSet, Verdict,
};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `locations` independent additions, each with `u` literal mutants.
fn wide(locations: usize, u: usize) -> (Program, MutationTable) {
    let mut src = String::from("func main/1 {\ne:\n");
    for _ in 0..locations {
        src.push_str("  r0 = arith.add r0 1\n");
    }
    src.push_str("  ret r0\n}\n");
    let p = parse_program(&src).unwrap();
    let muts = (0..locations).flat_map(|l| {
        (0..u).map(move |k| {
            (
                LocationId(l as u32),
                Operator::Lvr,
                Mutation::ReplaceLiteral {
                    slot: 1,
                    value: 100 + k as i64,
                },
            )
        })
    });
    let t = MutationTable::from_mutations(&p, muts).unwrap();
    (p, t)
}

fn id_set(ids: &BTreeSet<u32>, as_list: bool, universe: u32) -> MutantIdSet {
    if as_list {
        MutantIdSet::from_ids(ids.iter().map(|i| MutantId(*i)).collect())
    } else {
        let mut s = MutantIdSet::all(universe);
        for i in 0..universe {
            if !ids.contains(&i) {
                s.remove(MutantId(i));
            }
        }
        s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn filters_match_set_semantics(
        loc in 0usize..6,
        ids in proptest::collection::btree_set(0u32..37, 0..37),
        as_list in any::<bool>(),
        keep in proptest::collection::vec(any::<bool>(), 6),
    ) {
        let (p, t) = wide(6, 6);
        // id 36 stands for an id owned by no location (the unmutated program)
        let universe = t.mutant_count() + 1;
        let entry = &t.entries()[loc];
        let full = VariantSet::new(&p, entry);
        let i_set = id_set(&ids, as_list, universe);
        let mut ops = OpCounter::default();
        let v = filter_variants(&full, &i_set, &mut ops);

        // oracle: variants whose owner is in I; original iff some id of I owns nothing here
        let owners_here: BTreeSet<u32> = entry.mutants.iter().map(|m| m.id.0).collect();
        let expect: Vec<u32> = entry.mutants.iter().map(|m| m.id.0).filter(|i| ids.contains(i)).collect();
        let got: Vec<u32> = v.mut_variants.iter().map(|m| m.id.0).collect();
        prop_assert_eq!(&got, &expect);
        prop_assert_eq!(v.ori_included, ids.iter().any(|i| !owners_here.contains(i)));

        // narrow V to a subset and filter I by it
        let mut sub = v.clone();
        sub.mut_variants = v.mut_variants.iter().zip(&keep).filter(|(_, k)| **k).map(|(m, _)| *m).collect();
        if sub.is_empty() {
            sub.ori_included = true;
        }
        let mut narrowed = i_set.clone();
        filter_mutants(&mut narrowed, &sub, &mut ops);
        let sub_owners: BTreeSet<u32> = sub.mut_variants.iter().map(|m| m.id.0).collect();
        let expect: BTreeSet<u32> = ids
            .iter()
            .copied()
            .filter(|i| sub_owners.contains(i) || (sub.ori_included && !owners_here.contains(i)))
            .collect();
        let got: BTreeSet<u32> = narrowed.iter().map(|m| m.0).collect();
        prop_assert_eq!(got, expect);
        prop_assert_eq!(narrowed.len(), narrowed.iter().count());
    }
}

#[test]
fn filter_costs_do_not_grow_with_m() {
    let u = 5;
    let measure = |locations: usize| {
        let (p, t) = wide(locations, u);
        let entry = &t.entries()[2];
        let full = VariantSet::new(&p, entry);
        let mut costs = Vec::new();
        let all = MutantIdSet::all(t.mutant_count() + 1);
        let own = MutantIdSet::from_ids(entry.mutants.iter().map(|m| m.id).collect());
        for ids in [&all, &own] {
            let mut ops = OpCounter::default();
            let v = filter_variants(&full, ids, &mut ops);
            let fv = ops.0;
            let mut ops = OpCounter::default();
            let mut i = ids.clone();
            filter_mutants(&mut i, &v.only(VariantRef::Original), &mut ops);
            let mut j = ids.clone();
            filter_mutants(
                &mut j,
                &v.only(VariantRef::Mutant(v.mut_variants[1])),
                &mut ops,
            );
            costs.push((fv, ops.0));
        }
        (t.mutant_count(), costs)
    };
    let (m1, small) = measure(4);
    let (m10, large) = measure(40);
    assert_eq!(m10, 10 * m1);
    assert_eq!(small, large);
    assert!(small
        .iter()
        .all(|(a, b)| *a <= u as u64 && *b <= 2 * u as u64));
}

#[test]
fn filter_examples() {
    let (p, t) = wide(2, 2);
    let full = VariantSet::new(&p, &t.entries()[0]);
    let mut ops = OpCounter::default();
    let v = filter_variants(&full, &MutantIdSet::single(MutantId(1)), &mut ops);
    assert!(!v.ori_included);
    assert_eq!(v.mut_variants.len(), 1);
    let v = filter_variants(&full, &MutantIdSet::all(t.mutant_count()), &mut ops);
    assert!(v.ori_included);
    assert_eq!(v.mut_variants.len(), 2);

    let mut i = MutantIdSet::all(t.mutant_count());
    filter_mutants(&mut i, &v.only(VariantRef::Original), &mut ops);
    assert_eq!(i.iter().collect::<Vec<_>>(), [MutantId(2), MutantId(3)]);
    let mut i = MutantIdSet::all(t.mutant_count());
    let mut keep_first = v.clone();
    keep_first.mut_variants.truncate(1);
    filter_mutants(&mut i, &keep_first, &mut ops);
    assert!(!i.contains(MutantId(1)) && i.contains(MutantId(0)) && i.len() == 3);
    let mut i = MutantIdSet::all(t.mutant_count());
    filter_mutants(
        &mut i,
        &v.only(VariantRef::Mutant(v.mut_variants[1])),
        &mut ops,
    );
    assert_eq!(i, MutantIdSet::single(MutantId(1)));
}

/// Partition of indices by pairwise equality, in first-member order.
fn quadratic_classes(changes: &[AbstractChange]) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..changes.len() {
        match classes.iter_mut().find(|c| changes[c[0]] == changes[i]) {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }
    classes
}

#[test]
fn clustering_matches_pairwise_oracle_and_is_sound() {
    let mut checked = 0;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = generate_case(&mut rng, &CorpusParams::default(), 200).unwrap();
        let limits = Limits {
            step_limit: 5_000,
            ..Limits::default()
        };
        for s in sample_states(&mut rng, &c.program, &c.table, &c.tests[0], limits, 40, 40) {
            let entry = c.table.location_at(s.pc()).unwrap();
            let full = VariantSet::new(&c.program, entry);
            let members: Vec<VariantRef> = full.members().collect();
            let changes: Vec<AbstractChange> = members
                .iter()
                .map(|r| s.try_variant(full.variant(*r)))
                .collect();
            let clusters = cluster_changes(members.iter().copied().zip(changes.iter().cloned()));
            let oracle = quadratic_classes(&changes);
            assert_eq!(clusters.len(), oracle.len());
            for (cl, or) in clusters.iter().zip(&oracle) {
                let want: Vec<VariantRef> = or.iter().map(|i| members[*i]).collect();
                assert_eq!(cl.members, want);
                assert_eq!(cl.change, changes[or[0]]);
                let states: Vec<Vec<u8>> = cl
                    .members
                    .iter()
                    .map(|r| {
                        let mut f = s.fork_state();
                        f.execute(&c.program, full.variant(*r));
                        f.encode()
                    })
                    .collect();
                assert!(states.windows(2).all(|w| w[0] == w[1]));
            }
            assert!(clusters[0].has_original());
            checked += 1;
        }
    }
    assert!(checked > 200, "{checked}");
}

#[test]
fn call_clusters() {
    let p =
        parse_program("func foo/2 { e: ret r0 }\nfunc main/2 { e: r2 = call foo r0 r1; ret r2 }")
            .unwrap();
    for (a, b, classes) in [(1, 2, 3), (5, 5, 2)] {
        let s = MachineState::new(&p, &[a, b], Limits::default()).unwrap();
        let call = p.instruction(s.pc()).unwrap();
        let tried = [
            Variant::original(call),
            Variant::mutant(call, Mutation::SwapArgs { first: 0 }),
            Variant::mutant(call, Mutation::Delete),
        ]
        .map(|v| (VariantRef::Original, s.try_variant(v)));
        assert_eq!(cluster_changes(tried).len(), classes);
    }
    let same = AbstractChange::RegWrite {
        reg: forkmut_core::ir::Reg(0),
        value: 2,
    };
    assert_eq!(
        cluster_changes([
            (VariantRef::Original, same.clone()),
            (VariantRef::Original, same)
        ])
        .len(),
        1
    );
}

/// `n` mutants at one location that all write different values.
#[test]
fn distinct_changes_fork_n_minus_one_times() {
    for n in 1..6usize {
        let p = parse_program("func main/1 { e: r1 = arith.add r0 1; print r1; ret 0 }").unwrap();
        let muts = (0..n).map(|k| {
            (
                LocationId(0),
                Operator::Lvr,
                Mutation::ReplaceLiteral {
                    slot: 1,
                    value: 10 + k as i64,
                },
            )
        });
        let t = MutationTable::from_mutations(&p, muts).unwrap();
        let s = MachineState::new(&p, &[0], Limits::default()).unwrap();
        let acc = run_engine(Engine::AccMut, &p, &t, &s, &EngineConfig::default()).unwrap();
        let sse = run_engine(Engine::SplitStream, &p, &t, &s, &EngineConfig::default()).unwrap();
        // n mutants plus the original: n + 1 distinct changes
        assert_eq!(acc.metrics.forks, n as u64);
        assert_eq!(sse.metrics.forks, n as u64);
        assert_eq!(acc.metrics.variant_trials, n as u64 + 1);
    }
}

#[test]
fn no_mutants_means_no_runs() {
    let p = common::foo();
    let t = MutationTable::from_mutations(&p, []).unwrap();
    let s = MachineState::new(&p, &[1], Limits::default()).unwrap();
    for e in Engine::ALL {
        let r = run_engine(e, &p, &t, &s, &EngineConfig::default()).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.metrics.forks, 0);
        if e == Engine::Standard {
            assert_eq!(r.metrics.processes, 0);
        }
        assert_eq!(r.original.output, b"100\n");
    }
}

#[test]
fn uncovered_mutants_are_never_split_and_survive() {
    let p = parse_program(
        "func main/1 { e: r1 = icmp.gt r0 100; br.cond r1 big small\nbig: r2 = arith.mul r0 3; print r2; ret 0\nsmall: print r0; ret 0 }",
    )
    .unwrap();
    let mul = common::location(&p, "main", "big", 0);
    let t = MutationTable::from_mutations(
        &p,
        [
            (mul, Operator::Aor, Mutation::ReplaceOp(BinOp::Sub)),
            (mul, Operator::Aor, Mutation::ReplaceOp(BinOp::Add)),
        ],
    )
    .unwrap();
    let tests = [TestCase::new("small", vec![4])];
    for e in Engine::ALL {
        let r = run_suite(&p, &t, &tests, e, &RunConfig::default()).unwrap();
        assert_eq!(r.metrics[0].metrics.forks, 0);
        assert_eq!(r.matrix.row(0), [Verdict::Survived, Verdict::Survived]);
    }
}

/// Fork-tree replay: every process exits after all of its children, and
/// children exit in the order they were forked.
#[test]
fn children_finish_before_their_parent() {
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = generate_case(&mut rng, &CorpusParams::default(), 200).unwrap();
        let s = c.tests[0]
            .initial_state(
                &c.program,
                Limits {
                    step_limit: 50_000,
                    ..Limits::default()
                },
            )
            .unwrap();
        let cfg = EngineConfig {
            trace: true,
            ..EngineConfig::default()
        };
        let r = run_engine(Engine::AccMut, &c.program, &c.table, &s, &cfg).unwrap();
        let mut parent = std::collections::HashMap::new();
        let mut children: std::collections::HashMap<u32, Vec<u32>> = Default::default();
        let mut exit_order = Vec::new();
        for e in &r.trace {
            match e {
                ForkEvent::Fork {
                    parent: p, child, ..
                } => {
                    parent.insert(*child, *p);
                    children.entry(*p).or_default().push(*child);
                }
                ForkEvent::Exit { process, .. } => exit_order.push(*process),
            }
        }
        // depth-first post-order of the fork tree from the main process
        fn post(n: u32, kids: &std::collections::HashMap<u32, Vec<u32>>, out: &mut Vec<u32>) {
            for k in kids.get(&n).into_iter().flatten() {
                post(*k, kids, out);
            }
            out.push(n);
        }
        let mut expect = Vec::new();
        post(0, &children, &mut expect);
        assert_eq!(exit_order, expect, "seed {seed}");
        assert_eq!(exit_order.len() as u64, r.metrics.processes);
    }
}

#[test]
fn depth_limit_aborts_instead_of_forking() {
    let p = common::foo();
    let t = common::foo_table(&p);
    let s = MachineState::new(&p, &[1], Limits::default()).unwrap();
    let cfg = EngineConfig {
        fork_depth: 1,
        trace: false,
    };
    let r = run_engine(Engine::AccMut, &p, &t, &s, &cfg).unwrap();
    // the shared M2/M3 child cannot split again
    assert_eq!(r.metrics.forks, 1);
    assert_eq!(r.metrics.aborted_forks, 1);
    assert_eq!(r.records[2].outcome, Outcome::AbortedDepth);
    assert_eq!(r.records[1].output, b"1000\n");
    let cfg = EngineConfig {
        fork_depth: 0,
        trace: false,
    };
    let r = run_engine(Engine::SplitStream, &p, &t, &s, &cfg).unwrap();
    assert!(r.records.iter().all(|x| x.outcome == Outcome::AbortedDepth));
    assert_eq!(r.original.output, b"100\n");
}

#[test]
fn one_record_per_mutant() {
    for seed in 40..46u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = generate_case(&mut rng, &CorpusParams::default(), 200).unwrap();
        let s = c.tests[0]
            .initial_state(
                &c.program,
                Limits {
                    step_limit: 50_000,
                    ..Limits::default()
                },
            )
            .unwrap();
        let cfg = EngineConfig {
            trace: true,
            ..EngineConfig::default()
        };
        let r = run_engine(Engine::SplitStream, &c.program, &c.table, &s, &cfg).unwrap();
        assert_eq!(r.records.len() as u32, c.table.mutant_count());
        // SSE children each stand for exactly one mutant
        for e in &r.trace {
            if let ForkEvent::Fork { ids, .. } = e {
                assert_eq!(ids.len(), 1);
            }
        }
    }
}
