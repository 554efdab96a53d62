// SPDX-License-Identifier: Apache-2.0

mod common;

use forkmut_core::corpus::generate_source;
use forkmut_core::ir::{enumerate_locations, parse_program, BinOp};
use forkmut_core::mutgen::{generate_mutants, Mutation, OperatorSet};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ids_partition_and_tables_are_deterministic(seed in any::<u64>()) {
        let src = generate_source(&mut ChaCha8Rng::seed_from_u64(seed), false);
        let p = parse_program(&src).unwrap();
        let a = generate_mutants(&p, OperatorSet::all());
        let b = generate_mutants(&parse_program(&src).unwrap(), OperatorSet::all());
        prop_assert_eq!(&a, &b);
        let mut owners = vec![0u32; a.mutant_count() as usize];
        for e in a.entries() {
            let instr = p.instruction(e.location.pc).unwrap();
            for m in &e.mutants {
                owners[m.id.index()] += 1;
                // first order: one location, one applicable change
                prop_assert!(m.mutation.applies_to(instr));
                prop_assert_eq!(a.mutant(m.id).unwrap().0.location.id, e.location.id);
            }
            prop_assert_eq!(a.variants_at(&p, e.location.id).unwrap().mut_variants.len(), a.u(e.location.id));
        }
        prop_assert!(owners.iter().all(|c| *c == 1));
    }
}

#[test]
fn foo_halving_has_add_and_mul_replacements() {
    let p = common::foo();
    let t = generate_mutants(&p, OperatorSet::all());
    let half = common::location(&p, "foo", "body", 0);
    let v = t.variants_at(&p, half).unwrap();
    let ops: Vec<Mutation> = v.mut_variants.iter().map(|m| m.mutation).collect();
    assert!(ops.contains(&Mutation::ReplaceOp(BinOp::Add)));
    assert!(ops.contains(&Mutation::ReplaceOp(BinOp::Mul)));
    assert!(v.ori_included);

    let custom = common::foo_table(&p);
    let v = custom.variants_at(&p, half).unwrap();
    assert_eq!(v.mut_variants.len(), 2);
    let other = enumerate_locations(&p)
        .into_iter()
        .find(|l| l.id != half && custom.u(l.id) == 0)
        .unwrap();
    let v = custom.variants_at(&p, other.id).unwrap();
    assert!(v.ori_included && v.mut_variants.is_empty());
}

#[test]
fn empty_operator_set_gives_no_mutants() {
    let t = generate_mutants(&common::foo(), OperatorSet::empty());
    assert_eq!(t.mutant_count(), 0);
    assert_eq!(t.max_u(), 0);
}
