// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use super::MutantIdSet;
use crate::ir::{Instruction, Program};
use crate::mutgen::{LocationEntry, MutantVariant};
use crate::runtime::Variant;

/// One member of a variant set: the original instruction or a mutant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantRef<'t> {
    Original,
    Mutant(&'t MutantVariant),
}

/// A subset of the variants at one location.
///
/// `all` is every mutant variant at the location; `mut_variants` is the
/// selected subset in location order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariantSet<'t> {
    pub ori: &'t Instruction,
    pub ori_included: bool,
    pub mut_variants: Vec<&'t MutantVariant>,
    pub all: &'t [MutantVariant],
}

impl<'t> VariantSet<'t> {
    /// Every variant at `entry`, original included.
    pub fn new(program: &'t Program, entry: &'t LocationEntry) -> Self {
        VariantSet {
            ori: program
                .instruction(entry.location.pc)
                .expect("table matches program"),
            ori_included: true,
            mut_variants: entry.mutants.iter().collect(),
            all: &entry.mutants,
        }
    }

    /// Number of variants, counting the original when included.
    pub fn len(&self) -> usize {
        self.mut_variants.len() + self.ori_included as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Original first, then mutants in location order.
    pub fn members(&self) -> impl Iterator<Item = VariantRef<'t>> + '_ {
        self.ori_included
            .then_some(VariantRef::Original)
            .into_iter()
            .chain(self.mut_variants.iter().map(|m| VariantRef::Mutant(m)))
    }

    pub fn variant(&self, r: VariantRef<'t>) -> Variant<'t> {
        match r {
            VariantRef::Original => Variant::original(self.ori),
            VariantRef::Mutant(m) => Variant::mutant(self.ori, m.mutation),
        }
    }

    /// The set holding just `r`.
    pub fn only(&self, r: VariantRef<'t>) -> VariantSet<'t> {
        let (ori_included, mut_variants) = match r {
            VariantRef::Original => (true, Vec::new()),
            VariantRef::Mutant(m) => (false, alloc::vec![m]),
        };
        VariantSet {
            ori: self.ori,
            ori_included,
            mut_variants,
            all: self.all,
        }
    }
}

/// Counts elementary set operations performed by the filters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter(pub u64);

/// The variants of `v` that processes in `ids` may run. The original is
/// included when some id in `ids` has no variant here.
pub fn filter_variants<'t>(
    v: &VariantSet<'t>,
    ids: &MutantIdSet,
    ops: &mut OpCounter,
) -> VariantSet<'t> {
    ops.0 += v.mut_variants.len() as u64;
    let mut_variants: Vec<&MutantVariant> = v
        .mut_variants
        .iter()
        .copied()
        .filter(|m| ids.contains(m.id))
        .collect();
    VariantSet {
        ori: v.ori,
        ori_included: mut_variants.len() < ids.len(),
        mut_variants,
        all: v.all,
    }
}

/// Restricts `ids` to the processes that run a variant in `v`.
pub fn filter_mutants(ids: &mut MutantIdSet, v: &VariantSet<'_>, ops: &mut OpCounter) {
    if v.ori_included {
        // drop the owners of variants at this location outside `v`
        let mut kept = v.mut_variants.iter().peekable();
        for m in v.all {
            ops.0 += 1;
            if kept.peek().is_some_and(|k| k.id == m.id) {
                kept.next();
            } else {
                ids.remove(m.id);
            }
        }
    } else {
        ops.0 += v.mut_variants.len() as u64;
        *ids = MutantIdSet::from_ids(v.mut_variants.iter().map(|m| m.id).collect());
    }
}
