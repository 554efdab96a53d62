// SPDX-License-Identifier: Apache-2.0

//! Mutation operators and the mutation table.
//!
//! The table maps every location to its variants: the original instruction
//! plus zero or more mutant variants, each owned by exactly one
//! [`MutantId`]. Ids are dense and assigned in location order, then
//! operator order, then variant order, so equal programs always produce
//! equal tables.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engines::VariantSet;
use crate::ir::{
    enumerate_locations, BinOp, Instruction, Location, LocationId, Operand, Pc, Program, Value,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutantId(pub u32);

impl MutantId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for MutantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    /// Replace an arithmetic operator.
    Aor,
    /// Replace a bitwise logic operator.
    Lor,
    /// Replace a relational operator.
    Ror,
    /// Replace a shift operator.
    Sor,
    /// Replace a literal `T` with `T+1`, `T-1` or `0`.
    Lvr,
    /// Add or subtract one from a register operand before use.
    Uoi,
    /// Delete a store.
    Stds,
    /// Delete a call or print.
    Stdc,
    /// Swap two adjacent call arguments.
    Rov,
    /// Pass the absolute value of a call argument.
    Abv,
}

impl Operator {
    pub const ALL: [Operator; 10] = [
        Operator::Aor,
        Operator::Lor,
        Operator::Ror,
        Operator::Sor,
        Operator::Lvr,
        Operator::Uoi,
        Operator::Stds,
        Operator::Stdc,
        Operator::Rov,
        Operator::Abv,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Operator::Aor => "AOR",
            Operator::Lor => "LOR",
            Operator::Ror => "ROR",
            Operator::Sor => "SOR",
            Operator::Lvr => "LVR",
            Operator::Uoi => "UOI",
            Operator::Stds => "STDS",
            Operator::Stdc => "STDC",
            Operator::Rov => "ROV",
            Operator::Abv => "ABV",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Operator> {
        Operator::ALL
            .iter()
            .copied()
            .find(|o| o.tag().eq_ignore_ascii_case(tag))
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct OperatorSet(u16);

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown mutation operator `{0}`")]
pub struct UnknownOperator(pub alloc::string::String);

impl OperatorSet {
    pub fn all() -> Self {
        Operator::ALL.iter().fold(Self::empty(), |s, o| s.with(*o))
    }

    pub fn empty() -> Self {
        OperatorSet(0)
    }

    pub fn with(self, op: Operator) -> Self {
        OperatorSet(self.0 | op.bit())
    }

    pub fn contains(self, op: Operator) -> bool {
        self.0 & op.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Operator> {
        Operator::ALL.into_iter().filter(move |o| self.contains(*o))
    }

    /// Parses `all`, `none`, or a comma-separated list of operator tags.
    pub fn parse(text: &str) -> Result<Self, UnknownOperator> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        if text.is_empty() || text.eq_ignore_ascii_case("none") {
            return Ok(Self::empty());
        }
        text.split(',').try_fold(Self::empty(), |set, tag| {
            Operator::from_tag(tag.trim())
                .map(|o| set.with(o))
                .ok_or_else(|| UnknownOperator(tag.trim().into()))
        })
    }
}

impl FromIterator<Operator> for OperatorSet {
    fn from_iter<T: IntoIterator<Item = Operator>>(iter: T) -> Self {
        iter.into_iter().fold(Self::empty(), |s, o| s.with(o))
    }
}

/// How a mutant variant differs from the original instruction. Operand
/// slots are numbered as in [`Instruction::operand`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mutation {
    ReplaceOp(BinOp),
    ReplaceLiteral {
        slot: u8,
        value: Value,
    },
    AdjustOperand {
        slot: u8,
        delta: i8,
    },
    SwapArgs {
        first: u8,
    },
    AbsArg {
        slot: u8,
    },
    /// Statement deletion. A deleted value-returning call defines its
    /// destination as 0.
    Delete,
}

impl Mutation {
    /// Whether the mutation is well formed for `instr`.
    pub fn applies_to(&self, instr: &Instruction) -> bool {
        let n = instr.operand_count();
        match *self {
            Mutation::ReplaceOp(_) => matches!(instr, Instruction::Binary { .. }),
            Mutation::ReplaceLiteral { slot, .. } => {
                matches!(instr.operand(slot as usize), Some(Operand::Imm(_)))
            }
            Mutation::AdjustOperand { slot, .. } => (slot as usize) < n,
            Mutation::SwapArgs { first } => {
                matches!(instr, Instruction::Call { .. }) && (first as usize) + 1 < n
            }
            Mutation::AbsArg { slot } => {
                matches!(instr, Instruction::Call { .. }) && (slot as usize) < n
            }
            Mutation::Delete => matches!(
                instr,
                Instruction::Store { .. } | Instruction::Call { .. } | Instruction::Print { .. }
            ),
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::ReplaceOp(op) => write!(f, "op {}", op.mnemonic()),
            Mutation::ReplaceLiteral { slot, value } => write!(f, "lit {slot} {value}"),
            Mutation::AdjustOperand { slot, delta } => write!(f, "adj {slot} {delta}"),
            Mutation::SwapArgs { first } => write!(f, "swap {first}"),
            Mutation::AbsArg { slot } => write!(f, "abs {slot}"),
            Mutation::Delete => f.write_str("del"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("malformed mutation `{0}`")]
pub struct BadMutation(pub alloc::string::String);

impl core::str::FromStr for Mutation {
    type Err = BadMutation;

    /// Parses the [`Display`](fmt::Display) form.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadMutation(s.into());
        let words: Vec<&str> = s.split_ascii_whitespace().collect();
        let num = |i: usize| -> Result<i64, BadMutation> {
            words.get(i).and_then(|w| w.parse().ok()).ok_or_else(bad)
        };
        let slot = |i: usize| u8::try_from(num(i)?).map_err(|_| bad());
        let (m, arity) = match words.first().copied() {
            Some("op") => {
                let op = words.get(1).and_then(|w| BinOp::from_mnemonic(w));
                (Mutation::ReplaceOp(op.ok_or_else(bad)?), 1)
            }
            Some("lit") => (
                Mutation::ReplaceLiteral {
                    slot: slot(1)?,
                    value: num(2)?,
                },
                2,
            ),
            Some("adj") => (
                Mutation::AdjustOperand {
                    slot: slot(1)?,
                    delta: i8::try_from(num(2)?).map_err(|_| bad())?,
                },
                2,
            ),
            Some("swap") => (Mutation::SwapArgs { first: slot(1)? }, 1),
            Some("abs") => (Mutation::AbsArg { slot: slot(1)? }, 1),
            Some("del") => (Mutation::Delete, 0),
            _ => return Err(bad()),
        };
        if words.len() != arity + 1 {
            return Err(bad());
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MutantVariant {
    pub id: MutantId,
    pub operator: Operator,
    pub mutation: Mutation,
}

/// One location with its mutant variants (the original variant is the
/// program instruction at `location.pc`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocationEntry {
    pub location: Location,
    pub mutants: Vec<MutantVariant>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("location {0} does not exist")]
    NoSuchLocation(u32),
    #[error("mutation `{mutation}` does not apply to location {location}")]
    InapplicableMutation { location: u32, mutation: Mutation },
    #[error("mutant {0} does not exist")]
    NoSuchMutant(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MutationTable {
    entries: Vec<LocationEntry>,
    mutant_count: u32,
    /// mutant id → (location index, position in that location's list)
    owners: Vec<(u32, u32)>,
    /// func → block → instruction → location index, `u32::MAX` when none.
    site_index: Vec<Vec<Vec<u32>>>,
}

const NO_LOCATION: u32 = u32::MAX;

impl MutationTable {
    /// Builds a table from explicit per-location mutation lists. Ids are
    /// assigned densely in location order, then list order.
    pub fn from_parts(
        program: &Program,
        mut per_location: Vec<Vec<(Operator, Mutation)>>,
    ) -> Result<Self, TableError> {
        let locations = enumerate_locations(program);
        if per_location.len() > locations.len() {
            return Err(TableError::NoSuchLocation(locations.len() as u32));
        }
        per_location.resize(locations.len(), Vec::new());

        let mut site_index: Vec<Vec<Vec<u32>>> = program
            .functions
            .iter()
            .map(|f| {
                f.blocks
                    .iter()
                    .map(|b| vec![NO_LOCATION; b.instrs.len()])
                    .collect()
            })
            .collect();
        let mut entries = Vec::with_capacity(locations.len());
        let mut owners = Vec::new();
        let mut next = 0u32;
        for (location, muts) in locations.into_iter().zip(per_location) {
            let instr = program
                .instruction(location.pc)
                .expect("enumerated location exists");
            let li = location.id.0;
            let mut mutants = Vec::with_capacity(muts.len());
            for (operator, mutation) in muts {
                if !mutation.applies_to(instr) {
                    return Err(TableError::InapplicableMutation {
                        location: li,
                        mutation,
                    });
                }
                owners.push((li, mutants.len() as u32));
                mutants.push(MutantVariant {
                    id: MutantId(next),
                    operator,
                    mutation,
                });
                next += 1;
            }
            let pc = location.pc;
            site_index[pc.func.0 as usize][pc.block.0 as usize][pc.index as usize] = li;
            entries.push(LocationEntry { location, mutants });
        }
        Ok(MutationTable {
            entries,
            mutant_count: next,
            owners,
            site_index,
        })
    }

    /// Builds a table from `(location, operator, mutation)` triples in any
    /// order; triples at the same location keep their relative order.
    pub fn from_mutations<I>(program: &Program, mutations: I) -> Result<Self, TableError>
    where
        I: IntoIterator<Item = (LocationId, Operator, Mutation)>,
    {
        let nloc = enumerate_locations(program).len();
        let mut per_location = vec![Vec::new(); nloc];
        for (loc, op, m) in mutations {
            per_location
                .get_mut(loc.0 as usize)
                .ok_or(TableError::NoSuchLocation(loc.0))?
                .push((op, m));
        }
        Self::from_parts(program, per_location)
    }

    pub fn mutant_count(&self) -> u32 {
        self.mutant_count
    }

    pub fn entries(&self) -> &[LocationEntry] {
        &self.entries
    }

    pub fn entry(&self, loc: LocationId) -> Option<&LocationEntry> {
        self.entries.get(loc.0 as usize)
    }

    /// φ restricted to the table: the location at a program position.
    #[inline]
    pub fn location_at(&self, pc: Pc) -> Option<&LocationEntry> {
        let li = *self
            .site_index
            .get(pc.func.0 as usize)?
            .get(pc.block.0 as usize)?
            .get(pc.index as usize)?;
        if li == NO_LOCATION {
            None
        } else {
            Some(&self.entries[li as usize])
        }
    }

    pub fn mutant(&self, id: MutantId) -> Option<(&LocationEntry, &MutantVariant)> {
        let &(li, pos) = self.owners.get(id.index())?;
        let entry = &self.entries[li as usize];
        Some((entry, &entry.mutants[pos as usize]))
    }

    /// u(l): the number of mutant variants at a location.
    pub fn u(&self, loc: LocationId) -> usize {
        self.entry(loc).map_or(0, |e| e.mutants.len())
    }

    pub fn max_u(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.mutants.len())
            .max()
            .unwrap_or(0)
    }

    pub fn per_operator_counts(&self) -> Vec<(Operator, usize)> {
        Operator::ALL
            .iter()
            .map(|&op| {
                let n = self
                    .entries
                    .iter()
                    .flat_map(|e| e.mutants.iter())
                    .filter(|m| m.operator == op)
                    .count();
                (op, n)
            })
            .collect()
    }

    /// p(l) as an unfiltered [`VariantSet`].
    pub fn variants_at<'t>(
        &'t self,
        program: &'t Program,
        loc: LocationId,
    ) -> Result<VariantSet<'t>, TableError> {
        let entry = self.entry(loc).ok_or(TableError::NoSuchLocation(loc.0))?;
        Ok(VariantSet::new(program, entry))
    }
}

/// Applies `operators` to every location of `program`.
pub fn generate_mutants(program: &Program, operators: OperatorSet) -> MutationTable {
    let per_location = enumerate_locations(program)
        .iter()
        .map(|loc| {
            let instr = program.instruction(loc.pc).expect("location exists");
            mutations_for(instr, operators)
        })
        .collect();
    MutationTable::from_parts(program, per_location).expect("generated mutations are applicable")
}

/// Literal replacements for `t`: `t+1`, `t-1`, `0`, without duplicates of
/// `t` or of each other.
fn literal_replacements(t: Value) -> Vec<Value> {
    let mut out: Vec<Value> = Vec::with_capacity(3);
    for v in [t.wrapping_add(1), t.wrapping_sub(1), 0] {
        if v != t && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// All mutations of one instruction under `operators`, in operator order.
pub fn mutations_for(instr: &Instruction, operators: OperatorSet) -> Vec<(Operator, Mutation)> {
    let mut out = Vec::new();
    for op in operators.iter() {
        match op {
            Operator::Aor | Operator::Lor | Operator::Ror | Operator::Sor => {
                if let Instruction::Binary { op: orig, .. } = instr {
                    let family = match op {
                        Operator::Aor => crate::ir::OpFamily::Arith,
                        Operator::Lor => crate::ir::OpFamily::Logic,
                        Operator::Ror => crate::ir::OpFamily::Icmp,
                        _ => crate::ir::OpFamily::Shift,
                    };
                    if orig.family() == family {
                        for repl in BinOp::ALL {
                            if repl.family() == family && repl != *orig {
                                out.push((op, Mutation::ReplaceOp(repl)));
                            }
                        }
                    }
                }
            }
            Operator::Lvr => {
                for slot in 0..instr.operand_count() {
                    if let Some(Operand::Imm(t)) = instr.operand(slot) {
                        for value in literal_replacements(t) {
                            out.push((
                                op,
                                Mutation::ReplaceLiteral {
                                    slot: slot as u8,
                                    value,
                                },
                            ));
                        }
                    }
                }
            }
            Operator::Uoi => {
                for slot in 0..instr.operand_count().min(2) {
                    if let Some(Operand::Reg(_)) = instr.operand(slot) {
                        for delta in [1, -1] {
                            out.push((
                                op,
                                Mutation::AdjustOperand {
                                    slot: slot as u8,
                                    delta,
                                },
                            ));
                        }
                    }
                }
            }
            Operator::Stds => {
                if matches!(instr, Instruction::Store { .. }) {
                    out.push((op, Mutation::Delete));
                }
            }
            Operator::Stdc => {
                if matches!(instr, Instruction::Call { .. } | Instruction::Print { .. }) {
                    out.push((op, Mutation::Delete));
                }
            }
            Operator::Rov => {
                if let Instruction::Call { args, .. } = instr {
                    for (i, pair) in args.windows(2).enumerate() {
                        if pair[0] != pair[1] {
                            out.push((op, Mutation::SwapArgs { first: i as u8 }));
                        }
                    }
                }
            }
            Operator::Abv => {
                if let Instruction::Call { args, .. } = instr {
                    for (i, a) in args.iter().enumerate() {
                        if matches!(a, Operand::Reg(_)) {
                            out.push((op, Mutation::AbsArg { slot: i as u8 }));
                        }
                    }
                }
            }
        }
    }
    out
}
