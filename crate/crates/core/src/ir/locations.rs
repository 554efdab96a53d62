// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;

use super::{BlockId, FuncId, Instruction, Pc, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocationId(pub u32);

/// A mutation-eligible instruction site. Ids are dense and follow program
/// order: function name, then block order, then instruction index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub id: LocationId,
    pub func: String,
    pub block: String,
    pub index: u32,
    pub pc: Pc,
}

/// True when at least one mutation operator applies to `instr`. Only
/// unconditional branches and value-less returns have nothing to mutate.
pub fn is_mutation_site(instr: &Instruction) -> bool {
    !matches!(
        instr,
        Instruction::Br { .. } | Instruction::Ret { value: None }
    )
}

pub fn enumerate_locations(p: &Program) -> Vec<Location> {
    let mut out = Vec::new();
    for (fi, func) in p.functions.iter().enumerate() {
        for (bi, block) in func.blocks.iter().enumerate() {
            for (ii, instr) in block.instrs.iter().enumerate() {
                if is_mutation_site(instr) {
                    out.push(Location {
                        id: LocationId(out.len() as u32),
                        func: func.name.clone(),
                        block: block.label.clone(),
                        index: ii as u32,
                        pc: Pc {
                            func: FuncId(fi as u32),
                            block: BlockId(bi as u32),
                            index: ii as u32,
                        },
                    });
                }
            }
        }
    }
    out
}
