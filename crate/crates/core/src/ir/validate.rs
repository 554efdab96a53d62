// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{Callee, Function, Instruction, Operand, Program, Reg};

/// One violated structural rule. `block`/`index` locate the offending
/// instruction inside `func`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    MissingEntry,
    EmptyFunction {
        func: String,
    },
    EmptyBlock {
        func: String,
        block: String,
    },
    MissingTerminator {
        func: String,
        block: String,
    },
    TerminatorNotLast {
        func: String,
        block: String,
        index: usize,
    },
    BadBlockTarget {
        func: String,
        block: String,
        index: usize,
    },
    BadCallee {
        func: String,
        block: String,
        index: usize,
    },
    ArityMismatch {
        func: String,
        block: String,
        index: usize,
        expected: usize,
        found: usize,
    },
    RegisterOutOfRange {
        func: String,
        block: String,
        index: usize,
        reg: u32,
    },
    UndefinedRegister {
        func: String,
        block: String,
        index: usize,
        reg: u32,
    },
    DuplicateLabel {
        func: String,
        block: String,
    },
    FunctionsUnsorted,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            MissingEntry => f.write_str("entry function does not exist"),
            EmptyFunction { func } => write!(f, "{func}: function has no blocks"),
            EmptyBlock { func, block } => write!(f, "{func}/{block}: empty block"),
            MissingTerminator { func, block } => {
                write!(
                    f,
                    "{func}/{block}: block does not end in br, br.cond or ret"
                )
            }
            TerminatorNotLast { func, block, index } => {
                write!(f, "{func}/{block}#{index}: terminator before end of block")
            }
            BadBlockTarget { func, block, index } => {
                write!(f, "{func}/{block}#{index}: branch to nonexistent block")
            }
            BadCallee { func, block, index } => {
                write!(f, "{func}/{block}#{index}: call to nonexistent function")
            }
            ArityMismatch {
                func,
                block,
                index,
                expected,
                found,
            } => write!(
                f,
                "{func}/{block}#{index}: callee takes {expected} argument(s), {found} given"
            ),
            RegisterOutOfRange {
                func,
                block,
                index,
                reg,
            } => write!(
                f,
                "{func}/{block}#{index}: r{reg} outside the register file"
            ),
            UndefinedRegister {
                func,
                block,
                index,
                reg,
            } => write!(
                f,
                "{func}/{block}#{index}: r{reg} may be used before definition"
            ),
            DuplicateLabel { func, block } => write!(f, "{func}: duplicate label {block}"),
            FunctionsUnsorted => f.write_str("functions are not sorted by unique name"),
        }
    }
}

/// Checks every structural invariant of `p`. Returns an empty list iff the
/// program is well formed.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if p.entry.0 as usize >= p.functions.len() {
        out.push(Diagnostic::MissingEntry);
    }
    if p.functions.windows(2).any(|w| w[0].name >= w[1].name) {
        out.push(Diagnostic::FunctionsUnsorted);
    }
    for func in &p.functions {
        validate_function(p, func, &mut out);
    }
    out
}

fn validate_function(p: &Program, func: &Function, out: &mut Vec<Diagnostic>) {
    let fname = || func.name.clone();
    if func.blocks.is_empty() {
        out.push(Diagnostic::EmptyFunction { func: fname() });
        return;
    }
    let nblocks = func.blocks.len();
    let mut structurally_sound = true;
    for (bi, block) in func.blocks.iter().enumerate() {
        let bname = || block.label.clone();
        if func.blocks[..bi].iter().any(|b| b.label == block.label) {
            out.push(Diagnostic::DuplicateLabel {
                func: fname(),
                block: bname(),
            });
        }
        match block.instrs.last() {
            None => {
                out.push(Diagnostic::EmptyBlock {
                    func: fname(),
                    block: bname(),
                });
                structurally_sound = false;
            }
            Some(last) if !last.is_terminator() => {
                out.push(Diagnostic::MissingTerminator {
                    func: fname(),
                    block: bname(),
                });
            }
            _ => {}
        }
        for (ii, instr) in block.instrs.iter().enumerate() {
            if instr.is_terminator() && ii + 1 != block.instrs.len() {
                out.push(Diagnostic::TerminatorNotLast {
                    func: fname(),
                    block: bname(),
                    index: ii,
                });
            }
            if instr.successors().any(|s| s.0 as usize >= nblocks) {
                out.push(Diagnostic::BadBlockTarget {
                    func: fname(),
                    block: bname(),
                    index: ii,
                });
                structurally_sound = false;
            }
            if let Instruction::Call { callee, args, .. } = instr {
                match p.callee_arity(*callee) {
                    None => out.push(Diagnostic::BadCallee {
                        func: fname(),
                        block: bname(),
                        index: ii,
                    }),
                    Some(expected) if expected != args.len() => {
                        out.push(Diagnostic::ArityMismatch {
                            func: fname(),
                            block: bname(),
                            index: ii,
                            expected,
                            found: args.len(),
                        })
                    }
                    _ => {}
                }
                if matches!(callee, Callee::Builtin(super::Builtin::Print)) {
                    out.push(Diagnostic::BadCallee {
                        func: fname(),
                        block: bname(),
                        index: ii,
                    });
                }
            }
            for reg in registers_of(instr) {
                if reg.0 >= func.reg_count {
                    out.push(Diagnostic::RegisterOutOfRange {
                        func: fname(),
                        block: bname(),
                        index: ii,
                        reg: reg.0,
                    });
                    structurally_sound = false;
                }
            }
        }
    }
    if structurally_sound && func.arity <= func.reg_count {
        check_definitions(func, out);
    }
}

fn registers_of(instr: &Instruction) -> impl Iterator<Item = Reg> + '_ {
    instr
        .operands()
        .filter_map(|o| match o {
            Operand::Reg(r) => Some(r),
            Operand::Imm(_) => None,
        })
        .chain(instr.def())
}

/// Forward must-be-defined analysis. Parameters are defined on entry; a
/// block's input is the intersection over its predecessors. Unreachable
/// blocks keep the optimistic "everything defined" state and are not
/// reported.
fn check_definitions(func: &Function, out: &mut Vec<Diagnostic>) {
    let nregs = func.reg_count as usize;
    let nblocks = func.blocks.len();
    let mut entry_in = vec![false; nregs];
    entry_in[..func.arity as usize].fill(true);
    let mut ins: Vec<Vec<bool>> = vec![vec![true; nregs]; nblocks];
    ins[0] = entry_in.clone();

    let transfer = |bi: usize, input: &[bool]| -> Vec<bool> {
        let mut d = input.to_vec();
        for instr in &func.blocks[bi].instrs {
            if let Some(r) = instr.def() {
                d[r.index()] = true;
            }
        }
        d
    };

    let mut changed = true;
    while changed {
        changed = false;
        let outs: Vec<Vec<bool>> = (0..nblocks).map(|b| transfer(b, &ins[b])).collect();
        for (b, block_in) in ins.iter_mut().enumerate() {
            let mut meet = if b == 0 {
                entry_in.clone()
            } else {
                vec![true; nregs]
            };
            for (pred, pred_out) in outs.iter().enumerate() {
                let feeds = func.blocks[pred]
                    .instrs
                    .last()
                    .map(|t| t.successors().any(|s| s.0 as usize == b))
                    .unwrap_or(false);
                if feeds {
                    for (m, o) in meet.iter_mut().zip(pred_out) {
                        *m &= *o;
                    }
                }
            }
            if meet != *block_in {
                *block_in = meet;
                changed = true;
            }
        }
    }

    for (bi, block) in func.blocks.iter().enumerate() {
        let mut defined = ins[bi].clone();
        for (ii, instr) in block.instrs.iter().enumerate() {
            for op in instr.operands() {
                if let Operand::Reg(r) = op {
                    if !defined[r.index()] {
                        out.push(Diagnostic::UndefinedRegister {
                            func: func.name.clone(),
                            block: block.label.clone(),
                            index: ii,
                            reg: r.0,
                        });
                    }
                }
            }
            if let Some(r) = instr.def() {
                defined[r.index()] = true;
            }
        }
    }
}
