// SPDX-License-Identifier: Apache-2.0

//! The three-address register IR.
//!
//! A [`Program`] is a set of functions sorted by name. Each function is a list
//! of basic blocks; the first block is the entry block. Every instruction
//! reads operands that are either registers or 64-bit literals and writes at
//! most one register. Branch targets and callees are stored resolved
//! ([`BlockId`], [`Callee`]) so the interpreter never looks names up.

mod locations;
mod parse;
mod print;
mod validate;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use locations::{enumerate_locations, is_mutation_site, Location, LocationId};
pub use parse::{parse_program, ParseError, ParseErrorKind};
pub use validate::{validate, Diagnostic};

/// All IR values are two's-complement 64-bit integers.
pub type Value = i64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub u32);

impl Reg {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Reg),
    Imm(Value),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => r.fmt(f),
            Operand::Imm(v) => v.fmt(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub u32);

/// Operator groups; mutation operators replace an opcode only within its
/// own group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpFamily {
    Arith,
    Logic,
    Shift,
    Icmp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Ashr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Failure of a single binary operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithFault {
    DivByZero,
    RemByZero,
    Overflow,
    ShiftRange,
}

impl BinOp {
    pub const ALL: [BinOp; 17] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Lshr,
        BinOp::Ashr,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
    ];

    pub fn family(self) -> OpFamily {
        use BinOp::*;
        match self {
            Add | Sub | Mul | Div | Rem => OpFamily::Arith,
            And | Or | Xor => OpFamily::Logic,
            Shl | Lshr | Ashr => OpFamily::Shift,
            Eq | Ne | Lt | Le | Gt | Ge => OpFamily::Icmp,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "arith.add",
            Sub => "arith.sub",
            Mul => "arith.mul",
            Div => "arith.div",
            Rem => "arith.rem",
            And => "logic.and",
            Or => "logic.or",
            Xor => "logic.xor",
            Shl => "shift.shl",
            Lshr => "shift.lshr",
            Ashr => "shift.ashr",
            Eq => "icmp.eq",
            Ne => "icmp.ne",
            Lt => "icmp.lt",
            Le => "icmp.le",
            Gt => "icmp.gt",
            Ge => "icmp.ge",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<BinOp> {
        BinOp::ALL.iter().copied().find(|op| op.mnemonic() == s)
    }

    /// Evaluates the operation. Division and remainder trap on a zero
    /// divisor and on `i64::MIN / -1`; shifts trap outside `0..=63`.
    pub fn eval(self, lhs: Value, rhs: Value) -> Result<Value, ArithFault> {
        use BinOp::*;
        let shift = |amount: Value| -> Result<u32, ArithFault> {
            if (0..64).contains(&amount) {
                Ok(amount as u32)
            } else {
                Err(ArithFault::ShiftRange)
            }
        };
        Ok(match self {
            Add => lhs.wrapping_add(rhs),
            Sub => lhs.wrapping_sub(rhs),
            Mul => lhs.wrapping_mul(rhs),
            Div => {
                if rhs == 0 {
                    return Err(ArithFault::DivByZero);
                }
                lhs.checked_div(rhs).ok_or(ArithFault::Overflow)?
            }
            Rem => {
                if rhs == 0 {
                    return Err(ArithFault::RemByZero);
                }
                lhs.checked_rem(rhs).ok_or(ArithFault::Overflow)?
            }
            And => lhs & rhs,
            Or => lhs | rhs,
            Xor => lhs ^ rhs,
            Shl => lhs << shift(rhs)?,
            Lshr => ((lhs as u64) >> shift(rhs)?) as i64,
            Ashr => lhs >> shift(rhs)?,
            Eq => (lhs == rhs) as Value,
            Ne => (lhs != rhs) as Value,
            Lt => (lhs < rhs) as Value,
            Le => (lhs <= rhs) as Value,
            Gt => (lhs > rhs) as Value,
            Ge => (lhs >= rhs) as Value,
        })
    }
}

/// Functions provided by the runtime rather than by the program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    FsOpen,
    FsRead,
    FsWrite,
    FsSeek,
    FsSize,
    /// Target of the `print` instruction; not callable by name.
    Print,
}

impl Builtin {
    pub const CALLABLE: [Builtin; 5] = [
        Builtin::FsOpen,
        Builtin::FsRead,
        Builtin::FsWrite,
        Builtin::FsSeek,
        Builtin::FsSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::FsOpen => "fs_open",
            Builtin::FsRead => "fs_read",
            Builtin::FsWrite => "fs_write",
            Builtin::FsSeek => "fs_seek",
            Builtin::FsSize => "fs_size",
            Builtin::Print => "print",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::FsOpen | Builtin::FsRead | Builtin::FsSize | Builtin::Print => 1,
            Builtin::FsWrite | Builtin::FsSeek => 2,
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::CALLABLE.iter().copied().find(|b| b.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Callee {
    Func(FuncId),
    Builtin(Builtin),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    Const {
        dst: Reg,
        value: Value,
    },
    Binary {
        op: BinOp,
        dst: Reg,
        lhs: Operand,
        rhs: Operand,
    },
    Load {
        dst: Reg,
        addr: Operand,
    },
    Store {
        addr: Operand,
        value: Operand,
    },
    Br {
        target: BlockId,
    },
    BrCond {
        cond: Operand,
        then_block: BlockId,
        else_block: BlockId,
    },
    Call {
        callee: Callee,
        args: Vec<Operand>,
        dst: Option<Reg>,
    },
    Ret {
        value: Option<Operand>,
    },
    Print {
        value: Operand,
    },
}

impl Instruction {
    /// Number of operand slots. `const` exposes its literal as slot 0 so
    /// literal-replacement mutations address every literal the same way.
    pub fn operand_count(&self) -> usize {
        match self {
            Instruction::Const { .. } => 1,
            Instruction::Binary { .. } => 2,
            Instruction::Load { .. } => 1,
            Instruction::Store { .. } => 2,
            Instruction::Br { .. } => 0,
            Instruction::BrCond { .. } => 1,
            Instruction::Call { args, .. } => args.len(),
            Instruction::Ret { value } => value.is_some() as usize,
            Instruction::Print { .. } => 1,
        }
    }

    pub fn operand(&self, slot: usize) -> Option<Operand> {
        match (self, slot) {
            (Instruction::Const { value, .. }, 0) => Some(Operand::Imm(*value)),
            (Instruction::Binary { lhs, .. }, 0) => Some(*lhs),
            (Instruction::Binary { rhs, .. }, 1) => Some(*rhs),
            (Instruction::Load { addr, .. }, 0) => Some(*addr),
            (Instruction::Store { addr, .. }, 0) => Some(*addr),
            (Instruction::Store { value, .. }, 1) => Some(*value),
            (Instruction::BrCond { cond, .. }, 0) => Some(*cond),
            (Instruction::Call { args, .. }, i) => args.get(i).copied(),
            (Instruction::Ret { value }, 0) => *value,
            (Instruction::Print { value }, 0) => Some(*value),
            _ => None,
        }
    }

    pub fn operands(&self) -> impl Iterator<Item = Operand> + '_ {
        (0..self.operand_count()).filter_map(move |i| self.operand(i))
    }

    /// Register written by the instruction, if any.
    pub fn def(&self) -> Option<Reg> {
        match self {
            Instruction::Const { dst, .. }
            | Instruction::Binary { dst, .. }
            | Instruction::Load { dst, .. } => Some(*dst),
            Instruction::Call { dst, .. } => *dst,
            _ => None,
        }
    }

    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            Instruction::Br { .. } | Instruction::BrCond { .. } | Instruction::Ret { .. }
        )
    }

    pub fn successors(&self) -> impl Iterator<Item = BlockId> {
        let (a, b) = match self {
            Instruction::Br { target } => (Some(*target), None),
            Instruction::BrCond {
                then_block,
                else_block,
                ..
            } => (Some(*then_block), Some(*else_block)),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub instrs: Vec<Instruction>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub arity: u32,
    pub blocks: Vec<Block>,
    /// Size of the register file; at least `arity`.
    pub reg_count: u32,
}

impl Function {
    pub fn block_index(&self, label: &str) -> Option<BlockId> {
        self.blocks
            .iter()
            .position(|b| b.label == label)
            .map(|i| BlockId(i as u32))
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.instrs.len()).sum()
    }
}

/// A program position: function, block and instruction index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pc {
    pub func: FuncId,
    pub block: BlockId,
    pub index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    /// Sorted by name.
    pub functions: Vec<Function>,
    pub entry: FuncId,
    /// Number of global memory cells.
    pub memory_size: usize,
}

impl Program {
    pub fn function(&self, id: FuncId) -> &Function {
        &self.functions[id.0 as usize]
    }

    pub fn function_id(&self, name: &str) -> Option<FuncId> {
        self.functions
            .binary_search_by(|f| f.name.as_str().cmp(name))
            .ok()
            .map(|i| FuncId(i as u32))
    }

    pub fn entry_function(&self) -> &Function {
        self.function(self.entry)
    }

    pub fn instruction(&self, pc: Pc) -> Option<&Instruction> {
        self.functions
            .get(pc.func.0 as usize)?
            .blocks
            .get(pc.block.0 as usize)?
            .instrs
            .get(pc.index as usize)
    }

    pub fn instruction_count(&self) -> usize {
        self.functions.iter().map(Function::instruction_count).sum()
    }

    pub fn callee_name(&self, callee: Callee) -> &str {
        match callee {
            Callee::Func(id) => self
                .functions
                .get(id.0 as usize)
                .map(|f| f.name.as_str())
                .unwrap_or("<unknown>"),
            Callee::Builtin(b) => b.name(),
        }
    }

    pub fn callee_arity(&self, callee: Callee) -> Option<usize> {
        match callee {
            Callee::Func(id) => self.functions.get(id.0 as usize).map(|f| f.arity as usize),
            Callee::Builtin(b) => Some(b.arity()),
        }
    }
}
