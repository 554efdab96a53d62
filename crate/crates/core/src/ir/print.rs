// SPDX-License-Identifier: Apache-2.0

//! Canonical text form. `parse_program(&p.to_string())` reproduces `p`.

use core::fmt;

use super::{Function, Instruction, Program};

struct InstrDisplay<'a> {
    program: &'a Program,
    function: &'a Function,
    instr: &'a Instruction,
}

impl fmt::Display for InstrDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = |b: super::BlockId| {
            self.function
                .blocks
                .get(b.0 as usize)
                .map(|b| b.label.as_str())
                .unwrap_or("<invalid>")
        };
        match self.instr {
            Instruction::Const { dst, value } => write!(f, "{dst} = const {value}"),
            Instruction::Binary { op, dst, lhs, rhs } => {
                write!(f, "{dst} = {} {lhs} {rhs}", op.mnemonic())
            }
            Instruction::Load { dst, addr } => write!(f, "{dst} = load {addr}"),
            Instruction::Store { addr, value } => write!(f, "store {addr} {value}"),
            Instruction::Br { target } => write!(f, "br {}", label(*target)),
            Instruction::BrCond {
                cond,
                then_block,
                else_block,
            } => write!(
                f,
                "br.cond {cond} {} {}",
                label(*then_block),
                label(*else_block)
            ),
            Instruction::Call { callee, args, dst } => {
                if let Some(d) = dst {
                    write!(f, "{d} = ")?;
                }
                write!(f, "call {}", self.program.callee_name(*callee))?;
                for a in args {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
            Instruction::Ret { value: Some(v) } => write!(f, "ret {v}"),
            Instruction::Ret { value: None } => f.write_str("ret"),
            Instruction::Print { value } => write!(f, "print {value}"),
        }
    }
}

impl Program {
    /// Renders one instruction of `function` in source syntax.
    pub fn display_instruction<'a>(
        &'a self,
        function: &'a Function,
        instr: &'a Instruction,
    ) -> impl fmt::Display + 'a {
        InstrDisplay {
            program: self,
            function,
            instr,
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.memory_size != 0 {
            writeln!(f, "memory {}", self.memory_size)?;
        }
        writeln!(f, "entry {}", self.entry_function().name)?;
        for function in &self.functions {
            writeln!(f, "func {}/{} {{", function.name, function.arity)?;
            for block in &function.blocks {
                writeln!(f, "{}:", block.label)?;
                for instr in &block.instrs {
                    writeln!(f, "  {}", self.display_instruction(function, instr))?;
                }
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}
