// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Frame, MachineState, Status, Trap, Variant};
use crate::ir::{BinOp, BlockId, Builtin, Callee, Instruction, Operand, Pc, Program, Reg, Value};
use crate::mutgen::Mutation;

/// The effect of running one variant on one state, without the state.
///
/// Every change except `BranchTo`, `Return` and `Trap` also moves the
/// position to the next instruction. Changes compare by value, so two
/// variants with equal changes are indistinguishable from that state on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AbstractChange {
    RegWrite {
        reg: Reg,
        value: Value,
    },
    MemWrite {
        addr: Value,
        value: Value,
    },
    /// A call whose arguments are already evaluated. User functions push a
    /// frame; builtins run to completion inside `apply`.
    CallEffect {
        callee: Callee,
        args: Vec<Value>,
        dst: Option<Reg>,
    },
    BranchTo(BlockId),
    NoEffect,
    Trap(Trap),
    Return(Option<Value>),
}

impl Variant<'_> {
    fn binop(&self) -> Option<BinOp> {
        match (self.instr, self.mutation) {
            (_, Some(Mutation::ReplaceOp(op))) => Some(op),
            (Instruction::Binary { op, .. }, _) => Some(*op),
            _ => None,
        }
    }

    fn deleted(&self) -> bool {
        self.mutation == Some(Mutation::Delete)
    }
}

impl MachineState {
    fn raw_operand(&self, o: Operand) -> Value {
        match o {
            Operand::Reg(r) => self.reg(r),
            Operand::Imm(v) => v,
        }
    }

    /// Value of operand `slot` as the variant sees it.
    fn operand_value(&self, v: &Variant<'_>, slot: usize) -> Value {
        let read = |s: usize| v.instr.operand(s).map_or(0, |o| self.raw_operand(o));
        match v.mutation {
            Some(Mutation::ReplaceLiteral { slot: s, value }) if s as usize == slot => value,
            Some(Mutation::AdjustOperand { slot: s, delta }) if s as usize == slot => {
                read(slot).wrapping_add(delta as Value)
            }
            Some(Mutation::AbsArg { slot: s }) if s as usize == slot => read(slot).wrapping_abs(),
            Some(Mutation::SwapArgs { first }) if first as usize == slot => read(slot + 1),
            Some(Mutation::SwapArgs { first }) if first as usize + 1 == slot => read(slot - 1),
            _ => read(slot),
        }
    }

    fn call_args(&self, v: &Variant<'_>, n: usize) -> Vec<Value> {
        (0..n).map(|i| self.operand_value(v, i)).collect()
    }

    #[inline]
    fn advance(&mut self) {
        self.pc.index += 1;
    }

    fn jump(&mut self, block: BlockId) {
        self.pc.block = block;
        self.pc.index = 0;
    }

    fn trap(&mut self, t: Trap) {
        self.status = Status::Trapped(t);
    }

    fn finish_step(&mut self) {
        self.steps += 1;
        if self.status == Status::Running && self.steps >= self.limits.step_limit {
            self.status = Status::TimedOut;
        }
    }

    fn run_builtin(&mut self, b: Builtin, args: &[Value]) -> Result<Value, Trap> {
        let arg = |i: usize| args.get(i).copied().unwrap_or(0);
        match b {
            Builtin::FsOpen => Ok(self.files.open(arg(0))),
            Builtin::FsRead => Ok(self.files.read_byte(arg(0))?.map_or(-1, Value::from)),
            Builtin::FsWrite => self.files.write_byte(arg(0), arg(1) as u8).map(|_| 0),
            Builtin::FsSeek => self.files.seek(arg(0), arg(1)).map(|_| 0),
            Builtin::FsSize => self.files.size(arg(0)).map(|n| n as Value),
            Builtin::Print => {
                self.output.append(format!("{}\n", arg(0)).as_bytes());
                Ok(0)
            }
        }
    }

    /// Performs a call from the current position, which must be the call
    /// instruction itself.
    fn perform_call(
        &mut self,
        program: &Program,
        callee: Callee,
        args: &[Value],
        dst: Option<Reg>,
    ) {
        match callee {
            Callee::Builtin(b) => match self.run_builtin(b, args) {
                Ok(value) => {
                    if let Some(d) = dst {
                        self.set_reg(d, value);
                    }
                    self.advance();
                }
                Err(t) => self.trap(t),
            },
            Callee::Func(f) => {
                if self.frames.len() >= self.limits.stack_limit as usize {
                    self.trap(Trap::StackOverflow);
                    return;
                }
                let func = program.function(f);
                let mut regs = vec![0; func.reg_count as usize];
                let n = args.len().min(regs.len());
                regs[..n].copy_from_slice(&args[..n]);
                let mut resume = self.pc;
                resume.index += 1;
                self.frames.push(Frame {
                    func: f,
                    regs,
                    return_to: Some((resume, dst)),
                });
                self.pc = Pc {
                    func: f,
                    block: BlockId(0),
                    index: 0,
                };
            }
        }
    }

    fn do_return(&mut self, value: Option<Value>) {
        let frame = self.frames.pop().expect("a running state has a frame");
        match frame.return_to {
            None => {
                self.frames.push(frame);
                self.status = Status::Exited(value.unwrap_or(0));
            }
            Some((resume, dst)) => {
                self.pc = resume;
                if let Some(d) = dst {
                    self.set_reg(d, value.unwrap_or(0));
                }
            }
        }
    }

    /// Runs `v` at the current position, as one step.
    pub fn execute(&mut self, program: &Program, v: Variant<'_>) {
        debug_assert!(self.is_running());
        if v.deleted() {
            if let Instruction::Call { dst: Some(d), .. } = v.instr {
                self.set_reg(*d, 0);
            }
            self.advance();
            self.finish_step();
            return;
        }
        match v.instr {
            Instruction::Const { dst, .. } => {
                let value = self.operand_value(&v, 0);
                self.set_reg(*dst, value);
                self.advance();
            }
            Instruction::Binary { dst, .. } => {
                let op = v.binop().expect("binary instruction");
                match op.eval(self.operand_value(&v, 0), self.operand_value(&v, 1)) {
                    Ok(value) => {
                        self.set_reg(*dst, value);
                        self.advance();
                    }
                    Err(f) => self.trap(f.into()),
                }
            }
            Instruction::Load { dst, .. } => match self.memory.get(self.operand_value(&v, 0)) {
                Some(value) => {
                    self.set_reg(*dst, value);
                    self.advance();
                }
                None => self.trap(Trap::MemoryOutOfBounds),
            },
            Instruction::Store { .. } => {
                let addr = self.operand_value(&v, 0);
                let value = self.operand_value(&v, 1);
                match self.memory.set(addr, value) {
                    Ok(()) => self.advance(),
                    Err(t) => self.trap(t),
                }
            }
            Instruction::Br { target } => self.jump(*target),
            Instruction::BrCond {
                then_block,
                else_block,
                ..
            } => {
                let target = if self.operand_value(&v, 0) != 0 {
                    *then_block
                } else {
                    *else_block
                };
                self.jump(target);
            }
            Instruction::Call { callee, args, dst } => {
                let values = self.call_args(&v, args.len());
                self.perform_call(program, *callee, &values, *dst);
            }
            Instruction::Ret { value } => {
                let r = value.map(|_| self.operand_value(&v, 0));
                self.do_return(r);
            }
            Instruction::Print { .. } => {
                let value = self.operand_value(&v, 0);
                self.output.append(format!("{value}\n").as_bytes());
                self.advance();
            }
        }
        self.finish_step();
    }

    /// The change `v` would make at the current position. Does not modify
    /// the state.
    pub fn try_variant(&self, v: Variant<'_>) -> AbstractChange {
        if v.deleted() {
            return match v.instr {
                Instruction::Call { dst: Some(d), .. } => {
                    AbstractChange::RegWrite { reg: *d, value: 0 }
                }
                _ => AbstractChange::NoEffect,
            };
        }
        match v.instr {
            Instruction::Const { dst, .. } => AbstractChange::RegWrite {
                reg: *dst,
                value: self.operand_value(&v, 0),
            },
            Instruction::Binary { dst, .. } => {
                let op = v.binop().expect("binary instruction");
                match op.eval(self.operand_value(&v, 0), self.operand_value(&v, 1)) {
                    Ok(value) => AbstractChange::RegWrite { reg: *dst, value },
                    Err(f) => AbstractChange::Trap(f.into()),
                }
            }
            Instruction::Load { dst, .. } => match self.memory.get(self.operand_value(&v, 0)) {
                Some(value) => AbstractChange::RegWrite { reg: *dst, value },
                None => AbstractChange::Trap(Trap::MemoryOutOfBounds),
            },
            Instruction::Store { .. } => {
                let addr = self.operand_value(&v, 0);
                if self.memory.in_bounds(addr) {
                    AbstractChange::MemWrite {
                        addr,
                        value: self.operand_value(&v, 1),
                    }
                } else {
                    AbstractChange::Trap(Trap::MemoryOutOfBounds)
                }
            }
            Instruction::Br { target } => AbstractChange::BranchTo(*target),
            Instruction::BrCond {
                then_block,
                else_block,
                ..
            } => AbstractChange::BranchTo(if self.operand_value(&v, 0) != 0 {
                *then_block
            } else {
                *else_block
            }),
            Instruction::Call { callee, args, dst } => AbstractChange::CallEffect {
                callee: *callee,
                args: self.call_args(&v, args.len()),
                dst: *dst,
            },
            Instruction::Ret { value } => {
                AbstractChange::Return(value.map(|_| self.operand_value(&v, 0)))
            }
            Instruction::Print { .. } => AbstractChange::CallEffect {
                callee: Callee::Builtin(Builtin::Print),
                args: vec![self.operand_value(&v, 0)],
                dst: None,
            },
        }
    }

    /// Performs a change computed by [`try_variant`](Self::try_variant) on
    /// an equal state, as one step.
    pub fn apply(&mut self, program: &Program, change: &AbstractChange) {
        debug_assert!(self.is_running());
        match change {
            AbstractChange::RegWrite { reg, value } => {
                self.set_reg(*reg, *value);
                self.advance();
            }
            AbstractChange::MemWrite { addr, value } => match self.memory.set(*addr, *value) {
                Ok(()) => self.advance(),
                Err(t) => self.trap(t),
            },
            AbstractChange::CallEffect { callee, args, dst } => {
                self.perform_call(program, *callee, args, *dst)
            }
            AbstractChange::BranchTo(b) => self.jump(*b),
            AbstractChange::NoEffect => self.advance(),
            AbstractChange::Trap(t) => self.trap(*t),
            AbstractChange::Return(v) => self.do_return(*v),
        }
        self.finish_step();
    }

    /// Runs the unmutated program to termination.
    pub fn run(&mut self, program: &Program) {
        while let Some(pc) = self.next_pc() {
            let instr = program.instruction(pc).expect("position is valid");
            self.execute(program, Variant::original(instr));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::runtime::Limits;

    fn run(src: &str, args: &[Value]) -> MachineState {
        let p = parse_program(src).unwrap();
        let mut s = MachineState::new(&p, args, Limits::default()).unwrap();
        s.run(&p);
        s
    }

    #[test]
    fn arithmetic_and_exit_code() {
        let s = run("func main/1 { e: r1 = arith.mul r0 6; ret r1 }", &[7]);
        assert_eq!(s.status(), Status::Exited(42));
        assert_eq!(s.steps(), 2);
    }

    #[test]
    fn calls_return_into_destination() {
        let s = run(
            "func sq/1 { e: r1 = arith.mul r0 r0; ret r1 }\nfunc main/0 { e: r0 = call sq 9; print r0; ret }",
            &[],
        );
        assert_eq!(s.status(), Status::Exited(0));
        assert_eq!(s.output().to_vec(), b"81\n");
    }

    #[test]
    fn traps_stop_execution() {
        let s = run(
            "func main/1 { e: r1 = arith.div 1 r0; print r1; ret }",
            &[0],
        );
        assert_eq!(s.status(), Status::Trapped(Trap::DivByZero));
        assert!(s.output().is_empty());
        let s = run("memory 2\nfunc main/0 { e: store 2 1; ret }", &[]);
        assert_eq!(s.status(), Status::Trapped(Trap::MemoryOutOfBounds));
    }

    #[test]
    fn unbounded_recursion_overflows_the_stack() {
        let s = run("func main/0 { e: call main; ret }", &[]);
        assert_eq!(s.status(), Status::Trapped(Trap::StackOverflow));
        assert_eq!(s.frames().len(), 256);
    }

    #[test]
    fn infinite_loop_times_out_at_the_limit() {
        let p = parse_program("func main/0 { e: br e }").unwrap();
        let limits = Limits {
            step_limit: 50,
            ..Limits::default()
        };
        let mut s = MachineState::new(&p, &[], limits).unwrap();
        s.run(&p);
        assert_eq!(s.status(), Status::TimedOut);
        assert_eq!(s.steps(), 50);
    }

    #[test]
    fn file_builtins() {
        let p = parse_program(
            "func main/0 { e: r0 = call fs_open 1; r1 = call fs_read r0; call fs_write r0 90; r2 = call fs_size r0; call fs_seek r0 0; r3 = call fs_read r0; r4 = call fs_read r0; r5 = call fs_read r0; print r1; print r2; print r3; print r4; print r5; ret }",
        )
        .unwrap();
        let mut s = MachineState::new(&p, &[], Limits::default())
            .unwrap()
            .with_file(1, b"ab");
        s.run(&p);
        assert_eq!(s.output().to_vec(), b"97\n2\n97\n90\n-1\n");
        assert_eq!(s.files().contents(1).unwrap(), b"aZ");
    }

    #[test]
    fn mutated_operands() {
        let p = parse_program("func f/2 { e: r2 = arith.sub r0 r1; ret r2 }\nfunc main/1 { e: r1 = call f r0 3; ret r1 }").unwrap();
        let s0 = MachineState::new(&p, &[-5], Limits::default()).unwrap();
        let call = p.instruction(s0.pc()).unwrap();
        let change = |m| s0.try_variant(Variant::mutant(call, m));
        let args = |c: AbstractChange| match c {
            AbstractChange::CallEffect { args, .. } => args,
            other => panic!("{other:?}"),
        };
        assert_eq!(args(change(Mutation::SwapArgs { first: 0 })), [3, -5]);
        assert_eq!(args(change(Mutation::AbsArg { slot: 0 })), [5, 3]);
        assert_eq!(
            args(change(Mutation::AdjustOperand { slot: 1, delta: -1 })),
            [-5, 2]
        );
        assert_eq!(
            args(change(Mutation::ReplaceLiteral { slot: 1, value: 0 })),
            [-5, 0]
        );
        assert_eq!(
            change(Mutation::Delete),
            AbstractChange::RegWrite {
                reg: Reg(1),
                value: 0
            }
        );
    }
}
