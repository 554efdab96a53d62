// SPDX-License-Identifier: Apache-2.0

//! Interpreter state and the `execute` / `try` / `apply` triad.
//!
//! `execute` runs one variant in place. `try_variant` computes the
//! [`AbstractChange`] the variant would make without touching the state,
//! and `apply` performs a change. For every state `s` and variant `v`,
//! `apply(try(s, v))` on a fork of `s` equals `execute(v)` on another fork.

mod cow;
mod exec;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ir::{ArithFault, BlockId, FuncId, Pc, Program, Reg, Value};
use crate::mutgen::Mutation;

pub use cow::{
    OutputStream, PagedMemory, SimFs, FILE_PAGE_BYTES, MAX_FILE_BYTES, MEMORY_PAGE_CELLS,
    OUTPUT_CHUNK_BYTES,
};
pub use exec::AbstractChange;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trap {
    DivByZero,
    RemByZero,
    Overflow,
    ShiftRange,
    MemoryOutOfBounds,
    StackOverflow,
    BadHandle,
    NegativeSeek,
    FileTooLarge,
}

impl Trap {
    pub fn name(self) -> &'static str {
        match self {
            Trap::DivByZero => "div-by-zero",
            Trap::RemByZero => "rem-by-zero",
            Trap::Overflow => "overflow",
            Trap::ShiftRange => "shift-range",
            Trap::MemoryOutOfBounds => "memory-out-of-bounds",
            Trap::StackOverflow => "stack-overflow",
            Trap::BadHandle => "bad-handle",
            Trap::NegativeSeek => "negative-seek",
            Trap::FileTooLarge => "file-too-large",
        }
    }
}

impl fmt::Display for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<ArithFault> for Trap {
    fn from(f: ArithFault) -> Self {
        match f {
            ArithFault::DivByZero => Trap::DivByZero,
            ArithFault::RemByZero => Trap::RemByZero,
            ArithFault::Overflow => Trap::Overflow,
            ArithFault::ShiftRange => Trap::ShiftRange,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Running,
    Exited(Value),
    Trapped(Trap),
    TimedOut,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Running => f.write_str("running"),
            Status::Exited(c) => write!(f, "exited({c})"),
            Status::Trapped(t) => write!(f, "trapped({t})"),
            Status::TimedOut => f.write_str("timed-out"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Limits {
    /// The run times out once this many steps have executed.
    pub step_limit: u64,
    /// Maximum call depth, counting the entry frame.
    pub stack_limit: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            step_limit: 10_000_000,
            stack_limit: 256,
        }
    }
}

/// An activation record. `return_to` is the caller's resume position and
/// destination register; the entry frame has none.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub func: FuncId,
    pub regs: Vec<Value>,
    pub return_to: Option<(Pc, Option<Reg>)>,
}

/// A code block that can run at a location: the instruction, optionally
/// altered by a mutation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Variant<'a> {
    pub instr: &'a crate::ir::Instruction,
    pub mutation: Option<Mutation>,
}

impl<'a> Variant<'a> {
    pub fn original(instr: &'a crate::ir::Instruction) -> Self {
        Variant {
            instr,
            mutation: None,
        }
    }

    pub fn mutant(instr: &'a crate::ir::Instruction, mutation: Mutation) -> Self {
        Variant {
            instr,
            mutation: Some(mutation),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StartError {
    #[error("entry function takes {expected} argument(s), {found} given")]
    ArityMismatch { expected: usize, found: usize },
}

/// The complete state of one execution.
///
/// Equality compares every observable component (position, stack, memory,
/// output, files, step count, status, limits) and ignores the page-copy
/// counters.
#[derive(Clone, Debug)]
pub struct MachineState {
    pc: Pc,
    frames: Vec<Frame>,
    memory: PagedMemory,
    output: OutputStream,
    files: SimFs,
    steps: u64,
    status: Status,
    limits: Limits,
}

impl PartialEq for MachineState {
    fn eq(&self, o: &Self) -> bool {
        self.pc == o.pc
            && self.status == o.status
            && self.steps == o.steps
            && self.limits == o.limits
            && self.frames == o.frames
            && self.memory == o.memory
            && self.output == o.output
            && self.files == o.files
    }
}

impl Eq for MachineState {}

impl MachineState {
    /// Initial state: the entry function called with `args`.
    pub fn new(program: &Program, args: &[Value], limits: Limits) -> Result<Self, StartError> {
        let entry = program.entry_function();
        if entry.arity as usize != args.len() {
            return Err(StartError::ArityMismatch {
                expected: entry.arity as usize,
                found: args.len(),
            });
        }
        let mut regs = vec![0; entry.reg_count as usize];
        regs[..args.len()].copy_from_slice(args);
        Ok(MachineState {
            pc: Pc {
                func: program.entry,
                block: BlockId(0),
                index: 0,
            },
            frames: vec![Frame {
                func: program.entry,
                regs,
                return_to: None,
            }],
            memory: PagedMemory::new(program.memory_size),
            output: OutputStream::new(),
            files: SimFs::new(),
            steps: 0,
            status: Status::Running,
            limits,
        })
    }

    pub fn with_file(mut self, file: Value, bytes: &[u8]) -> Self {
        self.files.preload(file, bytes);
        self
    }

    /// Returns an observationally equal, independent copy. Shared pages
    /// are copied lazily on first write; the copy's page counters start at 0.
    pub fn fork_state(&self) -> MachineState {
        let mut child = self.clone();
        child.memory.reset_copies();
        child.output.reset_copies();
        child.files.reset_copies();
        child
    }

    /// φ: the next program position, or `None` once terminated.
    #[inline]
    pub fn next_pc(&self) -> Option<Pc> {
        match self.status {
            Status::Running => Some(self.pc),
            _ => None,
        }
    }

    pub fn pc(&self) -> Pc {
        self.pc
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn set_step_limit(&mut self, limit: u64) {
        self.limits.step_limit = limit;
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn memory(&self) -> &PagedMemory {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut PagedMemory {
        &mut self.memory
    }

    pub fn output(&self) -> &OutputStream {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut OutputStream {
        &mut self.output
    }

    pub fn files(&self) -> &SimFs {
        &self.files
    }

    pub fn files_mut(&mut self) -> &mut SimFs {
        &mut self.files
    }

    pub fn fs_open(&mut self, file: Value) -> Value {
        self.files.open(file)
    }

    pub fn fs_read(&mut self, handle: Value, n: usize) -> Result<Vec<u8>, Trap> {
        self.files.read(handle, n)
    }

    pub fn fs_write(&mut self, handle: Value, bytes: &[u8]) -> Result<(), Trap> {
        self.files.write(handle, bytes)
    }

    pub fn fs_seek(&mut self, handle: Value, offset: Value) -> Result<(), Trap> {
        self.files.seek(handle, offset)
    }

    /// Data pages copied by this state since it was created or forked.
    pub fn page_copies(&self) -> u64 {
        self.memory.page_copies() + self.output.page_copies() + self.files.page_copies()
    }

    #[inline]
    pub fn reg(&self, r: Reg) -> Value {
        self.frames
            .last()
            .and_then(|f| f.regs.get(r.index()))
            .copied()
            .unwrap_or(0)
    }

    pub fn set_reg(&mut self, r: Reg, v: Value) {
        if let Some(slot) = self
            .frames
            .last_mut()
            .and_then(|f| f.regs.get_mut(r.index()))
        {
            *slot = v;
        }
    }

    /// Canonical byte encoding of the observable state. Two states are
    /// equal iff their encodings are.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let put = |out: &mut Vec<u8>, v: u64| out.extend_from_slice(&v.to_le_bytes());
        put(&mut out, self.pc.func.0 as u64);
        put(&mut out, self.pc.block.0 as u64);
        put(&mut out, self.pc.index as u64);
        let (tag, payload) = match self.status {
            Status::Running => (0, 0),
            Status::Exited(c) => (1, c as u64),
            Status::Trapped(t) => (2, t as u64),
            Status::TimedOut => (3, 0),
        };
        put(&mut out, tag);
        put(&mut out, payload);
        put(&mut out, self.steps);
        put(&mut out, self.limits.step_limit);
        put(&mut out, self.limits.stack_limit as u64);
        put(&mut out, self.frames.len() as u64);
        for f in &self.frames {
            put(&mut out, f.func.0 as u64);
            put(&mut out, f.regs.len() as u64);
            for r in &f.regs {
                put(&mut out, *r as u64);
            }
            match f.return_to {
                None => put(&mut out, 0),
                Some((pc, dst)) => {
                    put(&mut out, 1);
                    put(&mut out, pc.func.0 as u64);
                    put(&mut out, pc.block.0 as u64);
                    put(&mut out, pc.index as u64);
                    put(&mut out, dst.map_or(u64::MAX, |d| d.0 as u64));
                }
            }
        }
        put(&mut out, self.memory.len() as u64);
        for c in self.memory.cells() {
            put(&mut out, c as u64);
        }
        put(&mut out, self.output.len() as u64);
        out.extend_from_slice(&self.output.to_vec());
        self.files.encode_into(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    #[test]
    fn entry_arity_is_checked() {
        let p = parse_program("func main/1 { e: ret r0 }").unwrap();
        assert!(MachineState::new(&p, &[1], Limits::default()).is_ok());
        assert_eq!(
            MachineState::new(&p, &[], Limits::default()),
            Err(StartError::ArityMismatch {
                expected: 1,
                found: 0
            })
        );
    }

    #[test]
    fn fork_isolates_memory_output_and_files() {
        let p = parse_program("memory 100\nfunc main/0 { e: ret }").unwrap();
        let mut parent = MachineState::new(&p, &[], Limits::default())
            .unwrap()
            .with_file(0, b"abc");
        parent.memory_mut().set(5, 11).unwrap();
        let h = parent.fs_open(0);

        let mut child = parent.fork_state();
        assert_eq!(child, parent);
        assert_eq!(child.encode(), parent.encode());
        assert_eq!(child.page_copies(), 0);

        child.memory_mut().set(5, 99).unwrap();
        child.output_mut().append(b"7\n");
        child.fs_write(h, b"Z").unwrap();
        assert_eq!(parent.memory().get(5), Some(11));
        assert!(parent.output().is_empty());
        assert_eq!(parent.files().contents(0).unwrap(), b"abc");
        assert_eq!(child.files().contents(0).unwrap(), b"Zbc");

        parent.fs_seek(h, 0).unwrap();
        assert_eq!(parent.fs_read(h, 3).unwrap(), b"abc");
        assert_ne!(child, parent);
    }
}
