// SPDX-License-Identifier: Apache-2.0

//! Mutation analysis over a small three-address register IR.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! * [`ir`]: the IR, its text format, the validator and location enumeration.
//! * [`mutgen`]: mutation operators and the mutation table (location → variants).
//! * [`runtime`]: the interpreter state with copy-on-write memory, output and
//!   simulated files, plus the `execute` / `try` / `apply` triad.
//! * [`engines`]: standard (schemata) analysis, split-stream execution and
//!   equivalence-modulo-state execution, with the mutant-ID set structures and
//!   the constant-cost filter operations they rely on.
//! * [`harness`]: test cases, kill matrices, verdicts and metric summaries.
//! * [`corpus`]: seeded random programs and suites for property tests.
//!
//! File formats, the corpus writer and the command line live in the
//! `forkmut` companion crate.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod engines;
pub mod harness;
pub mod ir;
pub mod mutgen;
pub mod runtime;

pub use engines::{Engine, EngineConfig, EngineRun, MutantIdSet, Record, VariantSet};
pub use harness::{KillMatrix, RunConfig, TestCase, TestMetrics, Verdict};
pub use ir::{parse_program, Program};
pub use mutgen::{generate_mutants, MutantId, MutationTable, Operator, OperatorSet};
pub use runtime::{AbstractChange, MachineState, Status, Trap};
