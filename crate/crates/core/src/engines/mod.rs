// SPDX-License-Identifier: Apache-2.0

//! Mutation execution engines.
//!
//! All three engines produce one [`Record`] per mutant. `Standard` runs each
//! mutant in its own process from the initial state. `SplitStream` runs a
//! single main process for the whole id set and forks one child per mutant
//! the first time that mutant's variant is about to run. `AccMut` tries every
//! variant first and forks only once per class of variants whose changes
//! differ.
//!
//! The main process of the forking engines also stands for the unmutated
//! program through an extra id one past the last mutant, so it always keeps
//! running the original and its final state is the reference record.

mod cluster;
mod idset;
mod variants;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::ir::{Pc, Program, Value};
use crate::mutgen::{LocationEntry, MutantId, MutationTable};
use crate::runtime::{MachineState, Status, Trap, Variant};

pub use cluster::{cluster_changes, ChangeCluster};
pub use idset::MutantIdSet;
pub use variants::{filter_mutants, filter_variants, OpCounter, VariantRef, VariantSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Engine {
    Standard,
    SplitStream,
    AccMut,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Standard, Engine::SplitStream, Engine::AccMut];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Standard => "standard",
            Engine::SplitStream => "sse",
            Engine::AccMut => "accmut",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown engine `{0}` (expected standard, sse or accmut)")]
pub struct UnknownEngine(pub alloc::string::String);

impl FromStr for Engine {
    type Err = UnknownEngine;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownEngine(s.into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    /// A fork that would nest deeper than this is not performed; its
    /// mutants are recorded as [`Outcome::AbortedDepth`].
    pub fork_depth: u32,
    pub trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            fork_depth: 64,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Exited(Value),
    Trapped(Trap),
    TimedOut,
    AbortedDepth,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Exited(c) => write!(f, "exit {c}"),
            Outcome::Trapped(t) => write!(f, "trap {t}"),
            Outcome::TimedOut => f.write_str("timeout"),
            Outcome::AbortedDepth => f.write_str("aborted"),
        }
    }
}

/// What a process leaves behind for each id it stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Record {
    pub outcome: Outcome,
    pub output: Vec<u8>,
    pub steps: u64,
}

impl Record {
    pub fn from_state(s: &MachineState) -> Self {
        let outcome = match s.status() {
            Status::Exited(c) => Outcome::Exited(c),
            Status::Trapped(t) => Outcome::Trapped(t),
            Status::TimedOut => Outcome::TimedOut,
            Status::Running => panic!("record of a running state"),
        };
        Record {
            outcome,
            output: s.output().to_vec(),
            steps: s.steps(),
        }
    }

    fn aborted(s: &MachineState) -> Self {
        Record {
            outcome: Outcome::AbortedDepth,
            output: s.output().to_vec(),
            steps: s.steps(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineMetrics {
    pub forks: u64,
    /// Processes run to completion: one per mutant for `Standard`, one plus
    /// the fork count otherwise.
    pub processes: u64,
    /// Forks skipped by the depth limit.
    pub aborted_forks: u64,
    /// Mutant ids handed to forked children.
    pub split_mutants: u64,
    pub variant_trials: u64,
    /// Instructions executed or applied, over all processes.
    pub instructions: u64,
    /// Elementary id/variant operations in the filters.
    pub filter_ops: u64,
    pub page_copies: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ForkEvent {
    Fork {
        parent: u32,
        child: u32,
        pc: Pc,
        step: u64,
        ids: Vec<MutantId>,
    },
    Exit {
        process: u32,
        outcome: Outcome,
        steps: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineRun {
    pub engine: Engine,
    /// Indexed by mutant id.
    pub records: Vec<Record>,
    /// The unmutated program's record.
    pub original: Record,
    pub metrics: EngineMetrics,
    pub trace: Vec<ForkEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("mutant {0} saved twice")]
    DuplicateSave(MutantId),
    #[error("mutant {0} never saved")]
    MissingRecord(MutantId),
    #[error("initial state is not running")]
    NotRunning,
}

struct Process {
    id: u32,
    state: MachineState,
    ids: MutantIdSet,
    depth: u32,
}

struct Driver<'t> {
    program: &'t Program,
    table: &'t MutationTable,
    engine: Engine,
    config: EngineConfig,
    sentinel: MutantId,
    records: Vec<Option<Record>>,
    original: Option<Record>,
    metrics: EngineMetrics,
    ops: OpCounter,
    trace: Vec<ForkEvent>,
    next_process: u32,
}

/// Runs every mutant of `table` from `initial` with `engine`.
pub fn run_engine(
    engine: Engine,
    program: &Program,
    table: &MutationTable,
    initial: &MachineState,
    config: &EngineConfig,
) -> Result<EngineRun, EngineError> {
    if !initial.is_running() {
        return Err(EngineError::NotRunning);
    }
    let m = table.mutant_count();
    let mut d = Driver {
        program,
        table,
        engine,
        config: *config,
        sentinel: MutantId(m),
        records: vec![None; m as usize],
        original: None,
        metrics: EngineMetrics::default(),
        ops: OpCounter::default(),
        trace: Vec::new(),
        next_process: 0,
    };
    match engine {
        Engine::Standard => {
            for i in (0..m).map(MutantId).chain([d.sentinel]) {
                let p = d.spawn(initial.fork_state(), MutantIdSet::single(i));
                d.drive(p)?;
            }
            d.metrics.processes = m as u64;
        }
        Engine::SplitStream | Engine::AccMut => {
            let p = d.spawn(initial.fork_state(), MutantIdSet::all(m + 1));
            d.drive(p)?;
            d.metrics.processes = 1 + d.metrics.forks;
        }
    }
    d.metrics.filter_ops = d.ops.0;
    let records = d
        .records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or(EngineError::MissingRecord(MutantId(i as u32))))
        .collect::<Result<Vec<_>, _>>()?;
    let original = d.original.ok_or(EngineError::MissingRecord(d.sentinel))?;
    Ok(EngineRun {
        engine,
        records,
        original,
        metrics: d.metrics,
        trace: d.trace,
    })
}

impl<'t> Driver<'t> {
    fn spawn(&mut self, state: MachineState, ids: MutantIdSet) -> Process {
        let id = self.next_process;
        self.next_process += 1;
        Process {
            id,
            state,
            ids,
            depth: 0,
        }
    }

    fn save(&mut self, ids: &MutantIdSet, record: Record) -> Result<(), EngineError> {
        for id in ids.iter() {
            let slot = if id == self.sentinel {
                &mut self.original
            } else {
                &mut self.records[id.index()]
            };
            if slot.is_some() {
                return Err(EngineError::DuplicateSave(id));
            }
            *slot = Some(record.clone());
        }
        Ok(())
    }

    fn drive(&mut self, mut p: Process) -> Result<(), EngineError> {
        let program = self.program;
        let table = self.table;
        while let Some(pc) = p.state.next_pc() {
            if p.ids.is_empty() {
                return Ok(());
            }
            match table.location_at(pc).filter(|e| !e.mutants.is_empty()) {
                None => {
                    let instr = program.instruction(pc).expect("valid position");
                    p.state.execute(program, Variant::original(instr));
                    self.metrics.instructions += 1;
                }
                Some(entry) => self.step_at(&mut p, entry)?,
            }
        }
        self.metrics.page_copies += p.state.page_copies();
        let record = Record::from_state(&p.state);
        if self.config.trace {
            self.trace.push(ForkEvent::Exit {
                process: p.id,
                outcome: record.outcome,
                steps: record.steps,
            });
        }
        self.save(&p.ids, record)
    }

    /// Forks `parent` for `ids` unless that exceeds the depth limit, in which
    /// case the ids are saved as aborted.
    fn fork(&mut self, parent: &Process, ids: MutantIdSet) -> Result<Option<Process>, EngineError> {
        if parent.depth >= self.config.fork_depth {
            self.metrics.aborted_forks += 1;
            self.save(&ids, Record::aborted(&parent.state))?;
            return Ok(None);
        }
        self.metrics.forks += 1;
        self.metrics.split_mutants += ids.len() as u64;
        let mut child = self.spawn(parent.state.fork_state(), ids);
        child.depth = parent.depth + 1;
        if self.config.trace {
            self.trace.push(ForkEvent::Fork {
                parent: parent.id,
                child: child.id,
                pc: parent.state.pc(),
                step: parent.state.steps(),
                ids: child.ids.iter().collect(),
            });
        }
        Ok(Some(child))
    }

    fn step_at(&mut self, p: &mut Process, entry: &'t LocationEntry) -> Result<(), EngineError> {
        let program = self.program;
        let all = VariantSet::new(program, entry);
        let v = filter_variants(&all, &p.ids, &mut self.ops);
        if v.len() == 1 {
            let only = v.members().next().expect("non-empty");
            p.state.execute(program, v.variant(only));
            self.metrics.instructions += 1;
            return Ok(());
        }
        match self.engine {
            Engine::Standard | Engine::SplitStream => {
                debug_assert!(
                    self.engine != Engine::Standard,
                    "standard runs one id per process"
                );
                let members: Vec<VariantRef<'t>> = v.members().collect();
                for &r in &members[1..] {
                    let mut ids = p.ids.clone();
                    filter_mutants(&mut ids, &v.only(r), &mut self.ops);
                    if let Some(mut child) = self.fork(p, ids)? {
                        child.state.execute(program, v.variant(r));
                        self.metrics.instructions += 1;
                        self.drive(child)?;
                    }
                }
                filter_mutants(&mut p.ids, &v.only(members[0]), &mut self.ops);
                p.state.execute(program, v.variant(members[0]));
                self.metrics.instructions += 1;
            }
            Engine::AccMut => {
                self.metrics.variant_trials += v.len() as u64;
                let state = &p.state;
                let clusters =
                    cluster_changes(v.members().map(|r| (r, state.try_variant(v.variant(r)))));
                for c in &clusters[1..] {
                    let mut ids = p.ids.clone();
                    filter_mutants(&mut ids, &class_set(&v, c), &mut self.ops);
                    if let Some(mut child) = self.fork(p, ids)? {
                        child.state.apply(program, &c.change);
                        self.metrics.instructions += 1;
                        self.drive(child)?;
                    }
                }
                let cur = &clusters[0];
                if clusters.len() > 1 {
                    filter_mutants(&mut p.ids, &class_set(&v, cur), &mut self.ops);
                }
                p.state.apply(program, &cur.change);
                self.metrics.instructions += 1;
            }
        }
        Ok(())
    }
}

fn class_set<'t>(v: &VariantSet<'t>, c: &ChangeCluster<'t>) -> VariantSet<'t> {
    VariantSet {
        ori: v.ori,
        ori_included: c.has_original(),
        mut_variants: c
            .members
            .iter()
            .filter_map(|r| match r {
                VariantRef::Mutant(m) => Some(*m),
                VariantRef::Original => None,
            })
            .collect(),
        all: v.all,
    }
}
