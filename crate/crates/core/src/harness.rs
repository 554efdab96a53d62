// SPDX-License-Identifier: Apache-2.0

//! Test cases, verdicts and the kill matrix.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::engines::{
    run_engine, Engine, EngineConfig, EngineError, EngineMetrics, ForkEvent, Outcome, Record,
};
use crate::ir::{Program, Value};
use crate::mutgen::{MutantId, MutationTable};
use crate::runtime::{Limits, MachineState, StartError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    /// Whatever the unmutated program does.
    Reference,
    /// Checked against the unmutated program before any mutant runs.
    Explicit {
        output: Option<Vec<u8>>,
        exit: Option<Value>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    pub args: Vec<Value>,
    /// Files present before the run, by integer name.
    pub fixtures: Vec<(Value, Vec<u8>)>,
    pub expected: Expectation,
}

impl TestCase {
    pub fn new(name: impl Into<String>, args: Vec<Value>) -> Self {
        TestCase {
            name: name.into(),
            args,
            fixtures: Vec::new(),
            expected: Expectation::Reference,
        }
    }

    pub fn initial_state(
        &self,
        program: &Program,
        limits: Limits,
    ) -> Result<MachineState, StartError> {
        let mut s = MachineState::new(program, &self.args, limits)?;
        for (file, bytes) in &self.fixtures {
            s = s.with_file(*file, bytes);
        }
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Survived,
    KilledOutput,
    KilledExit,
    KilledTrap,
    KilledTimeout,
    AbortedDepth,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [
        Verdict::Survived,
        Verdict::KilledOutput,
        Verdict::KilledExit,
        Verdict::KilledTrap,
        Verdict::KilledTimeout,
        Verdict::AbortedDepth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Survived => "survived",
            Verdict::KilledOutput => "killed-output",
            Verdict::KilledExit => "killed-exit",
            Verdict::KilledTrap => "killed-trap",
            Verdict::KilledTimeout => "killed-timeout",
            Verdict::AbortedDepth => "aborted-depth",
        }
    }

    pub fn is_killed(self) -> bool {
        !matches!(self, Verdict::Survived | Verdict::AbortedDepth)
    }

    /// Compares a mutant's record with the reference record. Checks run in
    /// a fixed order: abort, timeout, trap, output, exit code.
    pub fn derive(reference: &Record, mutant: &Record) -> Verdict {
        match mutant.outcome {
            Outcome::AbortedDepth => Verdict::AbortedDepth,
            Outcome::TimedOut => Verdict::KilledTimeout,
            Outcome::Trapped(_) => Verdict::KilledTrap,
            Outcome::Exited(_) if mutant.output != reference.output => Verdict::KilledOutput,
            Outcome::Exited(_) if mutant.outcome != reference.outcome => Verdict::KilledExit,
            Outcome::Exited(_) => Verdict::Survived,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown verdict `{0}`")]
pub struct UnknownVerdict(pub String);

impl FromStr for Verdict {
    type Err = UnknownVerdict;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verdict::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| UnknownVerdict(s.into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    /// Mutant step budget: `budget_factor * reference steps + budget_floor`.
    pub budget_factor: u64,
    pub budget_floor: u64,
    /// Step limit for the unmutated reference run.
    pub reference_step_cap: u64,
    pub stack_limit: u32,
    pub fork_depth: u32,
    pub trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            budget_factor: 10,
            budget_floor: 10_000,
            reference_step_cap: 100_000_000,
            stack_limit: 256,
            fork_depth: 64,
            trace: false,
        }
    }
}

impl RunConfig {
    pub fn budget(&self, reference_steps: u64) -> u64 {
        self.budget_factor
            .saturating_mul(reference_steps)
            .saturating_add(self.budget_floor)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum HarnessError {
    #[error("test `{test}`: {source}")]
    Start { test: String, source: StartError },
    #[error("test `{test}`: reference run ended with {outcome}")]
    ReferenceFailed { test: String, outcome: Outcome },
    #[error("test `{test}`: reference run does not meet the expectation ({detail})")]
    ExpectationMismatch { test: String, detail: &'static str },
    #[error("test `{test}` ({engine}): {source}")]
    Engine {
        test: String,
        engine: Engine,
        source: EngineError,
    },
    #[error("test `{test}` ({engine}): unmutated record differs from the reference run")]
    OriginalMismatch { test: String, engine: Engine },
}

impl HarnessError {
    /// Whether the error points at an engine bug rather than at the inputs.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            HarnessError::Engine { .. } | HarnessError::OriginalMismatch { .. }
        )
    }
}

/// Runs the unmutated program for `test` and checks explicit expectations.
pub fn reference_run(
    program: &Program,
    test: &TestCase,
    config: &RunConfig,
) -> Result<Record, HarnessError> {
    let limits = Limits {
        step_limit: config.reference_step_cap,
        stack_limit: config.stack_limit,
    };
    let mut s = test
        .initial_state(program, limits)
        .map_err(|source| HarnessError::Start {
            test: test.name.clone(),
            source,
        })?;
    s.run(program);
    let record = Record::from_state(&s);
    if !matches!(record.outcome, Outcome::Exited(_)) {
        return Err(HarnessError::ReferenceFailed {
            test: test.name.clone(),
            outcome: record.outcome,
        });
    }
    if let Expectation::Explicit { output, exit } = &test.expected {
        let mismatch = |detail| HarnessError::ExpectationMismatch {
            test: test.name.clone(),
            detail,
        };
        if output.as_ref().is_some_and(|o| *o != record.output) {
            return Err(mismatch("output"));
        }
        if exit.is_some_and(|c| record.outcome != Outcome::Exited(c)) {
            return Err(mismatch("exit code"));
        }
    }
    Ok(record)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestMetrics {
    pub test: String,
    pub engine: Engine,
    pub reference_steps: u64,
    pub step_budget: u64,
    pub metrics: EngineMetrics,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestRun {
    pub reference: Record,
    /// Indexed by mutant id.
    pub verdicts: Vec<Verdict>,
    pub metrics: TestMetrics,
    pub trace: Vec<ForkEvent>,
}

/// Runs every mutant against one test.
pub fn run_test(
    program: &Program,
    table: &MutationTable,
    test: &TestCase,
    engine: Engine,
    config: &RunConfig,
) -> Result<TestRun, HarnessError> {
    let reference = reference_run(program, test, config)?;
    let budget = config.budget(reference.steps);
    let limits = Limits {
        step_limit: budget,
        stack_limit: config.stack_limit,
    };
    let initial = test
        .initial_state(program, limits)
        .map_err(|source| HarnessError::Start {
            test: test.name.clone(),
            source,
        })?;
    let engine_config = EngineConfig {
        fork_depth: config.fork_depth,
        trace: config.trace,
    };
    let run = run_engine(engine, program, table, &initial, &engine_config).map_err(|source| {
        HarnessError::Engine {
            test: test.name.clone(),
            engine,
            source,
        }
    })?;
    if run.original != reference {
        return Err(HarnessError::OriginalMismatch {
            test: test.name.clone(),
            engine,
        });
    }
    let verdicts = run
        .records
        .iter()
        .map(|r| Verdict::derive(&reference, r))
        .collect();
    Ok(TestRun {
        verdicts,
        metrics: TestMetrics {
            test: test.name.clone(),
            engine,
            reference_steps: reference.steps,
            step_budget: budget,
            metrics: run.metrics,
        },
        reference,
        trace: run.trace,
    })
}

/// Verdicts of every mutant under every test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KillMatrix {
    mutants: u32,
    tests: Vec<String>,
    /// One row per test, indexed by mutant id.
    rows: Vec<Vec<Verdict>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("matrix shapes differ: {left_tests}x{left_mutants} vs {right_tests}x{right_mutants}")]
pub struct DimensionMismatch {
    pub left_tests: usize,
    pub left_mutants: u32,
    pub right_tests: usize,
    pub right_mutants: u32,
}

/// A cell where two matrices disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub test: String,
    pub mutant: MutantId,
    pub left: Verdict,
    pub right: Verdict,
}

impl KillMatrix {
    pub fn new(mutants: u32) -> Self {
        KillMatrix {
            mutants,
            tests: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Appends a test row. Panics if the row length is not the mutant count.
    pub fn push_row(&mut self, test: impl Into<String>, verdicts: Vec<Verdict>) {
        assert_eq!(verdicts.len(), self.mutants as usize, "row length");
        self.tests.push(test.into());
        self.rows.push(verdicts);
    }

    pub fn mutant_count(&self) -> u32 {
        self.mutants
    }

    pub fn tests(&self) -> &[String] {
        &self.tests
    }

    pub fn row(&self, test: usize) -> &[Verdict] {
        &self.rows[test]
    }

    pub fn get(&self, test: usize, mutant: MutantId) -> Verdict {
        self.rows[test][mutant.index()]
    }

    pub fn is_killed(&self, mutant: MutantId) -> bool {
        self.rows.iter().any(|r| r[mutant.index()].is_killed())
    }

    pub fn killed_count(&self) -> u32 {
        (0..self.mutants)
            .filter(|&m| self.is_killed(MutantId(m)))
            .count() as u32
    }

    /// Killed mutants over all mutants; 1.0 when there are none.
    pub fn score(&self) -> f64 {
        if self.mutants == 0 {
            1.0
        } else {
            self.killed_count() as f64 / self.mutants as f64
        }
    }

    /// Cells that differ, in test then mutant order.
    pub fn compare(&self, other: &KillMatrix) -> Result<Vec<Disagreement>, DimensionMismatch> {
        if self.mutants != other.mutants || self.tests != other.tests {
            return Err(DimensionMismatch {
                left_tests: self.tests.len(),
                left_mutants: self.mutants,
                right_tests: other.tests.len(),
                right_mutants: other.mutants,
            });
        }
        let mut out = Vec::new();
        for (t, (a, b)) in self.rows.iter().zip(&other.rows).enumerate() {
            for (m, (l, r)) in a.iter().zip(b).enumerate() {
                if l != r {
                    out.push(Disagreement {
                        test: self.tests[t].clone(),
                        mutant: MutantId(m as u32),
                        left: *l,
                        right: *r,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteRun {
    pub matrix: KillMatrix,
    pub metrics: Vec<TestMetrics>,
}

/// Runs `tests` in order with one engine.
pub fn run_suite(
    program: &Program,
    table: &MutationTable,
    tests: &[TestCase],
    engine: Engine,
    config: &RunConfig,
) -> Result<SuiteRun, HarnessError> {
    let mut matrix = KillMatrix::new(table.mutant_count());
    let mut metrics = Vec::with_capacity(tests.len());
    for t in tests {
        let run = run_test(program, table, t, engine, config)?;
        matrix.push_row(t.name.clone(), run.verdicts);
        metrics.push(run.metrics);
    }
    Ok(SuiteRun { matrix, metrics })
}

/// `num / den`, with `0 / 0 = 1` and `n / 0 = inf`.
pub fn ratio(num: u64, den: u64) -> f64 {
    match (num, den) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => num as f64 / den as f64,
    }
}

impl EngineMetrics {
    /// Work that is not program execution: filter operations plus variant
    /// trials.
    pub fn overhead(&self) -> u64 {
        self.filter_ops + self.variant_trials
    }

    pub fn add(&mut self, o: &EngineMetrics) {
        self.forks += o.forks;
        self.processes += o.processes;
        self.aborted_forks += o.aborted_forks;
        self.split_mutants += o.split_mutants;
        self.variant_trials += o.variant_trials;
        self.instructions += o.instructions;
        self.filter_ops += o.filter_ops;
        self.page_copies += o.page_copies;
    }
}
