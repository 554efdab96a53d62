// SPDX-License-Identifier: Apache-2.0

//! Runs a suite over worker threads. Results are assembled by test index,
//! so the output does not depend on the number of workers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use forkmut_core::engines::{Engine, ForkEvent};
use forkmut_core::harness::{run_test, HarnessError, KillMatrix, RunConfig, TestCase, TestMetrics};
use forkmut_core::ir::Program;
use forkmut_core::mutgen::MutationTable;

#[derive(Debug)]
pub struct EngineResult {
    pub engine: Engine,
    /// Rows for the tests whose reference run succeeded.
    pub matrix: KillMatrix,
    pub metrics: Vec<TestMetrics>,
    pub traces: Vec<(String, Vec<ForkEvent>)>,
    pub wall: Vec<(String, Duration)>,
    /// Tests skipped because the unmutated program failed them.
    pub skipped: Vec<HarnessError>,
}

type Slot = Option<(
    Result<forkmut_core::harness::TestRun, HarnessError>,
    Duration,
)>;

/// Runs `tests` with `engine` on `jobs` threads. An invariant violation in
/// any test is returned as the error; other failures skip the test.
pub fn run_parallel(
    program: &Program,
    table: &MutationTable,
    tests: &[TestCase],
    engine: Engine,
    config: &RunConfig,
    jobs: usize,
) -> Result<EngineResult, HarnessError> {
    let slots: Mutex<Vec<Slot>> = Mutex::new((0..tests.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(test) = tests.get(i) else { break };
        let start = Instant::now();
        let run = run_test(program, table, test, engine, config);
        let wall = start.elapsed();
        slots.lock().expect("worker panicked")[i] = Some((run, wall));
    };
    let jobs = jobs.clamp(1, tests.len().max(1));
    if jobs == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(work);
            }
        });
    }

    let mut out = EngineResult {
        engine,
        matrix: KillMatrix::new(table.mutant_count()),
        metrics: Vec::new(),
        traces: Vec::new(),
        wall: Vec::new(),
        skipped: Vec::new(),
    };
    let slots = slots.into_inner().expect("worker panicked");
    for (test, slot) in tests.iter().zip(slots) {
        let (run, wall) = slot.expect("every test was run");
        match run {
            Ok(run) => {
                out.matrix.push_row(test.name.clone(), run.verdicts);
                out.metrics.push(run.metrics);
                out.traces.push((test.name.clone(), run.trace));
                out.wall.push((test.name.clone(), wall));
            }
            Err(e) if e.is_invariant_violation() => return Err(e),
            Err(e) => out.skipped.push(e),
        }
    }
    Ok(out)
}
