// SPDX-License-Identifier: Apache-2.0

//! Result files: kill matrices, metrics and fork traces.
//!
//! A matrix is CSV with header `mutant_id,test,verdict`, one row per cell,
//! tests in suite order and mutants in id order within a test.
//!
//! Metrics are one line per (test, engine) of space-separated `key=value`
//! pairs:
//!
//! ```text
//! test=t0 engine=accmut reference_steps=812 step_budget=18120 forks=9 processes=10 ...
//! ```
//!
//! Every counter is deterministic. Wall time goes to a separate timing file
//! so that metrics files can be compared byte for byte.

use std::fmt::Write as _;
use std::io;
use std::time::Duration;

use forkmut_core::engines::ForkEvent;
use forkmut_core::harness::{KillMatrix, TestMetrics, Verdict};
use forkmut_core::ir::Program;
use forkmut_core::mutgen::MutantId;

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Bad { row: usize, message: String },
}

pub fn write_matrix<W: io::Write>(matrix: &KillMatrix, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mutant_id", "test", "verdict"])?;
    for (t, name) in matrix.tests().iter().enumerate() {
        for (m, v) in matrix.row(t).iter().enumerate() {
            w.write_record([m.to_string().as_str(), name, v.name()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn matrix_to_string(matrix: &KillMatrix) -> String {
    let mut buf = Vec::new();
    write_matrix(matrix, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv of utf-8 fields")
}

/// Reads a matrix written by [`write_matrix`]. Rows must be grouped by
/// test with mutant ids counting up from 0 in each group.
pub fn read_matrix<R: io::Read>(input: R) -> Result<KillMatrix, MatrixError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers != vec!["mutant_id", "test", "verdict"] {
        return Err(MatrixError::Bad {
            row: 1,
            message: "expected header `mutant_id,test,verdict`".into(),
        });
    }
    let mut rows: Vec<(String, Vec<Verdict>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let bad = |message: String| MatrixError::Bad { row, message };
        let id: u32 = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad mutant id `{}`", &rec[0])))?;
        let verdict: Verdict = rec[2].parse().map_err(|e| bad(format!("{e}")))?;
        let test = &rec[1];
        if id == 0 {
            if rows.iter().any(|(n, _)| n == test) {
                return Err(bad(format!("test `{test}` appears twice")));
            }
            rows.push((test.to_owned(), Vec::new()));
        }
        match rows.last_mut() {
            Some((n, vs)) if n == test && vs.len() == id as usize => vs.push(verdict),
            _ => return Err(bad(format!("out of order cell ({id}, {test})"))),
        }
    }
    let mutants = rows.first().map_or(0, |(_, v)| v.len());
    let mut matrix = KillMatrix::new(mutants as u32);
    for (name, verdicts) in rows {
        if verdicts.len() != mutants {
            return Err(MatrixError::Bad {
                row: 0,
                message: format!(
                    "test `{name}` has {} mutants, expected {mutants}",
                    verdicts.len()
                ),
            });
        }
        matrix.push_row(name, verdicts);
    }
    Ok(matrix)
}

pub fn metrics_line(m: &TestMetrics) -> String {
    let e = &m.metrics;
    format!(
        "test={} engine={} reference_steps={} step_budget={} forks={} processes={} \
         aborted_forks={} split_mutants={} variant_trials={} instructions={} overhead={} \
         filter_ops={} page_copies={}",
        m.test,
        m.engine,
        m.reference_steps,
        m.step_budget,
        e.forks,
        e.processes,
        e.aborted_forks,
        e.split_mutants,
        e.variant_trials,
        e.instructions,
        e.overhead(),
        e.filter_ops,
        e.page_copies,
    )
}

/// Parses a metrics file into `(key, value)` lists, one per line.
pub fn parse_metrics(text: &str) -> Vec<Vec<(String, String)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_ascii_whitespace()
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .collect()
        })
        .collect()
}

pub fn timing_line(test: &str, engine: &str, wall: Duration) -> String {
    format!("test={test} engine={engine} wall_us={}", wall.as_micros())
}

fn ids(ids: &[MutantId]) -> String {
    let mut s = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{}", id.0).ok();
    }
    s
}

/// One line per event; the fork location is printed as `func:block:index`.
pub fn trace_lines(program: &Program, test: &str, events: &[ForkEvent]) -> String {
    let mut s = String::new();
    for ev in events {
        match ev {
            ForkEvent::Fork {
                parent,
                child,
                pc,
                step,
                ids: set,
            } => {
                let f = program.function(pc.func);
                writeln!(
                    s,
                    "test={test} fork parent={parent} child={child} at={}:{}:{} step={step} ids={}",
                    f.name,
                    f.blocks[pc.block.0 as usize].label,
                    pc.index,
                    ids(set)
                )
                .ok();
            }
            ForkEvent::Exit {
                process,
                outcome,
                steps,
            } => {
                writeln!(
                    s,
                    "test={test} exit process={process} outcome={} steps={steps}",
                    outcome.to_string().replace(' ', ":")
                )
                .ok();
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trips() {
        let mut m = KillMatrix::new(3);
        m.push_row(
            "a",
            vec![
                Verdict::Survived,
                Verdict::KilledOutput,
                Verdict::KilledTrap,
            ],
        );
        m.push_row(
            "b",
            vec![
                Verdict::KilledTimeout,
                Verdict::KilledExit,
                Verdict::AbortedDepth,
            ],
        );
        let text = matrix_to_string(&m);
        assert!(text.starts_with("mutant_id,test,verdict\n0,a,survived\n"));
        assert_eq!(read_matrix(text.as_bytes()).unwrap(), m);
    }

    #[test]
    fn rejects_shuffled_rows() {
        let text = "mutant_id,test,verdict\n1,a,survived\n0,a,survived\n";
        assert!(read_matrix(text.as_bytes()).is_err());
    }
}
