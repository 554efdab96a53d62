// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use forkmut_core::corpus::{generate_case, CorpusParams};
use forkmut_core::engines::Engine;
use forkmut_core::harness::{ratio, HarnessError, KillMatrix, RunConfig};
use forkmut_core::ir::{parse_program, validate, Program};
use forkmut_core::mutgen::{generate_mutants, MutationTable, OperatorSet};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::export::{
    matrix_to_string, metrics_line, parse_metrics, read_matrix, timing_line, trace_lines,
};
use crate::runner::{run_parallel, EngineResult};
use crate::suite::{load_suite, write_suite};
use crate::tablefile::{load_table, save_table};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_SUBJECT: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "forkmut",
    version,
    about = "Mutation analysis with forked execution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the mutation table of a program.
    Mutate {
        program: PathBuf,
        /// Comma-separated operator tags, `all` or `none`.
        #[arg(long, default_value = "all")]
        operators: String,
        /// Table file to write [default: PROGRAM with extension `.table`].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a suite against every mutant.
    Run(RunArgs),
    /// Compare two kill matrices cell by cell.
    Diff { left: PathBuf, right: PathBuf },
    /// Print measured AccMut/SSE and SSE/standard ratios from a run directory.
    Stats { dir: PathBuf },
    /// Write seeded random programs with suites.
    GenCorpus(GenArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub program: PathBuf,
    pub suite: PathBuf,
    /// Table file from `mutate`; generated from `--operators` when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    pub operators: String,
    /// `standard`, `sse`, `accmut`, a comma-separated list, or `all`.
    #[arg(long, default_value = "all")]
    pub engine: String,
    /// Mutant step budget as a multiple of the reference run's steps.
    #[arg(long, default_value_t = 10)]
    pub budget_factor: u64,
    #[arg(long, default_value_t = 64)]
    pub fork_depth: u32,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "forkmut-out")]
    pub out: PathBuf,
    /// Write the fork tree of every test to `trace-ENGINE.txt`.
    #[arg(long)]
    pub trace_forks: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Bias generation towards state-equivalent mutants.
    #[arg(long)]
    pub crafted: bool,
    #[arg(long, default_value_t = 200)]
    pub max_instructions: usize,
    #[arg(long, default_value_t = 50)]
    pub min_mutants: u32,
    #[arg(long, default_value_t = 4)]
    pub tests: usize,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| fail(EXIT_SUBJECT, format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| {
        fail(
            EXIT_SUBJECT,
            format!("cannot write {}: {e}", path.display()),
        )
    })
}

pub fn load_program(path: &Path) -> Result<Program, Failure> {
    let text = read(path)?;
    let program =
        parse_program(&text).map_err(|e| fail(EXIT_SUBJECT, format!("{}:{e}", path.display())))?;
    let diags = validate(&program);
    if !diags.is_empty() {
        let mut msg = format!("{} does not validate:", path.display());
        for d in diags {
            write!(msg, "\n  {d}").ok();
        }
        return Err(fail(EXIT_SUBJECT, msg));
    }
    Ok(program)
}

fn operators(text: &str) -> Result<OperatorSet, Failure> {
    OperatorSet::parse(text).map_err(|e| fail(EXIT_USAGE, e.to_string()))
}

pub fn parse_engines(text: &str) -> Result<Vec<Engine>, Failure> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Engine::ALL.to_vec());
    }
    let mut out = Vec::new();
    for w in text.split(',') {
        let e: Engine = w
            .trim()
            .parse()
            .map_err(|e| fail(EXIT_USAGE, format!("{e}")))?;
        if !out.contains(&e) {
            out.push(e);
        }
    }
    Ok(out)
}

fn summary(table: &MutationTable) -> String {
    let mut s = format!("mutants {}\n", table.mutant_count());
    for (op, n) in table.per_operator_counts() {
        writeln!(s, "  {:<5} {n}", op.tag()).ok();
    }
    writeln!(s, "max-u {}", table.max_u()).ok();
    s
}

fn cmd_mutate(program: &Path, ops: &str, out: Option<PathBuf>) -> Result<String, Failure> {
    let ops = operators(ops)?;
    let p = load_program(program)?;
    let table = generate_mutants(&p, ops);
    let out = out.unwrap_or_else(|| program.with_extension("table"));
    write(&out, save_table(&table))?;
    Ok(format!("wrote {}\n{}", out.display(), summary(&table)))
}

fn harness_failure(e: HarnessError) -> Failure {
    let code = if e.is_invariant_violation() {
        EXIT_INVARIANT
    } else {
        EXIT_SUBJECT
    };
    fail(code, e.to_string())
}

fn cmd_run(a: RunArgs) -> Result<String, Failure> {
    let engines = parse_engines(&a.engine)?;
    let ops = operators(&a.operators)?;
    if a.jobs == 0 {
        return Err(fail(EXIT_USAGE, "--jobs must be at least 1"));
    }
    let program = load_program(&a.program)?;
    let tests = load_suite(&a.suite).map_err(|e| fail(EXIT_SUBJECT, e.to_string()))?;
    let table = match &a.table {
        Some(path) => load_table(&read(path)?, &program)
            .map_err(|e| fail(EXIT_SUBJECT, format!("{}: {e}", path.display())))?,
        None => generate_mutants(&program, ops),
    };
    let config = RunConfig {
        budget_factor: a.budget_factor,
        fork_depth: a.fork_depth,
        trace: a.trace_forks,
        ..RunConfig::default()
    };

    let mut results: Vec<EngineResult> = Vec::new();
    for &engine in &engines {
        let r = run_parallel(&program, &table, &tests, engine, &config, a.jobs)
            .map_err(harness_failure)?;
        results.push(r);
    }

    let mut comparison = String::new();
    let mut disagreements = 0;
    for pair in results.windows(2) {
        let (l, r) = (&pair[0], &pair[1]);
        let diffs = l
            .matrix
            .compare(&r.matrix)
            .map_err(|e| fail(EXIT_INVARIANT, e.to_string()))?;
        writeln!(
            comparison,
            "{} vs {}: {} differing cells",
            l.engine,
            r.engine,
            diffs.len()
        )
        .ok();
        for d in &diffs {
            writeln!(
                comparison,
                "  {} {} {} {}",
                d.mutant, d.test, d.left, d.right
            )
            .ok();
        }
        disagreements += diffs.len();
    }

    fs::create_dir_all(&a.out).map_err(|e| {
        fail(
            EXIT_SUBJECT,
            format!("cannot create {}: {e}", a.out.display()),
        )
    })?;
    let mut report = String::new();
    for r in &results {
        let name = r.engine.name();
        write(
            &a.out.join(format!("matrix-{name}.csv")),
            matrix_to_string(&r.matrix),
        )?;
        let mut metrics = String::new();
        for m in &r.metrics {
            writeln!(metrics, "{}", metrics_line(m)).ok();
        }
        write(&a.out.join(format!("metrics-{name}.txt")), metrics)?;
        let mut timing = String::new();
        for (test, wall) in &r.wall {
            writeln!(timing, "{}", timing_line(test, name, *wall)).ok();
        }
        write(&a.out.join(format!("timing-{name}.txt")), timing)?;
        if a.trace_forks {
            let mut trace = String::new();
            for (test, events) in &r.traces {
                trace.push_str(&trace_lines(&program, test, events));
            }
            write(&a.out.join(format!("trace-{name}.txt")), trace)?;
        }
        let m = &r.matrix;
        writeln!(
            report,
            "{name}: {} of {} mutants killed over {} tests (score {:.4})",
            m.killed_count(),
            m.mutant_count(),
            m.tests().len(),
            m.score()
        )
        .ok();
    }
    if results.len() > 1 {
        write(&a.out.join("comparison.txt"), &comparison)?;
        report.push_str(&comparison);
    }
    if disagreements > 0 {
        return Err(fail(
            EXIT_INVARIANT,
            format!("{report}engines disagree on {disagreements} cells"),
        ));
    }
    // Reference failures do not depend on the engine.
    if let Some(r) = results.first().filter(|r| !r.skipped.is_empty()) {
        let mut msg = format!("{report}skipped tests whose reference run failed:");
        for e in &r.skipped {
            write!(msg, "\n  {e}").ok();
        }
        return Err(fail(EXIT_SUBJECT, msg));
    }
    Ok(report)
}

fn cmd_diff(left: &Path, right: &Path) -> Result<String, Failure> {
    let load = |p: &Path| -> Result<KillMatrix, Failure> {
        let f = fs::File::open(p)
            .map_err(|e| fail(EXIT_SUBJECT, format!("cannot read {}: {e}", p.display())))?;
        read_matrix(f).map_err(|e| fail(EXIT_SUBJECT, format!("{}: {e}", p.display())))
    };
    let (l, r) = (load(left)?, load(right)?);
    let diffs = l
        .compare(&r)
        .map_err(|e| fail(EXIT_SUBJECT, e.to_string()))?;
    let mut s = String::new();
    for d in &diffs {
        writeln!(s, "{} {} {} {}", d.mutant, d.test, d.left, d.right).ok();
    }
    if diffs.is_empty() {
        Ok("matrices are identical\n".into())
    } else {
        Err(fail(
            EXIT_INVARIANT,
            format!("{s}{} differing cells", diffs.len()),
        ))
    }
}

const RATIO_KEYS: [&str; 3] = ["processes", "forks", "instructions"];

fn cmd_stats(dir: &Path) -> Result<String, Failure> {
    // engine -> test -> key -> value
    let mut data: BTreeMap<&str, BTreeMap<String, BTreeMap<String, u64>>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for e in Engine::ALL {
        let path = dir.join(format!("metrics-{}.txt", e.name()));
        if !path.exists() {
            continue;
        }
        let per_test = data.entry(e.name()).or_default();
        for rec in parse_metrics(&read(&path)?) {
            let mut test = None;
            let mut values = BTreeMap::new();
            for (k, v) in rec {
                if k == "test" {
                    test = Some(v);
                } else if let Ok(n) = v.parse() {
                    values.insert(k, n);
                }
            }
            let test = test.ok_or_else(|| {
                fail(
                    EXIT_SUBJECT,
                    format!("{}: record without test", path.display()),
                )
            })?;
            if !order.contains(&test) {
                order.push(test.clone());
            }
            per_test.insert(test, values);
        }
    }
    if data.is_empty() {
        return Err(fail(
            EXIT_SUBJECT,
            format!("no metrics files in {}", dir.display()),
        ));
    }
    let mut s = String::from("measured ratios (not targets)\n");
    for (num, den) in [("accmut", "sse"), ("sse", "standard")] {
        let (Some(a), Some(b)) = (data.get(num), data.get(den)) else {
            continue;
        };
        writeln!(s, "{num}/{den}").ok();
        let mut total = [(0u64, 0u64); 3];
        for test in &order {
            let (Some(x), Some(y)) = (a.get(test), b.get(test)) else {
                continue;
            };
            write!(s, "  {test}").ok();
            for (i, k) in RATIO_KEYS.iter().enumerate() {
                let (n, d) = (
                    x.get(*k).copied().unwrap_or(0),
                    y.get(*k).copied().unwrap_or(0),
                );
                total[i].0 += n;
                total[i].1 += d;
                write!(s, " {k}={:.4}", ratio(n, d)).ok();
            }
            s.push('\n');
        }
        write!(s, "  total").ok();
        for (i, k) in RATIO_KEYS.iter().enumerate() {
            write!(s, " {k}={:.4}", ratio(total[i].0, total[i].1)).ok();
        }
        s.push('\n');
    }
    Ok(s)
}

fn cmd_gen_corpus(a: GenArgs) -> Result<String, Failure> {
    let params = CorpusParams {
        max_instructions: a.max_instructions,
        min_mutants: a.min_mutants,
        tests: a.tests,
        crafted: a.crafted,
        ..CorpusParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut cases = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let case = generate_case(&mut rng, &params, 200).ok_or_else(|| {
            fail(
                EXIT_SUBJECT,
                format!("program {i}: no candidate met the size limits"),
            )
        })?;
        cases.push(case);
    }
    fs::create_dir_all(&a.out).map_err(|e| {
        fail(
            EXIT_SUBJECT,
            format!("cannot create {}: {e}", a.out.display()),
        )
    })?;
    for (i, c) in cases.iter().enumerate() {
        let stem = format!("prog{i:02}");
        write(&a.out.join(format!("{stem}.ir")), &c.source)?;
        write_suite(
            &a.out.join(format!("{stem}.suite")),
            &format!("{stem}-fixtures"),
            &c.tests,
        )
        .map_err(|e| fail(EXIT_SUBJECT, format!("cannot write suite {stem}: {e}")))?;
    }
    Ok(format!(
        "wrote {} programs to {}\n",
        cases.len(),
        a.out.display()
    ))
}

pub fn execute(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Mutate {
            program,
            operators,
            out,
        } => cmd_mutate(&program, &operators, out),
        Command::Run(a) => cmd_run(a),
        Command::Diff { left, right } => cmd_diff(&left, &right),
        Command::Stats { dir } => cmd_stats(&dir),
        Command::GenCorpus(a) => cmd_gen_corpus(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            e.print().ok();
            return code;
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            std::io::stdout().flush().ok();
            EXIT_OK
        }
        Err(f) => {
            eprintln!("forkmut: {}", f.message);
            f.code
        }
    }
}
