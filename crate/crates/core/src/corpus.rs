// SPDX-License-Identifier: Apache-2.0

//! Seeded random subject programs and test suites.
//!
//! Generated programs always validate and call graphs are acyclic; every
//! loop is a counted loop whose counter only the loop itself writes, so the
//! unmutated program terminates. Tests are kept only if the reference run
//! exits normally within [`CorpusParams::reference_cap`] steps.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::harness::{reference_run, RunConfig, TestCase};
use crate::ir::{parse_program, validate, Program};
use crate::mutgen::{generate_mutants, MutationTable, OperatorSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusParams {
    pub max_instructions: usize,
    /// Under the full operator set.
    pub min_mutants: u32,
    pub tests: usize,
    pub reference_cap: u64,
    /// Bias towards instructions whose mutants often make the same change
    /// as the original (repeated operands, comparisons, small constants).
    pub crafted: bool,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            max_instructions: 200,
            min_mutants: 50,
            tests: 4,
            reference_cap: 20_000,
            crafted: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedCase {
    pub source: String,
    pub program: Program,
    pub table: MutationTable,
    pub tests: Vec<TestCase>,
}

struct Rng<'r, R: RngCore>(&'r mut R);

impl<R: RngCore> Rng<'_, R> {
    fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n.max(1)
    }

    fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    fn chance(&mut self, percent: u64) -> bool {
        self.below(100) < percent
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }
}

const MEMORY: i64 = 16;

struct Helper {
    name: String,
    arity: u32,
}

struct FnGen<'h> {
    lines: Vec<String>,
    next_reg: u32,
    defined: Vec<u32>,
    protected: Vec<u32>,
    next_label: u32,
    helpers: &'h [Helper],
    crafted: bool,
}

impl<'h> FnGen<'h> {
    fn new(arity: u32, helpers: &'h [Helper], crafted: bool) -> Self {
        FnGen {
            lines: Vec::new(),
            next_reg: arity,
            defined: (0..arity).collect(),
            protected: Vec::new(),
            next_label: 0,
            helpers,
            crafted,
        }
    }

    fn emit(&mut self, line: String) {
        self.lines.push(line);
    }

    fn fresh(&mut self) -> u32 {
        let r = self.next_reg;
        self.next_reg += 1;
        r
    }

    fn label(&mut self, stem: &str) -> String {
        self.next_label += 1;
        format!("{stem}{}", self.next_label)
    }

    fn start_block(&mut self, label: &str) {
        self.lines.push(format!("{label}:"));
    }

    fn operand<R: RngCore>(&self, rng: &mut Rng<'_, R>) -> String {
        if self.defined.is_empty() || rng.chance(25) {
            format!("{}", rng.range(-4, 9))
        } else {
            format!("r{}", rng.pick(&self.defined))
        }
    }

    fn reg<R: RngCore>(&self, rng: &mut Rng<'_, R>) -> String {
        format!("r{}", rng.pick(&self.defined))
    }

    /// A destination: a new register when `allow_new`, else an existing
    /// unprotected one.
    fn dst<R: RngCore>(&mut self, rng: &mut Rng<'_, R>, allow_new: bool) -> Option<u32> {
        let free: Vec<u32> = self
            .defined
            .iter()
            .copied()
            .filter(|r| !self.protected.contains(r))
            .collect();
        if allow_new && (free.is_empty() || rng.chance(60)) {
            Some(self.fresh())
        } else if free.is_empty() {
            None
        } else {
            Some(*rng.pick(&free))
        }
    }

    fn define(&mut self, r: u32) {
        if !self.defined.contains(&r) {
            self.defined.push(r);
        }
    }

    fn binary_rhs<R: RngCore>(&self, rng: &mut Rng<'_, R>, op: &str, lhs: &str) -> String {
        match op {
            "arith.div" | "arith.rem" => format!("{}", rng.range(1, 7)),
            "shift.shl" | "shift.lshr" | "shift.ashr" => format!("{}", rng.range(0, 6)),
            _ if self.crafted && rng.chance(55) => String::from(lhs),
            _ => self.operand(rng),
        }
    }

    fn simple<R: RngCore>(&mut self, rng: &mut Rng<'_, R>, allow_new: bool) {
        let Some(d) = self.dst(rng, allow_new) else {
            return;
        };
        let roll = rng.below(100);
        let line = if self.defined.is_empty() || roll < 12 {
            let v = if self.crafted {
                rng.range(0, 2)
            } else {
                rng.range(-5, 20)
            };
            format!("r{d} = const {v}")
        } else if roll < 82 {
            const ARITH: [&str; 5] = [
                "arith.add",
                "arith.sub",
                "arith.mul",
                "arith.div",
                "arith.rem",
            ];
            const LOGIC: [&str; 3] = ["logic.and", "logic.or", "logic.xor"];
            const SHIFT: [&str; 3] = ["shift.shl", "shift.lshr", "shift.ashr"];
            const ICMP: [&str; 6] = [
                "icmp.eq", "icmp.ne", "icmp.lt", "icmp.le", "icmp.gt", "icmp.ge",
            ];
            let family: &[&str] = match rng.below(if self.crafted { 8 } else { 10 }) {
                0..=4 => &ARITH,
                5 => &LOGIC,
                6 => &SHIFT,
                _ => &ICMP,
            };
            let family = if self.crafted && rng.chance(30) {
                &ICMP[..]
            } else {
                family
            };
            let op = *rng.pick(family);
            let lhs = self.reg(rng);
            let rhs = self.binary_rhs(rng, op, &lhs);
            format!("r{d} = {op} {lhs} {rhs}")
        } else if roll < 90 {
            format!("r{d} = load {}", rng.range(0, MEMORY - 1))
        } else if !self.helpers.is_empty() {
            let h = rng.pick(self.helpers);
            let args: Vec<String> = (0..h.arity).map(|_| self.operand(rng)).collect();
            let name = h.name.clone();
            format!("r{d} = call {name} {}", args.join(" "))
        } else {
            let lhs = self.reg(rng);
            format!("r{d} = arith.add {lhs} 1")
        };
        self.emit(line);
        self.define(d);
    }

    fn statement<R: RngCore>(&mut self, rng: &mut Rng<'_, R>, allow_new: bool) {
        let roll = rng.below(100);
        if roll < 10 && !self.defined.is_empty() {
            let v = self.operand(rng);
            self.emit(format!("store {} {v}", rng.range(0, MEMORY - 1)));
        } else if roll < 18 && !self.defined.is_empty() {
            let v = self.reg(rng);
            self.emit(format!("print {v}"));
        } else {
            self.simple(rng, allow_new);
        }
    }

    fn straight<R: RngCore>(&mut self, rng: &mut Rng<'_, R>, n: u64, allow_new: bool) {
        for _ in 0..n {
            self.statement(rng, allow_new);
        }
    }

    fn diamond<R: RngCore>(&mut self, rng: &mut Rng<'_, R>) {
        let c = self.fresh();
        let lhs = self.reg(rng);
        let rhs = self.operand(rng);
        let op = rng.pick(&["icmp.lt", "icmp.eq", "icmp.gt", "icmp.ne"]);
        self.emit(format!("r{c} = {op} {lhs} {rhs}"));
        self.define(c);
        let (t, e, j) = (self.label("then"), self.label("else"), self.label("join"));
        self.emit(format!("br.cond r{c} {t} {e}"));
        for l in [&t, &e] {
            self.start_block(l);
            let n = 1 + rng.below(3);
            self.straight(rng, n, false);
            self.emit(format!("br {j}"));
        }
        self.start_block(&j);
    }

    fn counted_loop<R: RngCore>(&mut self, rng: &mut Rng<'_, R>, max_trips: i64) {
        let (i, t) = (self.fresh(), self.fresh());
        self.emit(format!("r{i} = const 0"));
        self.define(i);
        let (h, b, x) = (self.label("head"), self.label("body"), self.label("exit"));
        self.emit(format!("br {h}"));
        self.start_block(&h);
        self.emit(format!("r{t} = icmp.lt r{i} {}", rng.range(1, max_trips)));
        self.define(t);
        self.emit(format!("br.cond r{t} {b} {x}"));
        self.start_block(&b);
        self.protected.extend([i, t]);
        let n = 2 + rng.below(4);
        self.straight(rng, n, false);
        self.protected.retain(|r| *r != i && *r != t);
        self.emit(format!("r{i} = arith.add r{i} 1"));
        self.emit(format!("br {h}"));
        self.start_block(&x);
    }

    fn finish<R: RngCore>(&mut self, rng: &mut Rng<'_, R>, name: &str, arity: u32) -> String {
        let ret = if self.defined.is_empty() {
            String::from("ret 0")
        } else {
            format!("ret {}", self.reg(rng))
        };
        self.emit(ret);
        let mut out = format!("func {name}/{arity} {{\n");
        for (k, l) in self.lines.iter().enumerate() {
            if k > 0 && !l.ends_with(':') {
                out.push_str("  ");
            }
            out.push_str(l);
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }
}

fn helper_source<R: RngCore>(
    rng: &mut Rng<'_, R>,
    h: &Helper,
    callees: &[Helper],
    crafted: bool,
) -> String {
    let mut g = FnGen::new(h.arity, callees, crafted);
    g.start_block("entry");
    let n = 3 + rng.below(5);
    g.straight(rng, n, true);
    if rng.chance(40) {
        g.diamond(rng);
    }
    if rng.chance(35) {
        g.counted_loop(rng, 4);
    }
    let n = 1 + rng.below(3);
    g.straight(rng, n, true);
    g.finish(rng, &h.name, h.arity)
}

fn main_source<R: RngCore>(
    rng: &mut Rng<'_, R>,
    arity: u32,
    helpers: &[Helper],
    crafted: bool,
) -> String {
    let mut g = FnGen::new(arity, helpers, crafted);
    g.start_block("entry");
    let n = 3 + rng.below(5);
    g.straight(rng, n, true);
    if rng.chance(50) {
        // read one byte of fixture file 0 and copy a value into file 1
        let (h, b, w) = (g.fresh(), g.fresh(), g.fresh());
        g.emit(format!("r{h} = call fs_open 0"));
        g.emit(format!("r{b} = call fs_read r{h}"));
        g.emit(format!("r{w} = call fs_open 1"));
        g.define(h);
        g.define(b);
        g.define(w);
        let v = g.reg(rng);
        g.emit(format!("call fs_write r{w} {v}"));
        g.protected.extend([h, w]);
    }
    let shapes = 1 + rng.below(3);
    for _ in 0..shapes {
        if rng.chance(50) {
            g.diamond(rng);
        } else {
            g.counted_loop(rng, 6);
        }
        let n = 2 + rng.below(4);
        g.straight(rng, n, true);
    }
    for _ in 0..1 + rng.below(2) {
        let v = g.reg(rng);
        g.emit(format!("print {v}"));
    }
    g.finish(rng, "main", arity)
}

/// One random program source. The result may still be rejected by the
/// size and mutant-count filters in [`generate_case`].
pub fn generate_source<R: RngCore>(rng: &mut R, crafted: bool) -> String {
    let mut rng = Rng(rng);
    let count = 1 + rng.below(3) as usize;
    let helpers: Vec<Helper> = (0..count)
        .map(|i| Helper {
            name: format!("h{i}"),
            arity: 1 + rng.below(3) as u32,
        })
        .collect();
    let mut src = format!("memory {MEMORY}\n");
    for (i, h) in helpers.iter().enumerate() {
        src.push_str(&helper_source(&mut rng, h, &helpers[i + 1..], crafted));
    }
    let arity = 1 + rng.below(2) as u32;
    src.push_str(&main_source(&mut rng, arity, &helpers, crafted));
    src
}

/// Generates a program with a filtered test suite. Tries up to `attempts`
/// sources and returns `None` if none passes the filters.
pub fn generate_case<R: RngCore>(
    rng: &mut R,
    params: &CorpusParams,
    attempts: usize,
) -> Option<GeneratedCase> {
    let config = RunConfig {
        reference_step_cap: params.reference_cap,
        ..RunConfig::default()
    };
    for _ in 0..attempts {
        let source = generate_source(rng, params.crafted);
        let program = parse_program(&source).expect("generated source parses");
        debug_assert!(validate(&program).is_empty(), "{source}");
        if program.instruction_count() > params.max_instructions {
            continue;
        }
        let table = generate_mutants(&program, OperatorSet::all());
        if table.mutant_count() < params.min_mutants {
            continue;
        }
        let arity = program.entry_function().arity as usize;
        let mut tests = Vec::new();
        let mut r = Rng(&mut *rng);
        for k in 0..params.tests * 3 {
            if tests.len() == params.tests {
                break;
            }
            let args: Vec<i64> = (0..arity).map(|_| r.range(-10, 20)).collect();
            let len = r.below(12) as usize;
            let fixture: Vec<u8> = (0..len).map(|_| r.below(256) as u8).collect();
            let mut t = TestCase::new(format!("t{k}"), args);
            t.fixtures = vec![(0, fixture)];
            if reference_run(&program, &t, &config).is_ok() {
                tests.push(t);
            }
        }
        if tests.is_empty() {
            continue;
        }
        for (i, t) in tests.iter_mut().enumerate() {
            t.name = format!("t{i}");
        }
        return Some(GeneratedCase {
            source,
            program,
            table,
            tests,
        });
    }
    None
}

/// States positioned at locations with at least one mutant variant, for
/// property tests of `try` / `apply` and clustering.
///
/// Runs `test` once, choosing a random variant at every mutated location
/// (so states leave the unmutated path), and keeps each mutated-location
/// state with probability `keep_percent`. Stops after `max` states or when
/// the walk terminates.
pub fn sample_states<R: RngCore>(
    rng: &mut R,
    program: &Program,
    table: &MutationTable,
    test: &TestCase,
    limits: crate::runtime::Limits,
    keep_percent: u64,
    max: usize,
) -> Vec<crate::runtime::MachineState> {
    use crate::runtime::Variant;
    let mut rng = Rng(rng);
    let mut out = Vec::new();
    let Ok(mut s) = test.initial_state(program, limits) else {
        return out;
    };
    while let Some(pc) = s.next_pc() {
        if out.len() >= max {
            break;
        }
        let instr = program.instruction(pc).expect("valid position");
        match table.location_at(pc).filter(|e| !e.mutants.is_empty()) {
            Some(entry) => {
                if rng.chance(keep_percent) {
                    out.push(s.fork_state());
                }
                let k = rng.below(entry.mutants.len() as u64 + 3) as usize;
                let v = match entry.mutants.get(k) {
                    Some(m) if rng.chance(20) => Variant::mutant(instr, m.mutation),
                    _ => Variant::original(instr),
                };
                s.execute(program, v);
            }
            None => s.execute(program, Variant::original(instr)),
        }
    }
    out
}
