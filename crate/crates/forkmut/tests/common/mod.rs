// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use forkmut_core::ir::{enumerate_locations, BinOp, LocationId, Program};
use forkmut_core::mutgen::{Mutation, MutationTable, Operator};

pub const BIN: &str = env!("CARGO_BIN_EXE_forkmut");

/// One increment of `a`, then a two-trip loop that halves `a` and adds
/// `time_consuming(a)` to the result.
pub const FOO: &str = "\
func foo/1 {
entry:
  r1 = const 0
  r2 = const 0
  r0 = arith.add r0 1
  br loop
loop:
  r3 = icmp.lt r2 2
  br.cond r3 body done
body:
  r0 = arith.div r0 2
  r4 = call time_consuming r0
  r1 = arith.add r1 r4
  r2 = arith.add r2 1
  br loop
done:
  ret r1
}
func main/1 {
entry:
  r1 = call foo r0
  print r1
  ret 0
}
func time_consuming/1 {
entry:
  r1 = const 0
  r2 = const 0
  br head
head:
  r3 = icmp.lt r2 100
  br.cond r3 step out
step:
  r1 = arith.add r1 r0
  r2 = arith.add r2 1
  br head
out:
  ret r1
}
";

pub fn location(p: &Program, func: &str, block: &str, index: u32) -> LocationId {
    enumerate_locations(p)
        .into_iter()
        .find(|l| l.func == func && l.block == block && l.index == index)
        .unwrap()
        .id
}

/// M1 `a << 1` for `a + 1`; M2 `a + 2` and M3 `a * 2` for `a / 2`.
pub fn foo_table(p: &Program) -> MutationTable {
    let inc = location(p, "foo", "entry", 2);
    let half = location(p, "foo", "body", 0);
    MutationTable::from_mutations(
        p,
        [
            (inc, Operator::Aor, Mutation::ReplaceOp(BinOp::Shl)),
            (half, Operator::Aor, Mutation::ReplaceOp(BinOp::Add)),
            (half, Operator::Aor, Mutation::ReplaceOp(BinOp::Mul)),
        ],
    )
    .unwrap()
}

pub fn forkmut(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn forkmut")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}
