// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use forkmut_core::ir::{enumerate_locations, parse_program, BinOp, LocationId, Program};
use forkmut_core::mutgen::{Mutation, MutationTable, Operator};

/// The `foo` / `test_foo` example: one increment, then a two-trip loop that
/// halves `a` and accumulates `time_consuming(a)`.
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

pub fn foo() -> Program {
    parse_program(FOO).unwrap()
}

/// Location of instruction `index` in block `block` of function `func`.
pub fn location(p: &Program, func: &str, block: &str, index: u32) -> LocationId {
    let f = p.function_id(func).unwrap();
    let b = p.function(f).block_index(block).unwrap();
    enumerate_locations(p)
        .into_iter()
        .find(|l| l.pc.func == f && l.pc.block == b && l.pc.index == index)
        .unwrap()
        .id
}

/// M1: `a = a << 1` for `a = a + 1`; M2: `a + 2` and M3: `a * 2` for `a = a / 2`.
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
