// SPDX-License-Identifier: Apache-2.0

//! Mutation table files.
//!
//! Line-oriented text, one record per line:
//!
//! ```text
//! forkmut-table v1
//! mutants 3
//! locations 7
//! max-u 2
//! loc 2 foo entry 2 1
//! mut 0 2 AOR op arith.sub
//! ...
//! checksum 9a3f01c2
//! ```
//!
//! `loc ID FUNC BLOCK INDEX U` names every location that has mutants, and
//! `mut ID LOC TAG MUTATION` lists mutants in id order. The checksum is the
//! CRC-32 of every byte before the `checksum` line. Loading checks the
//! locations against the program and rebuilds the table, so a loaded table
//! saves back to the same bytes.

use std::fmt::Write as _;

use forkmut_core::ir::{LocationId, Program};
use forkmut_core::mutgen::{Mutation, MutationTable, Operator, TableError};

pub const HEADER: &str = "forkmut-table v1";

#[derive(Debug, thiserror::Error)]
pub enum TableFileError {
    #[error("not a version 1 table file (found `{0}`)")]
    VersionMismatch(String),
    #[error("checksum mismatch (truncated or edited file)")]
    ChecksumMismatch,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: location {id} does not exist in the program")]
    NonexistentLocation { line: usize, id: u32 },
    #[error("header says {header} {what}, file has {actual}")]
    CountMismatch {
        what: &'static str,
        header: u64,
        actual: u64,
    },
    #[error(transparent)]
    Table(#[from] TableError),
}

pub fn save_table(table: &MutationTable) -> String {
    let mut s = String::new();
    writeln!(s, "{HEADER}").ok();
    writeln!(s, "mutants {}", table.mutant_count()).ok();
    writeln!(s, "locations {}", table.entries().len()).ok();
    writeln!(s, "max-u {}", table.max_u()).ok();
    for e in table.entries().iter().filter(|e| !e.mutants.is_empty()) {
        let l = &e.location;
        writeln!(
            s,
            "loc {} {} {} {} {}",
            l.id.0,
            l.func,
            l.block,
            l.index,
            e.mutants.len()
        )
        .ok();
    }
    for e in table.entries() {
        for m in &e.mutants {
            writeln!(
                s,
                "mut {} {} {} {}",
                m.id.0,
                e.location.id.0,
                m.operator.tag(),
                m.mutation
            )
            .ok();
        }
    }
    let sum = crc32fast::hash(s.as_bytes());
    writeln!(s, "checksum {sum:08x}").ok();
    s
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        self.iter
            .next()
            .map(|(i, l)| (i + 1, l.split_ascii_whitespace().collect()))
    }
}

fn syntax(line: usize, message: impl Into<String>) -> TableFileError {
    TableFileError::Syntax {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, word: Option<&&str>) -> Result<T, TableFileError> {
    word.and_then(|w| w.parse().ok())
        .ok_or_else(|| syntax(line, "expected a number"))
}

pub fn load_table(text: &str, program: &Program) -> Result<MutationTable, TableFileError> {
    let first = text.lines().next().unwrap_or("");
    if first != HEADER {
        return Err(TableFileError::VersionMismatch(first.to_owned()));
    }
    let body_end = text
        .rfind("checksum ")
        .filter(|&i| i == 0 || text.as_bytes()[i - 1] == b'\n')
        .ok_or(TableFileError::ChecksumMismatch)?;
    let trailer = text[body_end..].strip_prefix("checksum ").unwrap_or("");
    let stored = trailer
        .strip_suffix('\n')
        .and_then(|h| u32::from_str_radix(h, 16).ok())
        .ok_or(TableFileError::ChecksumMismatch)?;
    let body = &text[..body_end];
    if crc32fast::hash(body.as_bytes()) != stored {
        return Err(TableFileError::ChecksumMismatch);
    }

    let mut lines = Lines {
        iter: body.lines().enumerate(),
    };
    lines.next();
    let mut header = |key: &str| -> Result<u64, TableFileError> {
        let (line, w) = lines.next().ok_or_else(|| syntax(0, "missing header"))?;
        if w.len() != 2 || w[0] != key {
            return Err(syntax(line, format!("expected `{key} N`")));
        }
        num(line, w.get(1))
    };
    let mutants = header("mutants")?;
    let locations = header("locations")?;
    let max_u = header("max-u")?;

    let known = forkmut_core::ir::enumerate_locations(program);
    if locations != known.len() as u64 {
        return Err(TableFileError::CountMismatch {
            what: "locations",
            header: locations,
            actual: known.len() as u64,
        });
    }
    let mut declared_u = vec![None; known.len()];
    let mut triples = Vec::new();
    while let Some((line, w)) = lines.next() {
        match w.first().copied() {
            Some("loc") => {
                if w.len() != 6 {
                    return Err(syntax(line, "usage: loc ID FUNC BLOCK INDEX U"));
                }
                let id: u32 = num(line, w.get(1))?;
                let index: u32 = num(line, w.get(4))?;
                let found = known
                    .get(id as usize)
                    .filter(|l| l.func == w[2] && l.block == w[3] && l.index == index);
                if found.is_none() {
                    return Err(TableFileError::NonexistentLocation { line, id });
                }
                let u: u64 = num(line, w.get(5))?;
                declared_u[id as usize] = Some(u);
            }
            Some("mut") => {
                if w.len() < 5 {
                    return Err(syntax(line, "usage: mut ID LOC TAG MUTATION"));
                }
                let id: u32 = num(line, w.get(1))?;
                if id as usize != triples.len() {
                    return Err(syntax(line, format!("expected mutant {}", triples.len())));
                }
                let loc: u32 = num(line, w.get(2))?;
                if loc as usize >= known.len() {
                    return Err(TableFileError::NonexistentLocation { line, id: loc });
                }
                if declared_u[loc as usize].is_none() {
                    return Err(syntax(line, format!("location {loc} has no `loc` line")));
                }
                let op = Operator::from_tag(w[3])
                    .ok_or_else(|| syntax(line, format!("unknown operator `{}`", w[3])))?;
                let m: Mutation = w[4..]
                    .join(" ")
                    .parse()
                    .map_err(|e: forkmut_core::mutgen::BadMutation| syntax(line, e.to_string()))?;
                triples.push((LocationId(loc), op, m));
            }
            _ => return Err(syntax(line, "expected `loc` or `mut`")),
        }
    }
    if mutants != triples.len() as u64 {
        return Err(TableFileError::CountMismatch {
            what: "mutants",
            header: mutants,
            actual: triples.len() as u64,
        });
    }
    let table = MutationTable::from_mutations(program, triples)?;
    // Ids are reassigned in location order; the file must already use it.
    if save_table(&table) != text {
        for (i, u) in declared_u.iter().enumerate() {
            let actual = table.u(LocationId(i as u32)) as u64;
            if let Some(&u) = u.as_ref().filter(|&&u| u != actual) {
                return Err(TableFileError::CountMismatch {
                    what: "variants at a location",
                    header: u,
                    actual,
                });
            }
        }
        if max_u != table.max_u() as u64 {
            return Err(TableFileError::CountMismatch {
                what: "max-u",
                header: max_u,
                actual: table.max_u() as u64,
            });
        }
        return Err(syntax(0, "mutants are not listed in location order"));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use forkmut_core::{generate_mutants, parse_program, OperatorSet};

    const SRC: &str = "func main/1 {\nentry:\n  r1 = arith.mul r0 3\n  print r1\n  ret 0\n}\n";

    #[test]
    fn header_reports_mutant_count() {
        let p = parse_program(SRC).unwrap();
        let t = generate_mutants(&p, OperatorSet::all());
        let text = save_table(&t);
        let line = format!("mutants {}\n", t.mutant_count());
        assert!(text.contains(&line));
        assert_eq!(load_table(&text, &p).unwrap(), t);
    }

    #[test]
    fn every_prefix_fails_the_checksum() {
        let p = parse_program(SRC).unwrap();
        let text = save_table(&generate_mutants(&p, OperatorSet::all()));
        let header = HEADER.len() + 1;
        for cut in header..text.len() {
            let err = load_table(&text[..cut], &p).unwrap_err();
            assert!(
                matches!(err, TableFileError::ChecksumMismatch),
                "{cut}: {err}"
            );
        }
    }
}
