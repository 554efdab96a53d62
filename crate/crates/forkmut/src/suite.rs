// SPDX-License-Identifier: Apache-2.0

//! Suite files.
//!
//! ```text
//! # comment
//! test small 4
//!   fixture 0 data/input.bin
//!   expect-output 12 7
//!   expect-exit 0
//! test large 400
//! ```
//!
//! `test NAME ARGS...` starts a test. The indented lines after it belong to
//! that test: `fixture FILE PATH` preloads simulated file `FILE` with the
//! bytes of `PATH` (relative to the suite file), `expect-output V...`
//! expects exactly the printed values `V...`, and `expect-exit CODE` the
//! exit code. Without expectations the unmutated run is the reference.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use forkmut_core::harness::{Expectation, TestCase};

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("cannot read suite {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: cannot read fixture {path}: {source}")]
    Fixture {
        line: usize,
        path: PathBuf,
        source: io::Error,
    },
}

fn syntax(line: usize, message: impl Into<String>) -> SuiteError {
    SuiteError::Syntax {
        line,
        message: message.into(),
    }
}

fn int(line: usize, word: &str) -> Result<i64, SuiteError> {
    word.parse()
        .map_err(|_| syntax(line, format!("expected an integer, found `{word}`")))
}

/// Parses suite text; fixture paths are resolved against `base`.
pub fn parse_suite(text: &str, base: &Path) -> Result<Vec<TestCase>, SuiteError> {
    let mut tests: Vec<TestCase> = Vec::new();
    let mut names = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some((&head, rest)) = words.split_first() else {
            continue;
        };
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        if head == "test" {
            if indented {
                return Err(syntax(line, "`test` must start at column 1"));
            }
            let (&name, args) = rest
                .split_first()
                .ok_or_else(|| syntax(line, "missing test name"))?;
            if name.contains(',') {
                return Err(syntax(line, "test names cannot contain commas"));
            }
            if !names.insert(name.to_owned()) {
                return Err(syntax(line, format!("duplicate test `{name}`")));
            }
            let args = args
                .iter()
                .map(|w| int(line, w))
                .collect::<Result<_, _>>()?;
            tests.push(TestCase::new(name, args));
            continue;
        }
        if !indented {
            return Err(syntax(line, format!("unexpected `{head}` outside a test")));
        }
        let test = tests
            .last_mut()
            .ok_or_else(|| syntax(line, format!("`{head}` before any test")))?;
        match head {
            "fixture" => {
                let [file, path] = rest else {
                    return Err(syntax(line, "usage: fixture FILE PATH"));
                };
                let path = base.join(path);
                let bytes = fs::read(&path).map_err(|source| SuiteError::Fixture {
                    line,
                    path: path.clone(),
                    source,
                })?;
                test.fixtures.push((int(line, file)?, bytes));
            }
            "expect-output" => {
                let mut out = Vec::new();
                for w in rest {
                    out.extend_from_slice(format!("{}\n", int(line, w)?).as_bytes());
                }
                set_expectation(test, Some(out), None);
            }
            "expect-exit" => {
                let [code] = rest else {
                    return Err(syntax(line, "usage: expect-exit CODE"));
                };
                let code = int(line, code)?;
                set_expectation(test, None, Some(code));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }
    Ok(tests)
}

fn set_expectation(test: &mut TestCase, output: Option<Vec<u8>>, exit: Option<i64>) {
    let (old_output, old_exit) = match std::mem::replace(&mut test.expected, Expectation::Reference)
    {
        Expectation::Explicit { output, exit } => (output, exit),
        Expectation::Reference => (None, None),
    };
    test.expected = Expectation::Explicit {
        output: output.or(old_output),
        exit: exit.or(old_exit),
    };
}

pub fn load_suite(path: &Path) -> Result<Vec<TestCase>, SuiteError> {
    let text = fs::read_to_string(path).map_err(|source| SuiteError::Read {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_suite(&text, base)
}

/// Writes `tests` as a suite file at `path`, with fixtures as files in
/// `fixture_dir` (named relative to the suite's directory).
pub fn write_suite(path: &Path, fixture_dir: &str, tests: &[TestCase]) -> io::Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut text = String::new();
    for t in tests {
        text.push_str("test ");
        text.push_str(&t.name);
        for a in &t.args {
            write!(text, " {a}").ok();
        }
        text.push('\n');
        for (file, bytes) in &t.fixtures {
            let rel = format!("{fixture_dir}/{}.f{file}.bin", t.name);
            let full = base.join(&rel);
            if let Some(dir) = full.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(full, bytes)?;
            writeln!(text, "  fixture {file} {rel}").ok();
        }
        if let Expectation::Explicit { output, exit } = &t.expected {
            if let Some(out) = output {
                text.push_str("  expect-output");
                for v in String::from_utf8_lossy(out).lines() {
                    write!(text, " {v}").ok();
                }
                text.push('\n');
            }
            if let Some(code) = exit {
                writeln!(text, "  expect-exit {code}").ok();
            }
        }
    }
    fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tests_and_expectations() {
        let text = "# demo\ntest a 1 -2\n  expect-output 3 4\n  expect-exit 7\n\ntest b\n";
        let t = parse_suite(text, Path::new(".")).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].args, [1, -2]);
        assert_eq!(
            t[0].expected,
            Expectation::Explicit {
                output: Some(b"3\n4\n".to_vec()),
                exit: Some(7)
            }
        );
        assert_eq!(t[1].expected, Expectation::Reference);
    }

    #[test]
    fn rejects_bad_lines() {
        for (text, line) in [
            ("test a\ntest a\n", 2),
            ("  expect-exit 1\n", 1),
            ("test a x\n", 1),
            ("test a\n  frobnicate\n", 2),
            ("expect-exit 3\n", 1),
            ("test a\n  fixture 0 /no/such/file\n", 2),
        ] {
            let err = parse_suite(text, Path::new(".")).unwrap_err();
            assert!(
                err.to_string().starts_with(&format!("line {line}:")),
                "{err}"
            );
        }
    }
}
