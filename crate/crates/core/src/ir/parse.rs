// SPDX-License-Identifier: Apache-2.0

//! Parser for the textual IR.
//!
//! ```text
//! # comment
//! memory 16              # optional, number of global cells (default 0)
//! entry main             # optional, entry function (default `main`)
//! func main/1 {
//! entry:
//!   r1 = const 5
//!   r2 = arith.add r0 r1; print r2
//!   ret r2
//! }
//! ```
//!
//! Statements end at a newline or `;`. A block label (`name:`) may share a
//! line with the first instruction of the block.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    BinOp, Block, BlockId, Builtin, Callee, FuncId, Function, Instruction, Operand, Program, Reg,
    Value,
};

/// Registers are indexed by `u32` but a function may not use more than this.
pub const MAX_REGISTERS: u32 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
    #[error("integer literal out of range")]
    IntegerOutOfRange,
    #[error("unknown opcode `{0}`")]
    UnknownOpcode(String),
    #[error("duplicate function `{0}`")]
    DuplicateFunction(String),
    #[error("duplicate block label `{0}`")]
    DuplicateLabel(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("undefined function `{0}`")]
    UndefinedFunction(String),
    #[error("`{callee}` takes {expected} argument(s), {found} given")]
    ArityMismatch {
        callee: String,
        expected: usize,
        found: usize,
    },
    #[error("`{0}` is a reserved name")]
    ReservedName(String),
    #[error("register r{0} exceeds the register limit")]
    RegisterOutOfRange(u32),
    #[error("entry function `{0}` is not defined")]
    MissingEntry(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Reg(u32),
    Int(Value),
    LBrace,
    RBrace,
    Colon,
    Semi,
    Slash,
    Eq,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Reg(r) => alloc::format!("register r{r}"),
            Tok::Int(v) => alloc::format!("integer {v}"),
            Tok::LBrace => "`{`".to_owned(),
            Tok::RBrace => "`}`".to_owned(),
            Tok::Colon => "`:`".to_owned(),
            Tok::Semi => "`;`".to_owned(),
            Tok::Slash => "`/`".to_owned(),
            Tok::Eq => "`=`".to_owned(),
            Tok::Newline => "end of line".to_owned(),
            Tok::Eof => "end of input".to_owned(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: u32,
    column: u32,
}

impl Pos {
    fn err(self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            kind,
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let (mut line, mut line_start) = (1u32, 0usize);
    while let Some(&(i, c)) = chars.peek() {
        let pos = Pos {
            line,
            column: (src[line_start..i].chars().count() + 1) as u32,
        };
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            '/' => Some(Tok::Slash),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            out.push((tok, pos));
            continue;
        }
        match c {
            '\n' => {
                chars.next();
                out.push((Tok::Newline, pos));
                line += 1;
                line_start = i + 1;
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '#' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_ascii_digit() || c == '-' => {
                let start = i;
                chars.next();
                let mut end = i + c.len_utf8();
                while let Some(&(j, d)) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    end = j + 1;
                    chars.next();
                }
                let text = &src[start..end];
                if text == "-" {
                    return Err(pos.err(ParseErrorKind::UnexpectedChar('-')));
                }
                let v = text
                    .parse::<Value>()
                    .map_err(|_| pos.err(ParseErrorKind::IntegerOutOfRange))?;
                out.push((Tok::Int(v), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut end = i;
                while let Some(&(j, d)) = chars.peek() {
                    if !(d.is_ascii_alphanumeric() || d == '_' || d == '.') {
                        break;
                    }
                    end = j + 1;
                    chars.next();
                }
                let word = &src[start..end];
                let tok = match word.strip_prefix('r') {
                    Some(digits)
                        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) =>
                    {
                        let n = digits
                            .parse::<u32>()
                            .ok()
                            .filter(|n| *n < MAX_REGISTERS)
                            .ok_or_else(|| {
                                pos.err(ParseErrorKind::RegisterOutOfRange(
                                    digits.parse().unwrap_or(u32::MAX),
                                ))
                            })?;
                        Tok::Reg(n)
                    }
                    _ => Tok::Ident(word.to_owned()),
                };
                out.push((tok, pos));
            }
            other => return Err(pos.err(ParseErrorKind::UnexpectedChar(other))),
        }
    }
    let pos = Pos {
        line,
        column: (src[line_start..].chars().count() + 1) as u32,
    };
    out.push((Tok::Eof, pos));
    Ok(out)
}

// Unresolved syntax tree.

struct Name {
    text: String,
    pos: Pos,
}

enum RawInstr {
    Resolved(Instruction),
    Br(Name),
    BrCond(Operand, Name, Name),
    Call {
        callee: Name,
        args: Vec<Operand>,
        dst: Option<Reg>,
    },
}

struct RawBlock {
    label: Name,
    instrs: Vec<RawInstr>,
}

struct RawFunction {
    name: Name,
    arity: u32,
    blocks: Vec<RawBlock>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        self.pos().err(ParseErrorKind::Unexpected {
            expected,
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<Pos, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn ident(&mut self, expected: &'static str) -> Result<Name, ParseError> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                (Tok::Ident(text), pos) => Ok(Name { text, pos }),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected(expected)),
        }
    }

    fn int(&mut self, expected: &'static str) -> Result<Value, ParseError> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match *self.peek() {
            Tok::Reg(r) => {
                self.bump();
                Ok(Operand::Reg(Reg(r)))
            }
            Tok::Int(v) => {
                self.bump();
                Ok(Operand::Imm(v))
            }
            _ => Err(self.unexpected("a register or integer operand")),
        }
    }

    fn at_statement_end(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Semi | Tok::Newline | Tok::RBrace | Tok::Eof
        )
    }

    fn end_statement(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Semi | Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::RBrace => Ok(()),
            _ => Err(self.unexpected("end of statement")),
        }
    }

    fn end_directive(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Semi | Tok::Newline | Tok::Eof => {
                self.bump();
                Ok(())
            }
            _ => Err(self.unexpected("end of line")),
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Tok::Semi | Tok::Newline) {
            self.bump();
        }
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>, ParseError> {
        let mut args = Vec::new();
        while !self.at_statement_end() {
            args.push(self.operand()?);
        }
        Ok(args)
    }

    fn instruction(&mut self) -> Result<RawInstr, ParseError> {
        if let Tok::Reg(r) = *self.peek() {
            let dst = Reg(r);
            self.bump();
            self.expect(Tok::Eq, "`=`")?;
            let op = self.ident("an opcode")?;
            return Ok(match op.text.as_str() {
                "const" => RawInstr::Resolved(Instruction::Const {
                    dst,
                    value: self.int("an integer literal")?,
                }),
                "load" => RawInstr::Resolved(Instruction::Load {
                    dst,
                    addr: self.operand()?,
                }),
                "call" => {
                    let callee = self.ident("a function name")?;
                    RawInstr::Call {
                        callee,
                        args: self.operand_list()?,
                        dst: Some(dst),
                    }
                }
                other => match BinOp::from_mnemonic(other) {
                    Some(op) => RawInstr::Resolved(Instruction::Binary {
                        op,
                        dst,
                        lhs: self.operand()?,
                        rhs: self.operand()?,
                    }),
                    None => return Err(op.pos.err(ParseErrorKind::UnknownOpcode(op.text))),
                },
            });
        }
        let op = self.ident("an instruction")?;
        Ok(match op.text.as_str() {
            "store" => RawInstr::Resolved(Instruction::Store {
                addr: self.operand()?,
                value: self.operand()?,
            }),
            "br" => RawInstr::Br(self.ident("a block label")?),
            "br.cond" => {
                let cond = self.operand()?;
                let t = self.ident("a block label")?;
                let e = self.ident("a block label")?;
                RawInstr::BrCond(cond, t, e)
            }
            "call" => {
                let callee = self.ident("a function name")?;
                RawInstr::Call {
                    callee,
                    args: self.operand_list()?,
                    dst: None,
                }
            }
            "ret" => {
                let value = if self.at_statement_end() {
                    None
                } else {
                    Some(self.operand()?)
                };
                RawInstr::Resolved(Instruction::Ret { value })
            }
            "print" => RawInstr::Resolved(Instruction::Print {
                value: self.operand()?,
            }),
            _ => return Err(op.pos.err(ParseErrorKind::UnknownOpcode(op.text))),
        })
    }

    fn function(&mut self) -> Result<RawFunction, ParseError> {
        let name = self.ident("a function name")?;
        if is_reserved(&name.text) {
            return Err(name.pos.err(ParseErrorKind::ReservedName(name.text)));
        }
        self.expect(Tok::Slash, "`/` and the arity")?;
        let arity_pos = self.pos();
        let arity = self.int("the function arity")?;
        let arity = u32::try_from(arity)
            .ok()
            .filter(|a| *a < MAX_REGISTERS)
            .ok_or_else(|| arity_pos.err(ParseErrorKind::IntegerOutOfRange))?;
        self.skip_newlines();
        self.expect(Tok::LBrace, "`{`")?;
        let mut blocks: Vec<RawBlock> = Vec::new();
        loop {
            self.skip_separators();
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Ident(_) if self.toks[self.at + 1].0 == Tok::Colon => {
                    let label = self.ident("a block label")?;
                    self.bump();
                    blocks.push(RawBlock {
                        label,
                        instrs: Vec::new(),
                    });
                }
                Tok::Eof => return Err(self.unexpected("`}`")),
                _ => {
                    if blocks.is_empty() {
                        return Err(self.unexpected("a block label"));
                    }
                    let instr = self.instruction()?;
                    self.end_statement()?;
                    blocks.last_mut().unwrap().instrs.push(instr);
                }
            }
        }
        Ok(RawFunction {
            name,
            arity,
            blocks,
        })
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }
}

fn is_reserved(name: &str) -> bool {
    Builtin::from_name(name).is_some() || name == "print"
}

/// Parses IR text into a resolved [`Program`].
///
/// Labels, callees and call arities are resolved here; structural rules
/// that a hand-built program could also violate (terminators, register
/// definitions) are left to [`validate`](super::validate).
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        at: 0,
    };
    let mut raw_functions = Vec::new();
    let mut memory_size = 0usize;
    let mut entry: Option<Name> = None;
    loop {
        p.skip_separators();
        if *p.peek() == Tok::Eof {
            break;
        }
        let kw = p.ident("`func`, `memory` or `entry`")?;
        match kw.text.as_str() {
            "func" => raw_functions.push(p.function()?),
            "memory" => {
                let pos = p.pos();
                let n = p.int("a memory size")?;
                memory_size =
                    usize::try_from(n).map_err(|_| pos.err(ParseErrorKind::IntegerOutOfRange))?;
                p.end_directive()?;
            }
            "entry" => {
                entry = Some(p.ident("a function name")?);
                p.end_directive()?;
            }
            _ => {
                return Err(kw.pos.err(ParseErrorKind::Unexpected {
                    expected: "`func`, `memory` or `entry`",
                    found: alloc::format!("`{}`", kw.text),
                }))
            }
        }
    }

    raw_functions.sort_by(|a, b| a.name.text.cmp(&b.name.text));
    let mut func_ids = BTreeMap::new();
    for (i, f) in raw_functions.iter().enumerate() {
        if func_ids
            .insert(f.name.text.as_str(), FuncId(i as u32))
            .is_some()
        {
            return Err(f
                .name
                .pos
                .err(ParseErrorKind::DuplicateFunction(f.name.text.clone())));
        }
    }
    let arities: Vec<u32> = raw_functions.iter().map(|f| f.arity).collect();

    let resolve_callee = |name: &Name, argc: usize| -> Result<Callee, ParseError> {
        let (callee, expected) = match func_ids.get(name.text.as_str()) {
            Some(&id) => (Callee::Func(id), arities[id.0 as usize] as usize),
            None => match Builtin::from_name(&name.text) {
                Some(b) => (Callee::Builtin(b), b.arity()),
                None => {
                    return Err(name
                        .pos
                        .err(ParseErrorKind::UndefinedFunction(name.text.clone())))
                }
            },
        };
        if argc != expected {
            return Err(name.pos.err(ParseErrorKind::ArityMismatch {
                callee: name.text.clone(),
                expected,
                found: argc,
            }));
        }
        Ok(callee)
    };

    let mut functions = Vec::with_capacity(raw_functions.len());
    for rf in &raw_functions {
        let mut labels = BTreeMap::new();
        for (i, b) in rf.blocks.iter().enumerate() {
            if labels
                .insert(b.label.text.as_str(), BlockId(i as u32))
                .is_some()
            {
                return Err(b
                    .label
                    .pos
                    .err(ParseErrorKind::DuplicateLabel(b.label.text.clone())));
            }
        }
        let label = |n: &Name| -> Result<BlockId, ParseError> {
            labels
                .get(n.text.as_str())
                .copied()
                .ok_or_else(|| n.pos.err(ParseErrorKind::UndefinedLabel(n.text.clone())))
        };
        let mut blocks = Vec::with_capacity(rf.blocks.len());
        for rb in &rf.blocks {
            let mut instrs = Vec::with_capacity(rb.instrs.len());
            for ri in &rb.instrs {
                instrs.push(match ri {
                    RawInstr::Resolved(i) => i.clone(),
                    RawInstr::Br(n) => Instruction::Br { target: label(n)? },
                    RawInstr::BrCond(cond, t, e) => Instruction::BrCond {
                        cond: *cond,
                        then_block: label(t)?,
                        else_block: label(e)?,
                    },
                    RawInstr::Call { callee, args, dst } => Instruction::Call {
                        callee: resolve_callee(callee, args.len())?,
                        args: args.clone(),
                        dst: *dst,
                    },
                });
            }
            blocks.push(Block {
                label: rb.label.text.clone(),
                instrs,
            });
        }
        let max_reg = blocks
            .iter()
            .flat_map(|b| b.instrs.iter())
            .flat_map(|i| {
                i.operands()
                    .filter_map(|o| match o {
                        Operand::Reg(r) => Some(r.0 + 1),
                        Operand::Imm(_) => None,
                    })
                    .chain(i.def().map(|r| r.0 + 1))
            })
            .max()
            .unwrap_or(0);
        functions.push(Function {
            name: rf.name.text.clone(),
            arity: rf.arity,
            blocks,
            reg_count: max_reg.max(rf.arity),
        });
    }

    let entry_fn = match entry {
        Some(n) => match func_ids.get(n.text.as_str()) {
            Some(&id) => id,
            None => return Err(n.pos.err(ParseErrorKind::MissingEntry(n.text))),
        },
        None => match func_ids.get("main") {
            Some(&id) => id,
            None => {
                return Err(
                    Pos { line: 1, column: 1 }.err(ParseErrorKind::MissingEntry("main".to_owned()))
                )
            }
        },
    };

    Ok(Program {
        functions,
        entry: entry_fn,
        memory_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse_program("func main/0 { entry: r0 = const 1; print r0; ret }").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.instruction_count(), 3);
        assert_eq!(p.entry_function().reg_count, 1);
    }

    #[test]
    fn missing_label_is_reported_with_position() {
        let err = parse_program("func main/0 {\nentry:\n  br nowhere\n}").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UndefinedLabel("nowhere".into()));
        assert_eq!((err.line, err.column), (3, 6));
    }

    #[test]
    fn undefined_function_and_arity() {
        let err = parse_program("func main/0 { e: call foo; ret }").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UndefinedFunction("foo".into()));

        let err =
            parse_program("func f/2 { e: ret }\nfunc main/0 { e: call f 1; ret }").unwrap_err();
        assert!(matches!(
            err.kind,
            ParseErrorKind::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));

        let err = parse_program("func main/0 { e: r0 = call fs_write 1; ret }").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::ArityMismatch { .. }));
    }

    #[test]
    fn syntax_errors() {
        let err = parse_program("func main/0 { e: r0 = arith.pow r1 r2; ret }").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownOpcode("arith.pow".into()));
        assert_eq!((err.line, err.column), (1, 23));

        let err = parse_program("func main/0 { r0 = const 1; ret }").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Unexpected { .. }));

        let err = parse_program("func main/0 { e: ret $ }").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedChar('$'));

        let err =
            parse_program("func main/0 { e: r0 = const 99999999999999999999; ret }").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::IntegerOutOfRange);

        let err = parse_program("func fs_open/1 { e: ret }").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ReservedName("fs_open".into()));

        let err = parse_program("func helper/0 { e: ret }").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingEntry("main".into()));
    }

    #[test]
    fn directives_and_comments() {
        let src = "# header\nmemory 8\nentry start\nfunc start/2 { # c\nb0: r2 = arith.add r0 r1 # sum\n ret r2 }\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.memory_size, 8);
        assert_eq!(p.entry_function().name, "start");
        assert_eq!(p.entry_function().reg_count, 3);
    }

    #[test]
    fn functions_are_sorted_and_calls_resolved() {
        let p = parse_program(
            "func zed/0 { e: ret 1 }\nfunc main/0 { e: r0 = call zed; r1 = call fs_open 0; ret }",
        )
        .unwrap();
        assert_eq!(p.functions[0].name, "main");
        assert_eq!(p.functions[1].name, "zed");
        match &p.functions[0].blocks[0].instrs[0] {
            Instruction::Call { callee, .. } => assert_eq!(*callee, Callee::Func(FuncId(1))),
            other => panic!("unexpected {other:?}"),
        }
        match &p.functions[0].blocks[0].instrs[1] {
            Instruction::Call { callee, .. } => {
                assert_eq!(*callee, Callee::Builtin(Builtin::FsOpen))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_literals() {
        let p = parse_program("func main/0 { e: r0 = arith.add -3 r1; ret -1 }").unwrap();
        assert_eq!(
            p.functions[0].blocks[0].instrs[0],
            Instruction::Binary {
                op: BinOp::Add,
                dst: Reg(0),
                lhs: Operand::Imm(-3),
                rhs: Operand::Reg(Reg(1)),
            }
        );
    }
}
