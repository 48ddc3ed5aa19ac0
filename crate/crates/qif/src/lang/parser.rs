//! Recursive-descent parser for the surface syntax.
//!
//! Grammar sketch (whitespace and `//` comments are free-form):
//!
//! ```text
//! program  := ("program" IDENT ";")? decl* stmt ("assert" "(" formula ")" ";"?)?
//! decl     := ("high" | "out" | "local") IDENT ":" "bool" "[" INT "]" ";"
//! stmt     := atom (";" atom)* ";"?
//! atom     := IDENT "[" INT "]" ":=" formula
//!           | "if" "(" formula ")" "then" atom "else" atom
//!           | "while" "(" formula ")" "do" atom
//!           | "skip" | "observe"
//!           | "{" stmt "}"
//! formula  := iff ;  iff := or ("==" or)* ;  or := xor ("|" xor)*
//! xor      := and ("^" and)* ;  and := unary ("&" unary)*
//! unary    := "!" unary | "true" | "false" | IDENT "[" INT "]" | "(" formula ")"
//! ```
//!
//! Binary operators are left-associative; `!` binds tightest, then `&`,
//! `^`, `|`, and `==` loosest. Variable references are resolved against the
//! declarations during parsing, so unknown names and out-of-range bit
//! indices are reported with positions. The trailing `assert` annotation is
//! only accepted by [`parse_annotated`]; it is how self-composed programs
//! carry their postcondition.

use std::sync::Arc;

use thiserror::Error;

use super::lexer::{lex, Pos, TokKind, Token};
use super::{Decl, Formula, Program, Stmt, StmtKind, VarKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: unexpected character {ch:?}")]
    UnexpectedChar { ch: char, pos: Pos },
    #[error("{pos}: integer literal too large")]
    IntTooLarge { pos: Pos },
    #[error("{pos}: expected {expected}, found {found}")]
    UnexpectedToken {
        expected: String,
        found: String,
        pos: Pos,
    },
    #[error("{pos}: duplicate declaration of {name:?}")]
    DuplicateDeclaration { name: String, pos: Pos },
    #[error("{pos}: unknown variable {name:?}")]
    UnknownVariable { name: String, pos: Pos },
    #[error("{pos}: bit index {bit} out of range for {name:?} (width {width})")]
    BitOutOfRange {
        name: String,
        bit: u64,
        width: u32,
        pos: Pos,
    },
}

pub type ParseResult<T> = Result<T, ParseError>;

/// Parses a plain program. A trailing `assert` annotation is rejected.
pub fn parse(text: &str) -> ParseResult<Program> {
    let (program, post) = parse_impl(text, false)?;
    debug_assert!(post.is_none());
    Ok(program)
}

/// Parses a program that may carry a trailing `assert(φ)` postcondition.
pub fn parse_annotated(text: &str) -> ParseResult<(Program, Option<Arc<Formula>>)> {
    parse_impl(text, true)
}

/// Parses a standalone formula against the declarations of `program`.
pub fn parse_formula_with(program: &Program, text: &str) -> ParseResult<Arc<Formula>> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        decls: program.decls.clone(),
    };
    let f = p.parse_formula()?;
    p.expect_eof()?;
    Ok(f)
}

fn parse_impl(text: &str, allow_annotation: bool) -> ParseResult<(Program, Option<Arc<Formula>>)> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        decls: Vec::new(),
    };

    let name = if p.at(&TokKind::KwProgram) {
        p.advance();
        let name = p.expect_ident("program name")?;
        p.expect(&TokKind::Semi)?;
        name
    } else {
        "main".to_string()
    };

    p.parse_decls()?;
    let body = p.parse_seq()?;

    let mut post = None;
    if allow_annotation && p.at(&TokKind::KwAssert) {
        p.advance();
        p.expect(&TokKind::LParen)?;
        let f = p.parse_formula()?;
        p.expect(&TokKind::RParen)?;
        if p.at(&TokKind::Semi) {
            p.advance();
        }
        post = Some(f);
    }
    p.expect_eof()?;

    Ok((
        Program {
            name,
            decls: p.decls,
            body,
        },
        post,
    ))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    decls: Vec<Decl>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn at(&self, kind: &TokKind) -> bool {
        &self.peek().kind == kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &str) -> ParseResult<T> {
        let t = self.peek();
        Err(ParseError::UnexpectedToken {
            expected: expected.to_string(),
            found: t.kind.describe(),
            pos: t.pos,
        })
    }

    fn expect(&mut self, kind: &TokKind) -> ParseResult<Token> {
        if self.at(kind) {
            Ok(self.advance())
        } else {
            self.unexpected(&kind.describe())
        }
    }

    fn expect_eof(&self) -> ParseResult<()> {
        if self.at(&TokKind::Eof) {
            Ok(())
        } else {
            self.unexpected("end of input")
        }
    }

    fn expect_ident(&mut self, what: &str) -> ParseResult<String> {
        match &self.peek().kind {
            TokKind::Ident(name) => {
                let name = name.clone();
                self.advance();
                Ok(name)
            }
            _ => self.unexpected(what),
        }
    }

    fn expect_int(&mut self) -> ParseResult<(u64, Pos)> {
        match self.peek().kind {
            TokKind::Int(n) => {
                let pos = self.peek().pos;
                self.advance();
                Ok((n, pos))
            }
            _ => self.unexpected("an integer"),
        }
    }

    fn parse_decls(&mut self) -> ParseResult<()> {
        loop {
            let kind = match self.peek().kind {
                TokKind::KwHigh => VarKind::High,
                TokKind::KwOut => VarKind::Out,
                TokKind::KwLocal => VarKind::Local,
                _ => return Ok(()),
            };
            let pos = self.peek().pos;
            self.advance();
            let name = self.expect_ident("a variable name")?;
            if self.decls.iter().any(|d| d.name == name) {
                return Err(ParseError::DuplicateDeclaration { name, pos });
            }
            self.expect(&TokKind::Colon)?;
            self.expect(&TokKind::KwBool)?;
            self.expect(&TokKind::LBracket)?;
            let (width, wpos) = self.expect_int()?;
            let width = u32::try_from(width).map_err(|_| ParseError::IntTooLarge { pos: wpos })?;
            self.expect(&TokKind::RBracket)?;
            self.expect(&TokKind::Semi)?;
            self.decls.push(Decl {
                name,
                kind,
                width,
                pos,
            });
        }
    }

    /// Resolves `name[bit]` against the declarations seen so far.
    fn resolve_bit(&self, name: String, bit: u64, pos: Pos) -> ParseResult<(String, u32)> {
        match self.decls.iter().find(|d| d.name == name) {
            None => Err(ParseError::UnknownVariable { name, pos }),
            Some(d) if bit >= u64::from(d.width) => Err(ParseError::BitOutOfRange {
                name,
                bit,
                width: d.width,
                pos,
            }),
            Some(_) => Ok((name, bit as u32)),
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek().kind,
            TokKind::Ident(_)
                | TokKind::KwIf
                | TokKind::KwWhile
                | TokKind::KwSkip
                | TokKind::KwObserve
                | TokKind::LBrace
        )
    }

    /// `atom (";" atom)*` folded into a right-nested `Seq` chain.
    fn parse_seq(&mut self) -> ParseResult<Stmt> {
        let mut stmts = vec![self.parse_atom()?];
        while self.at(&TokKind::Semi) {
            self.advance();
            if self.starts_atom() {
                stmts.push(self.parse_atom()?);
            } else {
                break;
            }
        }
        let mut it = stmts.into_iter().rev();
        let mut acc = it.next().expect("at least one statement");
        for s in it {
            let pos = s.pos;
            acc = Stmt {
                kind: StmtKind::Seq(Box::new(s), Box::new(acc)),
                pos,
            };
        }
        Ok(acc)
    }

    fn parse_atom(&mut self) -> ParseResult<Stmt> {
        let pos = self.peek().pos;
        match self.peek().kind.clone() {
            TokKind::KwSkip => {
                self.advance();
                Ok(Stmt {
                    kind: StmtKind::Skip,
                    pos,
                })
            }
            TokKind::KwObserve => {
                self.advance();
                Ok(Stmt {
                    kind: StmtKind::Observe,
                    pos,
                })
            }
            TokKind::LBrace => {
                self.advance();
                let inner = self.parse_seq()?;
                self.expect(&TokKind::RBrace)?;
                Ok(inner)
            }
            TokKind::KwIf => {
                self.advance();
                self.expect(&TokKind::LParen)?;
                let cond = self.parse_formula()?;
                self.expect(&TokKind::RParen)?;
                self.expect(&TokKind::KwThen)?;
                let then_branch = Box::new(self.parse_atom()?);
                self.expect(&TokKind::KwElse)?;
                let else_branch = Box::new(self.parse_atom()?);
                Ok(Stmt {
                    kind: StmtKind::If {
                        cond,
                        then_branch,
                        else_branch,
                    },
                    pos,
                })
            }
            TokKind::KwWhile => {
                self.advance();
                self.expect(&TokKind::LParen)?;
                let cond = self.parse_formula()?;
                self.expect(&TokKind::RParen)?;
                self.expect(&TokKind::KwDo)?;
                let body = Box::new(self.parse_atom()?);
                Ok(Stmt {
                    kind: StmtKind::While { cond, body },
                    pos,
                })
            }
            TokKind::Ident(name) => {
                self.advance();
                self.expect(&TokKind::LBracket)?;
                let (bit, bpos) = self.expect_int()?;
                self.expect(&TokKind::RBracket)?;
                let (var, bit) = self.resolve_bit(name, bit, bpos)?;
                self.expect(&TokKind::Assign)?;
                let value = self.parse_formula()?;
                Ok(Stmt {
                    kind: StmtKind::Assign { var, bit, value },
                    pos,
                })
            }
            _ => self.unexpected("a statement"),
        }
    }

    fn parse_formula(&mut self) -> ParseResult<Arc<Formula>> {
        self.parse_iff()
    }

    fn parse_iff(&mut self) -> ParseResult<Arc<Formula>> {
        let mut lhs = self.parse_or()?;
        while self.at(&TokKind::EqEq) {
            self.advance();
            let rhs = self.parse_or()?;
            lhs = Formula::eq(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_or(&mut self) -> ParseResult<Arc<Formula>> {
        let mut lhs = self.parse_xor()?;
        while self.at(&TokKind::Pipe) {
            self.advance();
            let rhs = self.parse_xor()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_xor(&mut self) -> ParseResult<Arc<Formula>> {
        let mut lhs = self.parse_and()?;
        while self.at(&TokKind::Caret) {
            self.advance();
            let rhs = self.parse_and()?;
            lhs = Formula::xor(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> ParseResult<Arc<Formula>> {
        let mut lhs = self.parse_unary()?;
        while self.at(&TokKind::Amp) {
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> ParseResult<Arc<Formula>> {
        match self.peek().kind.clone() {
            TokKind::Bang => {
                self.advance();
                Ok(Formula::not(self.parse_unary()?))
            }
            TokKind::KwTrue => {
                self.advance();
                Ok(Formula::t())
            }
            TokKind::KwFalse => {
                self.advance();
                Ok(Formula::f())
            }
            TokKind::LParen => {
                self.advance();
                let f = self.parse_formula()?;
                self.expect(&TokKind::RParen)?;
                Ok(f)
            }
            TokKind::Ident(name) => {
                self.advance();
                self.expect(&TokKind::LBracket)?;
                let (bit, bpos) = self.expect_int()?;
                self.expect(&TokKind::RBracket)?;
                let (name, bit) = self.resolve_bit(name, bit, bpos)?;
                Ok(Formula::var(name, bit))
            }
            _ => self.unexpected("a formula"),
        }
    }
}
