//! Tokenizer for the surface syntax.

use std::fmt;

use super::ParseError;

/// A line/column source position (both 1-based).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokKind {
    Ident(String),
    Int(u64),
    KwProgram,
    KwHigh,
    KwOut,
    KwLocal,
    KwBool,
    KwIf,
    KwThen,
    KwElse,
    KwWhile,
    KwDo,
    KwSkip,
    KwObserve,
    KwTrue,
    KwFalse,
    KwAssert,
    Colon,
    Semi,
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    /// `:=`
    Assign,
    Bang,
    Amp,
    Pipe,
    Caret,
    /// `==`
    EqEq,
    Eof,
}

impl TokKind {
    /// Short description used in error messages.
    pub fn describe(&self) -> String {
        match self {
            TokKind::Ident(s) => format!("identifier {s:?}"),
            TokKind::Int(n) => format!("integer {n}"),
            TokKind::KwProgram => "'program'".into(),
            TokKind::KwHigh => "'high'".into(),
            TokKind::KwOut => "'out'".into(),
            TokKind::KwLocal => "'local'".into(),
            TokKind::KwBool => "'bool'".into(),
            TokKind::KwIf => "'if'".into(),
            TokKind::KwThen => "'then'".into(),
            TokKind::KwElse => "'else'".into(),
            TokKind::KwWhile => "'while'".into(),
            TokKind::KwDo => "'do'".into(),
            TokKind::KwSkip => "'skip'".into(),
            TokKind::KwObserve => "'observe'".into(),
            TokKind::KwTrue => "'true'".into(),
            TokKind::KwFalse => "'false'".into(),
            TokKind::KwAssert => "'assert'".into(),
            TokKind::Colon => "':'".into(),
            TokKind::Semi => "';'".into(),
            TokKind::LBracket => "'['".into(),
            TokKind::RBracket => "']'".into(),
            TokKind::LParen => "'('".into(),
            TokKind::RParen => "')'".into(),
            TokKind::LBrace => "'{'".into(),
            TokKind::RBrace => "'}'".into(),
            TokKind::Assign => "':='".into(),
            TokKind::Bang => "'!'".into(),
            TokKind::Amp => "'&'".into(),
            TokKind::Pipe => "'|'".into(),
            TokKind::Caret => "'^'".into(),
            TokKind::EqEq => "'=='".into(),
            TokKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub pos: Pos,
}

fn keyword(ident: &str) -> Option<TokKind> {
    Some(match ident {
        "program" => TokKind::KwProgram,
        "high" => TokKind::KwHigh,
        "out" => TokKind::KwOut,
        "local" => TokKind::KwLocal,
        "bool" => TokKind::KwBool,
        "if" => TokKind::KwIf,
        "then" => TokKind::KwThen,
        "else" => TokKind::KwElse,
        "while" => TokKind::KwWhile,
        "do" => TokKind::KwDo,
        "skip" => TokKind::KwSkip,
        "observe" => TokKind::KwObserve,
        "true" => TokKind::KwTrue,
        "false" => TokKind::KwFalse,
        "assert" => TokKind::KwAssert,
        _ => return None,
    })
}

/// Tokenizes `text`, skipping whitespace and `//` line comments. The
/// returned stream always ends with an `Eof` token.
pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    loop {
        let pos = Pos { line, col };
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => break,
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    return Err(ParseError::UnexpectedChar { ch: '/', pos });
                }
            }
            ':' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    tokens.push(Token {
                        kind: TokKind::Assign,
                        pos,
                    });
                } else {
                    tokens.push(Token {
                        kind: TokKind::Colon,
                        pos,
                    });
                }
            }
            '=' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    tokens.push(Token {
                        kind: TokKind::EqEq,
                        pos,
                    });
                } else {
                    return Err(ParseError::UnexpectedChar { ch: '=', pos });
                }
            }
            ';' | '[' | ']' | '(' | ')' | '{' | '}' | '!' | '&' | '|' | '^' => {
                bump!();
                let kind = match c {
                    ';' => TokKind::Semi,
                    '[' => TokKind::LBracket,
                    ']' => TokKind::RBracket,
                    '(' => TokKind::LParen,
                    ')' => TokKind::RParen,
                    '{' => TokKind::LBrace,
                    '}' => TokKind::RBrace,
                    '!' => TokKind::Bang,
                    '&' => TokKind::Amp,
                    '|' => TokKind::Pipe,
                    '^' => TokKind::Caret,
                    _ => unreachable!(),
                };
                tokens.push(Token { kind, pos });
            }
            '0'..='9' => {
                let mut value: u64 = 0;
                while let Some(&d) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    bump!();
                    value = value
                        .checked_mul(10)
                        .and_then(|v| v.checked_add((d as u8 - b'0') as u64))
                        .ok_or(ParseError::IntTooLarge { pos })?;
                }
                tokens.push(Token {
                    kind: TokKind::Int(value),
                    pos,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if !(c.is_ascii_alphanumeric() || c == '_') {
                        break;
                    }
                    ident.push(c);
                    bump!();
                }
                let kind = keyword(&ident).unwrap_or(TokKind::Ident(ident));
                tokens.push(Token { kind, pos });
            }
            other => return Err(ParseError::UnexpectedChar { ch: other, pos }),
        }
    }
    tokens.push(Token {
        kind: TokKind::Eof,
        pos: Pos { line, col },
    });
    Ok(tokens)
}
