//! Tokenizer for the Verilog subset. Comments are collected per line so the
//! parser can keep them as layout.

use std::collections::BTreeMap;

use super::ast::{Comment, Literal, LiteralBase};
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(Literal),
    Str(String),
    /// Backtick directive, e.g. `include.
    Directive(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub struct Lexed {
    pub tokens: Vec<Token>,
    pub comments: BTreeMap<u32, Vec<Comment>>,
    pub line_count: u32,
}

const SYMBOLS: [&str; 24] = [
    "<<", ">>", "<=", "==", "!=", "(", ")", ";", ",", ".", "@", "[", "]", ":", "=", "<", ">", "+",
    "-", "&", "|", "^", "~", "!",
];

pub fn lex(text: &str) -> Result<Lexed, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut comments: BTreeMap<u32, Vec<Comment>> = BTreeMap::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    let line_count = {
        let n = text.split('\n').count() as u32;
        if text.ends_with('\n') {
            n - 1
        } else {
            n
        }
    };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let (tl, tc) = (line, col);
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let s = s.trim_end().to_string();
            col += (i - start) as u32;
            comments.entry(tl).or_default().push(Comment { col: tc, text: s });
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let mut seg = String::from("/*");
            let mut seg_line = line;
            let mut seg_col = col;
            i += 2;
            col += 2;
            loop {
                if i >= chars.len() {
                    return Err(ParseError::new(tl, tc, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    seg.push_str("*/");
                    i += 2;
                    col += 2;
                    comments.entry(seg_line).or_default().push(Comment {
                        col: seg_col,
                        text: seg.trim_end().to_string(),
                    });
                    break;
                }
                if chars[i] == '\n' {
                    let t = seg.trim_end().to_string();
                    if !t.is_empty() {
                        comments.entry(seg_line).or_default().push(Comment {
                            col: seg_col,
                            text: t,
                        });
                    }
                    seg.clear();
                    i += 1;
                    line += 1;
                    col = 1;
                    // continuation segment starts at the first non-space column
                    while i < chars.len() && chars[i] != '\n' && chars[i].is_whitespace() {
                        i += 1;
                        col += 1;
                    }
                    seg_line = line;
                    seg_col = col;
                    continue;
                }
                seg.push(chars[i]);
                i += 1;
                col += 1;
            }
            continue;
        }
        if c == '`' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            col += (i - start + 1) as u32;
            if name.is_empty() {
                return Err(ParseError::new(tl, tc, "expected directive name after '`'"));
            }
            tokens.push(Token {
                tok: Tok::Directive(name),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(ParseError::new(tl, tc, "unterminated string"));
            }
            let s: String = chars[start..i].iter().collect();
            i += 1;
            col += (i - start + 1) as u32;
            tokens.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            tokens.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() || c == '\'' {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let size_digits: String = chars[start..i].iter().collect();
            if i < chars.len() && chars[i] == '\'' {
                i += 1;
                let base_c = chars.get(i).copied().unwrap_or(' ').to_ascii_lowercase();
                let (base, radix) = match base_c {
                    'b' => (LiteralBase::Bin, 2),
                    'h' => (LiteralBase::Hex, 16),
                    'd' => (LiteralBase::Dec, 10),
                    _ => return Err(ParseError::new(tl, tc, "expected base 'b, 'h or 'd in literal")),
                };
                i += 1;
                let dstart = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let digits: String = chars[dstart..i].iter().filter(|c| **c != '_').collect();
                col += (i - start) as u32;
                if size_digits.is_empty() {
                    return Err(ParseError::new(tl, tc, "unsized based literals are outside the subset"));
                }
                let width: u32 = size_digits
                    .parse()
                    .map_err(|_| ParseError::new(tl, tc, "bad literal width"))?;
                if !(1..=64).contains(&width) {
                    return Err(ParseError::new(tl, tc, "literal width must be 1..=64"));
                }
                if digits.is_empty() {
                    return Err(ParseError::new(tl, tc, "literal has no digits"));
                }
                if digits.chars().any(|d| matches!(d.to_ascii_lowercase(), 'x' | 'z' | '?')) {
                    return Err(ParseError::new(tl, tc, "x/z literal digits are outside the subset"));
                }
                let value = u128::from_str_radix(&digits, radix)
                    .map_err(|_| ParseError::new(tl, tc, format!("invalid digits '{digits}'")))?;
                if value > u64::MAX as u128 || (width < 64 && value >= (1u128 << width)) {
                    return Err(ParseError::new(tl, tc, "literal value does not fit its width"));
                }
                tokens.push(Token {
                    tok: Tok::Number(Literal {
                        width,
                        value: value as u64,
                        base,
                    }),
                    line: tl,
                    col: tc,
                });
            } else {
                col += (i - start) as u32;
                let value: u64 = size_digits
                    .parse()
                    .map_err(|_| ParseError::new(tl, tc, "bad number"))?;
                if value > u32::MAX as u64 {
                    return Err(ParseError::new(tl, tc, "unsized literal exceeds 32 bits"));
                }
                tokens.push(Token {
                    tok: Tok::Number(Literal {
                        width: 32,
                        value,
                        base: LiteralBase::Unsized,
                    }),
                    line: tl,
                    col: tc,
                });
            }
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            i += sym.len();
            col += sym.len() as u32;
            tokens.push(Token {
                tok: Tok::Sym(sym),
                line: tl,
                col: tc,
            });
            continue;
        }
        return Err(ParseError::new(tl, tc, format!("unexpected character '{c}'")));
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(Lexed {
        tokens,
        comments,
        line_count: line_count.max(1),
    })
}
