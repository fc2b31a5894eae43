// SPDX-License-Identifier: Apache-2.0

use crate::error::CompileError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// `$display`, `$signed`, ...
    System(String),
    /// Plain decimal integer without a base, e.g. `42`.
    Int(String),
    /// Based literal: optional size, signedness, base char and digit string.
    Based {
        size: Option<u32>,
        signed: bool,
        base: char,
        digits: String,
    },
    Real(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

// Longest first so that maximal munch works by linear scan.
const PUNCTS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "<<<", ">>>", "**", "==", "!=", "<=", ">=", "&&", "||", "<<",
    ">>", "~&", "~|", "~^", "^~", "+:", "-:", "->", "::", "+", "-", "*", "/", "%",
    "<", ">", "!", "~", "&", "|", "^", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{", "}",
    "=", "#", "@", "'",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, CompileError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                if bytes[i] == b'\n' {
                    line += 1;
                }
                i += 1;
            }
            i += 2;
            continue;
        }
        if c == b'`' {
            // Compiler directives (`timescale, `default_nettype, ...) are ignored.
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            toks.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                line,
            });
            continue;
        }
        if c == b'\\' {
            // Escaped identifier: up to whitespace.
            let start = i + 1;
            i += 1;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            toks.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                line,
            });
            continue;
        }
        if c == b'$' {
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Token {
                tok: Tok::System(src[start..i].to_string()),
                line,
            });
            continue;
        }
        if c == b'"' {
            i += 1;
            let mut s = String::new();
            while i < bytes.len() && bytes[i] != b'"' {
                if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    i += 1;
                    match bytes[i] {
                        b'n' => s.push('\n'),
                        b't' => s.push('\t'),
                        b'\\' => s.push('\\'),
                        b'"' => s.push('"'),
                        other => {
                            s.push('\\');
                            s.push(other as char);
                        }
                    }
                } else {
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    s.push(bytes[i] as char);
                }
                i += 1;
            }
            if i >= bytes.len() {
                return Err(CompileError::new(line, "unterminated string literal"));
            }
            i += 1;
            toks.push(Token { tok: Tok::Str(s), line });
            continue;
        }
        if c.is_ascii_digit() || (c == b'\'' && is_base_start(bytes, i + 1)) {
            let (tok, next) = lex_number(src, i, line)?;
            toks.push(Token { tok, line });
            i = next;
            continue;
        }
        let rest = &src[i..];
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                toks.push(Token {
                    tok: Tok::Punct(p),
                    line,
                });
                i += p.len();
            }
            None => {
                return Err(CompileError::new(
                    line,
                    format!("unexpected character '{}'", rest.chars().next().unwrap_or('?')),
                ))
            }
        }
    }
    toks.push(Token { tok: Tok::Eof, line });
    Ok(toks)
}

fn is_base_start(bytes: &[u8], mut i: usize) -> bool {
    if matches!(bytes.get(i), Some(b's') | Some(b'S')) {
        i += 1;
    }
    matches!(
        bytes.get(i),
        Some(b'h' | b'H' | b'd' | b'D' | b'b' | b'B' | b'o' | b'O')
    )
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
        i += 1;
    }
    i
}

fn lex_number(src: &str, start: usize, line: usize) -> Result<(Tok, usize), CompileError> {
    let bytes = src.as_bytes();
    let mut i = start;
    let mut size = None;
    if bytes[i].is_ascii_digit() {
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
        let digits: String = src[start..i].chars().filter(|c| *c != '_').collect();
        // Real literal.
        if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'_') {
                j += 1;
            }
            let text: String = src[start..j].chars().filter(|c| *c != '_').collect();
            let v: f64 = text
                .parse()
                .map_err(|_| CompileError::new(line, format!("bad real literal {text}")))?;
            return Ok((Tok::Real(v), j));
        }
        let j = skip_ws(bytes, i);
        if bytes.get(j) == Some(&b'\'') && is_base_start(bytes, j + 1) {
            size = Some(
                digits
                    .parse::<u32>()
                    .map_err(|_| CompileError::new(line, "literal size too large"))?,
            );
            i = j;
        } else {
            return Ok((Tok::Int(digits), i));
        }
    }
    // At the apostrophe.
    i += 1;
    let mut signed = false;
    if matches!(bytes[i], b's' | b'S') {
        signed = true;
        i += 1;
    }
    let base = (bytes[i] as char).to_ascii_lowercase();
    i += 1;
    i = skip_ws(bytes, i);
    let dstart = i;
    while i < bytes.len()
        && (bytes[i].is_ascii_hexdigit()
            || matches!(bytes[i], b'_' | b'x' | b'X' | b'z' | b'Z' | b'?'))
    {
        i += 1;
    }
    let digits: String = src[dstart..i]
        .chars()
        .filter(|c| *c != '_')
        .map(|c| c.to_ascii_lowercase())
        .collect();
    if digits.is_empty() {
        return Err(CompileError::new(line, "based literal without digits"));
    }
    Ok((
        Tok::Based {
            size,
            signed,
            base,
            digits,
        },
        i,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn based_literals_with_spaces() {
        assert_eq!(
            toks("8 'h A_B"),
            vec![
                Tok::Based {
                    size: Some(8),
                    signed: false,
                    base: 'h',
                    digits: "ab".into()
                },
                Tok::Eof
            ]
        );
        assert_eq!(
            toks("'b1x0"),
            vec![
                Tok::Based {
                    size: None,
                    signed: false,
                    base: 'b',
                    digits: "1x0".into()
                },
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_directives_skipped() {
        let t = toks("`timescale 1ns/1ps\n// c\n/* block\n */ a <= b;");
        assert_eq!(
            t,
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("<="),
                Tok::Ident("b".into()),
                Tok::Punct(";"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn maximal_munch() {
        assert_eq!(
            toks("a !== b >>> 2"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("!=="),
                Tok::Ident("b".into()),
                Tok::Punct(">>>"),
                Tok::Int("2".into()),
                Tok::Eof
            ]
        );
    }
}
