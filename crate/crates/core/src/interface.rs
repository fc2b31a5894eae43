// SPDX-License-Identifier: Apache-2.0

//! Module-header interface extraction: ports, widths, clock/reset flags.
//! Only declarations are parsed; module bodies are skipped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortDirection {
    Input,
    Output,
    Inout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: PortDirection,
    pub width: u32,
    #[serde(default)]
    pub is_clock: bool,
    #[serde(default)]
    pub is_reset: bool,
}

impl PortDecl {
    pub fn is_input(&self) -> bool {
        self.direction == PortDirection::Input
    }

    /// Reset polarity from the name: `rst_n`, `rstn`, `reset_n`, `nrst` are active-low.
    pub fn active_low(&self) -> bool {
        let n = self.name.to_ascii_lowercase();
        n.ends_with("_n") || n.ends_with("_b") || n.ends_with("rstn") || n.ends_with("resetn") || n.starts_with("n_") || n.starts_with("nrst") || n.starts_with("nreset")
    }
}

pub fn is_clock_name(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n.contains("clk") || n.contains("clock")
}

pub fn is_reset_name(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n.contains("rst") || n.contains("reset")
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(i64),
    Punct(char),
}

fn strip_comments(src: &str) -> String {
    let b = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'/' && b.get(i + 1) == Some(&b'/') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if b[i] == b'/' && b.get(i + 1) == Some(&b'*') {
            i += 2;
            while i + 1 < b.len() && !(b[i] == b'*' && b[i + 1] == b'/') {
                if b[i] == b'\n' {
                    out.push('\n');
                }
                i += 1;
            }
            i += 2;
        } else if b[i] == b'"' {
            i += 1;
            while i < b.len() && b[i] != b'"' {
                if b[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            out.push_str("\"\"");
        } else if b[i] == b'`' {
            // Directives are dropped up to end of line.
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else {
            let c = src[i..].chars().next().unwrap_or(' ');
            out.push(c);
            i += c.len_utf8();
        }
    }
    out
}

fn tokenize(src: &str) -> Vec<Tok> {
    let text = strip_comments(src);
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '\\' {
            let start = i;
            if c == '\\' {
                i += 1;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                toks.push(Tok::Ident(chars[start + 1..i].iter().collect()));
                continue;
            }
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() || c == '\'' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'' || chars[i] == '?') {
                i += 1;
            }
            let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            toks.push(Tok::Num(parse_number(&text).unwrap_or(0)));
        } else {
            toks.push(Tok::Punct(c));
            i += 1;
        }
    }
    toks
}

fn parse_number(text: &str) -> Option<i64> {
    match text.find('\'') {
        None => text.parse().ok(),
        Some(pos) => {
            let rest = text[pos + 1..].trim_start_matches(['s', 'S']);
            let (radix, digits) = match rest.chars().next()?.to_ascii_lowercase() {
                'h' => (16, &rest[1..]),
                'd' => (10, &rest[1..]),
                'o' => (8, &rest[1..]),
                'b' => (2, &rest[1..]),
                _ => return None,
            };
            i64::from_str_radix(digits, radix).ok()
        }
    }
}

struct ModuleSpan {
    name: String,
    /// Token index just after the module name.
    header: usize,
    /// Token index of `endmodule` (or end of input).
    end: usize,
}

fn modules(toks: &[Tok]) -> Vec<ModuleSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if matches!(&toks[i], Tok::Ident(k) if k == "module" || k == "macromodule") {
            if let Some(Tok::Ident(name)) = toks.get(i + 1) {
                let mut j = i + 2;
                while j < toks.len() && !matches!(&toks[j], Tok::Ident(k) if k == "endmodule") {
                    j += 1;
                }
                out.push(ModuleSpan {
                    name: name.clone(),
                    header: i + 2,
                    end: j,
                });
                i = j;
            }
        }
        i += 1;
    }
    out
}

/// Names of all modules defined in `source`, in order.
pub fn module_names(source: &str) -> Vec<String> {
    modules(&tokenize(source)).into_iter().map(|m| m.name).collect()
}

/// The first module not instantiated by another module in the same source.
pub fn top_module(source: &str) -> Option<String> {
    let toks = tokenize(source);
    let mods = modules(&toks);
    let used = |name: &str| {
        mods.iter()
            .any(|m| m.name != name && toks[m.header..m.end].iter().any(|t| matches!(t, Tok::Ident(n) if n == name)))
    };
    mods.iter()
        .find(|m| !used(&m.name))
        .or(mods.last())
        .map(|m| m.name.clone())
}

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
    end: usize,
    params: HashMap<String, i64>,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        if self.pos < self.end {
            self.toks.get(self.pos)
        } else {
            None
        }
    }

    fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        if self.pos + k < self.end {
            self.toks.get(self.pos + k)
        } else {
            None
        }
    }

    fn bump(&mut self) -> Option<&'a Tok> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(k)) if k == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<String> {
        match self.peek() {
            Some(Tok::Ident(n)) => {
                self.pos += 1;
                Some(n.clone())
            }
            _ => None,
        }
    }

    fn err(&self, what: &str) -> ModelError {
        ModelError::Interface(what.to_string())
    }

    // Constant expressions: precedence climbing over a small operator set.
    fn expr(&mut self) -> Result<i64, ModelError> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> Result<i64, ModelError> {
        let mut lhs = self.unary()?;
        loop {
            let (op, prec, len) = match (self.peek(), self.peek_at(1)) {
                (Some(Tok::Punct('*')), Some(Tok::Punct('*'))) => ("**", 4, 2),
                (Some(Tok::Punct('<')), Some(Tok::Punct('<'))) => ("<<", 1, 2),
                (Some(Tok::Punct('>')), Some(Tok::Punct('>'))) => (">>", 1, 2),
                (Some(Tok::Punct('*')), _) => ("*", 3, 1),
                (Some(Tok::Punct('/')), _) => ("/", 3, 1),
                (Some(Tok::Punct('%')), _) => ("%", 3, 1),
                (Some(Tok::Punct('+')), _) => ("+", 2, 1),
                (Some(Tok::Punct('-')), _) => ("-", 2, 1),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.pos += len;
            let rhs = self.binary(prec + 1)?;
            lhs = match op {
                "**" => lhs.checked_pow(u32::try_from(rhs).map_err(|_| self.err("bad exponent"))?),
                "<<" => lhs.checked_shl(u32::try_from(rhs).map_err(|_| self.err("bad shift"))?),
                ">>" => lhs.checked_shr(u32::try_from(rhs).map_err(|_| self.err("bad shift"))?),
                "*" => lhs.checked_mul(rhs),
                "/" => lhs.checked_div(rhs),
                "%" => lhs.checked_rem(rhs),
                "+" => lhs.checked_add(rhs),
                _ => lhs.checked_sub(rhs),
            }
            .ok_or_else(|| self.err("constant expression overflow"))?;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<i64, ModelError> {
        match self.bump() {
            Some(Tok::Num(n)) => Ok(*n),
            Some(Tok::Punct('-')) => Ok(-self.unary()?),
            Some(Tok::Punct('+')) => self.unary(),
            Some(Tok::Punct('(')) => {
                let v = self.expr()?;
                if !self.eat_punct(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(v)
            }
            Some(Tok::Ident(f)) if f == "$clog2" => {
                if !self.eat_punct('(') {
                    return Err(self.err("expected '(' after $clog2"));
                }
                let v = self.expr()?;
                self.eat_punct(')');
                let mut r = 0;
                while (1i64 << r) < v {
                    r += 1;
                }
                Ok(r)
            }
            Some(Tok::Ident(name)) => self
                .params
                .get(name)
                .copied()
                .ok_or_else(|| ModelError::Interface(format!("unknown constant '{name}' in declaration"))),
            _ => Err(self.err("expected constant expression")),
        }
    }

    /// Optional `[msb:lsb]`, returning the width.
    fn range(&mut self) -> Result<Option<u32>, ModelError> {
        if !self.eat_punct('[') {
            return Ok(None);
        }
        let msb = self.expr()?;
        if !self.eat_punct(':') {
            return Err(self.err("expected ':' in range"));
        }
        let lsb = self.expr()?;
        if !self.eat_punct(']') {
            return Err(self.err("expected ']'"));
        }
        Ok(Some(((msb - lsb).unsigned_abs() + 1) as u32))
    }

    /// `parameter [type] [range] A = e, B = e` up to `;` or the closing `)` of a header list.
    fn param_list(&mut self) -> Result<(), ModelError> {
        loop {
            while self.eat_kw("parameter") || self.eat_kw("localparam") || self.eat_kw("integer") || self.eat_kw("signed") || self.eat_kw("unsigned") || self.eat_kw("logic") || self.eat_kw("int") {}
            self.range()?;
            let Some(name) = self.ident() else {
                return Err(self.err("expected parameter name"));
            };
            if !self.eat_punct('=') {
                return Err(self.err("expected '=' in parameter"));
            }
            let start = self.pos;
            match self.expr() {
                Ok(v) => {
                    self.params.insert(name, v);
                }
                Err(_) => {
                    // Non-integer parameters (strings, reals) are skipped.
                    self.pos = start;
                    let mut depth = 0i32;
                    while let Some(t) = self.peek() {
                        match t {
                            Tok::Punct('(') | Tok::Punct('[') | Tok::Punct('{') => depth += 1,
                            Tok::Punct(')') | Tok::Punct(']') | Tok::Punct('}') if depth > 0 => depth -= 1,
                            Tok::Punct(')') | Tok::Punct(',') | Tok::Punct(';') if depth == 0 => break,
                            _ => {}
                        }
                        self.pos += 1;
                    }
                }
            }
            if !self.eat_punct(',') {
                return Ok(());
            }
        }
    }
}

fn direction(t: Option<&Tok>) -> Option<PortDirection> {
    match t {
        Some(Tok::Ident(k)) => match k.as_str() {
            "input" => Some(PortDirection::Input),
            "output" => Some(PortDirection::Output),
            "inout" => Some(PortDirection::Inout),
            _ => None,
        },
        _ => None,
    }
}

const NET_WORDS: [&str; 9] = ["wire", "reg", "logic", "signed", "unsigned", "tri", "var", "bit", "integer"];

/// Ports of `module_name` in header order.
pub fn parse_interface(source: &str, module_name: &str) -> Result<Vec<PortDecl>, ModelError> {
    let toks = tokenize(source);
    let mods = modules(&toks);
    let m = mods
        .iter()
        .find(|m| m.name == module_name)
        .ok_or_else(|| ModelError::ModuleNotFound(module_name.to_string()))?;
    let mut c = Cursor {
        toks: &toks,
        pos: m.header,
        end: m.end,
        params: HashMap::new(),
    };
    if c.eat_punct('#') {
        if !c.eat_punct('(') {
            return Err(c.err("expected '(' after '#'"));
        }
        if !c.eat_punct(')') {
            c.param_list()?;
            if !c.eat_punct(')') {
                return Err(c.err("expected ')' after parameter list"));
            }
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut decls: HashMap<String, (PortDirection, u32)> = HashMap::new();
    if c.eat_punct('(') {
        let mut cur: Option<(PortDirection, Option<u32>, bool)> = None;
        while !c.eat_punct(')') {
            if c.peek().is_none() {
                return Err(c.err("unterminated port list"));
            }
            if let Some(dir) = direction(c.peek()) {
                c.pos += 1;
                let mut integer = false;
                while let Some(Tok::Ident(k)) = c.peek() {
                    if NET_WORDS.contains(&k.as_str()) {
                        integer |= k == "integer";
                        c.pos += 1;
                    } else {
                        break;
                    }
                }
                let w = c.range()?;
                cur = Some((dir, w, integer));
            }
            let name = c.ident().ok_or_else(|| c.err("expected port name"))?;
            if let Some((dir, w, integer)) = cur {
                let width = w.unwrap_or(if integer { 32 } else { 1 });
                decls.insert(name.clone(), (dir, width));
            }
            order.push(name);
            // Skip unpacked dims or default values up to the next separator.
            while !matches!(c.peek(), Some(Tok::Punct(',')) | Some(Tok::Punct(')')) | None) {
                c.pos += 1;
            }
            c.eat_punct(',');
        }
    }
    // Body declarations: parameters and non-ANSI port directions.
    let mut depth = 0usize;
    while let Some(t) = c.peek() {
        match t {
            Tok::Ident(k) if matches!(k.as_str(), "function" | "task") => depth += 1,
            Tok::Ident(k) if matches!(k.as_str(), "endfunction" | "endtask") => depth = depth.saturating_sub(1),
            Tok::Ident(k) if depth == 0 && (k == "parameter" || k == "localparam") => {
                c.pos += 1;
                c.param_list()?;
                continue;
            }
            _ if depth == 0 && direction(Some(t)).is_some() => {
                let dir = direction(Some(t)).unwrap_or(PortDirection::Input);
                c.pos += 1;
                let mut integer = false;
                while let Some(Tok::Ident(k)) = c.peek() {
                    if NET_WORDS.contains(&k.as_str()) {
                        integer |= k == "integer";
                        c.pos += 1;
                    } else {
                        break;
                    }
                }
                let width = c.range()?.unwrap_or(if integer { 32 } else { 1 });
                while let Some(name) = c.ident() {
                    decls.insert(name, (dir, width));
                    while !matches!(c.peek(), Some(Tok::Punct(',')) | Some(Tok::Punct(';')) | None) {
                        c.pos += 1;
                    }
                    if !c.eat_punct(',') {
                        break;
                    }
                }
                continue;
            }
            _ => {}
        }
        c.pos += 1;
    }
    let mut ports = Vec::with_capacity(order.len());
    for name in order {
        let (direction, width) = *decls
            .get(&name)
            .ok_or_else(|| ModelError::Interface(format!("port '{name}' has no direction")))?;
        let one_bit_input = direction == PortDirection::Input && width == 1;
        ports.push(PortDecl {
            is_clock: one_bit_input && is_clock_name(&name),
            is_reset: one_bit_input && !is_clock_name(&name) && is_reset_name(&name),
            name,
            direction,
            width,
        });
    }
    Ok(ports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ansi_header() {
        let src = "// adder\nmodule add #(parameter W = 8, parameter N = W*2) (\n  input wire clk, input rst_n,\n  input [W-1:0] a, b,\n  output reg [N-1:0] y, output co);\nendmodule\n";
        let p = parse_interface(src, "add").unwrap();
        let got: Vec<(&str, PortDirection, u32, bool, bool)> = p
            .iter()
            .map(|p| (p.name.as_str(), p.direction, p.width, p.is_clock, p.is_reset))
            .collect();
        use PortDirection::*;
        assert_eq!(
            got,
            vec![
                ("clk", Input, 1, true, false),
                ("rst_n", Input, 1, false, true),
                ("a", Input, 8, false, false),
                ("b", Input, 8, false, false),
                ("y", Output, 16, false, false),
                ("co", Output, 1, false, false),
            ]
        );
        assert!(p[1].active_low());
    }

    #[test]
    fn non_ansi_header() {
        let src = "module m(a, b, y);\n  parameter W = 4;\n  input [W-1:0] a;\n  input b;\n  output [3:0] y;\n  function [3:0] f; input [3:0] x; f = x; endfunction\n  assign y = f(a);\nendmodule";
        let p = parse_interface(src, "m").unwrap();
        assert_eq!(p.iter().map(|p| p.width).collect::<Vec<_>>(), vec![4, 1, 4]);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn top_module_inference() {
        let src = "module leaf(input a, output y); assign y = a; endmodule\nmodule top(input a, output y); leaf u(.a(a), .y(y)); endmodule";
        assert_eq!(top_module(src).as_deref(), Some("top"));
        assert_eq!(module_names(src), vec!["leaf", "top"]);
    }

    #[test]
    fn missing_module() {
        assert!(matches!(
            parse_interface("module a; endmodule", "b"),
            Err(ModelError::ModuleNotFound(_))
        ));
    }
}
