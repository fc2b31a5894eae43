// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for the supported Verilog subset.

use num_bigint::BigUint;

use crate::ast::*;
use crate::error::CompileError;
use crate::lexer::{tokenize, Tok, Token};
use crate::value::{Bit, Logic};

pub fn parse(src: &str) -> Result<SourceFile, CompileError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut modules = Vec::new();
    while !p.at_eof() {
        if p.eat_kw("module") || p.eat_kw("macromodule") {
            modules.push(p.module()?);
        } else {
            return Err(p.err(format!("expected 'module', found {}", p.describe())));
        }
    }
    Ok(SourceFile { modules })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const KEYWORDS: &[&str] = &[
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "logic", "integer",
    "parameter", "localparam", "assign", "always", "always_comb", "always_ff", "always_latch",
    "initial", "begin", "end", "if", "else", "case", "casez", "casex", "endcase", "default",
    "for", "while", "repeat", "forever", "function", "endfunction", "generate", "endgenerate",
    "genvar", "posedge", "negedge", "or", "signed", "wait", "task", "endtask",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> CompileError {
        CompileError::new(self.line(), msg)
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::System(s) => format!("'{s}'"),
            Tok::Int(s) => format!("number {s}"),
            Tok::Based { digits, .. } => format!("literal {digits}"),
            Tok::Real(v) => format!("number {v}"),
            Tok::Str(_) => "string".into(),
            Tok::Punct(p) => format!("'{p}'"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), CompileError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{p}', found {}", self.describe())))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, CompileError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.err(format!("expected identifier, found {}", self.describe()))),
        }
    }

    // ---- module structure ----

    fn module(&mut self) -> Result<Module, CompileError> {
        let line = self.line();
        let name = self.ident()?;
        let mut params = Vec::new();
        let mut items = Vec::new();
        let mut port_order = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            if !self.is_punct(")") {
                loop {
                    let local = if self.eat_kw("localparam") {
                        true
                    } else {
                        self.eat_kw("parameter");
                        false
                    };
                    let (_, range) = self.param_type()?;
                    let pname = self.ident()?;
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    params.push(ParamDecl {
                        name: pname,
                        value,
                        range,
                        local,
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        if self.eat_punct("(") {
            if !self.is_punct(")") {
                let ansi = self.is_kw("input") || self.is_kw("output") || self.is_kw("inout");
                if ansi {
                    let mut cur: Option<Decl> = None;
                    loop {
                        let l = self.line();
                        if let Some(dir) = self.direction() {
                            let (kind, signed, range) = self.net_type()?;
                            let pname = self.ident()?;
                            let d = Decl {
                                name: pname,
                                line: l,
                                dir: Some(dir),
                                kind,
                                signed,
                                range,
                                array: None,
                                init: None,
                            };
                            port_order.push(d.name.clone());
                            cur = Some(d.clone());
                            items.push(Item::Decl(d));
                        } else {
                            let pname = self.ident()?;
                            let mut d = cur
                                .clone()
                                .ok_or_else(|| self.err("port without direction"))?;
                            d.name = pname;
                            d.line = l;
                            port_order.push(d.name.clone());
                            items.push(Item::Decl(d));
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                } else {
                    loop {
                        port_order.push(self.ident()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        while !self.eat_kw("endmodule") {
            if self.at_eof() {
                return Err(self.err(format!("missing 'endmodule' for module {name}")));
            }
            self.module_item(&mut items)?;
        }
        Ok(Module {
            name,
            line,
            params,
            port_order,
            items,
        })
    }

    fn direction(&mut self) -> Option<Direction> {
        if self.eat_kw("input") {
            Some(Direction::Input)
        } else if self.eat_kw("output") {
            Some(Direction::Output)
        } else if self.eat_kw("inout") {
            Some(Direction::Inout)
        } else {
            None
        }
    }

    /// `[wire|reg|logic|integer] [signed] [range]`
    fn net_type(&mut self) -> Result<(Option<NetKind>, bool, Option<Range>), CompileError> {
        let kind = if self.eat_kw("wire") {
            Some(NetKind::Wire)
        } else if self.eat_kw("reg") || self.eat_kw("logic") {
            Some(NetKind::Reg)
        } else if self.eat_kw("integer") {
            Some(NetKind::Integer)
        } else {
            None
        };
        let signed = self.eat_kw("signed");
        self.eat_kw("unsigned");
        let range = self.opt_range()?;
        Ok((kind, signed, range))
    }

    fn param_type(&mut self) -> Result<(bool, Option<Range>), CompileError> {
        self.eat_kw("integer");
        self.eat_kw("int");
        let signed = self.eat_kw("signed");
        let range = self.opt_range()?;
        Ok((signed, range))
    }

    fn opt_range(&mut self) -> Result<Option<Range>, CompileError> {
        if self.is_punct("[") {
            self.bump();
            let msb = self.expr()?;
            self.expect_punct(":")?;
            let lsb = self.expr()?;
            self.expect_punct("]")?;
            Ok(Some(Range { msb, lsb }))
        } else {
            Ok(None)
        }
    }

    fn module_item(&mut self, items: &mut Vec<Item>) -> Result<(), CompileError> {
        let line = self.line();
        if self.eat_punct(";") {
            return Ok(());
        }
        if let Some(dir) = self.direction() {
            let (kind, signed, range) = self.net_type()?;
            loop {
                let l = self.line();
                let name = self.ident()?;
                let init = if self.eat_punct("=") {
                    Some(self.expr()?)
                } else {
                    None
                };
                items.push(Item::Decl(Decl {
                    name,
                    line: l,
                    dir: Some(dir),
                    kind,
                    signed,
                    range: range.clone(),
                    array: None,
                    init,
                }));
                if !self.eat_punct(",") {
                    break;
                }
            }
            return self.expect_punct(";");
        }
        if self.is_kw("wire") || self.is_kw("reg") || self.is_kw("logic") || self.is_kw("integer") {
            let (kind, signed, range) = self.net_type()?;
            self.var_list(kind, signed, range, items)?;
            return self.expect_punct(";");
        }
        if self.eat_kw("genvar") {
            self.ident()?;
            while self.eat_punct(",") {
                self.ident()?;
            }
            return self.expect_punct(";");
        }
        if self.is_kw("parameter") || self.is_kw("localparam") {
            let local = self.is_kw("localparam");
            self.bump();
            let (_, range) = self.param_type()?;
            loop {
                let name = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                let decl = ParamDecl {
                    name,
                    value,
                    range: range.clone(),
                    local,
                };
                items.push(Item::Param(decl));
                if !self.eat_punct(",") {
                    break;
                }
            }
            return self.expect_punct(";");
        }
        if self.eat_kw("assign") {
            if self.eat_punct("#") {
                self.delay_value()?;
            }
            loop {
                let l = self.line();
                let lhs = self.lvalue()?;
                self.expect_punct("=")?;
                let rhs = self.expr()?;
                items.push(Item::Assign { lhs, rhs, line: l });
                if !self.eat_punct(",") {
                    break;
                }
            }
            return self.expect_punct(";");
        }
        if self.eat_kw("always") || self.eat_kw("always_ff") || self.eat_kw("always_latch") {
            let body = self.stmt()?;
            items.push(Item::Always { body, comb: false });
            return Ok(());
        }
        if self.eat_kw("always_comb") {
            let body = self.stmt()?;
            items.push(Item::Always { body, comb: true });
            return Ok(());
        }
        if self.eat_kw("initial") {
            let body = self.stmt()?;
            items.push(Item::Initial(body));
            return Ok(());
        }
        if self.eat_kw("function") {
            let f = self.function(line)?;
            items.push(Item::Function(f));
            return Ok(());
        }
        if self.eat_kw("generate") {
            while !self.eat_kw("endgenerate") {
                if self.at_eof() {
                    return Err(self.err("missing 'endgenerate'"));
                }
                self.module_item(items)?;
            }
            return Ok(());
        }
        if self.is_kw("for") {
            self.bump();
            let g = self.generate_for(line)?;
            items.push(Item::GenerateFor(g));
            return Ok(());
        }
        if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_items = self.generate_body()?;
            let else_items = if self.eat_kw("else") {
                self.generate_body()?
            } else {
                Vec::new()
            };
            items.push(Item::GenerateIf {
                cond,
                then_items,
                else_items,
            });
            return Ok(());
        }
        if self.is_kw("task") {
            return Err(self.err("tasks are not supported"));
        }
        if let Tok::Ident(_) = self.peek() {
            let module = self.ident()?;
            let mut pvals = Vec::new();
            if self.eat_punct("#") {
                self.expect_punct("(")?;
                if !self.is_punct(")") {
                    loop {
                        if self.eat_punct(".") {
                            let n = self.ident()?;
                            self.expect_punct("(")?;
                            let e = self.expr()?;
                            self.expect_punct(")")?;
                            pvals.push((Some(n), e));
                        } else {
                            pvals.push((None, self.expr()?));
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
            }
            loop {
                let l = self.line();
                let name = self.ident()?;
                if self.is_punct("[") {
                    return Err(self.err("instance arrays are not supported"));
                }
                self.expect_punct("(")?;
                let mut conns = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        if self.eat_punct(".") {
                            let n = self.ident()?;
                            self.expect_punct("(")?;
                            let e = if self.is_punct(")") {
                                None
                            } else {
                                Some(self.expr()?)
                            };
                            self.expect_punct(")")?;
                            conns.push((Some(n), e));
                        } else if self.is_punct(",") || self.is_punct(")") {
                            conns.push((None, None));
                        } else {
                            conns.push((None, Some(self.expr()?)));
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                items.push(Item::Instance(Instance {
                    module: module.clone(),
                    name,
                    line: l,
                    params: pvals.clone(),
                    conns,
                }));
                if !self.eat_punct(",") {
                    break;
                }
            }
            return self.expect_punct(";");
        }
        Err(self.err(format!("unexpected {} in module body", self.describe())))
    }

    fn generate_body(&mut self) -> Result<Vec<Item>, CompileError> {
        let mut items = Vec::new();
        if self.eat_kw("begin") {
            if self.eat_punct(":") {
                self.ident()?;
            }
            while !self.eat_kw("end") {
                if self.at_eof() {
                    return Err(self.err("missing 'end' in generate block"));
                }
                self.module_item(&mut items)?;
            }
        } else {
            self.module_item(&mut items)?;
        }
        Ok(items)
    }

    fn generate_for(&mut self, line: usize) -> Result<GenerateFor, CompileError> {
        self.expect_punct("(")?;
        self.eat_kw("genvar");
        let var = self.ident()?;
        self.expect_punct("=")?;
        let init = self.expr()?;
        self.expect_punct(";")?;
        let cond = self.expr()?;
        self.expect_punct(";")?;
        let step_var = self.ident()?;
        if step_var != var {
            return Err(self.err("generate loop must step its own genvar"));
        }
        let step = if self.eat_punct("=") {
            self.expr()?
        } else if self.eat_punct("+") {
            self.expect_punct("+")?;
            Expr::Binary(
                BinaryOp::Add,
                Box::new(Expr::Ident(var.clone(), line)),
                Box::new(int_lit(1)),
            )
        } else {
            return Err(self.err("unsupported generate loop step"));
        };
        self.expect_punct(")")?;
        let mut label = None;
        let mut items = Vec::new();
        if self.eat_kw("begin") {
            if self.eat_punct(":") {
                label = Some(self.ident()?);
            }
            while !self.eat_kw("end") {
                if self.at_eof() {
                    return Err(self.err("missing 'end' in generate loop"));
                }
                self.module_item(&mut items)?;
            }
        } else {
            self.module_item(&mut items)?;
        }
        Ok(GenerateFor {
            var,
            init,
            cond,
            step,
            label,
            items,
            line,
        })
    }

    fn var_list(
        &mut self,
        kind: Option<NetKind>,
        signed: bool,
        range: Option<Range>,
        items: &mut Vec<Item>,
    ) -> Result<(), CompileError> {
        loop {
            let l = self.line();
            let name = self.ident()?;
            let array = self.opt_range()?;
            let init = if self.eat_punct("=") {
                Some(self.expr()?)
            } else {
                None
            };
            items.push(Item::Decl(Decl {
                name,
                line: l,
                dir: None,
                kind,
                signed,
                range: range.clone(),
                array,
                init,
            }));
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(())
    }

    fn function(&mut self, line: usize) -> Result<Function, CompileError> {
        self.eat_kw("automatic");
        let mut integer = false;
        let mut signed = false;
        let mut range = None;
        if self.eat_kw("integer") || self.eat_kw("int") {
            integer = true;
        } else {
            self.eat_kw("reg");
            self.eat_kw("logic");
            signed = self.eat_kw("signed");
            range = self.opt_range()?;
        }
        let name = self.ident()?;
        let mut inputs = Vec::new();
        let mut locals = Vec::new();
        if self.eat_punct("(") {
            let mut cur: Option<Decl> = None;
            if !self.is_punct(")") {
                loop {
                    let l = self.line();
                    if self.direction().is_some() {
                        let (kind, s, r) = self.net_type()?;
                        let n = self.ident()?;
                        let d = Decl {
                            name: n,
                            line: l,
                            dir: Some(Direction::Input),
                            kind,
                            signed: s,
                            range: r,
                            array: None,
                            init: None,
                        };
                        cur = Some(d.clone());
                        inputs.push(d);
                    } else {
                        let n = self.ident()?;
                        let mut d = cur.clone().ok_or_else(|| self.err("argument without direction"))?;
                        d.name = n;
                        inputs.push(d);
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        let mut body = Vec::new();
        while !self.eat_kw("endfunction") {
            if self.at_eof() {
                return Err(self.err("missing 'endfunction'"));
            }
            if self.direction().is_some() {
                let (kind, s, r) = self.net_type()?;
                loop {
                    let l = self.line();
                    let n = self.ident()?;
                    inputs.push(Decl {
                        name: n,
                        line: l,
                        dir: Some(Direction::Input),
                        kind,
                        signed: s,
                        range: r.clone(),
                        array: None,
                        init: None,
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            } else if self.is_kw("reg") || self.is_kw("logic") || self.is_kw("integer") {
                let (kind, s, r) = self.net_type()?;
                let mut tmp = Vec::new();
                self.var_list(kind, s, r, &mut tmp)?;
                self.expect_punct(";")?;
                for it in tmp {
                    if let Item::Decl(d) = it {
                        locals.push(d);
                    }
                }
            } else {
                body.push(self.stmt()?);
            }
        }
        Ok(Function {
            name,
            line,
            signed,
            range,
            integer,
            inputs,
            locals,
            body: Stmt::Block(body, Vec::new()),
        })
    }

    // ---- statements ----

    fn stmt(&mut self) -> Result<Stmt, CompileError> {
        let line = self.line();
        if self.eat_punct(";") {
            return Ok(Stmt::Null);
        }
        if self.eat_kw("begin") {
            if self.eat_punct(":") {
                self.ident()?;
            }
            let mut stmts = Vec::new();
            let mut decls = Vec::new();
            while !self.eat_kw("end") {
                if self.at_eof() {
                    return Err(self.err("missing 'end'"));
                }
                if self.is_kw("reg") || self.is_kw("integer") || self.is_kw("logic") {
                    let (kind, s, r) = self.net_type()?;
                    let mut tmp = Vec::new();
                    self.var_list(kind, s, r, &mut tmp)?;
                    self.expect_punct(";")?;
                    for it in tmp {
                        if let Item::Decl(d) = it {
                            decls.push(d);
                        }
                    }
                    continue;
                }
                stmts.push(self.stmt()?);
            }
            if self.eat_punct(":") {
                self.ident()?;
            }
            return Ok(Stmt::Block(stmts, decls));
        }
        if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_s = Box::new(self.stmt()?);
            let else_s = if self.eat_kw("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt::If {
                cond,
                then_s,
                else_s,
            });
        }
        self.eat_kw("unique");
        self.eat_kw("priority");
        let case_kind = if self.eat_kw("case") {
            Some(CaseKind::Case)
        } else if self.eat_kw("casez") {
            Some(CaseKind::Casez)
        } else if self.eat_kw("casex") {
            Some(CaseKind::Casex)
        } else {
            None
        };
        if let Some(kind) = case_kind {
            self.expect_punct("(")?;
            let sel = self.expr()?;
            self.expect_punct(")")?;
            let mut arms = Vec::new();
            let mut default = None;
            while !self.eat_kw("endcase") {
                if self.at_eof() {
                    return Err(self.err("missing 'endcase'"));
                }
                if self.eat_kw("default") {
                    self.eat_punct(":");
                    default = Some(Box::new(self.stmt()?));
                    continue;
                }
                let mut labels = vec![self.expr()?];
                while self.eat_punct(",") {
                    labels.push(self.expr()?);
                }
                self.expect_punct(":")?;
                let s = self.stmt()?;
                arms.push((labels, s));
            }
            return Ok(Stmt::Case {
                kind,
                sel,
                arms,
                default,
            });
        }
        if self.eat_kw("for") {
            self.expect_punct("(")?;
            if self.is_kw("integer") || self.is_kw("int") || self.is_kw("genvar") {
                self.bump();
            }
            let init = Box::new(self.simple_assign(line)?);
            self.expect_punct(";")?;
            let cond = self.expr()?;
            self.expect_punct(";")?;
            let step = Box::new(self.simple_assign(line)?);
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::For {
                init,
                cond,
                step,
                body,
            });
        }
        if self.eat_kw("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_kw("repeat") {
            self.expect_punct("(")?;
            let count = self.expr()?;
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::Repeat { count, body });
        }
        if self.eat_kw("forever") {
            return Ok(Stmt::Forever(Box::new(self.stmt()?)));
        }
        if self.eat_kw("wait") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::Wait(cond, body));
        }
        if self.eat_punct("#") {
            let d = self.delay_value()?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::Delay(d, body));
        }
        if self.eat_punct("@") {
            let ev = self.event_ctl()?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::Event(ev, body));
        }
        if let Tok::System(name) = self.peek().clone() {
            self.bump();
            let mut args = Vec::new();
            if self.eat_punct("(") {
                if !self.is_punct(")") {
                    loop {
                        if self.is_punct(",") {
                            args.push(Expr::Str(String::new()));
                        } else {
                            args.push(self.expr()?);
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
            }
            self.expect_punct(";")?;
            return Ok(Stmt::SysTask { name, args, line });
        }
        let s = self.assign_stmt(line)?;
        self.expect_punct(";")?;
        Ok(s)
    }

    fn delay_value(&mut self) -> Result<Expr, CompileError> {
        if self.eat_punct("(") {
            let e = self.expr()?;
            self.expect_punct(")")?;
            Ok(e)
        } else {
            match self.bump() {
                Tok::Int(s) => Ok(Expr::Literal {
                    value: Logic::from_biguint(
                        BigUint::parse_bytes(s.as_bytes(), 10).unwrap_or_default(),
                        64,
                    ),
                    signed: false,
                }),
                Tok::Real(v) => Ok(Expr::Literal {
                    value: Logic::from_u64(v.round().max(0.0) as u64, 64),
                    signed: false,
                }),
                Tok::Ident(s) => Ok(Expr::Ident(s, self.line())),
                _ => Err(self.err("expected delay value")),
            }
        }
    }

    fn event_ctl(&mut self) -> Result<EventCtl, CompileError> {
        if self.eat_punct("*") {
            return Ok(EventCtl::Star);
        }
        if !self.is_punct("(") {
            let l = self.line();
            let n = self.ident()?;
            return Ok(EventCtl::List(vec![(Edge::Any, Expr::Ident(n, l))]));
        }
        self.bump();
        if self.eat_punct("*") {
            self.expect_punct(")")?;
            return Ok(EventCtl::Star);
        }
        let mut list = Vec::new();
        loop {
            let edge = if self.eat_kw("posedge") {
                Edge::Pos
            } else if self.eat_kw("negedge") {
                Edge::Neg
            } else {
                Edge::Any
            };
            list.push((edge, self.expr()?));
            if !(self.eat_kw("or") || self.eat_punct(",")) {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(EventCtl::List(list))
    }

    /// Assignment used in `for` headers: `i = e`, `i++`, `i += e`.
    fn simple_assign(&mut self, line: usize) -> Result<Stmt, CompileError> {
        self.assign_stmt(line)
    }

    fn assign_stmt(&mut self, line: usize) -> Result<Stmt, CompileError> {
        let lhs = self.lvalue()?;
        if self.eat_punct("=") {
            let delay = if self.eat_punct("#") {
                Some(self.delay_value()?)
            } else {
                None
            };
            let rhs = self.expr()?;
            return Ok(Stmt::Assign {
                lhs,
                rhs,
                nonblocking: false,
                delay,
                line,
            });
        }
        if self.eat_punct("<=") {
            let delay = if self.eat_punct("#") {
                Some(self.delay_value()?)
            } else {
                None
            };
            let rhs = self.expr()?;
            return Ok(Stmt::Assign {
                lhs,
                rhs,
                nonblocking: true,
                delay,
                line,
            });
        }
        // SystemVerilog increment / compound assignment.
        let compound = [
            ("+", BinaryOp::Add),
            ("-", BinaryOp::Sub),
            ("*", BinaryOp::Mul),
            ("&", BinaryOp::And),
            ("|", BinaryOp::Or),
            ("^", BinaryOp::Xor),
        ];
        for (p, op) in compound {
            if self.is_punct(p) {
                if matches!(self.peek_at(1), Tok::Punct("=")) {
                    self.bump();
                    self.bump();
                    let rhs = self.expr()?;
                    return Ok(Stmt::Assign {
                        rhs: Expr::Binary(op, Box::new(lhs.clone()), Box::new(rhs)),
                        lhs,
                        nonblocking: false,
                        delay: None,
                        line,
                    });
                }
                if (p == "+" || p == "-") && matches!(self.peek_at(1), Tok::Punct(q) if *q == p) {
                    self.bump();
                    self.bump();
                    return Ok(Stmt::Assign {
                        rhs: Expr::Binary(op, Box::new(lhs.clone()), Box::new(int_lit(1))),
                        lhs,
                        nonblocking: false,
                        delay: None,
                        line,
                    });
                }
            }
        }
        Err(self.err(format!("expected assignment, found {}", self.describe())))
    }

    fn lvalue(&mut self) -> Result<Expr, CompileError> {
        if self.is_punct("{") {
            self.bump();
            let mut parts = vec![self.lvalue()?];
            while self.eat_punct(",") {
                parts.push(self.lvalue()?);
            }
            self.expect_punct("}")?;
            return Ok(Expr::Concat(parts));
        }
        let l = self.line();
        let name = self.ident()?;
        self.selects(Expr::Ident(name, l))
    }

    fn selects(&mut self, mut base: Expr) -> Result<Expr, CompileError> {
        while self.is_punct("[") {
            self.bump();
            let first = self.expr()?;
            if self.eat_punct(":") {
                let lsb = self.expr()?;
                self.expect_punct("]")?;
                base = Expr::Part(Box::new(base), Box::new(first), Box::new(lsb));
            } else if self.eat_punct("+:") {
                let w = self.expr()?;
                self.expect_punct("]")?;
                base = Expr::IndexedPart {
                    base: Box::new(base),
                    start: Box::new(first),
                    width: Box::new(w),
                    up: true,
                };
            } else if self.eat_punct("-:") {
                let w = self.expr()?;
                self.expect_punct("]")?;
                base = Expr::IndexedPart {
                    base: Box::new(base),
                    start: Box::new(first),
                    width: Box::new(w),
                    up: false,
                };
            } else {
                self.expect_punct("]")?;
                base = Expr::Index(Box::new(base), Box::new(first));
            }
        }
        Ok(base)
    }

    // ---- expressions ----

    pub fn expr(&mut self) -> Result<Expr, CompileError> {
        let cond = self.binary(0)?;
        if self.eat_punct("?") {
            let a = self.expr()?;
            self.expect_punct(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn binop(&self) -> Option<(BinaryOp, u8)> {
        let p = match self.peek() {
            Tok::Punct(p) => *p,
            _ => return None,
        };
        Some(match p {
            "||" => (BinaryOp::LogOr, 1),
            "&&" => (BinaryOp::LogAnd, 2),
            "|" => (BinaryOp::Or, 3),
            "^" => (BinaryOp::Xor, 4),
            "~^" | "^~" => (BinaryOp::Xnor, 4),
            "&" => (BinaryOp::And, 5),
            "==" => (BinaryOp::Eq, 6),
            "!=" => (BinaryOp::Ne, 6),
            "===" => (BinaryOp::CaseEq, 6),
            "!==" => (BinaryOp::CaseNe, 6),
            "<" => (BinaryOp::Lt, 7),
            "<=" => (BinaryOp::Le, 7),
            ">" => (BinaryOp::Gt, 7),
            ">=" => (BinaryOp::Ge, 7),
            "<<" => (BinaryOp::Shl, 8),
            ">>" => (BinaryOp::Shr, 8),
            "<<<" => (BinaryOp::AShl, 8),
            ">>>" => (BinaryOp::AShr, 8),
            "+" => (BinaryOp::Add, 9),
            "-" => (BinaryOp::Sub, 9),
            "*" => (BinaryOp::Mul, 10),
            "/" => (BinaryOp::Div, 10),
            "%" => (BinaryOp::Mod, 10),
            "**" => (BinaryOp::Pow, 11),
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, CompileError> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.binop() {
            if prec < min_prec || prec == 0 {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, CompileError> {
        let op = match self.peek() {
            Tok::Punct("+") => Some(UnaryOp::Plus),
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("~") => Some(UnaryOp::Not),
            Tok::Punct("!") => Some(UnaryOp::LogNot),
            Tok::Punct("&") => Some(UnaryOp::RedAnd),
            Tok::Punct("|") => Some(UnaryOp::RedOr),
            Tok::Punct("^") => Some(UnaryOp::RedXor),
            Tok::Punct("~&") => Some(UnaryOp::RedNand),
            Tok::Punct("~|") => Some(UnaryOp::RedNor),
            Tok::Punct("~^") | Tok::Punct("^~") => Some(UnaryOp::RedXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::Unary(op, Box::new(e)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, CompileError> {
        let line = self.line();
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                let v = BigUint::parse_bytes(s.as_bytes(), 10)
                    .ok_or_else(|| self.err("bad integer literal"))?;
                let width = (v.bits() as u32 + 1).max(32);
                Ok(Expr::Literal {
                    value: Logic::from_biguint(v, width),
                    signed: true,
                })
            }
            Tok::Real(v) => {
                self.bump();
                Ok(Expr::Literal {
                    value: Logic::from_u64(v.round().max(0.0) as u64, 32),
                    signed: true,
                })
            }
            Tok::Based {
                size,
                signed,
                base,
                digits,
            } => {
                self.bump();
                let value = based_literal(size, base, &digits).ok_or_else(|| {
                    CompileError::new(line, format!("bad literal digits '{digits}' for base {base}"))
                })?;
                Ok(Expr::Literal {
                    value,
                    signed,
                })
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::System(name) => {
                self.bump();
                let mut args = Vec::new();
                if self.eat_punct("(") {
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                }
                Ok(Expr::SysCall(name, args))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                self.selects(e)
            }
            Tok::Punct("{") => {
                self.bump();
                let first = self.expr()?;
                if self.is_punct("{") {
                    // Replication {n{...}}
                    self.bump();
                    let mut parts = vec![self.expr()?];
                    while self.eat_punct(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(Expr::Repeat(Box::new(first), parts));
                }
                let mut parts = vec![first];
                while self.eat_punct(",") {
                    parts.push(self.expr()?);
                }
                self.expect_punct("}")?;
                self.selects(Expr::Concat(parts))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    return Ok(Expr::Call(name, args, line));
                }
                if self.is_punct(".") {
                    return Err(self.err("hierarchical references are not supported"));
                }
                self.selects(Expr::Ident(name, line))
            }
            _ => Err(self.err(format!("expected expression, found {}", self.describe()))),
        }
    }
}

fn int_lit(v: u64) -> Expr {
    Expr::Literal {
        value: Logic::from_u64(v, 32),
        signed: true,
    }
}

/// Build the value of a based literal. Unsized literals are at least 32 bits.
fn based_literal(size: Option<u32>, base: char, digits: &str) -> Option<Logic> {
    let bits_per = match base {
        'b' => 1,
        'o' => 3,
        'h' => 4,
        'd' => 0,
        _ => return None,
    };
    let natural: u32;
    let mut v;
    if bits_per == 0 {
        if digits.chars().all(|c| matches!(c, 'x' | 'z' | '?')) {
            let w = size.unwrap_or(32);
            return Some(if digits.starts_with('x') {
                Logic::all_x(w)
            } else {
                Logic::all_z(w)
            });
        }
        let n = BigUint::parse_bytes(digits.as_bytes(), 10)?;
        natural = (n.bits() as u32).max(1);
        v = Logic::from_biguint(n.clone(), natural.max(size.unwrap_or(0)).max(1));
        if size.is_none() {
            v = Logic::from_biguint(n, natural.max(32));
        }
    } else {
        natural = digits.len() as u32 * bits_per;
        v = Logic::zero(natural);
        for (k, c) in digits.chars().rev().enumerate() {
            let lo = k as u32 * bits_per;
            let bit = match c {
                'x' => Some(Bit::X),
                'z' | '?' => Some(Bit::Z),
                _ => None,
            };
            match bit {
                Some(b) => {
                    for j in 0..bits_per {
                        v.set_bit(lo + j, b);
                    }
                }
                None => {
                    let d = c.to_digit(1 << bits_per)?;
                    for j in 0..bits_per {
                        v.set_bit(lo + j, if d >> j & 1 == 1 { Bit::One } else { Bit::Zero });
                    }
                }
            }
        }
    }
    let target = size.unwrap_or_else(|| natural.max(32));
    if target <= v.width() {
        return Some(v.resize(target, false));
    }
    // Extension: replicate a leading x/z digit, otherwise zero-fill.
    let top = v.bit(v.width() - 1);
    let mut out = v.resize(target, false);
    if matches!(top, Bit::X | Bit::Z) && bits_per != 0 {
        for i in v.width()..target {
            out.set_bit(i, top);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ansi_module() {
        let f = parse(
            "module ha(input a, input b, output sum, output carry);\n\
             assign sum = a ^ b;\nassign carry = a & b;\nendmodule",
        )
        .unwrap();
        assert_eq!(f.modules.len(), 1);
        assert_eq!(f.modules[0].port_order, vec!["a", "b", "sum", "carry"]);
    }

    #[test]
    fn parses_non_ansi_with_params() {
        let f = parse(
            "module r(clk, d, q);\nparameter W = 8;\ninput clk;\ninput [W-1:0] d;\n\
             output reg [W-1:0] q;\nalways @(posedge clk) q <= d;\nendmodule",
        )
        .unwrap();
        assert!(f.modules[0].items.iter().any(|i| matches!(i, Item::Param(p) if p.name == "W")));
    }

    #[test]
    fn literal_extension() {
        assert_eq!(based_literal(Some(8), 'h', "f").unwrap().to_u64(), Some(0x0f));
        assert_eq!(based_literal(Some(4), 'b', "x").unwrap().to_hex(), "x");
        assert_eq!(based_literal(Some(3), 'd', "5").unwrap().to_u64(), Some(5));
        assert_eq!(based_literal(None, 'h', "1").unwrap().width(), 32);
    }

    #[test]
    fn reports_line_of_error() {
        let e = parse("module m(input a);\nassign = a;\nendmodule").unwrap_err();
        assert_eq!(e.line, 2);
    }
}
