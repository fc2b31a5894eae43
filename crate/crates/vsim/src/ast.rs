// SPDX-License-Identifier: Apache-2.0

//! Syntax tree for the supported Verilog subset.

use crate::value::Logic;

#[derive(Clone, Debug)]
pub struct SourceFile {
    pub modules: Vec<Module>,
}

#[derive(Clone, Debug)]
pub struct Module {
    pub name: String,
    pub line: usize,
    /// Header parameters (`#(parameter W = 8)`) followed by body parameters, in order.
    pub params: Vec<ParamDecl>,
    /// Port names in header order.
    pub port_order: Vec<String>,
    pub items: Vec<Item>,
}

#[derive(Clone, Debug)]
pub struct ParamDecl {
    pub name: String,
    pub value: Expr,
    pub range: Option<Range>,
    pub local: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
    Integer,
}

#[derive(Clone, Debug)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Clone, Debug)]
pub struct Decl {
    pub name: String,
    pub line: usize,
    pub dir: Option<Direction>,
    pub kind: Option<NetKind>,
    pub signed: bool,
    pub range: Option<Range>,
    /// Unpacked dimension (memories).
    pub array: Option<Range>,
    pub init: Option<Expr>,
}

#[derive(Clone, Debug)]
pub enum Item {
    Decl(Decl),
    Param(ParamDecl),
    Assign { lhs: Expr, rhs: Expr, line: usize },
    Always { body: Stmt, comb: bool },
    Initial(Stmt),
    Instance(Instance),
    Function(Function),
    GenerateFor(GenerateFor),
    GenerateIf {
        cond: Expr,
        then_items: Vec<Item>,
        else_items: Vec<Item>,
    },
}

#[derive(Clone, Debug)]
pub struct GenerateFor {
    pub var: String,
    pub init: Expr,
    pub cond: Expr,
    pub step: Expr,
    pub label: Option<String>,
    pub items: Vec<Item>,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub line: usize,
    pub params: Vec<(Option<String>, Expr)>,
    pub conns: Vec<(Option<String>, Option<Expr>)>,
}

#[derive(Clone, Debug)]
pub struct Function {
    pub name: String,
    pub line: usize,
    pub signed: bool,
    pub range: Option<Range>,
    /// Returns 32-bit signed integer when declared `function integer`.
    pub integer: bool,
    pub inputs: Vec<Decl>,
    pub locals: Vec<Decl>,
    pub body: Stmt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Pos,
    Neg,
    Any,
}

#[derive(Clone, Debug)]
pub enum EventCtl {
    /// `@*` / `@(*)`
    Star,
    List(Vec<(Edge, Expr)>),
}

#[derive(Clone, Debug)]
pub enum Stmt {
    Block(Vec<Stmt>, Vec<Decl>),
    Assign {
        lhs: Expr,
        rhs: Expr,
        nonblocking: bool,
        delay: Option<Expr>,
        line: usize,
    },
    If {
        cond: Expr,
        then_s: Box<Stmt>,
        else_s: Option<Box<Stmt>>,
    },
    Case {
        kind: CaseKind,
        sel: Expr,
        arms: Vec<(Vec<Expr>, Stmt)>,
        default: Option<Box<Stmt>>,
    },
    For {
        init: Box<Stmt>,
        cond: Expr,
        step: Box<Stmt>,
        body: Box<Stmt>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    Repeat {
        count: Expr,
        body: Box<Stmt>,
    },
    Forever(Box<Stmt>),
    Delay(Expr, Box<Stmt>),
    Event(EventCtl, Box<Stmt>),
    Wait(Expr, Box<Stmt>),
    SysTask {
        name: String,
        args: Vec<Expr>,
        line: usize,
    },
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Plus,
    Neg,
    Not,
    LogNot,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    Shl,
    Shr,
    AShl,
    AShr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    And,
    Or,
    Xor,
    Xnor,
    LogAnd,
    LogOr,
}

#[derive(Clone, Debug)]
pub enum Expr {
    Literal {
        value: Logic,
        signed: bool,
    },
    Str(String),
    Ident(String, usize),
    /// `a[i]` (bit-select or memory word).
    Index(Box<Expr>, Box<Expr>),
    /// `a[msb:lsb]`
    Part(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `a[base +: w]` / `a[base -: w]`
    IndexedPart {
        base: Box<Expr>,
        start: Box<Expr>,
        width: Box<Expr>,
        up: bool,
    },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Concat(Vec<Expr>),
    Repeat(Box<Expr>, Vec<Expr>),
    Call(String, Vec<Expr>, usize),
    SysCall(String, Vec<Expr>),
}
