// SPDX-License-Identifier: Apache-2.0

//! Elaborated, flattened representation executed by the scheduler.

use crate::ast::{BinaryOp, CaseKind, Edge, UnaryOp};
use crate::value::Logic;

pub type SigId = usize;
pub type FuncId = usize;

#[derive(Clone, Debug)]
pub struct Signal {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    /// Declared `[msb:lsb]`; `[0:0]` for scalars.
    pub msb: i64,
    pub lsb: i64,
    pub array: Option<ArrayDims>,
    pub init: Logic,
}

impl Signal {
    /// Bit offset (0 = least significant storage bit) of declared index `i`.
    pub fn offset(&self, i: i64) -> i64 {
        if self.msb >= self.lsb {
            i - self.lsb
        } else {
            self.lsb - i
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ArrayDims {
    pub first: i64,
    pub last: i64,
}

impl ArrayDims {
    pub fn len(&self) -> usize {
        ((self.first - self.last).unsigned_abs() + 1) as usize
    }

    pub fn word(&self, i: i64) -> Option<usize> {
        let lo = self.first.min(self.last);
        let hi = self.first.max(self.last);
        (i >= lo && i <= hi).then(|| (i - lo) as usize)
    }
}

#[derive(Clone, Debug)]
pub struct EExpr {
    pub kind: EKind,
    /// Final (context-determined) width.
    pub width: u32,
    /// Final signedness used for extension and arithmetic.
    pub signed: bool,
}

#[derive(Clone, Debug)]
pub enum EKind {
    Const(Logic),
    Str(String),
    Sig(SigId),
    /// Dynamic bit-select `s[idx]` of a vector signal.
    BitSel(SigId, Box<EExpr>),
    /// Constant part-select, offsets already resolved.
    PartSel(SigId, i64, u32),
    /// `s[start +: w]` / `s[start -: w]`.
    IndexedPart {
        sig: SigId,
        start: Box<EExpr>,
        width: u32,
        up: bool,
    },
    /// Memory word `mem[idx]`.
    Word(SigId, Box<EExpr>),
    /// Select within a computed value (e.g. `mem[i][3:0]`, `mem[i][j]`), offset relative to bit 0.
    SubSel {
        base: Box<EExpr>,
        lo: Box<EExpr>,
        width: u32,
    },
    Unary(UnaryOp, Box<EExpr>),
    Binary(BinaryOp, Box<EExpr>, Box<EExpr>),
    Ternary(Box<EExpr>, Box<EExpr>, Box<EExpr>),
    Concat(Vec<EExpr>),
    Repeat(u32, Vec<EExpr>),
    Call(FuncId, Vec<EExpr>),
    Time,
    Random,
    /// `$signed` / `$unsigned`: reinterpret operand of the same width.
    Cast(Box<EExpr>),
}

#[derive(Clone, Debug)]
pub enum LTarget {
    Whole(SigId),
    Bit(SigId, EExpr),
    Part(SigId, i64, u32),
    IndexedPart {
        sig: SigId,
        start: EExpr,
        width: u32,
        up: bool,
    },
    Word(SigId, EExpr),
    WordBit(SigId, EExpr, EExpr),
    WordPart(SigId, EExpr, i64, u32),
    Concat(Vec<LTarget>),
}

#[derive(Clone, Debug)]
pub enum AssignKind {
    Blocking,
    NonBlocking,
    NonBlockingDelayed(EExpr),
}

#[derive(Clone, Debug)]
pub struct EventSpec {
    pub edge: Edge,
    pub expr: EExpr,
}

#[derive(Clone, Debug)]
pub enum Op {
    Assign {
        target: LTarget,
        rhs: EExpr,
        kind: AssignKind,
    },
    Jump(usize),
    JumpIfNot(EExpr, usize),
    Case {
        kind: CaseKind,
        sel: EExpr,
        arms: Vec<(Vec<EExpr>, usize)>,
        default: usize,
    },
    Delay(EExpr),
    Wait {
        events: Vec<EventSpec>,
        watch: Vec<SigId>,
    },
    WaitCond {
        cond: EExpr,
        watch: Vec<SigId>,
    },
    Display {
        args: Vec<EExpr>,
        newline: bool,
        scope: String,
    },
    Finish,
    Halt,
}

#[derive(Clone, Debug)]
pub struct Process {
    pub name: String,
    pub ops: Vec<Op>,
    /// Processes with `initial == false` are started before initial blocks at time 0.
    pub initial: bool,
}

#[derive(Clone, Debug)]
pub struct FunctionCode {
    pub name: String,
    pub ret: SigId,
    pub inputs: Vec<SigId>,
    pub ops: Vec<Op>,
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    pub signals: Vec<Signal>,
    pub processes: Vec<Process>,
    pub functions: Vec<FunctionCode>,
}
