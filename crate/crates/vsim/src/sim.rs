// SPDX-License-Identifier: Apache-2.0

//! Event-driven scheduler and bytecode interpreter.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use num_traits::ToPrimitive;

use crate::ast::{BinaryOp, Edge, UnaryOp};
use crate::elab::binary_value;
use crate::error::SimError;
use crate::ir::*;
use crate::ops;
use crate::value::{Bit, Logic};

/// Resource limits for one simulation.
#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Stop (without `$finish`) once simulation time would exceed this.
    pub max_time: u64,
    /// Upper bound on interpreted operations.
    pub max_steps: u64,
    /// Upper bound on process activations within one time step.
    pub max_deltas: u64,
    /// Wall-clock deadline.
    pub deadline: Option<Instant>,
    pub random_seed: u32,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            max_time: 100_000_000,
            max_steps: 200_000_000,
            max_deltas: 1_000_000,
            deadline: None,
            random_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimOutput {
    pub stdout: String,
    /// True when a `$finish`/`$stop` was executed.
    pub finished: bool,
    pub end_time: u64,
}

#[derive(Clone, Debug)]
enum Waiting {
    None,
    Any,
    Events(Vec<Logic>),
    Cond,
}

struct ProcState {
    pc: usize,
    seq: u64,
    waiting: Waiting,
}

struct Write {
    sig: SigId,
    word: Option<usize>,
    lo: i64,
    value: Logic,
}

enum Future {
    Wake(usize),
    Nba(Vec<Write>),
}

enum Flow {
    Blocked,
    Done,
    Finish,
}

pub struct Simulator<'p> {
    prog: &'p Program,
    opts: SimOptions,
    values: Vec<Logic>,
    words: Vec<Vec<Logic>>,
    procs: Vec<ProcState>,
    watchers: Vec<Vec<(usize, u64)>>,
    active: VecDeque<usize>,
    nba: Vec<Write>,
    future: BTreeMap<u64, Vec<Future>>,
    time: u64,
    steps: u64,
    rng: u32,
    out: String,
    call_depth: usize,
    current: usize,
    last_changed: Option<SigId>,
}

impl<'p> Simulator<'p> {
    pub fn new(prog: &'p Program, opts: SimOptions) -> Self {
        let mut values = Vec::with_capacity(prog.signals.len());
        let mut words = Vec::with_capacity(prog.signals.len());
        for s in &prog.signals {
            values.push(s.init.clone());
            words.push(match &s.array {
                Some(a) => vec![Logic::all_x(s.width); a.len()],
                None => Vec::new(),
            });
        }
        let rng = opts.random_seed;
        Self {
            prog,
            opts,
            values,
            words,
            procs: prog
                .processes
                .iter()
                .map(|_| ProcState {
                    pc: 0,
                    seq: 0,
                    waiting: Waiting::None,
                })
                .collect(),
            watchers: vec![Vec::new(); prog.signals.len()],
            active: VecDeque::new(),
            nba: Vec::new(),
            future: BTreeMap::new(),
            time: 0,
            steps: 0,
            rng,
            out: String::new(),
            call_depth: 0,
            current: 0,
            last_changed: None,
        }
    }

    fn err(&self, message: impl Into<String>) -> SimError {
        SimError::Runtime {
            time: self.time,
            message: message.into(),
        }
    }

    pub fn run(mut self) -> Result<SimOutput, SimError> {
        for (i, p) in self.prog.processes.iter().enumerate() {
            if !p.initial {
                self.active.push_back(i);
            }
        }
        for (i, p) in self.prog.processes.iter().enumerate() {
            if p.initial {
                self.active.push_back(i);
            }
        }
        let mut deltas = 0u64;
        let mut finished = false;
        'outer: loop {
            while let Some(pid) = self.active.pop_front() {
                deltas += 1;
                if deltas > self.opts.max_deltas {
                    return Err(self.loop_error());
                }
                match self.exec(pid)? {
                    Flow::Finish => {
                        finished = true;
                        break 'outer;
                    }
                    Flow::Blocked | Flow::Done => {}
                }
            }
            if !self.nba.is_empty() {
                let writes = std::mem::take(&mut self.nba);
                for w in writes {
                    self.apply(w, true);
                }
                continue;
            }
            let Some((&t, _)) = self.future.iter().next() else {
                break;
            };
            if t > self.opts.max_time {
                break;
            }
            if t != self.time {
                deltas = 0;
            }
            self.time = t;
            let evs = self.future.remove(&t).unwrap_or_default();
            for ev in evs {
                match ev {
                    Future::Wake(pid) => self.active.push_back(pid),
                    Future::Nba(ws) => self.nba.extend(ws),
                }
            }
        }
        Ok(SimOutput {
            stdout: self.out,
            finished,
            end_time: self.time,
        })
    }

    fn loop_error(&self) -> SimError {
        let sig = self.last_changed.map_or("?", |s| self.prog.signals[s].name.as_str());
        self.err(format!("delta cycle limit exceeded (combinational loop through {sig}?)"))
    }

    fn tick(&mut self) -> Result<(), SimError> {
        self.steps += 1;
        if self.steps > self.opts.max_steps {
            let name = self.prog.processes.get(self.current).map_or("?", |p| p.name.as_str());
            return Err(self.err(format!("step limit exceeded in {name}")));
        }
        if self.steps.is_multiple_of(4096) {
            if let Some(d) = self.opts.deadline {
                if Instant::now() >= d {
                    return Err(self.err("wall-clock timeout"));
                }
            }
        }
        Ok(())
    }

    fn exec(&mut self, pid: usize) -> Result<Flow, SimError> {
        let prog = self.prog;
        let ops = &prog.processes[pid].ops;
        let mut pc = self.procs[pid].pc;
        self.current = pid;
        self.procs[pid].waiting = Waiting::None;
        loop {
            self.tick()?;
            let Some(op) = ops.get(pc) else {
                self.procs[pid].pc = pc;
                return Ok(Flow::Done);
            };
            pc += 1;
            match op {
                Op::Assign { target, rhs, kind } => {
                    let v = self.eval(rhs)?;
                    let mut writes = Vec::new();
                    self.resolve(target, &v, &mut writes)?;
                    match kind {
                        AssignKind::Blocking => {
                            for w in writes {
                                self.apply(w, true);
                            }
                        }
                        AssignKind::NonBlocking => self.nba.extend(writes),
                        AssignKind::NonBlockingDelayed(d) => {
                            let d = self.eval(d)?.to_u64().unwrap_or(0);
                            if d == 0 {
                                self.nba.extend(writes);
                            } else {
                                self.future.entry(self.time + d).or_default().push(Future::Nba(writes));
                            }
                        }
                    }
                }
                Op::Jump(t) => pc = *t,
                Op::JumpIfNot(c, t) => {
                    if self.eval(c)?.truth() != Bit::One {
                        pc = *t;
                    }
                }
                Op::Case {
                    kind,
                    sel,
                    arms,
                    default,
                } => {
                    let s = self.eval(sel)?;
                    let mut target = *default;
                    'arms: for (labels, at) in arms {
                        for l in labels {
                            let lv = self.eval(l)?;
                            if ops::case_match(*kind, &s, &lv) {
                                target = *at;
                                break 'arms;
                            }
                        }
                    }
                    pc = target;
                }
                Op::Delay(d) => {
                    let d = self.eval(d)?.to_u64().unwrap_or(0);
                    self.procs[pid].pc = pc;
                    if d == 0 {
                        self.active.push_back(pid);
                    } else {
                        self.future.entry(self.time + d).or_default().push(Future::Wake(pid));
                    }
                    return Ok(Flow::Blocked);
                }
                Op::Wait { events, watch } => {
                    self.procs[pid].pc = pc;
                    let waiting = if events.is_empty() {
                        Waiting::Any
                    } else {
                        let mut snap = Vec::with_capacity(events.len());
                        for e in events {
                            snap.push(self.eval(&e.expr)?);
                        }
                        Waiting::Events(snap)
                    };
                    self.register(pid, watch, waiting);
                    return Ok(Flow::Blocked);
                }
                Op::WaitCond { cond, watch } => {
                    if self.eval(cond)?.truth() != Bit::One {
                        self.procs[pid].pc = pc - 1;
                        self.register(pid, watch, Waiting::Cond);
                        return Ok(Flow::Blocked);
                    }
                }
                Op::Display { args, newline, scope } => {
                    let s = self.format(args, scope)?;
                    self.out.push_str(&s);
                    if *newline {
                        self.out.push('\n');
                    }
                }
                Op::Finish => {
                    self.procs[pid].pc = pc;
                    return Ok(Flow::Finish);
                }
                Op::Halt => {
                    self.procs[pid].pc = pc - 1;
                    return Ok(Flow::Done);
                }
            }
        }
    }

    fn register(&mut self, pid: usize, watch: &[SigId], waiting: Waiting) {
        let p = &mut self.procs[pid];
        p.seq += 1;
        p.waiting = waiting;
        let seq = p.seq;
        for &s in watch {
            self.watchers[s].push((pid, seq));
        }
    }

    fn trigger(&mut self, sig: SigId) {
        self.last_changed = Some(sig);
        let list = std::mem::take(&mut self.watchers[sig]);
        let mut kept = Vec::with_capacity(list.len());
        for (pid, seq) in list {
            if self.procs[pid].seq != seq {
                continue;
            }
            if self.fires(pid) {
                self.procs[pid].seq += 1;
                self.procs[pid].waiting = Waiting::None;
                self.active.push_back(pid);
            } else {
                kept.push((pid, seq));
            }
        }
        kept.append(&mut self.watchers[sig]);
        self.watchers[sig] = kept;
    }

    fn fires(&mut self, pid: usize) -> bool {
        let op_at = self.procs[pid].pc;
        let prog = self.prog;
        match std::mem::replace(&mut self.procs[pid].waiting, Waiting::None) {
            Waiting::None => false,
            Waiting::Any => true,
            Waiting::Cond => {
                let Some(Op::WaitCond { cond, .. }) = prog.processes[pid].ops.get(op_at) else {
                    return true;
                };
                let ok = self.eval(cond).map(|v| v.truth() == Bit::One).unwrap_or(true);
                if !ok {
                    self.procs[pid].waiting = Waiting::Cond;
                }
                ok
            }
            Waiting::Events(mut prev) => {
                let Some(Op::Wait { events, .. }) = op_at.checked_sub(1).and_then(|i| prog.processes[pid].ops.get(i)) else {
                    return true;
                };
                let mut fired = false;
                for (spec, old) in events.iter().zip(prev.iter_mut()) {
                    let Ok(new) = self.eval(&spec.expr) else {
                        continue;
                    };
                    if edge_fires(spec.edge, old, &new) {
                        fired = true;
                    }
                    *old = new;
                }
                if !fired {
                    self.procs[pid].waiting = Waiting::Events(prev);
                }
                fired
            }
        }
    }

    fn storage(&self, w: &Write) -> &Logic {
        match w.word {
            Some(k) => &self.words[w.sig][k],
            None => &self.values[w.sig],
        }
    }

    fn apply(&mut self, w: Write, notify: bool) {
        let mut new = self.storage(&w).clone();
        new.write_slice(w.lo, &w.value);
        if new.case_eq(self.storage(&w)) {
            return;
        }
        match w.word {
            Some(k) => self.words[w.sig][k] = new,
            None => self.values[w.sig] = new,
        }
        if notify {
            self.trigger(w.sig);
        }
    }

    fn index(&mut self, e: &EExpr) -> Result<Option<i64>, SimError> {
        let v = self.eval(e)?;
        Ok(if e.signed {
            v.to_i64()
        } else {
            v.to_biguint().and_then(|b| b.to_i64())
        })
    }

    fn indexed_lo(&mut self, sig: SigId, start: &EExpr, width: u32, up: bool) -> Result<Option<i64>, SimError> {
        let Some(st) = self.index(start)? else {
            return Ok(None);
        };
        let (a, b) = if up {
            (st, st + width as i64 - 1)
        } else {
            (st - width as i64 + 1, st)
        };
        let s = &self.prog.signals[sig];
        Ok(Some(s.offset(a).min(s.offset(b))))
    }

    fn word_index(&mut self, sig: SigId, idx: &EExpr) -> Result<Option<usize>, SimError> {
        let i = self.index(idx)?;
        Ok(i.and_then(|i| self.prog.signals[sig].array.and_then(|a| a.word(i))))
    }

    fn target_width(&self, t: &LTarget) -> u32 {
        match t {
            LTarget::Whole(s) | LTarget::Word(s, _) => self.prog.signals[*s].width,
            LTarget::Bit(..) | LTarget::WordBit(..) => 1,
            LTarget::Part(_, _, w) | LTarget::WordPart(_, _, _, w) => *w,
            LTarget::IndexedPart { width, .. } => *width,
            LTarget::Concat(v) => v.iter().map(|t| self.target_width(t)).sum(),
        }
    }

    fn resolve(&mut self, t: &LTarget, v: &Logic, out: &mut Vec<Write>) -> Result<(), SimError> {
        let w = self.target_width(t);
        let v = v.resize(w, false);
        match t {
            LTarget::Whole(s) => out.push(Write {
                sig: *s,
                word: None,
                lo: 0,
                value: v,
            }),
            LTarget::Bit(s, i) => {
                if let Some(i) = self.index(i)? {
                    let lo = self.prog.signals[*s].offset(i);
                    out.push(Write {
                        sig: *s,
                        word: None,
                        lo,
                        value: v,
                    });
                }
            }
            LTarget::Part(s, lo, _) => out.push(Write {
                sig: *s,
                word: None,
                lo: *lo,
                value: v,
            }),
            LTarget::IndexedPart { sig, start, width, up } => {
                if let Some(lo) = self.indexed_lo(*sig, start, *width, *up)? {
                    out.push(Write {
                        sig: *sig,
                        word: None,
                        lo,
                        value: v,
                    });
                }
            }
            LTarget::Word(s, i) => {
                if let Some(k) = self.word_index(*s, i)? {
                    out.push(Write {
                        sig: *s,
                        word: Some(k),
                        lo: 0,
                        value: v,
                    });
                }
            }
            LTarget::WordBit(s, i, b) => {
                if let (Some(k), Some(lo)) = (self.word_index(*s, i)?, self.index(b)?) {
                    out.push(Write {
                        sig: *s,
                        word: Some(k),
                        lo,
                        value: v,
                    });
                }
            }
            LTarget::WordPart(s, i, lo, _) => {
                if let Some(k) = self.word_index(*s, i)? {
                    out.push(Write {
                        sig: *s,
                        word: Some(k),
                        lo: *lo,
                        value: v,
                    });
                }
            }
            LTarget::Concat(parts) => {
                let mut lo = 0i64;
                for p in parts.iter().rev() {
                    let pw = self.target_width(p);
                    let piece = v.slice(lo, pw);
                    self.resolve(p, &piece, out)?;
                    lo += pw as i64;
                }
            }
        }
        Ok(())
    }

    pub(crate) fn eval(&mut self, e: &EExpr) -> Result<Logic, SimError> {
        let v = match &e.kind {
            EKind::Const(v) => v.resize(e.width, e.signed),
            EKind::Str(s) => {
                let mut l = Logic::zero((s.len() as u32 * 8).max(8));
                for (i, b) in s.bytes().rev().enumerate() {
                    l.write_slice(i as i64 * 8, &Logic::from_u64(b as u64, 8));
                }
                l.resize(e.width, false)
            }
            EKind::Sig(s) => self.values[*s].resize(e.width, e.signed),
            EKind::BitSel(s, i) => match self.index(i)? {
                Some(i) => {
                    let off = self.prog.signals[*s].offset(i);
                    self.values[*s].slice(off, 1).resize(e.width, false)
                }
                None => Logic::all_x(1).resize(e.width, false),
            },
            EKind::PartSel(s, lo, w) => self.values[*s].slice(*lo, *w).resize(e.width, false),
            EKind::IndexedPart { sig, start, width, up } => match self.indexed_lo(*sig, start, *width, *up)? {
                Some(lo) => self.values[*sig].slice(lo, *width).resize(e.width, false),
                None => Logic::all_x(*width).resize(e.width, false),
            },
            EKind::Word(s, i) => {
                let w = self.prog.signals[*s].width;
                match self.word_index(*s, i)? {
                    Some(k) => self.words[*s][k].resize(e.width, e.signed),
                    None => Logic::all_x(w).resize(e.width, false),
                }
            }
            EKind::SubSel { base, lo, width } => {
                let b = self.eval(base)?;
                match self.index(lo)? {
                    Some(l) => b.slice(l, *width).resize(e.width, false),
                    None => Logic::all_x(*width).resize(e.width, false),
                }
            }
            EKind::Unary(op, a) => {
                let av = self.eval(a)?;
                match op {
                    UnaryOp::Plus | UnaryOp::Neg | UnaryOp::Not => ops::unary(*op, &av, e.width),
                    _ => ops::unary(*op, &av, 1).resize(e.width, false),
                }
            }
            EKind::Binary(op, a, b) => {
                if matches!(op, BinaryOp::LogAnd | BinaryOp::LogOr) {
                    // Short-circuit keeps function side effects predictable.
                    let av = self.eval(a)?;
                    let t = av.truth();
                    if (*op == BinaryOp::LogAnd && t == Bit::Zero) || (*op == BinaryOp::LogOr && t == Bit::One) {
                        return Ok(Logic::from_bool(t == Bit::One).resize(e.width, false));
                    }
                    let bv = self.eval(b)?;
                    return Ok(ops::logical(*op, &av, &bv).resize(e.width, false));
                }
                let av = self.eval(a)?;
                let bv = self.eval(b)?;
                binary_value(*op, &av, &bv, e, a.signed, b.signed)
            }
            EKind::Ternary(c, a, b) => match self.eval(c)?.truth() {
                Bit::One => self.eval(a)?,
                Bit::Zero => self.eval(b)?,
                _ => {
                    let av = self.eval(a)?;
                    let bv = self.eval(b)?;
                    ops::merge(&av, &bv)
                }
            },
            EKind::Concat(parts) => {
                let mut vs = Vec::with_capacity(parts.len());
                for p in parts {
                    vs.push(self.eval(p)?);
                }
                Logic::concat(&vs).resize(e.width, false)
            }
            EKind::Repeat(n, parts) => {
                let mut vs = Vec::with_capacity(parts.len());
                for p in parts {
                    vs.push(self.eval(p)?);
                }
                let one = Logic::concat(&vs);
                let all: Vec<Logic> = (0..*n).map(|_| one.clone()).collect();
                Logic::concat(&all).resize(e.width, false)
            }
            EKind::Call(f, args) => {
                let r = self.call(*f, args)?;
                r.resize(e.width, e.signed)
            }
            EKind::Time => Logic::from_u64(self.time, 64).resize(e.width, false),
            EKind::Random => {
                self.rng = self.rng.wrapping_mul(1_103_515_245).wrapping_add(12_345);
                Logic::from_u64(self.rng as u64, 32).resize(e.width, e.signed)
            }
            EKind::Cast(a) => self.eval(a)?.resize(e.width, e.signed),
        };
        Ok(v)
    }

    fn call(&mut self, f: FuncId, args: &[EExpr]) -> Result<Logic, SimError> {
        if self.call_depth > 256 {
            return Err(self.err("function recursion too deep"));
        }
        let prog = self.prog;
        let code = &prog.functions[f];
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a)?);
        }
        for (&sig, v) in code.inputs.iter().zip(vals) {
            let w = self.prog.signals[sig].width;
            self.values[sig] = v.resize(w, false);
        }
        self.call_depth += 1;
        let ops = &code.ops;
        let mut pc = 0;
        while let Some(op) = ops.get(pc) {
            self.tick()?;
            pc += 1;
            match op {
                Op::Assign { target, rhs, .. } => {
                    let v = self.eval(rhs)?;
                    let mut writes = Vec::new();
                    self.resolve(target, &v, &mut writes)?;
                    for w in writes {
                        self.apply(w, false);
                    }
                }
                Op::Jump(t) => pc = *t,
                Op::JumpIfNot(c, t) => {
                    if self.eval(c)?.truth() != Bit::One {
                        pc = *t;
                    }
                }
                Op::Case {
                    kind,
                    sel,
                    arms,
                    default,
                } => {
                    let s = self.eval(sel)?;
                    let mut target = *default;
                    'arms: for (labels, at) in arms {
                        for l in labels {
                            let lv = self.eval(l)?;
                            if ops::case_match(*kind, &s, &lv) {
                                target = *at;
                                break 'arms;
                            }
                        }
                    }
                    pc = target;
                }
                Op::Display { args, newline, scope } => {
                    let s = self.format(args, scope)?;
                    self.out.push_str(&s);
                    if *newline {
                        self.out.push('\n');
                    }
                }
                Op::Halt => break,
                _ => {
                    self.call_depth -= 1;
                    return Err(self.err(format!("timing control inside function '{}'", code.name)));
                }
            }
        }
        self.call_depth -= 1;
        Ok(self.values[code.ret].clone())
    }

    fn format(&mut self, args: &[EExpr], scope: &str) -> Result<String, SimError> {
        let mut out = String::new();
        let mut i = 0;
        while i < args.len() {
            let a = &args[i];
            i += 1;
            let EKind::Str(fmt) = &a.kind else {
                let v = self.eval(a)?;
                out.push_str(&v.to_dec(a.signed));
                continue;
            };
            let mut chars = fmt.chars().peekable();
            while let Some(c) = chars.next() {
                if c != '%' {
                    out.push(c);
                    continue;
                }
                let mut spec = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        spec.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let Some(conv) = chars.next() else {
                    out.push('%');
                    break;
                };
                let conv = conv.to_ascii_lowercase();
                match conv {
                    '%' => {
                        out.push('%');
                        continue;
                    }
                    'm' => {
                        out.push_str(scope);
                        continue;
                    }
                    _ => {}
                }
                let Some(arg) = args.get(i) else {
                    return Err(self.err(format!("missing argument for %{conv}")));
                };
                i += 1;
                let v = self.eval(arg)?;
                let minimal = spec.starts_with('0');
                let pad: Option<usize> = spec.parse().ok().filter(|n| *n > 0);
                let text = match conv {
                    'h' | 'x' => radix(v.to_hex(), minimal),
                    'b' => radix(v.to_bin(), minimal),
                    'o' => radix(v.to_oct(), minimal),
                    'd' => {
                        let s = v.to_dec(arg.signed);
                        if minimal || pad.is_some() {
                            s
                        } else {
                            let digits = dec_digits(v.width(), arg.signed);
                            format!("{s:>digits$}")
                        }
                    }
                    't' => {
                        let s = v.to_dec(false);
                        if minimal || pad.is_some() {
                            s
                        } else {
                            format!("{s:>20}")
                        }
                    }
                    's' => logic_string(&v),
                    'c' => {
                        let b = v.slice(0, 8).to_u64().unwrap_or(b'?' as u64) as u8;
                        (b as char).to_string()
                    }
                    other => return Err(self.err(format!("unsupported format %{other}"))),
                };
                match pad {
                    Some(n) if !minimal => out.push_str(&format!("{text:>n$}")),
                    _ => out.push_str(&text),
                }
            }
        }
        Ok(out)
    }
}

fn radix(s: String, minimal: bool) -> String {
    if !minimal {
        return s;
    }
    let t = s.trim_start_matches('0');
    if t.is_empty() {
        "0".into()
    } else {
        t.to_string()
    }
}

fn dec_digits(width: u32, signed: bool) -> usize {
    let max = Logic::from_biguint(
        (num_bigint::BigUint::from(1u8) << width as usize) - 1u8,
        width,
    );
    max.to_dec(false).len() + usize::from(signed)
}

fn logic_string(v: &Logic) -> String {
    let mut s = String::new();
    let bytes = v.width().div_ceil(8);
    for k in (0..bytes).rev() {
        let b = v.slice(k as i64 * 8, 8).to_u64().unwrap_or(0) as u8;
        if b != 0 {
            s.push(b as char);
        }
    }
    s
}

fn edge_fires(edge: Edge, old: &Logic, new: &Logic) -> bool {
    match edge {
        Edge::Any => !old.case_eq(new),
        Edge::Pos | Edge::Neg => {
            let (a, b) = (old.bit(0), new.bit(0));
            let unknown = |x: Bit| matches!(x, Bit::X | Bit::Z);
            if edge == Edge::Pos {
                matches!((a, b), (Bit::Zero, Bit::One))
                    || (a == Bit::Zero && unknown(b))
                    || (unknown(a) && b == Bit::One)
            } else {
                matches!((a, b), (Bit::One, Bit::Zero))
                    || (a == Bit::One && unknown(b))
                    || (unknown(a) && b == Bit::Zero)
            }
        }
    }
}
