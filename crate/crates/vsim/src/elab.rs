// SPDX-License-Identifier: Apache-2.0

//! Elaboration: parameter resolution, hierarchy flattening, expression
//! sizing and compilation of procedural code into jump-based op lists.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_traits::ToPrimitive;

use crate::ast::*;
use crate::error::CompileError;
use crate::ir::*;
use crate::ops;
use crate::value::Logic;

const MAX_GENERATE_ITERATIONS: usize = 4096;
const MAX_DEPTH: usize = 64;

#[derive(Clone, Debug)]
enum Sym {
    Sig(SigId),
    Const(Logic, bool),
    Func(FuncId),
}

struct Scope {
    names: HashMap<String, Sym>,
    parent: Option<usize>,
    path: String,
}

struct FuncInfo {
    reads: Vec<SigId>,
}

struct PortInfo {
    name: String,
    dir: Direction,
    sig: SigId,
}

pub fn elaborate(files: &[SourceFile]) -> Result<Program, CompileError> {
    let mut modules: HashMap<&str, &Module> = HashMap::new();
    let mut order = Vec::new();
    for f in files {
        for m in &f.modules {
            if modules.insert(m.name.as_str(), m).is_some() {
                return Err(CompileError::new(m.line, format!("module '{}' defined more than once", m.name)));
            }
            order.push(m);
        }
    }
    let mut instantiated = HashSet::new();
    for m in &order {
        collect_instantiated(&m.items, &mut instantiated);
    }
    let tops: Vec<&Module> = order
        .iter()
        .copied()
        .filter(|m| !instantiated.contains(m.name.as_str()))
        .collect();
    if tops.is_empty() {
        return Err(CompileError::new(0, "no top-level module found"));
    }
    let mut e = Elab {
        modules,
        prog: Program::default(),
        scopes: Vec::new(),
        funcs: Vec::new(),
        port_dirs: HashMap::new(),
        tmp: 0,
    };
    for top in tops {
        e.instantiate(top, top.name.clone(), &[], None, 0)?;
    }
    Ok(e.prog)
}

pub fn top_module_names(files: &[SourceFile]) -> Vec<String> {
    let mut instantiated = HashSet::new();
    for f in files {
        for m in &f.modules {
            collect_instantiated(&m.items, &mut instantiated);
        }
    }
    files
        .iter()
        .flat_map(|f| f.modules.iter())
        .filter(|m| !instantiated.contains(m.name.as_str()))
        .map(|m| m.name.clone())
        .collect()
}

fn collect_instantiated<'a>(items: &'a [Item], out: &mut HashSet<&'a str>) {
    for it in items {
        match it {
            Item::Instance(i) => {
                out.insert(i.module.as_str());
            }
            Item::GenerateFor(g) => collect_instantiated(&g.items, out),
            Item::GenerateIf {
                then_items,
                else_items,
                ..
            } => {
                collect_instantiated(then_items, out);
                collect_instantiated(else_items, out);
            }
            _ => {}
        }
    }
}

struct Elab<'a> {
    modules: HashMap<&'a str, &'a Module>,
    prog: Program,
    scopes: Vec<Scope>,
    funcs: Vec<FuncInfo>,
    port_dirs: HashMap<(usize, String), Direction>,
    tmp: usize,
}

/// Merged declaration state for one name while collecting a scope.
struct PendingDecl {
    line: usize,
    dir: Option<Direction>,
    kind: Option<NetKind>,
    signed: bool,
    range: Option<Range>,
    array: Option<Range>,
    init: Option<Expr>,
}

impl<'a> Elab<'a> {
    fn new_scope(&mut self, parent: Option<usize>, path: String) -> usize {
        self.scopes.push(Scope {
            names: HashMap::new(),
            parent,
            path,
        });
        self.scopes.len() - 1
    }

    fn lookup(&self, mut scope: usize, name: &str) -> Option<&Sym> {
        loop {
            if let Some(s) = self.scopes[scope].names.get(name) {
                return Some(s);
            }
            scope = self.scopes[scope].parent?;
        }
    }

    fn add_signal(&mut self, sig: Signal) -> SigId {
        self.prog.signals.push(sig);
        self.prog.signals.len() - 1
    }

    fn hidden(&mut self, scope: usize, width: u32, signed: bool) -> SigId {
        self.tmp += 1;
        let name = format!("{}.$tmp{}", self.scopes[scope].path, self.tmp);
        self.add_signal(Signal {
            name,
            width,
            signed,
            msb: width as i64 - 1,
            lsb: 0,
            array: None,
            init: Logic::all_x(width),
        })
    }

    // ---- hierarchy ----

    fn instantiate(
        &mut self,
        module: &'a Module,
        path: String,
        overrides: &[(Option<String>, Logic, bool)],
        _parent: Option<usize>,
        depth: usize,
    ) -> Result<Vec<PortInfo>, CompileError> {
        if depth > MAX_DEPTH {
            return Err(CompileError::new(module.line, "instantiation depth limit exceeded (recursive hierarchy?)"));
        }
        let scope = self.new_scope(None, path);
        // Positional overrides follow the order of overridable parameters.
        let mut overridable: Vec<&str> = module.params.iter().filter(|p| !p.local).map(|p| p.name.as_str()).collect();
        for it in &module.items {
            if let Item::Param(p) = it {
                if !p.local {
                    overridable.push(p.name.as_str());
                }
            }
        }
        let mut named: HashMap<String, (Logic, bool)> = HashMap::new();
        for (i, (name, v, s)) in overrides.iter().enumerate() {
            let key = match name {
                Some(n) => n.clone(),
                None => overridable
                    .get(i)
                    .map(|s| s.to_string())
                    .ok_or_else(|| CompileError::new(module.line, "too many parameter overrides"))?,
            };
            if !overridable.contains(&key.as_str()) {
                return Err(CompileError::new(module.line, format!("module '{}' has no parameter '{key}'", module.name)));
            }
            named.insert(key, (v.clone(), *s));
        }
        for p in &module.params {
            self.bind_param(scope, p, &named)?;
        }
        self.elab_items(scope, &module.items, &named, depth)?;
        let mut ports = Vec::new();
        for name in &module.port_order {
            match self.scopes[scope].names.get(name) {
                Some(Sym::Sig(id)) => {
                    let dir = self
                        .port_dirs
                        .get(&(scope, name.clone()))
                        .copied()
                        .ok_or_else(|| CompileError::new(module.line, format!("port '{name}' has no direction")))?;
                    ports.push(PortInfo {
                        name: name.clone(),
                        dir,
                        sig: *id,
                    });
                }
                _ => {
                    return Err(CompileError::new(module.line, format!("port '{name}' is not declared")));
                }
            }
        }
        Ok(ports)
    }

    fn bind_param(
        &mut self,
        scope: usize,
        p: &ParamDecl,
        overrides: &HashMap<String, (Logic, bool)>,
    ) -> Result<(), CompileError> {
        let (mut v, mut signed) = match overrides.get(&p.name).filter(|_| !p.local) {
            Some(o) => o.clone(),
            None => self.const_eval(scope, &p.value)?,
        };
        if let Some(r) = &p.range {
            let (msb, lsb) = self.const_range(scope, r)?;
            let w = ((msb - lsb).unsigned_abs() + 1) as u32;
            v = v.resize(w, signed);
            signed = false;
        }
        self.scopes[scope].names.insert(p.name.clone(), Sym::Const(v, signed));
        Ok(())
    }

    fn elab_items(
        &mut self,
        scope: usize,
        items: &'a [Item],
        overrides: &HashMap<String, (Logic, bool)>,
        depth: usize,
    ) -> Result<(), CompileError> {
        // Pass 1: parameters, declarations and function signatures.
        let mut pending: Vec<(String, PendingDecl)> = Vec::new();
        let mut funcs = Vec::new();
        for it in items {
            match it {
                Item::Param(p) => self.bind_param(scope, p, overrides)?,
                Item::Decl(d) => {
                    if let Some((_, pd)) = pending.iter_mut().find(|(n, _)| *n == d.name) {
                        if d.dir.is_some() {
                            pd.dir = d.dir;
                        }
                        if d.kind.is_some() {
                            pd.kind = d.kind;
                        }
                        pd.signed |= d.signed;
                        if d.range.is_some() {
                            pd.range = d.range.clone();
                        }
                        if d.array.is_some() {
                            pd.array = d.array.clone();
                        }
                        if d.init.is_some() {
                            pd.init = d.init.clone();
                        }
                    } else {
                        pending.push((
                            d.name.clone(),
                            PendingDecl {
                                line: d.line,
                                dir: d.dir,
                                kind: d.kind,
                                signed: d.signed,
                                range: d.range.clone(),
                                array: d.array.clone(),
                                init: d.init.clone(),
                            },
                        ));
                    }
                }
                Item::Function(f) => funcs.push(f),
                _ => {}
            }
        }
        let mut inits = Vec::new();
        for (name, pd) in pending {
            let id = self.declare(scope, &name, &pd)?;
            if let Some(dir) = pd.dir {
                self.port_dirs.insert((scope, name.clone()), dir);
            }
            if let Some(init) = pd.init {
                inits.push((id, init, pd.line, pd.kind.unwrap_or(NetKind::Wire) == NetKind::Wire && pd.kind.is_some()));
            }
        }
        let mut func_ids = Vec::new();
        for f in &funcs {
            func_ids.push(self.declare_function(scope, f)?);
        }
        // Pass 2: behaviour.
        for (f, (fid, fscope)) in funcs.iter().zip(func_ids) {
            self.compile_function(scope, fscope, fid, f)?;
        }
        for (id, init, line, is_wire) in inits {
            let target = LTarget::Whole(id);
            let rhs = self.assign_rhs(scope, &init, self.prog.signals[id].width, line)?;
            let mut ops = vec![Op::Assign {
                target,
                rhs: rhs.clone(),
                kind: AssignKind::Blocking,
            }];
            if is_wire {
                let mut watch = Vec::new();
                self.reads(&rhs, &mut watch);
                push_wait_any(&mut ops, watch);
                ops.push(Op::Jump(0));
                self.push_process(scope, "assign", ops, false);
            } else {
                ops.push(Op::Halt);
                // Variable initialisers run before any process.
                self.prog.processes.insert(
                    0,
                    Process {
                        name: format!("{}.init", self.scopes[scope].path),
                        ops,
                        initial: false,
                    },
                );
            }
        }
        for it in items {
            match it {
                Item::Assign { lhs, rhs, line } => self.continuous_assign(scope, scope, lhs, rhs, *line)?,
                Item::Always { body, comb } => self.always(scope, body, *comb)?,
                Item::Initial(body) => {
                    let mut ops = Vec::new();
                    self.compile_stmt(scope, body, &mut ops)?;
                    ops.push(Op::Halt);
                    self.push_process(scope, "initial", ops, true);
                }
                Item::Instance(inst) => self.instance(scope, inst, depth)?,
                Item::GenerateFor(g) => self.generate_for(scope, g, depth)?,
                Item::GenerateIf {
                    cond,
                    then_items,
                    else_items,
                } => {
                    let (v, _) = self.const_eval(scope, cond)?;
                    let chosen = if v.truth() == crate::value::Bit::One {
                        then_items
                    } else {
                        else_items
                    };
                    let path = format!("{}.genblk", self.scopes[scope].path);
                    let child = self.new_scope(Some(scope), path);
                    self.elab_items(child, chosen, &HashMap::new(), depth)?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn declare(&mut self, scope: usize, name: &str, pd: &PendingDecl) -> Result<SigId, CompileError> {
        if self.scopes[scope].names.contains_key(name) {
            return Err(CompileError::new(pd.line, format!("'{name}' is already declared")));
        }
        let integer = pd.kind == Some(NetKind::Integer);
        let (msb, lsb) = match (&pd.range, integer) {
            (Some(r), _) => self.const_range(scope, r)?,
            (None, true) => (31, 0),
            (None, false) => (0, 0),
        };
        let width = ((msb - lsb).unsigned_abs() + 1) as u32;
        let array = match &pd.array {
            Some(r) => {
                let (first, last) = self.const_range(scope, r)?;
                Some(ArrayDims { first, last })
            }
            None => None,
        };
        let is_var = matches!(pd.kind, Some(NetKind::Reg) | Some(NetKind::Integer));
        let id = self.add_signal(Signal {
            name: format!("{}.{}", self.scopes[scope].path, name),
            width,
            signed: pd.signed || integer,
            msb,
            lsb,
            array,
            init: if is_var { Logic::all_x(width) } else { Logic::all_z(width) },
        });
        self.scopes[scope].names.insert(name.to_string(), Sym::Sig(id));
        Ok(id)
    }

    fn const_range(&mut self, scope: usize, r: &Range) -> Result<(i64, i64), CompileError> {
        let msb = self.const_int(scope, &r.msb)?;
        let lsb = self.const_int(scope, &r.lsb)?;
        if (msb - lsb).unsigned_abs() > 1 << 20 {
            return Err(CompileError::new(expr_line(&r.msb), "range too wide"));
        }
        Ok((msb, lsb))
    }

    fn const_int(&mut self, scope: usize, e: &Expr) -> Result<i64, CompileError> {
        let (v, signed) = self.const_eval(scope, e)?;
        let r = if signed { v.to_i64() } else { v.to_u64().and_then(|u| i64::try_from(u).ok()) };
        r.ok_or_else(|| CompileError::new(expr_line(e), "expected a known constant integer"))
    }

    fn const_eval(&mut self, scope: usize, e: &Expr) -> Result<(Logic, bool), CompileError> {
        let mut ee = self.build(scope, e)?;
        let (w, s) = (ee.width, ee.signed);
        size(&mut ee, w, s);
        let v = const_value(&ee).ok_or_else(|| CompileError::new(expr_line(e), "expression is not constant"))?;
        Ok((v, ee.signed))
    }

    fn push_process(&mut self, scope: usize, kind: &str, ops: Vec<Op>, initial: bool) {
        let name = format!("{}.{}{}", self.scopes[scope].path, kind, self.prog.processes.len());
        self.prog.processes.push(Process { name, ops, initial });
    }

    fn continuous_assign(
        &mut self,
        lscope: usize,
        rscope: usize,
        lhs: &Expr,
        rhs: &Expr,
        line: usize,
    ) -> Result<(), CompileError> {
        let (target, width) = self.lvalue(lscope, lhs)?;
        let rhs = self.assign_rhs(rscope, rhs, width, line)?;
        let mut watch = Vec::new();
        self.reads(&rhs, &mut watch);
        self.target_reads(&target, &mut watch);
        let mut ops = vec![Op::Assign {
            target,
            rhs,
            kind: AssignKind::Blocking,
        }];
        push_wait_any(&mut ops, watch);
        ops.push(Op::Jump(0));
        self.push_process(lscope, "assign", ops, false);
        Ok(())
    }

    fn always(&mut self, scope: usize, body: &Stmt, comb: bool) -> Result<(), CompileError> {
        // Combinational blocks evaluate once at time zero, then wait.
        let star = comb || matches!(body, Stmt::Event(EventCtl::Star, _));
        let level_list = matches!(body, Stmt::Event(EventCtl::List(l), _) if l.iter().all(|(e, _)| *e == Edge::Any));
        let mut ops = Vec::new();
        if star || level_list {
            let inner = match body {
                Stmt::Event(_, b) => b.as_ref(),
                other => other,
            };
            self.compile_stmt(scope, inner, &mut ops)?;
            if star {
                let mut watch = Vec::new();
                self.stmt_reads(scope, inner, &mut watch)?;
                push_wait_any(&mut ops, watch);
            } else if let Stmt::Event(ev, _) = body {
                let w = self.event_op(scope, ev, inner)?;
                ops.push(w);
            }
        } else {
            self.compile_stmt(scope, body, &mut ops)?;
        }
        ops.push(Op::Jump(0));
        self.push_process(scope, "always", ops, false);
        Ok(())
    }

    fn instance(&mut self, scope: usize, inst: &'a Instance, depth: usize) -> Result<(), CompileError> {
        let module = *self
            .modules
            .get(inst.module.as_str())
            .ok_or_else(|| CompileError::new(inst.line, format!("unknown module '{}'", inst.module)))?;
        let mut overrides = Vec::new();
        for (name, e) in &inst.params {
            let (v, s) = self.const_eval(scope, e)?;
            overrides.push((name.clone(), v, s));
        }
        let path = format!("{}.{}", self.scopes[scope].path, inst.name);
        let ports = self.instantiate(module, path, &overrides, Some(scope), depth + 1)?;
        let named = inst.conns.iter().any(|(n, _)| n.is_some());
        for (i, (name, expr)) in inst.conns.iter().enumerate() {
            let port = if named {
                let n = name.as_deref().unwrap_or("");
                ports
                    .iter()
                    .find(|p| p.name == n)
                    .ok_or_else(|| CompileError::new(inst.line, format!("module '{}' has no port '{n}'", inst.module)))?
            } else {
                ports
                    .get(i)
                    .ok_or_else(|| CompileError::new(inst.line, format!("too many connections to '{}'", inst.module)))?
            };
            let Some(expr) = expr else { continue };
            self.implicit_nets(scope, expr);
            let child_ident = Expr::Ident(port.name.clone(), inst.line);
            match port.dir {
                Direction::Input => {
                    let width = self.prog.signals[port.sig].width;
                    let rhs = self.assign_rhs(scope, expr, width, inst.line)?;
                    let mut watch = Vec::new();
                    self.reads(&rhs, &mut watch);
                    let mut ops = vec![Op::Assign {
                        target: LTarget::Whole(port.sig),
                        rhs,
                        kind: AssignKind::Blocking,
                    }];
                    push_wait_any(&mut ops, watch);
                    ops.push(Op::Jump(0));
                    self.push_process(scope, "port", ops, false);
                }
                Direction::Output | Direction::Inout => {
                    let (target, width) = self.lvalue(scope, expr)?;
                    let sig = port.sig;
                    let s = &self.prog.signals[sig];
                    let mut rhs = EExpr {
                        kind: EKind::Sig(sig),
                        width: s.width,
                        signed: s.signed,
                    };
                    let w = width.max(s.width);
                    let sg = rhs.signed;
                    size(&mut rhs, w, sg);
                    let _ = child_ident;
                    let mut ops = vec![Op::Assign {
                        target,
                        rhs,
                        kind: AssignKind::Blocking,
                    }];
                    push_wait_any(&mut ops, vec![sig]);
                    ops.push(Op::Jump(0));
                    self.push_process(scope, "port", ops, false);
                }
            }
        }
        Ok(())
    }

    /// Undeclared identifiers in port connections become implicit 1-bit wires.
    fn implicit_nets(&mut self, scope: usize, e: &Expr) {
        if let Expr::Ident(name, _) = e {
            if self.lookup(scope, name).is_none() {
                let id = self.add_signal(Signal {
                    name: format!("{}.{}", self.scopes[scope].path, name),
                    width: 1,
                    signed: false,
                    msb: 0,
                    lsb: 0,
                    array: None,
                    init: Logic::all_z(1),
                });
                self.scopes[scope].names.insert(name.clone(), Sym::Sig(id));
            }
        }
    }

    fn generate_for(&mut self, scope: usize, g: &'a GenerateFor, depth: usize) -> Result<(), CompileError> {
        let mut value = self.const_int(scope, &g.init)?;
        let label = g.label.clone().unwrap_or_else(|| "genblk".into());
        for _ in 0..MAX_GENERATE_ITERATIONS {
            let path = format!("{}.{}[{}]", self.scopes[scope].path, label, value);
            let child = self.new_scope(Some(scope), path);
            self.scopes[child]
                .names
                .insert(g.var.clone(), Sym::Const(Logic::from_i64(value, 32), true));
            let (c, _) = self.const_eval(child, &g.cond)?;
            if c.truth() != crate::value::Bit::One {
                return Ok(());
            }
            self.elab_items(child, &g.items, &HashMap::new(), depth)?;
            value = self.const_int(child, &g.step)?;
        }
        Err(CompileError::new(g.line, "generate loop did not terminate"))
    }

    // ---- functions ----

    fn declare_function(&mut self, scope: usize, f: &Function) -> Result<(FuncId, usize), CompileError> {
        let path = format!("{}.{}", self.scopes[scope].path, f.name);
        let fscope = self.new_scope(Some(scope), path);
        let (msb, lsb) = match (&f.range, f.integer) {
            (Some(r), _) => self.const_range(scope, r)?,
            (None, true) => (31, 0),
            (None, false) => (0, 0),
        };
        let width = ((msb - lsb).unsigned_abs() + 1) as u32;
        let ret = self.add_signal(Signal {
            name: format!("{}.{}", self.scopes[scope].path, f.name),
            width,
            signed: f.signed || f.integer,
            msb,
            lsb,
            array: None,
            init: Logic::all_x(width),
        });
        self.scopes[fscope].names.insert(f.name.clone(), Sym::Sig(ret));
        let mut inputs = Vec::new();
        for d in &f.inputs {
            let pd = pending_of(d, Some(NetKind::Reg));
            inputs.push(self.declare(fscope, &d.name, &pd)?);
        }
        for d in &f.locals {
            let pd = pending_of(d, d.kind);
            let pd = PendingDecl {
                kind: pd.kind.or(Some(NetKind::Reg)),
                ..pd
            };
            self.declare(fscope, &d.name, &pd)?;
        }
        self.prog.functions.push(FunctionCode {
            name: f.name.clone(),
            ret,
            inputs,
            ops: Vec::new(),
        });
        self.funcs.push(FuncInfo { reads: Vec::new() });
        let id = self.prog.functions.len() - 1;
        self.scopes[scope].names.insert(f.name.clone(), Sym::Func(id));
        Ok((id, fscope))
    }

    fn compile_function(&mut self, _scope: usize, fscope: usize, id: FuncId, f: &Function) -> Result<(), CompileError> {
        let mut ops = Vec::new();
        self.compile_stmt(fscope, &f.body, &mut ops)?;
        ops.push(Op::Halt);
        for op in &ops {
            if matches!(op, Op::Delay(_) | Op::Wait { .. } | Op::WaitCond { .. }) {
                return Err(CompileError::new(f.line, format!("function '{}' contains timing controls", f.name)));
            }
        }
        let mut reads = Vec::new();
        self.stmt_reads(fscope, &f.body, &mut reads)?;
        let own: HashSet<SigId> = self.scopes[fscope]
            .names
            .values()
            .filter_map(|s| if let Sym::Sig(id) = s { Some(*id) } else { None })
            .collect();
        reads.retain(|r| !own.contains(r));
        self.prog.functions[id].ops = ops;
        self.funcs[id].reads = reads;
        Ok(())
    }

    // ---- statements ----

    fn compile_stmt(&mut self, scope: usize, s: &Stmt, ops: &mut Vec<Op>) -> Result<(), CompileError> {
        match s {
            Stmt::Null => {}
            Stmt::Block(stmts, decls) => {
                let scope = if decls.is_empty() {
                    scope
                } else {
                    let path = self.scopes[scope].path.clone();
                    let child = self.new_scope(Some(scope), path);
                    for d in decls {
                        let pd = pending_of(d, d.kind.or(Some(NetKind::Reg)));
                        self.declare(child, &d.name.to_string(), &pd)?;
                    }
                    child
                };
                for st in stmts {
                    self.compile_stmt(scope, st, ops)?;
                }
            }
            Stmt::Assign {
                lhs,
                rhs,
                nonblocking,
                delay,
                line,
            } => {
                let (target, width) = self.lvalue(scope, lhs)?;
                let rhs = self.assign_rhs(scope, rhs, width, *line)?;
                match (nonblocking, delay) {
                    (false, None) => ops.push(Op::Assign {
                        target,
                        rhs,
                        kind: AssignKind::Blocking,
                    }),
                    (true, None) => ops.push(Op::Assign {
                        target,
                        rhs,
                        kind: AssignKind::NonBlocking,
                    }),
                    (true, Some(d)) => {
                        let d = self.self_expr(scope, d)?;
                        ops.push(Op::Assign {
                            target,
                            rhs,
                            kind: AssignKind::NonBlockingDelayed(d),
                        })
                    }
                    (false, Some(d)) => {
                        let tmp = self.hidden(scope, rhs.width, rhs.signed);
                        let d = self.self_expr(scope, d)?;
                        let tw = rhs.width;
                        let ts = rhs.signed;
                        ops.push(Op::Assign {
                            target: LTarget::Whole(tmp),
                            rhs,
                            kind: AssignKind::Blocking,
                        });
                        ops.push(Op::Delay(d));
                        ops.push(Op::Assign {
                            target,
                            rhs: EExpr {
                                kind: EKind::Sig(tmp),
                                width: tw,
                                signed: ts,
                            },
                            kind: AssignKind::Blocking,
                        });
                    }
                }
            }
            Stmt::If { cond, then_s, else_s } => {
                let c = self.self_expr(scope, cond)?;
                let jif = ops.len();
                ops.push(Op::JumpIfNot(c, 0));
                self.compile_stmt(scope, then_s, ops)?;
                if let Some(e) = else_s {
                    let jend = ops.len();
                    ops.push(Op::Jump(0));
                    patch_here(ops, jif);
                    self.compile_stmt(scope, e, ops)?;
                    patch_here(ops, jend);
                } else {
                    patch_here(ops, jif);
                }
            }
            Stmt::Case {
                kind,
                sel,
                arms,
                default,
            } => {
                let mut sel_e = self.build(scope, sel)?;
                let mut labels = Vec::new();
                for (ls, _) in arms {
                    let mut v = Vec::new();
                    for l in ls {
                        v.push(self.build(scope, l)?);
                    }
                    labels.push(v);
                }
                let w = labels.iter().flatten().map(|e| e.width).fold(sel_e.width, u32::max);
                let sg = labels.iter().flatten().all(|e| e.signed) && sel_e.signed;
                size(&mut sel_e, w, sg);
                for l in labels.iter_mut().flatten() {
                    size(l, w, sg);
                }
                let at = ops.len();
                ops.push(Op::Halt);
                let mut ends = Vec::new();
                let mut table = Vec::new();
                for ((_, body), ls) in arms.iter().zip(labels) {
                    table.push((ls, ops.len()));
                    self.compile_stmt(scope, body, ops)?;
                    ends.push(ops.len());
                    ops.push(Op::Jump(0));
                }
                let default_at = ops.len();
                if let Some(d) = default {
                    self.compile_stmt(scope, d, ops)?;
                }
                let end = ops.len();
                for j in ends {
                    patch(ops, j, end);
                }
                ops[at] = Op::Case {
                    kind: *kind,
                    sel: sel_e,
                    arms: table,
                    default: default_at,
                };
            }
            Stmt::For { init, cond, step, body } => {
                self.compile_stmt(scope, init, ops)?;
                let top = ops.len();
                let c = self.self_expr(scope, cond)?;
                ops.push(Op::JumpIfNot(c, 0));
                self.compile_stmt(scope, body, ops)?;
                self.compile_stmt(scope, step, ops)?;
                ops.push(Op::Jump(top));
                patch_here(ops, top);
            }
            Stmt::While { cond, body } => {
                let top = ops.len();
                let c = self.self_expr(scope, cond)?;
                ops.push(Op::JumpIfNot(c, 0));
                self.compile_stmt(scope, body, ops)?;
                ops.push(Op::Jump(top));
                patch_here(ops, top);
            }
            Stmt::Repeat { count, body } => {
                let ctr = self.hidden(scope, 64, true);
                let mut n = self.build(scope, count)?;
                let ns = n.signed;
                size(&mut n, 64, ns);
                ops.push(Op::Assign {
                    target: LTarget::Whole(ctr),
                    rhs: n,
                    kind: AssignKind::Blocking,
                });
                let top = ops.len();
                let cv = EExpr {
                    kind: EKind::Sig(ctr),
                    width: 64,
                    signed: true,
                };
                let zero = EExpr {
                    kind: EKind::Const(Logic::zero(64)),
                    width: 64,
                    signed: true,
                };
                let cond = EExpr {
                    kind: EKind::Binary(BinaryOp::Gt, Box::new(cv.clone()), Box::new(zero)),
                    width: 1,
                    signed: false,
                };
                ops.push(Op::JumpIfNot(cond, 0));
                self.compile_stmt(scope, body, ops)?;
                let one = EExpr {
                    kind: EKind::Const(Logic::from_u64(1, 64)),
                    width: 64,
                    signed: true,
                };
                ops.push(Op::Assign {
                    target: LTarget::Whole(ctr),
                    rhs: EExpr {
                        kind: EKind::Binary(BinaryOp::Sub, Box::new(cv), Box::new(one)),
                        width: 64,
                        signed: true,
                    },
                    kind: AssignKind::Blocking,
                });
                ops.push(Op::Jump(top));
                patch_here(ops, top);
            }
            Stmt::Forever(body) => {
                let top = ops.len();
                self.compile_stmt(scope, body, ops)?;
                ops.push(Op::Jump(top));
            }
            Stmt::Delay(d, body) => {
                let d = self.self_expr(scope, d)?;
                ops.push(Op::Delay(d));
                self.compile_stmt(scope, body, ops)?;
            }
            Stmt::Event(ev, body) => {
                let w = self.event_op(scope, ev, body)?;
                ops.push(w);
                self.compile_stmt(scope, body, ops)?;
            }
            Stmt::Wait(cond, body) => {
                let c = self.self_expr(scope, cond)?;
                let mut watch = Vec::new();
                self.reads(&c, &mut watch);
                ops.push(Op::WaitCond { cond: c, watch });
                self.compile_stmt(scope, body, ops)?;
            }
            Stmt::SysTask { name, args, line } => self.sys_task(scope, name, args, *line, ops)?,
        }
        Ok(())
    }

    fn event_op(&mut self, scope: usize, ev: &EventCtl, body: &Stmt) -> Result<Op, CompileError> {
        match ev {
            EventCtl::Star => {
                let mut watch = Vec::new();
                self.stmt_reads(scope, body, &mut watch)?;
                let events = watch
                    .iter()
                    .map(|&s| EventSpec {
                        edge: Edge::Any,
                        expr: sig_expr(&self.prog.signals[s], s),
                    })
                    .collect();
                Ok(Op::Wait { events, watch })
            }
            EventCtl::List(list) => {
                let mut events = Vec::new();
                let mut watch = Vec::new();
                for (edge, e) in list {
                    let ee = self.self_expr(scope, e)?;
                    self.reads(&ee, &mut watch);
                    events.push(EventSpec { edge: *edge, expr: ee });
                }
                Ok(Op::Wait { events, watch })
            }
        }
    }

    fn sys_task(
        &mut self,
        scope: usize,
        name: &str,
        args: &[Expr],
        line: usize,
        ops: &mut Vec<Op>,
    ) -> Result<(), CompileError> {
        match name {
            "$display" | "$write" | "$strobe" | "$error" | "$info" | "$warning" | "$fatal" => {
                let mut eargs = Vec::new();
                let skip = usize::from(name == "$fatal" && !args.is_empty() && !matches!(args[0], Expr::Str(_)));
                for a in &args[skip..] {
                    eargs.push(self.self_expr(scope, a)?);
                }
                if name == "$error" || name == "$fatal" {
                    eargs.insert(
                        0,
                        EExpr {
                            kind: EKind::Str(if name == "$error" { "ERROR: ".into() } else { "FATAL: ".into() }),
                            width: 0,
                            signed: false,
                        },
                    );
                }
                ops.push(Op::Display {
                    args: eargs,
                    newline: name != "$write",
                    scope: self.scopes[scope].path.clone(),
                });
                if name == "$fatal" {
                    ops.push(Op::Finish);
                }
            }
            "$finish" | "$stop" => ops.push(Op::Finish),
            "$dumpfile" | "$dumpvars" | "$dumpon" | "$dumpoff" | "$timeformat" | "$monitoroff" => {}
            other => {
                return Err(CompileError::new(line, format!("unsupported system task {other}")));
            }
        }
        Ok(())
    }

    // ---- expressions ----

    fn self_expr(&mut self, scope: usize, e: &Expr) -> Result<EExpr, CompileError> {
        let mut ee = self.build(scope, e)?;
        let (w, s) = (ee.width, ee.signed);
        size(&mut ee, w, s);
        Ok(ee)
    }

    fn assign_rhs(&mut self, scope: usize, e: &Expr, lhs_width: u32, _line: usize) -> Result<EExpr, CompileError> {
        let mut ee = self.build(scope, e)?;
        let w = ee.width.max(lhs_width);
        let s = ee.signed;
        size(&mut ee, w, s);
        Ok(ee)
    }

    /// Build with self-determined widths; `size` later applies context.
    fn build(&mut self, scope: usize, e: &Expr) -> Result<EExpr, CompileError> {
        let ex = |kind, width, signed| EExpr { kind, width, signed };
        Ok(match e {
            Expr::Literal { value, signed, .. } => ex(EKind::Const(value.clone()), value.width(), *signed),
            Expr::Str(s) => ex(EKind::Str(s.clone()), (s.len() as u32 * 8).max(8), false),
            Expr::Ident(name, line) => match self.lookup(scope, name).cloned() {
                Some(Sym::Sig(id)) => {
                    let s = &self.prog.signals[id];
                    if s.array.is_some() {
                        return Err(CompileError::new(*line, format!("memory '{name}' used without an index")));
                    }
                    ex(EKind::Sig(id), s.width, s.signed)
                }
                Some(Sym::Const(v, signed)) => ex(EKind::Const(v.clone()), v.width(), signed),
                Some(Sym::Func(_)) => {
                    return Err(CompileError::new(*line, format!("function '{name}' used without arguments")))
                }
                None => return Err(CompileError::new(*line, format!("'{name}' is not declared"))),
            },
            Expr::Index(base, idx) => {
                if let Expr::Ident(name, line) = base.as_ref() {
                    match self.lookup(scope, name).cloned() {
                        Some(Sym::Sig(id)) => {
                            let s = self.prog.signals[id].clone();
                            let i = self.self_expr(scope, idx)?;
                            if s.array.is_some() {
                                return Ok(ex(EKind::Word(id, Box::new(i)), s.width, s.signed));
                            }
                            if let Some(c) = const_value(&i) {
                                let off = s.offset(logic_to_i64(&c, i.signed).unwrap_or(i64::MIN / 2));
                                return Ok(ex(EKind::PartSel(id, off, 1), 1, false));
                            }
                            return Ok(ex(EKind::BitSel(id, Box::new(i)), 1, false));
                        }
                        Some(Sym::Const(..)) => {}
                        _ => return Err(CompileError::new(*line, format!("'{name}' is not declared"))),
                    }
                }
                let b = self.self_expr(scope, base)?;
                let lsb = self.base_lsb(scope, base);
                let i = self.self_expr(scope, idx)?;
                let lo = offset_expr(i, lsb);
                ex(
                    EKind::SubSel {
                        base: Box::new(b),
                        lo: Box::new(lo),
                        width: 1,
                    },
                    1,
                    false,
                )
            }
            Expr::Part(base, msb, lsb) => {
                let m = self.const_int(scope, msb)?;
                let l = self.const_int(scope, lsb)?;
                let width = ((m - l).unsigned_abs() + 1) as u32;
                if let Expr::Ident(name, _) = base.as_ref() {
                    if let Some(Sym::Sig(id)) = self.lookup(scope, name).cloned() {
                        let s = &self.prog.signals[id];
                        if s.array.is_none() {
                            let lo = s.offset(m).min(s.offset(l));
                            return Ok(ex(EKind::PartSel(id, lo, width), width, false));
                        }
                    }
                }
                let b = self.self_expr(scope, base)?;
                let base_lsb = self.base_lsb(scope, base);
                let lo = m.min(l) - base_lsb;
                ex(
                    EKind::SubSel {
                        base: Box::new(b),
                        lo: Box::new(const_expr(Logic::from_i64(lo, 64), true)),
                        width,
                    },
                    width,
                    false,
                )
            }
            Expr::IndexedPart { base, start, width, up } => {
                let w = self.const_int(scope, width)?;
                if w <= 0 {
                    return Err(CompileError::new(expr_line(e), "indexed part-select width must be positive"));
                }
                let w = w as u32;
                let st = self.self_expr(scope, start)?;
                if let Expr::Ident(name, _) = base.as_ref() {
                    if let Some(Sym::Sig(id)) = self.lookup(scope, name).cloned() {
                        if self.prog.signals[id].array.is_none() {
                            return Ok(ex(
                                EKind::IndexedPart {
                                    sig: id,
                                    start: Box::new(st),
                                    width: w,
                                    up: *up,
                                },
                                w,
                                false,
                            ));
                        }
                    }
                }
                let b = self.self_expr(scope, base)?;
                let lsb = self.base_lsb(scope, base);
                let mut lo = offset_expr(st, lsb);
                if !*up {
                    lo = binary_const(BinaryOp::Sub, lo, w as i64 - 1);
                }
                ex(
                    EKind::SubSel {
                        base: Box::new(b),
                        lo: Box::new(lo),
                        width: w,
                    },
                    w,
                    false,
                )
            }
            Expr::Unary(op, a) => {
                let a = self.build(scope, a)?;
                match op {
                    UnaryOp::Plus | UnaryOp::Neg | UnaryOp::Not => {
                        let (w, s) = (a.width, a.signed);
                        ex(EKind::Unary(*op, Box::new(a)), w, s)
                    }
                    _ => ex(EKind::Unary(*op, Box::new(a)), 1, false),
                }
            }
            Expr::Binary(op, a, b) => {
                let a = self.build(scope, a)?;
                let b = self.build(scope, b)?;
                use BinaryOp::*;
                match op {
                    Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => {
                        let (w, s) = (a.width.max(b.width), a.signed && b.signed);
                        ex(EKind::Binary(*op, Box::new(a), Box::new(b)), w, s)
                    }
                    Shl | Shr | AShl | AShr | Pow => {
                        let (w, s) = (a.width, a.signed);
                        ex(EKind::Binary(*op, Box::new(a), Box::new(b)), w, s)
                    }
                    _ => ex(EKind::Binary(*op, Box::new(a), Box::new(b)), 1, false),
                }
            }
            Expr::Ternary(c, a, b) => {
                let c = self.build(scope, c)?;
                let a = self.build(scope, a)?;
                let b = self.build(scope, b)?;
                let (w, s) = (a.width.max(b.width), a.signed && b.signed);
                ex(EKind::Ternary(Box::new(c), Box::new(a), Box::new(b)), w, s)
            }
            Expr::Concat(parts) => {
                let mut v = Vec::new();
                for p in parts {
                    v.push(self.self_expr(scope, p)?);
                }
                let w = v.iter().map(|p| p.width).sum();
                ex(EKind::Concat(v), w, false)
            }
            Expr::Repeat(n, parts) => {
                let count = self.const_int(scope, n)?;
                if !(0..=1 << 16).contains(&count) {
                    return Err(CompileError::new(expr_line(e), "bad replication count"));
                }
                let mut v = Vec::new();
                for p in parts {
                    v.push(self.self_expr(scope, p)?);
                }
                let w: u32 = v.iter().map(|p| p.width).sum::<u32>() * count as u32;
                ex(EKind::Repeat(count as u32, v), w, false)
            }
            Expr::Call(name, args, line) => {
                let Some(Sym::Func(id)) = self.lookup(scope, name).cloned() else {
                    return Err(CompileError::new(*line, format!("unknown function '{name}'")));
                };
                let inputs = self.prog.functions[id].inputs.clone();
                if inputs.len() != args.len() {
                    return Err(CompileError::new(*line, format!("function '{name}' expects {} arguments", inputs.len())));
                }
                let mut eargs = Vec::new();
                for (a, formal) in args.iter().zip(inputs) {
                    let fw = self.prog.signals[formal].width;
                    eargs.push(self.assign_rhs(scope, a, fw, *line)?);
                }
                let ret = &self.prog.signals[self.prog.functions[id].ret];
                ex(EKind::Call(id, eargs), ret.width, ret.signed)
            }
            Expr::SysCall(name, args) => match name.as_str() {
                "$signed" | "$unsigned" if args.len() == 1 => {
                    let a = self.self_expr(scope, &args[0])?;
                    let w = a.width;
                    ex(EKind::Cast(Box::new(a)), w, name == "$signed")
                }
                "$clog2" if args.len() == 1 => {
                    let v = self.const_int(scope, &args[0])?;
                    let mut r = 0i64;
                    while (1i64 << r) < v {
                        r += 1;
                    }
                    ex(EKind::Const(Logic::from_i64(r, 32)), 32, true)
                }
                "$bits" if args.len() == 1 => {
                    let a = self.build(scope, &args[0])?;
                    ex(EKind::Const(Logic::from_u64(a.width as u64, 32)), 32, true)
                }
                "$time" | "$stime" | "$realtime" => ex(EKind::Time, 64, false),
                "$random" | "$urandom" => ex(EKind::Random, 32, name == "$random"),
                other => return Err(CompileError::new(expr_line(e), format!("unsupported system function {other}"))),
            },
        })
    }

    /// Declared lsb of the vector underlying `base` (memory words use the element range).
    fn base_lsb(&self, scope: usize, base: &Expr) -> i64 {
        let name = match base {
            Expr::Index(b, _) => match b.as_ref() {
                Expr::Ident(n, _) => Some(n),
                _ => None,
            },
            _ => None,
        };
        if let Some(n) = name {
            if let Some(Sym::Sig(id)) = self.lookup(scope, n) {
                let s = &self.prog.signals[*id];
                return s.msb.min(s.lsb);
            }
        }
        0
    }

    fn lvalue(&mut self, scope: usize, e: &Expr) -> Result<(LTarget, u32), CompileError> {
        let line = expr_line(e);
        let sig_of = |this: &Self, name: &str| -> Result<SigId, CompileError> {
            match this.lookup(scope, name) {
                Some(Sym::Sig(id)) => Ok(*id),
                Some(_) => Err(CompileError::new(line, format!("cannot assign to '{name}'"))),
                None => Err(CompileError::new(line, format!("'{name}' is not declared"))),
            }
        };
        match e {
            Expr::Ident(name, _) => {
                let id = sig_of(self, name)?;
                let s = &self.prog.signals[id];
                if s.array.is_some() {
                    return Err(CompileError::new(line, format!("cannot assign whole memory '{name}'")));
                }
                Ok((LTarget::Whole(id), s.width))
            }
            Expr::Index(base, idx) => match base.as_ref() {
                Expr::Ident(name, _) => {
                    let id = sig_of(self, name)?;
                    let i = self.self_expr(scope, idx)?;
                    let s = &self.prog.signals[id];
                    if s.array.is_some() {
                        Ok((LTarget::Word(id, i), s.width))
                    } else if let Some(c) = const_value(&i) {
                        let off = s.offset(logic_to_i64(&c, i.signed).unwrap_or(i64::MIN / 2));
                        Ok((LTarget::Part(id, off, 1), 1))
                    } else {
                        Ok((LTarget::Bit(id, i), 1))
                    }
                }
                Expr::Index(inner, widx) => {
                    let Expr::Ident(name, _) = inner.as_ref() else {
                        return Err(CompileError::new(line, "unsupported assignment target"));
                    };
                    let id = sig_of(self, name)?;
                    let w = self.self_expr(scope, widx)?;
                    let b = self.self_expr(scope, idx)?;
                    let lsb = {
                        let s = &self.prog.signals[id];
                        s.msb.min(s.lsb)
                    };
                    Ok((LTarget::WordBit(id, w, offset_expr(b, lsb)), 1))
                }
                _ => Err(CompileError::new(line, "unsupported assignment target")),
            },
            Expr::Part(base, msb, lsb) => {
                let m = self.const_int(scope, msb)?;
                let l = self.const_int(scope, lsb)?;
                let width = ((m - l).unsigned_abs() + 1) as u32;
                match base.as_ref() {
                    Expr::Ident(name, _) => {
                        let id = sig_of(self, name)?;
                        let s = &self.prog.signals[id];
                        let lo = s.offset(m).min(s.offset(l));
                        Ok((LTarget::Part(id, lo, width), width))
                    }
                    Expr::Index(inner, widx) => {
                        let Expr::Ident(name, _) = inner.as_ref() else {
                            return Err(CompileError::new(line, "unsupported assignment target"));
                        };
                        let id = sig_of(self, name)?;
                        let w = self.self_expr(scope, widx)?;
                        let s = &self.prog.signals[id];
                        let lo = m.min(l) - s.msb.min(s.lsb);
                        Ok((LTarget::WordPart(id, w, lo, width), width))
                    }
                    _ => Err(CompileError::new(line, "unsupported assignment target")),
                }
            }
            Expr::IndexedPart { base, start, width, up } => {
                let Expr::Ident(name, _) = base.as_ref() else {
                    return Err(CompileError::new(line, "unsupported assignment target"));
                };
                let id = sig_of(self, name)?;
                let w = self.const_int(scope, width)?.max(1) as u32;
                let st = self.self_expr(scope, start)?;
                Ok((
                    LTarget::IndexedPart {
                        sig: id,
                        start: st,
                        width: w,
                        up: *up,
                    },
                    w,
                ))
            }
            Expr::Concat(parts) => {
                let mut ts = Vec::new();
                let mut total = 0;
                for p in parts {
                    let (t, w) = self.lvalue(scope, p)?;
                    total += w;
                    ts.push(t);
                }
                Ok((LTarget::Concat(ts), total))
            }
            _ => Err(CompileError::new(line, "unsupported assignment target")),
        }
    }

    // ---- dependency collection ----

    fn reads(&self, e: &EExpr, out: &mut Vec<SigId>) {
        let mut set = BTreeSet::new();
        self.reads_into(e, &mut set);
        for s in set {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }

    fn reads_into(&self, e: &EExpr, out: &mut BTreeSet<SigId>) {
        match &e.kind {
            EKind::Const(_) | EKind::Str(_) | EKind::Time | EKind::Random => {}
            EKind::Sig(s) | EKind::PartSel(s, _, _) => {
                out.insert(*s);
            }
            EKind::BitSel(s, i) | EKind::Word(s, i) => {
                out.insert(*s);
                self.reads_into(i, out);
            }
            EKind::IndexedPart { sig, start, .. } => {
                out.insert(*sig);
                self.reads_into(start, out);
            }
            EKind::SubSel { base, lo, .. } => {
                self.reads_into(base, out);
                self.reads_into(lo, out);
            }
            EKind::Unary(_, a) | EKind::Cast(a) => self.reads_into(a, out),
            EKind::Binary(_, a, b) => {
                self.reads_into(a, out);
                self.reads_into(b, out);
            }
            EKind::Ternary(c, a, b) => {
                self.reads_into(c, out);
                self.reads_into(a, out);
                self.reads_into(b, out);
            }
            EKind::Concat(v) | EKind::Repeat(_, v) => v.iter().for_each(|p| self.reads_into(p, out)),
            EKind::Call(f, args) => {
                args.iter().for_each(|p| self.reads_into(p, out));
                out.extend(self.funcs[*f].reads.iter().copied());
            }
        }
    }

    fn target_reads(&self, t: &LTarget, out: &mut Vec<SigId>) {
        match t {
            LTarget::Whole(_) | LTarget::Part(..) => {}
            LTarget::Bit(_, i) | LTarget::Word(_, i) | LTarget::WordPart(_, i, _, _) => self.reads(i, out),
            LTarget::IndexedPart { start, .. } => self.reads(start, out),
            LTarget::WordBit(_, a, b) => {
                self.reads(a, out);
                self.reads(b, out);
            }
            LTarget::Concat(v) => v.iter().for_each(|t| self.target_reads(t, out)),
        }
    }

    /// Signals read anywhere in a statement (for `@*`). Compiles into a
    /// scratch op list and walks the resulting expressions.
    fn stmt_reads(&mut self, scope: usize, s: &Stmt, out: &mut Vec<SigId>) -> Result<(), CompileError> {
        let mut scratch = Vec::new();
        let saved_sigs = self.prog.signals.len();
        let saved_tmp = self.tmp;
        let saved_scopes = self.scopes.len();
        self.compile_stmt(scope, s, &mut scratch)?;
        let mut set = BTreeSet::new();
        for op in &scratch {
            match op {
                Op::Assign { target, rhs, kind } => {
                    self.reads_into(rhs, &mut set);
                    let mut v = Vec::new();
                    self.target_reads(target, &mut v);
                    set.extend(v);
                    if let AssignKind::NonBlockingDelayed(d) = kind {
                        self.reads_into(d, &mut set);
                    }
                }
                Op::JumpIfNot(c, _) => self.reads_into(c, &mut set),
                Op::Case { sel, arms, .. } => {
                    self.reads_into(sel, &mut set);
                    for (ls, _) in arms {
                        ls.iter().for_each(|l| self.reads_into(l, &mut set));
                    }
                }
                Op::Display { args, .. } => args.iter().for_each(|a| self.reads_into(a, &mut set)),
                _ => {}
            }
        }
        // Scratch compilation may allocate hidden signals/scopes; drop them.
        set.retain(|s| *s < saved_sigs);
        self.prog.signals.truncate(saved_sigs);
        self.tmp = saved_tmp;
        self.scopes.truncate(saved_scopes);
        for s in set {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        Ok(())
    }
}

fn pending_of(d: &Decl, kind: Option<NetKind>) -> PendingDecl {
    PendingDecl {
        line: d.line,
        dir: None,
        kind,
        signed: d.signed,
        range: d.range.clone(),
        array: d.array.clone(),
        init: d.init.clone(),
    }
}

fn push_wait_any(ops: &mut Vec<Op>, watch: Vec<SigId>) {
    // Continuous processes with no inputs run once and stop.
    if watch.is_empty() {
        ops.push(Op::Halt);
        return;
    }
    ops.push(Op::Wait { events: Vec::new(), watch });
}

fn patch_here(ops: &mut [Op], at: usize) {
    let end = ops.len();
    patch(ops, at, end);
}

fn patch(ops: &mut [Op], at: usize, target: usize) {
    match &mut ops[at] {
        Op::Jump(t) | Op::JumpIfNot(_, t) => *t = target,
        _ => unreachable!("patching a non-jump op"),
    }
}

fn sig_expr(s: &Signal, id: SigId) -> EExpr {
    EExpr {
        kind: EKind::Sig(id),
        width: s.width,
        signed: s.signed,
    }
}

fn const_expr(v: Logic, signed: bool) -> EExpr {
    let w = v.width();
    EExpr {
        kind: EKind::Const(v),
        width: w,
        signed,
    }
}

/// `idx - lsb` as a 64-bit signed expression.
fn offset_expr(idx: EExpr, lsb: i64) -> EExpr {
    let mut i = idx;
    let s = i.signed;
    let w = i.width.max(64);
    size(&mut i, w, s);
    if lsb == 0 {
        return i;
    }
    binary_const(BinaryOp::Sub, i, lsb)
}

fn binary_const(op: BinaryOp, a: EExpr, k: i64) -> EExpr {
    let w = a.width.max(64);
    let mut a = a;
    let s = a.signed;
    size(&mut a, w, s);
    EExpr {
        kind: EKind::Binary(op, Box::new(a), Box::new(const_expr(Logic::from_i64(k, w), true))),
        width: w,
        signed: s,
    }
}

fn logic_to_i64(v: &Logic, signed: bool) -> Option<i64> {
    if signed {
        v.to_i64()
    } else {
        v.to_biguint().and_then(|b| b.to_i64())
    }
}

fn expr_line(e: &Expr) -> usize {
    match e {
        Expr::Ident(_, l) | Expr::Call(_, _, l) => *l,
        Expr::Index(b, _) | Expr::Part(b, _, _) => expr_line(b),
        Expr::IndexedPart { base, .. } => expr_line(base),
        Expr::Unary(_, a) => expr_line(a),
        Expr::Binary(_, a, b) => expr_line(a).max(expr_line(b)),
        Expr::Ternary(c, _, _) => expr_line(c),
        Expr::Concat(v) => v.first().map(expr_line).unwrap_or(0),
        _ => 0,
    }
}

/// Apply context width/signedness top-down.
pub(crate) fn size(e: &mut EExpr, width: u32, signed: bool) {
    let width = width.max(e.width);
    match &mut e.kind {
        EKind::Unary(op, a) => match op {
            UnaryOp::Plus | UnaryOp::Neg | UnaryOp::Not => {
                size(a, width, signed);
                e.width = width;
                e.signed = signed;
            }
            _ => {
                let (w, s) = (a.width, a.signed);
                size(a, w, s);
                e.width = width;
                e.signed = false;
            }
        },
        EKind::Binary(op, a, b) => {
            use BinaryOp::*;
            match op {
                Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => {
                    size(a, width, signed);
                    size(b, width, signed);
                    e.width = width;
                    e.signed = signed;
                }
                Shl | Shr | AShl | AShr | Pow => {
                    size(a, width, signed);
                    let (w, s) = (b.width, b.signed);
                    size(b, w, s);
                    e.width = width;
                    e.signed = signed;
                }
                Lt | Le | Gt | Ge | Eq | Ne | CaseEq | CaseNe => {
                    let w = a.width.max(b.width);
                    let s = a.signed && b.signed;
                    size(a, w, s);
                    size(b, w, s);
                    e.width = width;
                    e.signed = false;
                }
                LogAnd | LogOr => {
                    let (w, s) = (a.width, a.signed);
                    size(a, w, s);
                    let (w, s) = (b.width, b.signed);
                    size(b, w, s);
                    e.width = width;
                    e.signed = false;
                }
            }
        }
        EKind::Ternary(c, a, b) => {
            let (w, s) = (c.width, c.signed);
            size(c, w, s);
            size(a, width, signed);
            size(b, width, signed);
            e.width = width;
            e.signed = signed;
        }
        _ => {
            // Leaves keep their raw value width; evaluation extends to `width`.
            e.width = width;
            e.signed = signed && e.signed;
        }
    }
}

/// Evaluate a fully constant expression at compile time.
pub(crate) fn const_value(e: &EExpr) -> Option<Logic> {
    let v = match &e.kind {
        EKind::Const(v) => v.resize(e.width, e.signed),
        EKind::Unary(op, a) => {
            let av = const_value(a)?;
            ops::unary(*op, &av, e.width).resize(e.width, false)
        }
        EKind::Binary(op, a, b) => {
            let av = const_value(a)?;
            let bv = const_value(b)?;
            binary_value(*op, &av, &bv, e, a.signed, b.signed)
        }
        EKind::Ternary(c, a, b) => {
            let cv = const_value(c)?;
            let av = const_value(a)?;
            let bv = const_value(b)?;
            match cv.truth() {
                crate::value::Bit::One => av,
                crate::value::Bit::Zero => bv,
                _ => ops::merge(&av, &bv),
            }
        }
        EKind::Concat(v) => {
            let parts: Option<Vec<Logic>> = v.iter().map(const_value).collect();
            Logic::concat(&parts?).resize(e.width, false)
        }
        EKind::Repeat(n, v) => {
            let parts: Option<Vec<Logic>> = v.iter().map(const_value).collect();
            let one = Logic::concat(&parts?);
            let all: Vec<Logic> = (0..*n).map(|_| one.clone()).collect();
            Logic::concat(&all).resize(e.width, false)
        }
        EKind::Cast(a) => const_value(a)?.resize(e.width, e.signed),
        EKind::SubSel { base, lo, width } => {
            let b = const_value(base)?;
            let l = const_value(lo)?;
            b.slice(l.to_i64()?, *width).resize(e.width, false)
        }
        _ => return None,
    };
    Some(v)
}

/// Shared binary operator dispatch for compile-time and run-time evaluation.
pub(crate) fn binary_value(op: BinaryOp, a: &Logic, b: &Logic, e: &EExpr, a_signed: bool, b_signed: bool) -> Logic {
    use BinaryOp::*;
    match op {
        Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => ops::arith(op, a, b, e.width, e.signed),
        Shl | Shr | AShl | AShr => ops::shift(op, a, b, e.width, e.signed),
        Pow => ops::power(a, b, e.width, e.signed, b_signed),
        Lt | Le | Gt | Ge | Eq | Ne | CaseEq | CaseNe => {
            ops::compare(op, a, b, a_signed && b_signed).resize(e.width, false)
        }
        LogAnd | LogOr => ops::logical(op, a, b).resize(e.width, false),
    }
}
