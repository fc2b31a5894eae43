// SPDX-License-Identifier: Apache-2.0

//! Differential-testing testbench generation.
//!
//! Expected outputs are captured by simulating the original design, never taken from provider text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::Num;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::interface::{PortDecl, PortDirection};
use crate::operators::{OperatorError, PromptBundle, PromptKind, Templates};
use crate::provider::{GenerationRequest, Provider, ProviderError};
use crate::tooling::{parse_sim_output, SimDriver, ToolError, Verdict};
use crate::model::Design;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DifftestError {
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
    #[error("template: {0}")]
    Template(#[from] OperatorError),
    #[error("cannot parse specification: {0}")]
    SpecParse(String),
    #[error("cannot parse vectors: {0}")]
    VectorParse(String),
    #[error("no valid vectors in response")]
    NoValidVectors,
    #[error("stimulus testbench failed to compile: {0}")]
    SimCompile(String),
    #[error("simulation failed: {0}")]
    SimRuntime(String),
    #[error("unknown value {value} on {port} at v={vector} t={index}")]
    UnknownValueInGolden { vector: usize, index: usize, port: String, value: String },
    #[error("no golden value for {port} at v={vector} t={index}")]
    GoldenCoverageGap { vector: usize, index: usize, port: String },
    #[error("checking testbench did not pass on the original design: {0}")]
    ValidationFailed(String),
    #[error("tool: {0}")]
    Tool(#[from] ToolError),
    #[error("testbench generation failed after {attempts} attempt(s); last error: {last}")]
    TestbenchGenerationFailed { attempts: u32, last: Box<DifftestError> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitClass {
    Combinational,
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetSpec {
    pub name: String,
    pub active_low: bool,
    pub synchronous: bool,
}

impl ResetSpec {
    pub fn asserted(&self) -> &'static str {
        if self.active_low {
            "1'b0"
        } else {
            "1'b1"
        }
    }

    pub fn released(&self) -> &'static str {
        if self.active_low {
            "1'b1"
        } else {
            "1'b0"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub module_name: String,
    pub ports: Vec<PortDecl>,
    pub class: CircuitClass,
    pub clock: Option<String>,
    pub reset: Option<ResetSpec>,
    pub description: String,
    pub scenarios: Vec<String>,
}

impl FunctionalSpec {
    /// Drivable inputs: every input except the clock.
    pub fn stimulus_inputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports
            .iter()
            .filter(move |p| p.is_input() && Some(&p.name) != self.clock.as_ref())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == PortDirection::Output)
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    /// Same heading layout the extraction prompt asks for.
    pub fn render(&self) -> String {
        let mut s = format!("MODULE: {}\n", self.module_name);
        let class = match self.class {
            CircuitClass::Combinational => "combinational",
            CircuitClass::Sequential => "sequential",
        };
        let _ = writeln!(s, "CLASS: {class}");
        let _ = writeln!(s, "CLOCK: {}", self.clock.as_deref().unwrap_or("none"));
        match &self.reset {
            Some(r) => {
                let _ = writeln!(
                    s,
                    "RESET: {} {} {}",
                    r.name,
                    if r.active_low { "active-low" } else { "active-high" },
                    if r.synchronous { "sync" } else { "async" }
                );
            }
            None => s.push_str("RESET: none\n"),
        }
        s.push_str("PORTS:\n");
        for p in &self.ports {
            let dir = match p.direction {
                PortDirection::Input => "input",
                PortDirection::Output => "output",
                PortDirection::Inout => "inout",
            };
            let _ = writeln!(s, "- {dir} {} {}", p.name, p.width);
        }
        let _ = writeln!(s, "DESCRIPTION:\n{}", self.description.trim());
        s.push_str("SCENARIOS:\n");
        for sc in &self.scenarios {
            let _ = writeln!(s, "- {sc}");
        }
        s
    }
}

/// What a provider reply states, before reconciliation with the local parse.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpecReply {
    pub module_name: Option<String>,
    pub class: Option<CircuitClass>,
    pub clock: Option<String>,
    pub reset_active_low: Option<bool>,
    pub ports: Vec<(PortDirection, String, u32)>,
    pub description: String,
    pub scenarios: Vec<String>,
}

const HEADINGS: [&str; 7] = ["MODULE", "CLASS", "CLOCK", "RESET", "PORTS", "DESCRIPTION", "SCENARIOS"];

fn heading(line: &str) -> Option<(&'static str, &str)> {
    let l = line.trim().trim_start_matches(['#', '*', ' ']);
    let (h, rest) = l.split_once(':')?;
    let h = h.trim().trim_matches('*').trim().to_ascii_uppercase();
    HEADINGS.iter().find(|k| **k == h).map(|k| (*k, rest.trim().trim_matches('*').trim()))
}

fn parse_width(tok: &str) -> Option<u32> {
    if let Ok(w) = tok.parse::<u32>() {
        return Some(w);
    }
    let inner = tok.trim_start_matches('[').trim_end_matches(']');
    let (h, l) = inner.split_once(':')?;
    let (h, l): (i64, i64) = (h.trim().parse().ok()?, l.trim().parse().ok()?);
    Some((h - l).unsigned_abs() as u32 + 1)
}

pub fn parse_spec_reply(text: &str) -> Result<SpecReply, DifftestError> {
    let mut sections: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for line in text.lines() {
        if let Some((h, rest)) = heading(line) {
            current = Some(h);
            let e = sections.entry(h).or_default();
            if !rest.is_empty() {
                e.push(rest.to_string());
            }
        } else if let Some(h) = current {
            if !line.trim().is_empty() && !line.trim_start().starts_with("```") {
                sections.entry(h).or_default().push(line.trim().to_string());
            }
        }
    }
    let missing: Vec<&str> = ["MODULE", "CLASS", "PORTS"]
        .into_iter()
        .filter(|h| !sections.contains_key(h))
        .collect();
    if !missing.is_empty() {
        return Err(DifftestError::SpecParse(format!("missing heading(s): {}", missing.join(", "))));
    }
    let first = |h: &str| sections.get(h).and_then(|v| v.first()).cloned().unwrap_or_default();
    let class_text = first("CLASS").to_ascii_lowercase();
    let class = if class_text.contains("sequential") {
        Some(CircuitClass::Sequential)
    } else if class_text.contains("combinational") {
        Some(CircuitClass::Combinational)
    } else {
        None
    };
    let none = |s: String| (!s.is_empty() && !s.eq_ignore_ascii_case("none")).then_some(s);
    let clock = none(first("CLOCK")).and_then(|s| s.split_whitespace().next().map(str::to_string));
    let reset_text = first("RESET").to_ascii_lowercase();
    let reset_active_low = if reset_text.contains("active-low") || reset_text.contains("active low") {
        Some(true)
    } else if reset_text.contains("active-high") || reset_text.contains("active high") {
        Some(false)
    } else {
        None
    };
    let mut ports = Vec::new();
    for l in sections.get("PORTS").into_iter().flatten() {
        let toks: Vec<&str> = l.trim_start_matches(['-', '*']).split_whitespace().collect();
        let dir = match toks.first().map(|t| t.to_ascii_lowercase()) {
            Some(d) if d == "input" => PortDirection::Input,
            Some(d) if d == "output" => PortDirection::Output,
            Some(d) if d == "inout" => PortDirection::Inout,
            _ => continue,
        };
        let rest: Vec<&str> = toks[1..].iter().copied().filter(|t| !t.eq_ignore_ascii_case("reg") && !t.eq_ignore_ascii_case("wire")).collect();
        let (name, width) = match rest.as_slice() {
            [w, n, ..] if w.starts_with('[') => (n.to_string(), parse_width(w).unwrap_or(1)),
            [n, w, ..] => (n.to_string(), parse_width(w).unwrap_or(1)),
            [n] => (n.to_string(), 1),
            [] => continue,
        };
        ports.push((dir, name.trim_end_matches([',', ';']).to_string(), width));
    }
    Ok(SpecReply {
        module_name: Some(first("MODULE")).filter(|s| !s.is_empty()),
        class,
        clock,
        reset_active_low,
        ports,
        description: sections.get("DESCRIPTION").map(|v| v.join("\n")).unwrap_or_default(),
        scenarios: sections
            .get("SCENARIOS")
            .into_iter()
            .flatten()
            .map(|s| s.trim_start_matches(['-', '*', ' ']).to_string())
            .collect(),
    })
}

fn edge_on(source: &str, signal: &str) -> bool {
    let re = Regex::new(&format!(r"\b(posedge|negedge)\s+{}\b", regex::escape(signal))).unwrap();
    re.is_match(source)
}

/// Reset polarity and synchronicity as written in the source, if recognizable.
fn local_reset(source: &str, port: &PortDecl) -> (Option<bool>, bool) {
    let n = regex::escape(&port.name);
    let neg = Regex::new(&format!(r"negedge\s+{n}\b|[!~]\s*{n}\b|\b{n}\s*==\s*(1'b)?0\b")).unwrap();
    let pos = Regex::new(&format!(r"posedge\s+{n}\b|\bif\s*\(\s*{n}\s*\)|\b{n}\s*==\s*(1'b)?1\b")).unwrap();
    let low = match (neg.is_match(source), pos.is_match(source)) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    };
    (low, !edge_on(source, &port.name))
}

/// Reconcile a provider reply with the locally parsed interface. The local parse wins.
pub fn reconcile_spec(orig: &Design, reply: SpecReply) -> (FunctionalSpec, Vec<String>) {
    let mut notes = Vec::new();
    if let Some(m) = &reply.module_name {
        if m != &orig.module_name {
            notes.push(format!("provider named module '{m}', using '{}'", orig.module_name));
        }
    }
    let stated: BTreeSet<(PortDirection, &str, u32)> = reply.ports.iter().map(|(d, n, w)| (*d, n.as_str(), *w)).collect();
    let local: BTreeSet<(PortDirection, &str, u32)> = orig
        .interface
        .iter()
        .map(|p| (p.direction, p.name.as_str(), p.width))
        .collect();
    if stated != local {
        notes.push("port table mismatch: provider ports replaced by the parsed interface".into());
    }
    let clock = orig
        .clock()
        .filter(|c| edge_on(&orig.source, &c.name))
        .map(|c| c.name.clone());
    let class = if clock.is_some() {
        CircuitClass::Sequential
    } else {
        CircuitClass::Combinational
    };
    if reply.class.is_some_and(|c| c != class) {
        notes.push(format!("provider circuit class overridden to {class:?}"));
    }
    if reply.clock.is_some() && reply.clock != clock {
        notes.push("provider clock overridden by the parsed interface".into());
    }
    let reset = orig.reset().map(|r| {
        let (low, synchronous) = local_reset(&orig.source, r);
        ResetSpec {
            name: r.name.clone(),
            active_low: low.or(reply.reset_active_low).unwrap_or_else(|| r.active_low()),
            synchronous,
        }
    });
    let spec = FunctionalSpec {
        module_name: orig.module_name.clone(),
        ports: orig.interface.clone(),
        class,
        clock,
        reset,
        description: reply.description,
        scenarios: reply.scenarios,
    };
    (spec, notes)
}

pub fn extract_spec(
    orig: &Design,
    provider: &dyn Provider,
    templates: &Templates,
    tag: &str,
) -> Result<(FunctionalSpec, Vec<String>), DifftestError> {
    let bundle = PromptBundle {
        system_text: templates.get("system")?.replace("{{module_name}}", &orig.module_name),
        user_text: templates.render("spec_extraction", &[("source", orig.source.trim_end())])?,
        kind: PromptKind::SpecExtraction,
        context_refs: Vec::new(),
    };
    let resp = provider.generate(&GenerationRequest::new(bundle, tag))?;
    let reply = parse_spec_reply(&resp.text)?;
    Ok(reconcile_spec(orig, reply))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub cycle: usize,
    pub port: String,
    /// Lowercase hex without prefix.
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vector {
    pub name: String,
    pub cycles: usize,
    pub assignments: Vec<Assignment>,
}

impl Vector {
    pub fn at(&self, cycle: usize) -> impl Iterator<Item = &Assignment> {
        self.assignments.iter().filter(move |a| a.cycle == cycle)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorSet {
    pub vectors: Vec<Vector>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifftestLimits {
    pub max_vectors: usize,
    pub max_cycles: usize,
    pub clock_period: u32,
    pub max_attempts: u32,
}

impl Default for DifftestLimits {
    fn default() -> Self {
        Self { max_vectors: 24, max_cycles: 16, clock_period: 10, max_attempts: 3 }
    }
}

/// Decimal, `0x`/`0b`/`0o`, or Verilog `[size]'[s]<base><digits>` literals. X and Z digits are rejected.
pub fn parse_literal(text: &str) -> Option<BigUint> {
    let t = text.replace('_', "");
    let t = t.trim();
    let (radix, digits) = if let Some(pos) = t.find('\'') {
        let mut rest = &t[pos + 1..];
        rest = rest.strip_prefix(['s', 'S']).unwrap_or(rest);
        let mut chars = rest.chars();
        let radix = match chars.next()?.to_ascii_lowercase() {
            'h' => 16,
            'd' => 10,
            'b' => 2,
            'o' => 8,
            _ => return None,
        };
        (radix, chars.as_str())
    } else if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        (16, h)
    } else if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        (2, b)
    } else if let Some(o) = t.strip_prefix("0o") {
        (8, o)
    } else {
        (10, t)
    };
    if digits.is_empty() {
        return None;
    }
    BigUint::from_str_radix(digits, radix).ok()
}

/// Parse the vector listing. Bad assignments are dropped; malformed vectors are skipped.
pub fn parse_vectors(text: &str, spec: &FunctionalSpec, limits: &DifftestLimits) -> Result<(VectorSet, Vec<String>), DifftestError> {
    let header = Regex::new(r"^\s*VECTOR\s+(\S+)(?:\s+cycles\s*=\s*(\d+))?\s*$").unwrap();
    let step = Regex::new(r"^\s*(\d+)\s*:(.*)$").unwrap();
    let mut notes = Vec::new();
    let mut out: Vec<Vector> = Vec::new();
    let mut seen_header = false;
    let mut current: Option<(Vector, bool)> = None;
    let finish = |cur: Option<(Vector, bool)>, out: &mut Vec<Vector>, notes: &mut Vec<String>| {
        if let Some((mut v, ok)) = cur {
            if !ok {
                notes.push(format!("vector '{}' skipped: malformed line", v.name));
                return;
            }
            let needed = v.assignments.iter().map(|a| a.cycle + 1).max().unwrap_or(1);
            v.cycles = v.cycles.max(needed).max(1);
            if v.cycles > limits.max_cycles {
                notes.push(format!("vector '{}' clamped to {} cycles", v.name, limits.max_cycles));
                v.cycles = limits.max_cycles;
                v.assignments.retain(|a| a.cycle < limits.max_cycles);
            }
            out.push(v);
        }
    };
    for line in text.lines() {
        let l = line.trim();
        if l.is_empty() || l.starts_with("```") || l.starts_with('#') || l.starts_with("//") {
            continue;
        }
        if let Some(c) = header.captures(l) {
            seen_header = true;
            finish(current.take(), &mut out, &mut notes);
            let cycles = c.get(2).and_then(|m| m.as_str().parse().ok()).unwrap_or(1);
            current = Some((Vector { name: c[1].to_string(), cycles, assignments: Vec::new() }, true));
            continue;
        }
        let Some((v, ok)) = current.as_mut() else { continue };
        let Some(c) = step.captures(l) else {
            *ok = false;
            continue;
        };
        let cycle: usize = c[1].parse().unwrap_or(usize::MAX);
        for tok in c[2].split(|ch: char| ch.is_whitespace() || ch == ',').filter(|t| !t.is_empty()) {
            let Some((port, val)) = tok.split_once('=') else {
                *ok = false;
                continue;
            };
            let Some(p) = spec.stimulus_inputs().find(|p| p.name == port) else {
                notes.push(format!("vector '{}': dropped assignment to non-input or unknown port '{port}'", v.name));
                continue;
            };
            match parse_literal(val) {
                Some(n) if n.bits() <= u64::from(p.width) => {
                    v.assignments.retain(|a| !(a.cycle == cycle && a.port == port));
                    v.assignments.push(Assignment { cycle, port: port.to_string(), value: n.to_str_radix(16) });
                }
                _ => notes.push(format!("vector '{}': dropped invalid value '{val}' for '{port}'", v.name)),
            }
        }
    }
    finish(current.take(), &mut out, &mut notes);
    if !seen_header {
        return Err(DifftestError::VectorParse("no VECTOR headers found".into()));
    }
    if out.is_empty() {
        return Err(DifftestError::NoValidVectors);
    }
    if out.len() > limits.max_vectors {
        notes.push(format!("kept the first {} of {} vectors", limits.max_vectors, out.len()));
        out.truncate(limits.max_vectors);
    }
    for v in &mut out {
        v.assignments.sort_by_key(|a| a.cycle);
    }
    Ok((VectorSet { vectors: out }, notes))
}

pub fn generate_vectors(
    spec: &FunctionalSpec,
    provider: &dyn Provider,
    templates: &Templates,
    limits: &DifftestLimits,
    tag: &str,
) -> Result<(VectorSet, Vec<String>), DifftestError> {
    let inputs: Vec<String> = spec.stimulus_inputs().map(|p| format!("{} ({} bit)", p.name, p.width)).collect();
    let clock_note = spec
        .clock
        .as_ref()
        .map(|c| format!(" or the clock {c}, which the testbench toggles"))
        .unwrap_or_default();
    let user_text = templates.render(
        "vector_generation",
        &[
            ("spec", spec.render().trim_end()),
            ("inputs", &inputs.join(", ")),
            ("clock_note", &clock_note),
            ("max_vectors", &limits.max_vectors.to_string()),
            ("max_cycles", &limits.max_cycles.to_string()),
        ],
    )?;
    let bundle = PromptBundle {
        system_text: templates.get("system")?.replace("{{module_name}}", &spec.module_name),
        user_text,
        kind: PromptKind::VectorGeneration,
        context_refs: Vec::new(),
    };
    let resp = provider.generate(&GenerationRequest::new(bundle, tag))?;
    parse_vectors(&resp.text, spec, limits)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleDiscipline {
    CombinationalSettle,
    ClockedNegedge,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub vector: usize,
    pub index: usize,
    pub values: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenOutputs {
    pub discipline: SampleDiscipline,
    pub records: Vec<GoldenRecord>,
}

impl GoldenOutputs {
    pub fn get(&self, vector: usize, index: usize, port: &str) -> Option<&str> {
        self.records
            .iter()
            .find(|r| r.vector == vector && r.index == index)
            .and_then(|r| r.values.get(port))
            .map(String::as_str)
    }
}

fn range(width: u32) -> String {
    if width > 1 {
        format!(" [{}:0]", width - 1)
    } else {
        String::new()
    }
}

enum Check<'a> {
    Sample,
    Compare(&'a GoldenOutputs),
}

fn assemble(spec: &FunctionalSpec, v: &VectorSet, period: u32, check: Check<'_>) -> Result<String, DifftestError> {
    let half = (period / 2).max(1);
    let mut s = String::new();
    let tb = "poet_tb";
    let _ = writeln!(s, "module {tb};");
    for p in &spec.ports {
        let kind = if p.is_input() { "reg" } else { "wire" };
        let _ = writeln!(s, "  {kind}{} {};", range(p.width), p.name);
    }
    s.push_str("  integer poet_errors;\n");
    let conns: Vec<String> = spec.ports.iter().map(|p| format!(".{0}({0})", p.name)).collect();
    let _ = writeln!(s, "  {} poet_dut ({});", spec.module_name, conns.join(", "));
    if let Some(clk) = &spec.clock {
        let _ = writeln!(s, "  initial {clk} = 1'b0;");
        let _ = writeln!(s, "  always #{half} {clk} = ~{clk};");
    }
    s.push_str("  initial begin\n    poet_errors = 0;\n");
    let reset = spec.reset.as_ref();
    let outputs: Vec<&PortDecl> = spec.outputs().collect();
    for (vi, vec) in v.vectors.iter().enumerate() {
        let _ = writeln!(s, "    // vector {vi}: {}", vec.name);
        for p in spec.stimulus_inputs() {
            let val = match reset {
                Some(r) if r.name == p.name => r.released().to_string(),
                _ => format!("{}'h0", p.width),
            };
            let _ = writeln!(s, "    {} = {val};", p.name);
        }
        if spec.class == CircuitClass::Sequential {
            let clk = spec.clock.as_deref().unwrap_or("clk");
            if let Some(r) = reset {
                let _ = writeln!(s, "    {} = {};", r.name, r.asserted());
                let _ = writeln!(s, "    @(posedge {clk}); @(posedge {clk}); #1;");
                let _ = writeln!(s, "    {} = {};", r.name, r.released());
            } else {
                let _ = writeln!(s, "    @(posedge {clk}); #1;");
            }
        }
        for t in 0..vec.cycles {
            for a in vec.at(t) {
                let w = spec.port(&a.port).map(|p| p.width).unwrap_or(1);
                let _ = writeln!(s, "    {} = {w}'h{};", a.port, a.value);
            }
            match spec.class {
                CircuitClass::Combinational => s.push_str("    #1;\n"),
                CircuitClass::Sequential => {
                    let _ = writeln!(s, "    @(negedge {});", spec.clock.as_deref().unwrap_or("clk"));
                }
            }
            for o in &outputs {
                match check {
                    Check::Sample => {
                        let _ = writeln!(s, "    $display(\"POET_SAMPLE v={vi} t={t} {0}=%h\", {0});", o.name);
                    }
                    Check::Compare(g) => {
                        let exp = g.get(vi, t, &o.name).ok_or_else(|| DifftestError::GoldenCoverageGap {
                            vector: vi,
                            index: t,
                            port: o.name.clone(),
                        })?;
                        let _ = writeln!(
                            s,
                            "    if ({0} !== {1}'h{exp}) begin poet_errors = poet_errors + 1; $display(\"POET_MISMATCH v={vi} t={t} {0} expected={exp} got=%h\", {0}); end",
                            o.name, o.width
                        );
                    }
                }
            }
            if spec.class == CircuitClass::Sequential && t + 1 < vec.cycles {
                let _ = writeln!(s, "    @(posedge {}); #1;", spec.clock.as_deref().unwrap_or("clk"));
            }
        }
    }
    if matches!(check, Check::Compare(_)) {
        s.push_str("    if (poet_errors == 0) $display(\"POET_RESULT: PASS\");\n");
        s.push_str("    else $display(\"POET_RESULT: FAIL errors=%0d\", poet_errors);\n");
    }
    s.push_str("    $finish;\n  end\nendmodule\n");
    Ok(s)
}

pub fn assemble_stimulus_tb(spec: &FunctionalSpec, v: &VectorSet, clock_period: u32) -> String {
    assemble(spec, v, clock_period, Check::Sample).expect("sampling never needs goldens")
}

pub fn assemble_checking_tb(spec: &FunctionalSpec, v: &VectorSet, o: &GoldenOutputs, clock_period: u32) -> Result<String, DifftestError> {
    assemble(spec, v, clock_period, Check::Compare(o))
}

pub fn discipline(spec: &FunctionalSpec) -> SampleDiscipline {
    match spec.class {
        CircuitClass::Combinational => SampleDiscipline::CombinationalSettle,
        CircuitClass::Sequential => SampleDiscipline::ClockedNegedge,
    }
}

/// Simulate the original under the stimulus testbench and record every sampled output.
pub fn capture_golden(
    orig: &Design,
    spec: &FunctionalSpec,
    stimulus: &str,
    sim: &dyn SimDriver,
    workdir: &Path,
) -> Result<GoldenOutputs, DifftestError> {
    let r = sim.run_sim(&orig.source, stimulus, workdir)?;
    if !r.compiled {
        return Err(DifftestError::SimCompile(r.stderr.trim().to_string()));
    }
    if !r.ran {
        return Err(DifftestError::SimRuntime(r.error_log().trim().to_string()));
    }
    let mut records: BTreeMap<(usize, usize), BTreeMap<String, String>> = BTreeMap::new();
    for smp in parse_sim_output(&r.stdout).samples {
        if smp.value.is_empty() || !smp.value.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(DifftestError::UnknownValueInGolden {
                vector: smp.vector,
                index: smp.index,
                port: smp.port,
                value: smp.value,
            });
        }
        records
            .entry((smp.vector, smp.index))
            .or_default()
            .insert(smp.port, smp.value.to_ascii_lowercase());
    }
    Ok(GoldenOutputs {
        discipline: discipline(spec),
        records: records
            .into_iter()
            .map(|((vector, index), values)| GoldenRecord { vector, index, values })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Testbench {
    pub spec: FunctionalSpec,
    pub vectors: VectorSet,
    pub golden: GoldenOutputs,
    pub stimulus_source: String,
    pub checking_source: String,
    pub validated: bool,
    pub attempts: u32,
}

/// One pipeline step, reported as it happens.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TbStep {
    pub attempt: u32,
    pub step: &'static str,
    pub ok: bool,
    pub detail: String,
}

pub struct TestbenchJob<'a> {
    pub orig: &'a Design,
    pub provider: &'a dyn Provider,
    pub sim: &'a dyn SimDriver,
    pub templates: &'a Templates,
    pub limits: DifftestLimits,
    /// Simulation scratch space; each attempt gets its own subdirectory.
    pub workdir: &'a Path,
}

/// Spec → vectors → stimulus → goldens → checking bench → validation, retrying with fresh vectors.
pub fn generate_testbench(job: &TestbenchJob<'_>, on_step: &mut dyn FnMut(&TbStep)) -> Result<Testbench, DifftestError> {
    let mut spec: Option<FunctionalSpec> = None;
    let mut last = DifftestError::NoValidVectors;
    let attempts = job.limits.max_attempts.max(1);
    for attempt in 1..=attempts {
        let mut report = |step: &'static str, res: Result<String, &DifftestError>| {
            let (ok, detail) = match res {
                Ok(d) => (true, d),
                Err(e) => (false, e.to_string()),
            };
            on_step(&TbStep { attempt, step, ok, detail });
        };
        let result = (|| {
            if spec.is_none() {
                let (s, notes) = extract_spec(job.orig, job.provider, job.templates, "testbench/spec")
                    .inspect_err(|e| report("spec", Err(e)))?;
                report("spec", Ok(notes.join("; ")));
                spec = Some(s);
            }
            let spec = spec.as_ref().unwrap();
            let tag = format!("testbench/vectors/{attempt}");
            let (vectors, notes) = generate_vectors(spec, job.provider, job.templates, &job.limits, &tag)
                .inspect_err(|e| report("vectors", Err(e)))?;
            report("vectors", Ok(format!("{} vector(s){}", vectors.vectors.len(), join_notes(&notes))));
            let stimulus = assemble_stimulus_tb(spec, &vectors, job.limits.clock_period);
            let dir = job.workdir.join(format!("attempt_{attempt}"));
            let golden = capture_golden(job.orig, spec, &stimulus, job.sim, &dir.join("golden"))
                .inspect_err(|e| report("golden", Err(e)))?;
            report("golden", Ok(format!("{} sample point(s)", golden.records.len())));
            let checking = assemble_checking_tb(spec, &vectors, &golden, job.limits.clock_period)
                .inspect_err(|e| report("assemble", Err(e)))?;
            let r = job.sim.run_sim(&job.orig.source, &checking, &dir.join("validate"))?;
            if r.verdict != Verdict::Pass {
                let e = DifftestError::ValidationFailed(r.error_log().trim().to_string());
                report("validate", Err(&e));
                return Err(e);
            }
            report("validate", Ok("PASS".into()));
            Ok(Testbench {
                spec: spec.clone(),
                vectors,
                golden,
                stimulus_source: stimulus,
                checking_source: checking,
                validated: true,
                attempts: attempt,
            })
        })();
        match result {
            Ok(tb) => return Ok(tb),
            Err(DifftestError::Provider(e)) if e.is_exhaustion() => {
                last = DifftestError::Provider(e);
                break;
            }
            Err(e) => last = e,
        }
    }
    Err(DifftestError::TestbenchGenerationFailed { attempts, last: Box::new(last) })
}

fn join_notes(notes: &[String]) -> String {
    if notes.is_empty() {
        String::new()
    } else {
        format!("; {}", notes.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{Fixture, ScriptedProvider};
    use crate::tooling::BuiltinSim;

    const HA: &str = "module half_adder(input a, input b, output sum, output carry);\n  assign sum = a ^ b;\n  assign carry = a & b;\nendmodule\n";
    const HA_SPEC: &str = "MODULE: half_adder\nCLASS: combinational\nCLOCK: none\nRESET: none\nPORTS:\n- input a 1\n- input b 1\n- output sum 1\n- output carry 1\nDESCRIPTION:\nAdds two bits.\nSCENARIOS:\n- all combinations\n";
    const HA_VEC: &str = "VECTOR zero\n0: a=0 b=0\nVECTOR a_only\n0: a=1 b=0\nVECTOR b_only\n0: a=0 b=1\nVECTOR both\n0: a=1 b=1\n";

    fn ha_spec() -> FunctionalSpec {
        let d = Design::new(HA, "half_adder").unwrap();
        reconcile_spec(&d, parse_spec_reply(HA_SPEC).unwrap()).0
    }

    #[test]
    fn literals() {
        assert_eq!(parse_literal("8'hff").unwrap(), BigUint::from(255u32));
        assert_eq!(parse_literal("0b101").unwrap(), BigUint::from(5u32));
        assert_eq!(parse_literal("'d12").unwrap(), BigUint::from(12u32));
        assert_eq!(parse_literal("1_000").unwrap(), BigUint::from(1000u32));
        assert!(parse_literal("4'bx01").is_none());
        assert!(parse_literal("-3").is_none());
    }

    #[test]
    fn spec_parsing() {
        let s = ha_spec();
        assert_eq!(s.class, CircuitClass::Combinational);
        assert!(s.clock.is_none());
        assert!(matches!(parse_spec_reply("It adds bits."), Err(DifftestError::SpecParse(_))));
        let seq = Design::new(
            "module r(input clk, input rst_n, input [7:0] d, output reg [7:0] q);\n always @(posedge clk or negedge rst_n) if (!rst_n) q <= 0; else q <= d;\nendmodule",
            "r",
        )
        .unwrap();
        let (s, notes) = reconcile_spec(&seq, parse_spec_reply("MODULE: r\nCLASS: combinational\nPORTS:\n- input d 8\n").unwrap());
        assert_eq!(s.class, CircuitClass::Sequential);
        assert_eq!(s.clock.as_deref(), Some("clk"));
        let r = s.reset.unwrap();
        assert!(r.active_low && !r.synchronous);
        assert_eq!(notes.len(), 2);
    }

    #[test]
    fn vector_filtering() {
        let s = ha_spec();
        let lim = DifftestLimits::default();
        let (v, notes) = parse_vectors("VECTOR x cycles=2\n0: a=1 sum=1 nope=0\n1: b=2 b=1\n", &s, &lim).unwrap();
        assert_eq!(v.vectors[0].cycles, 2);
        assert_eq!(v.vectors[0].assignments.len(), 2);
        assert_eq!(notes.len(), 3);
        assert_eq!(parse_vectors("VECTOR x\nrubbish\n", &s, &lim), Err(DifftestError::NoValidVectors));
        assert!(matches!(parse_vectors("nothing here", &s, &lim), Err(DifftestError::VectorParse(_))));
        let many: String = (0..30).map(|i| format!("VECTOR v{i} cycles=40\n0: a=1\n")).collect();
        let (v, _) = parse_vectors(&many, &s, &lim).unwrap();
        assert_eq!(v.vectors.len(), 24);
        assert_eq!(v.vectors[0].cycles, 16);
    }

    #[test]
    fn half_adder_goldens_and_mutant() {
        let dir = tempfile::tempdir().unwrap();
        let s = ha_spec();
        let lim = DifftestLimits::default();
        let (v, _) = parse_vectors(HA_VEC, &s, &lim).unwrap();
        let stim = assemble_stimulus_tb(&s, &v, 10);
        assert_eq!(stim.matches("POET_SAMPLE").count(), 8);
        let d = Design::new(HA, "half_adder").unwrap();
        let g = capture_golden(&d, &s, &stim, &BuiltinSim::default(), dir.path()).unwrap();
        let sums: Vec<&str> = (0..4).map(|i| g.get(i, 0, "sum").unwrap()).collect();
        let carries: Vec<&str> = (0..4).map(|i| g.get(i, 0, "carry").unwrap()).collect();
        assert_eq!(sums, ["0", "1", "1", "0"]);
        assert_eq!(carries, ["0", "0", "0", "1"]);
        let chk = assemble_checking_tb(&s, &v, &g, 10).unwrap();
        let r = BuiltinSim::default().run_sim(HA, &chk, &dir.path().join("c")).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let mutant = HA.replace("a ^ b", "a & b");
        let r = BuiltinSim::default().run_sim(&mutant, &chk, &dir.path().join("m")).unwrap();
        let oracle = (0..4u8).filter(|i| (i >> 1) ^ (i & 1) != (i >> 1) & (i & 1)).count() as u32;
        assert_eq!(r.verdict, Verdict::Fail(oracle));
        assert_eq!(r.mismatches.len(), oracle as usize);
        let mut gap = g.clone();
        gap.records.pop();
        assert!(matches!(assemble_checking_tb(&s, &v, &gap, 10), Err(DifftestError::GoldenCoverageGap { .. })));
    }

    #[test]
    fn registered_passthrough_latency() {
        let dir = tempfile::tempdir().unwrap();
        let src = "module reg8(input clk, input rst, input [7:0] d, output reg [7:0] q);\n  always @(posedge clk) if (rst) q <= 8'd0; else q <= d;\nendmodule\n";
        let d = Design::new(src, "reg8").unwrap();
        let (s, _) = reconcile_spec(&d, parse_spec_reply("MODULE: reg8\nCLASS: sequential\nPORTS:\n").unwrap());
        let (v, _) = parse_vectors("VECTOR p cycles=3\n1: d=0xab\n2: d=0\n", &s, &DifftestLimits::default()).unwrap();
        let stim = assemble_stimulus_tb(&s, &v, 10);
        assert!(stim.contains("always #5 clk = ~clk;"));
        assert!(stim.contains("rst = 1'b1;"));
        let g = capture_golden(&d, &s, &stim, &BuiltinSim::default(), dir.path()).unwrap();
        assert_eq!(g.get(0, 1, "q"), Some("00"));
        assert_eq!(g.get(0, 2, "q"), Some("ab"));
        assert_eq!(g.discipline, SampleDiscipline::ClockedNegedge);
    }

    #[test]
    fn unknown_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let src = "module u(input clk, input [3:0] d, output reg [3:0] q);\n  always @(posedge clk) if (d != 0) q <= d;\nendmodule\n";
        let d = Design::new(src, "u").unwrap();
        let (s, _) = reconcile_spec(&d, parse_spec_reply("MODULE: u\nCLASS: sequential\nPORTS:\n").unwrap());
        let (v, _) = parse_vectors("VECTOR p\n0: d=0\n", &s, &DifftestLimits::default()).unwrap();
        let stim = assemble_stimulus_tb(&s, &v, 10);
        assert!(matches!(
            capture_golden(&d, &s, &stim, &BuiltinSim::default(), dir.path()),
            Err(DifftestError::UnknownValueInGolden { .. })
        ));
    }

    #[test]
    fn pipeline_retries_bad_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let d = Design::new(HA, "half_adder").unwrap();
        let provider = ScriptedProvider::new(vec![
            Fixture::untagged(HA_SPEC),
            Fixture::untagged("I cannot do that."),
            Fixture::untagged(HA_VEC),
        ]);
        let t = Templates::builtin();
        let job = TestbenchJob {
            orig: &d,
            provider: &provider,
            sim: &BuiltinSim::default(),
            templates: &t,
            limits: DifftestLimits::default(),
            workdir: dir.path(),
        };
        let mut steps = Vec::new();
        let tb = generate_testbench(&job, &mut |s| steps.push(s.clone())).unwrap();
        assert!(tb.validated);
        assert_eq!(tb.attempts, 2);
        assert!(!steps[1].ok);
        let again = ScriptedProvider::new(vec![Fixture::untagged(HA_SPEC), Fixture::untagged(HA_VEC)]);
        let tb2 = generate_testbench(&TestbenchJob { provider: &again, ..job }, &mut |_| {}).unwrap();
        assert_eq!(tb2.checking_source, tb.checking_source);
    }
}
