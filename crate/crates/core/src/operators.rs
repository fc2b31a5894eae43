// SPDX-License-Identifier: Apache-2.0

//! Prompt construction for seeding, evolution and repair, and RTL extraction from replies.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::interface::{PortDecl, PortDirection};
use crate::model::{approx_eq, Design, Individual, Metric, MetricDelta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorId {
    Improve,
    Refactor,
    Explore,
    Simplify,
    Fusion,
    Crossover,
}

impl OperatorId {
    pub const ALL: [OperatorId; 6] = [
        OperatorId::Improve,
        OperatorId::Refactor,
        OperatorId::Explore,
        OperatorId::Simplify,
        OperatorId::Fusion,
        OperatorId::Crossover,
    ];

    pub fn arity(self) -> usize {
        if self == OperatorId::Crossover {
            2
        } else {
            1
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorId::Improve => "improve",
            OperatorId::Refactor => "refactor",
            OperatorId::Explore => "explore",
            OperatorId::Simplify => "simplify",
            OperatorId::Fusion => "fusion",
            OperatorId::Crossover => "crossover",
        }
    }

    fn template(self) -> String {
        format!("op_{}", self.name())
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown operator '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    PowerFocused,
    AreaFocused,
    TimingFocused,
    Balanced,
    ArchitecturalExploration,
    Simplification,
}

impl InitStrategy {
    pub const ALL: [InitStrategy; 6] = [
        InitStrategy::PowerFocused,
        InitStrategy::AreaFocused,
        InitStrategy::TimingFocused,
        InitStrategy::Balanced,
        InitStrategy::ArchitecturalExploration,
        InitStrategy::Simplification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitStrategy::PowerFocused => "power_focused",
            InitStrategy::AreaFocused => "area_focused",
            InitStrategy::TimingFocused => "timing_focused",
            InitStrategy::Balanced => "balanced",
            InitStrategy::ArchitecturalExploration => "architectural_exploration",
            InitStrategy::Simplification => "simplification",
        }
    }

    /// Round-robin assignment for seed slot `slot` (0-based).
    pub fn for_slot(slot: usize) -> Self {
        Self::ALL[slot % Self::ALL.len()]
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "which", rename_all = "snake_case")]
pub enum PromptKind {
    Init(InitStrategy),
    Operator(OperatorId),
    Repair,
    SpecExtraction,
    VectorGeneration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub kind: PromptKind,
    pub context_refs: Vec<String>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum OperatorError {
    #[error("operator {0} takes {1} parent(s)")]
    WrongArity(OperatorId, usize),
    #[error("crossover parents must differ (both are {0})")]
    IdenticalParents(String),
    #[error("repair needs a non-empty error log")]
    EmptyErrorLog,
    #[error("template '{0}' is missing")]
    MissingTemplate(String),
    #[error("template '{template}' leaves placeholder '{{{{{name}}}}}' unfilled")]
    UnfilledPlaceholder { template: String, name: String },
    #[error("no module found in response")]
    NoModuleFound,
    #[error("response defines module '{found}' instead of '{expected}'")]
    WrongModuleName { expected: String, found: String },
}

pub const TEMPLATE_NAMES: [&str; 20] = [
    "system",
    "common_interface",
    "init_power_focused",
    "init_area_focused",
    "init_timing_focused",
    "init_balanced",
    "init_architectural_exploration",
    "init_simplification",
    "op_improve",
    "op_refactor",
    "op_explore",
    "op_simplify",
    "op_fusion",
    "op_crossover",
    "repair",
    "spec_extraction",
    "vector_generation",
    "techniques_power",
    "techniques_area",
    "techniques_delay",
];

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        [$(($name, include_str!(concat!("../assets/templates/", $name, ".txt")))),*]
    };
}

const BUILTIN: [(&str, &str); 20] = builtin!(
    "system",
    "common_interface",
    "init_power_focused",
    "init_area_focused",
    "init_timing_focused",
    "init_balanced",
    "init_architectural_exploration",
    "init_simplification",
    "op_improve",
    "op_refactor",
    "op_explore",
    "op_simplify",
    "op_fusion",
    "op_crossover",
    "repair",
    "spec_extraction",
    "vector_generation",
    "techniques_power",
    "techniques_area",
    "techniques_delay",
);

pub const REPAIR_LOG_LIMIT: usize = 4000;

/// Named prompt templates with `{{placeholder}}` markers.
#[derive(Clone, Debug, PartialEq)]
pub struct Templates {
    texts: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Self {
            texts: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Built-ins overridden by any `<name>.txt` present in `dir`.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::builtin();
        for name in TEMPLATE_NAMES {
            let p = dir.join(format!("{name}.txt"));
            if p.is_file() {
                t.texts.insert(name.to_string(), std::fs::read_to_string(p)?);
            }
        }
        Ok(t)
    }

    pub fn get(&self, name: &str) -> Result<&str, OperatorError> {
        self.texts
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| OperatorError::MissingTemplate(name.to_string()))
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, OperatorError> {
        let mut out = self.get(name)?.to_string();
        for (k, v) in vars {
            out = out.replace(&format!("{{{{{k}}}}}"), v);
        }
        if let Some(start) = out.find("{{") {
            if let Some(len) = out[start..].find("}}") {
                let name_found = &out[start + 2..start + len];
                if !name_found.is_empty() && name_found.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(OperatorError::UnfilledPlaceholder {
                        template: name.to_string(),
                        name: name_found.to_string(),
                    });
                }
            }
        }
        Ok(out)
    }

    fn system(&self, module: &str) -> Result<String, OperatorError> {
        self.render("system", &[("module_name", module)])
    }

    fn interface_block(&self, d: &Design) -> Result<String, OperatorError> {
        let ports = render_ports(&d.module_name, &d.interface);
        Ok(self.render("common_interface", &[("interface", &ports)])?.trim_end().to_string())
    }

    fn techniques(&self, m: Metric) -> Result<String, OperatorError> {
        Ok(self.get(&format!("techniques_{}", m.name()))?.trim_end().to_string())
    }
}

/// `module name (` followed by one port per line.
pub fn render_ports(module: &str, ports: &[PortDecl]) -> String {
    let mut s = format!("module {module} (\n");
    for (i, p) in ports.iter().enumerate() {
        let dir = match p.direction {
            PortDirection::Input => "input",
            PortDirection::Output => "output",
            PortDirection::Inout => "inout",
        };
        let range = if p.width > 1 {
            format!(" [{}:0]", p.width - 1)
        } else {
            String::new()
        };
        let sep = if i + 1 < ports.len() { "," } else { "" };
        s.push_str(&format!("  {dir}{range} {}{sep}\n", p.name));
    }
    s.push_str(");");
    s
}

pub fn build_init_prompt(t: &Templates, orig: &Design, strategy: InitStrategy) -> Result<PromptBundle, OperatorError> {
    let iface = t.interface_block(orig)?;
    let power = t.techniques(Metric::Power)?;
    let area = t.techniques(Metric::Area)?;
    let delay = t.techniques(Metric::Delay)?;
    let user_text = t.render(
        &format!("init_{}", strategy.name()),
        &[
            ("source", orig.source.trim_end()),
            ("interface_block", &iface),
            ("techniques_power", &power),
            ("techniques_area", &area),
            ("techniques_delay", &delay),
        ],
    )?;
    Ok(PromptBundle {
        system_text: t.system(&orig.module_name)?,
        user_text,
        kind: PromptKind::Init(strategy),
        context_refs: Vec::new(),
    })
}

pub fn build_mutation_prompt(
    t: &Templates,
    op: OperatorId,
    parent: &Individual,
    delta: &MetricDelta,
    weakest: Metric,
) -> Result<PromptBundle, OperatorError> {
    if op.arity() != 1 {
        return Err(OperatorError::WrongArity(op, op.arity()));
    }
    let d = &parent.design;
    let mut ordered = String::new();
    let order = std::iter::once(weakest).chain(Metric::ALL.into_iter().filter(|m| *m != weakest));
    for m in order {
        ordered.push_str(&format!("{} ({}):\n{}\n", m.name(), signed_pct_of(delta, m), t.techniques(m)?));
    }
    let user_text = t.render(
        &op.template(),
        &[
            ("source", d.source.trim_end()),
            ("interface_block", &t.interface_block(d)?),
            ("delta", &delta.to_string()),
            ("weakest", weakest.name()),
            ("techniques_ordered", ordered.trim_end()),
        ],
    )?;
    Ok(PromptBundle {
        system_text: t.system(&d.module_name)?,
        user_text,
        kind: PromptKind::Operator(op),
        context_refs: vec![parent.id.clone()],
    })
}

fn signed_pct_of(d: &MetricDelta, m: Metric) -> String {
    crate::model::signed_pct(d.get(m))
}

/// Which parent (0 or 1) is superior on `metric`; ties fall through the other metrics, then to the first parent.
pub fn superior_parent(a: &Individual, b: &Individual, metric: Metric) -> usize {
    let chain = std::iter::once(metric).chain(Metric::ALL.into_iter().filter(|m| *m != metric));
    for m in chain {
        let (x, y) = (m.of(&a.metrics), m.of(&b.metrics));
        if !approx_eq(x, y) {
            return usize::from(y < x);
        }
    }
    0
}

pub fn build_crossover_prompt(
    t: &Templates,
    p1: &Individual,
    p2: &Individual,
    d1: &MetricDelta,
    d2: &MetricDelta,
) -> Result<PromptBundle, OperatorError> {
    if p1.id == p2.id {
        return Err(OperatorError::IdenticalParents(p1.id.clone()));
    }
    let parents = [p1, p2];
    let mut plan = String::new();
    for m in Metric::ALL {
        let k = superior_parent(p1, p2, m);
        plan.push_str(&format!(
            "- {} techniques: inherit from Parent {} ({}), which has the lower {}\n",
            m.name(),
            k + 1,
            parents[k].id,
            m.name()
        ));
    }
    let user_text = t.render(
        "op_crossover",
        &[
            ("parent1_id", &p1.id),
            ("parent2_id", &p2.id),
            ("delta1", &d1.to_string()),
            ("delta2", &d2.to_string()),
            ("inheritance", plan.trim_end()),
            ("interface_block", &t.interface_block(&p1.design)?),
            ("source1", p1.design.source.trim_end()),
            ("source2", p2.design.source.trim_end()),
        ],
    )?;
    Ok(PromptBundle {
        system_text: t.system(&p1.design.module_name)?,
        user_text,
        kind: PromptKind::Operator(OperatorId::Crossover),
        context_refs: vec![p1.id.clone(), p2.id.clone()],
    })
}

/// Last `REPAIR_LOG_LIMIT` characters, on a char boundary.
pub fn truncate_log(log: &str) -> &str {
    let n = log.chars().count();
    if n <= REPAIR_LOG_LIMIT {
        return log;
    }
    let skip = log.char_indices().nth(n - REPAIR_LOG_LIMIT).map(|(i, _)| i).unwrap_or(0);
    &log[skip..]
}

pub fn build_repair_prompt(
    t: &Templates,
    candidate: &Design,
    error_log: &str,
    refs: Vec<String>,
) -> Result<PromptBundle, OperatorError> {
    if error_log.trim().is_empty() {
        return Err(OperatorError::EmptyErrorLog);
    }
    let user_text = t.render(
        "repair",
        &[
            ("error_log", truncate_log(error_log).trim_end()),
            ("interface_block", &t.interface_block(candidate)?),
            ("source", candidate.source.trim_end()),
        ],
    )?;
    Ok(PromptBundle {
        system_text: t.system(&candidate.module_name)?,
        user_text,
        kind: PromptKind::Repair,
        context_refs: refs,
    })
}

fn module_re() -> Regex {
    Regex::new(r"\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)").unwrap()
}

fn defines(text: &str, name: &str) -> bool {
    module_re().captures_iter(text).any(|c| &c[1] == name)
}

/// Pull the design out of a free-form reply.
pub fn extract_rtl(response: &str, expected_module: &str) -> Result<String, OperatorError> {
    let fence = Regex::new(r"(?s)```[^\n`]*\n(.*?)```").unwrap();
    let mut first_other = None;
    for c in fence.captures_iter(response) {
        let body = c.get(1).unwrap().as_str();
        if defines(body, expected_module) {
            return Ok(body.trim().to_string());
        }
        if first_other.is_none() {
            first_other = module_re().captures(body).map(|m| m[1].to_string());
        }
    }
    if let Some(found) = first_other {
        return Err(OperatorError::WrongModuleName {
            expected: expected_module.to_string(),
            found,
        });
    }
    let start = module_re().find(response).ok_or(OperatorError::NoModuleFound)?.start();
    let end_re = Regex::new(r"\bendmodule\b").unwrap();
    let end = end_re
        .find_iter(&response[start..])
        .last()
        .ok_or(OperatorError::NoModuleFound)?
        .end();
    let span = response[start..start + end].trim();
    if defines(span, expected_module) {
        Ok(span.to_string())
    } else {
        Err(OperatorError::WrongModuleName {
            expected: expected_module.to_string(),
            found: module_re().captures(span).unwrap()[1].to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PpaMetrics;

    const HA: &str = "module half_adder(input a, input b, output sum, output carry);\n  assign sum = a ^ b;\n  assign carry = a & b;\nendmodule";

    fn ind(id: &str, p: f64, a: f64, d: f64) -> Individual {
        Individual {
            id: id.into(),
            design: Design::new(HA, "half_adder").unwrap(),
            metrics: PpaMetrics::new(p, a, d).unwrap(),
            born_generation: 0,
        }
    }

    #[test]
    fn builtins_are_complete() {
        let t = Templates::builtin();
        for n in TEMPLATE_NAMES {
            assert!(!t.get(n).unwrap().trim().is_empty(), "{n}");
        }
    }

    #[test]
    fn init_prompts_differ() {
        let t = Templates::builtin();
        let d = Design::new(HA, "half_adder").unwrap();
        let texts: Vec<String> = InitStrategy::ALL
            .iter()
            .map(|s| build_init_prompt(&t, &d, *s).unwrap().user_text)
            .collect();
        for (i, a) in texts.iter().enumerate() {
            assert!(a.contains("assign sum = a ^ b;"));
            for b in &texts[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert!(texts[0].contains("clock gating") && texts[0].contains("operand isolation"));
        let bal = &texts[3];
        assert!(bal.contains("power") && bal.contains("area") && bal.contains("delay"));
        assert!(texts[0].contains("output carry"));
    }

    #[test]
    fn improve_leads_with_weakest() {
        let t = Templates::builtin();
        let delta = MetricDelta { d_power: 5.0, d_area: -2.0, d_delay: -1.0 };
        assert_eq!(delta.weakest(), Metric::Power);
        let b = build_mutation_prompt(&t, OperatorId::Improve, &ind("p", 1.0, 1.0, 1.0), &delta, delta.weakest()).unwrap();
        let body = b.user_text;
        let p = body.find("power (+5.0%)").unwrap();
        assert!(p < body.find("area (").unwrap() && p < body.find("delay (").unwrap());
        assert!(body.contains("power +5.0% vs original, area \u{2212}2.0% vs original, delay \u{2212}1.0% vs original"));
        assert_eq!(b.context_refs, vec!["p".to_string()]);
    }

    #[test]
    fn operator_guidance() {
        let t = Templates::builtin();
        let p = ind("p", 1.0, 1.0, 1.0);
        let s = build_mutation_prompt(&t, OperatorId::Simplify, &p, &MetricDelta::ZERO, Metric::Power).unwrap();
        assert!(s.user_text.contains("redundancy elimination"));
        let f = build_mutation_prompt(&t, OperatorId::Fusion, &p, &MetricDelta::ZERO, Metric::Power).unwrap();
        assert!(f.user_text.contains("Conflicting combinations"));
        assert!(f.user_text.contains("clock gating combined with resource sharing"));
        assert_eq!(
            build_mutation_prompt(&t, OperatorId::Crossover, &p, &MetricDelta::ZERO, Metric::Power),
            Err(OperatorError::WrongArity(OperatorId::Crossover, 2))
        );
    }

    #[test]
    fn crossover_assignments() {
        let t = Templates::builtin();
        let z = MetricDelta::ZERO;
        let a = ind("a", 1.0, 5.0, 1.0);
        let b = ind("b", 2.0, 3.0, 1.0);
        let txt = build_crossover_prompt(&t, &a, &b, &z, &z).unwrap().user_text;
        assert!(txt.contains("power techniques: inherit from Parent 1 (a)"));
        assert!(txt.contains("area techniques: inherit from Parent 2 (b)"));
        let tie = ind("c", 1.0, 2.0, 9.0);
        assert_eq!(superior_parent(&a, &tie, Metric::Power), 1);
        let best = ind("d", 0.5, 0.5, 0.5);
        for m in Metric::ALL {
            assert_eq!(superior_parent(&best, &a, m), 0);
        }
        assert_eq!(
            build_crossover_prompt(&t, &a, &a, &z, &z),
            Err(OperatorError::IdenticalParents("a".into()))
        );
    }

    #[test]
    fn repair_truncates() {
        let t = Templates::builtin();
        let d = Design::new(HA, "half_adder").unwrap();
        let log = format!("{}TAIL-MARKER", "x".repeat(10_000));
        let b = build_repair_prompt(&t, &d, &log, vec![]).unwrap();
        assert!(b.user_text.contains("TAIL-MARKER"));
        assert!(!b.user_text.contains(&"x".repeat(4000)));
        assert_eq!(build_repair_prompt(&t, &d, "  ", vec![]), Err(OperatorError::EmptyErrorLog));
    }

    #[test]
    fn extraction() {
        let fenced = format!("Here you go:\n```verilog\n{HA}\n```\nDone.");
        assert_eq!(extract_rtl(&fenced, "half_adder").unwrap(), HA);
        let prose = format!("Sure. {HA} Hope it helps.");
        assert_eq!(extract_rtl(&prose, "half_adder").unwrap(), HA);
        assert_eq!(
            extract_rtl(&fenced.replace("half_adder", "ha2"), "half_adder"),
            Err(OperatorError::WrongModuleName { expected: "half_adder".into(), found: "ha2".into() })
        );
        assert_eq!(extract_rtl("no code", "x"), Err(OperatorError::NoModuleFound));
    }

    #[test]
    fn unfilled_placeholder_is_reported() {
        let t = Templates::builtin();
        assert!(matches!(t.render("repair", &[]), Err(OperatorError::UnfilledPlaceholder { .. })));
    }
}
