// SPDX-License-Identifier: Apache-2.0

//! Shared domain types: metrics, designs, individuals and dominance.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::interface::{self, PortDecl};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("metric {name} must be finite and > 0, got {value}")]
    InvalidMetric { name: &'static str, value: f64 },
    #[error("original metric {0} is zero or negative")]
    OriginalMetricZero(&'static str),
    #[error("design source is empty")]
    EmptySource,
    #[error("module '{0}' not found in source")]
    ModuleNotFound(String),
    #[error("port '{0}' has zero width")]
    ZeroWidthPort(String),
    #[error("interface: {0}")]
    Interface(String),
}

/// Relative equality used for every metric comparison.
pub fn approx_eq(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-9 * 1f64.max(x.abs()).max(y.abs())
}

/// `x < y` beyond the equality tolerance.
pub fn strictly_less(x: f64, y: f64) -> bool {
    x < y && !approx_eq(x, y)
}

/// Power (µW), area (µm²) and critical-path delay (ns).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpaMetrics {
    pub power: f64,
    pub area: f64,
    pub delay: f64,
}

impl PpaMetrics {
    pub fn new(power: f64, area: f64, delay: f64) -> Result<Self, ModelError> {
        let m = Self { power, area, delay };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.named() {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::InvalidMetric { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 3] {
        [("power", self.power), ("area", self.area), ("delay", self.delay)]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.power, self.area, self.delay]
    }
}

impl fmt::Display for PpaMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "power={:.4}uW area={:.4}um2 delay={:.4}ns", self.power, self.area, self.delay)
    }
}

/// True iff `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &PpaMetrics, b: &PpaMetrics) -> bool {
    let mut better = false;
    for (x, y) in a.as_array().into_iter().zip(b.as_array()) {
        if approx_eq(x, y) {
            continue;
        }
        if x > y {
            return false;
        }
        better = true;
    }
    better
}

/// Signed percent change of each metric against the original.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub d_power: f64,
    pub d_area: f64,
    pub d_delay: f64,
}

impl MetricDelta {
    pub const ZERO: Self = Self {
        d_power: 0.0,
        d_area: 0.0,
        d_delay: 0.0,
    };

    /// Metric with the largest delta (least improvement); ties favour power, then area.
    pub fn weakest(&self) -> Metric {
        let mut best = (Metric::Power, self.d_power);
        for (m, v) in [(Metric::Area, self.d_area), (Metric::Delay, self.d_delay)] {
            if v > best.1 && !approx_eq(v, best.1) {
                best = (m, v);
            }
        }
        best.0
    }

    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Power => self.d_power,
            Metric::Area => self.d_area,
            Metric::Delay => self.d_delay,
        }
    }
}

impl fmt::Display for MetricDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "power {} vs original, area {} vs original, delay {} vs original",
            signed_pct(self.d_power),
            signed_pct(self.d_area),
            signed_pct(self.d_delay)
        )
    }
}

/// `-50.4%`, `+5.0%`, `+0.0%`.
pub fn signed_pct(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    if v < 0.0 {
        format!("\u{2212}{:.1}%", -v)
    } else {
        format!("+{v:.1}%")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Power,
    Area,
    Delay,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Power, Metric::Area, Metric::Delay];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Power => "power",
            Metric::Area => "area",
            Metric::Delay => "delay",
        }
    }

    pub fn of(self, m: &PpaMetrics) -> f64 {
        match self {
            Metric::Power => m.power,
            Metric::Area => m.area,
            Metric::Delay => m.delay,
        }
    }
}

pub fn metric_delta(m: &PpaMetrics, orig: &PpaMetrics) -> Result<MetricDelta, ModelError> {
    for (name, v) in orig.named() {
        if v <= 0.0 || !v.is_finite() {
            return Err(ModelError::OriginalMetricZero(name));
        }
    }
    let pct = |x: f64, o: f64| if x == o { 0.0 } else { 100.0 * (x - o) / o };
    Ok(MetricDelta {
        d_power: pct(m.power, orig.power),
        d_area: pct(m.area, orig.area),
        d_delay: pct(m.delay, orig.delay),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub parents: Vec<String>,
    pub operator: String,
    pub generation: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub module_name: String,
    pub source: String,
    pub interface: Vec<PortDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<Lineage>,
}

impl Design {
    /// Parse the interface of `module_name` from `source`.
    pub fn new(source: impl Into<String>, module_name: &str) -> Result<Self, ModelError> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(ModelError::EmptySource);
        }
        let interface = interface::parse_interface(&source, module_name)?;
        for p in &interface {
            if p.width == 0 {
                return Err(ModelError::ZeroWidthPort(p.name.clone()));
            }
        }
        Ok(Self {
            module_name: module_name.to_string(),
            source,
            interface,
            lineage: None,
        })
    }

    /// Like [`Design::new`] with the top module inferred (the one no other module instantiates).
    pub fn from_source(source: impl Into<String>) -> Result<Self, ModelError> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(ModelError::EmptySource);
        }
        let top = interface::top_module(&source).ok_or_else(|| ModelError::ModuleNotFound("<any>".into()))?;
        Self::new(source, &top)
    }

    pub fn with_lineage(mut self, lineage: Lineage) -> Self {
        self.lineage = Some(lineage);
        self
    }

    pub fn inputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.interface.iter().filter(|p| p.is_input())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.interface.iter().filter(|p| !p.is_input())
    }

    pub fn clock(&self) -> Option<&PortDecl> {
        self.interface.iter().find(|p| p.is_clock)
    }

    pub fn reset(&self) -> Option<&PortDecl> {
        self.interface.iter().find(|p| p.is_reset)
    }
}

/// Hex SHA-256 of the whitespace-normalized source.
pub type SourceHash = String;

pub fn normalize_source(source: &str) -> String {
    let text = source.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut prev_blank = false;
        let mut l = String::with_capacity(line.len());
        for c in line.chars() {
            let blank = c == ' ' || c == '\t';
            if blank {
                if !prev_blank {
                    l.push(' ');
                }
            } else {
                l.push(c);
            }
            prev_blank = blank;
        }
        out.push_str(l.trim_end());
        out.push('\n');
    }
    out.trim_end().to_string()
}

pub fn dedup_key(d: &Design) -> SourceHash {
    hex::encode(Sha256::digest(normalize_source(&d.source).as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub design: Design,
    pub metrics: PpaMetrics,
    pub born_generation: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: u32,
}

impl Population {
    pub fn min_power(&self) -> Option<f64> {
        self.members.iter().map(|m| m.metrics.power).reduce(f64::min)
    }

    pub fn get(&self, id: &str) -> Option<&Individual> {
        self.members.iter().find(|m| m.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: f64, a: f64, d: f64) -> PpaMetrics {
        PpaMetrics::new(p, a, d).unwrap()
    }

    #[test]
    fn dominance_basics() {
        assert!(dominates(&m(195.0, 272.65, 1.03), &m(363.0, 409.37, 1.26)));
        assert!(!dominates(&m(1.0, 1.0, 1.0), &m(1.0, 1.0, 1.0)));
        assert!(!dominates(&m(1.0, 2.0, 3.0), &m(2.0, 1.0, 3.0)));
        assert!(!dominates(&m(2.0, 1.0, 3.0), &m(1.0, 2.0, 3.0)));
        // Differences inside the tolerance count as equal.
        assert!(!dominates(&m(1.0, 1.0, 1.0 - 1e-12), &m(1.0, 1.0, 1.0)));
    }

    #[test]
    fn invalid_metrics_rejected() {
        assert!(PpaMetrics::new(0.0, 1.0, 1.0).is_err());
        assert!(PpaMetrics::new(1.0, f64::NAN, 1.0).is_err());
        assert!(PpaMetrics::new(1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn deltas() {
        let o = m(393.0, 52.14, 1.0);
        let d = metric_delta(&m(195.0, 47.61, 1.0), &o).unwrap();
        assert!((d.d_power - 100.0 * (195.0 - 393.0) / 393.0).abs() < 1e-12);
        assert!((d.d_area - 100.0 * (47.61 - 52.14) / 52.14).abs() < 1e-12);
        assert_eq!(metric_delta(&o, &o).unwrap(), MetricDelta::ZERO);
        let bad = PpaMetrics {
            power: 0.0,
            area: 1.0,
            delay: 1.0,
        };
        assert_eq!(metric_delta(&o, &bad), Err(ModelError::OriginalMetricZero("power")));
    }

    #[test]
    fn weakest_metric_tie_break() {
        let d = MetricDelta {
            d_power: 5.0,
            d_area: -2.0,
            d_delay: -1.0,
        };
        assert_eq!(d.weakest(), Metric::Power);
        let d = MetricDelta {
            d_power: -5.0,
            d_area: 1.0,
            d_delay: 1.0,
        };
        assert_eq!(d.weakest(), Metric::Area);
        assert_eq!(MetricDelta::ZERO.weakest(), Metric::Power);
    }

    #[test]
    fn delta_rendering() {
        let d = MetricDelta {
            d_power: -50.381,
            d_area: 5.0,
            d_delay: 0.0,
        };
        assert_eq!(
            d.to_string(),
            "power \u{2212}50.4% vs original, area +5.0% vs original, delay +0.0% vs original"
        );
    }

    #[test]
    fn normalization() {
        let a = "module m;\r\n  assign  y = a;   \nendmodule\n\n";
        let b = "module m;\n assign y = a;\nendmodule";
        assert_eq!(normalize_source(a), normalize_source(b));
    }
}
