// SPDX-License-Identifier: Apache-2.0

//! Run summaries rebuilt from a journal.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::journal::{normalize_time, read_journal};
use crate::model::signed_pct;
use crate::operators::OperatorId;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum JournalError {
    #[error("journal has no events")]
    Empty,
    #[error("journal does not start with run_start")]
    MissingRunStart,
    #[error("malformed journal line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("malformed {event} event: {message}")]
    MalformedEvent { event: String, message: String },
    #[error("csv: {0}")]
    Csv(String),
}

/// Survivor statistics after one selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationRow {
    pub generation: u64,
    pub survivors: usize,
    pub best_power: f64,
    pub mean_power: f64,
    pub best_area: f64,
    pub mean_area: f64,
    pub best_delay: f64,
    pub mean_delay: f64,
    pub best_id: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OperatorRow {
    pub operator: String,
    pub selected: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub discarded: u64,
    pub rewarded: u64,
}

impl OperatorRow {
    pub fn reward_rate(&self) -> f64 {
        if self.selected == 0 {
            0.0
        } else {
            self.rewarded as f64 / self.selected as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SeedCounts {
    pub accepted: u64,
    pub duplicates: u64,
    pub discarded: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub module: String,
    pub run_starts: usize,
    pub original: Option<[f64; 3]>,
    pub elapsed_ms: u64,
    pub generations: Vec<GenerationRow>,
    pub operators: Vec<OperatorRow>,
    pub seeds: SeedCounts,
    /// Discard kind to count, seeding and offspring combined.
    pub discards: BTreeMap<String, u64>,
    pub summary: Option<Value>,
    pub warnings: Vec<String>,
}

fn field<'a>(e: &'a Value, key: &str) -> Result<&'a Value, JournalError> {
    e.get(key).ok_or_else(|| JournalError::MalformedEvent {
        event: e["event"].as_str().unwrap_or("?").to_string(),
        message: format!("missing field '{key}'"),
    })
}

fn num(e: &Value, key: &str) -> Result<f64, JournalError> {
    field(e, key)?.as_f64().ok_or_else(|| JournalError::MalformedEvent {
        event: e["event"].as_str().unwrap_or("?").to_string(),
        message: format!("field '{key}' is not a number"),
    })
}

fn generation_row(e: &Value) -> Result<GenerationRow, JournalError> {
    let generation = field(e, "generation")?.as_u64().unwrap_or(0);
    let survivors = field(e, "survivors")?.as_array().cloned().unwrap_or_default();
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    let mut best_id = String::new();
    let mut best = f64::INFINITY;
    for s in &survivors {
        let m = [num(s, "power")?, num(s, "area")?, num(s, "delay")?];
        if m[0] < best {
            best = m[0];
            best_id = s["id"].as_str().unwrap_or("").to_string();
        }
        for (c, v) in cols.iter_mut().zip(m) {
            c.push(v);
        }
    }
    let min = |c: &[f64]| c.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = |c: &[f64]| if c.is_empty() { f64::NAN } else { c.iter().sum::<f64>() / c.len() as f64 };
    Ok(GenerationRow {
        generation,
        survivors: survivors.len(),
        best_power: min(&cols[0]),
        mean_power: mean(&cols[0]),
        best_area: min(&cols[1]),
        mean_area: mean(&cols[1]),
        best_delay: min(&cols[2]),
        mean_delay: mean(&cols[2]),
        best_id,
    })
}

/// Rebuild a report. A damaged final line is skipped with a warning; damage elsewhere is an error.
pub fn build_report(text: &str, normalize: bool) -> Result<Report, JournalError> {
    let text = if normalize { normalize_time(text) } else { text.to_string() };
    let read = read_journal(&text);
    let last_line = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, _)| i + 1).last().unwrap_or(0);
    let mut warnings = Vec::new();
    for (line, message) in &read.skipped {
        if *line == last_line {
            warnings.push(format!("line {line} skipped: {message}"));
        } else {
            return Err(JournalError::MalformedLine { line: *line, message: message.clone() });
        }
    }
    let first = read.events.first().ok_or(JournalError::Empty)?;
    if first["event"] != "run_start" {
        return Err(JournalError::MissingRunStart);
    }
    let mut report = Report {
        module: first["module"].as_str().unwrap_or("?").to_string(),
        run_starts: 0,
        original: None,
        elapsed_ms: 0,
        generations: Vec::new(),
        operators: OperatorId::ALL.iter().map(|op| OperatorRow { operator: op.to_string(), ..Default::default() }).collect(),
        seeds: SeedCounts::default(),
        discards: BTreeMap::new(),
        summary: None,
        warnings,
    };
    let stamps: Vec<u64> = read.events.iter().filter_map(|e| e["ts"].as_u64()).collect();
    if let (Some(lo), Some(hi)) = (stamps.iter().min(), stamps.iter().max()) {
        report.elapsed_ms = hi - lo;
    }
    let mut rows: BTreeMap<u64, GenerationRow> = BTreeMap::new();
    for e in &read.events {
        let op_row = |report: &mut Report| -> Result<usize, JournalError> {
            let name = field(e, "operator")?.as_str().unwrap_or("");
            report.operators.iter().position(|r| r.operator == name).ok_or_else(|| JournalError::MalformedEvent {
                event: e["event"].as_str().unwrap_or("?").to_string(),
                message: format!("unknown operator '{name}'"),
            })
        };
        match e["event"].as_str().unwrap_or("") {
            "run_start" => report.run_starts += 1,
            "seed" => match e["status"].as_str() {
                Some("accepted") if e["id"] == "orig" => {
                    let m = field(e, "metrics")?;
                    report.original = Some([num(m, "power")?, num(m, "area")?, num(m, "delay")?]);
                }
                Some("accepted") => report.seeds.accepted += 1,
                Some("duplicate") => report.seeds.duplicates += 1,
                _ => {
                    report.seeds.discarded += 1;
                    *report.discards.entry(e["kind"].as_str().unwrap_or("unknown").to_string()).or_default() += 1;
                }
            },
            "operator_selected" => {
                let i = op_row(&mut report)?;
                report.operators[i].selected += 1;
            }
            "offspring" => {
                let i = op_row(&mut report)?;
                let row = &mut report.operators[i];
                if e["reward"] == true {
                    row.rewarded += 1;
                }
                match e["status"].as_str() {
                    Some("accepted") => row.accepted += 1,
                    Some("duplicate") => row.duplicates += 1,
                    _ => {
                        row.discarded += 1;
                        *report.discards.entry(e["kind"].as_str().unwrap_or("unknown").to_string()).or_default() += 1;
                    }
                }
            }
            "selection" => {
                let row = generation_row(e)?;
                rows.insert(row.generation, row);
            }
            "run_summary" => report.summary = Some(e.clone()),
            _ => {}
        }
    }
    report.generations = rows.into_values().collect();
    Ok(report)
}

fn pct(v: f64, base: f64) -> String {
    signed_pct((v - base) / base * 100.0)
}

/// Plain-text rendering.
pub fn render_text(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "module: {}", r.module);
    if r.run_starts > 1 {
        let _ = writeln!(s, "resumed: {} time(s)", r.run_starts - 1);
    }
    let _ = writeln!(s, "elapsed: {:.3} s", r.elapsed_ms as f64 / 1000.0);
    if let Some([p, a, d]) = r.original {
        let _ = writeln!(s, "original: power {p:.4} uW, area {a:.4} um2, delay {d:.4} ns");
    }
    let _ = writeln!(s, "\nper-generation survivors:");
    let _ = writeln!(
        s,
        "{:>4}  {:>3}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  best",
        "gen", "n", "best_pwr", "mean_pwr", "best_area", "mean_area", "best_dly", "mean_dly"
    );
    for g in &r.generations {
        let _ = writeln!(
            s,
            "{:>4}  {:>3}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}  {}",
            g.generation, g.survivors, g.best_power, g.mean_power, g.best_area, g.mean_area, g.best_delay, g.mean_delay, g.best_id
        );
    }
    if r.generations.iter().all(|g| g.generation == 0) {
        let _ = writeln!(s, "(seed phase only)");
    }
    let _ = writeln!(s, "\noperators:");
    let _ = writeln!(s, "{:<10}  {:>8}  {:>8}  {:>9}  {:>9}  {:>8}  {:>11}", "operator", "selected", "accepted", "duplicate", "discarded", "rewarded", "reward_rate");
    for o in &r.operators {
        let _ = writeln!(
            s,
            "{:<10}  {:>8}  {:>8}  {:>9}  {:>9}  {:>8}  {:>11.3}",
            o.operator, o.selected, o.accepted, o.duplicates, o.discarded, o.rewarded, o.reward_rate()
        );
    }
    let _ = writeln!(s, "\nseeds: {} accepted, {} duplicate, {} discarded", r.seeds.accepted, r.seeds.duplicates, r.seeds.discarded);
    let _ = writeln!(s, "discards:");
    if r.discards.is_empty() {
        let _ = writeln!(s, "  none");
    }
    for (kind, n) in &r.discards {
        let _ = writeln!(s, "  {kind:<24} {n}");
    }
    if let Some(sum) = &r.summary {
        let _ = writeln!(s, "\nsummary:");
        let _ = writeln!(s, "  generations completed: {}", sum["generations_completed"]);
        if let Some(reason) = sum["stopped_early"].as_str() {
            let _ = writeln!(s, "  stopped early: {reason}");
        }
        let best = &sum["best_power"];
        let _ = write!(s, "  best power: {} ({:.4} uW", best["id"].as_str().unwrap_or("?"), best["power"].as_f64().unwrap_or(f64::NAN));
        if let (Some([p, _, _]), Some(bp)) = (r.original, best["power"].as_f64()) {
            let _ = write!(s, ", {}", pct(bp, p));
        }
        let _ = writeln!(s, ")");
        let front: Vec<&str> = sum["front"].as_array().map(|f| f.iter().filter_map(|m| m["id"].as_str()).collect()).unwrap_or_default();
        let _ = writeln!(s, "  front: {}", front.join(", "));
        let t = &sum["totals"];
        let _ = writeln!(
            s,
            "  calls: {} ({} budgeted), simulations: {}, synthesis runs: {}, repairs: {}",
            t["provider_calls"], t["budgeted_calls"], t["simulations"], t["synth_runs"], t["repairs"]
        );
    } else {
        let _ = writeln!(s, "\nsummary: run did not finish");
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// One row per generation, suitable for plotting.
pub fn trajectory_csv(r: &Report) -> Result<String, JournalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for g in &r.generations {
        w.serialize(g).map_err(|e| JournalError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| JournalError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::journal::Journal;
    use serde_json::json;

    fn sample() -> Journal {
        let j = Journal::memory();
        j.emit("run_start", json!({"module": "m"})).unwrap();
        j.emit("seed", json!({"id": "orig", "status": "accepted", "metrics": {"power": 2.0, "area": 4.0, "delay": 1.0}})).unwrap();
        j.emit("seed", json!({"slot": 0, "status": "discarded", "kind": "verification"})).unwrap();
        j.emit("selection", json!({"generation": 0, "survivors": [{"id": "orig", "power": 2.0, "area": 4.0, "delay": 1.0}]})).unwrap();
        j
    }

    #[test]
    fn seed_phase_only() {
        let r = build_report(&sample().lines().join("\n"), true).unwrap();
        assert_eq!(r.generations.len(), 1);
        assert_eq!(r.discards["verification"], 1);
        let text = render_text(&r);
        assert!(text.contains("(seed phase only)"));
        assert!(text.contains("run did not finish"));
    }

    #[test]
    fn truncated_tail_is_a_warning_but_damage_elsewhere_is_not() {
        let lines = sample().lines();
        let cut = format!("{}\n{{\"event\":\"sel", lines.join("\n"));
        let r = build_report(&cut, false).unwrap();
        assert_eq!(r.warnings.len(), 1);
        let broken = format!("{}\n{{oops\n{}", lines[0], lines[1..].join("\n"));
        assert!(matches!(build_report(&broken, false), Err(JournalError::MalformedLine { line: 2, .. })));
        assert_eq!(build_report("", false), Err(JournalError::Empty));
        assert_eq!(build_report(&lines[1..].join("\n"), false), Err(JournalError::MissingRunStart));
    }

    #[test]
    fn generation_means() {
        let j = Journal::memory();
        j.emit("run_start", json!({"module": "m"})).unwrap();
        j.emit(
            "selection",
            json!({"generation": 1, "survivors": [{"id": "a", "power": 1.0, "area": 6.0, "delay": 3.0}, {"id": "b", "power": 3.0, "area": 2.0, "delay": 1.0}]}),
        )
        .unwrap();
        let r = build_report(&j.lines().join("\n"), true).unwrap();
        let g = &r.generations[0];
        assert_eq!((g.best_power, g.mean_power, g.best_area, g.mean_area, g.best_delay, g.mean_delay), (1.0, 2.0, 2.0, 4.0, 1.0, 2.0));
        assert_eq!(g.best_id, "a");
        let csv = trajectory_csv(&r).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "generation,survivors,best_power,mean_power,best_area,mean_area,best_delay,mean_delay,best_id");
        assert_eq!(csv.lines().nth(1).unwrap(), "1,2,1.0,2.0,2.0,4.0,1.0,2.0,a");
    }
}
