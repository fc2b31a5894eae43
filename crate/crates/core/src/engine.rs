// SPDX-License-Identifier: Apache-2.0

//! The evolutionary loop: seeding, offspring generation with verify-and-repair,
//! synthesis, bandit updates and power-oriented survivor selection.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bandit::OperatorStats;
use crate::config::RunConfig;
use crate::difftest::{generate_testbench, DifftestError, Testbench, TestbenchJob};
use crate::journal::Journal;
use crate::model::{dedup_key, dominates, metric_delta, Design, Individual, Lineage, MetricDelta, PpaMetrics, Population};
use crate::operators::{
    build_crossover_prompt, build_init_prompt, build_mutation_prompt, build_repair_prompt, extract_rtl, InitStrategy, OperatorId, PromptBundle,
    Templates,
};
use crate::provider::{Budgeted, GenerationRequest, Provider, Tempered};
use crate::selection::{non_dominated_sort, power_oriented_select, rank_within_level, sample_parents, SelectionError};
use crate::tooling::{SimDriver, SynthDriver, Verdict};

pub const ORIGINAL_ID: &str = "orig";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    TestbenchGenerationFailed(DifftestError),
    #[error("baseline synthesis of the original design failed: {0}")]
    BaselineSynthesisFailed(String),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
    #[error("selection: {0}")]
    Selection(#[from] SelectionError),
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// External collaborators of a run.
#[derive(Clone, Copy)]
pub struct Deps<'a> {
    pub provider: &'a dyn Provider,
    pub sim: &'a dyn SimDriver,
    pub synth: &'a dyn SynthDriver,
    pub templates: &'a Templates,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardKind {
    Provider,
    Extraction,
    Interface,
    Verification,
    Synthesis,
    InsufficientPopulation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum EvalResult {
    Accepted { design: Design, metrics: PpaMetrics },
    Discarded { kind: DiscardKind, reasons: Vec<String> },
}

/// Result of one verify-and-repair chain, with its journal events in order.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub result: EvalResult,
    pub verifications: u32,
    pub repairs: u32,
    pub exhausted: bool,
    pub events: Vec<(&'static str, Value)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub provider_calls: u64,
    pub budgeted_calls: u64,
    pub simulations: u64,
    pub synth_runs: u64,
    pub repairs: u64,
    pub discards: u64,
    pub duplicates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub original: PpaMetrics,
    pub population: Population,
    pub front: Vec<Individual>,
    pub best_power: Individual,
    pub generations_completed: u32,
    pub stopped_early: Option<String>,
    pub totals: Totals,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Checkpoint {
    generation: u32,
    population: Population,
    bandit: OperatorStats,
    original: Design,
    m_orig: PpaMetrics,
    testbench: Testbench,
    totals: Totals,
}

fn slug(tag: &str) -> String {
    tag.replace('/', "_")
}

fn first_line(s: &str) -> String {
    let l = s.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim();
    l.chars().take(300).collect()
}

/// Returns a rendered description of why the interfaces differ, if they do.
pub fn interface_mismatch(orig: &Design, cand: &Design) -> Option<String> {
    if orig.interface == cand.interface {
        return None;
    }
    let show = |d: &Design| {
        d.interface
            .iter()
            .map(|p| format!("{:?} {} [{}]", p.direction, p.name, p.width))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Some(format!(
        "interface mismatch: expected ports ({}) but candidate declares ({})",
        show(orig),
        show(cand)
    ))
}

/// Power-ascending first front.
pub fn pareto_front(pop: &[Individual]) -> Result<Vec<Individual>, SelectionError> {
    let levels = non_dominated_sort(pop)?;
    let mut front = levels.levels.into_iter().next().unwrap_or_default();
    rank_within_level(&mut front);
    Ok(front)
}

fn metrics_json(m: &PpaMetrics) -> Value {
    json!({"power": m.power, "area": m.area, "delay": m.delay})
}

fn member_json(i: &Individual) -> Value {
    json!({"id": i.id, "power": i.metrics.power, "area": i.metrics.area, "delay": i.metrics.delay})
}

fn score_json(s: f64) -> Value {
    if s.is_finite() {
        json!(s)
    } else {
        json!("inf")
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    provider: &'a dyn Provider,
    sim: &'a dyn SimDriver,
    synth: &'a dyn SynthDriver,
    templates: &'a Templates,
    orig: &'a Design,
    tb: &'a Testbench,
    sims: AtomicU64,
    synths: AtomicU64,
}

enum Check {
    Pass(Design),
    Fail { kind: DiscardKind, log: String, candidate: Option<Design> },
}

impl Ctx<'_> {
    fn request(&self, bundle: PromptBundle, tag: &str) -> GenerationRequest {
        GenerationRequest::new(bundle, tag)
    }

    fn verify(&self, text: &str, dir: &Path) -> Check {
        let module = &self.orig.module_name;
        let src = match extract_rtl(text, module) {
            Ok(s) => s,
            Err(e) => return Check::Fail { kind: DiscardKind::Extraction, log: e.to_string(), candidate: None },
        };
        let design = match Design::new(src.clone(), module) {
            Ok(d) => d,
            Err(e) => {
                let cand = Design { module_name: module.clone(), source: src, interface: self.orig.interface.clone(), lineage: None };
                return Check::Fail { kind: DiscardKind::Interface, log: e.to_string(), candidate: Some(cand) };
            }
        };
        if let Some(msg) = interface_mismatch(self.orig, &design) {
            return Check::Fail { kind: DiscardKind::Interface, log: msg, candidate: Some(design) };
        }
        self.sims.fetch_add(1, Ordering::SeqCst);
        match self.sim.run_sim(&design.source, &self.tb.checking_source, dir) {
            Ok(r) if r.verdict == Verdict::Pass => Check::Pass(design),
            Ok(r) => Check::Fail { kind: DiscardKind::Verification, log: r.error_log(), candidate: Some(design) },
            Err(e) => Check::Fail { kind: DiscardKind::Verification, log: e.to_string(), candidate: Some(design) },
        }
    }

    /// Verify `text`; on failure ask for a repair, at most `r` times.
    fn evaluate_with_repair(&self, text: String, base: &str, refs: &[String], dir: &Path) -> Evaluation {
        let mut ev = Evaluation {
            result: EvalResult::Discarded { kind: DiscardKind::Verification, reasons: Vec::new() },
            verifications: 0,
            repairs: 0,
            exhausted: false,
            events: Vec::new(),
        };
        let mut reasons = Vec::new();
        let mut text = text;
        let mut last_kind = DiscardKind::Verification;
        for k in 0..=self.cfg.r {
            ev.verifications += 1;
            let check = self.verify(&text, &dir.join(format!("verify_{k}")));
            match check {
                Check::Pass(design) => {
                    ev.events.push(("verify_result", json!({"tag": base, "attempt": k, "verdict": "PASS"})));
                    self.synths.fetch_add(1, Ordering::SeqCst);
                    return match self.synth.synthesize(&design.source, &design.module_name, &dir.join("synth")) {
                        Ok(m) => {
                            ev.events.push(("synth_result", json!({"tag": base, "ok": true, "metrics": metrics_json(&m)})));
                            ev.result = EvalResult::Accepted { design, metrics: m };
                            ev
                        }
                        Err(e) => {
                            ev.events.push(("synth_result", json!({"tag": base, "ok": false, "error": first_line(&e.to_string())})));
                            reasons.push(format!("synthesis: {e}"));
                            ev.result = EvalResult::Discarded { kind: DiscardKind::Synthesis, reasons };
                            ev
                        }
                    };
                }
                Check::Fail { kind, log, candidate } => {
                    ev.events.push((
                        "verify_result",
                        json!({"tag": base, "attempt": k, "verdict": "FAIL", "kind": kind, "reason": first_line(&log)}),
                    ));
                    reasons.push(first_line(&log));
                    last_kind = kind;
                    if k == self.cfg.r {
                        break;
                    }
                    let cand = candidate.unwrap_or_else(|| Design {
                        module_name: self.orig.module_name.clone(),
                        source: text.clone(),
                        interface: self.orig.interface.clone(),
                        lineage: None,
                    });
                    let log = if log.trim().is_empty() { "verification failed without diagnostics".to_string() } else { log };
                    let tag = format!("{base}/repair/{}", k + 1);
                    let bundle = match build_repair_prompt(self.templates, &cand, &log, refs.to_vec()) {
                        Ok(b) => b,
                        Err(e) => {
                            reasons.push(e.to_string());
                            break;
                        }
                    };
                    match self.provider.generate(&self.request(bundle, &tag)) {
                        Ok(resp) => {
                            ev.repairs += 1;
                            ev.events.push(("repair", json!({"tag": tag, "after": kind})));
                            text = resp.text;
                        }
                        Err(e) => {
                            ev.exhausted = e.is_exhaustion();
                            ev.events.push(("repair", json!({"tag": tag, "error": e.to_string()})));
                            reasons.push(format!("provider: {e}"));
                            last_kind = DiscardKind::Provider;
                            break;
                        }
                    }
                }
            }
        }
        ev.result = EvalResult::Discarded { kind: last_kind, reasons };
        ev
    }

    /// Generate from `bundle` then evaluate the reply.
    fn pipeline(&self, bundle: Result<PromptBundle, String>, gen_tag: &str, base: &str, refs: &[String], dir: &Path) -> Evaluation {
        let discarded = |kind, reason: String, exhausted, events| Evaluation {
            result: EvalResult::Discarded { kind, reasons: vec![reason] },
            verifications: 0,
            repairs: 0,
            exhausted,
            events,
        };
        let bundle = match bundle {
            Ok(b) => b,
            Err(e) => return discarded(DiscardKind::InsufficientPopulation, e, false, Vec::new()),
        };
        match self.provider.generate(&self.request(bundle, gen_tag)) {
            Ok(resp) => {
                let mut ev = self.evaluate_with_repair(resp.text, base, refs, dir);
                ev.events.insert(0, ("generation_attempt", json!({"tag": gen_tag, "parents": refs, "ok": true})));
                ev
            }
            Err(e) => {
                let events = vec![("generation_attempt", json!({"tag": gen_tag, "parents": refs, "ok": false, "error": e.to_string()}))];
                discarded(DiscardKind::Provider, format!("provider: {e}"), e.is_exhaustion(), events)
            }
        }
    }
}

struct Job {
    bundle: Result<PromptBundle, String>,
    gen_tag: String,
    base: String,
    refs: Vec<String>,
    dir: PathBuf,
}

fn run_jobs(ctx: &Ctx<'_>, jobs: &[Job]) -> Vec<Evaluation> {
    if ctx.cfg.workers <= 1 || jobs.len() <= 1 {
        return jobs
            .iter()
            .map(|j| ctx.pipeline(j.bundle.clone(), &j.gen_tag, &j.base, &j.refs, &j.dir))
            .collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|j| s.spawn(move || ctx.pipeline(j.bundle.clone(), &j.gen_tag, &j.base, &j.refs, &j.dir)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("pipeline panicked")).collect()
    })
}

struct State {
    pop: Population,
    bandit: OperatorStats,
    m_orig: PpaMetrics,
    totals: Totals,
    stopped: Option<String>,
    /// Calls made before a resume: (all, budgeted).
    base_calls: (u64, u64),
}

struct Runner<'a> {
    ctx: Ctx<'a>,
    journal: &'a Journal,
    run_dir: &'a Path,
    budget: &'a Budgeted<Tempered<&'a dyn Provider>>,
}

impl Runner<'_> {
    fn emit(&self, kind: &str, payload: Value) -> Result<(), EngineError> {
        Ok(self.journal.emit(kind, payload)?)
    }

    fn flush_events(&self, ev: &Evaluation) -> Result<(), EngineError> {
        for (k, v) in &ev.events {
            self.emit(k, v.clone())?;
        }
        Ok(())
    }

    fn delta(&self, st: &State, m: &PpaMetrics) -> MetricDelta {
        metric_delta(m, &st.m_orig).unwrap_or(MetricDelta::ZERO)
    }

    fn save_member(&self, gen: u32, ind: &Individual) -> Result<(), EngineError> {
        let dir = self.run_dir.join(format!("gen_{gen}"));
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(format!("{}.v", ind.id)), &ind.design.source)?;
        Ok(())
    }

    fn init_population(&self, st: &mut State) -> Result<(), EngineError> {
        let cfg = self.ctx.cfg;
        let orig = self.ctx.orig;
        let gen0 = self.run_dir.join("gen_0");
        self.ctx.synths.fetch_add(1, Ordering::SeqCst);
        let m_orig = self
            .ctx
            .synth
            .synthesize(&orig.source, &orig.module_name, &gen0.join("orig").join("synth"))
            .map_err(|e| EngineError::BaselineSynthesisFailed(e.to_string()))?;
        st.m_orig = m_orig;
        let original = Individual { id: ORIGINAL_ID.into(), design: orig.clone(), metrics: m_orig, born_generation: 0 };
        self.emit("synth_result", json!({"tag": "seed/orig", "ok": true, "metrics": metrics_json(&m_orig)}))?;
        self.emit("seed", json!({"id": ORIGINAL_ID, "slot": Value::Null, "strategy": "original", "status": "accepted", "metrics": metrics_json(&m_orig)}))?;
        self.save_member(0, &original)?;
        let mut members = vec![original];
        let mut keys: HashSet<String> = HashSet::from([dedup_key(orig)]);
        let slots: Vec<usize> = (0..cfg.n.saturating_sub(1)).collect();
        'waves: for wave in slots.chunks(cfg.workers.max(1)) {
            let jobs: Vec<Job> = wave
                .iter()
                .map(|&slot| {
                    let strategy = InitStrategy::for_slot(slot);
                    let base = format!("seed/{slot}");
                    Job {
                        bundle: build_init_prompt(self.ctx.templates, orig, strategy).map_err(|e| e.to_string()),
                        gen_tag: format!("{base}/{strategy}"),
                        dir: gen0.join(slug(&base)),
                        base,
                        refs: vec![ORIGINAL_ID.to_string()],
                    }
                })
                .collect();
            let results = run_jobs(&self.ctx, &jobs);
            for (&slot, ev) in wave.iter().zip(results) {
                self.flush_events(&ev)?;
                st.totals.repairs += u64::from(ev.repairs);
                let strategy = InitStrategy::for_slot(slot);
                match ev.result {
                    EvalResult::Accepted { design, metrics } => {
                        let key = dedup_key(&design);
                        if !keys.insert(key) {
                            st.totals.duplicates += 1;
                            self.emit("seed", json!({"slot": slot, "strategy": strategy, "status": "duplicate"}))?;
                            continue;
                        }
                        let id = format!("s{slot}");
                        let design = design.with_lineage(Lineage { parents: vec![ORIGINAL_ID.into()], operator: format!("init:{strategy}"), generation: 0 });
                        let ind = Individual { id: id.clone(), design, metrics, born_generation: 0 };
                        self.save_member(0, &ind)?;
                        self.emit("seed", json!({"id": id, "slot": slot, "strategy": strategy, "status": "accepted", "repairs": ev.repairs, "metrics": metrics_json(&metrics)}))?;
                        members.push(ind);
                    }
                    EvalResult::Discarded { kind, reasons } => {
                        st.totals.discards += 1;
                        self.emit("seed", json!({"slot": slot, "strategy": strategy, "status": "discarded", "kind": kind, "reasons": reasons}))?;
                    }
                }
                if ev.exhausted && st.stopped.is_none() {
                    st.stopped = Some("provider exhausted during seeding".into());
                }
            }
            if st.stopped.is_some() {
                break 'waves;
            }
        }
        let pop = Population { members, generation: 0 };
        let out = power_oriented_select(&pop.members, cfg.n)?;
        self.emit_selection(0, &out)?;
        st.pop = Population { members: out.survivors, generation: 0 };
        Ok(())
    }

    fn emit_selection(&self, gen: u32, out: &crate::selection::SelectionOutcome<Individual>) -> Result<(), EngineError> {
        let mut ranks: Vec<(&String, &usize)> = out.ranks.iter().collect();
        ranks.sort_by_key(|(_, r)| **r);
        let ranks: serde_json::Map<String, Value> = ranks.into_iter().map(|(k, v)| (k.clone(), (*v).into())).collect();
        self.emit(
            "selection",
            json!({
                "generation": gen,
                "levels": out.levels.ids(),
                "quotas": out.plan.quotas,
                "ranks": ranks,
                "survivors": out.survivors.iter().map(member_json).collect::<Vec<_>>(),
            }),
        )
    }

    fn evolve_generation(&self, st: &mut State, t: u32) -> Result<Vec<String>, EngineError> {
        let cfg = self.ctx.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::from(t));
        let gen_dir = self.run_dir.join(format!("gen_{t}"));
        let mut accepted: Vec<Individual> = Vec::new();
        let mut passed: Vec<String> = Vec::new();
        let mut keys: HashSet<String> = st.pop.members.iter().map(|m| dedup_key(&m.design)).collect();
        let indices: Vec<usize> = (0..cfg.lambda).collect();
        for wave in indices.chunks(cfg.workers.max(1)) {
            let mut plans = Vec::new();
            for &j in wave {
                let score = score_json(st.bandit.ucb_score(st.bandit.best()));
                let op = st.bandit.select_operator();
                let base = format!("gen{t}/off{j}");
                let bundle = match sample_parents(&st.pop.members, op.arity(), &mut rng) {
                    Ok(parents) => {
                        let refs: Vec<String> = parents.iter().map(|p| p.id.clone()).collect();
                        self.emit("operator_selected", json!({"generation": t, "offspring": j, "operator": op, "parents": refs, "score": score}))?;
                        let b = if op == OperatorId::Crossover {
                            let (d1, d2) = (self.delta(st, &parents[0].metrics), self.delta(st, &parents[1].metrics));
                            build_crossover_prompt(self.ctx.templates, &parents[0], &parents[1], &d1, &d2)
                        } else {
                            let d = self.delta(st, &parents[0].metrics);
                            build_mutation_prompt(self.ctx.templates, op, &parents[0], &d, d.weakest())
                        };
                        (b.map_err(|e| e.to_string()), refs)
                    }
                    Err(e) => {
                        self.emit("operator_selected", json!({"generation": t, "offspring": j, "operator": op, "parents": [], "score": score, "error": e.to_string()}))?;
                        (Err(e.to_string()), Vec::new())
                    }
                };
                plans.push((j, op, Job { bundle: bundle.0, gen_tag: format!("{base}/{op}"), dir: gen_dir.join(slug(&base)), base, refs: bundle.1 }));
            }
            let jobs: Vec<Job> = plans.iter().map(|(_, _, job)| Job { bundle: job.bundle.clone(), gen_tag: job.gen_tag.clone(), base: job.base.clone(), refs: job.refs.clone(), dir: job.dir.clone() }).collect();
            let results = run_jobs(&self.ctx, &jobs);
            for ((j, op, job), ev) in plans.into_iter().zip(results) {
                self.flush_events(&ev)?;
                st.totals.repairs += u64::from(ev.repairs);
                let power = match &ev.result {
                    EvalResult::Accepted { metrics, .. } => Some(metrics.power),
                    EvalResult::Discarded { .. } => None,
                };
                let rewarded = st.bandit.record_outcome(op, power, st.m_orig.power).expect("operator was selected");
                match ev.result {
                    EvalResult::Accepted { design, metrics } => {
                        if !keys.insert(dedup_key(&design)) {
                            st.totals.duplicates += 1;
                            self.emit("offspring", json!({"generation": t, "offspring": j, "operator": op, "status": "duplicate", "reward": rewarded}))?;
                            continue;
                        }
                        let id = format!("g{t}o{j}");
                        let design = design.with_lineage(Lineage { parents: job.refs.clone(), operator: op.to_string(), generation: t });
                        let ind = Individual { id: id.clone(), design, metrics, born_generation: t };
                        self.save_member(t, &ind)?;
                        passed.push(id.clone());
                        self.emit(
                            "offspring",
                            json!({"generation": t, "offspring": j, "operator": op, "status": "accepted", "id": id, "parents": job.refs, "repairs": ev.repairs, "metrics": metrics_json(&metrics), "reward": rewarded}),
                        )?;
                        accepted.push(ind);
                    }
                    EvalResult::Discarded { kind, reasons } => {
                        st.totals.discards += 1;
                        self.emit(
                            "offspring",
                            json!({"generation": t, "offspring": j, "operator": op, "status": "discarded", "kind": kind, "reasons": reasons, "verifications": ev.verifications, "reward": false}),
                        )?;
                    }
                }
                if ev.exhausted && st.stopped.is_none() {
                    st.stopped = Some(format!("provider exhausted in generation {t}"));
                }
            }
            if st.stopped.is_some() {
                break;
            }
        }
        let before = st.pop.min_power();
        let mut pool = st.pop.members.clone();
        pool.extend(accepted);
        let out = power_oriented_select(&pool, cfg.n)?;
        self.emit_selection(t, &out)?;
        self.emit(
            "bandit_state",
            json!({
                "generation": t,
                "total": st.bandit.total,
                "arms": st.bandit.snapshot().into_iter().map(|(op, n, r, s)| json!({"operator": op, "n": n, "reward": r, "score": score_json(s)})).collect::<Vec<_>>(),
            }),
        )?;
        st.pop = Population { members: out.survivors, generation: t };
        let after = st.pop.min_power();
        if let (Some(b), Some(a)) = (before, after) {
            if a > b && !crate::model::approx_eq(a, b) {
                return Err(EngineError::InvariantViolated(format!("minimum power rose from {b} to {a} in generation {t}")));
            }
        }
        Ok(passed)
    }

    /// Every survivor is either a previous member or an offspring that passed verification this generation.
    fn check_all_correct(&self, st: &State, verified: &HashSet<String>, t: u32) -> Result<(), EngineError> {
        for m in &st.pop.members {
            if !verified.contains(&m.id) {
                return Err(EngineError::InvariantViolated(format!("member {} of generation {t} has no PASS verdict", m.id)));
            }
        }
        Ok(())
    }

    fn checkpoint(&self, st: &State, t: u32) -> Result<(), EngineError> {
        let cp = Checkpoint {
            generation: t,
            population: st.pop.clone(),
            bandit: st.bandit.clone(),
            original: self.ctx.orig.clone(),
            m_orig: st.m_orig,
            testbench: self.ctx.tb.clone(),
            totals: self.totals(st),
        };
        let tmp = self.run_dir.join("checkpoint.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&cp).expect("checkpoint serializes"))?;
        std::fs::rename(tmp, self.run_dir.join("checkpoint.json"))?;
        Ok(())
    }

    fn totals(&self, st: &State) -> Totals {
        Totals {
            provider_calls: st.base_calls.0 + self.budget.total_calls(),
            budgeted_calls: st.base_calls.1 + self.budget.counted_calls(),
            simulations: self.ctx.sims.load(Ordering::SeqCst),
            synth_runs: self.ctx.synths.load(Ordering::SeqCst),
            ..st.totals.clone()
        }
    }

    fn generations(&self, st: &mut State, from: u32) -> Result<u32, EngineError> {
        let mut done = from - 1;
        if st.stopped.is_some() {
            return Ok(done);
        }
        for t in from..=self.ctx.cfg.g {
            let mut verified: HashSet<String> = st.pop.members.iter().map(|m| m.id.clone()).collect();
            verified.extend(self.evolve_generation(st, t)?);
            self.check_all_correct(st, &verified, t)?;
            done = t;
            self.checkpoint(st, t)?;
            if st.stopped.is_some() {
                break;
            }
        }
        Ok(done)
    }

    fn finish(&self, st: State, done: u32) -> Result<RunResult, EngineError> {
        let front = pareto_front(&st.pop.members)?;
        for f in &front {
            if dominates(&st.m_orig, &f.metrics) {
                return Err(EngineError::InvariantViolated(format!("front member {} is dominated by the original", f.id)));
            }
        }
        let best = front[0].clone();
        let totals = self.totals(&st);
        if let Some(b) = self.ctx.cfg.call_budget {
            if totals.budgeted_calls > b {
                return Err(EngineError::InvariantViolated(format!("{} calls exceed the budget of {b}", totals.budgeted_calls)));
            }
        }
        let front_json: Vec<Value> = front
            .iter()
            .map(|i| {
                json!({
                    "id": i.id,
                    "metrics": metrics_json(&i.metrics),
                    "delta_percent": serde_json::to_value(self.delta(&st, &i.metrics)).unwrap(),
                    "lineage": i.design.lineage,
                    "born_generation": i.born_generation,
                    "source": i.design.source,
                })
            })
            .collect();
        std::fs::write(self.run_dir.join("pareto_front.json"), serde_json::to_string_pretty(&front_json).unwrap())?;
        std::fs::write(self.run_dir.join("best_power.v"), &best.design.source)?;
        self.emit(
            "run_summary",
            json!({
                "generations_completed": done,
                "stopped_early": st.stopped,
                "original": metrics_json(&st.m_orig),
                "best_power": member_json(&best),
                "front": front.iter().map(member_json).collect::<Vec<_>>(),
                "totals": totals,
            }),
        )?;
        Ok(RunResult {
            original: st.m_orig,
            population: st.pop,
            front,
            best_power: best,
            generations_completed: done,
            stopped_early: st.stopped,
            totals,
        })
    }
}

/// Persist the testbench artifacts into `dir`.
pub fn write_testbench(dir: &Path, tb: &Testbench) -> Result<(), EngineError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("stimulus_tb.v"), &tb.stimulus_source)?;
    std::fs::write(dir.join("checking_tb.v"), &tb.checking_source)?;
    std::fs::write(dir.join("spec.txt"), tb.spec.render())?;
    std::fs::write(dir.join("vectors.json"), serde_json::to_string_pretty(&tb.vectors).unwrap())?;
    std::fs::write(dir.join("golden.json"), serde_json::to_string_pretty(&tb.golden).unwrap())?;
    std::fs::write(dir.join("validation.txt"), format!("validated: {}\nattempts: {}\n", tb.validated, tb.attempts))?;
    Ok(())
}

fn run_start_payload(orig: &Design, cfg: &RunConfig, resumed_from: Option<u32>) -> Value {
    json!({
        "module": orig.module_name,
        "design_key": dedup_key(orig),
        "n": cfg.n, "lambda": cfg.lambda, "g": cfg.g, "r": cfg.r,
        "ucb_c": cfg.ucb_c, "seed": cfg.seed, "call_budget": cfg.call_budget, "workers": cfg.workers,
        "resumed_from": resumed_from,
    })
}

/// Full run into `run_dir`: testbench, seeding, `g` generations, front extraction.
pub fn run(orig: &Design, cfg: &RunConfig, deps: Deps<'_>, run_dir: &Path) -> Result<RunResult, EngineError> {
    cfg.validate().map_err(|e| EngineError::Config(e.to_string()))?;
    std::fs::create_dir_all(run_dir)?;
    std::fs::write(run_dir.join("config.snapshot"), cfg.to_toml())?;
    let journal = Journal::create(&run_dir.join("journal.ndjson"))?;
    let tempered = Tempered {
        inner: deps.provider,
        operator_temperature: cfg.operator_temperature,
        fidelity_temperature: cfg.fidelity_temperature,
        max_tokens: cfg.max_tokens,
    };
    let budget = Budgeted::new(tempered, cfg.call_budget, "testbench/");
    journal.emit("run_start", run_start_payload(orig, cfg, None))?;
    let tb_dir = run_dir.join("testbench");
    let job = TestbenchJob {
        orig,
        provider: &budget,
        sim: deps.sim,
        templates: deps.templates,
        limits: cfg.difftest.limits(),
        workdir: &tb_dir.join("work"),
    };
    let mut step_err = None;
    let tb = generate_testbench(&job, &mut |s| {
        if let Err(e) = journal.emit("testbench_step", serde_json::to_value(s).unwrap()) {
            step_err = Some(e);
        }
    });
    if let Some(e) = step_err {
        return Err(e.into());
    }
    let tb = tb.map_err(EngineError::TestbenchGenerationFailed)?;
    write_testbench(&tb_dir, &tb)?;
    let runner = Runner {
        ctx: Ctx {
            cfg,
            provider: &budget,
            sim: deps.sim,
            synth: deps.synth,
            templates: deps.templates,
            orig,
            tb: &tb,
            sims: AtomicU64::new(0),
            synths: AtomicU64::new(0),
        },
        journal: &journal,
        run_dir,
        budget: &budget,
    };
    let mut st = State {
        pop: Population::default(),
        bandit: OperatorStats::new(cfg.ucb_c),
        m_orig: PpaMetrics { power: 1.0, area: 1.0, delay: 1.0 },
        totals: Totals::default(),
        stopped: None,
        base_calls: (0, 0),
    };
    runner.init_population(&mut st)?;
    runner.checkpoint(&st, 0)?;
    let done = runner.generations(&mut st, 1)?;
    runner.finish(st, done)
}

/// Continue a run from its last checkpoint, appending to its journal.
pub fn resume(cfg: &RunConfig, deps: Deps<'_>, run_dir: &Path) -> Result<RunResult, EngineError> {
    cfg.validate().map_err(|e| EngineError::Config(e.to_string()))?;
    let raw = std::fs::read_to_string(run_dir.join("checkpoint.json")).map_err(|e| EngineError::Resume(e.to_string()))?;
    let cp: Checkpoint = serde_json::from_str(&raw).map_err(|e| EngineError::Resume(e.to_string()))?;
    let journal = Journal::append(&run_dir.join("journal.ndjson"))?;
    let tempered = Tempered {
        inner: deps.provider,
        operator_temperature: cfg.operator_temperature,
        fidelity_temperature: cfg.fidelity_temperature,
        max_tokens: cfg.max_tokens,
    };
    let remaining = cfg.call_budget.map(|b| b.saturating_sub(cp.totals.budgeted_calls));
    let budget = Budgeted::new(tempered, remaining, "testbench/");
    journal.emit("run_start", run_start_payload(&cp.original, cfg, Some(cp.generation)))?;
    let runner = Runner {
        ctx: Ctx {
            cfg,
            provider: &budget,
            sim: deps.sim,
            synth: deps.synth,
            templates: deps.templates,
            orig: &cp.original,
            tb: &cp.testbench,
            sims: AtomicU64::new(cp.totals.simulations),
            synths: AtomicU64::new(cp.totals.synth_runs),
        },
        journal: &journal,
        run_dir,
        budget: &budget,
    };
    let mut st = State {
        pop: cp.population.clone(),
        bandit: cp.bandit.clone(),
        m_orig: cp.m_orig,
        totals: cp.totals.clone(),
        stopped: None,
        base_calls: (cp.totals.provider_calls, cp.totals.budgeted_calls),
    };
    let done = runner.generations(&mut st, cp.generation + 1)?;
    runner.finish(st, done)
}
