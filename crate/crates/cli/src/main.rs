// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use poet_core::config::{load_config, ProviderConfig, RunConfig};
use poet_core::difftest::{generate_testbench, DifftestLimits, TestbenchJob};
use poet_core::engine::{self, Deps, RunResult};
use poet_core::model::signed_pct;
use poet_core::provider::{Provider, Tempered};
use poet_core::report::{build_report, render_text, trajectory_csv};
use poet_core::selection::{power_oriented_select, Candidate};
use poet_core::{Design, PpaMetrics};

const FATAL: u8 = 2;
const STOPPED_EARLY: u8 = 3;

#[derive(Parser)]
#[command(name = "poet", version, about = "Power-first evolutionary optimization of Verilog designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a testbench, then evolve the design.
    Run(RunArgs),
    /// Generate and validate the differential testbench only.
    Testbench(TestbenchArgs),
    /// Run survivor selection on a metrics pool and print every intermediate.
    Select(SelectArgs),
    /// Summarize a run journal.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Original RTL; not needed with --resume.
    #[arg(long, required_unless_present = "resume")]
    design: Option<PathBuf>,
    /// Top module when the file defines several.
    #[arg(long)]
    top: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum number of generation calls, testbench calls excluded.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "poet_run")]
    out: PathBuf,
    /// Continue the run in --out from its last checkpoint.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct TestbenchArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    top: Option<String>,
    /// Configuration supplying the provider and simulator.
    #[arg(long, conflicts_with = "fixtures")]
    config: Option<PathBuf>,
    /// Scripted replies directory, used instead of --config.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, default_value = "poet_testbench")]
    out: PathBuf,
    #[arg(long)]
    max_attempts: Option<u32>,
}

#[derive(Args)]
struct SelectArgs {
    /// JSON array of {id, power, area, delay} or {id, metrics: {...}}.
    #[arg(long)]
    pool: PathBuf,
    #[arg(short = 'n')]
    n: usize,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    journal: PathBuf,
    /// Also write the per-generation trajectory as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Treat every timestamp as zero.
    #[arg(long)]
    normalize_time: bool,
}

type Outcome = Result<u8, String>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Testbench(a) => cmd_testbench(a),
        Command::Select(a) => cmd_select(a),
        Command::Report(a) => cmd_report(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(FATAL)
        }
    }
}

fn read_design(path: &Path, top: Option<&str>) -> Result<Design, String> {
    let src = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let d = match top {
        Some(t) => Design::new(src, t),
        None => Design::from_source(src),
    };
    d.map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(a: RunArgs) -> Outcome {
    let mut cfg = load_config(&a.config).map_err(|e| e.to_string())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(b) = a.budget {
        cfg.call_budget = Some(b);
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let provider = cfg.build_provider().map_err(|e| e.to_string())?;
    let (sim, synth) = (cfg.build_sim(), cfg.build_synth());
    let templates = cfg.templates().map_err(|e| format!("templates: {e}"))?;
    let deps = Deps { provider: provider.as_ref(), sim: sim.as_ref(), synth: synth.as_ref(), templates: &templates };
    let result = if a.resume {
        engine::resume(&cfg, deps, &a.out)
    } else {
        let design = read_design(a.design.as_deref().expect("clap requires --design"), a.top.as_deref())?;
        engine::run(&design, &cfg, deps, &a.out)
    }
    .map_err(|e| e.to_string())?;
    print!("{}", summary_table(&result));
    println!("run directory: {}", a.out.display());
    match &result.stopped_early {
        Some(reason) => {
            eprintln!("stopped early: {reason}");
            Ok(STOPPED_EARLY)
        }
        None => Ok(0),
    }
}

fn summary_table(r: &RunResult) -> String {
    let o = r.original;
    let row = |label: &str, m: &PpaMetrics| {
        let d = |x: f64, base: f64| signed_pct((x - base) / base * 100.0);
        format!(
            "{label:<18} {:>12.4} {:>12.4} {:>10.4} {:>9} {:>9} {:>9}\n",
            m.power,
            m.area,
            m.delay,
            d(m.power, o.power),
            d(m.area, o.area),
            d(m.delay, o.delay)
        )
    };
    let mut s = format!("{:<18} {:>12} {:>12} {:>10} {:>9} {:>9} {:>9}\n", "design", "power_uw", "area_um2", "cpd_ns", "d_power", "d_area", "d_delay");
    s += &row("original", &o);
    s += &row(&format!("best-power {}", r.best_power.id), &r.best_power.metrics);
    for f in &r.front {
        s += &row(&format!("front {}", f.id), &f.metrics);
    }
    s += &format!(
        "generations: {}  provider calls: {} ({} budgeted)  repairs: {}  discards: {}  duplicates: {}\n",
        r.generations_completed, r.totals.provider_calls, r.totals.budgeted_calls, r.totals.repairs, r.totals.discards, r.totals.duplicates
    );
    s
}

fn cmd_testbench(a: TestbenchArgs) -> Outcome {
    let design = read_design(&a.design, a.top.as_deref())?;
    let cfg = match (&a.config, &a.fixtures) {
        (Some(c), _) => load_config(c).map_err(|e| e.to_string())?,
        (None, Some(dir)) => RunConfig { provider: Some(ProviderConfig::Scripted { fixture_dir: dir.clone() }), ..Default::default() },
        (None, None) => return Err("either --config or --fixtures is required".into()),
    };
    let provider = cfg.build_provider().map_err(|e| e.to_string())?;
    let tempered = Tempered {
        inner: provider.as_ref() as &dyn Provider,
        operator_temperature: cfg.operator_temperature,
        fidelity_temperature: cfg.fidelity_temperature,
        max_tokens: cfg.max_tokens,
    };
    let sim = cfg.build_sim();
    let templates = cfg.templates().map_err(|e| format!("templates: {e}"))?;
    let mut limits: DifftestLimits = cfg.difftest.limits();
    if let Some(m) = a.max_attempts {
        if m == 0 {
            return Err("--max-attempts must be at least 1".into());
        }
        limits.max_attempts = m;
    }
    let workdir = a.out.join("work");
    let job = TestbenchJob { orig: &design, provider: &tempered, sim: sim.as_ref(), templates: &templates, limits, workdir: &workdir };
    let tb = generate_testbench(&job, &mut |s| {
        let mark = if s.ok { "ok" } else { "FAILED" };
        eprintln!("attempt {} {:<8} {mark} {}", s.attempt, s.step, s.detail);
    })
    .map_err(|e| e.to_string())?;
    engine::write_testbench(&a.out, &tb).map_err(|e| e.to_string())?;
    println!(
        "testbench validated after {} attempt(s): {} vector(s), {} sample point(s)",
        tb.attempts,
        tb.vectors.vectors.len(),
        tb.golden.records.len()
    );
    println!("written to {}", a.out.display());
    Ok(0)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PoolEntry {
    Nested { id: String, metrics: PpaMetrics },
    Flat { id: String, power: f64, area: f64, delay: f64 },
}

#[derive(Clone)]
struct Member {
    id: String,
    m: PpaMetrics,
}

impl Candidate for Member {
    fn id(&self) -> &str {
        &self.id
    }
    fn metrics(&self) -> &PpaMetrics {
        &self.m
    }
}

fn read_pool(path: &Path) -> Result<Vec<Member>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let entries: Vec<PoolEntry> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if entries.is_empty() {
        return Err(format!("{}: pool is empty", path.display()));
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let (id, m) = match e {
            PoolEntry::Nested { id, metrics } => (id, metrics),
            PoolEntry::Flat { id, power, area, delay } => (id, PpaMetrics { power, area, delay }),
        };
        m.validate().map_err(|err| format!("member '{id}': {err}"))?;
        if !seen.insert(id.clone()) {
            return Err(format!("duplicate member id '{id}'"));
        }
        out.push(Member { id, m });
    }
    Ok(out)
}

fn cmd_select(a: SelectArgs) -> Outcome {
    let pool = read_pool(&a.pool)?;
    let out = power_oriented_select(&pool, a.n).map_err(|e| e.to_string())?;
    let mut ranks: Vec<(&String, &usize)> = out.ranks.iter().collect();
    ranks.sort_by_key(|(_, r)| **r);
    let ranks: serde_json::Map<String, serde_json::Value> = ranks.into_iter().map(|(k, v)| (k.clone(), (*v).into())).collect();
    let doc = json!({
        "levels": out.levels.ids(),
        "quotas": out.plan.quotas,
        "weights": out.plan.weights,
        "ranks": ranks,
        "survivors": out.survivors.iter().map(|s| s.id.clone()).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(0)
}

fn cmd_report(a: ReportArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.journal).map_err(|e| format!("{}: {e}", a.journal.display()))?;
    let report = build_report(&text, a.normalize_time).map_err(|e| format!("{}: {e}", a.journal.display()))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", render_text(&report));
    if let Some(p) = &a.csv {
        let csv = trajectory_csv(&report).map_err(|e| e.to_string())?;
        std::fs::write(p, csv).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(0)
}
