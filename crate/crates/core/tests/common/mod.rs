// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::PathBuf;

use poet_core::difftest::{generate_testbench, DifftestLimits, Testbench, TestbenchJob};
use poet_core::operators::Templates;
use poet_core::provider::{Fixture, ScriptedProvider};
use poet_core::tooling::BuiltinSim;
use poet_core::Design;

pub const DESIGNS: [&str; 5] = ["half_adder", "comparator4", "mux4", "reg_adder", "seq_detect"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read(rel: &str) -> String {
    let p = fixtures().join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn design(name: &str) -> Design {
    Design::new(read(&format!("designs/{name}.v")), name).unwrap()
}

pub fn mutants(name: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(fixtures().join("mutants"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(&format!("{name}__")))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn testbench_provider(name: &str) -> ScriptedProvider {
    ScriptedProvider::new(vec![
        Fixture::tagged("testbench/spec", read(&format!("difftest/{name}/spec.txt"))),
        Fixture::tagged("testbench/vectors/1", read(&format!("difftest/{name}/vectors.txt"))),
    ])
}

pub fn build_testbench(name: &str, workdir: &std::path::Path) -> Testbench {
    let orig = design(name);
    let provider = testbench_provider(name);
    let sim = BuiltinSim::default();
    let templates = Templates::builtin();
    let job = TestbenchJob { orig: &orig, provider: &provider, sim: &sim, templates: &templates, limits: DifftestLimits::default(), workdir };
    generate_testbench(&job, &mut |_| {}).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn scenario_dir(name: &str) -> PathBuf {
    fixtures().join("scenarios").join(name)
}

pub fn scenario_config(name: &str) -> poet_core::config::RunConfig {
    poet_core::config::load_config(&scenario_dir(name).join("poet.toml")).unwrap()
}

/// Runs a scripted scenario into `out` and returns the result with the time-normalized journal.
pub fn run_scenario(
    design_name: &str,
    cfg: &poet_core::config::RunConfig,
    out: &std::path::Path,
) -> (Result<poet_core::engine::RunResult, poet_core::engine::EngineError>, String) {
    let provider = cfg.build_provider().unwrap();
    let sim = cfg.build_sim();
    let synth = cfg.build_synth();
    let templates = cfg.templates().unwrap();
    let deps = poet_core::engine::Deps { provider: provider.as_ref(), sim: sim.as_ref(), synth: synth.as_ref(), templates: &templates };
    let res = poet_core::engine::run(&design(design_name), cfg, deps, out);
    let journal = std::fs::read_to_string(out.join("journal.ndjson")).unwrap_or_default();
    (res, poet_core::journal::normalize_time(&journal))
}
