// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{BTreeMap, HashSet};

use common::{build_testbench, run_scenario, scenario_config, scenario_dir};
use poet_core::engine::EngineError;
use poet_core::journal::read_journal;
use poet_core::provider::{Fixture, ScriptedProvider};
use poet_core::tooling::{AnnotatedSynth, BuiltinSim, SimDriver, Verdict};
use serde_json::Value;

fn events<'a>(all: &'a [Value], kind: &str) -> Vec<&'a Value> {
    all.iter().filter(|e| e["event"] == kind).collect()
}

#[test]
fn scripted_run_matches_golden_journal() {
    let cfg = scenario_config("half_adder");
    let dir = tempfile::tempdir().unwrap();
    let (res, journal) = run_scenario("half_adder", &cfg, dir.path());
    let res = res.unwrap();
    let golden_path = scenario_dir("half_adder").join("golden_journal.ndjson");
    if std::env::var_os("POET_BLESS").is_some() {
        std::fs::write(&golden_path, &journal).unwrap();
    }
    let golden = std::fs::read_to_string(&golden_path).unwrap();
    assert_eq!(journal, golden);
    assert_eq!(res.generations_completed, 3);
    assert_eq!(res.stopped_early, None);
    let front: Vec<&str> = res.front.iter().map(|i| i.id.as_str()).collect();
    assert_eq!(front, ["g3o0"]);
    assert_eq!(res.best_power.metrics.power, 1.55);
    assert!(dir.path().join("pareto_front.json").is_file());
    assert_eq!(std::fs::read_to_string(dir.path().join("best_power.v")).unwrap(), res.best_power.design.source);
}

#[test]
fn every_survivor_is_correct_and_min_power_never_rises() {
    let cfg = scenario_config("half_adder");
    let dir = tempfile::tempdir().unwrap();
    let (res, journal) = run_scenario("half_adder", &cfg, dir.path());
    res.unwrap();
    let all = read_journal(&journal).events;
    let mut passed: HashSet<String> = HashSet::from(["orig".to_string()]);
    for e in events(&all, "seed").into_iter().chain(events(&all, "offspring")) {
        if e["status"] == "accepted" {
            passed.insert(e["id"].as_str().unwrap().to_string());
        }
    }
    let tb = build_testbench("half_adder", &dir.path().join("recheck_tb"));
    let sim = BuiltinSim::default();
    let mut last_min = f64::INFINITY;
    let selections = events(&all, "selection");
    assert_eq!(selections.len(), 4);
    for sel in selections {
        let t = sel["generation"].as_u64().unwrap();
        let survivors = sel["survivors"].as_array().unwrap();
        assert_eq!(survivors.len(), 3);
        let min = survivors.iter().map(|s| s["power"].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
        assert!(min <= last_min, "generation {t}: {min} > {last_min}");
        last_min = min;
        for s in survivors {
            let id = s["id"].as_str().unwrap();
            assert!(passed.contains(id), "{id}");
            let born = if id == "orig" || id.starts_with('s') { 0 } else { id[1..id.find('o').unwrap()].parse().unwrap() };
            let src = std::fs::read_to_string(dir.path().join(format!("gen_{born}/{id}.v"))).unwrap();
            let r = sim.run_sim(&src, &tb.checking_source, &dir.path().join(format!("recheck_{t}_{id}"))).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{id}");
        }
    }
}

#[test]
fn power_improving_offspring_survives_and_earns_reward() {
    let cfg = scenario_config("half_adder");
    let dir = tempfile::tempdir().unwrap();
    let (_, journal) = run_scenario("half_adder", &cfg, dir.path());
    let all = read_journal(&journal).events;
    let sel1 = events(&all, "selection").into_iter().find(|e| e["generation"] == 1).unwrap();
    assert_eq!(sel1["survivors"][0]["id"], "g1o0");
    let bandit1 = events(&all, "bandit_state").into_iter().find(|e| e["generation"] == 1).unwrap();
    let improve = &bandit1["arms"][0];
    assert_eq!((improve["operator"].as_str(), improve["n"].as_u64(), improve["reward"].as_f64()), (Some("improve"), Some(1), Some(1.0)));
    let cross = events(&all, "offspring").into_iter().find(|e| e["operator"] == "crossover").unwrap();
    assert_eq!(cross["status"], "accepted");
    assert_eq!(cross["reward"], false);
}

#[test]
fn repair_chain_stops_after_r_plus_one_verifications() {
    let cfg = scenario_config("half_adder");
    let dir = tempfile::tempdir().unwrap();
    let (_, journal) = run_scenario("half_adder", &cfg, dir.path());
    let all = read_journal(&journal).events;
    let off = events(&all, "offspring").into_iter().find(|e| e["generation"] == 2 && e["offspring"] == 1).unwrap();
    assert_eq!(off["status"], "discarded");
    assert_eq!(off["verifications"], 4);
    let verifies = events(&all, "verify_result").into_iter().filter(|e| e["tag"] == "gen2/off1").count();
    assert_eq!(verifies, 4);
    let repairs: Vec<&str> = events(&all, "repair").into_iter().filter_map(|e| e["tag"].as_str()).filter(|t| t.starts_with("gen2/off1/")).collect();
    assert_eq!(repairs, ["gen2/off1/repair/1", "gen2/off1/repair/2", "gen2/off1/repair/3"]);

    let mut strict = cfg.clone();
    strict.r = 0;
    let dir = tempfile::tempdir().unwrap();
    let (_, journal) = run_scenario("half_adder", &strict, dir.path());
    let all = read_journal(&journal).events;
    assert!(events(&all, "repair").is_empty());
    for e in events(&all, "offspring").into_iter().filter(|e| e["status"] == "discarded") {
        assert!(e["verifications"].as_u64().unwrap() <= 1);
    }
}

#[test]
fn identical_inputs_give_identical_journals() {
    for workers in [1, 3] {
        let mut cfg = scenario_config("half_adder");
        cfg.workers = workers;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (ra, ja) = run_scenario("half_adder", &cfg, a.path());
        let (rb, jb) = run_scenario("half_adder", &cfg, b.path());
        assert_eq!(ja, jb, "workers={workers}");
        assert_eq!(ra.unwrap().front, rb.unwrap().front);
    }
}

#[test]
fn resumed_run_reaches_the_same_front() {
    let cfg = scenario_config("half_adder");
    let full = tempfile::tempdir().unwrap();
    let (expected, _) = run_scenario("half_adder", &cfg, full.path());
    let expected = expected.unwrap();

    let mut short = cfg.clone();
    short.g = 2;
    let dir = tempfile::tempdir().unwrap();
    let (partial, _) = run_scenario("half_adder", &short, dir.path());
    assert_eq!(partial.unwrap().generations_completed, 2);

    let provider = cfg.build_provider().unwrap();
    let (sim, synth, templates) = (cfg.build_sim(), cfg.build_synth(), cfg.templates().unwrap());
    let deps = poet_core::engine::Deps { provider: provider.as_ref(), sim: sim.as_ref(), synth: synth.as_ref(), templates: &templates };
    let resumed = poet_core::engine::resume(&cfg, deps, dir.path()).unwrap();
    assert_eq!(resumed.generations_completed, 3);
    assert_eq!(resumed.front, expected.front);
    assert_eq!(resumed.totals, expected.totals);
    let starts = read_journal(&std::fs::read_to_string(dir.path().join("journal.ndjson")).unwrap()).events;
    assert_eq!(events(&starts, "run_start").len(), 2);
}

#[test]
fn call_budget_stops_the_run_early() {
    let mut cfg = scenario_config("half_adder");
    cfg.call_budget = Some(5);
    let dir = tempfile::tempdir().unwrap();
    let (res, journal) = run_scenario("half_adder", &cfg, dir.path());
    let res = res.unwrap();
    assert!(res.stopped_early.is_some());
    assert!(res.generations_completed < 3);
    assert_eq!(res.totals.budgeted_calls, 5);
    assert_eq!(res.totals.provider_calls, 7);
    let all = read_journal(&journal).events;
    assert_eq!(events(&all, "run_summary").len(), 1);
    assert!(!res.front.is_empty());
}

#[test]
fn unusable_testbench_aborts_before_seeding() {
    let cfg = scenario_config("half_adder");
    let provider = ScriptedProvider::new(vec![Fixture {
        tag: Some("testbench/*".into()),
        text: "I cannot help with that.".into(),
        repeat: true,
    }]);
    let (sim, synth, templates) = (BuiltinSim::default(), AnnotatedSynth, cfg.templates().unwrap());
    let deps = poet_core::engine::Deps { provider: &provider, sim: &sim, synth: &synth, templates: &templates };
    let dir = tempfile::tempdir().unwrap();
    let err = poet_core::engine::run(&common::design("half_adder"), &cfg, deps, dir.path()).unwrap_err();
    assert!(matches!(err, EngineError::TestbenchGenerationFailed(_)), "{err}");
    let all = read_journal(&std::fs::read_to_string(dir.path().join("journal.ndjson")).unwrap()).events;
    assert!(events(&all, "seed").is_empty());
    let attempts: BTreeMap<u64, usize> = events(&all, "testbench_step").iter().fold(BTreeMap::new(), |mut m, e| {
        *m.entry(e["attempt"].as_u64().unwrap()).or_default() += 1;
        m
    });
    assert_eq!(attempts.len(), cfg.difftest.max_attempts as usize);
}

#[test]
fn unannotated_original_fails_baseline_synthesis() {
    let cfg = scenario_config("half_adder");
    let mut orig = common::design("half_adder");
    orig.source = orig.source.lines().filter(|l| !l.contains("ppa:")).collect::<Vec<_>>().join("\n");
    let provider = cfg.build_provider().unwrap();
    let (sim, synth, templates) = (cfg.build_sim(), cfg.build_synth(), cfg.templates().unwrap());
    let deps = poet_core::engine::Deps { provider: provider.as_ref(), sim: sim.as_ref(), synth: synth.as_ref(), templates: &templates };
    let dir = tempfile::tempdir().unwrap();
    let err = poet_core::engine::run(&orig, &cfg, deps, dir.path()).unwrap_err();
    assert!(matches!(err, EngineError::BaselineSynthesisFailed(_)), "{err}");
}
