// SPDX-License-Identifier: Apache-2.0

mod common;

use common::scenario_dir;
use poet_core::report::{build_report, render_text, trajectory_csv};

fn golden_journal() -> String {
    std::fs::read_to_string(scenario_dir("half_adder").join("golden_journal.ndjson")).unwrap()
}

fn check_snapshot(name: &str, actual: &str) {
    let path = scenario_dir("half_adder").join(name);
    if std::env::var_os("POET_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    assert_eq!(actual, std::fs::read_to_string(&path).unwrap(), "{name}");
}

#[test]
fn golden_journal_report_matches_snapshot() {
    let r = build_report(&golden_journal(), true).unwrap();
    check_snapshot("report.txt", &render_text(&r));
    check_snapshot("trajectory.csv", &trajectory_csv(&r).unwrap());
}

#[test]
fn every_generation_appears_with_hand_checked_statistics() {
    let r = build_report(&golden_journal(), true).unwrap();
    let gens: Vec<u64> = r.generations.iter().map(|g| g.generation).collect();
    assert_eq!(gens, [0, 1, 2, 3]);
    let g1 = &r.generations[1];
    assert_eq!(g1.best_id, "g1o0");
    assert!((g1.mean_power - (1.7 + 1.95 + 1.9) / 3.0).abs() < 1e-12);
    assert!((g1.mean_area - (5.0 + 5.2 + 5.6) / 3.0).abs() < 1e-12);
    assert_eq!(g1.best_delay, 0.07);
    let improve = &r.operators[0];
    assert_eq!((improve.selected, improve.rewarded), (2, 2));
    let fusion = r.operators.iter().find(|o| o.operator == "fusion").unwrap();
    assert_eq!((fusion.selected, fusion.discarded, fusion.reward_rate()), (1, 1, 0.0));
    assert_eq!(r.discards.values().sum::<u64>(), 2);
    assert_eq!(r.discards["synthesis"], 1);
    assert_eq!(r.discards["verification"], 1);
}

#[test]
fn truncated_journal_still_reports() {
    let text = golden_journal();
    let cut = &text[..text.len() - 40];
    let r = build_report(cut, true).unwrap();
    assert_eq!(r.warnings.len(), 1);
    assert!(r.summary.is_none());
    assert_eq!(r.generations.len(), 4);
}
