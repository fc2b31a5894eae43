// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use num_bigint::BigUint;
use poet_core::bandit::OperatorStats;
use poet_core::difftest::parse_literal;
use poet_core::operators::{build_mutation_prompt, extract_rtl, OperatorId, Templates};
use poet_core::selection::{non_dominated_sort, power_oriented_select, sample_parents, Candidate};
use poet_core::{dominates, metric_delta, Design, Individual, PpaMetrics};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
struct Point {
    id: String,
    m: PpaMetrics,
}

impl Candidate for Point {
    fn id(&self) -> &str {
        &self.id
    }
    fn metrics(&self) -> &PpaMetrics {
        &self.m
    }
}

fn grid_metrics() -> impl Strategy<Value = PpaMetrics> {
    (1u32..8, 1u32..8, 1u32..8).prop_map(|(p, a, d)| PpaMetrics { power: p as f64 * 0.5, area: a as f64 * 0.5, delay: d as f64 * 0.5 })
}

fn uniform_metrics() -> impl Strategy<Value = PpaMetrics> {
    let v = || (1u64..=1_000_000u64).prop_map(|x| x as f64 / 10_000.0);
    (v(), v(), v()).prop_map(|(power, area, delay)| PpaMetrics { power, area, delay })
}

fn pool_of(ms: Vec<PpaMetrics>) -> Vec<Point> {
    ms.into_iter().enumerate().map(|(i, m)| Point { id: format!("p{i:02}"), m }).collect()
}

/// Repeatedly peel off the members nobody remaining dominates.
fn peel(pool: &[Point]) -> Vec<BTreeSet<String>> {
    let mut left: Vec<&Point> = pool.iter().collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let front: Vec<&Point> = left.iter().copied().filter(|p| !left.iter().any(|q| dominates(&q.m, &p.m))).collect();
        out.push(front.iter().map(|p| p.id.clone()).collect());
        left.retain(|p| !front.iter().any(|f| f.id == p.id));
    }
    out
}

fn level_sets(pool: &[Point]) -> Vec<BTreeSet<String>> {
    non_dominated_sort(pool).unwrap().ids().into_iter().map(|l| l.into_iter().collect()).collect()
}

proptest! {
    #[test]
    fn dominance_is_irreflexive_and_antisymmetric(a in uniform_metrics(), b in uniform_metrics()) {
        prop_assert!(!dominates(&a, &a));
        prop_assert!(!(dominates(&a, &b) && dominates(&b, &a)));
    }

    #[test]
    fn dominance_is_transitive(a in grid_metrics(), b in grid_metrics(), c in grid_metrics()) {
        if dominates(&a, &b) && dominates(&b, &c) {
            prop_assert!(dominates(&a, &c));
        }
    }

    #[test]
    fn delta_against_itself_is_zero(m in uniform_metrics()) {
        let d = metric_delta(&m, &m).unwrap();
        prop_assert_eq!((d.d_power, d.d_area, d.d_delay), (0.0, 0.0, 0.0));
    }

    #[test]
    fn levels_match_peeling_oracle(ms in prop::collection::vec(uniform_metrics(), 1..50)) {
        let pool = pool_of(ms);
        prop_assert_eq!(level_sets(&pool), peel(&pool));
    }

    #[test]
    fn levels_match_peeling_oracle_with_ties(ms in prop::collection::vec(grid_metrics(), 1..40)) {
        let pool = pool_of(ms);
        prop_assert_eq!(level_sets(&pool), peel(&pool));
    }

    #[test]
    fn survivors_are_elitist_and_representative(ms in prop::collection::vec(grid_metrics(), 1..40), n in 1usize..20) {
        let pool = pool_of(ms);
        let out = power_oriented_select(&pool, n).unwrap();
        let ids: Vec<&str> = out.survivors.iter().map(|s| s.id.as_str()).collect();
        let unique: BTreeSet<&str> = ids.iter().copied().collect();
        prop_assert_eq!(ids.len(), n.min(pool.len()));
        prop_assert_eq!(unique.len(), ids.len());
        let best = &out.levels.levels[0][0];
        prop_assert!(unique.contains(best.id.as_str()));
        for level in out.levels.levels.iter().take(n) {
            prop_assert!(level.iter().any(|m| unique.contains(m.id.as_str())));
        }
        let min_pool = pool.iter().map(|p| p.m.power).fold(f64::INFINITY, f64::min);
        let min_surv = out.survivors.iter().map(|p| p.m.power).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(min_pool, min_surv);
    }

    #[test]
    fn selection_ignores_pool_order(ms in prop::collection::vec(grid_metrics(), 1..30), n in 1usize..15, seed: u64) {
        let pool = pool_of(ms);
        let mut shuffled = pool.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let a: Vec<String> = power_oriented_select(&pool, n).unwrap().survivors.into_iter().map(|s| s.id).collect();
        let b: Vec<String> = power_oriented_select(&shuffled, n).unwrap().survivors.into_iter().map(|s| s.id).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn parents_are_distinct_and_reproducible(ms in prop::collection::vec(uniform_metrics(), 2..20), seed: u64) {
        let pool = pool_of(ms);
        let draw = || sample_parents(&pool, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (x, y) = (draw(), draw());
        prop_assert_ne!(&x[0].id, &x[1].id);
        prop_assert_eq!(x.iter().map(|p| &p.id).collect::<Vec<_>>(), y.iter().map(|p| &p.id).collect::<Vec<_>>());
    }

    #[test]
    fn bandit_cold_starts_then_keeps_books(outcomes in prop::collection::vec(prop::option::of(0.5f64..4.0), 6..60)) {
        let mut b = OperatorStats::new(1.414);
        let mut first = Vec::new();
        let mut rewards = 0.0;
        for (i, power) in outcomes.iter().enumerate() {
            let op = b.select_operator();
            if i < 6 {
                first.push(op);
            }
            if b.record_outcome(op, *power, 2.0).unwrap() {
                rewards += 1.0;
                prop_assert!(power.unwrap() < 2.0);
            }
        }
        prop_assert_eq!(first, OperatorId::ALL.to_vec());
        let snap = b.snapshot();
        prop_assert_eq!(snap.iter().map(|s| s.1).sum::<u64>(), b.total);
        prop_assert_eq!(b.total as usize, outcomes.len());
        prop_assert_eq!(snap.iter().map(|s| s.2).sum::<f64>(), rewards);
        for (_, n, r, _) in snap {
            prop_assert!(r <= n as f64);
        }
    }

    #[test]
    fn fenced_module_extracts_verbatim(body in prop::collection::vec("[a-z]{1,6}", 1..6), prose in "[A-Za-z ,.]{0,60}") {
        let wires: String = body.iter().enumerate().map(|(i, w)| format!("  wire {w}_{i};\n")).collect();
        let src = format!("module top(input a, output y);\n{wires}  assign y = a;\nendmodule");
        let reply = format!("{prose}\n```verilog\n{src}\n```\n{prose}");
        prop_assert_eq!(extract_rtl(&reply, "top").unwrap(), src.clone());
        prop_assert_eq!(extract_rtl(&format!("{prose}\n{src}\n"), "top").unwrap(), src);
    }

    #[test]
    fn prompts_are_deterministic(p in 0.1f64..10.0, a in 0.1f64..10.0, d in 0.1f64..10.0, op in 0usize..5) {
        let t = Templates::builtin();
        let design = Design::new("module top(input a, output y);\n  assign y = a;\nendmodule", "top").unwrap();
        let m = PpaMetrics { power: p, area: a, delay: d };
        let ind = Individual { id: "s0".into(), design, metrics: m, born_generation: 0 };
        let delta = metric_delta(&m, &PpaMetrics { power: 1.0, area: 1.0, delay: 1.0 }).unwrap();
        let op = OperatorId::ALL[op];
        let x = build_mutation_prompt(&t, op, &ind, &delta, delta.weakest()).unwrap();
        let y = build_mutation_prompt(&t, op, &ind, &delta, delta.weakest()).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn literals_roundtrip(x: u64) {
        let v = BigUint::from(x);
        prop_assert_eq!(parse_literal(&x.to_string()), Some(v.clone()));
        prop_assert_eq!(parse_literal(&format!("0x{x:x}")), Some(v.clone()));
        prop_assert_eq!(parse_literal(&format!("64'h{x:X}")), Some(v.clone()));
        prop_assert_eq!(parse_literal(&format!("'b{x:b}")), Some(v.clone()));
        prop_assert_eq!(parse_literal(&format!("64'd{x}")), Some(v));
        prop_assert_eq!(parse_literal(&format!("8'hx{x:x}")), None);
    }
}
