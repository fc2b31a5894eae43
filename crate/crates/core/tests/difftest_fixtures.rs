// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{build_testbench, design, mutants, DESIGNS};
use poet_core::tooling::{BuiltinSim, SimDriver, Verdict};

#[test]
fn original_designs_pass_their_own_checking_bench() {
    let sim = BuiltinSim::default();
    for name in DESIGNS {
        let dir = tempfile::tempdir().unwrap();
        let tb = build_testbench(name, dir.path());
        assert!(tb.validated, "{name}");
        assert_eq!(tb.attempts, 1, "{name}");
        let r = sim.run_sim(&design(name).source, &tb.checking_source, &dir.path().join("recheck")).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{name}: {}", r.error_log());
    }
}

#[test]
fn every_mutant_is_caught() {
    let sim = BuiltinSim::default();
    for name in DESIGNS {
        let dir = tempfile::tempdir().unwrap();
        let tb = build_testbench(name, dir.path());
        let ms = mutants(name);
        assert!(!ms.is_empty(), "{name} has no mutants");
        for (id, src) in ms {
            let r = sim.run_sim(&src, &tb.checking_source, &dir.path().join(&id)).unwrap();
            assert!(matches!(r.verdict, Verdict::Fail(n) if n > 0), "{id}: {:?}", r.verdict);
            assert!(!r.mismatches.is_empty(), "{id}");
        }
    }
}

#[test]
fn out_of_spec_assignments_are_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let tb = build_testbench("mux4", dir.path());
    assert!(tb.vectors.vectors.iter().flat_map(|v| &v.assignments).all(|a| a.port != "y"));
    let tb = build_testbench("reg_adder", dir.path());
    assert!(tb.vectors.vectors.iter().flat_map(|v| &v.assignments).all(|a| a.port != "clk"));
}
