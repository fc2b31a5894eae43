// SPDX-License-Identifier: Apache-2.0

use poet_vsim::{simulate, SimOptions};
use proptest::prelude::*;

fn reference(op: &str, a: u64, b: u64, w: u32) -> u64 {
    let m = (1u64 << w) - 1;
    match op {
        "+" => (a + b) & m,
        "-" => a.wrapping_sub(b) & m,
        "*" => a.wrapping_mul(b) & m,
        "&" => a & b,
        "|" => a | b,
        "^" => a ^ b,
        "<" => (a < b) as u64,
        ">=" => (a >= b) as u64,
        "==" => (a == b) as u64,
        "<<" => (a << (b % 8)) & m,
        ">>" => a >> (b % 8),
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unsigned_operators_match_reference(
        w in 1u32..=16,
        a in any::<u64>(),
        b in any::<u64>(),
        op in prop::sample::select(vec!["+", "-", "*", "&", "|", "^", "<", ">=", "==", "<<", ">>"]),
    ) {
        let m = (1u64 << w) - 1;
        let (a, b) = (a & m, b & m);
        let rhs = if op == "<<" || op == ">>" { format!("a {op} (b % 8)") } else { format!("a {op} b") };
        let src = format!(
            "module tb;\n  reg [{hi}:0] a, b;\n  wire [{hi}:0] y = {rhs};\n  initial begin\n    a = {w}'d{a}; b = {w}'d{b};\n    #1 $display(\"%0d\", y);\n    $finish;\n  end\nendmodule\n",
            hi = w - 1
        );
        let out = simulate(&[&src], &SimOptions::default()).unwrap();
        prop_assert_eq!(out.stdout.trim(), reference(op, a, b, w).to_string());
    }

    #[test]
    fn hex_display_roundtrips(w in 1u32..=64, v in any::<u64>()) {
        let v = if w == 64 { v } else { v & ((1u64 << w) - 1) };
        let src = format!(
            "module tb; reg [{}:0] r; initial begin r = {w}'h{v:x}; $display(\"%h\", r); end endmodule",
            w - 1
        );
        let out = simulate(&[&src], &SimOptions::default()).unwrap();
        let digits = w.div_ceil(4) as usize;
        prop_assert_eq!(out.stdout.trim(), format!("{v:0digits$x}"));
    }
}
