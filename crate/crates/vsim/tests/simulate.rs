// SPDX-License-Identifier: Apache-2.0

use poet_vsim::{check, simulate, top_modules, SimError, SimOptions};

fn run(src: &str) -> String {
    match simulate(&[src], &SimOptions::default()) {
        Ok(o) => o.stdout,
        Err(e) => panic!("simulation failed: {e}"),
    }
}

const HALF_ADDER: &str = r#"
module half_adder(input a, input b, output sum, output carry);
  assign sum = a ^ b;
  assign carry = a & b;
endmodule
"#;

#[test]
fn half_adder_truth_table() {
    let tb = r#"
module tb;
  reg a, b;
  wire s, c;
  half_adder dut(.a(a), .b(b), .sum(s), .carry(c));
  integer i;
  initial begin
    for (i = 0; i < 4; i = i + 1) begin
      {a, b} = i;
      #1 $display("%b%b %b%b", a, b, c, s);
    end
    $finish;
  end
endmodule
"#;
    let out = simulate(&[HALF_ADDER, tb], &SimOptions::default()).unwrap();
    assert!(out.finished);
    assert_eq!(out.stdout, "00 00\n01 01\n10 01\n11 10\n");
}

#[test]
fn registered_counter_with_reset() {
    let src = r#"
module counter(input clk, input rst_n, output reg [3:0] q);
  always @(posedge clk or negedge rst_n)
    if (!rst_n) q <= 4'd0;
    else q <= q + 4'd1;
endmodule
module tb;
  reg clk = 0, rst_n = 0;
  wire [3:0] q;
  counter u(.clk(clk), .rst_n(rst_n), .q(q));
  always #5 clk = ~clk;
  initial begin
    #12 rst_n = 1;
    repeat (3) @(negedge clk) $display("t=%0t q=%h", $time, q);
    $finish;
  end
endmodule
"#;
    assert_eq!(run(src), "t=20 q=1\nt=30 q=2\nt=40 q=3\n");
}

#[test]
fn nonblocking_swap() {
    let src = r#"
module tb;
  reg clk = 0;
  reg [7:0] a = 8'h12, b = 8'h34;
  always @(posedge clk) begin a <= b; b <= a; end
  initial begin
    #1 clk = 1;
    #1 $display("%h %h", a, b);
    $finish;
  end
endmodule
"#;
    assert_eq!(run(src), "34 12\n");
}

#[test]
fn fsm_sequence_detector() {
    let src = r#"
module det(input clk, input rst, input din, output found);
  localparam IDLE = 2'd0, S1 = 2'd1, S10 = 2'd2, S101 = 2'd3;
  reg [1:0] state, next;
  always @(posedge clk) if (rst) state <= IDLE; else state <= next;
  always @* begin
    next = state;
    case (state)
      IDLE: if (din) next = S1;
      S1: if (!din) next = S10;
      S10: next = din ? S101 : IDLE;
      S101: next = din ? S1 : S10;
      default: next = IDLE;
    endcase
  end
  assign found = (state == S101);
endmodule
module tb;
  reg clk = 0, rst = 1, din = 0;
  wire f;
  det d(clk, rst, din, f);
  always #5 clk = ~clk;
  reg [7:0] pattern = 8'b10101100;
  integer k;
  initial begin
    @(posedge clk); #1 rst = 0;
    for (k = 7; k >= 0; k = k - 1) begin
      din = pattern[k];
      @(posedge clk) #1 $write("%b", f);
    end
    $display("");
    $finish;
  end
endmodule
"#;
    // The state register samples din at each edge; found reflects the new state.
    assert_eq!(run(src), "00101000\n");
}

#[test]
fn generate_loop_ripple_adder() {
    let src = r#"
module fa(input a, b, cin, output s, cout);
  assign {cout, s} = a + b + cin;
endmodule
module rca #(parameter W = 4) (input [W-1:0] a, b, output [W:0] y);
  wire [W:0] c;
  assign c[0] = 1'b0;
  genvar i;
  generate for (i = 0; i < W; i = i + 1) begin : bit_
    fa u(.a(a[i]), .b(b[i]), .cin(c[i]), .s(y[i]), .cout(c[i+1]));
  end endgenerate
  assign y[W] = c[W];
endmodule
module tb;
  reg [5:0] a, b;
  wire [6:0] y;
  rca #(.W(6)) dut(.a(a), .b(b), .y(y));
  initial begin
    a = 6'd45; b = 6'd30; #1 $display("%0d", y);
    a = 6'd63; b = 6'd63; #1 $display("%0d", y);
    $finish;
  end
endmodule
"#;
    assert_eq!(run(src), "75\n126\n");
}

#[test]
fn functions_memories_and_casez() {
    let src = r#"
module tb;
  function [3:0] popcount(input [7:0] v);
    integer i;
    begin
      popcount = 0;
      for (i = 0; i < 8; i = i + 1) popcount = popcount + v[i];
    end
  endfunction
  reg [7:0] mem [0:3];
  reg [1:0] prio;
  reg [3:0] sel;
  initial begin
    mem[0] = 8'hff; mem[1] = 8'h0f; mem[2] = 8'h81; mem[3] = 8'h00;
    $display("%0d %0d %0d %0d", popcount(mem[0]), popcount(mem[1]), popcount(mem[2]), popcount(mem[3]));
    sel = 4'b0100;
    casez (sel)
      4'b1???: prio = 3;
      4'b01??: prio = 2;
      4'b001?: prio = 1;
      default: prio = 0;
    endcase
    $display("%0d %h", prio, mem[1][7:4]);
    $finish;
  end
endmodule
"#;
    assert_eq!(run(src), "8 4 2 0\n2 0\n");
}

#[test]
fn signed_arithmetic_and_sizing() {
    let src = r#"
module tb;
  reg signed [7:0] a = -8'sd7;
  reg signed [7:0] b = 8'sd2;
  reg [7:0] u = 8'hf0;
  wire [15:0] wide = u + u;
  initial begin
    #1;
    $display("%0d %0d %0d", a / b, a % b, a >>> 1);
    $display("%h %0d", wide, $signed(u));
    $display("%b", 4'b1010 == 4'b1x10);
    $display("%b", 4'b0010 == 4'b1x10);
    $finish;
  end
endmodule
"#;
    assert_eq!(run(src), "-3 -1 -4\n01e0 -16\nx\n0\n");
}

#[test]
fn uninitialised_values_print_as_x() {
    let src = r#"
module tb;
  reg [7:0] r;
  wire [3:0] w;
  initial begin #1 $display("%h %h", r, w); $finish; end
endmodule
"#;
    assert_eq!(run(src), "xx z\n");
}

#[test]
fn combinational_loop_is_a_runtime_error() {
    let src = r#"
module tb;
  reg a = 0;
  always @(a) a = ~a;
  initial #1 a = 1;
endmodule
"#;
    let opts = SimOptions {
        max_deltas: 1000,
        ..Default::default()
    };
    // A process does not wake itself, so this settles.
    let looping = r#"
module tb;
  reg en = 0;
  wire a, b;
  assign a = en ? ~b : 1'b0;
  assign b = a;
  initial #1 en = 1;
endmodule
"#;
    assert!(simulate(&[src], &opts).is_ok());
    match simulate(&[looping], &opts) {
        Err(SimError::Runtime { message, .. }) => assert!(message.contains("delta")),
        other => panic!("expected loop error, got {other:?}"),
    }
}

#[test]
fn compile_errors_carry_line_numbers() {
    let err = check(&["module m(input a, output y);\n  assign y = a &;\nendmodule\n"]).unwrap_err();
    assert_eq!(err.line, 2);
    let err = check(&["module m(output y);\n\n  assign y = nope;\nendmodule\n"]).unwrap_err();
    assert_eq!(err.line, 3);
    assert!(err.message.contains("nope"));
    assert!(check(&["module m; sub u(); endmodule"]).is_err());
}

#[test]
fn top_modules_are_uninstantiated_ones() {
    let tops = top_modules(&[HALF_ADDER, "module tb; half_adder h(); endmodule"]).unwrap();
    assert_eq!(tops, vec!["tb".to_string()]);
}

#[test]
fn runaway_simulation_hits_time_limit() {
    let src = "module tb; reg c = 0; always #1 c = ~c; endmodule";
    let out = simulate(
        &[src],
        &SimOptions {
            max_time: 50,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(!out.finished);
    assert!(out.end_time <= 50);
}

#[test]
fn wait_and_indexed_part_select() {
    let src = r#"
module tb;
  reg [15:0] v = 16'hbeef;
  reg go = 0;
  reg [3:0] n;
  integer k = 1;
  initial begin
    wait (go) n = v[k*4 +: 4];
    $display("%h %h", n, v[11 -: 8]);
    $finish;
  end
  initial #3 go = 1;
endmodule
"#;
    assert_eq!(run(src), "e ee\n");
}
