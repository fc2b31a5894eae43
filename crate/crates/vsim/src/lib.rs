// SPDX-License-Identifier: Apache-2.0

//! A small event-driven, four-state Verilog simulator.
//!
//! Covers the synthesizable RTL subset (continuous assigns, `always`
//! blocks, functions, parameters, generate loops, hierarchy) plus the
//! behavioural constructs self-checking testbenches need (`initial`,
//! delays, `$display`, `$finish`).
//!
//! ```
//! let out = poet_vsim::simulate(&[r#"
//!     module t;
//!       reg [3:0] a = 4'd9;
//!       initial begin #1 $display("a=%h", a + 4'd1); $finish; end
//!     endmodule
//! "#], &Default::default()).unwrap();
//! assert_eq!(out.stdout, "a=a\n");
//! ```

mod ast;
mod elab;
mod error;
mod ir;
mod lexer;
mod ops;
mod parser;
mod sim;
mod value;

pub use error::{CompileError, SimError};
pub use sim::{SimOptions, SimOutput};
pub use value::{Bit, Logic};

/// Parse and elaborate without running; returns the first compile error.
pub fn check(sources: &[&str]) -> Result<(), CompileError> {
    compile(sources).map(|_| ())
}

fn compile(sources: &[&str]) -> Result<ir::Program, CompileError> {
    let mut files = Vec::with_capacity(sources.len());
    for s in sources {
        files.push(parser::parse(s)?);
    }
    elab::elaborate(&files)
}

/// Compile all sources together and simulate every top-level module.
pub fn simulate(sources: &[&str], opts: &SimOptions) -> Result<SimOutput, SimError> {
    let prog = compile(sources)?;
    sim::Simulator::new(&prog, opts.clone()).run()
}

/// Names of modules that are not instantiated by any other module.
pub fn top_modules(sources: &[&str]) -> Result<Vec<String>, CompileError> {
    let mut files = Vec::with_capacity(sources.len());
    for s in sources {
        files.push(parser::parse(s)?);
    }
    Ok(elab::top_module_names(&files))
}
