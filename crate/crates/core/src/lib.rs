// SPDX-License-Identifier: Apache-2.0

//! Power-first evolutionary optimization of Verilog designs.
//!
//! Candidates are proposed by a text-generation provider, verified against a
//! testbench whose expected outputs come from simulating the original design,
//! synthesized for power, area and delay, and kept or dropped by a
//! Pareto-level selection that prefers low power.

pub mod bandit;
pub mod config;
pub mod difftest;
pub mod engine;
pub mod interface;
pub mod journal;
pub mod model;
pub mod operators;
pub mod provider;
pub mod report;
pub mod selection;
pub mod tooling;

pub use model::{dominates, metric_delta, Design, Individual, MetricDelta, PpaMetrics, Population};
