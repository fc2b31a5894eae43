// SPDX-License-Identifier: Apache-2.0

use std::fmt;

/// Parse or elaboration failure, reported the way a compiler would.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileError {
    pub line: usize,
    pub message: String,
}

impl CompileError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

impl std::error::Error for CompileError {}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("compile error: {0}")]
    Compile(#[from] CompileError),
    #[error("runtime error at time {time}: {message}")]
    Runtime { time: u64, message: String },
}
