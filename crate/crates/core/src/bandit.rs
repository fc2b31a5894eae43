// SPDX-License-Identifier: Apache-2.0

//! UCB1 scheduling over the evolutionary operators.

use serde::{Deserialize, Serialize};

use crate::model::strictly_less;
use crate::operators::OperatorId;

pub const DEFAULT_EXPLORATION: f64 = 1.414;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BanditError {
    #[error("operator {0} has never been selected")]
    UnselectedOperator(OperatorId),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub reward: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorStats {
    pub arms: [ArmStats; 6],
    pub total: u64,
    pub c: f64,
}

impl Default for OperatorStats {
    fn default() -> Self {
        Self::new(DEFAULT_EXPLORATION)
    }
}

/// Raw UCB1 formula; `+inf` when the arm has never been pulled.
pub fn ucb(reward: f64, count: u64, total: u64, c: f64) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    let n = count as f64;
    reward / n + c * ((total as f64).ln() / n).sqrt()
}

impl OperatorStats {
    pub fn new(c: f64) -> Self {
        Self {
            arms: [ArmStats::default(); 6],
            total: 0,
            c,
        }
    }

    pub fn arm(&self, op: OperatorId) -> &ArmStats {
        &self.arms[op.index()]
    }

    pub fn ucb_score(&self, op: OperatorId) -> f64 {
        let a = self.arm(op);
        ucb(a.reward, a.count, self.total, self.c)
    }

    /// Argmax of the score. Ties keep the earliest operator in declaration order.
    pub fn best(&self) -> OperatorId {
        let mut best = OperatorId::ALL[0];
        let mut best_score = self.ucb_score(best);
        for op in &OperatorId::ALL[1..] {
            let s = self.ucb_score(*op);
            if s > best_score {
                best = *op;
                best_score = s;
            }
        }
        best
    }

    pub fn select_operator(&mut self) -> OperatorId {
        let op = self.best();
        self.arms[op.index()].count += 1;
        self.total += 1;
        op
    }

    /// Reward 1 when the offspring survived evaluation with lower power than the original.
    pub fn record_outcome(
        &mut self,
        op: OperatorId,
        offspring_power: Option<f64>,
        original_power: f64,
    ) -> Result<bool, BanditError> {
        let arm = &mut self.arms[op.index()];
        if arm.count == 0 {
            return Err(BanditError::UnselectedOperator(op));
        }
        let rewarded = offspring_power.is_some_and(|p| strictly_less(p, original_power));
        if rewarded {
            arm.reward += 1.0;
        }
        Ok(rewarded)
    }

    /// (operator, count, reward, score) for every arm, in declaration order.
    pub fn snapshot(&self) -> Vec<(OperatorId, u64, f64, f64)> {
        OperatorId::ALL
            .iter()
            .map(|&op| {
                let a = self.arm(op);
                (op, a.count, a.reward, self.ucb_score(op))
            })
            .collect()
    }
}
