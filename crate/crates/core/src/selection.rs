// SPDX-License-Identifier: Apache-2.0

//! Power-oriented survivor selection and rank-weighted parent sampling.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::model::{dominates, Individual, PpaMetrics};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("selection pool is empty")]
    EmptyPool,
    #[error("need {needed} parents but population has {available}")]
    InsufficientPopulation { needed: usize, available: usize },
    #[error("capacity must be at least 1")]
    ZeroCapacity,
}

/// Anything with an identity and a metric vector can be selected.
pub trait Candidate {
    fn id(&self) -> &str;
    fn metrics(&self) -> &PpaMetrics;
}

impl Candidate for Individual {
    fn id(&self) -> &str {
        &self.id
    }

    fn metrics(&self) -> &PpaMetrics {
        &self.metrics
    }
}

impl<T: Candidate> Candidate for &T {
    fn id(&self) -> &str {
        (*self).id()
    }

    fn metrics(&self) -> &PpaMetrics {
        (*self).metrics()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoLevels<T> {
    pub levels: Vec<Vec<T>>,
}

impl<T: Candidate> ParetoLevels<T> {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn ids(&self) -> Vec<Vec<String>> {
        self.levels
            .iter()
            .map(|l| l.iter().map(|c| c.id().to_string()).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotaPlan {
    pub quotas: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Partition into successive non-dominated fronts. Members keep pool order within a level.
pub fn non_dominated_sort<T: Candidate + Clone>(pool: &[T]) -> Result<ParetoLevels<T>, SelectionError> {
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    let n = pool.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (pool[i].metrics(), pool[j].metrics());
            if dominates(a, b) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(b, a) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut levels = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        levels.push(current.iter().map(|&i| pool[i].clone()).collect());
        current = next;
    }
    Ok(ParetoLevels { levels })
}

fn power_order<T: Candidate>(a: &T, b: &T) -> Ordering {
    let (ma, mb) = (a.metrics(), b.metrics());
    ma.power
        .total_cmp(&mb.power)
        .then(ma.area.total_cmp(&mb.area))
        .then(ma.delay.total_cmp(&mb.delay))
        .then_with(|| a.id().cmp(b.id()))
}

/// Order a level by power, then area, delay and id.
pub fn rank_within_level<T: Candidate>(level: &mut [T]) {
    level.sort_by(power_order);
}

/// Sort and rank every level in place.
pub fn rank_levels<T: Candidate>(levels: &mut ParetoLevels<T>) {
    for l in &mut levels.levels {
        rank_within_level(l);
    }
}

/// 1-based position in the concatenation of the (already ranked) levels.
pub fn global_ranks<T: Candidate>(levels: &ParetoLevels<T>) -> HashMap<String, usize> {
    levels
        .levels
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, c)| (c.id().to_string(), i + 1))
        .collect()
}

pub fn allocate_quotas(n: usize, levels: usize) -> QuotaPlan {
    let total: usize = (1..=levels).sum();
    let weights: Vec<f64> = (1..=levels)
        .map(|k| (levels - k + 1) as f64 / total as f64)
        .collect();
    // Integer arithmetic keeps floor(N*w_k) exact.
    let quotas = (1..=levels)
        .map(|k| (n * (levels - k + 1) / total).max(1))
        .collect();
    QuotaPlan { quotas, weights }
}

/// Every intermediate of one selection, for journaling and debugging.
#[derive(Clone, Debug)]
pub struct SelectionOutcome<T> {
    pub levels: ParetoLevels<T>,
    pub plan: QuotaPlan,
    pub ranks: HashMap<String, usize>,
    pub survivors: Vec<T>,
}

pub fn power_oriented_select<T: Candidate + Clone>(pool: &[T], n: usize) -> Result<SelectionOutcome<T>, SelectionError> {
    if n == 0 {
        return Err(SelectionError::ZeroCapacity);
    }
    let mut levels = non_dominated_sort(pool)?;
    rank_levels(&mut levels);
    let ranks = global_ranks(&levels);
    let plan = allocate_quotas(n, levels.len());
    let mut taken: Vec<Vec<bool>> = levels.levels.iter().map(|l| vec![false; l.len()]).collect();
    let mut survivors = Vec::with_capacity(n.min(pool.len()));
    for (k, level) in levels.levels.iter().enumerate() {
        let room = n - survivors.len();
        let take = plan.quotas[k].min(level.len()).min(room);
        for (i, c) in level.iter().take(take).enumerate() {
            survivors.push(c.clone());
            taken[k][i] = true;
        }
    }
    for (k, level) in levels.levels.iter().enumerate() {
        for (i, c) in level.iter().enumerate() {
            if survivors.len() >= n {
                break;
            }
            if !taken[k][i] {
                survivors.push(c.clone());
                taken[k][i] = true;
            }
        }
    }
    Ok(SelectionOutcome {
        levels,
        plan,
        ranks,
        survivors,
    })
}

/// Two-pass quota fill: per-level quotas first, then best remaining by level and rank.
pub fn select_survivors<T: Candidate + Clone>(pool: &[T], n: usize) -> Result<Vec<T>, SelectionError> {
    power_oriented_select(pool, n).map(|o| o.survivors)
}

/// Probabilities proportional to 1/rank.
pub fn parent_weights(ranks: &[usize]) -> Vec<f64> {
    let inv: Vec<f64> = ranks.iter().map(|&r| 1.0 / r as f64).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|w| w / total).collect()
}

/// Draw `count` distinct members with probability proportional to 1/global rank.
pub fn sample_parents<T: Candidate + Clone, R: Rng + ?Sized>(
    pop: &[T],
    count: usize,
    rng: &mut R,
) -> Result<Vec<T>, SelectionError> {
    if pop.len() < count || pop.is_empty() {
        return Err(SelectionError::InsufficientPopulation {
            needed: count.max(1),
            available: pop.len(),
        });
    }
    let mut levels = non_dominated_sort(pop)?;
    rank_levels(&mut levels);
    let mut remaining: Vec<T> = levels.levels.into_iter().flatten().collect();
    let mut ranks: Vec<usize> = (1..=remaining.len()).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let w = parent_weights(&ranks);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = w.len() - 1;
        for (i, p) in w.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = i;
                break;
            }
        }
        out.push(remaining.remove(pick));
        ranks.remove(pick);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, PartialEq)]
    struct P(&'static str, PpaMetrics);

    impl Candidate for P {
        fn id(&self) -> &str {
            self.0
        }
        fn metrics(&self) -> &PpaMetrics {
            &self.1
        }
    }

    fn p(id: &'static str, power: f64, area: f64, delay: f64) -> P {
        P(id, PpaMetrics { power, area, delay })
    }

    #[test]
    fn table_rows_sort_into_two_levels() {
        let pool = [p("A", 195.0, 272.65, 1.03), p("B", 363.0, 409.37, 1.26), p("C", 393.0, 458.05, 1.15)];
        let mut lv = non_dominated_sort(&pool).unwrap();
        rank_levels(&mut lv);
        assert_eq!(lv.ids(), vec![vec!["A"], vec!["B", "C"]]);
        let r = global_ranks(&lv);
        assert_eq!((r["A"], r["B"], r["C"]), (1, 2, 3));
    }

    #[test]
    fn tie_breaks() {
        let mut l = vec![p("x", 1.0, 5.0, 1.0), p("y", 1.0, 3.0, 1.0)];
        rank_within_level(&mut l);
        assert_eq!(l[0].0, "y");
        let mut l = vec![p("b", 1.0, 1.0, 1.0), p("a", 1.0, 1.0, 1.0)];
        rank_within_level(&mut l);
        assert_eq!(l[0].0, "a");
    }

    #[test]
    fn quotas() {
        assert_eq!(allocate_quotas(10, 3).quotas, vec![5, 3, 1]);
        assert_eq!(allocate_quotas(2, 5).quotas, vec![1; 5]);
        assert_eq!(allocate_quotas(7, 1).quotas, vec![7]);
        let w = allocate_quotas(10, 3).weights;
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example() {
        let pool = [p("A", 1.0, 1.0, 1.0), p("B", 2.0, 2.0, 2.0), p("C", 1.5, 0.5, 3.0), p("D", 3.0, 3.0, 3.0)];
        let out = power_oriented_select(&pool, 2).unwrap();
        assert_eq!(out.levels.ids(), vec![vec!["A", "C"], vec!["B"], vec!["D"]]);
        assert_eq!(out.plan.quotas, vec![1, 1, 1]);
        let ids: Vec<&str> = out.survivors.iter().map(|s| s.0).collect();
        assert_eq!(ids, vec!["A", "B"]);
        assert_eq!(select_survivors(&pool, 10).unwrap().len(), 4);
    }

    #[test]
    fn weights() {
        let w = parent_weights(&[1, 2, 3]);
        for (got, want) in w.iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(parent_weights(&[1]), vec![1.0]);
        assert!(parent_weights(&[1, 1_000_000])[0] > 0.999999);
    }

    #[test]
    fn empty_inputs() {
        let empty: [P; 0] = [];
        assert_eq!(non_dominated_sort(&empty).unwrap_err(), SelectionError::EmptyPool);
        assert_eq!(select_survivors(&empty, 1).unwrap_err(), SelectionError::EmptyPool);
    }
}
