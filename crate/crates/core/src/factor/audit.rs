//! Per-step traffic of one outer iteration against the step formulas.

use std::fmt;

use super::{phase_id, FactorKind, FactorResult};

/// Steps per outer iteration.
pub const STEP_COUNT: usize = 11;

/// Received words of one step; `*_max` is over ranks, `mean` over all ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAudit {
    pub step: usize,
    pub data_max: usize,
    pub index_max: usize,
    /// Mean of data plus index words.
    pub mean: f64,
    pub predicted: f64,
}

impl StepAudit {
    pub fn max_words(&self) -> usize {
        self.data_max + self.index_max
    }
}

impl fmt::Display for StepAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {:>2}: max {:>8} data + {:>5} index, mean {:>10.1}, predicted {:>10.1}",
            self.step, self.data_max, self.index_max, self.mean, self.predicted
        )
    }
}

/// Audits outer iteration `t` (0-based). Predictions use the memory implied
/// by the grid, `M = N^2 c / P`, and `N - (t+1) v` remaining rows.
pub fn step_cost_audit(run: &FactorResult, t: usize) -> Vec<StepAudit> {
    let g = run.config.grid;
    let (n, v) = (run.n as f64, run.config.v as f64);
    let (p, c) = (g.p() as f64, g.c() as f64);
    let m = n * n * c / p;
    let rem = (n - (t as f64 + 1.0) * v).max(0.0);
    let lu = run.kind == FactorKind::Lu;
    let rounds = g.px.next_power_of_two().trailing_zeros() as f64;
    let planes = rem * n * v / (p * m.sqrt());
    (1..=STEP_COUNT)
        .map(|step| {
            let predicted = match step {
                1 => rem * v * c / p,
                2 if lu => v * v * rounds,
                3 if lu => v * v + v,
                3 => v * v,
                4 | 6 => rem * v / p,
                5 if lu => rem * v * c / p,
                8 | 10 => planes,
                _ => 0.0,
            };
            let phase = phase_id(t, step);
            let per_rank: Vec<_> = run.stats.ranks.iter().map(|r| r.phase(phase)).collect();
            StepAudit {
                step,
                data_max: per_rank.iter().map(|s| s.recv_data).max().unwrap_or(0),
                index_max: per_rank.iter().map(|s| s.recv_index).max().unwrap_or(0),
                mean: per_rank.iter().map(|s| s.recv() as f64).sum::<f64>() / per_rank.len().max(1) as f64,
                predicted,
            }
        })
        .collect()
}
