//! Dense LU and Cholesky factorizations: sequential references and the
//! 2.5D communication-avoiding algorithms on the simulated machine.

mod audit;
mod confchox;
mod conflux;
pub mod kernels;
mod layout;
mod tournament;

use std::fmt;

use crate::matrix::DenseMatrix;
use crate::simnet::{Collective, CommStats, GridSpec, SimError};

pub use audit::{step_cost_audit, StepAudit, STEP_COUNT};
pub use confchox::confchox;
pub use conflux::conflux;
pub use kernels::{gemm, gemmt, getrf_seq, potrf_seq, trsm, LuFactors, Side, Uplo};
pub use layout::{chunk, BlockCyclicLayout};
pub use tournament::{tournament_pivot, Tournament};

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    NotSquare { rows: usize, cols: usize },
    Singular { column: usize },
    NotSpd { column: usize },
    /// Fewer than `v` unmasked rows were left at this step.
    RankDeficient { step: usize },
    Divisibility(String),
    Sim(SimError),
}

impl fmt::Display for FactorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorError::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, expected square"),
            FactorError::Singular { column } => write!(f, "matrix is singular: zero pivot in column {column}"),
            FactorError::NotSpd { column } => {
                write!(f, "matrix is not symmetric positive definite: nonpositive pivot in column {column}")
            }
            FactorError::RankDeficient { step } => write!(f, "rank-deficient step {step}: fewer than v unmasked rows"),
            FactorError::Divisibility(m) => write!(f, "{m}"),
            FactorError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FactorError {}

impl From<SimError> for FactorError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidGrid(m) => FactorError::Divisibility(m),
            e => FactorError::Sim(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Lu,
    Cholesky,
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorKind::Lu => "lu",
            FactorKind::Cholesky => "chol",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorConfig {
    pub grid: GridSpec,
    /// Block size.
    pub v: usize,
    /// Per-rank memory in words.
    pub memory: usize,
    pub hard_memory: bool,
    pub collective: Collective,
    /// Cap on concurrently executing ranks; `None` reads `CONFLUXLAB_THREADS`.
    pub threads: Option<usize>,
}

impl FactorConfig {
    /// Memory defaults to `N^2 c / P` (one copy of the matrix per layer) and
    /// the block size to [`default_block_size`].
    pub fn new(grid: GridSpec, n: usize) -> Self {
        let memory = default_memory(n, grid);
        let v = default_block_size(n, grid, memory).unwrap_or(grid.pz.max(1));
        FactorConfig { grid, v, memory, hard_memory: false, collective: Collective::Flat, threads: None }
    }

    pub fn with_block(mut self, v: usize) -> Self {
        self.v = v;
        self
    }

    pub fn with_memory(mut self, memory: usize) -> Self {
        self.memory = memory;
        self
    }
}

pub fn default_memory(n: usize, grid: GridSpec) -> usize {
    (n * n * grid.pz).div_ceil(grid.p())
}

/// `v = 2 P M / N^2`, clamped to `[c, 64]`, then moved to the nearest value
/// (searching down first) with `N mod v = 0` and `(N/v) mod Px = 0`.
pub fn default_block_size(n: usize, grid: GridSpec, memory: usize) -> Option<usize> {
    let c = grid.pz;
    let raw = (2.0 * grid.p() as f64 * memory as f64 / (n as f64 * n as f64)).round() as usize;
    let hi = 64.max(c);
    let want = raw.clamp(c, hi);
    let ok = |v: usize| v >= c && v > 0 && n % v == 0 && (n / v) % grid.px == 0;
    (c..=want).rev().find(|&v| ok(v)).or_else(|| (want..=n).find(|&v| ok(v)))
}

/// Pivot rows chosen at each step; rows are never swapped, only masked.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PivotRecord {
    pub n: usize,
    pub steps: Vec<Vec<usize>>,
}

impl PivotRecord {
    /// `perm[i]` is the original row that became the `i`-th pivot.
    pub fn permutation(&self) -> Vec<usize> {
        self.steps.concat()
    }

    /// Rows already chosen after `steps` steps.
    pub fn mask_after(&self, steps: usize) -> Vec<bool> {
        let mut mask = vec![false; self.n];
        for &r in self.steps.iter().take(steps).flatten() {
            mask[r] = true;
        }
        mask
    }

    /// Every prefix is distinct and in range.
    pub fn is_prefix_valid(&self) -> bool {
        let mut seen = vec![false; self.n];
        for &r in self.steps.iter().flatten() {
            if r >= self.n || seen[r] {
                return false;
            }
            seen[r] = true;
        }
        true
    }

    pub fn is_bijection(&self) -> bool {
        self.is_prefix_valid() && self.steps.iter().map(Vec::len).sum::<usize>() == self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorResult {
    pub kind: FactorKind,
    pub n: usize,
    pub config: FactorConfig,
    /// Unit lower `L` (LU) or lower `L` (Cholesky), rows in pivot order.
    pub l: DenseMatrix,
    pub u: Option<DenseMatrix>,
    pub pivots: PivotRecord,
    pub stats: CommStats,
    /// `‖P A − L U‖_F / ‖A‖_F` or `‖L Lᵀ − A‖_F / ‖A‖_F`.
    pub residual: f64,
    /// Ranks whose resident data exceeded the soft memory budget.
    pub over_budget: Vec<usize>,
}

impl FactorResult {
    /// Residual bound used by the correctness checks: `1e-8 N`.
    pub fn residual_ok(&self) -> bool {
        self.residual <= 1e-8 * self.n as f64
    }
}

/// Phase id for step `step` (1..=11) of outer iteration `t` (0-based).
pub fn phase_id(t: usize, step: usize) -> u32 {
    (t * 16 + step) as u32
}

/// Inverse of [`phase_id`].
pub fn phase_step(phase: u32) -> (usize, usize) {
    ((phase / 16) as usize, (phase % 16) as usize)
}
