//! 2.5D block-cyclic ownership.
//!
//! Tile `(ti, tj)` of size `v x v` belongs to ranks `(ti mod Px, tj mod Py, *)`;
//! every layer `pk` keeps a partial sum of the same tiles. During step `t`
//! layer `pk` applies the `k` planes `slice(pk)` of the `v` planes of the
//! step's rank-`v` update.

use crate::simnet::GridSpec;

use super::FactorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockCyclicLayout {
    pub grid: GridSpec,
    pub n: usize,
    pub v: usize,
}

impl BlockCyclicLayout {
    /// Checks `N mod v = 0`, `(N/v) mod Px = 0` and `v >= c`.
    pub fn new(grid: GridSpec, n: usize, v: usize) -> Result<Self, FactorError> {
        if v == 0 || n == 0 {
            return Err(FactorError::Divisibility("N and v must be positive".into()));
        }
        if n % v != 0 {
            return Err(FactorError::Divisibility(format!("N = {n} is not a multiple of the block size v = {v}")));
        }
        if (n / v) % grid.px != 0 {
            return Err(FactorError::Divisibility(format!(
                "N/v = {} tiles is not a multiple of Px = {}",
                n / v,
                grid.px
            )));
        }
        if v < grid.pz {
            return Err(FactorError::Divisibility(format!(
                "block size v = {v} is smaller than the replication depth c = {}",
                grid.pz
            )));
        }
        Ok(BlockCyclicLayout { grid, n, v })
    }

    pub fn tiles(&self) -> usize {
        self.n / self.v
    }

    /// `(pi, pj)` owning tile `(ti, tj)` on every layer.
    pub fn owner(&self, ti: usize, tj: usize) -> (usize, usize) {
        (ti % self.grid.px, tj % self.grid.py)
    }

    pub fn row_owner(&self, row: usize) -> usize {
        (row / self.v) % self.grid.px
    }

    pub fn col_owner(&self, col: usize) -> usize {
        (col / self.v) % self.grid.py
    }

    /// Global rows held by process row `pi`, ascending.
    pub fn rows_of(&self, pi: usize) -> Vec<usize> {
        (0..self.n).filter(|&r| self.row_owner(r) == pi).collect()
    }

    pub fn cols_of(&self, pj: usize) -> Vec<usize> {
        (0..self.n).filter(|&c| self.col_owner(c) == pj).collect()
    }

    pub fn local_rows(&self) -> usize {
        self.n / self.grid.px
    }

    pub fn local_cols(&self) -> usize {
        self.n / self.grid.py
    }

    /// Position of a global row inside its owner's local block.
    pub fn local_row(&self, row: usize) -> usize {
        (row / self.v / self.grid.px) * self.v + row % self.v
    }

    pub fn local_col(&self, col: usize) -> usize {
        (col / self.v / self.grid.py) * self.v + col % self.v
    }

    /// Planes of the step's update applied by layer `pk`.
    pub fn slice(&self, pk: usize) -> std::ops::Range<usize> {
        chunk(self.v, self.grid.pz, pk)
    }
}

/// Part `idx` of `len` items split into `parts` nearly equal contiguous ranges.
pub fn chunk(len: usize, parts: usize, idx: usize) -> std::ops::Range<usize> {
    idx * len / parts..(idx + 1) * len / parts
}
