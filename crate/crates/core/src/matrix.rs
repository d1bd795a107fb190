//! Dense row-major matrices and their binary file format.
//!
//! The file format is two little-endian `u64` values (rows, cols) followed
//! by `rows * cols` little-endian `f64` values in row-major order.

use std::fmt;
use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug)]
pub enum MatrixError {
    NonFinite { row: usize, col: usize },
    Shape { expected: (usize, usize), got: (usize, usize) },
    Io(io::Error),
    Truncated { expected: usize, got: usize },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::NonFinite { row, col } => write!(f, "entry ({row}, {col}) is not finite"),
            MatrixError::Shape { expected, got } => {
                write!(f, "expected a {}x{} matrix, got {}x{}", expected.0, expected.1, got.0, got.1)
            }
            MatrixError::Io(e) => write!(f, "matrix I/O: {e}"),
            MatrixError::Truncated { expected, got } => {
                write!(f, "matrix file holds {got} values, header promises {expected}")
            }
        }
    }
}

impl std::error::Error for MatrixError {}

impl From<io::Error> for MatrixError {
    fn from(e: io::Error) -> Self {
        MatrixError::Io(e)
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Rejects non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::Truncated { expected: rows * cols, got: data.len() });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(MatrixError::Shape { expected: (rows.len(), cols), got: (rows.len(), bad.len()) });
        }
        DenseMatrix::from_vec(rows.len(), cols, rows.concat())
    }

    /// Entries uniform in [-1, 1).
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix { rows, cols, data }
    }

    /// `B Bᵀ + n I` for a random `B`: symmetric positive definite and well conditioned.
    pub fn random_spd(n: usize, seed: u64) -> Self {
        let b = DenseMatrix::random(n, n, seed);
        let mut a = b.matmul(&b.transpose());
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        a
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut c = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let (crow, brow) = (i * c.cols, k * other.cols);
                for j in 0..other.cols {
                    c.data[crow + j] += a * other.data[brow + j];
                }
            }
        }
        c
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> DenseMatrix {
        assert_eq!(perm.len(), self.rows);
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(p));
        }
        out
    }

    /// Square matrix of size `n` with `self` in the top-left corner and an
    /// identity border.
    pub fn pad_identity(&self, n: usize) -> DenseMatrix {
        assert!(n >= self.rows && n >= self.cols);
        let mut out = DenseMatrix::identity(n);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
        }
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), MatrixError> {
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, MatrixError> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let cols = u64::from_le_bytes(word) as usize;
        let expected = rows.checked_mul(cols).ok_or(MatrixError::Truncated { expected: usize::MAX, got: 0 })?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != expected * 8 {
            return Err(MatrixError::Truncated { expected, got: bytes.len() / 8 });
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        DenseMatrix::from_vec(rows, cols, data)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let a = DenseMatrix::random(3, 5, 11);
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 15 * 8);
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        let b = DenseMatrix::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            DenseMatrix::read_from(&mut &buf[..buf.len() - 8]),
            Err(MatrixError::Truncated { expected: 15, got: 14 })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            DenseMatrix::from_vec(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]),
            Err(MatrixError::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        assert_eq!(DenseMatrix::random(4, 4, 1), DenseMatrix::random(4, 4, 1));
        assert_ne!(DenseMatrix::random(4, 4, 1), DenseMatrix::random(4, 4, 2));
        let s = DenseMatrix::random_spd(6, 3);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn padding_keeps_the_block() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let p = a.pad_identity(4);
        assert_eq!(p[(0, 1)], 1.0);
        assert_eq!(p[(1, 1)], 3.0);
        assert_eq!(p[(2, 2)], 1.0);
        assert_eq!(p[(3, 0)], 0.0);
    }
}
