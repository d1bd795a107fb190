//! Sequential reference kernels: plain loops, no external BLAS.

use crate::matrix::DenseMatrix;

use super::FactorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve `op(T) X = B`.
    Left,
    /// Solve `X op(T) = B`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uplo {
    Lower,
    Upper,
}

/// `P A = L U` with `perm[i]` the row of `A` placed at position `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    pub l: DenseMatrix,
    pub u: DenseMatrix,
    pub perm: Vec<usize>,
}

impl LuFactors {
    /// `‖P A − L U‖_F / ‖A‖_F`.
    pub fn relative_residual(&self, a: &DenseMatrix) -> f64 {
        let pa = a.permute_rows(&self.perm);
        pa.sub(&self.l.matmul(&self.u)).frobenius() / a.frobenius().max(f64::MIN_POSITIVE)
    }
}

/// Index of the largest magnitude; ties go to the smallest key.
pub fn argmax_abs(values: impl Iterator<Item = (usize, f64)>, key: impl Fn(usize) -> u64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in values {
        let a = x.abs();
        best = match best {
            Some((b, bx)) if bx > a || (bx == a && key(b) <= key(i)) => Some((b, bx)),
            _ => Some((i, a)),
        };
    }
    best.map(|(i, _)| i)
}

/// LU with partial pivoting (row swaps), ties broken toward the lower row index.
pub fn getrf_seq(a: &DenseMatrix) -> Result<LuFactors, FactorError> {
    if !a.is_square() {
        return Err(FactorError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = argmax_abs((k..n).map(|i| (i, w[(i, k)])), |i| perm[i] as u64).expect("nonempty");
        if w[(p, k)] == 0.0 {
            return Err(FactorError::Singular { column: k });
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                let t = w[(p, j)];
                w[(p, j)] = w[(k, j)];
                w[(k, j)] = t;
            }
        }
        let d = w[(k, k)];
        for i in k + 1..n {
            let f = w[(i, k)] / d;
            w[(i, k)] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    w[(i, j)] -= f * w[(k, j)];
                }
            }
        }
    }
    let (l, u) = split_lu(&w);
    Ok(LuFactors { l, u, perm })
}

/// Splits packed factors into unit-lower `L` and upper `U`.
pub fn split_lu(w: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = w.rows();
    let mut l = DenseMatrix::identity(n);
    let mut u = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if j < i {
                l[(i, j)] = w[(i, j)];
            } else {
                u[(i, j)] = w[(i, j)];
            }
        }
    }
    (l, u)
}

/// Cholesky factor `L` with `A = L Lᵀ`; only the lower triangle of `A` is read.
pub fn potrf_seq(a: &DenseMatrix) -> Result<DenseMatrix, FactorError> {
    if !a.is_square() {
        return Err(FactorError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    potrf_in_place(a.as_slice(), l.as_mut_slice(), n, 0)?;
    Ok(l)
}

/// Cholesky of the `n x n` row-major block `a` into `l`. `offset` shifts the
/// column reported on failure.
pub(crate) fn potrf_in_place(a: &[f64], l: &mut [f64], n: usize, offset: usize) -> Result<(), FactorError> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return Err(FactorError::NotSpd { column: offset + j });
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Triangular solve. `trans` uses `Tᵀ`; `unit` assumes a unit diagonal.
pub fn trsm(t: &DenseMatrix, b: &DenseMatrix, side: Side, uplo: Uplo, trans: bool, unit: bool) -> DenseMatrix {
    let n = t.rows();
    assert!(t.is_square());
    match side {
        Side::Left => assert_eq!(b.rows(), n),
        Side::Right => assert_eq!(b.cols(), n),
    }
    let mut x = b.clone();
    // effective triangle of op(T)
    let lower = (uplo == Uplo::Lower) != trans;
    let op = |i: usize, j: usize| if trans { t[(j, i)] } else { t[(i, j)] };
    match side {
        Side::Left => {
            let order: Vec<usize> = if lower { (0..n).collect() } else { (0..n).rev().collect() };
            for (pos, &i) in order.iter().enumerate() {
                for &k in &order[..pos] {
                    let f = op(i, k);
                    if f != 0.0 {
                        for c in 0..x.cols() {
                            let v = x[(k, c)];
                            x[(i, c)] -= f * v;
                        }
                    }
                }
                if !unit {
                    let d = op(i, i);
                    for c in 0..x.cols() {
                        x[(i, c)] /= d;
                    }
                }
            }
        }
        Side::Right => {
            // X op(T) = B, column j of X depends on columns solved before it
            let order: Vec<usize> = if lower { (0..n).rev().collect() } else { (0..n).collect() };
            for (pos, &j) in order.iter().enumerate() {
                for &k in &order[..pos] {
                    let f = op(k, j);
                    if f != 0.0 {
                        for r in 0..x.rows() {
                            let v = x[(r, k)];
                            x[(r, j)] -= f * v;
                        }
                    }
                }
                if !unit {
                    let d = op(j, j);
                    for r in 0..x.rows() {
                        x[(r, j)] /= d;
                    }
                }
            }
        }
    }
    x
}

/// `alpha A B + beta C`.
pub fn gemm(alpha: f64, a: &DenseMatrix, b: &DenseMatrix, beta: f64, c: &DenseMatrix) -> DenseMatrix {
    assert_eq!((a.rows(), b.cols()), (c.rows(), c.cols()));
    let ab = a.matmul(b);
    let mut out = c.clone();
    for (o, x) in out.as_mut_slice().iter_mut().zip(ab.as_slice()) {
        *o = alpha * x + beta * *o;
    }
    out
}

/// Like [`gemm`] but only the lower triangle (diagonal included) of the
/// square result is updated; the strict upper triangle of `C` is copied.
pub fn gemmt(alpha: f64, a: &DenseMatrix, b: &DenseMatrix, beta: f64, c: &DenseMatrix) -> DenseMatrix {
    assert!(c.is_square());
    assert_eq!((a.rows(), b.cols(), a.cols()), (c.rows(), c.cols(), b.rows()));
    let mut out = c.clone();
    for i in 0..c.rows() {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = alpha * s + beta * c[(i, j)];
        }
    }
    out
}

/// Gaussian elimination with partial pivoting on a tall `m x v` row-major
/// block, used to pick pivot rows. Rows are identified by `ids`; ties in
/// magnitude go to the smallest id. Returns the chosen row positions in
/// pivot order (at most `v`) and the block after elimination, where the
/// chosen rows hold `U` and the others hold their `L` multipliers.
pub(crate) fn panel_lup(block: &[f64], m: usize, v: usize, ids: &[u64]) -> (Vec<usize>, Vec<f64>) {
    let mut w = block.to_vec();
    let mut chosen: Vec<usize> = Vec::with_capacity(v);
    let mut used = vec![false; m];
    for k in 0..v.min(m) {
        let candidates = (0..m).filter(|&i| !used[i]).map(|i| (i, w[i * v + k]));
        let p = argmax_abs(candidates, |i| ids[i]).expect("rows remain");
        used[p] = true;
        chosen.push(p);
        let d = w[p * v + k];
        if d == 0.0 {
            continue;
        }
        for i in (0..m).filter(|&i| !used[i]) {
            let f = w[i * v + k] / d;
            w[i * v + k] = f;
            for j in k + 1..v {
                w[i * v + j] -= f * w[p * v + j];
            }
        }
    }
    (chosen, w)
}
