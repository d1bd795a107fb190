#![allow(dead_code)]

use confluxlab::matrix::DenseMatrix;

/// Right-looking elimination with row masking: pivot on the largest unmasked
/// entry of each column (lowest row on ties), never swap.
pub fn masked_gepp(a: &DenseMatrix) -> (Vec<usize>, DenseMatrix, DenseMatrix) {
    let n = a.rows();
    let mut w: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut used = vec![false; n];
    let mut perm = Vec::new();
    let mut l = DenseMatrix::identity(n);
    let mut u = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let mut best: Option<usize> = None;
        for r in 0..n {
            if !used[r] && best.is_none_or(|b| w[r][k].abs() > w[b][k].abs()) {
                best = Some(r);
            }
        }
        let p = best.unwrap();
        used[p] = true;
        perm.push(p);
        for c in k..n {
            u[(k, c)] = w[p][c];
        }
        for r in 0..n {
            if !used[r] {
                let f = w[r][k] / w[p][k];
                w[r][k] = f;
                for c in k + 1..n {
                    w[r][c] -= f * w[p][c];
                }
            }
        }
    }
    let pos: Vec<usize> = {
        let mut pos = vec![0; n];
        for (i, &r) in perm.iter().enumerate() {
            pos[r] = i;
        }
        pos
    };
    for r in 0..n {
        for k in 0..pos[r] {
            l[(pos[r], k)] = w[r][k];
        }
    }
    (perm, l, u)
}

/// Elementwise agreement, relative for entries above one.
pub fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
}
