//! The 2.5D factorization driver shared by LU and Cholesky.
//!
//! Every outer step `t` handles block column `t` in eleven numbered steps:
//!
//! 1. reduce the block column over the layers
//! 2. pick `v` pivots (tournament for LU, local `potrf` for Cholesky)
//! 3. send `A00` and the pivot ids to every rank
//! 4. scatter the remaining panel rows (`A10`) 1D over each process row
//! 5. reduce the pivot rows (`A01`) over the layers (LU only)
//! 6. scatter `A01` 1D over each process column
//! 7. `A10 <- A10 U00^-1` locally
//! 8. send each rank the `A10` rows of its tiles restricted to its layer's planes
//! 9. `A01 <- L00^-1 A01` locally
//! 10. send each rank the `A01` planes of its layer restricted to its tile columns
//! 11. rank-`v/c` update of the local partial sums
//!
//! Pivot rows are masked, never swapped. Each step runs in its own phase so
//! the traffic can be audited.

use crate::matrix::DenseMatrix;
use crate::simnet::{spawn, Message, RankCtx, SimConfig};

use super::kernels::{potrf_in_place, split_lu, trsm, Side, Uplo};
use super::layout::{chunk, BlockCyclicLayout};
use super::tournament::tournament_pivot;
use super::{phase_id, FactorConfig, FactorError, FactorKind, FactorResult, PivotRecord};

/// Pieces of the factors produced by one rank.
#[derive(Debug, Default)]
struct RankOutput {
    /// (global row, step, `v` values of `L` in block column `step`).
    l_rows: Vec<(usize, usize, Vec<f64>)>,
    /// (step, global columns, `v x cols` values of `U`).
    u_blocks: Vec<(usize, Vec<usize>, Vec<f64>)>,
    pivots: Vec<Vec<usize>>,
    /// Packed `v x v` diagonal factors per step.
    a00: Vec<Vec<f64>>,
}

/// COnfLUX: LU factorization with tournament pivoting and row masking.
///
/// `P A = L U` where `P` is [`PivotRecord::permutation`].
pub fn conflux(a: &DenseMatrix, cfg: &FactorConfig) -> Result<FactorResult, FactorError> {
    run(a, cfg, FactorKind::Lu)
}

pub(super) fn run(a: &DenseMatrix, cfg: &FactorConfig, kind: FactorKind) -> Result<FactorResult, FactorError> {
    if !a.is_square() {
        return Err(FactorError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let lay = BlockCyclicLayout::new(cfg.grid, n, cfg.v)?;
    if kind == FactorKind::Lu && !cfg.grid.px.is_power_of_two() {
        return Err(FactorError::Divisibility(format!(
            "tournament pivoting needs Px to be a power of two, got {}",
            cfg.grid.px
        )));
    }
    let mut sim = SimConfig::new(cfg.grid, cfg.memory);
    sim.hard_memory = cfg.hard_memory;
    sim.collective = cfg.collective;
    if cfg.threads.is_some() {
        sim.threads = cfg.threads;
    }
    let run = spawn(&sim, |ctx| rank_program(ctx, a, &lay, kind))?;
    let out0 = &run.results[0];
    let pivots = PivotRecord { n, steps: out0.pivots.clone() };
    let perm = pivots.permutation();
    let mut pos = vec![0; n];
    for (i, &r) in perm.iter().enumerate() {
        pos[r] = i;
    }
    let v = lay.v;
    let mut l = match kind {
        FactorKind::Lu => DenseMatrix::identity(n),
        FactorKind::Cholesky => DenseMatrix::zeros(n, n),
    };
    let mut u = DenseMatrix::zeros(n, n);
    for (t, packed) in out0.a00.iter().enumerate() {
        let d = DenseMatrix::from_vec(v, v, packed.clone()).map_err(|_| FactorError::Singular { column: t * v })?;
        let (l00, u00) = split_lu(&d);
        for i in 0..v {
            for j in 0..v {
                match kind {
                    FactorKind::Lu => {
                        if j < i {
                            l[(t * v + i, t * v + j)] = l00[(i, j)];
                        } else {
                            u[(t * v + i, t * v + j)] = u00[(i, j)];
                        }
                    }
                    FactorKind::Cholesky => {
                        if j <= i {
                            l[(t * v + i, t * v + j)] = d[(i, j)];
                        }
                    }
                }
            }
        }
    }
    for out in &run.results {
        for (row, t, vals) in &out.l_rows {
            l.row_mut(pos[*row])[t * v..(t + 1) * v].copy_from_slice(vals);
        }
        if kind == FactorKind::Lu {
            for (t, cols, vals) in &out.u_blocks {
                for k in 0..v {
                    for (ci, &c) in cols.iter().enumerate() {
                        u[(t * v + k, c)] = vals[k * cols.len() + ci];
                    }
                }
            }
        }
    }
    let norm = a.frobenius().max(f64::MIN_POSITIVE);
    let (u, residual) = match kind {
        FactorKind::Lu => {
            let r = a.permute_rows(&perm).sub(&l.matmul(&u)).frobenius() / norm;
            (Some(u), r)
        }
        FactorKind::Cholesky => (None, l.matmul(&l.transpose()).sub(a).frobenius() / norm),
    };
    Ok(FactorResult {
        kind,
        n,
        config: cfg.clone(),
        l,
        u,
        pivots,
        stats: run.stats,
        residual,
        over_budget: run.over_budget,
    })
}

fn rank_program(ctx: &mut RankCtx, a: &DenseMatrix, lay: &BlockCyclicLayout, kind: FactorKind) -> Result<RankOutput, FactorError> {
    let g = lay.grid;
    let (n, v) = (lay.n, lay.v);
    let (pi, pj, pk) = ctx.coords();
    let my_rows = lay.rows_of(pi);
    let my_cols = lay.cols_of(pj);
    let lc = my_cols.len();
    let mut local = vec![0.0; my_rows.len() * lc];
    if pk == 0 {
        for (li, &r) in my_rows.iter().enumerate() {
            for (lj, &c) in my_cols.iter().enumerate() {
                local[li * lc + lj] = a[(r, c)];
            }
        }
    }
    ctx.alloc(local.len())?;
    let at = |r: usize, c: usize| lay.local_row(r) * lc + lay.local_col(c);
    // ranks sharing a process row / column, in rank order
    let row_group: Vec<usize> = (0..g.pz).flat_map(|k| (0..g.py).map(move |j| (j, k))).map(|(j, k)| g.rank_of(pi, j, k)).collect();
    let col_group: Vec<usize> = (0..g.pz).flat_map(|k| (0..g.px).map(move |i| (i, k))).map(|(i, k)| g.rank_of(i, pj, k)).collect();
    let row_pos = row_group.iter().position(|&r| r == ctx.rank()).expect("member");
    let col_pos = col_group.iter().position(|&r| r == ctx.rank()).expect("member");
    let my_slice = lay.slice(pk);
    let mut mask = vec![false; n];
    let mut out = RankOutput::default();

    for t in 0..lay.tiles() {
        let col0 = t * v;
        let (pjt, pkt) = (t % g.py, t % g.pz);
        let panel_root = |i: usize| g.rank_of(i, pjt, pkt);
        let is_panel_root = pj == pjt && pk == pkt;
        let active: Vec<usize> = my_rows.iter().copied().filter(|&r| !mask[r]).collect();

        // 1. reduce the block column
        ctx.set_phase(phase_id(t, 1));
        let mut panel: Vec<f64> = Vec::new();
        if pj == pjt {
            let mut data = Vec::with_capacity(active.len() * v);
            for &r in &active {
                data.extend((0..v).map(|k| local[at(r, col0 + k)]));
            }
            let layers: Vec<usize> = (0..g.pz).map(|k| g.rank_of(pi, pjt, k)).collect();
            if let Some(sum) = ctx.reduce(panel_root(pi), &layers, phase_id(t, 1), data)? {
                panel = sum;
                ctx.alloc(panel.len())?;
            }
        }

        // 2. pivots and the diagonal block
        ctx.set_phase(phase_id(t, 2));
        let mut pivots: Vec<usize> = Vec::new();
        let mut a00: Vec<f64> = Vec::new();
        match kind {
            FactorKind::Lu => {
                if is_panel_root {
                    let group: Vec<usize> = (0..g.px).map(panel_root).collect();
                    let ids: Vec<u64> = active.iter().map(|&r| r as u64).collect();
                    let tour = tournament_pivot(ctx, &group, &ids, &panel, v, col0, phase_id(t, 2))?;
                    pivots = tour.pivots.iter().map(|&p| p as usize).collect();
                    a00 = tour.a00;
                }
            }
            FactorKind::Cholesky => {
                pivots = (col0..col0 + v).collect();
                if is_panel_root && pi == t % g.px {
                    // the diagonal block is the first v active rows of this process row
                    let block = &panel[..v * v];
                    let mut l00 = vec![0.0; v * v];
                    potrf_in_place(block, &mut l00, v, col0)?;
                    a00 = l00;
                }
            }
        }

        // 3. A00 and pivot ids to everyone
        ctx.set_phase(phase_id(t, 3));
        match kind {
            FactorKind::Lu => {
                let src = panel_root(pi);
                if is_panel_root {
                    for &dst in row_group.iter().filter(|&&r| r != src) {
                        ctx.send(dst, phase_id(t, 3), Message { data: a00.clone(), index: pivots.iter().map(|&p| p as u64).collect() })?;
                    }
                } else {
                    let m = ctx.recv_len(src, phase_id(t, 3), v * v)?;
                    a00 = m.data;
                    pivots = m.index.iter().map(|&p| p as usize).collect();
                }
            }
            FactorKind::Cholesky => {
                let root = g.rank_of(t % g.px, pjt, pkt);
                let everyone: Vec<usize> = (0..g.p()).collect();
                let m = ctx.broadcast(root, &everyone, phase_id(t, 3), Message::data(a00))?;
                if m.data.len() != v * v {
                    return Err(crate::simnet::SimError::SizeMismatch { from: root, to: ctx.rank(), tag: phase_id(t, 3), expected: v * v, got: m.data.len() }.into());
                }
                a00 = m.data;
            }
        }
        for &p in &pivots {
            mask[p] = true;
        }
        let remaining: Vec<usize> = active.iter().copied().filter(|&r| !mask[r]).collect();
        let next_cols: Vec<usize> = my_cols.iter().copied().filter(|&c| c >= col0 + v).collect();
        let a00m = DenseMatrix::from_vec(v, v, a00.clone()).map_err(|_| FactorError::Singular { column: col0 })?;

        // 4. scatter A10 over the process row
        ctx.set_phase(phase_id(t, 4));
        let gsize = row_group.len();
        if is_panel_root {
            let index_of: std::collections::HashMap<usize, usize> = active.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            for (mi, &m) in row_group.iter().enumerate() {
                let rows = &remaining[chunk(remaining.len(), gsize, mi)];
                if rows.is_empty() {
                    continue;
                }
                let mut data = Vec::with_capacity(rows.len() * v);
                for r in rows {
                    let i = index_of[r];
                    data.extend_from_slice(&panel[i * v..(i + 1) * v]);
                }
                ctx.send_data(m, phase_id(t, 4), data)?;
            }
        }
        let my_a10_rows = remaining[chunk(remaining.len(), gsize, row_pos)].to_vec();
        let a10 = if my_a10_rows.is_empty() {
            Vec::new()
        } else {
            ctx.recv_len(panel_root(pi), phase_id(t, 4), my_a10_rows.len() * v)?.data
        };

        // 5. reduce the pivot rows over the layers
        ctx.set_phase(phase_id(t, 5));
        let my_pivots: Vec<(usize, usize)> =
            pivots.iter().copied().enumerate().filter(|&(_, r)| lay.row_owner(r) == pi).collect();
        let mut pivot_rows: Vec<f64> = Vec::new();
        if kind == FactorKind::Lu && !my_pivots.is_empty() && !next_cols.is_empty() {
            let mut data = Vec::with_capacity(my_pivots.len() * next_cols.len());
            for &(_, r) in &my_pivots {
                data.extend(next_cols.iter().map(|&c| local[at(r, c)]));
            }
            let layers: Vec<usize> = (0..g.pz).map(|k| g.rank_of(pi, pj, k)).collect();
            if let Some(sum) = ctx.reduce(g.rank_of(pi, pj, pkt), &layers, phase_id(t, 5), data)? {
                pivot_rows = sum;
            }
        }

        // 6. scatter A01 over the process column
        ctx.set_phase(phase_id(t, 6));
        let hsize = col_group.len();
        let my_a01_cols = next_cols[chunk(next_cols.len(), hsize, col_pos)].to_vec();
        let mut a01 = vec![0.0; v * my_a01_cols.len()];
        match kind {
            FactorKind::Lu => {
                if pk == pkt && !my_pivots.is_empty() {
                    for (mi, &m) in col_group.iter().enumerate() {
                        let range = chunk(next_cols.len(), hsize, mi);
                        if range.is_empty() {
                            continue;
                        }
                        let mut data = Vec::with_capacity(my_pivots.len() * range.len());
                        for p in 0..my_pivots.len() {
                            data.extend_from_slice(&pivot_rows[p * next_cols.len() + range.start..p * next_cols.len() + range.end]);
                        }
                        ctx.send_data(m, phase_id(t, 6), data)?;
                    }
                }
                if !my_a01_cols.is_empty() {
                    for src_pi in 0..g.px {
                        let theirs: Vec<usize> =
                            pivots.iter().enumerate().filter(|&(_, &r)| lay.row_owner(r) == src_pi).map(|(k, _)| k).collect();
                        if theirs.is_empty() {
                            continue;
                        }
                        let w = my_a01_cols.len();
                        let m = ctx.recv_len(g.rank_of(src_pi, pj, pkt), phase_id(t, 6), theirs.len() * w)?;
                        for (p, &k) in theirs.iter().enumerate() {
                            a01[k * w..(k + 1) * w].copy_from_slice(&m.data[p * w..(p + 1) * w]);
                        }
                    }
                }
            }
            FactorKind::Cholesky => {
                // A01 is the transpose of the panel rows below the diagonal block
                if is_panel_root {
                    let index_of: std::collections::HashMap<usize, usize> =
                        active.iter().enumerate().map(|(i, &r)| (r, i)).collect();
                    for dst in 0..g.p() {
                        let mine: Vec<usize> = chol_a01_cols(lay, col0, dst)
                            .into_iter().filter(|&c| lay.row_owner(c) == pi).collect();
                        if mine.is_empty() {
                            continue;
                        }
                        let mut data = Vec::with_capacity(mine.len() * v);
                        for c in &mine {
                            let i = index_of[c];
                            data.extend_from_slice(&panel[i * v..(i + 1) * v]);
                        }
                        ctx.send_data(dst, phase_id(t, 6), data)?;
                    }
                }
                let w = my_a01_cols.len();
                for src_pi in 0..g.px {
                    let from: Vec<usize> = (0..w).filter(|&ci| lay.row_owner(my_a01_cols[ci]) == src_pi).collect();
                    if from.is_empty() {
                        continue;
                    }
                    let m = ctx.recv_len(panel_root(src_pi), phase_id(t, 6), from.len() * v)?;
                    for (p, &ci) in from.iter().enumerate() {
                        for k in 0..v {
                            a01[k * w + ci] = m.data[p * v + k];
                        }
                    }
                }
            }
        }
        if is_panel_root {
            ctx.release(panel.len());
        }

        // 7. A10 <- A10 U00^-1  (LU)  or  A10 L00^-T  (Cholesky)
        ctx.set_phase(phase_id(t, 7));
        let l10 = if my_a10_rows.is_empty() {
            Vec::new()
        } else {
            let b = DenseMatrix::from_vec(my_a10_rows.len(), v, a10).map_err(|_| FactorError::Singular { column: col0 })?;
            let x = match kind {
                FactorKind::Lu => trsm(&a00m, &b, Side::Right, Uplo::Upper, false, false),
                FactorKind::Cholesky => trsm(&a00m, &b, Side::Right, Uplo::Lower, true, false),
            };
            x.as_slice().to_vec()
        };
        for (i, &r) in my_a10_rows.iter().enumerate() {
            out.l_rows.push((r, t, l10[i * v..(i + 1) * v].to_vec()));
        }

        // 8. A10 planes for the update, within the process row
        ctx.set_phase(phase_id(t, 8));
        if !my_a10_rows.is_empty() {
            for &m in &row_group {
                let s = lay.slice(g.coords(m).2);
                if s.is_empty() {
                    continue;
                }
                let mut data = Vec::with_capacity(my_a10_rows.len() * s.len());
                for i in 0..my_a10_rows.len() {
                    data.extend_from_slice(&l10[i * v + s.start..i * v + s.end]);
                }
                ctx.send_data(m, phase_id(t, 8), data)?;
            }
        }
        let sw = my_slice.len();
        let mut l_slice = vec![0.0; remaining.len() * sw];
        ctx.alloc(l_slice.len())?;
        if sw > 0 {
            for (mi, &m) in row_group.iter().enumerate() {
                let range = chunk(remaining.len(), gsize, mi);
                if range.is_empty() {
                    continue;
                }
                let msg = ctx.recv_len(m, phase_id(t, 8), range.len() * sw)?;
                l_slice[range.start * sw..range.end * sw].copy_from_slice(&msg.data);
            }
        }

        // 9. A01 <- L00^-1 A01
        ctx.set_phase(phase_id(t, 9));
        let u01 = if my_a01_cols.is_empty() {
            Vec::new()
        } else {
            let b = DenseMatrix::from_vec(v, my_a01_cols.len(), a01).map_err(|_| FactorError::Singular { column: col0 })?;
            let x = match kind {
                FactorKind::Lu => trsm(&a00m, &b, Side::Left, Uplo::Lower, false, true),
                FactorKind::Cholesky => trsm(&a00m, &b, Side::Left, Uplo::Lower, false, false),
            };
            x.as_slice().to_vec()
        };
        if !my_a01_cols.is_empty() {
            out.u_blocks.push((t, my_a01_cols.clone(), u01.clone()));
        }

        // 10. A01 planes for the update, within the process column
        ctx.set_phase(phase_id(t, 10));
        let w = my_a01_cols.len();
        if w > 0 {
            for &m in &col_group {
                let s = lay.slice(g.coords(m).2);
                if s.is_empty() {
                    continue;
                }
                ctx.send_data(m, phase_id(t, 10), u01[s.start * w..s.end * w].to_vec())?;
            }
        }
        let nc = next_cols.len();
        let mut u_slice = vec![0.0; sw * nc];
        ctx.alloc(u_slice.len())?;
        if sw > 0 {
            for (mi, &m) in col_group.iter().enumerate() {
                let range = chunk(nc, hsize, mi);
                if range.is_empty() {
                    continue;
                }
                let msg = ctx.recv_len(m, phase_id(t, 10), sw * range.len())?;
                for k in 0..sw {
                    u_slice[k * nc + range.start..k * nc + range.end]
                        .copy_from_slice(&msg.data[k * range.len()..(k + 1) * range.len()]);
                }
            }
        }

        // 11. local update of this layer's partial sums
        ctx.set_phase(phase_id(t, 11));
        if sw > 0 {
            for (ri, &r) in remaining.iter().enumerate() {
                let lrow = &l_slice[ri * sw..(ri + 1) * sw];
                let base = lay.local_row(r) * lc;
                for (ci, &c) in next_cols.iter().enumerate() {
                    if kind == FactorKind::Cholesky && c > r {
                        continue;
                    }
                    let mut s = 0.0;
                    for k in 0..sw {
                        s += lrow[k] * u_slice[k * nc + ci];
                    }
                    local[base + lay.local_col(c)] -= s;
                }
            }
        }
        ctx.release(l_slice.len() + u_slice.len());
        out.pivots.push(pivots);
        out.a00.push(a00);
    }
    Ok(out)
}

/// `A01` columns that rank `rank` owns in step 6.
fn chol_a01_cols(lay: &BlockCyclicLayout, col0: usize, rank: usize) -> Vec<usize> {
    let g = lay.grid;
    let (pi, pj, pk) = g.coords(rank);
    let next: Vec<usize> = lay.cols_of(pj).into_iter().filter(|&c| c >= col0 + lay.v).collect();
    let pos = pk * g.px + pi;
    next[chunk(next.len(), g.px * g.pz, pos)].to_vec()
}
