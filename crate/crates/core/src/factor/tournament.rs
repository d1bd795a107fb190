//! Tournament pivoting with a butterfly exchange.
//!
//! Each member selects `v` local candidates by partial pivoting on its rows
//! of the panel, then in round `r` swaps its `v x v` candidate block with
//! the member whose group position differs in bit `r`. Both sides run
//! partial pivoting on the `2v` stacked rows (lower position first) and keep
//! the winners, so after `log2(group size)` rounds every member holds the
//! same pivots and the factored `A00`.

use crate::simnet::{Message, RankCtx};

use super::kernels::panel_lup;
use super::FactorError;

/// Marks padding rows of ranks with fewer than `v` candidates.
pub const PAD_ROW: u64 = u64::MAX;

/// Outcome of a tournament.
#[derive(Debug, Clone, PartialEq)]
pub struct Tournament {
    /// Global row ids in pivot order.
    pub pivots: Vec<u64>,
    /// `v x v` row-major packed `L00` (strictly lower, unit diagonal implied) and `U00`.
    pub a00: Vec<f64>,
    pub rounds: usize,
}

/// Picks `v` candidate rows out of `rows` (ids) and `panel` (`rows.len() x v`
/// row-major); returns candidate ids and their original panel rows, padded
/// to exactly `v` rows, plus the factored block of the chosen rows.
pub fn select(rows: &[u64], panel: &[f64], v: usize) -> (Vec<u64>, Vec<f64>, Vec<f64>) {
    let m = rows.len();
    let (chosen, w) = panel_lup(panel, m, v, rows);
    let mut ids = Vec::with_capacity(v);
    let mut block = Vec::with_capacity(v * v);
    let mut packed = Vec::with_capacity(v * v);
    for &p in &chosen {
        ids.push(rows[p]);
        block.extend_from_slice(&panel[p * v..(p + 1) * v]);
        packed.extend_from_slice(&w[p * v..(p + 1) * v]);
    }
    while ids.len() < v {
        ids.push(PAD_ROW);
        block.extend(std::iter::repeat_n(0.0, v));
        packed.extend(std::iter::repeat_n(0.0, v));
    }
    (ids, block, packed)
}

/// Checks the packed factor for a zero pivot or padding winner.
fn validate(ids: &[u64], packed: &[f64], v: usize, col0: usize) -> Result<(), FactorError> {
    if ids.contains(&PAD_ROW) {
        return Err(FactorError::RankDeficient { step: col0 / v.max(1) });
    }
    for k in 0..v {
        if packed[k * v + k] == 0.0 {
            return Err(FactorError::Singular { column: col0 + k });
        }
    }
    Ok(())
}

/// Runs the tournament among `group` (this rank must be a member). `col0`
/// is the first global column of the panel, used in error reports.
pub fn tournament_pivot(
    ctx: &mut RankCtx,
    group: &[usize],
    rows: &[u64],
    panel: &[f64],
    v: usize,
    col0: usize,
    tag: u32,
) -> Result<Tournament, FactorError> {
    let size = group.len();
    if !size.is_power_of_two() {
        return Err(FactorError::Divisibility(format!("tournament group of {size} ranks is not a power of two")));
    }
    let me = group.iter().position(|&r| r == ctx.rank()).expect("rank belongs to the group");
    let (mut ids, mut block, mut packed) = select(rows, panel, v);
    let rounds = size.trailing_zeros() as usize;
    for r in 0..rounds {
        let partner = group[me ^ (1 << r)];
        ctx.send(partner, tag, Message { data: block.clone(), index: ids.clone() })?;
        let other = ctx.recv_len(partner, tag, v * v)?;
        let (mut all_ids, mut all_block) = (Vec::with_capacity(2 * v), Vec::with_capacity(2 * v * v));
        let mine_first = me & (1 << r) == 0;
        let (first, second) = if mine_first { ((&ids, &block), (&other.index, &other.data)) } else { ((&other.index, &other.data), (&ids, &block)) };
        all_ids.extend_from_slice(first.0);
        all_ids.extend_from_slice(second.0);
        all_block.extend_from_slice(first.1);
        all_block.extend_from_slice(second.1);
        (ids, block, packed) = select(&all_ids, &all_block, v);
    }
    validate(&ids, &packed, v, col0)?;
    Ok(Tournament { pivots: ids, a00: packed, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::{spawn, GridSpec, SimConfig};

    #[test]
    fn single_member_uses_local_choice() {
        let cfg = SimConfig::new(GridSpec::new(1, 1, 1).unwrap(), 1 << 10);
        let run = spawn::<_, FactorError, _>(&cfg, |ctx| {
            let panel = [1.0, 0.0, 3.0, 1.0, 2.0, 5.0];
            tournament_pivot(ctx, &[0], &[4, 9, 2], &panel, 2, 0, 0)
        })
        .unwrap();
        let t = &run.results[0];
        assert_eq!(t.rounds, 0);
        // column 0 max is 3 (row 9); after elimination row 2: 5 - 2/3
        assert_eq!(t.pivots, vec![9, 2]);
        assert_eq!(run.stats.total_sent(), 0);
    }

    #[test]
    fn two_members_match_union_lup() {
        let a: Vec<f64> = vec![0.5, 1.0, -2.0, 0.3, 1.5, 1.5, 0.1, 0.2];
        let b: Vec<f64> = vec![2.0, 1.0, -0.5, 4.0, 1.0, 1.0, 0.0, -3.0];
        let ids_a = [0u64, 1, 2, 3];
        let ids_b = [4u64, 5, 6, 7];
        let mut cfg = SimConfig::new(GridSpec::new(2, 2, 1).unwrap(), 1 << 10);
        cfg.threads = None;
        let run = spawn::<_, FactorError, _>(&cfg, |ctx| {
            if ctx.rank() >= 2 {
                return Ok(None);
            }
            let (ids, panel) = if ctx.rank() == 0 { (&ids_a, &a) } else { (&ids_b, &b) };
            tournament_pivot(ctx, &[0, 1], ids, panel, 2, 0, 0).map(Some)
        })
        .unwrap();
        let t0 = run.results[0].clone().unwrap();
        let t1 = run.results[1].clone().unwrap();
        assert_eq!(t0, t1);
        // oracle: partial pivoting on the union of both candidate sets
        let cand = |panel: &[f64], ids: &[u64]| -> Vec<(u64, [f64; 2])> {
            let (chosen, _) = panel_lup(panel, 4, 2, ids);
            chosen.iter().map(|&c| (ids[c], [panel[2 * c], panel[2 * c + 1]])).collect()
        };
        let union: Vec<(u64, [f64; 2])> = cand(&a, &ids_a).into_iter().chain(cand(&b, &ids_b)).collect();
        let flat: Vec<f64> = union.iter().flat_map(|(_, r)| *r).collect();
        let union_ids: Vec<u64> = union.iter().map(|(i, _)| *i).collect();
        let (chosen, _) = panel_lup(&flat, 4, 2, &union_ids);
        assert_eq!(t0.pivots, chosen.iter().map(|&c| union_ids[c]).collect::<Vec<_>>());
        assert_eq!(run.stats.ranks[0].phase(0).recv_data, 4);
    }

    #[test]
    fn padding_and_rank_deficiency() {
        let (ids, block, _) = select(&[3], &[2.0, 1.0], 2);
        assert_eq!(ids, vec![3, PAD_ROW]);
        assert_eq!(block, vec![2.0, 1.0, 0.0, 0.0]);
        assert!(matches!(validate(&ids, &[2.0, 1.0, 0.0, 0.0], 2, 4), Err(FactorError::RankDeficient { step: 2 })));
        assert!(matches!(validate(&[0, 1], &[2.0, 1.0, 0.0, 0.0], 2, 4), Err(FactorError::Singular { column: 5 })));
    }
}
