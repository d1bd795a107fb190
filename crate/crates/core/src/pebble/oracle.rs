use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::hash::{BuildHasherDefault, Hasher};

use super::{input_owners, GameMode, Move, Schedule};
use crate::daap::Cdag;

/// Hard limits for the exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCaps {
    pub max_vertices: usize,
    pub max_memory: usize,
    pub max_procs: usize,
    pub max_states: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps { max_vertices: 14, max_memory: 5, max_procs: 4, max_states: 20_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// An input parameter exceeds its cap.
    AboveCap { what: &'static str, value: usize, cap: usize },
    /// The search visited more states than allowed.
    StateBudget { explored: usize },
    /// No legal complete schedule exists (for example `M` below in-degree + 1).
    Infeasible,
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::AboveCap { what, value, cap } => {
                write!(f, "refusing exhaustive search: {what} = {value} exceeds cap {cap}")
            }
            OracleError::StateBudget { explored } => {
                write!(f, "exhaustive search stopped after {explored} states")
            }
            OracleError::Infeasible => write!(f, "no legal schedule finishes all outputs"),
        }
    }
}

impl std::error::Error for OracleError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    /// Minimum total I/O over all legal schedules.
    pub q: u64,
    /// A schedule achieving `q`.
    pub witness: Schedule,
    pub states_explored: usize,
}

#[derive(Default)]
struct MixHasher(u64);

impl Hasher for MixHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u64(b as u64);
        }
    }

    fn write_u64(&mut self, x: u64) {
        let mut z = (self.0 ^ x).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        self.0 = z ^ (z >> 31);
    }
}

type StateMap<V> = HashMap<u64, V, BuildHasherDefault<MixHasher>>;

/// Exact minimum I/O for pebbling `cdag` with `m` pebbles per rank, found by
/// Dijkstra over game states. States are canonical bitsets, so the memo key
/// is the full pebble configuration.
///
/// In parallel mode the objective is the total charged I/O over all ranks.
pub fn brute_force_optimal_q(cdag: &Cdag, m: usize, mode: GameMode, caps: OracleCaps) -> Result<OracleResult, OracleError> {
    let n = cdag.len();
    let procs = mode.procs();
    for (what, value, cap) in [
        ("vertices", n, caps.max_vertices),
        ("memory", m, caps.max_memory),
        ("ranks", procs, caps.max_procs),
    ] {
        if value > cap {
            return Err(OracleError::AboveCap { what, value, cap });
        }
    }
    if procs * n > 64 || (mode == GameMode::Sequential && 2 * n > 64) {
        return Err(OracleError::AboveCap { what: "state bits", value: procs * n, cap: 64 });
    }
    if cdag.computes().iter().any(|&v| cdag.preds(v).len() + 1 > m) {
        return Err(OracleError::Infeasible);
    }
    let pred_mask: Vec<u64> = (0..n).map(|v| cdag.preds(v).iter().fold(0, |acc, &p| acc | 1 << p)).collect();
    let input_mask: u64 = cdag.inputs().iter().fold(0, |acc, &v| acc | 1 << v);
    let output_mask: u64 = cdag.outputs().iter().fold(0, |acc, &v| acc | 1 << v);
    let full: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
    let space = Space { n, m, pred_mask, input_mask, output_mask, full };

    match mode {
        GameMode::Sequential => {
            let start = input_mask << n;
            search(start, caps.max_states, |s| space.seq_goal(s), |s, out| space.seq_moves(s, out))
        }
        GameMode::Parallel { procs, charge_sender } => {
            let owners = input_owners(cdag, procs);
            let mut start = 0u64;
            for (v, owner) in owners.iter().enumerate() {
                if let Some(p) = owner {
                    start |= 1 << (p * n + v);
                }
            }
            if (0..procs).any(|p| space.rank(start, p).count_ones() as usize > m) {
                return Err(OracleError::Infeasible);
            }
            search(
                start,
                caps.max_states,
                |s| space.par_goal(s, procs),
                |s, out| space.par_moves(s, procs, charge_sender, out),
            )
        }
    }
}

struct Space {
    n: usize,
    m: usize,
    pred_mask: Vec<u64>,
    input_mask: u64,
    output_mask: u64,
    full: u64,
}

impl Space {
    fn rank(&self, s: u64, p: usize) -> u64 {
        (s >> (p * self.n)) & self.full
    }

    fn seq_goal(&self, s: u64) -> bool {
        let blue = s >> self.n;
        blue & self.output_mask == self.output_mask
    }

    /// Successors in order compute, evict, load, store.
    fn seq_moves(&self, s: u64, out: &mut Vec<(u64, u32, Move)>) {
        let n = self.n;
        let red = s & self.full;
        let blue = s >> n;
        let room = (red.count_ones() as usize) < self.m;
        for v in 0..n {
            let bit = 1u64 << v;
            if red & bit == 0 && self.input_mask & bit == 0 && room && red & self.pred_mask[v] == self.pred_mask[v] {
                out.push((s | bit, 0, Move::Compute { v, rank: 0 }));
            }
        }
        for v in 0..n {
            let bit = 1u64 << v;
            if red & bit != 0 {
                out.push((s & !bit, 0, Move::Evict { v, rank: 0 }));
            }
        }
        for v in 0..n {
            let bit = 1u64 << v;
            if room && red & bit == 0 && blue & bit != 0 {
                out.push((s | bit, 1, Move::Load(v)));
            }
        }
        for v in 0..n {
            let bit = 1u64 << v;
            if red & bit != 0 && blue & bit == 0 {
                out.push((s | bit << n, 1, Move::Store(v)));
            }
        }
    }

    fn par_goal(&self, s: u64, procs: usize) -> bool {
        let any = (0..procs).fold(0, |acc, p| acc | self.rank(s, p));
        any & self.output_mask == self.output_mask
    }

    fn par_moves(&self, s: u64, procs: usize, charge_sender: bool, out: &mut Vec<(u64, u32, Move)>) {
        let n = self.n;
        let reds: Vec<u64> = (0..procs).map(|p| self.rank(s, p)).collect();
        for (p, &red) in reds.iter().enumerate() {
            let room = (red.count_ones() as usize) < self.m;
            let others = reds.iter().enumerate().filter(|&(q, _)| q != p).fold(0, |acc, (_, &r)| acc | r);
            for v in 0..n {
                let bit = 1u64 << v;
                let shifted = bit << (p * n);
                if red & bit == 0 && room {
                    if self.input_mask & bit == 0 && red & self.pred_mask[v] == self.pred_mask[v] {
                        out.push((s | shifted, 0, Move::Compute { v, rank: p }));
                    }
                    if others & bit != 0 {
                        let cost = if charge_sender { 2 } else { 1 };
                        out.push((s | shifted, cost, Move::Acquire { v, rank: p }));
                    }
                }
                if red & bit != 0 {
                    out.push((s & !shifted, 0, Move::Evict { v, rank: p }));
                }
            }
        }
    }
}

fn search(
    start: u64,
    max_states: usize,
    goal: impl Fn(u64) -> bool,
    moves: impl Fn(u64, &mut Vec<(u64, u32, Move)>),
) -> Result<OracleResult, OracleError> {
    let mut dist: StateMap<u32> = StateMap::default();
    let mut parent: StateMap<(u64, Move)> = StateMap::default();
    let mut heap = BinaryHeap::new();
    dist.insert(start, 0);
    heap.push(Reverse((0u32, start)));
    let mut buf = Vec::new();
    let mut explored = 0usize;
    while let Some(Reverse((d, s))) = heap.pop() {
        if dist.get(&s).is_some_and(|&best| best < d) {
            continue;
        }
        explored += 1;
        if goal(s) {
            let mut witness = Vec::new();
            let mut cur = s;
            while let Some(&(prev, mv)) = parent.get(&cur) {
                witness.push(mv);
                cur = prev;
            }
            witness.reverse();
            return Ok(OracleResult { q: d as u64, witness, states_explored: explored });
        }
        if dist.len() > max_states {
            return Err(OracleError::StateBudget { explored });
        }
        buf.clear();
        moves(s, &mut buf);
        for &(next, cost, mv) in &buf {
            let nd = d + cost;
            if dist.get(&next).is_none_or(|&old| nd < old) {
                dist.insert(next, nd);
                parent.insert(next, (s, mv));
                heap.push(Reverse((nd, next)));
            }
        }
    }
    Err(OracleError::Infeasible)
}

/// A simple legal sequential schedule: computes vertices in topological order,
/// evicting the least recently used vertex that the next compute does not
/// need and storing it first if it is still live.
pub fn greedy_schedule(cdag: &Cdag, m: usize) -> Result<Schedule, OracleError> {
    if cdag.computes().iter().any(|&v| cdag.preds(v).len() + 1 > m) {
        return Err(OracleError::Infeasible);
    }
    let n = cdag.len();
    let order = cdag.topo_order().expect("Cdag is acyclic");
    let mut uses: Vec<usize> = (0..n).map(|v| cdag.succs(v).len()).collect();
    let mut blue: Vec<bool> = (0..n).map(|v| cdag.is_input(v)).collect();
    let mut red: Vec<usize> = Vec::new();
    let mut last_use = vec![0usize; n];
    let mut clock = 0usize;
    let mut schedule = Vec::new();

    let make_room = |red: &mut Vec<usize>,
                         blue: &mut Vec<bool>,
                         schedule: &mut Schedule,
                         uses: &[usize],
                         last_use: &[usize],
                         keep: &[usize]| {
        if red.len() < m {
            return;
        }
        let candidates = red.iter().copied().filter(|v| !keep.contains(v));
        let dead = |v: usize| uses[v] == 0 && (blue[v] || !cdag.is_output(v));
        let victim = candidates
            .min_by_key(|&v| (!dead(v), last_use[v], v))
            .expect("M exceeds the in-degree, so something is evictable");
        if !blue[victim] && (uses[victim] > 0 || cdag.is_output(victim)) {
            schedule.push(Move::Store(victim));
            blue[victim] = true;
        }
        schedule.push(Move::Evict { v: victim, rank: 0 });
        red.retain(|&x| x != victim);
    };

    for v in order.into_iter().filter(|&v| !cdag.is_input(v)) {
        let mut keep: Vec<usize> = cdag.preds(v).to_vec();
        keep.push(v);
        for &p in cdag.preds(v) {
            clock += 1;
            last_use[p] = clock;
            if !red.contains(&p) {
                make_room(&mut red, &mut blue, &mut schedule, &uses, &last_use, &keep);
                schedule.push(Move::Load(p));
                red.push(p);
            }
        }
        make_room(&mut red, &mut blue, &mut schedule, &uses, &last_use, &keep);
        schedule.push(Move::Compute { v, rank: 0 });
        red.push(v);
        clock += 1;
        last_use[v] = clock;
        for &p in cdag.preds(v) {
            uses[p] -= 1;
        }
    }
    for v in cdag.outputs() {
        if !blue[v] {
            schedule.push(Move::Store(v));
            blue[v] = true;
        }
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daap::{build_cdag, builtin, parse_daap};
    use crate::pebble::run_schedule;

    #[test]
    fn single_compute_costs_two() {
        let g = Cdag::from_edges(2, &[(0, 1)]).unwrap();
        let r = brute_force_optimal_q(&g, 2, GameMode::Sequential, OracleCaps::default()).unwrap();
        assert_eq!(r.q, 2);
        assert_eq!(run_schedule(&g, &r.witness, 2, GameMode::Sequential).unwrap().total(), 2);
    }

    #[test]
    fn caps_are_enforced() {
        let g = Cdag::from_edges(15, &[]).unwrap();
        assert_eq!(
            brute_force_optimal_q(&g, 2, GameMode::Sequential, OracleCaps::default()),
            Err(OracleError::AboveCap { what: "vertices", value: 15, cap: 14 })
        );
        let g = Cdag::from_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(
            brute_force_optimal_q(&g, 6, GameMode::Sequential, OracleCaps::default()),
            Err(OracleError::AboveCap { what: "memory", .. })
        ));
        assert_eq!(
            brute_force_optimal_q(&g, 1, GameMode::Sequential, OracleCaps::default()),
            Err(OracleError::Infeasible)
        );
    }

    #[test]
    fn forced_io_is_achieved() {
        // a -> b, b feeds c and d, d also reads e
        let g = Cdag::from_edges(5, &[(0, 1), (1, 2), (1, 3), (4, 3)]).unwrap();
        let r = brute_force_optimal_q(&g, 3, GameMode::Sequential, OracleCaps::default()).unwrap();
        // loads of a and e plus stores of c and d are unavoidable
        assert_eq!(r.q, 4);
    }

    #[test]
    fn greedy_is_legal_and_not_better_than_optimal() {
        let prog = parse_daap(builtin::LU).unwrap();
        let g = build_cdag(&prog, 3).unwrap();
        for m in 4..=5 {
            let greedy = greedy_schedule(&g, m).unwrap();
            let q = run_schedule(&g, &greedy, m, GameMode::Sequential).unwrap().total();
            let opt = brute_force_optimal_q(&g, m, GameMode::Sequential, OracleCaps::default()).unwrap();
            assert!(q >= opt.q, "m={m}: greedy {q} < optimum {}", opt.q);
        }
        let big = greedy_schedule(&g, 6).unwrap();
        assert!(run_schedule(&g, &big, 6, GameMode::Sequential).is_ok());
    }

    #[test]
    fn parallel_oracle_on_shared_input() {
        // inputs 0,1 (owned by ranks 0,1) both feed 2 and 3
        let g = Cdag::from_edges(4, &[(0, 2), (1, 2), (0, 3), (1, 3)]).unwrap();
        let r = brute_force_optimal_q(&g, 4, GameMode::parallel(2), OracleCaps::default()).unwrap();
        assert_eq!(r.q, 1);
        let io = run_schedule(&g, &r.witness, 4, GameMode::parallel(2)).unwrap();
        assert_eq!(io.total(), 1);
        // with three pebbles one rank cannot hold both inputs and both outputs
        let tight = brute_force_optimal_q(&g, 3, GameMode::parallel(2), OracleCaps::default()).unwrap();
        assert_eq!(tight.q, 2);
        let one = brute_force_optimal_q(&g, 4, GameMode::parallel(1), OracleCaps::default()).unwrap();
        assert_eq!(one.q, 0);
    }
}
