//! Red-blue and parallel multi-color pebble games on a [`Cdag`].
//!
//! Sequential game: inputs start blue, at most `M` red pebbles exist at any
//! time, loads and stores cost one I/O each, and every output must end blue.
//! Parallel game: each of `P` ranks has `M` pebbles of its own color, inputs
//! start pre-placed round-robin on their owning ranks, a rank may compute a
//! vertex whose predecessors all carry its color, and may acquire any vertex
//! that carries some pebble. Every output must end pebbled by some rank.
//! Recomputation is allowed in both games; removing a pebble is free.

mod io;
mod oracle;
mod sets;

use std::fmt;

use crate::daap::Cdag;

pub use io::{parse_cdag, parse_schedule, write_cdag, write_schedule, CdagFile, FormatError};
pub use oracle::{
    brute_force_optimal_q, greedy_schedule, OracleCaps, OracleError, OracleResult,
};
pub use sets::{
    check_x_partition, dom_min, dom_min_exhaustive, dom_min_set, min_set, XPartition,
    XPartitionViolation, EXHAUSTIVE_FRONTIER_CAP,
};

/// A single pebbling move. `rank` is 0 in the sequential game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Load(usize),
    Store(usize),
    Compute { v: usize, rank: usize },
    Evict { v: usize, rank: usize },
    Acquire { v: usize, rank: usize },
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Move::Load(v) => write!(f, "load {v}"),
            Move::Store(v) => write!(f, "store {v}"),
            Move::Compute { v, rank } => write!(f, "compute {v} @{rank}"),
            Move::Evict { v, rank } => write!(f, "evict {v} @{rank}"),
            Move::Acquire { v, rank } => write!(f, "acquire {v} @{rank}"),
        }
    }
}

pub type Schedule = Vec<Move>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameMode {
    Sequential,
    Parallel {
        procs: usize,
        /// Also charge one I/O to the lowest-numbered other rank holding the
        /// vertex when a rank acquires it.
        charge_sender: bool,
    },
}

impl GameMode {
    pub fn parallel(procs: usize) -> Self {
        GameMode::Parallel { procs, charge_sender: false }
    }

    pub fn procs(&self) -> usize {
        match self {
            GameMode::Sequential => 1,
            GameMode::Parallel { procs, .. } => *procs,
        }
    }
}

/// Per-rank I/O counters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IoCounters {
    pub loads: Vec<u64>,
    pub stores: Vec<u64>,
    pub acquires: Vec<u64>,
    /// I/O charged to each rank (loads + stores sequentially; acquires, plus
    /// sends when sender charging is on, in parallel).
    pub charged: Vec<u64>,
}

impl IoCounters {
    fn new(procs: usize) -> Self {
        IoCounters {
            loads: vec![0; procs],
            stores: vec![0; procs],
            acquires: vec![0; procs],
            charged: vec![0; procs],
        }
    }

    pub fn total(&self) -> u64 {
        self.charged.iter().sum()
    }

    pub fn max_per_rank(&self) -> u64 {
        self.charged.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IllegalReason {
    RedBudgetExceeded,
    MissingPredecessor(usize),
    NotBlue,
    NotRed,
    AlreadyBlue,
    ComputeOnInput,
    NoPebbleToAcquire,
    WrongMode,
    UnknownVertex,
    UnknownRank,
}

impl fmt::Display for IllegalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IllegalReason::RedBudgetExceeded => write!(f, "red budget exceeded"),
            IllegalReason::MissingPredecessor(p) => write!(f, "predecessor {p} is not pebbled"),
            IllegalReason::NotBlue => write!(f, "vertex has no blue pebble"),
            IllegalReason::NotRed => write!(f, "vertex has no pebble of this rank"),
            IllegalReason::AlreadyBlue => write!(f, "vertex is already blue"),
            IllegalReason::ComputeOnInput => write!(f, "input vertices cannot be computed"),
            IllegalReason::NoPebbleToAcquire => write!(f, "acquire on a pebble-free vertex"),
            IllegalReason::WrongMode => write!(f, "move not available in this game mode"),
            IllegalReason::UnknownVertex => write!(f, "unknown vertex"),
            IllegalReason::UnknownRank => write!(f, "unknown rank"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    Illegal { step: usize, mv: Move, reason: IllegalReason },
    /// The schedule is legal but leaves some outputs unfinished.
    Incomplete { counters: IoCounters, missing: Vec<usize> },
    /// Pre-placing inputs on their owners already exceeds `M` on some rank.
    InitialPlacement { rank: usize, inputs: usize },
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::Illegal { step, mv, reason } => write!(f, "move {step} (`{mv}`) is illegal: {reason}"),
            ScheduleError::Incomplete { missing, .. } => {
                write!(f, "incomplete: {} output(s) not finished, first {}", missing.len(), missing[0])
            }
            ScheduleError::InitialPlacement { rank, inputs } => {
                write!(f, "rank {rank} owns {inputs} inputs, more than its memory")
            }
        }
    }
}

impl std::error::Error for ScheduleError {}

/// Owner rank of every input vertex in the parallel game: inputs are dealt
/// round-robin in increasing vertex order.
pub fn input_owners(cdag: &Cdag, procs: usize) -> Vec<Option<usize>> {
    let mut owners = vec![None; cdag.len()];
    for (i, v) in cdag.inputs().into_iter().enumerate() {
        owners[v] = Some(i % procs);
    }
    owners
}

/// Mutable game state; exposed so oracles and tests can step through moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PebbleState {
    pub red: Vec<Vec<bool>>,
    pub red_count: Vec<usize>,
    pub blue: Vec<bool>,
    pub counters: IoCounters,
}

impl PebbleState {
    pub fn initial(cdag: &Cdag, mode: GameMode, m: usize) -> Result<Self, ScheduleError> {
        let procs = mode.procs();
        let mut st = PebbleState {
            red: vec![vec![false; cdag.len()]; procs],
            red_count: vec![0; procs],
            blue: vec![false; cdag.len()],
            counters: IoCounters::new(procs),
        };
        match mode {
            GameMode::Sequential => {
                for v in cdag.inputs() {
                    st.blue[v] = true;
                }
            }
            GameMode::Parallel { procs, .. } => {
                for (v, owner) in input_owners(cdag, procs).into_iter().enumerate() {
                    if let Some(p) = owner {
                        st.red[p][v] = true;
                        st.red_count[p] += 1;
                    }
                }
                if let Some(p) = (0..procs).find(|&p| st.red_count[p] > m) {
                    return Err(ScheduleError::InitialPlacement { rank: p, inputs: st.red_count[p] });
                }
            }
        }
        Ok(st)
    }

    fn place(&mut self, rank: usize, v: usize, m: usize) -> Result<(), IllegalReason> {
        if !self.red[rank][v] {
            if self.red_count[rank] + 1 > m {
                return Err(IllegalReason::RedBudgetExceeded);
            }
            self.red[rank][v] = true;
            self.red_count[rank] += 1;
        }
        Ok(())
    }

    pub fn apply(&mut self, cdag: &Cdag, mode: GameMode, m: usize, mv: Move) -> Result<(), IllegalReason> {
        let n = cdag.len();
        let vertex = match mv {
            Move::Load(v) | Move::Store(v) => v,
            Move::Compute { v, .. } | Move::Evict { v, .. } | Move::Acquire { v, .. } => v,
        };
        if vertex >= n {
            return Err(IllegalReason::UnknownVertex);
        }
        let sequential = mode == GameMode::Sequential;
        match mv {
            Move::Load(v) => {
                if !sequential {
                    return Err(IllegalReason::WrongMode);
                }
                if !self.blue[v] {
                    return Err(IllegalReason::NotBlue);
                }
                self.place(0, v, m)?;
                self.counters.loads[0] += 1;
                self.counters.charged[0] += 1;
            }
            Move::Store(v) => {
                if !sequential {
                    return Err(IllegalReason::WrongMode);
                }
                if !self.red[0][v] {
                    return Err(IllegalReason::NotRed);
                }
                if self.blue[v] {
                    return Err(IllegalReason::AlreadyBlue);
                }
                self.blue[v] = true;
                self.counters.stores[0] += 1;
                self.counters.charged[0] += 1;
            }
            Move::Compute { v, rank } => {
                if rank >= self.red.len() {
                    return Err(IllegalReason::UnknownRank);
                }
                if cdag.is_input(v) {
                    return Err(IllegalReason::ComputeOnInput);
                }
                if let Some(&p) = cdag.preds(v).iter().find(|&&p| !self.red[rank][p]) {
                    return Err(IllegalReason::MissingPredecessor(p));
                }
                self.place(rank, v, m)?;
            }
            Move::Evict { v, rank } => {
                if rank >= self.red.len() {
                    return Err(IllegalReason::UnknownRank);
                }
                if !self.red[rank][v] {
                    return Err(IllegalReason::NotRed);
                }
                self.red[rank][v] = false;
                self.red_count[rank] -= 1;
            }
            Move::Acquire { v, rank } => {
                let GameMode::Parallel { charge_sender, .. } = mode else {
                    return Err(IllegalReason::WrongMode);
                };
                if rank >= self.red.len() {
                    return Err(IllegalReason::UnknownRank);
                }
                let Some(sender) = (0..self.red.len()).find(|&q| q != rank && self.red[q][v]) else {
                    return Err(IllegalReason::NoPebbleToAcquire);
                };
                if self.red[rank][v] {
                    return Ok(());
                }
                self.place(rank, v, m)?;
                self.counters.acquires[rank] += 1;
                self.counters.charged[rank] += 1;
                if charge_sender {
                    self.counters.charged[sender] += 1;
                }
            }
        }
        Ok(())
    }

    /// Outputs not yet finished under the termination rule of `mode`.
    pub fn missing_outputs(&self, cdag: &Cdag, mode: GameMode) -> Vec<usize> {
        cdag.outputs()
            .into_iter()
            .filter(|&v| match mode {
                GameMode::Sequential => !self.blue[v],
                GameMode::Parallel { .. } => !self.red.iter().any(|r| r[v]),
            })
            .collect()
    }
}

/// Replays `schedule` and returns the I/O counters, the first illegal move,
/// or an incomplete verdict.
pub fn run_schedule(cdag: &Cdag, schedule: &[Move], m: usize, mode: GameMode) -> Result<IoCounters, ScheduleError> {
    let mut st = PebbleState::initial(cdag, mode, m)?;
    for (step, &mv) in schedule.iter().enumerate() {
        st.apply(cdag, mode, m, mv).map_err(|reason| ScheduleError::Illegal { step, mv, reason })?;
    }
    let missing = st.missing_outputs(cdag, mode);
    if missing.is_empty() {
        Ok(st.counters)
    } else {
        Err(ScheduleError::Incomplete { counters: st.counters, missing })
    }
}
