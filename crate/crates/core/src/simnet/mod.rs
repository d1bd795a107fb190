//! Simulated distributed-memory machine.
//!
//! `P` ranks arranged in a `[Px, Py, Pz]` grid run as threads and interact
//! only through messages. Every point-to-point leg is charged once to the
//! sender and once to the receiver, split into data words and index words
//! and bucketed by the phase the rank declared with [`RankCtx::set_phase`].
//!
//! Sends are buffered and never block; receives block until a message with
//! the requested source and tag arrives. All mailboxes share one lock, which
//! makes deadlock detection exact: when every live rank is waiting for a
//! message that is not queued, the run aborts with a per-rank report.

mod stats;

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Condvar, Mutex, MutexGuard};

pub use stats::{CommStats, PhaseStats, RankStats, CSV_HEADER};

/// Environment variable capping how many ranks execute at the same time.
pub const THREADS_ENV: &str = "CONFLUXLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub px: usize,
    pub py: usize,
    pub pz: usize,
}

impl GridSpec {
    pub fn new(px: usize, py: usize, pz: usize) -> Result<Self, SimError> {
        if px == 0 || py == 0 || pz == 0 {
            return Err(SimError::InvalidGrid(format!("grid dimensions must be positive, got [{px},{py},{pz}]")));
        }
        if px != py {
            return Err(SimError::InvalidGrid(format!("grid must have Px = Py, got [{px},{py},{pz}]")));
        }
        Ok(GridSpec { px, py, pz })
    }

    /// Parses `X,Y,Z` (brackets and spaces allowed).
    pub fn parse(s: &str) -> Result<Self, SimError> {
        let t = s.trim().trim_start_matches('[').trim_end_matches(']');
        let parts: Vec<&str> = t.split(|c| c == ',' || c == 'x').map(str::trim).collect();
        let nums: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some(&[px, py, pz]) => GridSpec::new(px, py, pz),
            _ => Err(SimError::InvalidGrid(format!("expected a grid like 2,2,2, got {s:?}"))),
        }
    }

    pub fn p(&self) -> usize {
        self.px * self.py * self.pz
    }

    /// Replication depth.
    pub fn c(&self) -> usize {
        self.pz
    }

    /// Ranks per layer.
    pub fn p1(&self) -> usize {
        self.px * self.py
    }

    pub fn rank_of(&self, pi: usize, pj: usize, pk: usize) -> usize {
        pi + self.px * (pj + self.py * pk)
    }

    pub fn coords(&self, rank: usize) -> (usize, usize, usize) {
        (rank % self.px, (rank / self.px) % self.py, rank / (self.px * self.py))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{}]", self.px, self.py, self.pz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Collective {
    /// Root exchanges directly with every member.
    #[default]
    Flat,
    /// Binomial tree; same volume at the leaves, fewer rounds at the root.
    Binomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    /// Per-rank memory budget in words.
    pub memory: usize,
    /// Abort instead of warning when a rank exceeds `memory`.
    pub hard_memory: bool,
    pub collective: Collective,
    /// Maximum number of ranks executing at once; `None` runs all.
    pub threads: Option<usize>,
}

impl SimConfig {
    /// Defaults: soft memory budget, flat collectives, thread cap from
    /// `CONFLUXLAB_THREADS` when set.
    pub fn new(grid: GridSpec, memory: usize) -> Self {
        let threads = std::env::var(THREADS_ENV).ok().and_then(|s| s.parse().ok()).filter(|&t: &usize| t > 0);
        SimConfig { grid, memory, hard_memory: false, collective: Collective::Flat, threads }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidGrid(String),
    InvalidPeer { rank: usize, peer: usize },
    SizeMismatch { from: usize, to: usize, tag: u32, expected: usize, got: usize },
    MemoryExceeded { rank: usize, words: usize, budget: usize },
    /// Every live rank is waiting for a message nobody will send.
    Deadlock { blocked: Vec<(usize, usize, u32)> },
    /// Another rank failed first.
    Aborted,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidGrid(m) => write!(f, "invalid grid: {m}"),
            SimError::InvalidPeer { rank, peer } => write!(f, "rank {rank} addressed nonexistent rank {peer}"),
            SimError::SizeMismatch { from, to, tag, expected, got } => write!(
                f,
                "message from rank {from} to rank {to} (tag {tag}) has {got} words, receiver expected {expected}"
            ),
            SimError::MemoryExceeded { rank, words, budget } => {
                write!(f, "rank {rank} holds {words} words, above its budget of {budget}")
            }
            SimError::Deadlock { blocked } => {
                write!(f, "deadlock:")?;
                for (r, src, tag) in blocked {
                    write!(f, " rank {r} waits on rank {src} tag {tag};")?;
                }
                Ok(())
            }
            SimError::Aborted => write!(f, "aborted because another rank failed"),
        }
    }
}

impl std::error::Error for SimError {}

/// A message payload. Index words (row ids, pivot ids) are counted apart
/// from floating-point data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Message {
    pub data: Vec<f64>,
    pub index: Vec<u64>,
}

impl Message {
    pub fn data(data: Vec<f64>) -> Self {
        Message { data, index: Vec::new() }
    }

    pub fn words(&self) -> usize {
        self.data.len() + self.index.len()
    }
}

struct Envelope {
    src: usize,
    tag: u32,
    msg: Message,
}

struct State {
    queues: Vec<VecDeque<Envelope>>,
    waiting: Vec<Option<(usize, u32)>>,
    finished: Vec<bool>,
    running: usize,
    failed: Option<usize>,
    deadlock: Option<SimError>,
}

impl State {
    fn has_match(&self, rank: usize) -> bool {
        match self.waiting[rank] {
            Some((src, tag)) => self.queues[rank].iter().any(|e| e.src == src && e.tag == tag),
            None => true,
        }
    }

    /// True when no live rank can make progress.
    fn stuck(&self) -> bool {
        let live: Vec<usize> = (0..self.finished.len()).filter(|&r| !self.finished[r]).collect();
        !live.is_empty() && live.iter().all(|&r| self.waiting[r].is_some() && !self.has_match(r))
    }
}

struct Shared {
    state: Mutex<State>,
    cv: Condvar,
    cap: usize,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn acquire_slot<'a>(&'a self, mut st: MutexGuard<'a, State>) -> MutexGuard<'a, State> {
        while st.running >= self.cap && st.failed.is_none() && st.deadlock.is_none() {
            st = self.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        st.running += 1;
        st
    }
}

/// Per-rank view of the machine handed to the rank program.
pub struct RankCtx<'a> {
    rank: usize,
    grid: GridSpec,
    memory: usize,
    hard_memory: bool,
    collective: Collective,
    shared: &'a Shared,
    stats: RankStats,
    phase: u32,
    resident: usize,
    warned: bool,
}

impl<'a> RankCtx<'a> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coords(&self) -> (usize, usize, usize) {
        self.grid.coords(self.rank)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn set_phase(&mut self, phase: u32) {
        self.phase = phase;
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn stats(&self) -> &RankStats {
        &self.stats
    }

    fn check_peer(&self, peer: usize) -> Result<(), SimError> {
        if peer >= self.grid.p() {
            Err(SimError::InvalidPeer { rank: self.rank, peer })
        } else {
            Ok(())
        }
    }

    /// Buffered send. Messages to oneself are delivered but not charged.
    pub fn send(&mut self, dest: usize, tag: u32, msg: Message) -> Result<(), SimError> {
        self.check_peer(dest)?;
        if dest != self.rank {
            self.stats.record_send(self.phase, msg.data.len(), msg.index.len());
        }
        let mut st = self.shared.lock();
        if st.failed.is_some() || st.deadlock.is_some() {
            return Err(SimError::Aborted);
        }
        st.queues[dest].push_back(Envelope { src: self.rank, tag, msg });
        if st.waiting[dest].is_some() {
            self.shared.cv.notify_all();
        }
        Ok(())
    }

    pub fn send_data(&mut self, dest: usize, tag: u32, data: Vec<f64>) -> Result<(), SimError> {
        self.send(dest, tag, Message::data(data))
    }

    /// Blocks until a message from `src` with `tag` arrives (FIFO per pair).
    pub fn recv(&mut self, src: usize, tag: u32) -> Result<Message, SimError> {
        self.check_peer(src)?;
        let shared = self.shared;
        let mut st = shared.lock();
        loop {
            if let Some(err) = &st.deadlock {
                return Err(err.clone());
            }
            if st.failed.is_some() {
                return Err(SimError::Aborted);
            }
            if let Some(pos) = st.queues[self.rank].iter().position(|e| e.src == src && e.tag == tag) {
                let env = st.queues[self.rank].remove(pos).expect("position is valid");
                if st.waiting[self.rank].take().is_some() {
                    st = shared.acquire_slot(st);
                }
                drop(st);
                if src != self.rank {
                    self.stats.record_recv(self.phase, env.msg.data.len(), env.msg.index.len());
                }
                return Ok(env.msg);
            }
            if st.waiting[self.rank].is_none() {
                st.waiting[self.rank] = Some((src, tag));
                st.running -= 1;
                shared.cv.notify_all();
            }
            if st.stuck() {
                let blocked = (0..st.waiting.len())
                    .filter_map(|r| st.waiting[r].filter(|_| !st.finished[r]).map(|(s, t)| (r, s, t)))
                    .collect();
                let err = SimError::Deadlock { blocked };
                st.deadlock = Some(err.clone());
                shared.cv.notify_all();
                return Err(err);
            }
            st = shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
    }

    /// Receives and checks the payload length.
    pub fn recv_len(&mut self, src: usize, tag: u32, data_len: usize) -> Result<Message, SimError> {
        let msg = self.recv(src, tag)?;
        if msg.data.len() != data_len {
            return Err(SimError::SizeMismatch { from: src, to: self.rank, tag, expected: data_len, got: msg.data.len() });
        }
        Ok(msg)
    }

    pub fn recv_data(&mut self, src: usize, tag: u32) -> Result<Vec<f64>, SimError> {
        Ok(self.recv(src, tag)?.data)
    }

    /// Sends `msg` from `root` to every member of `group`; every member gets a copy.
    pub fn broadcast(&mut self, root: usize, group: &[usize], tag: u32, msg: Message) -> Result<Message, SimError> {
        debug_assert!(group.contains(&root) && group.contains(&self.rank));
        match self.collective {
            Collective::Flat => {
                if self.rank == root {
                    for &r in group.iter().filter(|&&r| r != root) {
                        self.send(r, tag, msg.clone())?;
                    }
                    Ok(msg)
                } else {
                    self.recv(root, tag)
                }
            }
            Collective::Binomial => {
                let (order, me) = relative_order(group, root, self.rank);
                let n = order.len();
                let mut msg = if me == 0 { msg } else { Message::default() };
                let mut mask = 1;
                while mask < n {
                    if me & mask != 0 {
                        msg = self.recv(order[me - mask], tag)?;
                        break;
                    }
                    mask <<= 1;
                }
                mask >>= 1;
                while mask > 0 {
                    if me + mask < n && me & (mask - 1) == 0 && me & mask == 0 {
                        self.send(order[me + mask], tag, msg.clone())?;
                    }
                    mask >>= 1;
                }
                Ok(msg)
            }
        }
    }

    /// Elementwise sum of `data` over `group`, delivered to `root`.
    pub fn reduce(&mut self, root: usize, group: &[usize], tag: u32, data: Vec<f64>) -> Result<Option<Vec<f64>>, SimError> {
        debug_assert!(group.contains(&root) && group.contains(&self.rank));
        let len = data.len();
        match self.collective {
            Collective::Flat => {
                if self.rank == root {
                    let mut acc = data;
                    for &r in group.iter().filter(|&&r| r != root) {
                        let part = self.recv_len(r, tag, len)?;
                        for (a, b) in acc.iter_mut().zip(&part.data) {
                            *a += b;
                        }
                    }
                    Ok(Some(acc))
                } else {
                    self.send_data(root, tag, data)?;
                    Ok(None)
                }
            }
            Collective::Binomial => {
                let (order, me) = relative_order(group, root, self.rank);
                let n = order.len();
                let mut acc = data;
                let mut mask = 1;
                while mask < n {
                    if me & mask != 0 {
                        self.send_data(order[me - mask], tag, acc)?;
                        return Ok(None);
                    }
                    if me + mask < n {
                        let part = self.recv_len(order[me + mask], tag, len)?;
                        for (a, b) in acc.iter_mut().zip(&part.data) {
                            *a += b;
                        }
                    }
                    mask <<= 1;
                }
                Ok(Some(acc))
            }
        }
    }

    /// `root` sends `parts[i]` to `group[i]`; returns this rank's part.
    pub fn scatter(&mut self, root: usize, group: &[usize], tag: u32, parts: Option<Vec<Message>>) -> Result<Message, SimError> {
        if self.rank == root {
            let parts = parts.expect("root supplies the parts");
            assert_eq!(parts.len(), group.len(), "one part per group member");
            let mut mine = Message::default();
            for (&r, part) in group.iter().zip(parts) {
                if r == root {
                    mine = part;
                } else {
                    self.send(r, tag, part)?;
                }
            }
            Ok(mine)
        } else {
            self.recv(root, tag)
        }
    }

    /// Every member contributes `msg`; returns all contributions in group order.
    pub fn allgather(&mut self, group: &[usize], tag: u32, msg: Message) -> Result<Vec<Message>, SimError> {
        let me = self.rank;
        for &r in group.iter().filter(|&&r| r != me) {
            self.send(r, tag, msg.clone())?;
        }
        let mut out = Vec::with_capacity(group.len());
        for &r in group {
            if r == self.rank {
                out.push(msg.clone());
            } else {
                out.push(self.recv(r, tag)?);
            }
        }
        Ok(out)
    }

    /// Declares `words` more resident words.
    pub fn alloc(&mut self, words: usize) -> Result<(), SimError> {
        self.resident += words;
        self.stats.peak_words = self.stats.peak_words.max(self.resident);
        if self.resident > self.memory {
            if self.hard_memory {
                return Err(SimError::MemoryExceeded { rank: self.rank, words: self.resident, budget: self.memory });
            }
            if !self.warned {
                self.warned = true;
                log::debug!("rank {} holds {} words, above its budget of {}", self.rank, self.resident, self.memory);
            }
        }
        Ok(())
    }

    pub fn release(&mut self, words: usize) {
        self.resident = self.resident.saturating_sub(words);
    }

    pub fn resident(&self) -> usize {
        self.resident
    }
}

fn relative_order(group: &[usize], root: usize, me: usize) -> (Vec<usize>, usize) {
    let start = group.iter().position(|&r| r == root).expect("root in group");
    let order: Vec<usize> = group[start..].iter().chain(&group[..start]).copied().collect();
    let pos = order.iter().position(|&r| r == me).expect("rank in group");
    (order, pos)
}

/// Outcome of a simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun<R> {
    pub stats: CommStats,
    pub results: Vec<R>,
    /// Ranks whose resident words exceeded the soft budget.
    pub over_budget: Vec<usize>,
}

/// Runs `program` on every rank and collects counters and results.
///
/// If any rank fails, the error of the first failing rank is returned and
/// the others are woken with [`SimError::Aborted`].
pub fn spawn<R, E, F>(cfg: &SimConfig, program: F) -> Result<SimRun<R>, E>
where
    R: Send,
    E: From<SimError> + Send,
    F: Fn(&mut RankCtx) -> Result<R, E> + Sync,
{
    let p = cfg.grid.p();
    let cap = cfg.threads.unwrap_or(p).clamp(1, p);
    let shared = Shared {
        state: Mutex::new(State {
            queues: (0..p).map(|_| VecDeque::new()).collect(),
            waiting: vec![None; p],
            finished: vec![false; p],
            running: 0,
            failed: None,
            deadlock: None,
        }),
        cv: Condvar::new(),
        cap,
    };
    let program = &program;
    let shared_ref = &shared;
    let outcomes: Vec<(Result<R, E>, RankStats, bool)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..p)
            .map(|rank| {
                s.spawn(move || {
                    drop(shared_ref.acquire_slot(shared_ref.lock()));
                    let mut ctx = RankCtx {
                        rank,
                        grid: cfg.grid,
                        memory: cfg.memory,
                        hard_memory: cfg.hard_memory,
                        collective: cfg.collective,
                        shared: shared_ref,
                        stats: RankStats::new(rank, cfg.grid.coords(rank)),
                        phase: 0,
                        resident: 0,
                        warned: false,
                    };
                    let out = program(&mut ctx);
                    let mut st = shared_ref.lock();
                    st.finished[rank] = true;
                    // a rank that errored out of a receive already gave up its slot
                    if st.waiting[rank].take().is_none() {
                        st.running -= 1;
                    }
                    if out.is_err() && st.failed.is_none() && st.deadlock.is_none() {
                        st.failed = Some(rank);
                    }
                    shared_ref.cv.notify_all();
                    drop(st);
                    (out, ctx.stats, ctx.warned)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
    });
    let st = shared.lock();
    let failed = st.failed;
    let deadlock = st.deadlock.clone();
    drop(st);
    let mut results = Vec::with_capacity(p);
    let mut ranks = Vec::with_capacity(p);
    let mut over_budget = Vec::new();
    let mut first_err = None;
    for (rank, (out, stats, warned)) in outcomes.into_iter().enumerate() {
        ranks.push(stats);
        if warned {
            over_budget.push(rank);
        }
        match out {
            Ok(r) => results.push(r),
            Err(e) => {
                if Some(rank) == failed || first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    if let Some(d) = deadlock {
        return Err(d.into());
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(SimRun { stats: CommStats { ranks }, results, over_budget })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(px: usize, pz: usize) -> SimConfig {
        let mut c = SimConfig::new(GridSpec::new(px, px, pz).unwrap(), 1 << 20);
        c.threads = None;
        c
    }

    #[test]
    fn grid_coordinates_round_trip() {
        let g = GridSpec::new(2, 2, 3).unwrap();
        for r in 0..g.p() {
            let (i, j, k) = g.coords(r);
            assert_eq!(g.rank_of(i, j, k), r);
        }
        assert_eq!(g.coords(5), (1, 0, 1));
        assert!(GridSpec::new(2, 3, 1).is_err());
        assert_eq!(GridSpec::parse("[2, 2, 2]").unwrap(), g.with_pz(2));
        assert!(GridSpec::parse("2,2").is_err());
    }

    impl GridSpec {
        fn with_pz(mut self, pz: usize) -> Self {
            self.pz = pz;
            self
        }
    }

    #[test]
    fn noop_program_has_zero_counters() {
        let run = spawn::<_, SimError, _>(&cfg(1, 1), |_| Ok(())).unwrap();
        assert_eq!(run.stats.total_sent(), 0);
        assert_eq!(run.stats.ranks[0].msgs, 0);
    }

    #[test]
    fn ping_pong_conserves() {
        let run = spawn::<_, SimError, _>(&cfg(1, 2), |ctx| {
            let other = 1 - ctx.rank();
            if ctx.rank() == 0 {
                ctx.send_data(other, 0, vec![1.0; 1000])?;
                ctx.recv_len(other, 0, 1000)?;
            } else {
                let m = ctx.recv_len(other, 0, 1000)?;
                ctx.send_data(other, 0, m.data)?;
            }
            Ok(())
        })
        .unwrap();
        for r in &run.stats.ranks {
            assert_eq!((r.sent_words, r.recv_words), (1000, 1000));
        }
        assert!(run.stats.conserved());
    }

    #[test]
    fn flat_broadcast_counts_every_leg() {
        let run = spawn::<_, SimError, _>(&cfg(2, 2), |ctx| {
            let group: Vec<usize> = (0..8).collect();
            let m = ctx.broadcast(3, &group, 7, Message::data(vec![2.0; 256]))?;
            assert_eq!(m.data, vec![2.0; 256]);
            Ok(())
        })
        .unwrap();
        for r in &run.stats.ranks {
            if r.rank == 3 {
                assert_eq!((r.sent_words, r.recv_words, r.msgs), (7 * 256, 0, 7));
            } else {
                assert_eq!((r.sent_words, r.recv_words), (0, 256));
            }
        }
    }

    #[test]
    fn binomial_broadcast_and_reduce() {
        let mut c = cfg(2, 2);
        c.collective = Collective::Binomial;
        let run = spawn::<_, SimError, _>(&c, |ctx| {
            let group: Vec<usize> = (0..8).collect();
            let m = ctx.broadcast(0, &group, 1, Message::data(vec![ctx.rank() as f64; 4]))?;
            assert_eq!(m.data, vec![0.0; 4]);
            let s = ctx.reduce(5, &group, 2, vec![ctx.rank() as f64; 3])?;
            if ctx.rank() == 5 {
                assert_eq!(s.unwrap(), vec![28.0; 3]);
            }
            Ok(())
        })
        .unwrap();
        assert!(run.stats.conserved());
        // the root of a binomial broadcast over 8 ranks sends log2(8) messages
        assert_eq!(run.stats.ranks[0].phases[&0].msgs, 4);
        assert_eq!(run.stats.total_recv(), 7 * 4 + 7 * 3);
    }

    #[test]
    fn reduce_and_scatter_volumes() {
        let run = spawn::<_, SimError, _>(&cfg(1, 2), |ctx| {
            let group = [0, 1];
            let got = ctx.reduce(0, &group, 0, vec![1.0; 24])?;
            if ctx.rank() == 0 {
                assert_eq!(got.unwrap(), vec![2.0; 24]);
            }
            let parts = (ctx.rank() == 0).then(|| vec![Message::data(vec![0.0; 5]), Message::data(vec![1.0; 5])]);
            let mine = ctx.scatter(0, &group, 1, parts)?;
            assert_eq!(mine.data, vec![ctx.rank() as f64; 5]);
            let single = ctx.broadcast(ctx.rank(), &[ctx.rank()], 2, Message::data(vec![1.0]))?;
            assert_eq!(single.data.len(), 1);
            let all = ctx.allgather(&group, 3, Message { data: vec![], index: vec![ctx.rank() as u64] })?;
            assert_eq!(all[1].index, vec![1]);
            Ok(())
        })
        .unwrap();
        assert_eq!(run.stats.ranks[0].recv_words, 24 + 1);
        assert_eq!(run.stats.ranks[1].recv_words, 5 + 1);
        assert_eq!(run.stats.ranks[1].recv_index_words(), 1);
        assert!(run.stats.conserved());
    }

    #[test]
    fn size_mismatch_names_both_ranks() {
        let err = spawn::<(), SimError, _>(&cfg(1, 2), |ctx| {
            if ctx.rank() == 0 {
                ctx.send_data(1, 0, vec![0.0; 3])?;
            } else {
                ctx.recv_len(0, 0, 4)?;
            }
            Ok(())
        })
        .unwrap_err();
        assert_eq!(err, SimError::SizeMismatch { from: 0, to: 1, tag: 0, expected: 4, got: 3 });
    }

    #[test]
    fn deadlock_is_reported() {
        let err = spawn::<(), SimError, _>(&cfg(1, 2), |ctx| {
            let other = 1 - ctx.rank();
            ctx.recv(other, 9)?;
            Ok(())
        })
        .unwrap_err();
        match err {
            SimError::Deadlock { blocked } => assert_eq!(blocked, vec![(0, 1, 9), (1, 0, 9)]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn deadlock_with_finished_peer() {
        let err = spawn::<(), SimError, _>(&cfg(1, 2), |ctx| {
            if ctx.rank() == 0 {
                ctx.recv(1, 0)?;
            }
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, SimError::Deadlock { .. }));
    }

    #[test]
    fn thread_cap_still_completes() {
        let mut c = cfg(2, 2);
        c.threads = Some(1);
        let run = spawn::<_, SimError, _>(&c, |ctx| {
            let group: Vec<usize> = (0..8).collect();
            let parts = ctx.allgather(&group, 0, Message::data(vec![ctx.rank() as f64]))?;
            Ok(parts.iter().map(|m| m.data[0]).sum::<f64>())
        })
        .unwrap();
        assert!(run.results.iter().all(|&s| s == 28.0));
    }

    #[test]
    fn memory_budget_soft_and_hard() {
        let mut c = cfg(1, 1);
        c.memory = 10;
        let run = spawn::<_, SimError, _>(&c, |ctx| {
            ctx.alloc(8)?;
            ctx.alloc(4)?;
            ctx.release(12);
            Ok(())
        })
        .unwrap();
        assert_eq!(run.over_budget, vec![0]);
        assert_eq!(run.stats.ranks[0].peak_words, 12);
        c.hard_memory = true;
        let err = spawn::<(), SimError, _>(&c, |ctx| ctx.alloc(11)).unwrap_err();
        assert_eq!(err, SimError::MemoryExceeded { rank: 0, words: 11, budget: 10 });
    }

    #[test]
    fn failing_rank_error_wins() {
        #[derive(Debug, PartialEq)]
        enum E {
            Sim(SimError),
            Mine,
        }
        impl From<SimError> for E {
            fn from(e: SimError) -> Self {
                E::Sim(e)
            }
        }
        let err = spawn::<(), E, _>(&cfg(1, 2), |ctx| {
            if ctx.rank() == 1 {
                return Err(E::Mine);
            }
            ctx.recv(1, 0)?;
            Ok(())
        })
        .unwrap_err();
        assert_eq!(err, E::Mine);
    }
}
