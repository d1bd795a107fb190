use std::collections::BTreeMap;
use std::fmt::Write;

/// Column header of [`CommStats::to_csv`].
pub const CSV_HEADER: &str = "rank,pi,pj,pk,sent_words,recv_words,msgs,peak_words";

/// Counters for one phase on one rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhaseStats {
    pub sent_data: usize,
    pub sent_index: usize,
    pub recv_data: usize,
    pub recv_index: usize,
    /// Messages sent.
    pub msgs: usize,
}

impl PhaseStats {
    pub fn sent(&self) -> usize {
        self.sent_data + self.sent_index
    }

    pub fn recv(&self) -> usize {
        self.recv_data + self.recv_index
    }

    fn add(&mut self, o: &PhaseStats) {
        self.sent_data += o.sent_data;
        self.sent_index += o.sent_index;
        self.recv_data += o.recv_data;
        self.recv_index += o.recv_index;
        self.msgs += o.msgs;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankStats {
    pub rank: usize,
    pub coords: (usize, usize, usize),
    /// Data plus index words.
    pub sent_words: usize,
    pub recv_words: usize,
    pub msgs: usize,
    pub peak_words: usize,
    pub phases: BTreeMap<u32, PhaseStats>,
}

impl RankStats {
    pub fn new(rank: usize, coords: (usize, usize, usize)) -> Self {
        RankStats { rank, coords, sent_words: 0, recv_words: 0, msgs: 0, peak_words: 0, phases: BTreeMap::new() }
    }

    pub(crate) fn record_send(&mut self, phase: u32, data: usize, index: usize) {
        self.sent_words += data + index;
        self.msgs += 1;
        let p = self.phases.entry(phase).or_default();
        p.sent_data += data;
        p.sent_index += index;
        p.msgs += 1;
    }

    pub(crate) fn record_recv(&mut self, phase: u32, data: usize, index: usize) {
        self.recv_words += data + index;
        let p = self.phases.entry(phase).or_default();
        p.recv_data += data;
        p.recv_index += index;
    }

    pub fn recv_index_words(&self) -> usize {
        self.phases.values().map(|p| p.recv_index).sum()
    }

    pub fn recv_data_words(&self) -> usize {
        self.phases.values().map(|p| p.recv_data).sum()
    }

    /// Counters of one phase (zero if the rank never communicated in it).
    pub fn phase(&self, phase: u32) -> PhaseStats {
        self.phases.get(&phase).copied().unwrap_or_default()
    }

    /// Sum over all phases accepted by `keep`.
    pub fn phases_where(&self, keep: impl Fn(u32) -> bool) -> PhaseStats {
        let mut acc = PhaseStats::default();
        for (_, p) in self.phases.iter().filter(|(k, _)| keep(**k)) {
            acc.add(p);
        }
        acc
    }
}

/// Counters of a whole run, one entry per rank.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommStats {
    pub ranks: Vec<RankStats>,
}

impl CommStats {
    pub fn total_sent(&self) -> usize {
        self.ranks.iter().map(|r| r.sent_words).sum()
    }

    pub fn total_recv(&self) -> usize {
        self.ranks.iter().map(|r| r.recv_words).sum()
    }

    /// Every word sent was received.
    pub fn conserved(&self) -> bool {
        self.total_sent() == self.total_recv()
            && self.ranks.iter().map(|r| r.recv_index_words()).sum::<usize>()
                == self.ranks.iter().flat_map(|r| r.phases.values()).map(|p| p.sent_index).sum::<usize>()
    }

    pub fn max_recv(&self) -> usize {
        self.ranks.iter().map(|r| r.recv_words).max().unwrap_or(0)
    }

    pub fn max_sent(&self) -> usize {
        self.ranks.iter().map(|r| r.sent_words).max().unwrap_or(0)
    }

    /// Per-rank volume: the larger of words sent and received.
    pub fn max_volume(&self) -> usize {
        self.ranks.iter().map(|r| r.sent_words.max(r.recv_words)).max().unwrap_or(0)
    }

    pub fn mean_recv(&self) -> f64 {
        if self.ranks.is_empty() {
            0.0
        } else {
            self.total_recv() as f64 / self.ranks.len() as f64
        }
    }

    /// Sum of one phase's counters over all ranks.
    pub fn phase_total(&self, phase: u32) -> PhaseStats {
        let mut acc = PhaseStats::default();
        for r in &self.ranks {
            acc.add(&r.phase(phase));
        }
        acc
    }

    /// One row per rank, preceded by a schema comment and the header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# schema_version=1\n{CSV_HEADER}\n");
        for r in &self.ranks {
            let (pi, pj, pk) = r.coords;
            writeln!(out, "{},{pi},{pj},{pk},{},{},{},{}", r.rank, r.sent_words, r.recv_words, r.msgs, r.peak_words)
                .expect("writing to a String");
        }
        out
    }
}
