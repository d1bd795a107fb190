use std::collections::VecDeque;
use std::fmt;

use crate::daap::Cdag;

/// Largest candidate set [`dom_min_exhaustive`] will enumerate subsets of.
pub const EXHAUSTIVE_FRONTIER_CAP: usize = 20;

/// Unit-capacity vertex-split flow network used for minimum vertex cuts.
struct Network {
    /// Per node: list of edge indices.
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u32>,
}

const INF: u32 = u32::MAX / 2;

impl Network {
    fn new(nodes: usize) -> Self {
        Network { adj: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new() }
    }

    fn add(&mut self, a: usize, b: usize, c: u32) {
        self.adj[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.adj[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    /// Augments along BFS paths until none remain; returns the flow value.
    fn max_flow(&mut self, s: usize, t: usize) -> u32 {
        let mut flow = 0;
        loop {
            let mut via = vec![usize::MAX; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &e in &self.adj[x] {
                    let y = self.to[e];
                    if !seen[y] && self.cap[e] > 0 {
                        seen[y] = true;
                        via[y] = e;
                        queue.push_back(y);
                    }
                }
            }
            if !seen[t] {
                return flow;
            }
            let mut x = t;
            while x != s {
                let e = via[x];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                x = self.to[e ^ 1];
            }
            flow += 1;
        }
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &e in &self.adj[x] {
                let y = self.to[e];
                if !seen[y] && self.cap[e] > 0 {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }
}

/// A minimum dominator set of `h`: a smallest vertex set that every path
/// from an input vertex to a vertex of `h` passes through, i.e. the data that
/// must be present to execute `h`. Computed vertices of `h` are not eligible
/// (otherwise `h` would trivially dominate itself); inputs in `h` are.
/// Computed exactly as a minimum vertex cut by max-flow.
pub fn dom_min_set(cdag: &Cdag, h: &[usize]) -> Vec<usize> {
    let n = cdag.len();
    if h.is_empty() {
        return Vec::new();
    }
    let mut in_h = vec![false; n];
    for &v in h {
        in_h[v] = true;
    }
    // node 2v = v_in, 2v+1 = v_out
    let (src, sink) = (2 * n, 2 * n + 1);
    let mut net = Network::new(2 * n + 2);
    for v in 0..n {
        let eligible = !in_h[v] || cdag.is_input(v);
        net.add(2 * v, 2 * v + 1, if eligible { 1 } else { INF });
        for &s in cdag.succs(v) {
            net.add(2 * v + 1, 2 * s, INF);
        }
        if cdag.is_input(v) {
            net.add(src, 2 * v, INF);
        }
    }
    for &v in h {
        net.add(2 * v + 1, sink, INF);
    }
    net.max_flow(src, sink);
    let side = net.reachable(src);
    (0..n).filter(|&v| side[2 * v] && !side[2 * v + 1]).collect()
}

/// Size of a minimum dominator set of `h`.
pub fn dom_min(cdag: &Cdag, h: &[usize]) -> usize {
    dom_min_set(cdag, h).len()
}

/// Reference implementation by subset enumeration over the eligible
/// ancestors of `h`. `None` when there are more than
/// [`EXHAUSTIVE_FRONTIER_CAP`] candidates.
pub fn dom_min_exhaustive(cdag: &Cdag, h: &[usize]) -> Option<usize> {
    let n = cdag.len();
    let mut relevant = vec![false; n];
    let mut stack: Vec<usize> = h.to_vec();
    for &v in h {
        relevant[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &p in cdag.preds(v) {
            if !relevant[p] {
                relevant[p] = true;
                stack.push(p);
            }
        }
    }
    let mut in_h = vec![false; n];
    for &v in h {
        in_h[v] = true;
    }
    let candidates: Vec<usize> = (0..n).filter(|&v| relevant[v] && (!in_h[v] || cdag.is_input(v))).collect();
    if candidates.len() > EXHAUSTIVE_FRONTIER_CAP {
        return None;
    }
    let dominates = |mask: u32| {
        let mut blocked = vec![false; n];
        for (i, &v) in candidates.iter().enumerate() {
            if mask >> i & 1 == 1 {
                blocked[v] = true;
            }
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&v| cdag.is_input(v) && !blocked[v]).collect();
        for &v in &stack {
            seen[v] = true;
        }
        while let Some(v) = stack.pop() {
            if in_h[v] {
                return false;
            }
            for &s in cdag.succs(v) {
                if !seen[s] && !blocked[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        true
    };
    let k = candidates.len();
    (0..=k).find(|&size| {
        (0u32..1 << k).any(|mask| mask.count_ones() as usize == size && dominates(mask))
    })
}

/// Vertices of `h` with no immediate successor in `h`, in increasing order.
pub fn min_set(cdag: &Cdag, h: &[usize]) -> Vec<usize> {
    let mut in_h = vec![false; cdag.len()];
    for &v in h {
        in_h[v] = true;
    }
    let mut out: Vec<usize> = h.iter().copied().filter(|&v| !cdag.succs(v).iter().any(|&s| in_h[s])).collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XPartition {
    pub subsets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XPartitionViolation {
    NotDisjoint { vertex: usize },
    NotCovering { vertex: usize },
    ContainsInput { vertex: usize },
    Cyclic,
    DominatorTooLarge { subset: usize, size: usize },
    MinimumTooLarge { subset: usize, size: usize },
}

impl fmt::Display for XPartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XPartitionViolation::NotDisjoint { vertex } => write!(f, "vertex {vertex} is in two subsets"),
            XPartitionViolation::NotCovering { vertex } => write!(f, "compute vertex {vertex} is in no subset"),
            XPartitionViolation::ContainsInput { vertex } => write!(f, "input vertex {vertex} is in a subset"),
            XPartitionViolation::Cyclic => write!(f, "cyclic dependencies between subsets"),
            XPartitionViolation::DominatorTooLarge { subset, size } => {
                write!(f, "subset {subset} has a minimum dominator set of size {size}")
            }
            XPartitionViolation::MinimumTooLarge { subset, size } => {
                write!(f, "subset {subset} has a minimum set of size {size}")
            }
        }
    }
}

/// Checks that `partition` is an X-partition of the compute vertices of `cdag`.
pub fn check_x_partition(cdag: &Cdag, partition: &XPartition, x: usize) -> Result<(), XPartitionViolation> {
    let n = cdag.len();
    let mut owner = vec![usize::MAX; n];
    for (i, sub) in partition.subsets.iter().enumerate() {
        for &v in sub {
            if cdag.is_input(v) {
                return Err(XPartitionViolation::ContainsInput { vertex: v });
            }
            if owner[v] != usize::MAX {
                return Err(XPartitionViolation::NotDisjoint { vertex: v });
            }
            owner[v] = i;
        }
    }
    if let Some(v) = cdag.computes().into_iter().find(|&v| owner[v] == usize::MAX) {
        return Err(XPartitionViolation::NotCovering { vertex: v });
    }
    let k = partition.subsets.len();
    let mut edges = Vec::new();
    for (a, b) in cdag.edges() {
        let (oa, ob) = (owner[a], owner[b]);
        if oa != usize::MAX && oa != ob {
            edges.push((oa, ob));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    if Cdag::from_edges(k, &edges).is_err() {
        return Err(XPartitionViolation::Cyclic);
    }
    for (i, sub) in partition.subsets.iter().enumerate() {
        let d = dom_min(cdag, sub);
        if d > x {
            return Err(XPartitionViolation::DominatorTooLarge { subset: i, size: d });
        }
        let m = min_set(cdag, sub).len();
        if m > x {
            return Err(XPartitionViolation::MinimumTooLarge { subset: i, size: m });
        }
    }
    Ok(())
}
