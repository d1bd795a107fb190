//! Text formats for cDAGs and schedules.
//!
//! cDAG: one record per line, `v <id> in|out|mid` declares a vertex and
//! `e <src> <dst>` an edge. Schedule: one move per line, `load v`,
//! `store v`, `compute v [@rank]`, `evict v [@rank]`, `acquire v @rank`.
//! `#` starts a comment in both formats.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use super::Move;
use crate::daap::{Cdag, CdagError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for FormatError {}

fn ferr(line: usize, message: impl Into<String>) -> FormatError {
    FormatError { line, message: message.into() }
}

/// A parsed cDAG plus the external vertex ids in dense-index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdagFile {
    pub cdag: Cdag,
    pub ids: Vec<u64>,
}

impl CdagFile {
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    In,
    Out,
    Mid,
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

pub fn parse_cdag(text: &str) -> Result<CdagFile, FormatError> {
    let mut ids = Vec::new();
    let mut kinds = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut edge_lines = Vec::new();
    for (line, f) in records(text) {
        let id = |s: &str| s.parse::<u64>().map_err(|_| ferr(line, format!("bad vertex id `{s}`")));
        match f.as_slice() {
            ["v", v, kind] => {
                let v = id(v)?;
                let kind = match *kind {
                    "in" => Kind::In,
                    "out" => Kind::Out,
                    "mid" => Kind::Mid,
                    other => return Err(ferr(line, format!("unknown vertex kind `{other}`"))),
                };
                if index.insert(v, ids.len()).is_some() {
                    return Err(ferr(line, format!("vertex {v} declared twice")));
                }
                ids.push(v);
                kinds.push(kind);
            }
            ["e", a, b] => {
                edges.push((id(a)?, id(b)?));
                edge_lines.push(line);
            }
            _ => return Err(ferr(line, "expected `v <id> in|out|mid` or `e <src> <dst>`")),
        }
    }
    let mut dense = Vec::with_capacity(edges.len());
    for (&(a, b), &line) in edges.iter().zip(&edge_lines) {
        let look = |x: u64| index.get(&x).copied().ok_or_else(|| ferr(line, format!("undeclared vertex {x}")));
        dense.push((look(a)?, look(b)?));
    }
    let cdag = Cdag::from_edges(ids.len(), &dense).map_err(|e| match e {
        CdagError::Cyclic => ferr(0, "graph has a cycle"),
        other => ferr(0, other.to_string()),
    })?;
    for (v, kind) in kinds.iter().enumerate() {
        let actual = if cdag.is_input(v) {
            Kind::In
        } else if cdag.is_output(v) {
            Kind::Out
        } else {
            Kind::Mid
        };
        if actual != *kind {
            return Err(ferr(0, format!("vertex {} is declared with the wrong kind", ids[v])));
        }
    }
    Ok(CdagFile { cdag, ids })
}

/// Serializes with dense indices as ids; vertex descriptions go in comments.
pub fn write_cdag(cdag: &Cdag) -> String {
    let mut out = String::new();
    for v in 0..cdag.len() {
        let kind = if cdag.is_input(v) {
            "in"
        } else if cdag.is_output(v) {
            "out"
        } else {
            "mid"
        };
        writeln!(out, "v {v} {kind}  # {}", cdag.vertex(v)).unwrap();
    }
    for (a, b) in cdag.edges() {
        writeln!(out, "e {a} {b}").unwrap();
    }
    out
}

/// Parses a schedule whose vertex ids refer to `file`.
pub fn parse_schedule(text: &str, file: &CdagFile) -> Result<Vec<Move>, FormatError> {
    let mut moves = Vec::new();
    for (line, f) in records(text) {
        let vertex = |s: &str| {
            let id = s.parse::<u64>().map_err(|_| ferr(line, format!("bad vertex id `{s}`")))?;
            file.index_of(id).ok_or_else(|| ferr(line, format!("unknown vertex {id}")))
        };
        let rank = |s: &str| {
            s.strip_prefix('@')
                .and_then(|r| r.parse::<usize>().ok())
                .ok_or_else(|| ferr(line, format!("expected `@rank`, found `{s}`")))
        };
        let mv = match f.as_slice() {
            ["load", v] => Move::Load(vertex(v)?),
            ["store", v] => Move::Store(vertex(v)?),
            ["compute", v] => Move::Compute { v: vertex(v)?, rank: 0 },
            ["compute", v, r] => Move::Compute { v: vertex(v)?, rank: rank(r)? },
            ["evict", v] => Move::Evict { v: vertex(v)?, rank: 0 },
            ["evict", v, r] => Move::Evict { v: vertex(v)?, rank: rank(r)? },
            ["acquire", v, r] => Move::Acquire { v: vertex(v)?, rank: rank(r)? },
            _ => return Err(ferr(line, format!("unrecognized move `{}`", f.join(" ")))),
        };
        moves.push(mv);
    }
    Ok(moves)
}

/// Serializes moves using `ids` as external vertex ids.
pub fn write_schedule(moves: &[Move], ids: &[u64]) -> String {
    let mut out = String::new();
    for mv in moves {
        let line = match *mv {
            Move::Load(v) => format!("load {}", ids[v]),
            Move::Store(v) => format!("store {}", ids[v]),
            Move::Compute { v, rank } => format!("compute {} @{rank}", ids[v]),
            Move::Evict { v, rank } => format!("evict {} @{rank}", ids[v]),
            Move::Acquire { v, rank } => format!("acquire {} @{rank}", ids[v]),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}
