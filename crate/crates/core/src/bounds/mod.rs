//! I/O lower bounds for DAAP programs.
//!
//! Each statement is analyzed on its own: its input accesses define the
//! dominator-size terms of a [`ChiProblem`], the optimal budget `X0`
//! minimizes `chi(X)/(X-M)`, and the resulting intensity `rho` is capped by
//! `1/u` when every compute vertex has `u` out-degree-one input predecessors.
//! Statements are then combined: inputs shared between statements subtract a
//! reuse allowance, and accesses fed by another statement with intensity
//! above one have their dominator terms shrunk accordingly. The parallel
//! bound divides every iteration-domain size by `P`.

mod chi;
mod closed;
pub mod poly;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::daap::{build_cdag, CdagError, DaapProgram, VertexOrigin};
pub use chi::{optimize_x0, ChiError, ChiPoint, ChiProblem, ChiTerm, PowerLaw, X0Result, X_SEARCH_FACTOR};
pub use closed::{cholesky_bound, cholesky_bound_exact, lu_bound};
use poly::{rationalize, Poly, Q};

/// Parameter value of the small cDAG used to discover which statements feed
/// which accesses and which input vertices are shared.
pub const PROBE_N: i64 = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundError {
    Probe(CdagError),
    Chi { statement: String, source: ChiError },
    Volume { statement: String, detail: String },
    InvalidMemory(f64),
}

impl fmt::Display for BoundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundError::Probe(e) => write!(f, "could not build the probe cDAG: {e}"),
            BoundError::Chi { statement, source } => write!(f, "statement {statement}: {source}"),
            BoundError::Volume { statement, detail } => write!(f, "statement {statement}: {detail}"),
            BoundError::InvalidMemory(m) => write!(f, "memory size must be at least 1, got {m}"),
        }
    }
}

impl std::error::Error for BoundError {}

/// One input access's contribution to the dominator size.
#[derive(Debug, Clone, PartialEq)]
pub struct DomTerm {
    pub access: usize,
    pub text: String,
    /// Positions in the statement's loop nest.
    pub vars: Vec<usize>,
    pub weight: f64,
    /// Other statement feeding this access with the largest intensity.
    pub producer: Option<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChiKind {
    ClosedForm(PowerLaw),
    Numeric,
    /// Some loop variable appears in no input access.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatementAnalysis {
    pub label: String,
    pub index: usize,
    pub vars: Vec<String>,
    pub terms: Vec<DomTerm>,
    pub problem: ChiProblem,
    pub kind: ChiKind,
    /// Optimizer of `chi(X)/(X-M)`; `None` when `chi` is unbounded.
    pub x0: Option<X0Result>,
    /// Intensity before the out-degree-one cap (infinite when unbounded).
    pub rho_uncapped: f64,
    pub u: usize,
    pub rho: f64,
    /// Iteration-domain size as a polynomial in the parameter.
    pub volume: Poly,
    /// Smallest parameter value from which `volume` is exact.
    pub volume_valid_from: i64,
}

impl StatementAnalysis {
    /// `chi(X)` for this statement.
    pub fn chi(&self, x: f64) -> Result<f64, ChiError> {
        self.problem.solve(x).map(|p| p.chi)
    }

    /// Sequential I/O attributed to this statement: `|V| / rho`.
    pub fn q(&self, n: i64) -> f64 {
        if self.rho.is_infinite() {
            0.0
        } else {
            self.volume.eval(n as f64) / self.rho
        }
    }

    /// Accesses to input `access` made by one optimal subcomputation.
    fn access_size_at_x0(&self, access: usize) -> Option<f64> {
        let x0 = self.x0.as_ref()?;
        let term = self.terms.iter().find(|t| t.access == access)?;
        Some(term.vars.iter().map(|&v| x0.sizes[v]).product())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReuseKind {
    InputOverlap,
    OutputOverlap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReuseAdjustment {
    pub kind: ReuseKind,
    pub array: String,
    /// Input overlap: every statement sharing the array with its per-unit-|V|
    /// access count, so its total accesses are `factor * |V_S|(N)`.
    pub sharers: Vec<(usize, f64)>,
    /// Output overlap: (consumer, access, producer, producer rho, weight).
    pub consumer: Option<(usize, usize, String, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub memory: f64,
    pub procs: usize,
    pub statements: Vec<StatementAnalysis>,
    pub adjustments: Vec<ReuseAdjustment>,
    pub trace: Vec<String>,
    pub diagnostics: Vec<String>,
}

/// Number of distinct iteration variables per access determines `u`: every
/// input access using all loop variables of the nest reads vertices nothing
/// else reads. Returns `u` and the cap `1/u` when `u >= 1`.
pub fn out_degree_one_cap(st: &crate::daap::Statement) -> (usize, Option<f64>) {
    let u = st.inputs.iter().filter(|a| a.dimension() == st.depth() && st.depth() > 0).count();
    (u, (u > 0).then(|| 1.0 / u as f64))
}

/// Input reuse between two statements: the smaller of their total accesses.
pub fn input_reuse(accesses_s: f64, accesses_t: f64) -> f64 {
    accesses_s.min(accesses_t)
}

/// Dominator contribution of an access whose data is produced by a
/// statement with intensity `rho_producer`. Never shrinks below the plain
/// access size when the producer's intensity is at most one.
pub fn output_reuse_adjust(access_size: f64, rho_producer: f64) -> f64 {
    if rho_producer > 1.0 {
        access_size / rho_producer
    } else {
        access_size
    }
}

fn build_problem(prog: &DaapProgram, s: usize, weights: &[f64]) -> (Vec<String>, Vec<DomTerm>, ChiProblem) {
    let st = &prog.statements[s];
    let vars: Vec<String> = st.nest.iter().map(|&l| prog.loops[l].name.clone()).collect();
    let mut terms = Vec::new();
    for (j, acc) in st.inputs.iter().enumerate() {
        let positions = acc
            .variables()
            .iter()
            .map(|name| vars.iter().rposition(|v| v == name).expect("parser checked scope"))
            .collect();
        terms.push(DomTerm { access: j, text: acc.to_string(), vars: positions, weight: weights[j], producer: None });
    }
    let problem = ChiProblem {
        nvars: vars.len(),
        terms: terms.iter().map(|t| ChiTerm { vars: t.vars.clone(), weight: t.weight }).collect(),
    };
    (vars, terms, problem)
}

/// Iteration-domain size of statement `s` as a polynomial in the parameter.
pub fn volume_poly(prog: &DaapProgram, s: usize) -> Result<(Poly, i64), BoundError> {
    if prog.param.is_none() {
        let c = prog.domain_size(s, 0) as i128;
        return Ok((Poly::constant(Q::from_integer(c)), 0));
    }
    let d = prog.statements[s].depth() as i64;
    let n0 = 2 * d + 2;
    let xs: Vec<i64> = (n0..=n0 + d).collect();
    let ys: Vec<Q> = xs.iter().map(|&n| Q::from_integer(prog.domain_size(s, n) as i128)).collect();
    let p = Poly::interpolate(&xs, &ys);
    for n in n0 + d + 1..=n0 + d + 3 {
        if p.eval_exact(n) != Q::from_integer(prog.domain_size(s, n) as i128) {
            return Err(BoundError::Volume {
                statement: prog.statements[s].label.clone(),
                detail: "iteration count is not a polynomial in the parameter".into(),
            });
        }
    }
    let mut valid_from = n0;
    while valid_from > 0 && p.eval_exact(valid_from - 1) == Q::from_integer(prog.domain_size(s, valid_from - 1) as i128) {
        valid_from -= 1;
    }
    Ok((p, valid_from))
}

fn analyze_weighted(prog: &DaapProgram, s: usize, m: f64, weights: &[f64]) -> Result<StatementAnalysis, BoundError> {
    let st = &prog.statements[s];
    let (vars, terms, problem) = build_problem(prog, s, weights);
    let (u, cap) = out_degree_one_cap(st);
    let (volume, volume_valid_from) = volume_poly(prog, s)?;
    let chi_err = |source| BoundError::Chi { statement: st.label.clone(), source };
    let (kind, x0, rho_uncapped) = if problem.unbounded_var().is_some() {
        (ChiKind::Unbounded, None, f64::INFINITY)
    } else {
        let kind = problem.power_law().map_or(ChiKind::Numeric, ChiKind::ClosedForm);
        let r = optimize_x0(&problem, m).map_err(chi_err)?;
        let rho = r.rho;
        (kind, Some(r), rho)
    };
    let rho = match cap {
        Some(c) => rho_uncapped.min(c),
        None => rho_uncapped,
    };
    Ok(StatementAnalysis {
        label: st.label.clone(),
        index: s,
        vars,
        terms,
        problem,
        kind,
        x0,
        rho_uncapped,
        u,
        rho,
        volume,
        volume_valid_from,
    })
}

/// Analyzes statement `s` on its own (no inter-statement reuse).
pub fn analyze_statement(prog: &DaapProgram, s: usize, m: f64) -> Result<StatementAnalysis, BoundError> {
    if !(m >= 1.0) {
        return Err(BoundError::InvalidMemory(m));
    }
    let weights = vec![1.0; prog.statements[s].inputs.len()];
    analyze_weighted(prog, s, m, &weights)
}

/// Which statements feed each access, and which input vertices are read by
/// more than one statement, discovered on a small instance.
struct Interactions {
    /// producers[t][j]: other statements whose results access j of t reads.
    producers: Vec<Vec<BTreeSet<usize>>>,
    /// array -> statement -> accesses of that statement reading shared inputs.
    shared_inputs: BTreeMap<String, BTreeMap<usize, BTreeSet<usize>>>,
}

fn interactions(prog: &DaapProgram) -> Result<Interactions, BoundError> {
    let g = build_cdag(prog, PROBE_N).map_err(BoundError::Probe)?;
    let mut producers: Vec<Vec<BTreeSet<usize>>> =
        prog.statements.iter().map(|st| vec![BTreeSet::new(); st.inputs.len()]).collect();
    let mut readers: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); g.len()];
    for v in 0..g.len() {
        let VertexOrigin::Compute { statement: t, .. } = g.vertex(v).origin else { continue };
        for (j, &p) in g.preds(v).iter().enumerate() {
            match g.vertex(p).origin {
                VertexOrigin::Compute { statement: s, .. } if s != t => {
                    producers[t][j].insert(s);
                }
                VertexOrigin::Input => {
                    readers[p].insert((t, j));
                }
                _ => {}
            }
        }
    }
    let mut shared_inputs: BTreeMap<String, BTreeMap<usize, BTreeSet<usize>>> = BTreeMap::new();
    for (v, rs) in readers.iter().enumerate() {
        let stmts: BTreeSet<usize> = rs.iter().map(|&(t, _)| t).collect();
        if stmts.len() < 2 {
            continue;
        }
        let entry = shared_inputs.entry(g.vertex(v).array.clone()).or_default();
        for &(t, j) in rs {
            entry.entry(t).or_default().insert(j);
        }
    }
    Ok(Interactions { producers, shared_inputs })
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else if (x - x.round()).abs() < 1e-9 * x.abs().max(1.0) {
        format!("{}", x.round())
    } else {
        format!("{x:.6}")
    }
}

/// Sequential lower bound (`P = 1`) for fast-memory size `m`.
pub fn program_bound(prog: &DaapProgram, m: f64) -> Result<BoundReport, BoundError> {
    parallel_bound(prog, m, 1)
}

/// Parallel lower bound: every per-statement term is divided by `procs`.
pub fn parallel_bound(prog: &DaapProgram, m: f64, procs: usize) -> Result<BoundReport, BoundError> {
    if !(m >= 1.0) {
        return Err(BoundError::InvalidMemory(m));
    }
    let procs = procs.max(1);
    let inter = interactions(prog)?;
    let mut trace = Vec::new();
    let mut diagnostics = Vec::new();

    let standalone: Vec<StatementAnalysis> =
        (0..prog.statements.len()).map(|s| analyze_statement(prog, s, m)).collect::<Result<_, _>>()?;

    let mut statements = Vec::new();
    let mut adjustments = Vec::new();
    for (t, st) in prog.statements.iter().enumerate() {
        let mut weights = vec![1.0; st.inputs.len()];
        let mut producer_of = vec![None; st.inputs.len()];
        for j in 0..st.inputs.len() {
            let best = inter.producers[t][j]
                .iter()
                .map(|&s| (s, standalone[s].rho))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((s, rho_s)) = best {
                let w = output_reuse_adjust(1.0, rho_s);
                weights[j] = w;
                producer_of[j] = Some((standalone[s].label.clone(), rho_s));
                adjustments.push(ReuseAdjustment {
                    kind: ReuseKind::OutputOverlap,
                    array: st.inputs[j].array.clone(),
                    sharers: Vec::new(),
                    consumer: Some((t, j, standalone[s].label.clone(), rho_s, w)),
                });
                trace.push(format!(
                    "{}: access {} is produced by {} (rho = {}), dominator weight {}",
                    st.label,
                    st.inputs[j],
                    standalone[s].label,
                    fmt_num(rho_s),
                    fmt_num(w)
                ));
            }
        }
        let mut a = if weights.iter().all(|&w| w == 1.0) {
            standalone[t].clone()
        } else {
            analyze_weighted(prog, t, m, &weights)?
        };
        for (term, p) in a.terms.iter_mut().zip(producer_of) {
            term.producer = p;
        }
        statements.push(a);
    }

    for a in &statements {
        let terms: Vec<String> = a
            .terms
            .iter()
            .map(|t| if t.weight == 1.0 { t.text.clone() } else { format!("{}*{}", fmt_num(t.weight), t.text) })
            .collect();
        trace.push(format!("{}: loop variables ({}); dominator terms {}", a.label, a.vars.join(", "), terms.join(" + ")));
        match (&a.kind, &a.x0) {
            (ChiKind::ClosedForm(pl), Some(x0)) => trace.push(format!(
                "{}: chi(X) = {} * {}^{} (closed form); X0 = {} ({} M), chi(X0) = {}, rho = {}",
                a.label,
                fmt_num(pl.coeff),
                if pl.shift == 0.0 { "X".to_string() } else { format!("(X - {})", fmt_num(pl.shift)) },
                fmt_num(pl.alpha),
                fmt_num(x0.x0),
                fmt_num(x0.x0 / m),
                fmt_num(x0.chi),
                fmt_num(x0.rho)
            )),
            (ChiKind::Numeric, Some(x0)) => trace.push(format!(
                "{}: chi(X) numeric; X0 = {}{}, chi(X0) = {}, rho = {}",
                a.label,
                fmt_num(x0.x0),
                if x0.at_boundary { " (search boundary)" } else { "" },
                fmt_num(x0.chi),
                fmt_num(x0.rho)
            )),
            _ => {
                let msg = format!("{}: chi(X) is unbounded (a loop variable appears in no input access)", a.label);
                trace.push(msg.clone());
                if a.u == 0 {
                    diagnostics.push(format!("{msg}; no out-degree-one cap applies, statement contributes 0"));
                }
            }
        }
        if a.u > 0 {
            trace.push(format!(
                "{}: u = {} out-degree-one inputs, rho = min({}, 1/{}) = {}",
                a.label,
                a.u,
                fmt_num(a.rho_uncapped),
                a.u,
                fmt_num(a.rho)
            ));
        }
        trace.push(format!("{}: |V| = {} (exact for N >= {})", a.label, a.volume, a.volume_valid_from));
    }

    for (array, users) in &inter.shared_inputs {
        let mut sharers = Vec::new();
        for (&s, accesses) in users {
            let a = &statements[s];
            let per_point = match &a.x0 {
                Some(x0) => accesses.iter().map(|&j| a.access_size_at_x0(j).unwrap_or(0.0)).sum::<f64>() / x0.chi,
                // without an optimal subcomputation, every point may access the array
                None => accesses.len() as f64,
            };
            sharers.push((s, per_point));
        }
        let names: Vec<&str> = sharers.iter().map(|&(s, _)| statements[s].label.as_str()).collect();
        trace.push(format!("input overlap on {array} between {}", names.join(", ")));
        adjustments.push(ReuseAdjustment { kind: ReuseKind::InputOverlap, array: array.clone(), sharers, consumer: None });
    }

    let report = BoundReport { memory: m, procs, statements, adjustments, trace, diagnostics };
    let mut report = report;
    report.trace.push(format!("Q >= {}", report.symbolic()));
    Ok(report)
}

impl BoundReport {
    /// Reuse allowance of one input-overlap adjustment at parameter `n`
    /// (sequential): the sum of the sharers' accesses minus the largest.
    fn overlap_amount(&self, adj: &ReuseAdjustment, n: i64) -> f64 {
        let amounts: Vec<f64> = adj
            .sharers
            .iter()
            .map(|&(s, per_point)| per_point * self.statements[s].volume.eval(n as f64))
            .collect();
        let max = amounts.iter().copied().fold(0.0, f64::max);
        amounts.iter().sum::<f64>() - max
    }

    /// Total reuse subtracted at parameter `n`, divided by `P`.
    pub fn reuse(&self, n: i64) -> f64 {
        self.adjustments
            .iter()
            .filter(|a| a.kind == ReuseKind::InputOverlap)
            .map(|a| self.overlap_amount(a, n))
            .sum::<f64>()
            / self.procs as f64
    }

    /// Per-statement terms `|V_S| / (P rho_S)` at parameter `n`.
    pub fn statement_terms(&self, n: i64) -> Vec<f64> {
        self.statements.iter().map(|a| a.q(n) / self.procs as f64).collect()
    }

    /// The bound at parameter `n`, never negative.
    pub fn q(&self, n: i64) -> f64 {
        (self.statement_terms(n).iter().sum::<f64>() - self.reuse(n)).max(0.0)
    }

    /// The sequential bound (`P = 1`) at parameter `n`.
    pub fn q_seq(&self, n: i64) -> f64 {
        self.q(n) * self.procs as f64
    }

    /// Warning when `M` lies outside `[N^2/P, N^2/P^(2/3)]`.
    pub fn regime_warning(&self, n: i64) -> Option<String> {
        regime_warning(n as f64, self.memory, self.procs as f64)
    }

    /// Groups of terms `poly(N) / (P * M^e)` where `1/rho` is a rational
    /// multiple of `M^-e`.
    pub fn symbolic_terms(&self) -> Vec<(Poly, f64, Option<f64>)> {
        let mut groups: Vec<(Poly, f64, Option<f64>)> = Vec::new();
        for a in &self.statements {
            if a.rho.is_infinite() {
                continue;
            }
            let (exp, coeff) = match (&a.kind, &a.x0) {
                (ChiKind::ClosedForm(pl), Some(x0)) if a.rho == a.rho_uncapped && !x0.at_boundary && pl.shift == 0.0 => {
                    let e = pl.alpha - 1.0;
                    (e, 1.0 / (a.rho / self.memory.powf(e)))
                }
                _ => (0.0, 1.0 / a.rho),
            };
            match rationalize(coeff, 1000, 1e-12) {
                Some(r) => {
                    let scaled = a.volume.scale(r);
                    if let Some(g) = groups.iter_mut().find(|g| g.2.is_none() && (g.1 - exp).abs() < 1e-12) {
                        g.0 = g.0.add(&scaled);
                    } else {
                        groups.push((scaled, exp, None));
                    }
                }
                None => groups.push((a.volume.clone(), exp, Some(coeff))),
            }
        }
        groups.sort_by(|a, b| b.1.total_cmp(&a.1));
        groups
    }

    /// Human-readable form of the bound as a function of `N`, `P`, `M`.
    pub fn symbolic(&self) -> String {
        let mut parts = Vec::new();
        for (poly, exp, coeff) in self.symbolic_terms() {
            if poly.is_zero() {
                continue;
            }
            let (num, den) = poly.numerator_form("N");
            let mem = if exp == 0.0 {
                String::new()
            } else if (exp - 0.5).abs() < 1e-12 {
                " sqrt(M)".to_string()
            } else {
                format!(" M^{}", fmt_num(exp))
            };
            let den_text = if den == 1 { String::new() } else { den.to_string() };
            let lead = coeff.map_or(String::new(), |c| format!("{} * ", fmt_num(c)));
            parts.push(format!("{lead}({num})/({den_text}P{mem})"));
        }
        if self.adjustments.iter().any(|a| a.kind == ReuseKind::InputOverlap) {
            parts.push("- reuse".into());
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ").replace("+ - ", "- ")
        }
    }

    /// Coefficient of the highest power of `N`, with its power and `M` exponent.
    pub fn leading_term(&self) -> Option<(f64, usize, f64)> {
        let terms = self.symbolic_terms();
        let deg = terms.iter().filter_map(|t| t.0.degree()).max()?;
        terms
            .iter()
            .filter(|t| t.0.degree() == Some(deg))
            .map(|t| (poly::to_f64(&t.0.coeff(deg)) * t.2.unwrap_or(1.0), deg, t.1))
            .max_by(|a, b| b.2.total_cmp(&a.2))
    }
}

/// Warning text when `m` is outside the memory-dependent regime for `n`, `p`.
pub fn regime_warning(n: f64, m: f64, p: f64) -> Option<String> {
    let lo = n * n / p;
    let hi = n * n / p.powf(2.0 / 3.0);
    if m < lo * (1.0 - 1e-12) || m > hi * (1.0 + 1e-12) {
        Some(format!(
            "M = {} is outside the memory-dependent regime [N^2/P, N^2/P^(2/3)] = [{}, {}]",
            fmt_num(m),
            fmt_num(lo),
            fmt_num(hi)
        ))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daap::{builtin, parse_daap};

    #[test]
    fn lu_pipeline_matches_closed_form() {
        let prog = parse_daap(builtin::LU).unwrap();
        for m in [4.0, 16.0, 64.0] {
            for p in [1, 4] {
                let r = parallel_bound(&prog, m, p).unwrap();
                for n in [4, 8, 16, 32] {
                    let want = lu_bound(n as f64, m, p as f64);
                    assert!((r.q(n) - want).abs() <= 1e-9 * want, "m={m} p={p} n={n}: {} vs {want}", r.q(n));
                }
            }
        }
        let r = program_bound(&prog, 4.0).unwrap();
        assert!((r.q(4) - 14.0).abs() < 1e-12);
        assert_eq!(r.symbolic(), "(2N^3 - 6N^2 + 4N)/(3P sqrt(M)) + (N^2 - N)/(2P)");
        let (c, deg, e) = r.leading_term().unwrap();
        assert_eq!((deg, e), (3, 0.5));
        assert!((c - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_pipeline_matches_exact_form() {
        let prog = parse_daap(builtin::CHOLESKY).unwrap();
        let r = parallel_bound(&prog, 16.0, 4).unwrap();
        for n in [4, 8, 16, 32] {
            let want = cholesky_bound_exact(n as f64, 16.0, 4.0);
            assert!((r.q(n) - want).abs() <= 1e-9 * want);
        }
        let (c, deg, e) = r.leading_term().unwrap();
        assert_eq!((deg, e), (3, 0.5));
        assert!((c - 1.0 / 3.0).abs() < 1e-12);
        // the approximate closed form has the same leading behavior
        let big = 1 << 14;
        assert!((r.q(big) / cholesky_bound(big as f64, 16.0, 4.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn out_degree_one_caps() {
        let lu = parse_daap(builtin::LU).unwrap();
        assert_eq!(out_degree_one_cap(&lu.statements[0]), (1, Some(1.0)));
        assert_eq!(out_degree_one_cap(&lu.statements[1]).0, 0);
        let a = parse_daap(builtin::OUT_DEGREE_ONE_A).unwrap();
        assert_eq!(out_degree_one_cap(&a.statements[0]), (1, Some(1.0)));
        let b = parse_daap(builtin::OUT_DEGREE_ONE_B).unwrap();
        assert_eq!(out_degree_one_cap(&b.statements[0]), (2, Some(0.5)));
        let sb = analyze_statement(&b, 0, 8.0).unwrap();
        assert_eq!(sb.rho, 0.5);
        let s1 = analyze_statement(&lu, 0, 16.0).unwrap();
        assert_eq!(s1.rho, 1.0);
        assert!(s1.rho_uncapped > 1.0);
    }

    #[test]
    fn gemm_statement_analysis() {
        let prog = parse_daap(builtin::GEMM).unwrap();
        let a = analyze_statement(&prog, 0, 100.0).unwrap();
        assert!(matches!(a.kind, ChiKind::ClosedForm(_)));
        let x0 = a.x0.as_ref().unwrap();
        assert!((x0.x0 - 300.0).abs() < 1e-9);
        assert!((a.rho - 5.0).abs() < 1e-12);
        assert!((a.chi(12.0).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn output_reuse_clamps() {
        assert_eq!(output_reuse_adjust(6.0, 1.0), 6.0);
        assert_eq!(output_reuse_adjust(6.0, 0.5), 6.0);
        assert_eq!(output_reuse_adjust(8.0, 2.0), 4.0);
        assert_eq!(input_reuse(10.0, 7.0), 7.0);
        assert_eq!(input_reuse(5.0, 5.0), 5.0);
    }

    #[test]
    fn unbounded_statement_contributes_zero() {
        let prog = parse_daap("param N\nfor i in 0..N { for j in 0..N { S: c[i] = c[i] + a[i] } }").unwrap();
        let r = program_bound(&prog, 4.0).unwrap();
        assert_eq!(r.statements[0].kind, ChiKind::Unbounded);
        assert_eq!(r.q(10), 0.0);
        assert_eq!(r.diagnostics.len(), 1);
    }

    #[test]
    fn shared_input_is_detected_and_subtracted() {
        let src = "param N\n\
                   for i in 0..N { for j in 0..N { for k in 0..N { S1: C[i][j] = C[i][j] + A[i][k] * B[k][j] } } }\n\
                   for i in 0..N { for j in 0..N { for k in 0..N { S2: D[i][j] = D[i][j] + E[i][k] * B[k][j] } } }";
        let prog = parse_daap(src).unwrap();
        let m = 4.0;
        let r = program_bound(&prog, m).unwrap();
        let overlaps: Vec<&ReuseAdjustment> =
            r.adjustments.iter().filter(|a| a.kind == ReuseKind::InputOverlap).collect();
        assert_eq!(overlaps.len(), 1);
        assert_eq!(overlaps[0].array, "B");
        // one subcomputation touches sqrt(M) * sqrt(M) elements of B and
        // computes M^(3/2) points, so each point accounts for 1/sqrt(M) accesses
        let n = 16;
        let per_stmt = (n as f64).powi(3) / m.sqrt();
        assert!((r.reuse(n) - per_stmt).abs() < 1e-9 * per_stmt);
        let standalone = 2.0 * (n as f64).powi(3) / r.statements[0].rho;
        assert!((r.q(n) - (standalone - per_stmt)).abs() < 1e-9 * standalone);
    }

    #[test]
    fn parallel_is_sequential_over_p() {
        let prog = parse_daap(builtin::CHOLESKY).unwrap();
        let seq = program_bound(&prog, 16.0).unwrap();
        let par = parallel_bound(&prog, 16.0, 8).unwrap();
        for n in [8, 20] {
            for (a, b) in seq.statement_terms(n).iter().zip(par.statement_terms(n)) {
                assert!((a / 8.0 - b).abs() <= 1e-12 * a);
            }
        }
    }

    #[test]
    fn regime_bounds() {
        assert!(regime_warning(256.0, 16384.0, 8.0).is_none());
        assert!(regime_warning(256.0, 100.0, 8.0).is_some());
    }
}
