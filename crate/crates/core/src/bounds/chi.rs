//! Maximum subcomputation size under a dominator budget.
//!
//! Given iteration-variable sizes `d_t >= 1` and access terms
//! `w_j * prod_{t in S_j} d_t`, `chi(X)` is the largest `prod_t d_t` with
//! `sum_j w_j prod_{t in S_j} d_t <= X`. Substituting `d_t = exp(x_t)` turns
//! this into maximizing a linear function under a log-sum-exp constraint,
//! which is convex; it is solved by a log-barrier Newton method. When all
//! terms have the same size and weight and every variable appears equally
//! often, AM-GM gives the closed form used instead.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ChiTerm {
    /// Distinct variable indices; empty for a scalar access.
    pub vars: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiProblem {
    pub nvars: usize,
    pub terms: Vec<ChiTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiPoint {
    pub chi: f64,
    /// Optimal (relaxed) `d_t`.
    pub sizes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChiError {
    /// A variable appears in no access, so `chi` is unbounded.
    Unbounded { var: usize },
    /// `X` is below the budget needed for a single point.
    Infeasible { x: f64, min_x: f64 },
    NoConvergence { residual: f64 },
}

impl fmt::Display for ChiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChiError::Unbounded { var } => write!(f, "variable #{var} is in no access: chi is unbounded"),
            ChiError::Infeasible { x, min_x } => write!(f, "X = {x} is below the minimum budget {min_x}"),
            ChiError::NoConvergence { residual } => write!(f, "optimizer did not converge (residual {residual:e})"),
        }
    }
}

impl std::error::Error for ChiError {}

/// Closed form `chi(X) = C * (X - s)^alpha` of the symmetric case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coeff: f64,
    pub alpha: f64,
    /// Total weight of scalar terms, subtracted from `X`.
    pub shift: f64,
}

impl PowerLaw {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeff * (x - self.shift).powf(self.alpha)
    }
}

const STARTS: usize = 8;

impl ChiProblem {
    /// Smallest budget for which `d_t = 1` is feasible.
    pub fn min_budget(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    pub fn unbounded_var(&self) -> Option<usize> {
        (0..self.nvars).find(|&v| !self.terms.iter().any(|t| t.vars.contains(&v)))
    }

    /// Closed form when the problem is symmetric under AM-GM: every non-scalar
    /// term has `k` variables and weight `w`, and every variable appears in
    /// the same number of terms.
    pub fn power_law(&self) -> Option<PowerLaw> {
        let vec_terms: Vec<&ChiTerm> = self.terms.iter().filter(|t| !t.vars.is_empty()).collect();
        let first = vec_terms.first()?;
        let (k, w) = (first.vars.len(), first.weight);
        if vec_terms.iter().any(|t| t.vars.len() != k || (t.weight - w).abs() > 1e-15 * w) {
            return None;
        }
        let counts: Vec<usize> =
            (0..self.nvars).map(|v| vec_terms.iter().filter(|t| t.vars.contains(&v)).count()).collect();
        if counts.iter().any(|&c| c != counts[0] || c == 0) {
            return None;
        }
        let m = vec_terms.len() as f64;
        let alpha = self.nvars as f64 / k as f64;
        let shift: f64 = self.terms.iter().filter(|t| t.vars.is_empty()).map(|t| t.weight).sum();
        Some(PowerLaw { coeff: (m * w).powf(-alpha), alpha, shift })
    }

    pub fn solve(&self, x: f64) -> Result<ChiPoint, ChiError> {
        if let Some(var) = self.unbounded_var() {
            return Err(ChiError::Unbounded { var });
        }
        let min_x = self.min_budget();
        let slack = 1e-12 * min_x.max(1.0);
        if x < min_x - slack {
            return Err(ChiError::Infeasible { x, min_x });
        }
        if x <= min_x + slack {
            return Ok(ChiPoint { chi: 1.0, sizes: vec![1.0; self.nvars] });
        }
        if let Some(pl) = self.power_law() {
            let vec_terms = self.terms.iter().filter(|t| !t.vars.is_empty()).count() as f64;
            let w = self.terms.iter().find(|t| !t.vars.is_empty()).map_or(1.0, |t| t.weight);
            let k = self.nvars as f64 / pl.alpha;
            let d = ((x - pl.shift) / (vec_terms * w)).powf(1.0 / k);
            return Ok(ChiPoint { chi: pl.eval(x), sizes: vec![d; self.nvars] });
        }
        self.solve_numeric(x)
    }

    /// Barrier-method solve, independent of the closed form.
    pub fn solve_numeric(&self, x: f64) -> Result<ChiPoint, ChiError> {
        self.solve_numeric_starts(x, STARTS)
    }

    fn solve_numeric_starts(&self, x: f64, starts: usize) -> Result<ChiPoint, ChiError> {
        if let Some(var) = self.unbounded_var() {
            return Err(ChiError::Unbounded { var });
        }
        let min_x = self.min_budget();
        if x <= min_x * (1.0 + 1e-12) {
            return self.solve(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut last_err = None;
        for start in 0..starts {
            let x0 = self.feasible_start(x, start, &mut rng);
            match barrier(self, x.ln(), x0) {
                Ok(sol) => {
                    let val: f64 = sol.iter().sum();
                    if best.as_ref().is_none_or(|(b, _)| val > *b) {
                        best = Some((val, sol));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        match best {
            Some((val, sol)) => Ok(ChiPoint { chi: val.exp(), sizes: sol.iter().map(|v| v.exp()).collect() }),
            None => Err(last_err.unwrap_or(ChiError::NoConvergence { residual: f64::NAN })),
        }
    }

    /// A strictly feasible point: scale a random direction until the
    /// constraint holds with margin.
    fn feasible_start(&self, x: f64, start: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let dir: Vec<f64> = (0..self.nvars)
            .map(|_| if start == 0 { 1.0 } else { rng.gen_range(0.1..1.0) })
            .collect();
        let logx = x.ln();
        let mut s = 1.0;
        loop {
            let p: Vec<f64> = dir.iter().map(|d| d * s).collect();
            if lse(self, &p) < logx - 1e-3 * (logx - self.min_budget().ln()).max(1e-12) {
                return p;
            }
            s *= 0.5;
            if s < 1e-14 {
                return vec![1e-14; self.nvars];
            }
        }
    }
}

/// log(sum_j w_j exp(a_j . x)) with its gradient and Hessian.
fn lse_full(p: &ChiProblem, x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let exps: Vec<f64> = p
        .terms
        .iter()
        .map(|t| t.weight.ln() + t.vars.iter().map(|&v| x[v]).sum::<f64>())
        .collect();
    let mx = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ws: Vec<f64> = exps.iter().map(|e| (e - mx).exp()).collect();
    let total: f64 = ws.iter().sum();
    let value = mx + total.ln();
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    for (t, w) in p.terms.iter().zip(&ws) {
        let pj = w / total;
        for &a in &t.vars {
            grad[a] += pj;
            for &b in &t.vars {
                hess[a][b] += pj;
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            hess[a][b] -= grad[a] * grad[b];
        }
    }
    (value, grad, hess)
}

fn lse(p: &ChiProblem, x: &[f64]) -> f64 {
    lse_full(p, x).0
}

/// Solves `max sum x_t` s.t. `lse(x) <= logx`, `x_t >= 0` from a strictly
/// feasible start.
fn barrier(p: &ChiProblem, logx: f64, mut x: Vec<f64>) -> Result<Vec<f64>, ChiError> {
    let n = x.len();
    let m_constraints = (n + 1) as f64;
    let mut t = 1.0;
    let phi = |x: &[f64], t: f64| -> f64 {
        let g = lse(p, x) - logx;
        if g >= 0.0 || x.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        -t * x.iter().sum::<f64>() - (-g).ln() - x.iter().map(|v| v.ln()).sum::<f64>()
    };
    for _outer in 0..60 {
        for _newton in 0..100 {
            let (l, lg, lh) = lse_full(p, &x);
            let g = l - logx;
            let mut grad = vec![0.0; n];
            let mut hess = vec![vec![0.0; n]; n];
            for a in 0..n {
                grad[a] = -t + lg[a] / (-g) - 1.0 / x[a];
                for b in 0..n {
                    hess[a][b] = lh[a][b] / (-g) + lg[a] * lg[b] / (g * g);
                }
                hess[a][a] += 1.0 / (x[a] * x[a]);
            }
            let step = solve_spd(&hess, &grad.iter().map(|v| -v).collect::<Vec<_>>());
            let decrement: f64 = -grad.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let f0 = phi(&x, t);
            let mut s = 1.0;
            loop {
                let cand: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + s * b).collect();
                let fc = phi(&cand, t);
                if fc.is_finite() && fc <= f0 - 0.25 * s * decrement {
                    x = cand;
                    break;
                }
                s *= 0.5;
                if s < 1e-16 {
                    break;
                }
            }
            if s < 1e-16 {
                break;
            }
        }
        if m_constraints / t < 1e-13 * (1.0 + x.iter().sum::<f64>()) {
            return Ok(x);
        }
        t *= 8.0;
    }
    let gap = m_constraints / t;
    if gap < 1e-9 {
        Ok(x)
    } else {
        Err(ChiError::NoConvergence { residual: gap })
    }
}

/// Gaussian elimination with partial pivoting; adequate for the tiny
/// systems here.
fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &r)| {
        let mut row = row.clone();
        row.push(r);
        row
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        if d.abs() < 1e-300 {
            continue;
        }
        for r in col + 1..n {
            let f = m[r][col] / d;
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = if m[r][r].abs() < 1e-300 { 0.0 } else { (m[r][n] - s) / m[r][r] };
    }
    x
}

/// Optimal budget and resulting intensity for fast-memory size `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct X0Result {
    pub x0: f64,
    pub chi: f64,
    pub rho: f64,
    pub sizes: Vec<f64>,
    /// `x0` sits on the upper end of the search interval, i.e. the intensity
    /// kept decreasing; the reported `rho` is still a valid bound.
    pub at_boundary: bool,
}

/// Upper end of the `X` search interval, as a multiple of `M`.
pub const X_SEARCH_FACTOR: f64 = 64.0;

/// Minimizes `chi(X) / (X - M)` over `(M, 64M]`.
pub fn optimize_x0(p: &ChiProblem, m: f64) -> Result<X0Result, ChiError> {
    if let Some(var) = p.unbounded_var() {
        return Err(ChiError::Unbounded { var });
    }
    let lo = m.max(p.min_budget());
    let hi = X_SEARCH_FACTOR * m;
    if hi <= lo {
        return Err(ChiError::Infeasible { x: hi, min_x: p.min_budget() });
    }
    // the log-transformed problem is convex, so one start suffices while
    // scanning; the reported point uses the full multi-start solve
    let scan = |x: f64| -> Result<f64, ChiError> {
        let pt = if p.power_law().is_some() || x <= p.min_budget() * (1.0 + 1e-12) {
            p.solve(x)?
        } else {
            p.solve_numeric_starts(x, 1)?
        };
        Ok(pt.chi / (x - m))
    };
    let rho = |x: f64| -> Result<(f64, ChiPoint), ChiError> {
        let pt = p.solve(x)?;
        Ok((pt.chi / (x - m), pt))
    };
    if let Some(pl) = p.power_law() {
        if pl.alpha > 1.0 {
            // d/dX [C (X-s)^a / (X-M)] = 0  =>  X = (a M - s) / (a - 1)
            let x0 = (pl.alpha * m - pl.shift) / (pl.alpha - 1.0);
            if x0 > lo && x0 <= hi {
                let (r, pt) = rho(x0)?;
                return Ok(X0Result { x0, chi: pt.chi, rho: r, sizes: pt.sizes, at_boundary: false });
            }
        }
    }
    const GRID: usize = 96;
    let span = (hi / lo).ln();
    let xs: Vec<f64> = (1..=GRID).map(|i| lo * (span * i as f64 / GRID as f64).exp()).collect();
    let mut vals = Vec::with_capacity(GRID);
    for &x in &xs {
        vals.push(scan(x)?);
    }
    let best = (0..GRID).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    if best == GRID - 1 {
        let (r, pt) = rho(hi)?;
        return Ok(X0Result { x0: hi, chi: pt.chi, rho: r, sizes: pt.sizes, at_boundary: true });
    }
    let mut a = if best == 0 { lo + (xs[0] - lo) * 1e-9 } else { xs[best - 1] };
    let mut b = xs[best + 1];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (scan(c)?, scan(d)?);
    while (b - a) > 1e-10 * b {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = scan(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = scan(d)?;
        }
    }
    let x0 = (a + b) / 2.0;
    let (r, pt) = rho(x0)?;
    Ok(X0Result { x0, chi: pt.chi, rho: r, sizes: pt.sizes, at_boundary: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gemm() -> ChiProblem {
        ChiProblem {
            nvars: 3,
            terms: vec![
                ChiTerm { vars: vec![0, 1], weight: 1.0 },
                ChiTerm { vars: vec![0, 2], weight: 1.0 },
                ChiTerm { vars: vec![2, 1], weight: 1.0 },
            ],
        }
    }

    fn lu_s1() -> ChiProblem {
        ChiProblem {
            nvars: 2,
            terms: vec![ChiTerm { vars: vec![1, 0], weight: 1.0 }, ChiTerm { vars: vec![0], weight: 1.0 }],
        }
    }

    #[test]
    fn gemm_closed_form() {
        let p = gemm();
        let pl = p.power_law().unwrap();
        assert!((pl.alpha - 1.5).abs() < 1e-15);
        for x in [3.0, 12.0, 48.0, 300.0] {
            let want = (x / 3.0f64).powf(1.5);
            assert!((p.solve(x).unwrap().chi - want).abs() <= 1e-12 * want);
        }
        assert_eq!(p.solve(3.0).unwrap().chi, 1.0);
    }

    #[test]
    fn numeric_path_agrees_with_closed_form() {
        let p = gemm();
        for x in [4.0, 12.0, 100.0, 3000.0] {
            let want = (x / 3.0f64).powf(1.5);
            let got = p.solve_numeric(x).unwrap().chi;
            assert!((got - want).abs() <= 1e-8 * want, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn boundary_optimum_is_found() {
        // max K*I s.t. I*K + K <= X has its optimum at K = 1
        let p = lu_s1();
        assert!(p.power_law().is_none());
        for x in [2.5, 10.0, 1000.0] {
            let pt = p.solve(x).unwrap();
            assert!((pt.chi - (x - 1.0)).abs() <= 1e-7 * x, "x={x}: {}", pt.chi);
        }
    }

    #[test]
    fn x0_for_gemm_is_three_m() {
        for m in [4.0, 16.0, 1000.0] {
            let r = optimize_x0(&gemm(), m).unwrap();
            assert!((r.x0 - 3.0 * m).abs() <= 1e-12 * m);
            assert!((r.rho - m.sqrt() / 2.0).abs() <= 1e-12 * m.sqrt());
        }
    }

    #[test]
    fn x0_search_matches_closed_form_without_shortcut() {
        // an asymmetric-looking but equivalent encoding defeats the shortcut
        let mut p = gemm();
        p.terms.push(ChiTerm { vars: vec![0, 1], weight: 1e-300 });
        assert!(p.power_law().is_none());
        let r = optimize_x0(&p, 16.0).unwrap();
        assert!((r.x0 - 48.0).abs() < 1e-4, "{}", r.x0);
        assert!((r.rho - 2.0).abs() < 1e-8);
    }

    #[test]
    fn decreasing_intensity_stops_at_boundary() {
        let r = optimize_x0(&lu_s1(), 10.0).unwrap();
        assert!(r.at_boundary);
        assert_eq!(r.x0, 640.0);
    }

    #[test]
    fn unbounded_and_infeasible() {
        let p = ChiProblem { nvars: 2, terms: vec![ChiTerm { vars: vec![0], weight: 1.0 }] };
        assert_eq!(p.solve(10.0), Err(ChiError::Unbounded { var: 1 }));
        assert!(matches!(gemm().solve(2.0), Err(ChiError::Infeasible { .. })));
    }

    #[test]
    fn scalar_terms_shift_the_budget() {
        let mut p = gemm();
        p.terms.push(ChiTerm { vars: vec![], weight: 1.0 });
        let pl = p.power_law().unwrap();
        assert_eq!(pl.shift, 1.0);
        assert!((p.solve(13.0).unwrap().chi - 8.0).abs() < 1e-12);
        let num = p.solve_numeric(13.0).unwrap().chi;
        assert!((num - 8.0).abs() < 1e-7);
    }

    #[test]
    fn weighted_terms() {
        // halving every weight doubles the effective budget
        let mut p = gemm();
        for t in &mut p.terms {
            t.weight = 0.5;
        }
        let want = (24.0f64 / 3.0).powf(1.5);
        assert!((p.solve(12.0).unwrap().chi - want).abs() < 1e-10 * want);
        assert!((p.solve_numeric(12.0).unwrap().chi - want).abs() < 1e-7 * want);
    }
}
