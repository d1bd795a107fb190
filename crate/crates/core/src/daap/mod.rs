//! Disjoint array access programs.
//!
//! A program is a nest of `for` loops over half-open affine ranges with
//! statements of the form `A0[phi0] = f(A1[phi1], ..., Am[phim])`, where every
//! index is a single iteration variable. Programs are parsed from a small
//! textual DSL (see `docs/daap.ebnf`), validated for the disjoint access
//! property on concrete extents, and materialized into a [`Cdag`].

mod cdag;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

pub use cdag::{build_cdag, build_cdag_with_cap, Cdag, CdagError, VertexOrigin, DEFAULT_VERTEX_CAP};
pub use parse::{parse_daap, ParseError};

/// Shipped example programs.
pub mod builtin {
    /// LU without pivoting, trailing update over `(N-k-1)(N-k-2)` points per step.
    pub const LU: &str = include_str!("../../fixtures/lu.daap");
    /// LU without pivoting, full trailing update.
    pub const LU_TEXTBOOK: &str = include_str!("../../fixtures/lu_textbook.daap");
    /// Cholesky, strictly-lower trailing update.
    pub const CHOLESKY: &str = include_str!("../../fixtures/cholesky.daap");
    /// `C[i][j] = C[i][j] + A[i][k] * B[k][j]`.
    pub const GEMM: &str = include_str!("../../fixtures/gemm.daap");
    /// `C[i][j] = f(A[i][j], b[j])`: one out-degree-one input per compute vertex.
    pub const OUT_DEGREE_ONE_A: &str = include_str!("../../fixtures/outdeg1_a.daap");
    /// `c[i] = f(a[i], b[i])`: two out-degree-one inputs per compute vertex.
    pub const OUT_DEGREE_ONE_B: &str = include_str!("../../fixtures/outdeg1_b.daap");
}

/// Affine expression `constant + sum(coeff * name)` over iteration variables
/// and the program parameter.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Affine {
    pub constant: i64,
    pub terms: Vec<(String, i64)>,
}

impl Affine {
    pub fn constant(c: i64) -> Self {
        Affine { constant: c, terms: Vec::new() }
    }

    pub fn var(name: &str) -> Self {
        Affine { constant: 0, terms: vec![(name.to_string(), 1)] }
    }

    pub(crate) fn add_term(&mut self, name: &str, coeff: i64) {
        if let Some(t) = self.terms.iter_mut().find(|(n, _)| n == name) {
            t.1 += coeff;
        } else {
            self.terms.push((name.to_string(), coeff));
        }
        self.terms.retain(|(_, c)| *c != 0);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(n, _)| n.as_str())
    }

    /// Evaluates with `lookup` resolving every referenced name.
    pub fn eval(&self, lookup: impl Fn(&str) -> i64) -> i64 {
        self.terms.iter().fold(self.constant, |acc, (n, c)| acc + c * lookup(n))
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, c) in &self.terms {
            match (*c, first) {
                (1, true) => write!(f, "{name}")?,
                (-1, true) => write!(f, "-{name}")?,
                (c, true) => write!(f, "{c}*{name}")?,
                (1, false) => write!(f, "+{name}")?,
                (-1, false) => write!(f, "-{name}")?,
                (c, false) if c > 0 => write!(f, "+{c}*{name}")?,
                (c, false) => write!(f, "{c}*{name}")?,
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > 0 {
            write!(f, "+{}", self.constant)
        } else if self.constant < 0 {
            write!(f, "{}", self.constant)
        } else {
            Ok(())
        }
    }
}

/// A loop `for name in lower..upper`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterVar {
    pub name: String,
    pub lower: Affine,
    pub upper: Affine,
    /// Index of the enclosing loop in [`DaapProgram::loops`].
    pub parent: Option<usize>,
}

/// Access function vector: an array and one iteration variable per index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessFn {
    pub array: String,
    pub indices: Vec<String>,
}

impl AccessFn {
    /// Distinct iteration variables, in first-appearance order.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for v in &self.indices {
            if !seen.contains(&v.as_str()) {
                seen.push(v.as_str());
            }
        }
        seen
    }

    /// Number of distinct iteration variables in the access.
    pub fn dimension(&self) -> usize {
        self.variables().len()
    }
}

impl fmt::Display for AccessFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.array)?;
        if self.indices.is_empty() {
            return write!(f, "[]");
        }
        for i in &self.indices {
            write!(f, "[{i}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    GenericF,
    MulAdd,
    Div,
    Sqrt,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::GenericF => "generic-f",
            OpKind::MulAdd => "mul-add",
            OpKind::Div => "div",
            OpKind::Sqrt => "sqrt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Right-hand side expression; `Input(j)` refers to `Statement::inputs[j]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Input(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    /// Evaluates against input values. Unknown functions evaluate to the sum
    /// of their arguments.
    pub fn eval(&self, inputs: &[f64]) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::Input(j) => inputs[*j],
            Expr::Neg(e) => -e.eval(inputs),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(inputs), b.eval(inputs));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(name, args) => {
                let vals: Vec<f64> = args.iter().map(|a| a.eval(inputs)).collect();
                match (name.as_str(), vals.as_slice()) {
                    ("sqrt", [x]) => x.sqrt(),
                    ("abs", [x]) => x.abs(),
                    ("exp", [x]) => x.exp(),
                    ("max", v) if !v.is_empty() => v.iter().copied().fold(f64::MIN, f64::max),
                    ("min", v) if !v.is_empty() => v.iter().copied().fold(f64::MAX, f64::min),
                    _ => vals.iter().sum(),
                }
            }
        }
    }

    fn op_kind(&self) -> OpKind {
        match self {
            Expr::Call(name, _) if name == "sqrt" => OpKind::Sqrt,
            Expr::Bin(BinOp::Div, _, _) => OpKind::Div,
            Expr::Bin(BinOp::Add | BinOp::Sub, a, b)
                if matches!(**a, Expr::Bin(BinOp::Mul, _, _))
                    || matches!(**b, Expr::Bin(BinOp::Mul, _, _)) =>
            {
                OpKind::MulAdd
            }
            _ => OpKind::GenericF,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub label: String,
    pub output: AccessFn,
    pub inputs: Vec<AccessFn>,
    pub op: OpKind,
    pub expr: Expr,
    /// Enclosing loops, outermost first (indices into [`DaapProgram::loops`]).
    pub nest: Vec<usize>,
}

impl Statement {
    pub fn depth(&self) -> usize {
        self.nest.len()
    }
}

/// Execution tree of a program, in source order.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Loop { var: usize, body: Vec<Node> },
    Stmt(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaapProgram {
    /// Symbolic size parameter (`param N`), if declared.
    pub param: Option<String>,
    pub loops: Vec<IterVar>,
    pub statements: Vec<Statement>,
    pub body: Vec<Node>,
}

impl DaapProgram {
    pub fn max_depth(&self) -> usize {
        self.statements.iter().map(Statement::depth).max().unwrap_or(0)
    }

    /// Arrays referenced by more than one statement.
    pub fn shared_arrays(&self) -> BTreeSet<String> {
        let mut count: HashMap<&str, usize> = HashMap::new();
        for st in &self.statements {
            let arrays: BTreeSet<&str> = std::iter::once(&st.output)
                .chain(&st.inputs)
                .map(|a| a.array.as_str())
                .collect();
            for a in arrays {
                *count.entry(a).or_default() += 1;
            }
        }
        count.into_iter().filter(|(_, c)| *c > 1).map(|(a, _)| a.to_string()).collect()
    }

    pub fn statement(&self, label: &str) -> Option<&Statement> {
        self.statements.iter().find(|s| s.label == label)
    }

    /// Exact number of iteration points of statement `idx` for parameter value `n`.
    pub fn domain_size(&self, idx: usize, n: i64) -> u64 {
        let nest = &self.statements[idx].nest;
        let mut env: Vec<(String, i64)> = Vec::with_capacity(nest.len() + 1);
        if let Some(p) = &self.param {
            env.push((p.clone(), n));
        }
        self.count_nest(nest, &mut env)
    }

    fn count_nest(&self, nest: &[usize], env: &mut Vec<(String, i64)>) -> u64 {
        let Some((&first, rest)) = nest.split_first() else {
            return 1;
        };
        let lv = &self.loops[first];
        let lookup = |name: &str| lookup_env(env, name);
        let lo = lv.lower.eval(lookup);
        let hi = lv.upper.eval(lookup);
        if hi <= lo {
            return 0;
        }
        if rest.is_empty() {
            return (hi - lo) as u64;
        }
        let mut total = 0;
        for x in lo..hi {
            env.push((lv.name.clone(), x));
            total += self.count_nest(rest, env);
            env.pop();
        }
        total
    }

    /// Visits every statement instance in execution order.
    pub fn for_each_instance(&self, n: i64, mut visit: impl FnMut(usize, &[(String, i64)]) -> bool) {
        let mut env: Vec<(String, i64)> = Vec::new();
        if let Some(p) = &self.param {
            env.push((p.clone(), n));
        }
        self.walk(&self.body, &mut env, &mut visit);
    }

    fn walk(
        &self,
        nodes: &[Node],
        env: &mut Vec<(String, i64)>,
        visit: &mut impl FnMut(usize, &[(String, i64)]) -> bool,
    ) -> bool {
        for node in nodes {
            match node {
                Node::Stmt(s) => {
                    if !visit(*s, env) {
                        return false;
                    }
                }
                Node::Loop { var, body } => {
                    let lv = &self.loops[*var];
                    let lo = lv.lower.eval(|n| lookup_env(env, n));
                    let hi = lv.upper.eval(|n| lookup_env(env, n));
                    for x in lo..hi {
                        env.push((lv.name.clone(), x));
                        let keep_going = self.walk(body, env, visit);
                        env.pop();
                        if !keep_going {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

pub(crate) fn lookup_env(env: &[(String, i64)], name: &str) -> i64 {
    env.iter()
        .rev()
        .find(|(n, _)| n == name)
        .map(|(_, v)| *v)
        .unwrap_or_else(|| panic!("unbound name `{name}` survived parsing"))
}

/// Element coordinates of `access` at the given iteration point.
pub(crate) fn element_of(access: &AccessFn, env: &[(String, i64)]) -> Vec<i64> {
    access.indices.iter().map(|v| lookup_env(env, v)).collect()
}

/// Number of distinct iteration variables in input access `j` of `st`.
pub fn access_dimension(st: &Statement, j: usize) -> usize {
    st.inputs[j].dimension()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjointViolation {
    pub statement: String,
    pub point: Vec<(String, i64)>,
    pub first: usize,
    pub second: usize,
    pub element: (String, Vec<i64>),
}

impl fmt::Display for DisjointViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let point: Vec<String> = self.point.iter().map(|(n, v)| format!("{n}={v}")).collect();
        write!(
            f,
            "statement {} at ({}) references {}{:?} through inputs #{} and #{}",
            self.statement,
            point.join(", "),
            self.element.0,
            self.element.1,
            self.first,
            self.second
        )
    }
}

/// Checks that within every statement instance, no two input accesses
/// reference the same element (and therefore the same vertex).
pub fn validate_disjoint_access(prog: &DaapProgram, n: i64) -> Result<(), DisjointViolation> {
    let mut violation = None;
    prog.for_each_instance(n, |s, env| {
        let st = &prog.statements[s];
        let elements: Vec<(&str, Vec<i64>)> =
            st.inputs.iter().map(|a| (a.array.as_str(), element_of(a, env))).collect();
        for a in 0..elements.len() {
            for b in a + 1..elements.len() {
                if elements[a] == elements[b] {
                    let point = env
                        .iter()
                        .filter(|(name, _)| Some(name) != prog.param.as_ref())
                        .cloned()
                        .collect();
                    violation = Some(DisjointViolation {
                        statement: st.label.clone(),
                        point,
                        first: a,
                        second: b,
                        element: (elements[a].0.to_string(), elements[a].1.clone()),
                    });
                    return false;
                }
            }
        }
        true
    });
    match violation {
        Some(v) => Err(v),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn access_dimension_counts_distinct_variables() {
        let prog = parse_daap(builtin::LU).unwrap();
        let s1 = prog.statement("S1").unwrap();
        let kk = s1.inputs.iter().position(|a| a.indices == ["k", "k"]).unwrap();
        let ik = s1.inputs.iter().position(|a| a.indices == ["i", "k"]).unwrap();
        assert_eq!(access_dimension(s1, kk), 1);
        assert_eq!(access_dimension(s1, ik), 2);

        let scalar = parse_daap("for i in 0..3 { S: b[i] = a[i] * s[] }").unwrap();
        assert_eq!(access_dimension(&scalar.statements[0], 1), 0);
    }

    #[test]
    fn disjoint_access_holds_for_shipped_programs() {
        for src in [builtin::LU, builtin::LU_TEXTBOOK, builtin::GEMM] {
            let prog = parse_daap(src).unwrap();
            assert_eq!(validate_disjoint_access(&prog, 4), Ok(()));
        }
        let chol = parse_daap(builtin::CHOLESKY).unwrap();
        assert_eq!(validate_disjoint_access(&chol, 5), Ok(()));
    }

    #[test]
    fn repeated_input_is_a_violation() {
        let prog = parse_daap("for i in 0..2 { S: B[i] = f(A[i], A[i]) }").unwrap();
        let v = validate_disjoint_access(&prog, 0).unwrap_err();
        assert_eq!(v.statement, "S");
        assert_eq!(v.point, vec![("i".to_string(), 0)]);
        assert_eq!((v.first, v.second), (0, 1));
    }

    #[test]
    fn domain_sizes_match_closed_forms() {
        let lu = parse_daap(builtin::LU).unwrap();
        let chol = parse_daap(builtin::CHOLESKY).unwrap();
        for n in 1..12i64 {
            let nu = n as u64;
            assert_eq!(lu.domain_size(0, n), nu * (nu - 1) / 2);
            assert_eq!(lu.domain_size(1, n), nu * (nu - 1) * nu.saturating_sub(2) / 3);
            assert_eq!(chol.domain_size(0, n), nu);
            assert_eq!(chol.domain_size(1, n), nu * (nu - 1) / 2);
            assert_eq!(chol.domain_size(2, n), nu * (nu - 1) * nu.saturating_sub(2) / 6);
        }
    }

    #[test]
    fn shared_arrays_are_derived() {
        let prog = parse_daap(
            "param N\n for i in 0..N { S1: c[i] = a[i] * s[] }\n for i in 0..N { S2: d[i] = a[i] + t[] }",
        )
        .unwrap();
        assert_eq!(prog.shared_arrays().into_iter().collect::<Vec<_>>(), vec!["a"]);
    }

    #[test]
    fn affine_display_round_trips_visually() {
        let mut a = Affine::var("k");
        a.add_term("N", -2);
        a.constant = 3;
        assert_eq!(a.to_string(), "k-2*N+3");
        assert_eq!(Affine::constant(0).to_string(), "0");
    }
}
