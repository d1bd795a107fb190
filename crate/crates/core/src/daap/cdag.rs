use std::collections::HashMap;
use std::fmt;

use super::{element_of, DaapProgram, DisjointViolation};

/// Default refusal threshold for [`build_cdag`].
pub const DEFAULT_VERTEX_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VertexOrigin {
    /// Initial value of an array element (version 0).
    Input,
    /// Produced by `statement` at the given iteration point (outermost first).
    Compute { statement: usize, point: Vec<i64> },
    /// Loaded from an interchange file; no program information.
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vertex {
    pub array: String,
    pub element: Vec<i64>,
    pub version: u32,
    pub origin: VertexOrigin,
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}@{}", self.array, self.element, self.version)
    }
}

/// Computational DAG. Vertex ids are dense indices; for graphs built from a
/// program, ids are already in a topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cdag {
    vertices: Vec<Vertex>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CdagError {
    TooLarge { cap: usize },
    NotDisjoint(DisjointViolation),
    Cyclic,
    BadEdge { src: usize, dst: usize },
}

impl fmt::Display for CdagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CdagError::TooLarge { cap } => write!(f, "cDAG would exceed the vertex cap of {cap}"),
            CdagError::NotDisjoint(v) => write!(f, "disjoint access violated: {v}"),
            CdagError::Cyclic => write!(f, "graph has a cycle"),
            CdagError::BadEdge { src, dst } => write!(f, "edge {src} -> {dst} references an unknown vertex"),
        }
    }
}

impl std::error::Error for CdagError {}

impl Cdag {
    /// Builds a graph from an edge list over `n` anonymous vertices.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Cdag, CdagError> {
        let vertices = (0..n)
            .map(|i| Vertex { array: "v".into(), element: vec![i as i64], version: 0, origin: VertexOrigin::External })
            .collect();
        Cdag::from_parts(vertices, edges)
    }

    pub fn from_parts(vertices: Vec<Vertex>, edges: &[(usize, usize)]) -> Result<Cdag, CdagError> {
        let n = vertices.len();
        let mut g = Cdag { vertices, preds: vec![Vec::new(); n], succs: vec![Vec::new(); n] };
        for &(src, dst) in edges {
            if src >= n || dst >= n {
                return Err(CdagError::BadEdge { src, dst });
            }
            g.preds[dst].push(src);
            g.succs[src].push(dst);
        }
        if g.topo_order().is_none() {
            return Err(CdagError::Cyclic);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn preds(&self, v: usize) -> &[usize] {
        &self.preds[v]
    }

    pub fn succs(&self, v: usize) -> &[usize] {
        &self.succs[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succs.iter().enumerate().flat_map(|(s, ds)| ds.iter().map(move |&d| (s, d)))
    }

    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    pub fn is_input(&self, v: usize) -> bool {
        self.preds[v].is_empty()
    }

    pub fn is_output(&self, v: usize) -> bool {
        self.succs[v].is_empty() && !self.preds[v].is_empty()
    }

    pub fn inputs(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.is_input(v)).collect()
    }

    pub fn outputs(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.is_output(v)).collect()
    }

    /// Non-input vertices.
    pub fn computes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| !self.is_input(v)).collect()
    }

    pub fn max_in_degree(&self) -> usize {
        self.preds.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Kahn's algorithm; `None` when the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..self.len()).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(v) = ready.pop() {
            order.push(v);
            for &s in self.succs[v].iter().rev() {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(s);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    /// Number of compute vertices produced by each statement.
    pub fn statement_counts(&self, statements: usize) -> Vec<usize> {
        let mut counts = vec![0; statements];
        for v in &self.vertices {
            if let VertexOrigin::Compute { statement, .. } = v.origin {
                counts[statement] += 1;
            }
        }
        counts
    }

    /// Evaluates every vertex of a graph built from `prog`, with `init`
    /// supplying version-0 values.
    pub fn evaluate(&self, prog: &DaapProgram, init: impl Fn(&str, &[i64]) -> f64) -> Vec<f64> {
        let mut values = vec![0.0; self.len()];
        let order = self.topo_order().expect("cDAG is acyclic by construction");
        for v in order {
            let vx = &self.vertices[v];
            values[v] = match &vx.origin {
                VertexOrigin::Compute { statement, .. } => {
                    let args: Vec<f64> = self.preds[v].iter().map(|&p| values[p]).collect();
                    prog.statements[*statement].expr.eval(&args)
                }
                _ => init(&vx.array, &vx.element),
            };
        }
        values
    }
}

/// Materializes the cDAG of `prog` for parameter value `n` with the default cap.
pub fn build_cdag(prog: &DaapProgram, n: i64) -> Result<Cdag, CdagError> {
    build_cdag_with_cap(prog, n, DEFAULT_VERTEX_CAP)
}

/// Materializes the cDAG, refusing once more than `cap` vertices would be created.
///
/// Statements execute in source order within an iteration; every read
/// resolves to the newest version of its element. Predecessors of a compute
/// vertex are listed in input-access order.
pub fn build_cdag_with_cap(prog: &DaapProgram, n: i64, cap: usize) -> Result<Cdag, CdagError> {
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut newest: HashMap<(String, Vec<i64>), usize> = HashMap::new();
    let mut failure = None;

    prog.for_each_instance(n, |s, env| {
        let st = &prog.statements[s];
        let mut preds = Vec::with_capacity(st.inputs.len());
        for (j, acc) in st.inputs.iter().enumerate() {
            let key = (acc.array.clone(), element_of(acc, env));
            let id = match newest.get(&key) {
                Some(&id) => id,
                None => {
                    if vertices.len() >= cap {
                        failure = Some(CdagError::TooLarge { cap });
                        return false;
                    }
                    vertices.push(Vertex {
                        array: key.0.clone(),
                        element: key.1.clone(),
                        version: 0,
                        origin: VertexOrigin::Input,
                    });
                    newest.insert(key.clone(), vertices.len() - 1);
                    vertices.len() - 1
                }
            };
            if let Some(first) = preds.iter().position(|&p| p == id) {
                failure = Some(CdagError::NotDisjoint(DisjointViolation {
                    statement: st.label.clone(),
                    point: point_of(prog, env),
                    first,
                    second: j,
                    element: key,
                }));
                return false;
            }
            preds.push(id);
        }
        if vertices.len() >= cap {
            failure = Some(CdagError::TooLarge { cap });
            return false;
        }
        let key = (st.output.array.clone(), element_of(&st.output, env));
        let version = newest.get(&key).map_or(1, |&prev| vertices[prev].version + 1);
        let id = vertices.len();
        vertices.push(Vertex {
            array: key.0.clone(),
            element: key.1.clone(),
            version,
            origin: VertexOrigin::Compute { statement: s, point: st.nest.iter().map(|&l| lookup_loop(prog, l, env)).collect() },
        });
        newest.insert(key, id);
        edges.extend(preds.into_iter().map(|p| (p, id)));
        true
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Cdag::from_parts(vertices, &edges)
}

fn lookup_loop(prog: &DaapProgram, l: usize, env: &[(String, i64)]) -> i64 {
    super::lookup_env(env, &prog.loops[l].name)
}

fn point_of(prog: &DaapProgram, env: &[(String, i64)]) -> Vec<(String, i64)> {
    env.iter().filter(|(name, _)| Some(name) != prog.param.as_ref()).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daap::{builtin, parse_daap};

    #[test]
    fn lu_statement_counts_match_closed_forms() {
        let prog = parse_daap(builtin::LU).unwrap();
        for n in 1..8usize {
            let g = build_cdag(&prog, n as i64).unwrap();
            let counts = g.statement_counts(2);
            assert_eq!(counts[0], n * (n - 1) / 2);
            assert_eq!(counts[1], n * (n - 1) * n.saturating_sub(2) / 3);
        }
    }

    #[test]
    fn cholesky_n4_has_four_s3_vertices() {
        let prog = parse_daap(builtin::CHOLESKY).unwrap();
        let g = build_cdag(&prog, 4).unwrap();
        assert_eq!(g.statement_counts(3), vec![4, 6, 4]);
    }

    #[test]
    fn unit_extent_program_has_one_compute_vertex() {
        let prog = parse_daap("for i in 0..1 { for j in 0..1 { S: C[i][j] = A[i][j] * B[j] } }").unwrap();
        let g = build_cdag(&prog, 0).unwrap();
        assert_eq!(g.computes().len(), 1);
        assert_eq!(g.inputs().len(), 2);
        assert_eq!(g.outputs().len(), 1);
    }

    #[test]
    fn in_degree_equals_input_access_count() {
        let prog = parse_daap(builtin::CHOLESKY).unwrap();
        let g = build_cdag(&prog, 5).unwrap();
        for v in g.computes() {
            let VertexOrigin::Compute { statement, .. } = g.vertex(v).origin else { unreachable!() };
            assert_eq!(g.preds(v).len(), prog.statements[statement].inputs.len());
        }
    }

    #[test]
    fn versions_chain_and_reads_see_newest() {
        let prog = parse_daap(builtin::LU_TEXTBOOK).unwrap();
        let g = build_cdag(&prog, 3).unwrap();
        // A[2][2] is updated at k=0 and k=1
        let versions: Vec<u32> = g
            .vertices()
            .iter()
            .filter(|v| v.array == "A" && v.element == [2, 2])
            .map(|v| v.version)
            .collect();
        assert_eq!(versions, vec![0, 1, 2]);
        let last = g.vertices().iter().position(|v| v.element == [2, 2] && v.version == 2).unwrap();
        let prev = g.vertices().iter().position(|v| v.element == [2, 2] && v.version == 1).unwrap();
        assert!(g.preds(last).contains(&prev));
        assert!(g.is_output(last));
    }

    #[test]
    fn builder_is_deterministic_and_topologically_ordered() {
        let prog = parse_daap(builtin::LU).unwrap();
        let a = build_cdag(&prog, 5).unwrap();
        let b = build_cdag(&prog, 5).unwrap();
        assert_eq!(a, b);
        for (s, d) in a.edges() {
            assert!(s < d);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let prog = parse_daap(builtin::LU).unwrap();
        assert_eq!(build_cdag_with_cap(&prog, 6, 10), Err(CdagError::TooLarge { cap: 10 }));
        let full = build_cdag(&prog, 3).unwrap();
        assert!(build_cdag_with_cap(&prog, 3, full.len()).is_ok());
        assert!(build_cdag_with_cap(&prog, 3, full.len() - 1).is_err());
    }

    #[test]
    fn lu_n3_fits_small_oracle_budget() {
        let prog = parse_daap(builtin::LU).unwrap();
        let g = build_cdag(&prog, 3).unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g.inputs().len(), 8);
    }

    #[test]
    fn duplicate_reads_are_rejected() {
        let prog = parse_daap("for i in 0..2 { S: B[i] = f(A[i], A[i]) }").unwrap();
        assert!(matches!(build_cdag(&prog, 0), Err(CdagError::NotDisjoint(_))));
    }

    #[test]
    fn cycles_are_rejected() {
        assert_eq!(Cdag::from_edges(2, &[(0, 1), (1, 0)]), Err(CdagError::Cyclic));
        assert_eq!(Cdag::from_edges(2, &[(0, 2)]), Err(CdagError::BadEdge { src: 0, dst: 2 }));
    }

    #[test]
    fn evaluation_reproduces_unpivoted_lu() {
        let prog = parse_daap(builtin::LU_TEXTBOOK).unwrap();
        let n = 4;
        let g = build_cdag(&prog, n).unwrap();
        let a = |i: i64, j: i64| if i == j { 10.0 + i as f64 } else { (i * 3 + j) as f64 * 0.25 };
        let vals = g.evaluate(&prog, |_, e| a(e[0], e[1]));
        let mut packed = vec![vec![0.0; n as usize]; n as usize];
        let mut best = vec![vec![0u32; n as usize]; n as usize];
        for (v, vx) in g.vertices().iter().enumerate() {
            let (i, j) = (vx.element[0] as usize, vx.element[1] as usize);
            if vx.version >= best[i][j] {
                best[i][j] = vx.version;
                packed[i][j] = vals[v];
            }
        }
        // L * U must reproduce A
        for i in 0..n as usize {
            for j in 0..n as usize {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    let l = if k == i { 1.0 } else { packed[i][k] };
                    s += l * packed[k][j];
                }
                assert!((s - a(i as i64, j as i64)).abs() < 1e-12, "({i},{j})");
            }
        }
    }
}
