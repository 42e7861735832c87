//! Undirected simple graphs, their Laplacians, and the generalized
//! Euclidean distance between node vectors.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Quadratic-form values in `[-NEGATIVE_FORM_TOL, 0)` are clamped to zero;
/// anything more negative signals numerical corruption.
const NEGATIVE_FORM_TOL: f64 = 1e-12;

/// Relative eigenvalue cutoff for the pseudoinverse null space.
const ZERO_EIGENVALUE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge ({a}, {b}) out of range for {nodes} nodes")]
    IndexOutOfRange { a: usize, b: usize, nodes: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("vector of length {got} does not match node count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quadratic form {0} is negative beyond tolerance")]
    NegativeQuadraticForm(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Undirected, unweighted simple graph. Edges are stored with the smaller
/// endpoint first, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Build a graph from an edge list. Reversed duplicates collapse to a
    /// single undirected edge; self-loops and out-of-range endpoints are
    /// rejected.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        assert!(node_count > 0, "node_count must be positive");
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(GraphError::IndexOutOfRange { a, b, nodes: node_count });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { node_count, edges: set.into_iter().collect() })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == node || b == node).count()
    }

    fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Dense Laplacian L = D - A. Row sums are exactly zero.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut l = DMatrix::zeros(n, n);
        for &(a, b) in &self.edges {
            l[(a, b)] = -1.0;
            l[(b, a)] = -1.0;
            l[(a, a)] += 1.0;
            l[(b, b)] += 1.0;
        }
        l
    }

    /// True iff every node pair is joined by a path (BFS from node 0).
    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency_lists();
        let mut seen = vec![false; self.node_count];
        let mut queue = vec![0usize];
        seen[0] = true;
        let mut visited = 1;
        while let Some(u) = queue.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    visited += 1;
                    queue.push(v);
                }
            }
        }
        visited == self.node_count
    }

    /// Parse the edge-list text format: one `u v` pair per line,
    /// whitespace-separated, `#` starts a comment line. An optional first
    /// comment `# nodes=N` fixes the node count; otherwise it is one plus
    /// the largest index seen.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut declared_nodes: Option<usize> = None;
        let mut pairs = Vec::new();
        let mut max_index = 0usize;
        let mut seen_any = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if declared_nodes.is_none() && !seen_any {
                    if let Some(value) = comment.strip_prefix("nodes=") {
                        declared_nodes =
                            Some(value.trim().parse().map_err(|_| GraphError::Parse {
                                line: lineno + 1,
                                message: format!("bad node count {value:?}"),
                            })?);
                    }
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(GraphError::Parse {
                        line: lineno + 1,
                        message: format!("expected two indices, got {line:?}"),
                    })
                }
            };
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| GraphError::Parse {
                    line: lineno + 1,
                    message: format!("bad node index {s:?}"),
                })
            };
            let (a, b) = (parse(a)?, parse(b)?);
            max_index = max_index.max(a).max(b);
            seen_any = true;
            pairs.push((a, b));
        }
        let node_count = declared_nodes.unwrap_or(if seen_any { max_index + 1 } else { 1 });
        Self::new(node_count, &pairs)
    }

    /// Serialize to the edge-list text format with a `# nodes=N` header.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# nodes={}", self.node_count).unwrap();
        for &(a, b) in &self.edges {
            writeln!(out, "{a} {b}").unwrap();
        }
        out
    }
}

/// Moore-Penrose pseudoinverse of a graph Laplacian, plus the eigenvalue
/// cutoff used to build it. On a connected graph the null space is the
/// all-ones vector, so rows of `pinv` sum to zero.
#[derive(Debug, Clone)]
pub struct LaplacianKernel {
    pinv: DMatrix<f64>,
    zero_tol: f64,
}

/// Largest Laplacian eigenvalue via power iteration (deterministic start,
/// diagnostic use only — it sizes the reported zero tolerance).
fn power_iteration_lambda_max(lap: &DMatrix<f64>) -> f64 {
    let n = lap.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64) / n as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = lap * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w / norm;
        let next_lambda = (lap * &next).dot(&next);
        if (next_lambda - lambda).abs() <= 1e-12 * next_lambda.abs() {
            return next_lambda;
        }
        lambda = next_lambda;
        v = next;
    }
    lambda
}

impl LaplacianKernel {
    /// Pseudoinverse of the Laplacian of a connected graph (the heat-flow
    /// reading of the distance presumes one component).
    ///
    /// Uses the rank-one shift identity L† = (L + 11ᵀ/n)⁻¹ − 11ᵀ/n: on a
    /// connected graph the null space is exactly span(1), so the shift
    /// replaces the single zero eigenvalue by 1 and leaves the rest alone,
    /// making the shifted matrix positive definite (Cholesky). This treats
    /// the null space exactly where an eigendecomposition would need a
    /// `1e-10 * lambda_max` cutoff — kept as the reported `zero_tol` — and
    /// stays accurate on the highly symmetric graphs (repeated eigenvalues)
    /// this crate generates.
    pub fn new(graph: &Graph) -> Result<Self, GraphError> {
        if !graph.is_connected() {
            return Err(GraphError::DisconnectedGraph);
        }
        let lap = graph.laplacian();
        let n = lap.nrows();
        let lambda_max = power_iteration_lambda_max(&lap);
        let zero_tol = ZERO_EIGENVALUE_REL_TOL * lambda_max;
        let ones = DMatrix::from_element(n, n, 1.0 / n as f64);
        let shifted = &lap + &ones;
        let inv = shifted
            .cholesky()
            .ok_or(GraphError::DisconnectedGraph)?
            .inverse();
        let raw = inv - &ones;
        // double-center so the all-ones direction is annihilated exactly
        let center = DMatrix::identity(n, n) - ones;
        let mut pinv = &center * raw * &center;
        // pin exact symmetry lost to rounding
        let pinv_t = pinv.transpose();
        pinv = (pinv + pinv_t) * 0.5;
        Ok(Self { pinv, zero_tol })
    }

    pub fn node_count(&self) -> usize {
        self.pinv.nrows()
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// d^T L^+ d with tiny negative values clamped to zero. Values below
    /// -1e-12 are reported as corruption.
    pub fn quadratic_form(&self, diff: &DVector<f64>) -> Result<f64, GraphError> {
        if diff.len() != self.node_count() {
            return Err(GraphError::DimensionMismatch {
                expected: self.node_count(),
                got: diff.len(),
            });
        }
        let q = (diff.transpose() * &self.pinv * diff)[(0, 0)];
        if q < -NEGATIVE_FORM_TOL {
            return Err(GraphError::NegativeQuadraticForm(q));
        }
        Ok(q.max(0.0))
    }

    /// Generalized Euclidean distance sqrt((a-b)^T L^+ (a-b)).
    pub fn ged(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64, GraphError> {
        if a.len() != self.node_count() || b.len() != self.node_count() {
            return Err(GraphError::DimensionMismatch {
                expected: self.node_count(),
                got: if a.len() != self.node_count() { a.len() } else { b.len() },
            });
        }
        let diff = a - b;
        Ok(self.quadratic_form(&diff)?.sqrt())
    }
}
