//! Undirected graphs with dense node features, synthetic generators, and
//! the `.gmngraph` text format.
//!
//! Graphs are immutable after construction and cheap to share. The edge list
//! is kept canonical: every edge is stored once as `(min, max)`, sorted and
//! deduplicated. Self-loops `(u, u)` are rejected unless explicitly allowed.

mod generate;
mod io;

pub use generate::{generate, GenSpec};
pub use io::{read_graph, write_graph};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge endpoint {index} out of range for {n} nodes")]
    IndexOutOfRange { index: u32, n: usize },
    #[error("self-loop at node {node} (self_loops flag not set)")]
    DuplicateSelfLoop { node: u32 },
    #[error("feature matrix has {got} values, expected {expected} (n*l)")]
    FeatureRowMismatch { got: usize, expected: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("unsupported graph file version {found:?} (expected v1)")]
    VersionMismatch { found: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// What a dataset asks the model to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    NodeClass,
    GraphClass,
    GraphRegression,
    None,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::NodeClass => "node_class",
            TaskKind::GraphClass => "graph_class",
            TaskKind::GraphRegression => "graph_reg",
            TaskKind::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "node_class" => Some(TaskKind::NodeClass),
            "graph_class" => Some(TaskKind::GraphClass),
            "graph_reg" => Some(TaskKind::GraphRegression),
            "none" => Some(TaskKind::None),
            _ => None,
        }
    }
}

/// Ground-truth labels attached to a graph, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    None,
    /// One integer class per node.
    Node(Vec<i64>),
    /// A single graph-level target (class index or regression value).
    Graph(f64),
}

/// Sparse undirected graph with dense node features.
///
/// Node features are stored row-major in f64 regardless of the scalar type
/// the model runs in; conversion happens when tensors are built.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    l: usize,
    edges: Vec<(u32, u32)>,
    x: Vec<f64>,
    degrees: Vec<u32>,
    labels: Labels,
    task: TaskKind,
    self_loops: bool,
    /// Reserved; no current format or generator populates edge features.
    edge_features: Option<Vec<f64>>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list, canonicalizing it.
    ///
    /// `x` is the n×l feature matrix, row-major. Self-loops are rejected.
    pub fn build(n: usize, edges: &[(u32, u32)], x: Vec<f64>, l: usize) -> Result<Self, GraphError> {
        Self::build_with(n, edges, x, l, false)
    }

    /// As [`Graph::build`], with self-loops permitted when `self_loops` is set.
    pub fn build_with(
        n: usize,
        edges: &[(u32, u32)],
        x: Vec<f64>,
        l: usize,
        self_loops: bool,
    ) -> Result<Self, GraphError> {
        if x.len() != n * l {
            return Err(GraphError::FeatureRowMismatch {
                got: x.len(),
                expected: n * l,
            });
        }
        let mut canon = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u as usize >= n {
                return Err(GraphError::IndexOutOfRange { index: u, n });
            }
            if v as usize >= n {
                return Err(GraphError::IndexOutOfRange { index: v, n });
            }
            if u == v && !self_loops {
                return Err(GraphError::DuplicateSelfLoop { node: u });
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        let mut degrees = vec![0u32; n];
        for &(u, v) in &canon {
            degrees[u as usize] += 1;
            if u != v {
                degrees[v as usize] += 1;
            }
        }
        Ok(Graph {
            n,
            l,
            edges: canon,
            x,
            degrees,
            labels: Labels::None,
            task: TaskKind::None,
            self_loops,
            edge_features: None,
        })
    }

    pub fn with_labels(mut self, labels: Labels, task: TaskKind) -> Self {
        self.labels = labels;
        self.task = task;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node feature dimension l.
    pub fn feature_dim(&self) -> usize {
        self.l
    }

    /// Canonical `(min, max)` edge list, sorted and unique.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Row-major n×l feature matrix.
    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn feature_row(&self, u: usize) -> &[f64] {
        &self.x[u * self.l..(u + 1) * self.l]
    }

    /// Degree = row sum of the adjacency matrix (a self-loop contributes 1).
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn has_self_loops_flag(&self) -> bool {
        self.self_loops
    }

    /// Returns a copy with features replaced (same shape).
    pub fn with_features(&self, x: Vec<f64>) -> Result<Self, GraphError> {
        if x.len() != self.n * self.l {
            return Err(GraphError::FeatureRowMismatch {
                got: x.len(),
                expected: self.n * self.l,
            });
        }
        let mut g = self.clone();
        g.x = x;
        Ok(g)
    }

    /// Returns a copy with `(u, u)` added for every node.
    pub fn with_self_loops(&self) -> Self {
        let mut edges = self.edges.clone();
        for u in 0..self.n as u32 {
            edges.push((u, u));
        }
        Graph::build_with(self.n, &edges, self.x.clone(), self.l, true)
            .expect("adding self-loops to a valid graph cannot fail")
    }

    /// Relabels nodes: node `u` becomes `perm[u]`. Labels and features move
    /// with their nodes.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, GraphError> {
        if !is_permutation(perm, self.n) {
            return Err(GraphError::InvalidParams(format!(
                "not a permutation of [0, {})",
                self.n
            )));
        }
        let edges: Vec<(u32, u32)> = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u as usize] as u32, perm[v as usize] as u32))
            .collect();
        let mut x = vec![0.0; self.n * self.l];
        for u in 0..self.n {
            let nu = perm[u];
            x[nu * self.l..(nu + 1) * self.l].copy_from_slice(self.feature_row(u));
        }
        let labels = match &self.labels {
            Labels::Node(ls) => {
                let mut moved = vec![0i64; self.n];
                for u in 0..self.n {
                    moved[perm[u]] = ls[u];
                }
                Labels::Node(moved)
            }
            other => other.clone(),
        };
        Ok(Graph::build_with(self.n, &edges, x, self.l, self.self_loops)?
            .with_labels(labels, self.task))
    }

    /// Disjoint union; parts must share the feature dimension. Labels are
    /// dropped.
    pub fn disjoint_union(parts: &[Graph]) -> Result<Self, GraphError> {
        let Some(first) = parts.first() else {
            return Err(GraphError::InvalidParams("empty disjoint union".into()));
        };
        let l = first.l;
        let mut edges = Vec::new();
        let mut x = Vec::new();
        let mut offset = 0u32;
        let mut self_loops = false;
        for g in parts {
            if g.l != l {
                return Err(GraphError::InvalidParams(
                    "disjoint union parts disagree on feature dimension".into(),
                ));
            }
            edges.extend(g.edges.iter().map(|&(u, v)| (u + offset, v + offset)));
            x.extend_from_slice(&g.x);
            self_loops |= g.self_loops;
            offset += g.n as u32;
        }
        Graph::build_with(offset as usize, &edges, x, l, self_loops)
    }

    /// Checks every structural invariant; used by generator tests.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.x.len() != self.n * self.l {
            return Err(GraphError::FeatureRowMismatch {
                got: self.x.len(),
                expected: self.n * self.l,
            });
        }
        for w in self.edges.windows(2) {
            if w[0] >= w[1] {
                return Err(GraphError::InvalidParams("edge list not sorted+unique".into()));
            }
        }
        for &(u, v) in &self.edges {
            if u > v {
                return Err(GraphError::InvalidParams("edge not in (min,max) form".into()));
            }
            if v as usize >= self.n {
                return Err(GraphError::IndexOutOfRange { index: v, n: self.n });
            }
            if u == v && !self.self_loops {
                return Err(GraphError::DuplicateSelfLoop { node: u });
            }
        }
        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(GraphError::InvalidParams("non-finite feature".into()));
        }
        Ok(())
    }
}

pub(crate) fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Train/val/test partition of a dataset by graph index.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub task: TaskKind,
}

impl DatasetSplit {
    /// Validates disjointness and coverage over `dataset_len` graphs.
    pub fn new(
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
        task: TaskKind,
        dataset_len: usize,
    ) -> Result<Self, GraphError> {
        let mut seen = vec![false; dataset_len];
        for &i in train.iter().chain(&val).chain(&test) {
            if i >= dataset_len {
                return Err(GraphError::InvalidSplit(format!(
                    "index {i} out of range for {dataset_len} graphs"
                )));
            }
            if seen[i] {
                return Err(GraphError::InvalidSplit(format!("index {i} appears twice")));
            }
            seen[i] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(GraphError::InvalidSplit("split does not cover the dataset".into()));
        }
        Ok(DatasetSplit { train, val, test, task })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_connected_graph() {
        let g = Graph::build(2, &[(0, 1)], vec![0.0, 0.0], 1).unwrap();
        assert_eq!(g.degrees(), &[1, 1]);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn edges_canonicalized() {
        let g = Graph::build(3, &[(0, 1), (1, 0), (1, 2)], vec![0.0; 3], 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn endpoint_out_of_range() {
        let err = Graph::build(3, &[(0, 3)], vec![0.0; 3], 1).unwrap_err();
        assert!(matches!(err, GraphError::IndexOutOfRange { index: 3, n: 3 }));
    }

    #[test]
    fn self_loop_rejected_without_flag() {
        let err = Graph::build(2, &[(1, 1)], vec![0.0; 2], 1).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateSelfLoop { node: 1 }));
        let g = Graph::build_with(2, &[(1, 1), (0, 1)], vec![0.0; 2], 1, true).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 1)]);
        assert_eq!(g.degrees(), &[1, 2]);
    }

    #[test]
    fn feature_shape_checked() {
        let err = Graph::build(3, &[], vec![0.0; 5], 2).unwrap_err();
        assert!(matches!(err, GraphError::FeatureRowMismatch { got: 5, expected: 6 }));
    }

    #[test]
    fn permute_moves_everything() {
        let g = Graph::build(3, &[(0, 1)], vec![1.0, 2.0, 3.0], 1)
            .unwrap()
            .with_labels(Labels::Node(vec![7, 8, 9]), TaskKind::NodeClass);
        let p = g.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.edges(), &[(0, 2)]);
        assert_eq!(p.features(), &[2.0, 3.0, 1.0]);
        assert_eq!(p.labels(), &Labels::Node(vec![8, 9, 7]));
    }

    #[test]
    fn split_invariants() {
        assert!(DatasetSplit::new(vec![0, 1], vec![2], vec![3], TaskKind::None, 4).is_ok());
        assert!(DatasetSplit::new(vec![0, 1], vec![1], vec![3], TaskKind::None, 4).is_err());
        assert!(DatasetSplit::new(vec![0, 1], vec![2], vec![], TaskKind::None, 4).is_err());
    }
}
