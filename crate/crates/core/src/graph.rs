//! Graph representation, adjacency normalization, k-hop powers, and the
//! homophily relabel operator.

use crate::matrix::{CsrMatrix, DenseMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node {0} has no neighbors and self-loops are disabled")]
    IsolatedNode(usize),
    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("self-edge on node {0}; self-loops are added at normalization time, not in the edge list")]
    SelfEdge(usize),
    #[error("{what} has length {got}, expected {want}")]
    LengthMismatch { what: &'static str, got: usize, want: usize },
    #[error("node {node} is in more than one of train/val/test")]
    OverlappingMasks { node: usize },
    #[error("node {node} is in the {mask} mask but has no label")]
    UnlabeledMaskedNode { node: usize, mask: &'static str },
    #[error("label {label} of node {node} is outside 0..{num_classes}")]
    ClassOutOfRange { node: usize, label: usize, num_classes: usize },
    #[error("homophily relabel requires an adjacency built with self-loops")]
    RelabelWithoutSelfLoops,
}

/// Which of the three transductive roles a node plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Adjacency normalization scheme. `Row` is D⁻¹(A+I); `Symmetric` is
/// D^{-1/2}(A+I)D^{-1/2} (rows of the symmetric form are not stochastic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Row,
    Symmetric,
}

/// Immutable node-classification graph: features, undirected edges, labels,
/// and disjoint train/val/test masks. Unlabeled nodes may appear in no mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    num_classes: usize,
    features: DenseMatrix,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    labels: Vec<Option<usize>>,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
    test_mask: Vec<bool>,
}

impl Graph {
    /// Build a graph, canonicalizing edges (undirected, deduplicated,
    /// endpoints sorted) and validating every invariant.
    pub fn new(
        num_classes: usize,
        features: DenseMatrix,
        edges: Vec<(usize, usize)>,
        labels: Vec<Option<usize>>,
        train_mask: Vec<bool>,
        val_mask: Vec<bool>,
        test_mask: Vec<bool>,
    ) -> Result<Self, GraphError> {
        let num_nodes = features.rows();
        if labels.len() != num_nodes {
            return Err(GraphError::LengthMismatch { what: "labels", got: labels.len(), want: num_nodes });
        }
        for (what, mask) in [("train mask", &train_mask), ("val mask", &val_mask), ("test mask", &test_mask)] {
            if mask.len() != num_nodes {
                return Err(GraphError::LengthMismatch { what, got: mask.len(), want: num_nodes });
            }
        }
        let mut canonical: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EdgeOutOfRange(u, v, num_nodes));
            }
            if u == v {
                return Err(GraphError::SelfEdge(u));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        for (node, label) in labels.iter().enumerate() {
            if let Some(c) = *label {
                if c >= num_classes {
                    return Err(GraphError::ClassOutOfRange { node, label: c, num_classes });
                }
            }
        }
        for node in 0..num_nodes {
            let memberships = train_mask[node] as u8 + val_mask[node] as u8 + test_mask[node] as u8;
            if memberships > 1 {
                return Err(GraphError::OverlappingMasks { node });
            }
            let mask_name = if train_mask[node] {
                Some("train")
            } else if val_mask[node] {
                Some("val")
            } else if test_mask[node] {
                Some("test")
            } else {
                None
            };
            if let Some(mask) = mask_name {
                if labels[node].is_none() {
                    return Err(GraphError::UnlabeledMaskedNode { node, mask });
                }
            }
        }
        let mut neighbors = vec![Vec::new(); num_nodes];
        for &(u, v) in &canonical {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            num_nodes,
            num_classes,
            features,
            edges: canonical,
            neighbors,
            labels,
            train_mask,
            val_mask,
            test_mask,
        })
    }

    /// Same graph with fresh masks (used by split generation).
    pub fn with_masks(
        &self,
        train_mask: Vec<bool>,
        val_mask: Vec<bool>,
        test_mask: Vec<bool>,
    ) -> Result<Self, GraphError> {
        Self::new(
            self.num_classes,
            self.features.clone(),
            self.edges.clone(),
            self.labels.clone(),
            train_mask,
            val_mask,
            test_mask,
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    /// Canonical undirected edge list (u < v, sorted, deduplicated).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn val_mask(&self) -> &[bool] {
        &self.val_mask
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test_mask
    }

    pub fn mask(&self, split: Split) -> &[bool] {
        match split {
            Split::Train => &self.train_mask,
            Split::Val => &self.val_mask,
            Split::Test => &self.test_mask,
        }
    }

    pub fn split_of(&self, node: usize) -> Option<Split> {
        if self.train_mask[node] {
            Some(Split::Train)
        } else if self.val_mask[node] {
            Some(Split::Val)
        } else if self.test_mask[node] {
            Some(Split::Test)
        } else {
            None
        }
    }

    /// One-hot label matrix [N×C]; unlabeled nodes get all-zero rows.
    pub fn one_hot_labels(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.num_nodes, self.num_classes);
        for (i, label) in self.labels.iter().enumerate() {
            if let Some(c) = *label {
                out.set(i, c, 1.0);
            }
        }
        out
    }

    /// Row-normalized adjacency D⁻¹(A+I) (or D⁻¹A without self-loops).
    pub fn normalize_adjacency(&self, self_loops: bool) -> Result<NormalizedAdjacency, GraphError> {
        self.normalize_adjacency_with(self_loops, NormKind::Row)
    }

    pub fn normalize_adjacency_with(
        &self,
        self_loops: bool,
        norm: NormKind,
    ) -> Result<NormalizedAdjacency, GraphError> {
        let mut entries: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.num_nodes);
        let degree_with_loops = |i: usize| (self.degree(i) + usize::from(self_loops)) as f64;
        for i in 0..self.num_nodes {
            if !self_loops && self.degree(i) == 0 {
                return Err(GraphError::IsolatedNode(i));
            }
            let mut cols: Vec<usize> = self.neighbors[i].clone();
            if self_loops {
                let pos = cols.partition_point(|&c| c < i);
                cols.insert(pos, i);
            }
            let row = match norm {
                NormKind::Row => {
                    let w = 1.0 / degree_with_loops(i);
                    cols.into_iter().map(|c| (c, w)).collect()
                }
                NormKind::Symmetric => {
                    let di = degree_with_loops(i).sqrt();
                    cols.into_iter().map(|c| (c, 1.0 / (di * degree_with_loops(c).sqrt()))).collect()
                }
            };
            entries.push(row);
        }
        Ok(NormalizedAdjacency {
            matrix: CsrMatrix::from_row_entries(self.num_nodes, self.num_nodes, entries),
            self_loops,
            power: 1,
            norm,
        })
    }
}

/// Normalized adjacency Ã (optionally a k-th power Ãᵏ). With row
/// normalization every row is a probability distribution over a node's
/// (k-hop) neighborhood — the mixing weights λ of the mixup view.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
    self_loops: bool,
    power: usize,
    norm: NormKind,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn power(&self) -> usize {
        self.power
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    /// Explicit k-th power via repeated sparse-sparse multiplication.
    /// k = 1 returns a clone.
    pub fn pow(&self, k: usize) -> NormalizedAdjacency {
        assert!(k >= 1, "adjacency power must be >= 1");
        let mut matrix = self.matrix.clone();
        for _ in 1..k {
            matrix = matrix.matmul_sparse(&self.matrix);
        }
        NormalizedAdjacency { matrix, self_loops: self.self_loops, power: self.power * k, norm: self.norm }
    }

    /// Mixing weights for one node: the structural-nonzero columns of row i
    /// and their values.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        self.matrix.row_entries(i)
    }

    /// Largest |row sum − 1| over all rows (0 for exact row-stochasticity).
    pub fn max_row_sum_deviation(&self) -> f64 {
        self.matrix
            .row_sums()
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-node soft label distributions from homophily relabel, plus the mask
/// of nodes that had at least one labeled contributor.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix {
    matrix: DenseMatrix,
    coverage_mask: Vec<bool>,
}

impl SoftLabelMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn coverage_mask(&self) -> &[bool] {
        &self.coverage_mask
    }

    pub fn covered_count(&self) -> usize {
        self.coverage_mask.iter().filter(|&&c| c).count()
    }
}

/// Homophily relabel: each node's soft label is the unweighted mean of the
/// one-hot labels of the train nodes in its neighborhood (the structural
/// nonzeros of `adj`'s row, which include the node itself because `adj`
/// carries self-loops). Nodes with no labeled contributor get a zero row and
/// `coverage_mask = false`.
pub fn homophily_relabel(graph: &Graph, adj: &NormalizedAdjacency) -> Result<SoftLabelMatrix, GraphError> {
    if !adj.self_loops() {
        return Err(GraphError::RelabelWithoutSelfLoops);
    }
    let n = graph.num_nodes();
    let c = graph.num_classes();
    let mut matrix = DenseMatrix::zeros(n, c);
    let mut coverage_mask = vec![false; n];
    for i in 0..n {
        let (cols, _) = adj.row(i);
        let mut count = 0usize;
        for &j in cols {
            if graph.train_mask()[j] {
                // Masked nodes always carry labels (graph invariant).
                let label = graph.label(j).expect("train node must be labeled");
                let v = matrix.get(i, label);
                matrix.set(i, label, v + 1.0);
                count += 1;
            }
        }
        if count > 0 {
            coverage_mask[i] = true;
            let inv = 1.0 / count as f64;
            for v in matrix.row_mut(i) {
                *v *= inv;
            }
        }
    }
    Ok(SoftLabelMatrix { matrix, coverage_mask })
}
