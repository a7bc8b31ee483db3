//! Decision-boundary margin analysis, embedding export with a cluster-quality
//! score, and boundary grids for 2D graphs.
//!
//! "Distance to the decision boundary" is operationalized two ways, both
//! documented choices: the logit-gap margin (top1 − top2 logit, any model,
//! any dimension) and the grid-measured geometric distance to the predicted
//! class boundary (2D features only).

use crate::graph::{NormalizedAdjacency, Split};
use crate::matrix::DenseMatrix;
use crate::models::{forward_mlp, forward_mlp_row, predict_tmlp, ModelError, TrainedModel};
use crate::numerics::{pca_2d, NumericsError};
use crate::tape::FeatureSource;
use crate::Graph;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("layer {layer} is out of range for a depth-{depth} model")]
    InvalidLayer { layer: usize, depth: usize },
    #[error("boundary grids need 2-dimensional features, got {0} dimensions")]
    NotTwoDimensional(usize),
    #[error("grid resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Gap between the largest and second-largest entry; 0 for ties and for
/// degenerate single-class rows. Invariant under adding a constant to all
/// entries.
pub fn logit_margin(row: &[f64]) -> f64 {
    if row.len() < 2 {
        return 0.0;
    }
    let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in row {
        if v > top {
            second = top;
            top = v;
        } else if v > second {
            second = v;
        }
    }
    top - second
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginRow {
    pub node_id: usize,
    pub split: Option<Split>,
    pub margin_before: f64,
    pub margin_after: f64,
    pub delta: f64,
}

/// Per-node logit-gap margins before aggregation (plain MLP forward) and
/// after Test-Time Mixup, with summary statistics over the test mask (over
/// all nodes when the graph has no test mask).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    pub rows: Vec<MarginRow>,
    pub mean_delta: f64,
    pub fraction_improved: f64,
    /// min, q25, median, q75, max of the summarized deltas.
    pub delta_quantiles: [f64; 5],
}

impl MarginReport {
    /// Byte-stable CSV: identical reports serialize identically.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_id,split,margin_before,margin_after,delta\n");
        for row in &self.rows {
            let split = row.split.map_or("none", Split::as_str);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.node_id, split, row.margin_before, row.margin_after, row.delta
            ));
        }
        out
    }
}

/// Linear interpolation quantiles of an unsorted sample.
fn quantiles(values: &[f64]) -> [f64; 5] {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite margins"));
    let at = |q: f64| -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    [at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)]
}

/// Margins of every node before aggregation (plain MLP logits) and after
/// Test-Time Mixup inference.
pub fn margin_report(model: &TrainedModel, graph: &Graph) -> Result<MarginReport, AnalysisError> {
    let x = FeatureSource::Dense(graph.features().clone());
    let before = forward_mlp(&model.params, &x);
    let after = predict_tmlp(model, graph)?;
    let rows: Vec<MarginRow> = (0..graph.num_nodes())
        .map(|node| {
            let margin_before = logit_margin(before.row(node));
            let margin_after = logit_margin(after.row(node));
            MarginRow {
                node_id: node,
                split: graph.split_of(node),
                margin_before,
                margin_after,
                delta: margin_after - margin_before,
            }
        })
        .collect();
    let test_deltas: Vec<f64> = rows
        .iter()
        .filter(|r| r.split == Some(Split::Test))
        .map(|r| r.delta)
        .collect();
    let deltas = if test_deltas.is_empty() {
        rows.iter().map(|r| r.delta).collect()
    } else {
        test_deltas
    };
    let mean_delta = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let improved = deltas.iter().filter(|&&d| d > 0.0).count();
    Ok(MarginReport {
        mean_delta,
        fraction_improved: improved as f64 / deltas.len() as f64,
        delta_quantiles: quantiles(&deltas),
        rows,
    })
}

fn inference_adjacency(
    model: &TrainedModel,
    graph: &Graph,
) -> Result<NormalizedAdjacency, ModelError> {
    match &model.adj {
        Some(adj) if adj.power() == 1 && adj.self_loops() == model.spec.self_loops => {
            Ok(adj.clone())
        }
        _ => Ok(graph.normalize_adjacency_with(model.spec.self_loops, model.spec.norm)?),
    }
}

/// Hidden representation after the first `layer` linear maps of the plain
/// MLP forward (post-relu except at the final layer).
fn partial_mlp(params: &[DenseMatrix], x: &DenseMatrix, layer: usize) -> DenseMatrix {
    let mut h = x.clone();
    for (l, w) in params.iter().take(layer).enumerate() {
        h = h.matmul(w);
        if l + 1 < params.len() {
            for v in h.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    h
}

/// Same depth, aggregation interleaved before every linear map (the
/// Test-Time Mixup forward, truncated).
fn partial_aggregated(
    params: &[DenseMatrix],
    adj: &NormalizedAdjacency,
    x: &DenseMatrix,
    layer: usize,
) -> DenseMatrix {
    let mut h = x.clone();
    for (l, w) in params.iter().take(layer).enumerate() {
        h = adj.matrix().matmul_dense(&h);
        h = h.matmul(w);
        if l + 1 < params.len() {
            for v in h.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    h
}

/// Mean intra-class pairwise distance over mean inter-class pairwise
/// distance among labeled test nodes; lower means tighter class clusters.
/// `None` when either pair set is empty.
pub fn cluster_score(embeddings: &DenseMatrix, graph: &Graph) -> Option<f64> {
    let nodes: Vec<(usize, usize)> = (0..graph.num_nodes())
        .filter(|&i| graph.test_mask()[i])
        .filter_map(|i| graph.label(i).map(|l| (i, l)))
        .collect();
    let (mut intra_sum, mut intra_n) = (0.0f64, 0usize);
    let (mut inter_sum, mut inter_n) = (0.0f64, 0usize);
    for (a, &(i, li)) in nodes.iter().enumerate() {
        for &(j, lj) in nodes.iter().skip(a + 1) {
            let dist = embeddings
                .row(i)
                .iter()
                .zip(embeddings.row(j))
                .map(|(&u, &v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            if li == lj {
                intra_sum += dist;
                intra_n += 1;
            } else {
                inter_sum += dist;
                inter_n += 1;
            }
        }
    }
    if intra_n == 0 || inter_n == 0 || inter_sum == 0.0 {
        return None;
    }
    Some((intra_sum / intra_n as f64) / (inter_sum / inter_n as f64))
}

/// Hidden representations at one layer, their PCA-2D projections, and
/// cluster scores. `after` variants are present when the model supports
/// aggregated inference (TMLP/unified, or any model carrying an adjacency).
#[derive(Debug, Clone)]
pub struct EmbeddingExport {
    pub layer: usize,
    pub before: DenseMatrix,
    pub after: Option<DenseMatrix>,
    pub projection_before: DenseMatrix,
    pub projection_after: Option<DenseMatrix>,
    pub cluster_score_before: Option<f64>,
    pub cluster_score_after: Option<f64>,
}

/// Export representations after linear layer `layer` (1-based, up to the
/// model depth).
pub fn export_embeddings(
    model: &TrainedModel,
    graph: &Graph,
    layer: usize,
) -> Result<EmbeddingExport, AnalysisError> {
    let depth = model.params.len();
    if layer == 0 || layer > depth {
        return Err(AnalysisError::InvalidLayer { layer, depth });
    }
    let before = partial_mlp(&model.params, graph.features(), layer);
    let after = if model.spec.kind.aggregated_inference() || model.adj.is_some() {
        let adj = inference_adjacency(model, graph)?;
        Some(partial_aggregated(&model.params, &adj, graph.features(), layer))
    } else {
        None
    };
    let projection_before = pca_2d(&before)?;
    let projection_after = match &after {
        Some(h) => Some(pca_2d(h)?),
        None => None,
    };
    Ok(EmbeddingExport {
        layer,
        cluster_score_before: cluster_score(&before, graph),
        cluster_score_after: after.as_ref().and_then(|h| cluster_score(h, graph)),
        before,
        after,
        projection_before,
        projection_after,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridNode {
    pub node_id: usize,
    pub split: Option<Split>,
    pub label: Option<usize>,
    pub raw: (f64, f64),
    pub aggregated: (f64, f64),
    pub correct_raw: Option<bool>,
    pub correct_aggregated: Option<bool>,
}

/// Predicted class over a regular grid covering all raw and aggregated node
/// positions with at least 5% padding, plus per-node before/after positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
    /// Row-major `resolution × resolution` predicted classes at cell centers.
    pub cells: Vec<usize>,
    pub nodes: Vec<GridNode>,
}

impl BoundaryGrid {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes") + "\n"
    }

    fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let dx = (self.x_range.1 - self.x_range.0) / self.resolution as f64;
        let dy = (self.y_range.1 - self.y_range.0) / self.resolution as f64;
        (self.x_range.0 + (col as f64 + 0.5) * dx, self.y_range.0 + (row as f64 + 0.5) * dy)
    }

    /// Centers of cells with at least one 4-neighbor of a different class.
    pub fn boundary_cell_centers(&self) -> Vec<(f64, f64)> {
        let r = self.resolution;
        let mut centers = Vec::new();
        for row in 0..r {
            for col in 0..r {
                let class = self.cells[row * r + col];
                let differs = (row > 0 && self.cells[(row - 1) * r + col] != class)
                    || (row + 1 < r && self.cells[(row + 1) * r + col] != class)
                    || (col > 0 && self.cells[row * r + col - 1] != class)
                    || (col + 1 < r && self.cells[row * r + col + 1] != class);
                if differs {
                    centers.push(self.cell_center(row, col));
                }
            }
        }
        centers
    }

    /// Mean distance from test-node positions (raw or aggregated) to the
    /// nearest boundary cell center; `None` when the grid has a single
    /// class or the graph no test nodes.
    pub fn mean_test_distance_to_boundary(&self, aggregated: bool) -> Option<f64> {
        let boundary = self.boundary_cell_centers();
        if boundary.is_empty() {
            return None;
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for node in self.nodes.iter().filter(|n| n.split == Some(Split::Test)) {
            let (x, y) = if aggregated { node.aggregated } else { node.raw };
            let nearest = boundary
                .iter()
                .map(|&(bx, by)| ((x - bx) * (x - bx) + (y - by) * (y - by)).sqrt())
                .fold(f64::INFINITY, f64::min);
            total += nearest;
            count += 1;
        }
        (count > 0).then(|| total / count as f64)
    }
}

/// Evaluate the model's raw-feature classifier over a 2D grid. Node
/// positions are recorded twice: raw features and their one-step
/// aggregation (the depth-1 Test-Time Mixup position).
pub fn boundary_grid(
    model: &TrainedModel,
    graph: &Graph,
    resolution: usize,
) -> Result<BoundaryGrid, AnalysisError> {
    if graph.feature_dim() != 2 || model.params[0].rows() != 2 {
        return Err(AnalysisError::NotTwoDimensional(graph.feature_dim()));
    }
    if resolution < 2 {
        return Err(AnalysisError::InvalidResolution(resolution));
    }
    let adj = inference_adjacency(model, graph)?;
    let aggregated = adj.matrix().matmul_dense(graph.features());

    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for source in [graph.features(), &aggregated] {
        for node in 0..graph.num_nodes() {
            for (d, &v) in source.row(node).iter().enumerate() {
                min[d] = min[d].min(v);
                max[d] = max[d].max(v);
            }
        }
    }
    let pad = |lo: f64, hi: f64| -> (f64, f64) {
        let span = (hi - lo).max(1e-9);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let x_range = pad(min[0], max[0]);
    let y_range = pad(min[1], max[1]);

    let predict_point = |x: f64, y: f64| -> usize {
        let logits = forward_mlp_row(&model.params, &[x, y]);
        argmax(&logits)
    };
    let mut cells = Vec::with_capacity(resolution * resolution);
    let dx = (x_range.1 - x_range.0) / resolution as f64;
    let dy = (y_range.1 - y_range.0) / resolution as f64;
    for row in 0..resolution {
        let y = y_range.0 + (row as f64 + 0.5) * dy;
        for col in 0..resolution {
            let x = x_range.0 + (col as f64 + 0.5) * dx;
            cells.push(predict_point(x, y));
        }
    }

    let nodes = (0..graph.num_nodes())
        .map(|node| {
            let raw = (graph.features().get(node, 0), graph.features().get(node, 1));
            let agg = (aggregated.get(node, 0), aggregated.get(node, 1));
            let label = graph.label(node);
            GridNode {
                node_id: node,
                split: graph.split_of(node),
                label,
                raw,
                aggregated: agg,
                correct_raw: label.map(|l| predict_point(raw.0, raw.1) == l),
                correct_aggregated: label.map(|l| predict_point(agg.0, agg.1) == l),
            }
        })
        .collect();
    Ok(BoundaryGrid { x_range, y_range, resolution, cells, nodes })
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{make_split, synthetic_graph, SplitSpec, SyntheticKind};
    use crate::models::{ModelKind, ModelSpec};
    use crate::numerics::{glorot_init, standard_normal};
    use crate::trainer::{fit, TrainConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edgeless_graph(n: usize, d: usize, c: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = DenseMatrix::zeros(n, d);
        for v in features.data_mut() {
            *v = standard_normal(&mut rng);
        }
        let labels = (0..n).map(|i| Some(i % c)).collect();
        let mut test = vec![false; n];
        for (i, t) in test.iter_mut().enumerate() {
            *t = i % 2 == 1;
        }
        let train: Vec<bool> = test.iter().map(|&t| !t).collect();
        Graph::new(c, features, Vec::new(), labels, train, vec![false; n], test).unwrap()
    }

    fn hand_model(kind: ModelKind, params: Vec<DenseMatrix>, graph: &Graph) -> TrainedModel {
        let mut spec = ModelSpec::new(kind).with_depth(params.len());
        spec.hidden_dim = if params.len() > 1 { params[0].cols() } else { 64 };
        let adj = graph.normalize_adjacency(true).unwrap();
        TrainedModel { spec, params, relabel: None, adj: Some(adj), seed: 0 }
    }

    // No validation mask: `fit` returns the fully trained state. On this
    // easy dataset validation accuracy saturates within a few epochs, so a
    // val-selected snapshot would keep the near-initial (tilted) boundary.
    fn trained_tmlp(seed: u64) -> (TrainedModel, Graph) {
        let g = synthetic_graph(SyntheticKind::TwoClusters { seed: 11 });
        let split = SplitSpec { train_ratio: 0.8, val_ratio: 0.0, seed, stratified: true };
        let g = make_split(&g, &split).unwrap();
        let mut spec = ModelSpec::new(ModelKind::Tmlp).with_depth(1);
        spec.hidden_dim = 8;
        let config = TrainConfig { epochs: 200, ..TrainConfig::default() };
        let (model, _) = fit(&g, &spec, &config).unwrap();
        (model, g)
    }

    #[test]
    fn margin_is_shift_invariant_and_zero_on_ties() {
        assert_eq!(logit_margin(&[2.0, 2.0, 1.0]), 0.0);
        assert_eq!(logit_margin(&[0.5]), 0.0);
        let row = [1.0, -2.0, 0.25];
        let shifted: Vec<f64> = row.iter().map(|v| v + 7.5).collect();
        assert!((logit_margin(&row) - logit_margin(&shifted)).abs() < 1e-12);
        assert_eq!(logit_margin(&[3.0, 1.0]), 2.0);
    }

    #[test]
    fn identity_adjacency_gives_zero_deltas() {
        let g = edgeless_graph(10, 3, 2, 4);
        let params = vec![glorot_init(3, 4, 0), glorot_init(4, 2, 1)];
        let model = hand_model(ModelKind::Tmlp, params, &g);
        let report = margin_report(&model, &g).unwrap();
        assert_eq!(report.rows.len(), 10);
        for row in &report.rows {
            assert_eq!(row.margin_before, row.margin_after, "identity aggregation is exact");
            assert_eq!(row.delta, 0.0);
        }
        assert_eq!(report.mean_delta, 0.0);
        assert_eq!(report.fraction_improved, 0.0);
        assert_eq!(report.delta_quantiles, [0.0; 5]);
    }

    #[test]
    fn missing_adjacency_is_an_error() {
        let g = edgeless_graph(6, 3, 2, 5);
        let spec = ModelSpec::new(ModelKind::Mlp).with_depth(1);
        let model = TrainedModel {
            spec,
            params: vec![glorot_init(3, 2, 0)],
            relabel: None,
            adj: None,
            seed: 0,
        };
        assert!(matches!(
            margin_report(&model, &g).unwrap_err(),
            AnalysisError::Model(ModelError::MissingAdjacency)
        ));
    }

    #[test]
    fn trained_tmlp_margins_grow_on_two_clusters() {
        let (model, g) = trained_tmlp(0);
        let report = margin_report(&model, &g).unwrap();
        assert!(report.mean_delta > 0.0, "aggregation should push nodes from the boundary");
        assert!(report.fraction_improved >= 0.6, "got {}", report.fraction_improved);
        let csv = report.to_csv();
        assert!(csv.starts_with("node_id,split,margin_before,margin_after,delta\n"));
        assert_eq!(csv.lines().count(), 1 + g.num_nodes());
        assert_eq!(csv, margin_report(&model, &g).unwrap().to_csv());
    }

    #[test]
    fn identity_weights_export_inputs() {
        let g = edgeless_graph(8, 3, 3, 6);
        let model = hand_model(ModelKind::Tmlp, vec![DenseMatrix::identity(3)], &g);
        let export = export_embeddings(&model, &g, 1).unwrap();
        assert_eq!(&export.before, g.features());
        // Identity adjacency: the aggregated copy is bitwise the same.
        assert_eq!(export.after.as_ref().unwrap(), g.features());
        assert_eq!(export.cluster_score_before, export.cluster_score_after);
        assert_eq!(export.projection_before.cols(), 2);
    }

    #[test]
    fn invalid_layer_is_rejected() {
        let g = edgeless_graph(6, 3, 2, 7);
        let params = vec![glorot_init(3, 4, 0), glorot_init(4, 2, 1)];
        let model = hand_model(ModelKind::Tmlp, params, &g);
        assert!(matches!(
            export_embeddings(&model, &g, 0).unwrap_err(),
            AnalysisError::InvalidLayer { layer: 0, depth: 2 }
        ));
        assert!(matches!(
            export_embeddings(&model, &g, 3).unwrap_err(),
            AnalysisError::InvalidLayer { layer: 3, depth: 2 }
        ));
        assert!(export_embeddings(&model, &g, 2).is_ok());
    }

    #[test]
    fn aggregation_tightens_clusters_on_two_clusters() {
        let (model, g) = trained_tmlp(1);
        let export = export_embeddings(&model, &g, 1).unwrap();
        let before = export.cluster_score_before.unwrap();
        let after = export.cluster_score_after.unwrap();
        assert!(
            after < before,
            "intra/inter ratio should drop after aggregation: {after} vs {before}"
        );
    }

    #[test]
    fn linear_boundary_splits_grid_into_half_planes() {
        let g = edgeless_graph(6, 2, 2, 8);
        // Logits (x, −x): class 0 on x > 0, boundary is the vertical axis.
        let w = DenseMatrix::from_vec(2, 2, vec![1.0, -1.0, 0.0, 0.0]);
        let model = hand_model(ModelKind::Tmlp, vec![w], &g);
        let grid = boundary_grid(&model, &g, 100).unwrap();
        assert_eq!(grid.cells.len(), 100 * 100);
        for row in 0..100 {
            let transitions = (1..100)
                .filter(|&c| grid.cells[row * 100 + c] != grid.cells[row * 100 + c - 1])
                .count();
            assert!(transitions <= 1, "linear boundary crossed twice in row {row}");
        }
    }

    #[test]
    fn grid_box_pads_all_positions_by_five_percent() {
        let (model, g) = trained_tmlp(2);
        let grid = boundary_grid(&model, &g, 50).unwrap();
        let aggregated = model.adj.as_ref().unwrap().matrix().matmul_dense(g.features());
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for source in [g.features(), &aggregated] {
            for node in 0..g.num_nodes() {
                for (d, &v) in source.row(node).iter().enumerate() {
                    min[d] = min[d].min(v);
                    max[d] = max[d].max(v);
                }
            }
        }
        let pad_x = 0.05 * (max[0] - min[0]);
        let pad_y = 0.05 * (max[1] - min[1]);
        assert!(grid.x_range.0 <= min[0] - pad_x + 1e-12);
        assert!(grid.x_range.1 >= max[0] + pad_x - 1e-12);
        assert!(grid.y_range.0 <= min[1] - pad_y + 1e-12);
        assert!(grid.y_range.1 >= max[1] + pad_y - 1e-12);
    }

    #[test]
    fn aggregated_positions_sit_farther_from_the_boundary() {
        let (model, g) = trained_tmlp(3);
        let grid = boundary_grid(&model, &g, 80).unwrap();
        let raw = grid.mean_test_distance_to_boundary(false).unwrap();
        let agg = grid.mean_test_distance_to_boundary(true).unwrap();
        assert!(agg > raw, "aggregated {agg} should exceed raw {raw}");
        // And the JSON artifact is byte-stable.
        assert_eq!(grid.to_json(), boundary_grid(&model, &g, 80).unwrap().to_json());
    }

    #[test]
    fn non_2d_features_are_rejected() {
        let g = edgeless_graph(6, 3, 2, 9);
        let model = hand_model(ModelKind::Tmlp, vec![glorot_init(3, 2, 0)], &g);
        assert!(matches!(
            boundary_grid(&model, &g, 10).unwrap_err(),
            AnalysisError::NotTwoDimensional(3)
        ));
        let g2 = edgeless_graph(6, 2, 2, 10);
        let model2 = hand_model(ModelKind::Tmlp, vec![glorot_init(2, 2, 0)], &g2);
        assert!(matches!(
            boundary_grid(&model2, &g2, 1).unwrap_err(),
            AnalysisError::InvalidResolution(1)
        ));
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let q = quantiles(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(q, [1.0, 1.75, 2.5, 3.25, 4.0]);
    }
}

