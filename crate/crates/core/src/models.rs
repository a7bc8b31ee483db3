//! Model families and their forward passes: MLP-k, GCN-k, SGC-k, PPNP, and
//! the MLP constructions HMLP (homophily-relabel training), TMLP (test-time
//! aggregation), and their unification. Also the per-node mixup-form
//! predictor used as the exact-equivalence oracle, and model checkpoints.

use crate::graph::{homophily_relabel, Graph, GraphError, NormKind, NormalizedAdjacency, SoftLabelMatrix};
use crate::matrix::{CsrMatrix, DenseMatrix};
use crate::numerics::NumericsError;
use crate::tape::{FeatureSource, TapeError, TapeProgram};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("depth {0} outside the supported range 1..=4")]
    InvalidDepth(usize),
    #[error("hidden_dim must be positive for depth >= 2")]
    InvalidHiddenDim,
    #[error("{0} must be >= 1")]
    InvalidPower(&'static str),
    #[error("mixup-form prediction is not defined for {0:?} (interleaved nonlinearity); use the layer-wise check")]
    UnsupportedKind(ModelKind),
    #[error("model stores no adjacency and the spec does not define one")]
    MissingAdjacency,
    #[error("homophily relabel covered no nodes")]
    NoCoveredNodes,
    #[error("train mask is empty")]
    EmptyTrainSet,
    #[error("layer {layer} invalid for depth {depth}")]
    InvalidLayer { layer: usize, depth: usize },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Gcn,
    Sgc,
    Ppnp,
    Hmlp,
    Tmlp,
    Unified,
}

impl ModelKind {
    /// Kinds whose training loss uses homophily-relabel soft targets over
    /// all covered nodes instead of hard labels over the train mask.
    pub fn uses_soft_targets(self) -> bool {
        matches!(self, ModelKind::Hmlp | ModelKind::Unified)
    }

    /// Kinds whose inference aggregates neighbors at test time.
    pub fn aggregated_inference(self) -> bool {
        matches!(self, ModelKind::Tmlp | ModelKind::Unified)
    }
}

/// Everything that determines a model's computation graph. `depth` is the
/// number of linear layers (for SGC, the adjacency power of its single
/// layer); `ppnp_power` and `relabel_power` apply only to PPNP and to
/// HMLP/unified respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub depth: usize,
    pub hidden_dim: usize,
    pub self_loops: bool,
    #[serde(default = "default_power")]
    pub ppnp_power: usize,
    #[serde(default = "default_power")]
    pub relabel_power: usize,
    #[serde(default)]
    pub norm: NormKind,
}

fn default_power() -> usize {
    1
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            depth: 2,
            hidden_dim: 64,
            self_loops: true,
            ppnp_power: 2,
            relabel_power: 1,
            norm: NormKind::Row,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(1..=4).contains(&self.depth) {
            return Err(ModelError::InvalidDepth(self.depth));
        }
        if self.linear_depth() >= 2 && self.hidden_dim == 0 {
            return Err(ModelError::InvalidHiddenDim);
        }
        if self.ppnp_power == 0 {
            return Err(ModelError::InvalidPower("ppnp_power"));
        }
        if self.relabel_power == 0 {
            return Err(ModelError::InvalidPower("relabel_power"));
        }
        Ok(())
    }

    /// Number of weight matrices (SGC always has exactly one).
    pub fn linear_depth(&self) -> usize {
        match self.kind {
            ModelKind::Sgc => 1,
            _ => self.depth,
        }
    }

    /// Weight shapes chaining feature_dim to num_classes.
    pub fn weight_shapes(&self, feature_dim: usize, num_classes: usize) -> Vec<(usize, usize)> {
        let k = self.linear_depth();
        if k == 1 {
            return vec![(feature_dim, num_classes)];
        }
        let mut shapes = vec![(feature_dim, self.hidden_dim)];
        for _ in 0..k - 2 {
            shapes.push((self.hidden_dim, self.hidden_dim));
        }
        shapes.push((self.hidden_dim, num_classes));
        shapes
    }
}

/// A trained model: weights plus whatever the spec needs at inference time
/// (the captured adjacency for aggregated inference, the relabel matrix for
/// inspection).
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: Vec<DenseMatrix>,
    pub relabel: Option<SoftLabelMatrix>,
    pub adj: Option<NormalizedAdjacency>,
    pub seed: u64,
}

impl TrainedModel {
    pub fn predict(&self, graph: &Graph) -> Result<DenseMatrix, ModelError> {
        predict(self, graph)
    }
}

/// Pick the cheaper feature representation; both produce bitwise-identical
/// products, so this never affects results.
pub fn feature_source(features: &DenseMatrix) -> FeatureSource {
    let nnz = features.data().iter().filter(|&&v| v != 0.0).count();
    if nnz * 4 < features.rows() * features.cols() {
        FeatureSource::Sparse(CsrMatrix::from_dense(features))
    } else {
        FeatureSource::Dense(features.clone())
    }
}

fn aggregate_source(adj: &CsrMatrix, x: &FeatureSource) -> FeatureSource {
    match x {
        FeatureSource::Dense(m) => FeatureSource::Dense(adj.matmul_dense(m)),
        FeatureSource::Sparse(m) => FeatureSource::Sparse(adj.matmul_sparse(m)),
    }
}

/// MLP-k: Lin → (Relu → Lin)^{k−1} on the raw features.
fn mlp_program(x: FeatureSource, depth: usize) -> TapeProgram {
    let mut program = TapeProgram::new(x);
    program.push_linear(0);
    for layer in 1..depth {
        program.push_relu();
        program.push_linear(layer);
    }
    program
}

/// GCN-k: each layer aggregates then applies a linear map, relu between
/// layers. The first (constant) aggregation Ã·X is folded into the leaf.
fn gcn_program(x: &FeatureSource, adj: &CsrMatrix, depth: usize) -> TapeProgram {
    let mut program = TapeProgram::new(aggregate_source(adj, x));
    program.push_linear(0);
    for layer in 1..depth {
        program.push_relu();
        program.push_aggregate(adj.clone());
        program.push_linear(layer);
    }
    program
}

/// SGC-k: Ãᵏ·X·W with the whole propagation folded into the leaf.
fn sgc_program(x: &FeatureSource, adj_k: &CsrMatrix) -> TapeProgram {
    let mut program = TapeProgram::new(aggregate_source(adj_k, x));
    program.push_linear(0);
    program
}

/// PPNP: MLP logits aggregated by Ãᵏ.
fn ppnp_program(x: FeatureSource, adj_k: &CsrMatrix, depth: usize) -> TapeProgram {
    let mut program = mlp_program(x, depth);
    program.push_aggregate(adj_k.clone());
    program
}

pub fn forward_mlp(params: &[DenseMatrix], x: &FeatureSource) -> DenseMatrix {
    mlp_program(x.clone(), params.len()).forward_logits(params)
}

pub fn forward_gcn(params: &[DenseMatrix], adj: &NormalizedAdjacency, x: &FeatureSource) -> DenseMatrix {
    gcn_program(x, adj.matrix(), params.len()).forward_logits(params)
}

pub fn forward_sgc(params: &[DenseMatrix], adj_k: &NormalizedAdjacency, x: &FeatureSource) -> DenseMatrix {
    sgc_program(x, adj_k.matrix()).forward_logits(params)
}

pub fn forward_ppnp(params: &[DenseMatrix], adj_k: &NormalizedAdjacency, x: &FeatureSource) -> DenseMatrix {
    ppnp_program(x.clone(), adj_k.matrix(), params.len()).forward_logits(params)
}

/// A model spec compiled against one graph: the training computation, the
/// (possibly different) inference computation, and the training targets'
/// supporting data.
#[derive(Debug)]
pub struct CompiledModel {
    pub train_program: TapeProgram,
    /// Present when inference differs from the training forward
    /// (TMLP/unified aggregated inference).
    pub eval_program: Option<TapeProgram>,
    pub shapes: Vec<(usize, usize)>,
    pub adj: Option<NormalizedAdjacency>,
    pub relabel: Option<SoftLabelMatrix>,
}

pub fn compile(spec: &ModelSpec, graph: &Graph) -> Result<CompiledModel, ModelError> {
    spec.validate()?;
    let x = feature_source(graph.features());
    let shapes = spec.weight_shapes(graph.feature_dim(), graph.num_classes());
    let train_nodes = graph.train_mask().iter().filter(|&&m| m).count();
    if !spec.kind.uses_soft_targets() && train_nodes == 0 {
        return Err(ModelError::EmptyTrainSet);
    }
    let relabel = if spec.kind.uses_soft_targets() {
        // Relabeling always runs on a self-looped adjacency: the node itself
        // belongs to its own contributor set.
        let base = graph.normalize_adjacency_with(true, spec.norm)?;
        let soft = homophily_relabel(graph, &base.pow(spec.relabel_power))?;
        if soft.covered_count() == 0 {
            return Err(ModelError::NoCoveredNodes);
        }
        Some(soft)
    } else {
        None
    };
    let adjacency = |power: usize| -> Result<NormalizedAdjacency, ModelError> {
        let base = graph.normalize_adjacency_with(spec.self_loops, spec.norm)?;
        Ok(if power == 1 { base } else { base.pow(power) })
    };
    let (train_program, eval_program, adj) = match spec.kind {
        ModelKind::Mlp | ModelKind::Hmlp => (mlp_program(x, spec.depth), None, None),
        ModelKind::Gcn => {
            let adj = adjacency(1)?;
            (gcn_program(&x, adj.matrix(), spec.depth), None, Some(adj))
        }
        ModelKind::Sgc => {
            let adj_k = adjacency(spec.depth)?;
            (sgc_program(&x, adj_k.matrix()), None, Some(adj_k))
        }
        ModelKind::Ppnp => {
            let adj_k = adjacency(spec.ppnp_power)?;
            (ppnp_program(x, adj_k.matrix(), spec.depth), None, Some(adj_k))
        }
        ModelKind::Tmlp | ModelKind::Unified => {
            let adj = adjacency(1)?;
            let eval = gcn_program(&x, adj.matrix(), spec.depth);
            (mlp_program(x, spec.depth), Some(eval), Some(adj))
        }
    };
    Ok(CompiledModel { train_program, eval_program, shapes, adj, relabel })
}

/// Full-graph logits of a trained model under its own inference rule.
pub fn predict(model: &TrainedModel, graph: &Graph) -> Result<DenseMatrix, ModelError> {
    let spec = &model.spec;
    spec.validate()?;
    let x = feature_source(graph.features());
    let stored = |power: usize| -> Result<NormalizedAdjacency, ModelError> {
        match &model.adj {
            Some(adj) if adj.power() == power && adj.self_loops() == spec.self_loops => Ok(adj.clone()),
            _ => {
                let base = graph.normalize_adjacency_with(spec.self_loops, spec.norm)?;
                Ok(if power == 1 { base } else { base.pow(power) })
            }
        }
    };
    Ok(match spec.kind {
        ModelKind::Mlp | ModelKind::Hmlp => forward_mlp(&model.params, &x),
        ModelKind::Gcn => forward_gcn(&model.params, &stored(1)?, &x),
        ModelKind::Sgc => forward_sgc(&model.params, &stored(spec.depth)?, &x),
        ModelKind::Ppnp => forward_ppnp(&model.params, &stored(spec.ppnp_power)?, &x),
        ModelKind::Tmlp | ModelKind::Unified => forward_gcn(&model.params, &stored(1)?, &x),
    })
}

/// Test-time mixup inference: the GCN-form forward with MLP weights.
/// Errors if the model kind never captured an adjacency.
pub fn predict_tmlp(model: &TrainedModel, graph: &Graph) -> Result<DenseMatrix, ModelError> {
    if !model.spec.kind.aggregated_inference() && model.adj.is_none() {
        return Err(ModelError::MissingAdjacency);
    }
    let x = feature_source(graph.features());
    let adj = match &model.adj {
        Some(adj) if adj.power() == 1 => adj.clone(),
        _ => graph.normalize_adjacency_with(model.spec.self_loops, model.spec.norm)?,
    };
    Ok(forward_gcn(&model.params, &adj, &x))
}

/// One MLP forward for a single feature row (vector-matrix products only).
pub(crate) fn forward_mlp_row(params: &[DenseMatrix], row: &[f64]) -> Vec<f64> {
    let mut h = row.to_vec();
    for (layer, w) in params.iter().enumerate() {
        let mut out = vec![0.0; w.cols()];
        for (k, &hv) in h.iter().enumerate() {
            if hv == 0.0 {
                continue;
            }
            for (o, &wv) in out.iter_mut().zip(w.row(k)) {
                *o += hv * wv;
            }
        }
        if layer + 1 < params.len() {
            for v in &mut out {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        h = out;
    }
    h
}

/// Row `node` of Ãᵏ by propagating a unit row vector — vector-matrix
/// products only, never a matrix power.
fn adjacency_row_power(adj: &CsrMatrix, node: usize, k: usize) -> Vec<(usize, f64)> {
    let n = adj.rows();
    let mut current: Vec<(usize, f64)> = vec![(node, 1.0)];
    for _ in 0..k {
        let mut acc = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        for &(j, w) in &current {
            let (cols, vals) = adj.row_entries(j);
            for (&c, &v) in cols.iter().zip(vals) {
                if acc[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                acc[c] += w * v;
            }
        }
        touched.sort_unstable();
        current = touched.iter().map(|&c| (c, acc[c])).collect();
    }
    current
}

/// The mixup view of one node's prediction: mix the relevant quantity with
/// weights λ = row of Ãᵏ, then finish the forward — no matrix-matrix
/// product anywhere. Defined for GCN-1 (input mixup), SGC-k (k-hop input
/// mixup), and PPNP (logit mixup). Must match the matrix forward to 1e-9.
pub fn mixup_form_predict(model: &TrainedModel, graph: &Graph, node: usize) -> Result<Vec<f64>, ModelError> {
    let spec = &model.spec;
    let power = match spec.kind {
        ModelKind::Gcn if spec.depth == 1 => 1,
        ModelKind::Sgc => spec.depth,
        ModelKind::Ppnp => spec.ppnp_power,
        other => return Err(ModelError::UnsupportedKind(other)),
    };
    let adj = graph.normalize_adjacency_with(spec.self_loops, spec.norm)?;
    let lambda = adjacency_row_power(adj.matrix(), node, power);
    match spec.kind {
        ModelKind::Gcn | ModelKind::Sgc => {
            // Input mixup: x̃ = Σ λⱼ xⱼ, then the single linear map.
            let mut mixed = vec![0.0; graph.feature_dim()];
            for &(j, w) in &lambda {
                for (m, &xv) in mixed.iter_mut().zip(graph.features().row(j)) {
                    *m += w * xv;
                }
            }
            Ok(forward_mlp_row(&model.params, &mixed))
        }
        ModelKind::Ppnp => {
            // Logit mixup: ỹ = Σ λⱼ · MLP(xⱼ).
            let mut mixed = vec![0.0; graph.num_classes()];
            for &(j, w) in &lambda {
                let logits = forward_mlp_row(&model.params, graph.features().row(j));
                for (m, l) in mixed.iter_mut().zip(logits) {
                    *m += w * l;
                }
            }
            Ok(mixed)
        }
        _ => unreachable!("filtered above"),
    }
}

/// Layer-wise mixup check for deep GCNs: at every aggregation step, the
/// matrix product row Ã·H must equal the explicit per-node weighted average
/// of neighbor representations. Returns the largest absolute deviation.
pub fn layerwise_mixup_deviation(
    params: &[DenseMatrix],
    adj: &NormalizedAdjacency,
    x: &FeatureSource,
) -> f64 {
    let mut worst = 0.0f64;
    let mut h = x.to_dense();
    for (layer, w) in params.iter().enumerate() {
        // Aggregate: matrix form vs per-node mixing.
        let aggregated = adj.matrix().matmul_dense(&h);
        for node in 0..h.rows() {
            let (cols, vals) = adj.row(node);
            let mut mixed = vec![0.0; h.cols()];
            for (&j, &lam) in cols.iter().zip(vals) {
                for (m, &hv) in mixed.iter_mut().zip(h.row(j)) {
                    *m += lam * hv;
                }
            }
            for (m, &a) in mixed.iter().zip(aggregated.row(node)) {
                worst = worst.max((m - a).abs());
            }
        }
        h = aggregated.matmul(w);
        if layer + 1 < params.len() {
            for v in h.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    worst
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    spec: ModelSpec,
    seed: u64,
    shapes: Vec<(usize, usize)>,
}

/// Serialize a model: one JSON header line, then each weight matrix as
/// row-major little-endian f64. The adjacency is not stored; it is rebuilt
/// from the graph at load/predict time.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    let header = CheckpointHeader {
        spec: model.spec,
        seed: model.seed,
        shapes: model.params.iter().map(|p| (p.rows(), p.cols())).collect(),
    };
    let mut bytes = serde_json::to_vec(&header).expect("header serializes");
    bytes.push(b'\n');
    for p in &model.params {
        for v in p.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| ModelError::Checkpoint {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelError> {
    let err = |message: String| ModelError::Checkpoint { path: path.display().to_string(), message };
    let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
    let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| err("missing header line".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[..newline]).map_err(|e| err(format!("bad header: {e}")))?;
    let mut offset = newline + 1;
    let expected: usize = header.shapes.iter().map(|&(r, c)| r * c * 8).sum();
    if bytes.len() - offset != expected {
        return Err(err(format!("payload is {} bytes, expected {expected}", bytes.len() - offset)));
    }
    let mut params = Vec::with_capacity(header.shapes.len());
    for &(rows, cols) in &header.shapes {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&bytes[offset..offset + 8]);
            data.push(f64::from_le_bytes(buf));
            offset += 8;
        }
        params.push(DenseMatrix::from_vec(rows, cols, data));
    }
    Ok(TrainedModel { spec: header.spec, params, relabel: None, adj: None, seed: header.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{synthetic_graph, SyntheticKind};
    use crate::numerics::glorot_init;

    fn fig3() -> Graph {
        synthetic_graph(SyntheticKind::ThreeNodeExample)
    }

    fn model_with(spec: ModelSpec, params: Vec<DenseMatrix>) -> TrainedModel {
        TrainedModel { spec, params, relabel: None, adj: None, seed: 0 }
    }

    #[test]
    fn gcn1_equals_mixed_feature_through_same_layer() {
        let g = fig3();
        let w = glorot_init(2, 2, 5);
        let adj = g.normalize_adjacency(true).unwrap();
        let x = feature_source(g.features());
        let logits = forward_gcn(std::slice::from_ref(&w), &adj, &x);
        // Node 2 mixes all three nodes uniformly: (x₀+x₁+x₂)/3 = (0.5, 0.5).
        let mixed = [0.5, 0.5];
        for c in 0..2 {
            let want = mixed[0] * w.get(0, c) + mixed[1] * w.get(1, c);
            assert!((logits.get(2, c) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mixup_form_matches_matrix_forward_on_random_graph() {
        let g = crate::checks::random_graph(77, 12, 4, 3);
        for spec in [
            ModelSpec { depth: 1, ..ModelSpec::new(ModelKind::Gcn) },
            ModelSpec { depth: 1, ..ModelSpec::new(ModelKind::Sgc) },
            ModelSpec { depth: 2, ..ModelSpec::new(ModelKind::Sgc) },
            ModelSpec { depth: 3, ..ModelSpec::new(ModelKind::Sgc) },
            ModelSpec { depth: 2, ppnp_power: 2, ..ModelSpec::new(ModelKind::Ppnp) },
        ] {
            let shapes = spec.weight_shapes(g.feature_dim(), g.num_classes());
            let params: Vec<DenseMatrix> =
                shapes.iter().enumerate().map(|(i, &(r, c))| glorot_init(r, c, 100 + i as u64)).collect();
            let model = model_with(spec, params);
            let matrix_logits = predict(&model, &g).unwrap();
            for node in 0..g.num_nodes() {
                let mixed = mixup_form_predict(&model, &g, node).unwrap();
                for (c, &m) in mixed.iter().enumerate() {
                    let diff = (m - matrix_logits.get(node, c)).abs();
                    assert!(diff < 1e-9, "{:?} node {node} class {c}: |Δ| = {diff}", spec.kind);
                }
            }
        }
    }

    #[test]
    fn mixup_form_rejects_interleaved_nonlinearity() {
        let g = fig3();
        let spec = ModelSpec::new(ModelKind::Gcn);
        let params = vec![glorot_init(2, 64, 0), glorot_init(64, 2, 1)];
        let err = mixup_form_predict(&model_with(spec, params), &g, 0).unwrap_err();
        assert!(matches!(err, ModelError::UnsupportedKind(ModelKind::Gcn)));
    }

    #[test]
    fn gcn2_layerwise_mixup_holds() {
        let g = crate::checks::random_graph(3, 10, 5, 3);
        let adj = g.normalize_adjacency(true).unwrap();
        let params = vec![glorot_init(5, 7, 1), glorot_init(7, 3, 2)];
        let x = feature_source(g.features());
        assert!(layerwise_mixup_deviation(&params, &adj, &x) < 1e-9);
    }

    #[test]
    fn edgeless_graph_collapses_models_to_mlp_bitwise() {
        let features = glorot_init(6, 4, 9);
        let g = Graph::new(
            3,
            features,
            vec![],
            (0..6).map(|i| Some(i % 3)).collect(),
            vec![true; 6],
            vec![false; 6],
            vec![false; 6],
        )
        .unwrap();
        let x = feature_source(g.features());
        let params = vec![glorot_init(4, 5, 1), glorot_init(5, 3, 2)];
        let mlp = forward_mlp(&params, &x);
        let adj = g.normalize_adjacency(true).unwrap();
        assert_eq!(forward_gcn(&params, &adj, &x), mlp, "GCN-2 with identity adjacency");
        assert_eq!(forward_ppnp(&params, &adj.pow(2), &x), mlp, "PPNP with identity adjacency");
        let single = vec![glorot_init(4, 3, 3)];
        assert_eq!(
            forward_sgc(&single, &adj.pow(3), &x),
            forward_mlp(&single, &x),
            "SGC-3 with identity adjacency"
        );
        let tmlp = TrainedModel {
            spec: ModelSpec::new(ModelKind::Tmlp),
            params: params.clone(),
            relabel: None,
            adj: Some(adj),
            seed: 0,
        };
        assert_eq!(predict_tmlp(&tmlp, &g).unwrap(), mlp, "TMLP with identity adjacency");
    }

    #[test]
    fn compile_validates_masks_and_coverage() {
        let g = Graph::new(
            2,
            DenseMatrix::zeros(3, 2),
            vec![(0, 1)],
            vec![Some(0), Some(1), None],
            vec![false; 3],
            vec![false; 3],
            vec![false; 3],
        )
        .unwrap();
        assert!(matches!(
            compile(&ModelSpec::new(ModelKind::Gcn), &g).unwrap_err(),
            ModelError::EmptyTrainSet
        ));
        assert!(matches!(
            compile(&ModelSpec::new(ModelKind::Hmlp), &g).unwrap_err(),
            ModelError::NoCoveredNodes
        ));
        let bad = ModelSpec { depth: 5, ..ModelSpec::new(ModelKind::Mlp) };
        assert!(matches!(compile(&bad, &fig3()).unwrap_err(), ModelError::InvalidDepth(5)));
    }

    #[test]
    fn ppnp_on_fig3_averages_mlp_logits() {
        let g = fig3();
        let spec = ModelSpec { depth: 2, ppnp_power: 1, ..ModelSpec::new(ModelKind::Ppnp) };
        let params = vec![glorot_init(2, 8, 4), glorot_init(8, 2, 5)];
        let x = feature_source(g.features());
        let adj = g.normalize_adjacency(true).unwrap();
        let ppnp = forward_ppnp(&params, &adj, &x);
        let mlp = forward_mlp(&params, &x);
        for c in 0..2 {
            let mean = (mlp.get(0, c) + mlp.get(1, c) + mlp.get(2, c)) / 3.0;
            assert!((ppnp.get(2, c) - mean).abs() < 1e-12);
        }
        let model = model_with(spec, params);
        let mixed = mixup_form_predict(&model, &g, 2).unwrap();
        for (c, &m) in mixed.iter().enumerate() {
            assert!((m - ppnp.get(2, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_roundtrip_preserves_weights_exactly() {
        let spec = ModelSpec { depth: 2, ..ModelSpec::new(ModelKind::Tmlp) };
        let model = model_with(spec, vec![glorot_init(4, 64, 1), glorot_init(64, 3, 2)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.spec, model.spec);
        assert_eq!(loaded.params, model.params);
        assert_eq!(loaded.seed, model.seed);
        assert!(loaded.adj.is_none());
    }

    #[test]
    fn corrupt_checkpoint_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(load_model(&path).unwrap_err(), ModelError::Checkpoint { .. }));
    }
}
