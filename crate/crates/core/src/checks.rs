//! Self-checking oracle suite: randomized mixup-equivalence checks, the
//! worked relabel example, edgeless collapse identities, row-stochasticity,
//! and finite-difference gradient checks. The CLI's equivalence command and
//! the acceptance tests both run these, so a failure reads the same way in
//! either place.

use crate::bundle::{synthetic_graph, SyntheticKind};
use crate::graph::Graph;
use crate::matrix::{CsrMatrix, DenseMatrix};
use crate::models::{
    compile, forward_gcn, forward_mlp, forward_ppnp, forward_sgc, layerwise_mixup_deviation,
    mixup_form_predict, predict_tmlp, ModelKind, ModelSpec, TrainedModel,
};
use crate::numerics::{
    derive_seed, finite_difference_gradients, glorot_init, max_relative_error, soft_cross_entropy,
    standard_normal,
};
use crate::tape::FeatureSource;
use crate::trainer::training_targets;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one named invariant check. `detail` carries the worst
/// deviation and where it occurred, so a failure is immediately locatable.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {} — {}", self.name, self.detail)
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// Parameters of one suite run. Defaults match the acceptance gate: 50
/// random graphs of up to 32 nodes, 1e-9 equivalence tolerance, 1e-5
/// relative gradient tolerance.
#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub graphs: usize,
    pub max_nodes: usize,
    pub tolerance: f64,
    pub gradient_tolerance: f64,
    pub seed: u64,
    /// Deliberately corrupt one adjacency row (scale by 1.1) so the
    /// row-stochasticity check must fail; verifies the suite can detect a
    /// broken normalization rather than vacuously passing.
    pub inject_row_sum_fault: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            graphs: 50,
            max_nodes: 32,
            tolerance: 1e-9,
            gradient_tolerance: 1e-5,
            seed: 0,
            inject_row_sum_fault: false,
        }
    }
}

/// All suite checks in a fixed order.
pub fn run_suite(config: &SuiteConfig) -> Vec<CheckResult> {
    vec![
        check_row_stochasticity(config),
        check_mixup_equivalence(config),
        check_layerwise_gcn2(config),
        check_relabel_example(),
        check_edgeless_collapse(config.seed),
        check_gradients(config.gradient_tolerance, config.seed),
    ]
}

/// Random labeled graph for randomized checks: Erdős–Rényi edges at mean
/// degree ≈ 3, standard-normal features, uniform labels on every node, and
/// masks with at least one train node. Deterministic per seed.
pub fn random_graph(seed: u64, num_nodes: usize, feature_dim: usize, num_classes: usize) -> Graph {
    assert!(num_nodes >= 2 && num_classes >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DenseMatrix::zeros(num_nodes, feature_dim);
    for v in features.data_mut() {
        *v = standard_normal(&mut rng);
    }
    let p = (3.0 / num_nodes as f64).min(1.0);
    let mut edges = Vec::new();
    for i in 0..num_nodes {
        for j in (i + 1)..num_nodes {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    let labels: Vec<Option<usize>> =
        (0..num_nodes).map(|_| Some(rng.gen_range(0..num_classes))).collect();
    let mut train = vec![false; num_nodes];
    let mut val = vec![false; num_nodes];
    let mut test = vec![false; num_nodes];
    train[0] = true;
    for i in 1..num_nodes {
        match rng.gen_range(0..4u8) {
            0 | 1 => train[i] = true,
            2 => val[i] = true,
            _ => test[i] = true,
        }
    }
    Graph::new(num_classes, features, edges, labels, train, val, test)
        .expect("random graph construction is always valid")
}

fn random_params(shapes: &[(usize, usize)], seed: u64) -> Vec<DenseMatrix> {
    shapes
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| glorot_init(r, c, derive_seed(seed, i as u64)))
        .collect()
}

/// Graph dimensions for check case `index`: 3..=max nodes, 2..=6 features,
/// 2..=4 classes.
fn case_graph(config: &SuiteConfig, index: usize) -> Graph {
    let case_seed = derive_seed(config.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let nodes = rng.gen_range(3..=config.max_nodes.max(3));
    let feature_dim = rng.gen_range(2..=6);
    let classes = rng.gen_range(2..=4);
    random_graph(derive_seed(case_seed, 1), nodes, feature_dim, classes)
}

/// Every produced adjacency and its powers k ≤ 3 must have unit row sums
/// within 1e-9. With fault injection, row 0 of the first graph's adjacency
/// is scaled by 1.1 and the check must report the corruption.
pub fn check_row_stochasticity(config: &SuiteConfig) -> CheckResult {
    let name = "row-stochasticity";
    let mut worst = 0.0f64;
    let mut context = String::from("no graphs checked");
    for g in 0..config.graphs {
        let graph = case_graph(config, g);
        let adj = match graph.normalize_adjacency(true) {
            Ok(adj) => adj,
            Err(e) => return CheckResult::new(name, false, format!("graph {g}: {e}")),
        };
        if config.inject_row_sum_fault && g == 0 {
            let corrupted = scale_row(adj.matrix(), 0, 1.1);
            let dev = max_unit_row_deviation(&corrupted);
            if dev > worst {
                worst = dev;
                context = format!("graph {g} (injected fault), power 1");
            }
            continue;
        }
        for k in 1..=3usize {
            let dev = adj.pow(k).max_row_sum_deviation();
            if dev > worst {
                worst = dev;
                context = format!("graph {g}, power {k}");
            }
        }
    }
    let passed = worst <= config.tolerance;
    CheckResult::new(name, passed, format!("max |row sum − 1| = {worst:.3e} at {context}"))
}

fn scale_row(m: &CsrMatrix, row: usize, factor: f64) -> CsrMatrix {
    let entries = (0..m.rows())
        .map(|i| {
            let (cols, vals) = m.row_entries(i);
            let f = if i == row { factor } else { 1.0 };
            cols.iter().zip(vals).map(|(&c, &v)| (c, v * f)).collect()
        })
        .collect();
    CsrMatrix::from_row_entries(m.rows(), m.cols(), entries)
}

fn max_unit_row_deviation(m: &CsrMatrix) -> f64 {
    m.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

/// GCN-1, SGC-k (k ≤ 3), and PPNP matrix forwards must equal per-node
/// `mixup_form_predict` within tolerance at every node of every graph.
pub fn check_mixup_equivalence(config: &SuiteConfig) -> CheckResult {
    let name = "mixup-equivalence";
    let mut worst = 0.0f64;
    let mut context = String::from("-");
    let cases: Vec<(ModelKind, usize)> = vec![
        (ModelKind::Gcn, 1),
        (ModelKind::Sgc, 1),
        (ModelKind::Sgc, 2),
        (ModelKind::Sgc, 3),
        (ModelKind::Ppnp, 1),
        (ModelKind::Ppnp, 2),
    ];
    for g in 0..config.graphs {
        let graph = case_graph(config, g);
        let adj = match graph.normalize_adjacency(true) {
            Ok(adj) => adj,
            Err(e) => return CheckResult::new(name, false, format!("graph {g}: {e}")),
        };
        let x = FeatureSource::Dense(graph.features().clone());
        for (case, &(kind, depth)) in cases.iter().enumerate() {
            let mut spec = ModelSpec::new(kind).with_depth(depth);
            spec.hidden_dim = 5;
            if kind == ModelKind::Ppnp {
                spec.ppnp_power = depth;
                spec.depth = 2;
            }
            let shapes = spec.weight_shapes(graph.feature_dim(), graph.num_classes());
            let params = random_params(&shapes, derive_seed(config.seed, (g * 100 + case) as u64));
            let matrix_form = match kind {
                ModelKind::Gcn => forward_gcn(&params, &adj, &x),
                ModelKind::Sgc => forward_sgc(&params, &adj.pow(depth), &x),
                ModelKind::Ppnp => forward_ppnp(&params, &adj.pow(spec.ppnp_power), &x),
                _ => unreachable!(),
            };
            let model =
                TrainedModel { spec, params, relabel: None, adj: None, seed: 0 };
            for node in 0..graph.num_nodes() {
                let mixed = match mixup_form_predict(&model, &graph, node) {
                    Ok(row) => row,
                    Err(e) => {
                        return CheckResult::new(name, false, format!("graph {g} {kind:?}: {e}"))
                    }
                };
                for (c, (&a, &b)) in mixed.iter().zip(matrix_form.row(node)).enumerate() {
                    let dev = (a - b).abs();
                    if dev > worst {
                        worst = dev;
                        context = format!("graph {g}, {kind:?} k={depth}, node {node}, class {c}");
                    }
                }
            }
        }
    }
    let passed = worst <= config.tolerance;
    CheckResult::new(
        name,
        passed,
        format!("max |matrix − mixup| = {worst:.3e} at {context} over {} graphs", config.graphs),
    )
}

/// Two-layer GCN: every aggregation's matrix form must equal the explicit
/// per-node neighbor average (input mixup at layer 1, manifold mixup at
/// layer 2).
pub fn check_layerwise_gcn2(config: &SuiteConfig) -> CheckResult {
    let name = "gcn2-layerwise-mixup";
    let mut worst = 0.0f64;
    let mut at = 0usize;
    for g in 0..config.graphs {
        let graph = case_graph(config, g);
        let adj = match graph.normalize_adjacency(true) {
            Ok(adj) => adj,
            Err(e) => return CheckResult::new(name, false, format!("graph {g}: {e}")),
        };
        let mut spec = ModelSpec::new(ModelKind::Gcn);
        spec.hidden_dim = 5;
        let shapes = spec.weight_shapes(graph.feature_dim(), graph.num_classes());
        let params = random_params(&shapes, derive_seed(config.seed, (g + 7919) as u64));
        let x = FeatureSource::Dense(graph.features().clone());
        let dev = layerwise_mixup_deviation(&params, &adj, &x);
        if dev > worst {
            worst = dev;
            at = g;
        }
    }
    let passed = worst <= config.tolerance;
    CheckResult::new(
        name,
        passed,
        format!("max layer-wise |Δ| = {worst:.3e} (graph {at}) over {} graphs", config.graphs),
    )
}

/// The three-node worked example must relabel to exactly {(1,0), (0,1),
/// (0.5,0.5)}, and the soft-target cross entropy must reproduce the
/// −2·(0.5·log p₀ + 0.5·log p₁) form: twice the soft CE of target
/// (0.5, 0.5) equals the sum of both hard-label CE terms. Verified for 20
/// random (p₀, p₁) pairs.
pub fn check_relabel_example() -> CheckResult {
    let name = "relabel-worked-example";
    let graph = synthetic_graph(SyntheticKind::ThreeNodeExample);
    let adj = graph.normalize_adjacency(true).expect("three-node graph normalizes");
    let relabel = match crate::graph::homophily_relabel(&graph, &adj) {
        Ok(r) => r,
        Err(e) => return CheckResult::new(name, false, format!("relabel failed: {e}")),
    };
    let expected = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
    for (node, want) in expected.iter().enumerate() {
        if relabel.matrix().row(node) != want.as_slice() || !relabel.coverage_mask()[node] {
            return CheckResult::new(
                name,
                false,
                format!("node {node}: got {:?}, want {want:?}", relabel.matrix().row(node)),
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x2e);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p0: f64 = rng.gen_range(0.05..0.95);
        let p1 = 1.0 - p0;
        // Logits whose softmax is exactly (p₀, p₁).
        let logits = DenseMatrix::from_vec(1, 2, vec![p0.ln(), p1.ln()]);
        let soft = DenseMatrix::from_vec(1, 2, vec![0.5, 0.5]);
        let hard0 = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]);
        let hard1 = DenseMatrix::from_vec(1, 2, vec![0.0, 1.0]);
        let w = vec![1.0];
        let (soft_ce, _) = soft_cross_entropy(&logits, &soft, &w).expect("finite");
        let (ce0, _) = soft_cross_entropy(&logits, &hard0, &w).expect("finite");
        let (ce1, _) = soft_cross_entropy(&logits, &hard1, &w).expect("finite");
        let paper_form = -2.0 * (0.5 * p0.ln() + 0.5 * p1.ln());
        worst = worst.max((2.0 * soft_ce - (ce0 + ce1)).abs());
        worst = worst.max((2.0 * soft_ce - paper_form).abs());
    }
    let passed = worst <= 1e-12;
    CheckResult::new(
        name,
        passed,
        format!("rows exact; max |2·CE(½,½) − (CE(y₀)+CE(y₁))| = {worst:.3e} over 20 draws"),
    )
}

/// With no edges, Ã = I and every graph model must collapse to its MLP
/// counterpart bitwise: GCN-k ≡ MLP-k, SGC-k ≡ linear, PPNP ≡ MLP,
/// TMLP inference ≡ MLP inference.
pub fn check_edgeless_collapse(seed: u64) -> CheckResult {
    let name = "edgeless-collapse";
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xed9e));
    let (n, d, c) = (8, 5, 3);
    let mut features = DenseMatrix::zeros(n, d);
    for v in features.data_mut() {
        *v = standard_normal(&mut rng);
    }
    let labels = (0..n).map(|i| Some(i % c)).collect();
    let graph = Graph::new(c, features, Vec::new(), labels, vec![true; n], vec![false; n], vec![false; n])
        .expect("edgeless graph is valid");
    let adj = graph.normalize_adjacency(true).expect("self-loops cover isolated nodes");
    let x = FeatureSource::Dense(graph.features().clone());
    let mut worst = 0.0f64;
    let mut context = "-";
    let observe = |label: &'static str, a: &DenseMatrix, b: &DenseMatrix, worst: &mut f64, context: &mut &'static str| {
        let dev = a.max_abs_diff(b);
        if dev > *worst {
            *worst = dev;
            *context = label;
        }
    };
    for depth in 1..=2usize {
        let mut spec = ModelSpec::new(ModelKind::Gcn).with_depth(depth);
        spec.hidden_dim = 4;
        let shapes = spec.weight_shapes(d, c);
        let params = random_params(&shapes, derive_seed(seed, depth as u64));
        let gcn = forward_gcn(&params, &adj, &x);
        let mlp = forward_mlp(&params, &x);
        observe(if depth == 1 { "gcn-1 vs mlp-1" } else { "gcn-2 vs mlp-2" }, &gcn, &mlp, &mut worst, &mut context);

        let sgc_params = random_params(&[(d, c)], derive_seed(seed, 10 + depth as u64));
        let sgc = forward_sgc(&sgc_params, &adj.pow(depth), &x);
        let linear = forward_mlp(&sgc_params, &x);
        observe("sgc vs linear", &sgc, &linear, &mut worst, &mut context);

        let ppnp = forward_ppnp(&params, &adj.pow(depth), &x);
        observe("ppnp vs mlp", &ppnp, &mlp, &mut worst, &mut context);

        let mut tmlp_spec = ModelSpec::new(ModelKind::Tmlp).with_depth(depth);
        tmlp_spec.hidden_dim = 4;
        let tmlp = TrainedModel {
            spec: tmlp_spec,
            params: params.clone(),
            relabel: None,
            adj: Some(adj.clone()),
            seed,
        };
        let aggregated = predict_tmlp(&tmlp, &graph).expect("adjacency present");
        observe("tmlp vs mlp", &aggregated, &mlp, &mut worst, &mut context);
    }
    let passed = worst == 0.0;
    CheckResult::new(name, passed, format!("max |Δ| = {worst:.3e} ({context}); bitwise required"))
}

/// Analytic gradients of every model family (depths 1–2, plus the
/// relabel-power-2 unified variant) must match central finite differences
/// (step 1e-5) within `tolerance` relative error on 6-node toys.
pub fn check_gradients(tolerance: f64, seed: u64) -> CheckResult {
    let name = "gradient-checks";
    let mut worst = 0.0f64;
    let mut context = String::from("-");
    let mut cases: Vec<(ModelSpec, &'static str)> = Vec::new();
    for kind in [
        ModelKind::Mlp,
        ModelKind::Gcn,
        ModelKind::Sgc,
        ModelKind::Ppnp,
        ModelKind::Hmlp,
        ModelKind::Tmlp,
        ModelKind::Unified,
    ] {
        for depth in 1..=2usize {
            let mut spec = ModelSpec::new(kind).with_depth(depth);
            spec.hidden_dim = 5;
            cases.push((spec, kind_label(kind)));
        }
    }
    let mut deep_relabel = ModelSpec::new(ModelKind::Unified);
    deep_relabel.hidden_dim = 5;
    deep_relabel.relabel_power = 2;
    cases.push((deep_relabel, "unified(relabel k=2)"));

    for (case, (spec, label)) in cases.iter().enumerate() {
        let graph = random_graph(derive_seed(seed, 3000 + case as u64), 6, 4, 3);
        let compiled = match compile(spec, &graph) {
            Ok(c) => c,
            Err(e) => return CheckResult::new(name, false, format!("{label} depth {}: {e}", spec.depth)),
        };
        let params = random_params(&compiled.shapes, derive_seed(seed, 4000 + case as u64));
        let (targets, weights) = training_targets(&graph, compiled.relabel.as_ref());
        let mut tape = compiled.train_program.forward(&params);
        let (_, grad_seed) = match soft_cross_entropy(tape.logits(), &targets, &weights) {
            Ok(r) => r,
            Err(e) => return CheckResult::new(name, false, format!("{label}: {e}")),
        };
        let analytic = match tape.backward(grad_seed, &params) {
            Ok(g) => g,
            Err(e) => return CheckResult::new(name, false, format!("{label}: {e}")),
        };
        let numeric = finite_difference_gradients(&params, 1e-5, |p| {
            let logits = compiled.train_program.forward_logits(p);
            soft_cross_entropy(&logits, &targets, &weights).expect("finite loss").0
        });
        let err = max_relative_error(&analytic, &numeric);
        if err > worst {
            worst = err;
            context = format!("{label} depth {}", spec.depth);
        }
    }
    let passed = worst <= tolerance;
    CheckResult::new(
        name,
        passed,
        format!("max relative error = {worst:.3e} ({context}) over {} cases", cases.len()),
    )
}

fn kind_label(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Mlp => "mlp",
        ModelKind::Gcn => "gcn",
        ModelKind::Sgc => "sgc",
        ModelKind::Ppnp => "ppnp",
        ModelKind::Hmlp => "hmlp",
        ModelKind::Tmlp => "tmlp",
        ModelKind::Unified => "unified",
    }
}
