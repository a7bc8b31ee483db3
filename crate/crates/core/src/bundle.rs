//! Graph bundles on disk, ratio-based splits, and the built-in synthetic
//! graphs.
//!
//! A bundle is a directory of four text files (`features.tsv`, `labels.tsv`,
//! `edges.tsv`, `meta.json`) plus an optional `splits.json`. Everything is
//! UTF-8 with '\t' separators and '\n' line endings; reals use Rust's
//! shortest round-trip decimal form, so save → load → save is byte-stable.

use crate::graph::{Graph, GraphError};
use crate::matrix::DenseMatrix;
use crate::numerics::{derive_seed, standard_normal};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    ParseError { file: String, line: usize, message: String },
    #[error("{file}:{line}: node index {index} out of range 0..{num_nodes}")]
    IndexOutOfRange { file: String, line: usize, index: usize, num_nodes: usize },
    #[error("{file}:{line}: class {class} out of range 0..{num_classes}")]
    ClassOutOfRange { file: String, line: usize, class: usize, num_classes: usize },
    #[error("{file}: {got} rows, but meta.json declares {want}")]
    RowCountMismatch { file: String, got: usize, want: usize },
    #[error("split index {index} in splits.json ({split} of \"{name}\") out of range 0..{num_nodes}")]
    SplitIndexOutOfRange { name: String, split: &'static str, index: usize, num_nodes: usize },
    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),
    #[error("infeasible split: class {class} receives zero train nodes")]
    InfeasibleSplit { class: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    num_nodes: usize,
    num_classes: usize,
    feature_dim: usize,
    dataset: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SplitIndices {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

type SplitsFile = BTreeMap<String, SplitIndices>;

fn read_file(path: &Path) -> Result<String, DataError> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(DataError::MissingFile(path.to_path_buf())),
        Err(source) => Err(DataError::Io { path: path.to_path_buf(), source }),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), DataError> {
    std::fs::write(path, content).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Load a graph bundle from a directory. If `splits.json` contains a split
/// named "public", the masks are populated from it; otherwise all masks are
/// empty.
pub fn load_bundle(dir: &Path) -> Result<Graph, DataError> {
    let meta_text = read_file(&dir.join("meta.json"))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text).map_err(|e| DataError::ParseError {
        file: "meta.json".into(),
        line: e.line(),
        message: e.to_string(),
    })?;

    let features_text = read_file(&dir.join("features.tsv"))?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(meta.num_nodes);
    for (idx, line) in features_text.lines().enumerate() {
        let mut row = Vec::with_capacity(meta.feature_dim);
        for field in line.split('\t') {
            let v: f64 = field.parse().map_err(|_| DataError::ParseError {
                file: "features.tsv".into(),
                line: idx + 1,
                message: format!("not a real number: {field:?}"),
            })?;
            row.push(v);
        }
        if row.len() != meta.feature_dim {
            return Err(DataError::ParseError {
                file: "features.tsv".into(),
                line: idx + 1,
                message: format!("{} fields, expected {}", row.len(), meta.feature_dim),
            });
        }
        rows.push(row);
    }
    if rows.len() != meta.num_nodes {
        return Err(DataError::RowCountMismatch {
            file: "features.tsv".into(),
            got: rows.len(),
            want: meta.num_nodes,
        });
    }
    let features = DenseMatrix::from_rows(&rows);

    let labels_text = read_file(&dir.join("labels.tsv"))?;
    let mut labels: Vec<Option<usize>> = Vec::with_capacity(meta.num_nodes);
    for (idx, line) in labels_text.lines().enumerate() {
        if line == "-" {
            labels.push(None);
            continue;
        }
        let class: usize = line.parse().map_err(|_| DataError::ParseError {
            file: "labels.tsv".into(),
            line: idx + 1,
            message: format!("not a class index or \"-\": {line:?}"),
        })?;
        if class >= meta.num_classes {
            return Err(DataError::ClassOutOfRange {
                file: "labels.tsv".into(),
                line: idx + 1,
                class,
                num_classes: meta.num_classes,
            });
        }
        labels.push(Some(class));
    }
    if labels.len() != meta.num_nodes {
        return Err(DataError::RowCountMismatch {
            file: "labels.tsv".into(),
            got: labels.len(),
            want: meta.num_nodes,
        });
    }

    let edges_text = read_file(&dir.join("edges.tsv"))?;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (idx, line) in edges_text.lines().enumerate() {
        let parse_endpoint = |field: &str| -> Result<usize, DataError> {
            let v: usize = field.parse().map_err(|_| DataError::ParseError {
                file: "edges.tsv".into(),
                line: idx + 1,
                message: format!("not a node index: {field:?}"),
            })?;
            if v >= meta.num_nodes {
                return Err(DataError::IndexOutOfRange {
                    file: "edges.tsv".into(),
                    line: idx + 1,
                    index: v,
                    num_nodes: meta.num_nodes,
                });
            }
            Ok(v)
        };
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(u), Some(v), None) => edges.push((parse_endpoint(u)?, parse_endpoint(v)?)),
            _ => {
                return Err(DataError::ParseError {
                    file: "edges.tsv".into(),
                    line: idx + 1,
                    message: "expected exactly two tab-separated node indices".into(),
                })
            }
        }
    }

    let mut train_mask = vec![false; meta.num_nodes];
    let mut val_mask = vec![false; meta.num_nodes];
    let mut test_mask = vec![false; meta.num_nodes];
    let splits_path = dir.join("splits.json");
    if splits_path.exists() {
        let splits_text = read_file(&splits_path)?;
        let splits: SplitsFile = serde_json::from_str(&splits_text).map_err(|e| DataError::ParseError {
            file: "splits.json".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if let Some(public) = splits.get("public") {
            for (split, indices, mask) in [
                ("train", &public.train, &mut train_mask),
                ("val", &public.val, &mut val_mask),
                ("test", &public.test, &mut test_mask),
            ] {
                for &i in indices {
                    if i >= meta.num_nodes {
                        return Err(DataError::SplitIndexOutOfRange {
                            name: "public".into(),
                            split,
                            index: i,
                            num_nodes: meta.num_nodes,
                        });
                    }
                    mask[i] = true;
                }
            }
        }
    }

    Ok(Graph::new(meta.num_classes, features, edges, labels, train_mask, val_mask, test_mask)?)
}

/// Write a graph as a bundle directory (canonical ordering throughout).
/// `splits.json` is written only when at least one mask is nonempty.
pub fn save_bundle(graph: &Graph, dir: &Path, dataset: &str) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?;

    let mut features = String::new();
    for i in 0..graph.num_nodes() {
        let row = graph.features().row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                features.push('\t');
            }
            let _ = write!(features, "{v}");
        }
        features.push('\n');
    }
    write_file(&dir.join("features.tsv"), &features)?;

    let mut labels = String::new();
    for label in graph.labels() {
        match label {
            Some(c) => {
                let _ = writeln!(labels, "{c}");
            }
            None => labels.push_str("-\n"),
        }
    }
    write_file(&dir.join("labels.tsv"), &labels)?;

    let mut edges = String::new();
    for &(u, v) in graph.edges() {
        let _ = writeln!(edges, "{u}\t{v}");
    }
    write_file(&dir.join("edges.tsv"), &edges)?;

    let meta = BundleMeta {
        num_nodes: graph.num_nodes(),
        num_classes: graph.num_classes(),
        feature_dim: graph.feature_dim(),
        dataset: dataset.to_string(),
    };
    let mut meta_text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta_text.push('\n');
    write_file(&dir.join("meta.json"), &meta_text)?;

    let mask_indices = |mask: &[bool]| -> Vec<usize> {
        mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    };
    let public = SplitIndices {
        train: mask_indices(graph.train_mask()),
        val: mask_indices(graph.val_mask()),
        test: mask_indices(graph.test_mask()),
    };
    if !(public.train.is_empty() && public.val.is_empty() && public.test.is_empty()) {
        let mut splits: SplitsFile = BTreeMap::new();
        splits.insert("public".into(), public);
        let mut text = serde_json::to_string_pretty(&splits).expect("splits serialize");
        text.push('\n');
        write_file(&dir.join("splits.json"), &text)?;
    }
    Ok(())
}

/// Ratio-based split generation. `train_ratio + val_ratio < 1`; the test
/// mask takes every remaining labeled node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_ratio: 0.6, val_ratio: 0.2, seed: 0, stratified: true }
    }
}

/// Apportion `total` among groups proportionally to `sizes` (largest
/// remainder, ties toward the lower index), clamped to per-group capacity.
fn apportion(total: usize, sizes: &[usize], capacity: &[usize]) -> Vec<usize> {
    let sum: usize = sizes.iter().sum();
    if sum == 0 {
        return vec![0; sizes.len()];
    }
    let mut alloc: Vec<usize> = Vec::with_capacity(sizes.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(sizes.len());
    let mut assigned = 0usize;
    for (g, &size) in sizes.iter().enumerate() {
        let exact = total as f64 * size as f64 / sum as f64;
        let base = (exact.floor() as usize).min(capacity[g]);
        alloc.push(base);
        assigned += base;
        remainders.push((g, exact - base as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut leftover = total.saturating_sub(assigned);
    while leftover > 0 {
        let mut progressed = false;
        for &(g, _) in &remainders {
            if leftover == 0 {
                break;
            }
            if alloc[g] < capacity[g] {
                alloc[g] += 1;
                leftover -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    alloc
}

/// Assign train/val/test masks over the labeled nodes. Stratified sampling
/// keeps per-class train counts within ±1 of `train_ratio × class size`;
/// identical specs always produce identical masks.
pub fn make_split(graph: &Graph, spec: &SplitSpec) -> Result<Graph, DataError> {
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(DataError::InvalidSplitSpec(format!("train_ratio {} not in (0,1)", spec.train_ratio)));
    }
    if spec.val_ratio < 0.0 || spec.train_ratio + spec.val_ratio >= 1.0 {
        return Err(DataError::InvalidSplitSpec(format!(
            "train_ratio {} + val_ratio {} must stay below 1",
            spec.train_ratio, spec.val_ratio
        )));
    }
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); graph.num_classes()];
        for (i, label) in graph.labels().iter().enumerate() {
            if let Some(c) = *label {
                by_class[c].push(i);
            }
        }
        by_class
    } else {
        vec![(0..graph.num_nodes()).filter(|&i| graph.label(i).is_some()).collect()]
    };
    let total_labeled: usize = groups.iter().map(Vec::len).sum();
    if total_labeled == 0 {
        return Err(DataError::InvalidSplitSpec("graph has no labeled nodes".into()));
    }
    let total_train = ((spec.train_ratio * total_labeled as f64).round() as usize).max(1);
    let total_val = (spec.val_ratio * total_labeled as f64).round() as usize;

    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let train_alloc = apportion(total_train, &sizes, &sizes);
    let capacity_after_train: Vec<usize> =
        sizes.iter().zip(&train_alloc).map(|(&s, &t)| s - t).collect();
    let val_alloc = apportion(total_val, &sizes, &capacity_after_train);

    if spec.stratified {
        for (class, (&size, &train)) in sizes.iter().zip(&train_alloc).enumerate() {
            if size > 0 && train == 0 {
                return Err(DataError::InfeasibleSplit { class });
            }
        }
    }

    let mut train_mask = vec![false; graph.num_nodes()];
    let mut val_mask = vec![false; graph.num_nodes()];
    let mut test_mask = vec![false; graph.num_nodes()];
    for (g, group) in groups.iter().enumerate() {
        let mut order = group.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, g as u64));
        order.shuffle(&mut rng);
        for (pos, &node) in order.iter().enumerate() {
            if pos < train_alloc[g] {
                train_mask[node] = true;
            } else if pos < train_alloc[g] + val_alloc[g] {
                val_mask[node] = true;
            } else {
                test_mask[node] = true;
            }
        }
    }
    Ok(graph.with_masks(train_mask, val_mask, test_mask)?)
}

/// Built-in synthetic graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SyntheticKind {
    /// The worked three-node example: two labeled train nodes of opposite
    /// classes, both connected to one unlabeled target node.
    ThreeNodeExample,
    /// 200 nodes in two mirror-image clusters with 2D features. Each cluster
    /// has a dense core far from the class boundary and a periphery near it;
    /// periphery nodes connect to their nearest cores, so neighbor
    /// aggregation pulls them toward the core.
    TwoClusters { seed: u64 },
}

pub const TWO_CLUSTERS_NODES_PER_CLASS: usize = 100;
const TWO_CLUSTERS_CORES_PER_CLASS: usize = 20;

pub fn synthetic_graph(kind: SyntheticKind) -> Graph {
    match kind {
        SyntheticKind::ThreeNodeExample => Graph::new(
            2,
            DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]),
            vec![(0, 2), (1, 2)],
            vec![Some(0), Some(1), None],
            vec![true, true, false],
            vec![false; 3],
            vec![false; 3],
        )
        .expect("three-node example is valid"),
        SyntheticKind::TwoClusters { seed } => two_clusters(seed),
    }
}

fn two_clusters(seed: u64) -> Graph {
    let per_class = TWO_CLUSTERS_NODES_PER_CLASS;
    let cores = TWO_CLUSTERS_CORES_PER_CLASS;
    let n = 2 * per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = DenseMatrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for class in 0..2usize {
        let sign = if class == 0 { -1.0 } else { 1.0 };
        let base = class * per_class;
        for local in 0..per_class {
            let node = base + local;
            let (x, y) = if local < cores {
                (sign * (3.2 + 0.3 * standard_normal(&mut rng)), 0.8 * standard_normal(&mut rng))
            } else {
                (sign * (0.6 + (1.1 * standard_normal(&mut rng)).abs()), 0.8 * standard_normal(&mut rng))
            };
            features.set(node, 0, x);
            features.set(node, 1, y);
            labels.push(Some(class));
        }
        // Core ring with skip-2 chords keeps the core interconnected.
        for i in 0..cores {
            edges.push((base + i, base + (i + 1) % cores));
            edges.push((base + i, base + (i + 2) % cores));
        }
        // Each periphery node attaches to its three nearest cores.
        for local in cores..per_class {
            let node = base + local;
            let (px, py) = (features.get(node, 0), features.get(node, 1));
            let mut by_distance: Vec<(f64, usize)> = (0..cores)
                .map(|c| {
                    let core = base + c;
                    let d = (features.get(core, 0) - px).hypot(features.get(core, 1) - py);
                    (d, core)
                })
                .collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, core) in by_distance.iter().take(3) {
                edges.push((node, core));
            }
        }
    }
    Graph::new(2, features, edges, labels, vec![false; n], vec![false; n], vec![false; n])
        .expect("two-clusters construction is valid")
}
