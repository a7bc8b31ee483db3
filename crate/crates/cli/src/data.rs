//! Dataset resolution: synthetic generators by name, bundle directories by
//! path, and a small search path for shared bundle collections.

use crate::config::SplitChoice;
use graphmix::{load_bundle, make_split, synthetic_graph, DataError, Graph, SyntheticKind};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no dataset given: pass --dataset or set \"dataset\" in the config file")]
    Missing,
    #[error("unknown synthetic dataset {0:?} (expected synthetic:three_node or synthetic:two_clusters[:seed])")]
    UnknownSynthetic(String),
    #[error("bad seed in {0:?}: the part after the last ':' must be an integer")]
    BadSeed(String),
    #[error("dataset {name:?} not found; searched: {}", searched.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    NotFound { name: String, searched: Vec<PathBuf> },
    #[error("dataset has no \"public\" split on disk and none was generated; pass --ratio or a split spec")]
    NoSplit,
    #[error("named split {0:?} is not supported; bundles only carry a \"public\" split")]
    UnknownSplit(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Environment variable pointing at a directory of bundle subdirectories.
pub const DATA_DIR_ENV: &str = "GRAPHMIX_DATA_DIR";

/// Interpret a dataset name. `synthetic:` names are generated in memory;
/// anything else is a bundle directory, tried as given, then under
/// `$GRAPHMIX_DATA_DIR`, then under `./data`.
pub fn resolve_dataset(name: &str) -> Result<Graph, DatasetError> {
    if let Some(rest) = name.strip_prefix("synthetic:") {
        return synthetic_by_name(name, rest);
    }
    let mut candidates = vec![PathBuf::from(name)];
    // Bare names also look in the shared collections; explicit paths don't.
    if !name.contains(['/', '\\']) {
        if let Ok(root) = std::env::var(DATA_DIR_ENV) {
            candidates.push(Path::new(&root).join(name));
        }
        candidates.push(Path::new("data").join(name));
    }
    for candidate in &candidates {
        if bundle_present(candidate) {
            return Ok(load_bundle(candidate)?);
        }
    }
    Err(DatasetError::NotFound { name: name.to_string(), searched: candidates })
}

fn bundle_present(dir: &Path) -> bool {
    dir.join("meta.json").is_file()
}

fn synthetic_by_name(full: &str, rest: &str) -> Result<Graph, DatasetError> {
    match rest {
        "three_node" => Ok(synthetic_graph(SyntheticKind::ThreeNodeExample)),
        "two_clusters" => Ok(synthetic_graph(SyntheticKind::TwoClusters { seed: 0 })),
        other => {
            if let Some(seed_text) = other.strip_prefix("two_clusters:") {
                let seed: u64 =
                    seed_text.parse().map_err(|_| DatasetError::BadSeed(full.to_string()))?;
                Ok(synthetic_graph(SyntheticKind::TwoClusters { seed }))
            } else {
                Err(DatasetError::UnknownSynthetic(full.to_string()))
            }
        }
    }
}

/// Apply the configured split. A `Spec` regenerates masks; the named
/// "public" split keeps whatever the bundle shipped (erroring if it shipped
/// nothing, so training never silently runs on an empty train mask).
pub fn apply_split(graph: Graph, choice: &SplitChoice) -> Result<Graph, DatasetError> {
    match choice {
        SplitChoice::Spec(spec) => Ok(make_split(&graph, spec)?),
        SplitChoice::Named(name) if name == "public" => {
            if graph.train_mask().iter().any(|&m| m) {
                Ok(graph)
            } else {
                Err(DatasetError::NoSplit)
            }
        }
        SplitChoice::Named(other) => Err(DatasetError::UnknownSplit(other.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use graphmix::SplitSpec;

    #[test]
    fn synthetic_names_resolve() {
        let three = resolve_dataset("synthetic:three_node").unwrap();
        assert_eq!(three.num_nodes(), 3);
        let a = resolve_dataset("synthetic:two_clusters").unwrap();
        let b = resolve_dataset("synthetic:two_clusters:0").unwrap();
        assert_eq!(a, b, "default seed is 0");
        let c = resolve_dataset("synthetic:two_clusters:7").unwrap();
        assert_ne!(a, c);
        assert!(matches!(
            resolve_dataset("synthetic:ring").unwrap_err(),
            DatasetError::UnknownSynthetic(_)
        ));
        assert!(matches!(
            resolve_dataset("synthetic:two_clusters:x").unwrap_err(),
            DatasetError::BadSeed(_)
        ));
    }

    #[test]
    fn missing_bundles_report_every_searched_path() {
        let err = resolve_dataset("no_such_dataset").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("no_such_dataset"), "{text}");
        assert!(text.contains("data/no_such_dataset") || text.contains("data\\no_such_dataset"), "{text}");
    }

    #[test]
    fn bundles_load_from_a_directory_path() {
        let dir = tempfile::tempdir().unwrap();
        let g = synthetic_graph(SyntheticKind::TwoClusters { seed: 3 });
        graphmix::save_bundle(&g, dir.path(), "tc").unwrap();
        let loaded = resolve_dataset(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(loaded, g);
    }

    #[test]
    fn split_choices_apply_or_fail_loudly() {
        let g = synthetic_graph(SyntheticKind::TwoClusters { seed: 0 });
        let split = apply_split(
            g.clone(),
            &SplitChoice::Spec(SplitSpec { train_ratio: 0.6, val_ratio: 0.2, seed: 0, stratified: true }),
        )
        .unwrap();
        let count = |m: &[bool]| m.iter().filter(|&&x| x).count();
        assert_eq!(count(split.train_mask()), 120);
        assert_eq!(count(split.val_mask()), 40);
        assert_eq!(count(split.test_mask()), 40);

        // two_clusters ships no masks, so "public" must be rejected…
        assert!(matches!(
            apply_split(g, &SplitChoice::Named("public".into())).unwrap_err(),
            DatasetError::NoSplit
        ));
        // …but the three-node example carries its train mask.
        let three = synthetic_graph(SyntheticKind::ThreeNodeExample);
        let kept = apply_split(three, &SplitChoice::Named("public".into())).unwrap();
        assert_eq!(kept.train_mask(), &[true, true, false]);
        let three = synthetic_graph(SyntheticKind::ThreeNodeExample);
        assert!(matches!(
            apply_split(three, &SplitChoice::Named("geom".into())).unwrap_err(),
            DatasetError::UnknownSplit(_)
        ));
    }
}
