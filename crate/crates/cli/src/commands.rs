//! Command implementations. `main.rs` only parses flags and maps results to
//! exit codes; everything here is callable from tests.

use crate::config::{parse_model_kind, ratio_split, ConfigError, ExperimentConfig, SplitChoice};
use crate::data::{apply_split, resolve_dataset, DatasetError};
use crate::report::{depth_reference, mean_std, reference, render_table, TableId};
use graphmix::{
    all_passed, boundary_grid, export_embeddings, fit, load_model, margin_report, render_svg,
    repeat_runs, run_suite, save_bundle, save_model, AnalysisError, BoundaryGrid, CheckResult,
    DataError, EmbeddingExport, Graph, LineSeries, MarginReport, ModelError, ModelSpec, PlotStyle,
    RunRecord, ScatterPoint, Split, SuiteConfig, SvgPlot, TrainError,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("dataset {name}: {source}")]
    DatasetLoad { name: String, source: DatasetError },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("ratio {ratio}: {source}")]
    Ratio { ratio: f64, source: DataError },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] graphmix::GraphError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Everything reachable here is a usage or IO problem; check failures
    /// are signalled by `CheckOutcome`, not by an error.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Every command drops a manifest beside its outputs. Wall time lives only
/// here, so all other artifacts are byte-identical across repeated runs.
#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    config_hash: String,
    version: String,
    wall_seconds: f64,
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    started: Instant,
) -> Result<(), CliError> {
    let manifest = Manifest {
        command: command.to_string(),
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_text(&out_dir.join("manifest.json"), &text)
}

/// Resolve and split a dataset, attaching the dataset name to any failure.
pub fn load_dataset(name: &str, split: &SplitChoice) -> Result<Graph, CliError> {
    let named = |source| CliError::DatasetLoad { name: name.to_string(), source };
    let graph = resolve_dataset(name).map_err(named)?;
    apply_split(graph, split).map_err(named)
}

fn require_dataset(config: &ExperimentConfig) -> Result<&str, CliError> {
    config.dataset.as_deref().ok_or(CliError::Dataset(DatasetError::Missing))
}

/// The model spec for one grid cell: `model` and `depth` override the
/// config; homophily-relabel targets always use the depth-matched adjacency
/// power so an HMLP/unified row mimics the graph model beside it.
fn grid_spec(config: &ExperimentConfig, model: &str, depth: usize) -> Result<ModelSpec, CliError> {
    let kind = parse_model_kind(model)?;
    let mut spec = ModelSpec::new(kind).with_depth(depth);
    spec.hidden_dim = config.hidden;
    spec.self_loops = config.self_loops;
    spec.norm = config.norm_kind()?;
    spec.ppnp_power = config.ppnp_power;
    spec.relabel_power = if kind.uses_soft_targets() { depth } else { config.relabel_power };
    Ok(spec)
}

fn split_seed(config: &ExperimentConfig) -> u64 {
    match &config.split {
        SplitChoice::Spec(spec) => spec.seed,
        SplitChoice::Named(_) => 0,
    }
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Serialize)]
struct TrainSummary {
    dataset: String,
    model: String,
    depth: usize,
    config_hash: String,
    selected_epoch: usize,
    selected_val_accuracy: Option<f64>,
    selected_test_accuracy: Option<f64>,
    final_loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub out_dir: PathBuf,
}

/// Train one model and write `run.jsonl`, `summary.json`, `model.ckpt`, and
/// `manifest.json` under the configured output directory.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainOutcome, CliError> {
    let started = Instant::now();
    let name = require_dataset(config)?;
    let graph = load_dataset(name, &config.split)?;
    let spec = config.model_spec()?;
    let (model, record) = fit(&graph, &spec, &config.train_config()?)?;

    ensure_dir(&config.out)?;
    write_text(&config.out.join("run.jsonl"), &record.to_jsonl())?;
    save_model(&model, &config.out.join("model.ckpt"))?;
    let summary = TrainSummary {
        dataset: name.to_string(),
        model: config.model.clone(),
        depth: config.depth,
        config_hash: config.hash(),
        selected_epoch: record.selected_epoch,
        selected_val_accuracy: record.selected_val_accuracy,
        selected_test_accuracy: record.selected_test_accuracy,
        final_loss: record.final_loss(),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_text(&config.out.join("summary.json"), &text)?;
    write_manifest(&config.out, "train", config, started)?;
    Ok(TrainOutcome { record, out_dir: config.out.clone() })
}

// ---------------------------------------------------------------------------
// reproduce-table

/// One measured grid cell, in percent, with the published number beside it
/// where the source table has one.
#[derive(Debug, Clone)]
pub struct MeasuredCell {
    pub dataset: String,
    pub model: String,
    pub depth: usize,
    pub mean: f64,
    pub std: Option<f64>,
    pub paper_mean: Option<f64>,
    pub paper_std: Option<f64>,
}

impl MeasuredCell {
    pub fn delta(&self) -> Option<f64> {
        self.paper_mean.map(|p| self.mean - p)
    }
}

#[derive(Debug)]
pub struct TableOutcome {
    pub table: TableId,
    pub cells: Vec<MeasuredCell>,
    pub csv: String,
    pub text: String,
    pub out_dir: PathBuf,
}

impl TableOutcome {
    pub fn cell(&self, dataset: &str, model: &str, depth: usize) -> Option<&MeasuredCell> {
        self.cells.iter().find(|c| c.dataset == dataset && c.model == model && c.depth == depth)
    }
}

fn default_datasets(table: TableId) -> Vec<String> {
    match table {
        TableId::T1Hmlp | TableId::T2Tmlp => {
            vec!["cora".into(), "citeseer".into(), "pubmed".into()]
        }
        TableId::T3Ppnp | TableId::T5Depth => vec!["cora".into()],
    }
}

/// Run one published table's model grid with `repeat_runs` and write
/// `<table>.csv` and `<table>.txt` side by side with the published values.
pub fn cmd_reproduce_table(
    table: TableId,
    datasets: &[String],
    config: &ExperimentConfig,
) -> Result<TableOutcome, CliError> {
    let started = Instant::now();
    let datasets: Vec<String> =
        if datasets.is_empty() { default_datasets(table) } else { datasets.to_vec() };
    let depths: Vec<usize> =
        if table == TableId::T5Depth { vec![1, 2, 3, 4] } else { vec![config.depth] };
    // Table 5's protocol pins a 20/40/40 split; the other grids use the
    // configured split (default 60/20/20).
    let split = if table == TableId::T5Depth {
        SplitChoice::Spec(graphmix::SplitSpec {
            train_ratio: 0.2,
            val_ratio: 0.4,
            seed: split_seed(config),
            stratified: true,
        })
    } else {
        config.split.clone()
    };

    let train_config = config.train_config()?;
    let mut cells = Vec::new();
    for dataset in &datasets {
        let graph = load_dataset(dataset, &split)?;
        let key = dataset.to_lowercase();
        for model in table.models() {
            for &depth in &depths {
                let spec = grid_spec(config, model, depth)?;
                let sweep = repeat_runs(&graph, &spec, &train_config, config.seeds)?;
                let (paper_mean, paper_std) = if table == TableId::T5Depth {
                    let r = if key == "cora" { depth_reference(model, depth) } else { None };
                    (r.map(|r| r.mean), None)
                } else {
                    let r = reference(table, &key, model);
                    (r.map(|r| r.mean), r.and_then(|r| r.std))
                };
                cells.push(MeasuredCell {
                    dataset: dataset.clone(),
                    model: model.to_string(),
                    depth,
                    mean: 100.0 * sweep.mean,
                    std: Some(100.0 * sweep.std),
                    paper_mean,
                    paper_std,
                });
            }
        }
    }
    // Cross-dataset average rows, mirroring the published "Average" rows.
    if datasets.len() > 1 && table != TableId::T5Depth {
        for model in table.models() {
            let means: Vec<f64> = cells
                .iter()
                .filter(|c| c.model == *model && c.dataset != "average")
                .map(|c| c.mean)
                .collect();
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            let paper = reference(table, "average", model);
            cells.push(MeasuredCell {
                dataset: "average".into(),
                model: model.to_string(),
                depth: config.depth,
                mean,
                std: None,
                paper_mean: paper.map(|r| r.mean),
                paper_std: None,
            });
        }
    }

    let csv = table_csv(table, &cells);
    let text = if table == TableId::T5Depth {
        depth_table_text(table, &cells, &datasets, config.seeds)
    } else {
        named_table_text(table, &cells, &datasets, config.seeds)
    };
    ensure_dir(&config.out)?;
    write_text(&config.out.join(format!("{}.csv", table.name())), &csv)?;
    write_text(&config.out.join(format!("{}.txt", table.name())), &text)?;
    write_manifest(&config.out, &format!("reproduce-table {}", table.name()), config, started)?;
    Ok(TableOutcome { table, cells, csv, text, out_dir: config.out.clone() })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn table_csv(table: TableId, cells: &[MeasuredCell]) -> String {
    let mut out = String::from("table,dataset,model,depth,mean,std,paper_mean,paper_std,delta\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            table.name(),
            c.dataset,
            c.model,
            c.depth,
            c.mean,
            fmt_opt(c.std),
            fmt_opt(c.paper_mean),
            fmt_opt(c.paper_std),
            fmt_opt(c.delta()),
        );
    }
    out
}

fn table_header(table: TableId, seeds: usize) -> String {
    format!(
        "table {} — test accuracy %, mean ± std over {} seeds\n\
         \"paper\" rows restate the published reference values; \"delta\" is ours − paper\n\n",
        table.name(),
        seeds
    )
}

/// t1/t2/t3 layout: one column per model, three rows per dataset.
fn named_table_text(
    table: TableId,
    cells: &[MeasuredCell],
    datasets: &[String],
    seeds: usize,
) -> String {
    let models = table.models();
    let mut headers: Vec<String> = vec!["dataset".into(), "source".into()];
    headers.extend(models.iter().map(|m| m.to_string()));
    let mut rows = Vec::new();
    let mut groups: Vec<String> = datasets.to_vec();
    if cells.iter().any(|c| c.dataset == "average") {
        groups.push("average".into());
    }
    for dataset in &groups {
        let cell = |model: &str| cells.iter().find(|c| c.dataset == *dataset && c.model == model);
        let mut ours: Vec<String> = vec![dataset.clone(), "ours".into()];
        let mut paper: Vec<String> = vec![dataset.clone(), "paper".into()];
        let mut delta: Vec<String> = vec![dataset.clone(), "delta".into()];
        for model in models {
            match cell(model) {
                Some(c) => {
                    ours.push(mean_std(c.mean, c.std));
                    paper.push(c.paper_mean.map(|m| mean_std(m, c.paper_std)).unwrap_or_else(|| "-".into()));
                    delta.push(c.delta().map(|d| format!("{d:+.2}")).unwrap_or_else(|| "-".into()));
                }
                None => {
                    ours.push("-".into());
                    paper.push("-".into());
                    delta.push("-".into());
                }
            }
        }
        let has_paper = paper[2..].iter().any(|p| p != "-");
        rows.push(ours);
        if has_paper {
            rows.push(paper);
            rows.push(delta);
        }
    }
    table_header(table, seeds) + &render_table(&headers, &rows)
}

/// t5 layout: one column per depth, three rows per model.
fn depth_table_text(
    table: TableId,
    cells: &[MeasuredCell],
    datasets: &[String],
    seeds: usize,
) -> String {
    let mut out = table_header(table, seeds);
    for dataset in datasets {
        let _ = writeln!(out, "dataset: {dataset}");
        let depths = [1usize, 2, 3, 4];
        let mut headers: Vec<String> = vec!["model".into(), "source".into()];
        headers.extend(depths.iter().map(|d| format!("depth {d}")));
        let mut rows = Vec::new();
        for model in table.models() {
            let cell = |depth: usize| {
                cells.iter().find(|c| c.dataset == *dataset && c.model == *model && c.depth == depth)
            };
            let mut ours: Vec<String> = vec![model.to_string(), "ours".into()];
            let mut paper: Vec<String> = vec![model.to_string(), "paper".into()];
            let mut delta: Vec<String> = vec![model.to_string(), "delta".into()];
            for &d in &depths {
                match cell(d) {
                    Some(c) => {
                        ours.push(format!("{:.2}", c.mean));
                        paper.push(c.paper_mean.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into()));
                        delta.push(c.delta().map(|d| format!("{d:+.2}")).unwrap_or_else(|| "-".into()));
                    }
                    None => {
                        ours.push("-".into());
                        paper.push("-".into());
                        delta.push("-".into());
                    }
                }
            }
            let has_paper = paper[2..].iter().any(|p| p != "-");
            rows.push(ours);
            if has_paper {
                rows.push(paper);
                rows.push(delta);
            }
        }
        out.push_str(&render_table(&headers, &rows));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// sweep-ratio

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub model: String,
    pub ratio: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub csv: String,
    pub out_dir: PathBuf,
}

impl SweepOutcome {
    pub fn mean(&self, model: &str, ratio: f64) -> Option<f64> {
        self.points.iter().find(|p| p.model == model && p.ratio == ratio).map(|p| p.mean)
    }
}

pub const DEFAULT_RATIOS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Accuracy-vs-train-ratio curves: `sweep.csv` plus `sweep.svg` with one
/// series per model. Val and test each take half of the held-out fraction.
pub fn cmd_sweep_ratio(
    dataset: &str,
    models: &[String],
    ratios: &[f64],
    config: &ExperimentConfig,
) -> Result<SweepOutcome, CliError> {
    let started = Instant::now();
    let models: Vec<String> = if models.is_empty() {
        vec!["gcn".into(), "hmlp".into()]
    } else {
        models.to_vec()
    };
    let ratios: Vec<f64> = if ratios.is_empty() { DEFAULT_RATIOS.to_vec() } else { ratios.to_vec() };

    let base = resolve_dataset(dataset)
        .map_err(|source| CliError::DatasetLoad { name: dataset.to_string(), source })?;
    let train_config = config.train_config()?;
    let mut points = Vec::new();
    for &ratio in &ratios {
        let spec = ratio_split(ratio, split_seed(config))?;
        let graph = graphmix::make_split(&base, &spec)
            .map_err(|source| CliError::Ratio { ratio, source })?;
        for model in &models {
            let spec = grid_spec(config, model, config.depth)?;
            let sweep = repeat_runs(&graph, &spec, &train_config, config.seeds)?;
            points.push(SweepPoint {
                model: model.clone(),
                ratio,
                mean: 100.0 * sweep.mean,
                std: 100.0 * sweep.std,
            });
        }
    }

    let mut csv = String::from("dataset,model,ratio,mean,std\n");
    for p in &points {
        let _ = writeln!(csv, "{},{},{},{},{}", dataset, p.model, p.ratio, p.mean, p.std);
    }
    let series: Vec<LineSeries> = models
        .iter()
        .map(|m| LineSeries {
            name: m.clone(),
            points: points
                .iter()
                .filter(|p| p.model == *m)
                .map(|p| (p.ratio, p.mean))
                .collect(),
        })
        .collect();
    let style = PlotStyle {
        title: format!("{dataset}: test accuracy vs train ratio"),
        x_label: "train ratio".into(),
        y_label: "test accuracy (%)".into(),
        ..PlotStyle::default()
    };
    ensure_dir(&config.out)?;
    write_text(&config.out.join("sweep.csv"), &csv)?;
    write_text(&config.out.join("sweep.svg"), &render_svg(&SvgPlot::Lines(&series), &style))?;
    write_manifest(&config.out, "sweep-ratio", config, started)?;
    Ok(SweepOutcome { points, csv, out_dir: config.out.clone() })
}

// ---------------------------------------------------------------------------
// check-equivalence

#[derive(Debug)]
pub struct CheckOutcome {
    pub results: Vec<CheckResult>,
    pub all_passed: bool,
    pub report: String,
    pub out_dir: PathBuf,
}

/// Run the oracle suite (plus a row-stochasticity probe of a concrete
/// dataset when one is configured) and write `report.txt`. The caller maps
/// `all_passed == false` to exit code 1.
pub fn cmd_check_equivalence(
    config: &ExperimentConfig,
    graphs: Option<usize>,
    inject_fault: bool,
) -> Result<CheckOutcome, CliError> {
    let started = Instant::now();
    let mut suite = SuiteConfig { seed: config.seed, inject_row_sum_fault: inject_fault, ..SuiteConfig::default() };
    if let Some(graphs) = graphs {
        suite.graphs = graphs;
    }
    let mut results = run_suite(&suite);
    if let Some(name) = config.dataset.as_deref() {
        results.push(dataset_row_check(name, suite.tolerance)?);
    }

    let passed = results.iter().filter(|r| r.passed).count();
    let mut report = String::new();
    for result in &results {
        report.push_str(&result.summary_line());
        report.push('\n');
    }
    let _ = writeln!(report, "{passed}/{} checks passed", results.len());
    ensure_dir(&config.out)?;
    write_text(&config.out.join("report.txt"), &report)?;
    write_manifest(&config.out, "check-equivalence", config, started)?;
    Ok(CheckOutcome { all_passed: all_passed(&results), results, report, out_dir: config.out.clone() })
}

/// Row-stochasticity of a real dataset's normalized adjacency, powers 1-3.
fn dataset_row_check(name: &str, tolerance: f64) -> Result<CheckResult, CliError> {
    let graph = resolve_dataset(name)
        .map_err(|source| CliError::DatasetLoad { name: name.to_string(), source })?;
    let adj = graph.normalize_adjacency(true)?;
    let mut worst = 0.0f64;
    for k in 1..=3 {
        worst = worst.max(adj.pow(k).max_row_sum_deviation());
    }
    Ok(CheckResult {
        name: format!("dataset-row-stochasticity ({name})"),
        passed: worst <= tolerance,
        detail: format!("max |row sum − 1| over powers 1-3: {worst:.3e}"),
    })
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug)]
pub struct AnalyzeOutcome {
    pub margins: MarginReport,
    pub embeddings: EmbeddingExport,
    pub boundary: Option<BoundaryGrid>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
struct MarginSummary {
    mean_delta: f64,
    fraction_improved: f64,
    delta_quantiles: [f64; 5],
}

#[derive(Debug, Serialize)]
struct EmbeddingSummary {
    layer: usize,
    cluster_score_before: Option<f64>,
    cluster_score_after: Option<f64>,
}

/// Resolution of the decision-boundary grid for 2-D datasets.
pub const BOUNDARY_RESOLUTION: usize = 120;

/// Margin, embedding, and (for 2-D feature spaces) decision-boundary
/// artifacts for a saved checkpoint on the configured dataset and split.
pub fn cmd_analyze(config: &ExperimentConfig, checkpoint: &Path) -> Result<AnalyzeOutcome, CliError> {
    let started = Instant::now();
    let name = require_dataset(config)?;
    let graph = load_dataset(name, &config.split)?;
    let model = load_model(checkpoint)?;
    ensure_dir(&config.out)?;

    let margins = margin_report(&model, &graph)?;
    write_text(&config.out.join("margins.csv"), &margins.to_csv())?;
    let margin_summary = MarginSummary {
        mean_delta: margins.mean_delta,
        fraction_improved: margins.fraction_improved,
        delta_quantiles: margins.delta_quantiles,
    };
    write_text(
        &config.out.join("margin_summary.json"),
        &(serde_json::to_string_pretty(&margin_summary).expect("summary serializes") + "\n"),
    )?;

    let layer = model.params.len();
    let embeddings = export_embeddings(&model, &graph, layer)?;
    write_text(&config.out.join("embeddings.tsv"), &embeddings_tsv(&embeddings, &graph))?;
    let embedding_summary = EmbeddingSummary {
        layer,
        cluster_score_before: embeddings.cluster_score_before,
        cluster_score_after: embeddings.cluster_score_after,
    };
    write_text(
        &config.out.join("embedding_summary.json"),
        &(serde_json::to_string_pretty(&embedding_summary).expect("summary serializes") + "\n"),
    )?;
    write_text(
        &config.out.join("embeddings_before.svg"),
        &projection_svg(&embeddings.projection_before, &graph, &format!("{name}: layer-{layer} embeddings, raw features")),
    )?;
    if let Some(after) = &embeddings.projection_after {
        write_text(
            &config.out.join("embeddings_after.svg"),
            &projection_svg(after, &graph, &format!("{name}: layer-{layer} embeddings, aggregated")),
        )?;
    }

    let boundary = if graph.feature_dim() == 2 && model.params[0].rows() == 2 {
        let grid = boundary_grid(&model, &graph, BOUNDARY_RESOLUTION)?;
        write_text(&config.out.join("boundary.json"), &grid.to_json())?;
        let style = PlotStyle {
            title: format!("{name}: decision regions, raw → aggregated"),
            x_label: "x₀".into(),
            y_label: "x₁".into(),
            ..PlotStyle::default()
        };
        write_text(&config.out.join("boundary.svg"), &render_svg(&SvgPlot::Boundary(&grid), &style))?;
        Some(grid)
    } else {
        None
    };
    write_manifest(&config.out, "analyze", config, started)?;
    Ok(AnalyzeOutcome { margins, embeddings, boundary, out_dir: config.out.clone() })
}

fn embeddings_tsv(export: &EmbeddingExport, graph: &Graph) -> String {
    let mut out = String::from("node_id\tlabel\tsplit\tpc1_before\tpc2_before\tpc1_after\tpc2_after\n");
    for node in 0..graph.num_nodes() {
        let label = graph.label(node).map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        let split = graph.split_of(node).map(Split::as_str).unwrap_or("-");
        let (a1, a2) = match &export.projection_after {
            Some(p) => (p.get(node, 0).to_string(), p.get(node, 1).to_string()),
            None => ("-".into(), "-".into()),
        };
        let _ = writeln!(
            out,
            "{node}\t{label}\t{split}\t{}\t{}\t{a1}\t{a2}",
            export.projection_before.get(node, 0),
            export.projection_before.get(node, 1),
        );
    }
    out
}

fn projection_svg(projection: &graphmix::DenseMatrix, graph: &Graph, title: &str) -> String {
    let points: Vec<ScatterPoint> = (0..graph.num_nodes())
        .filter_map(|node| {
            graph.label(node).map(|class| ScatterPoint {
                x: projection.get(node, 0),
                y: projection.get(node, 1),
                class,
                highlight: graph.test_mask()[node],
            })
        })
        .collect();
    let style = PlotStyle {
        title: title.to_string(),
        x_label: "pc1".into(),
        y_label: "pc2".into(),
        ..PlotStyle::default()
    };
    render_svg(&SvgPlot::Scatter(&points), &style)
}

// ---------------------------------------------------------------------------
// make-bundle

/// Materialize the configured dataset (after applying the configured split)
/// as a bundle directory, so synthetics can be shared and inspected.
pub fn cmd_make_bundle(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let name = require_dataset(config)?;
    let graph = load_dataset(name, &config.split)?;
    ensure_dir(&config.out)?;
    save_bundle(&graph, &config.out, name)?;
    write_manifest(&config.out, "make-bundle", config, started)?;
    Ok(config.out.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use graphmix::SplitSpec;
    use std::path::Path;

    fn quick_config(dataset: &str, out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            dataset: Some(dataset.to_string()),
            hidden: 8,
            epochs: 30,
            seeds: 2,
            out: out.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    fn read(path: &Path) -> Vec<u8> {
        std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
    }

    #[test]
    fn train_writes_deterministic_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let out_a = cmd_train(&quick_config("synthetic:two_clusters", &a)).unwrap();
        cmd_train(&quick_config("synthetic:two_clusters", &b)).unwrap();
        assert_eq!(out_a.record.epochs.len(), 31, "one stat row per epoch plus the initial state");
        for file in ["run.jsonl", "summary.json", "model.ckpt"] {
            assert_eq!(read(&a.join(file)), read(&b.join(file)), "{file} differs between runs");
        }
        // The manifest exists but carries wall time, so it is not compared.
        assert!(a.join("manifest.json").is_file());
    }

    #[test]
    fn train_without_dataset_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = quick_config("x", dir.path());
        config.dataset = None;
        let err = cmd_train(&config).unwrap_err();
        assert!(err.to_string().contains("--dataset"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn reproduce_table_reports_measured_and_reference_cells() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            epochs: 20,
            ..quick_config("ignored", dir.path())
        };
        let datasets = vec!["synthetic:two_clusters".to_string()];
        let outcome = cmd_reproduce_table(TableId::T1Hmlp, &datasets, &config).unwrap();
        assert_eq!(outcome.cells.len(), 3, "three models, one dataset, no average row");
        let gcn = outcome.cell("synthetic:two_clusters", "gcn", 2).unwrap();
        assert!(gcn.mean > 50.0, "a trained GCN beats chance on two_clusters: {}", gcn.mean);
        assert!(gcn.paper_mean.is_none(), "no published row for a synthetic dataset");
        assert!(outcome.text.contains("ours"));
        assert!(dir.path().join("t1_hmlp.csv").is_file());
        assert!(dir.path().join("t1_hmlp.txt").is_file());
        let csv = String::from_utf8(read(&dir.path().join("t1_hmlp.csv"))).unwrap();
        assert!(csv.starts_with("table,dataset,model,depth,mean,std,paper_mean,paper_std,delta\n"));
    }

    #[test]
    fn sweep_ratio_writes_curves_and_names_infeasible_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig { epochs: 20, ..quick_config("ignored", dir.path()) };
        let models = vec!["mlp".to_string()];
        let outcome =
            cmd_sweep_ratio("synthetic:two_clusters", &models, &[0.5], &config).unwrap();
        assert_eq!(outcome.points.len(), 1);
        assert!(outcome.mean("mlp", 0.5).unwrap() > 50.0);
        assert!(dir.path().join("sweep.csv").is_file());
        let svg = String::from_utf8(read(&dir.path().join("sweep.svg"))).unwrap();
        assert!(svg.contains("polyline"));

        let err = cmd_sweep_ratio("synthetic:two_clusters", &models, &[0.004], &config).unwrap_err();
        assert!(err.to_string().contains("0.004"), "{err}");
    }

    #[test]
    fn check_equivalence_passes_clean_and_catches_injected_fault() {
        let dir = tempfile::tempdir().unwrap();
        let config = quick_config("synthetic:two_clusters", dir.path());
        let outcome = cmd_check_equivalence(&config, Some(6), false).unwrap();
        assert!(outcome.all_passed, "{}", outcome.report);
        assert!(outcome.report.contains("checks passed"));
        assert!(
            outcome.results.iter().any(|r| r.name.contains("dataset-row-stochasticity")),
            "configured dataset joins the row check"
        );

        let faulty = cmd_check_equivalence(&config, Some(6), true).unwrap();
        assert!(!faulty.all_passed);
        let report = String::from_utf8(read(&dir.path().join("report.txt"))).unwrap();
        assert!(report.contains("FAIL"), "{report}");
    }

    #[test]
    fn analyze_emits_margin_embedding_and_boundary_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("train");
        // No-val split: validation saturates immediately on this easy
        // synthetic, which would freeze snapshot selection at a near-initial
        // model; the final state is the trained one.
        let config = ExperimentConfig {
            model: "tmlp".into(),
            depth: 1,
            epochs: 400,
            split: SplitChoice::Spec(SplitSpec {
                train_ratio: 0.8,
                val_ratio: 0.0,
                seed: 0,
                stratified: true,
            }),
            ..quick_config("synthetic:two_clusters", &out)
        };
        cmd_train(&config).unwrap();
        let analyze_out = dir.path().join("analysis");
        let config = ExperimentConfig { out: analyze_out.clone(), ..config };
        let outcome = cmd_analyze(&config, &out.join("model.ckpt")).unwrap();
        assert!(outcome.margins.mean_delta > 0.0, "aggregation should widen test margins");
        assert!(outcome.boundary.is_some(), "two_clusters features are 2-D");
        for file in [
            "margins.csv",
            "margin_summary.json",
            "embeddings.tsv",
            "embedding_summary.json",
            "embeddings_before.svg",
            "embeddings_after.svg",
            "boundary.json",
            "boundary.svg",
        ] {
            assert!(analyze_out.join(file).is_file(), "missing {file}");
        }
    }

    #[test]
    fn analyze_with_missing_checkpoint_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let config = quick_config("synthetic:two_clusters", dir.path());
        let err = cmd_analyze(&config, &dir.path().join("nope.ckpt")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("nope.ckpt"), "{err}");
    }

    #[test]
    fn make_bundle_round_trips_through_the_loader() {
        let dir = tempfile::tempdir().unwrap();
        let config = quick_config("synthetic:two_clusters:5", dir.path());
        let out = cmd_make_bundle(&config).unwrap();
        let loaded = resolve_dataset(out.to_str().unwrap()).unwrap();
        let expected = apply_split(
            resolve_dataset("synthetic:two_clusters:5").unwrap(),
            &config.split,
        )
        .unwrap();
        assert_eq!(loaded, expected);
    }
}
