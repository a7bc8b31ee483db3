//! Transductive graph learning with mixup-form convolution.
//!
//! The crate implements graph convolution (GCN, SGC, PPNP) over a
//! row-normalized adjacency, an exact rewrite of those models as Mixup over
//! node features/hidden states, and the two MLP constructions that fall out
//! of that view: HMLP (trained on Homophily-Relabel soft targets) and TMLP
//! (plain MLP weights, convolutional inference). Everything is deterministic
//! for a fixed seed: fixed summation order, seeded ChaCha streams, and
//! byte-stable text output.

pub mod analysis;
pub mod bundle;
pub mod checks;
pub mod graph;
pub mod matrix;
pub mod models;
pub mod numerics;
pub mod svg;
pub mod tape;
pub mod trainer;

pub use analysis::{
    boundary_grid, cluster_score, export_embeddings, logit_margin, margin_report, AnalysisError,
    BoundaryGrid, EmbeddingExport, MarginReport,
};
pub use bundle::{load_bundle, make_split, save_bundle, synthetic_graph, DataError, SplitSpec, SyntheticKind};
pub use checks::{all_passed, run_suite, CheckResult, SuiteConfig};
pub use graph::{homophily_relabel, Graph, GraphError, NormKind, NormalizedAdjacency, SoftLabelMatrix, Split};
pub use matrix::{CsrMatrix, DenseMatrix};
pub use models::{
    compile, load_model, mixup_form_predict, predict, predict_tmlp, save_model, ModelError,
    ModelKind, ModelSpec, TrainedModel,
};
pub use numerics::{
    derive_seed, finite_difference_gradients, glorot_init, masked_accuracy, max_relative_error, pca_2d,
    soft_cross_entropy, standard_normal, NumericsError, OptimizerKind, OptimizerState,
};
pub use svg::{emit_svg_scatter, render_svg, LineSeries, PlotStyle, ScatterPoint, SvgPlot};
pub use tape::{FeatureSource, Tape, TapeError, TapeProgram};
pub use trainer::{
    evaluate, fit, repeat_runs, training_targets, EpochStat, RunRecord, SeedSweep, TrainConfig,
    TrainError,
};
