//! Full-batch transductive training with validation-selected test accuracy.
//!
//! `fit` performs exactly `epochs` optimizer steps. The parameter state
//! after every update (including the initial state and the fully trained
//! one) is evaluated, so a run of E epochs records E+1 stat rows; the row
//! at `epoch = k` describes the parameters after k updates. The returned
//! model is the snapshot at the earliest epoch maximizing validation
//! accuracy, or the final state when the graph has no validation mask.

use crate::graph::Graph;
use crate::matrix::DenseMatrix;
use crate::models::{compile, ModelError, ModelSpec, TrainedModel};
use crate::numerics::{
    derive_seed, glorot_init, masked_accuracy, soft_cross_entropy, NumericsError, OptimizerKind,
    OptimizerState,
};
use crate::tape::TapeError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{0} mask is empty")]
    EmptyMask(&'static str),
    #[error("repeat_runs needs at least 2 seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Tape(#[from] TapeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 0.1, epochs: 400, optimizer: OptimizerKind::Sgd, seed: 0, weight_decay: 0.0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::InvalidConfig(format!("lr {} must be positive", self.lr)));
        }
        if self.weight_decay < 0.0 {
            return Err(TrainError::InvalidConfig("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Stats of one observed parameter state. Accuracies use the model's own
/// inference rule (aggregated for TMLP/unified); `None` marks empty masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub epochs: Vec<EpochStat>,
    pub selected_epoch: usize,
    pub selected_val_accuracy: Option<f64>,
    pub selected_test_accuracy: Option<f64>,
    pub wall_seconds: f64,
}

impl RunRecord {
    /// One JSON object per epoch row. Wall time is deliberately excluded so
    /// identical runs serialize to identical bytes; it lives in run
    /// manifests instead.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for stat in &self.epochs {
            out.push_str(&serde_json::to_string(stat).expect("epoch stat serializes"));
            out.push('\n');
        }
        out
    }

    pub fn initial_loss(&self) -> f64 {
        self.epochs.first().expect("at least one epoch").loss
    }

    pub fn final_loss(&self) -> f64 {
        self.epochs.last().expect("at least one epoch").loss
    }

    /// Equality over everything that is deterministic (ignores wall time).
    pub fn same_trajectory(&self, other: &RunRecord) -> bool {
        self.epochs == other.epochs
            && self.selected_epoch == other.selected_epoch
            && self.selected_val_accuracy == other.selected_val_accuracy
            && self.selected_test_accuracy == other.selected_test_accuracy
    }
}

/// The loss a compiled model minimizes: homophily-relabel soft labels over
/// all covered nodes when relabeling is active, one-hot hard labels over the
/// train mask otherwise. Row weights are uniform over contributing rows and
/// sum to 1, so the loss is a mean over its training set.
pub fn training_targets(
    graph: &Graph,
    relabel: Option<&crate::graph::SoftLabelMatrix>,
) -> (DenseMatrix, Vec<f64>) {
    match relabel {
        Some(soft) => {
            let w = 1.0 / soft.covered_count() as f64;
            let weights =
                soft.coverage_mask().iter().map(|&c| if c { w } else { 0.0 }).collect();
            (soft.matrix().clone(), weights)
        }
        None => {
            let train_count = graph.train_mask().iter().filter(|&&m| m).count();
            let w = 1.0 / train_count as f64;
            let weights =
                graph.train_mask().iter().map(|&m| if m { w } else { 0.0 }).collect();
            (graph.one_hot_labels(), weights)
        }
    }
}

/// Train `spec` on `graph`. Loss: hard labels over the train mask for
/// MLP/GCN/SGC/PPNP/TMLP; homophily-relabel soft labels over all covered
/// nodes for HMLP/unified. Deterministic for a fixed config.
pub fn fit(graph: &Graph, spec: &ModelSpec, config: &TrainConfig) -> Result<(TrainedModel, RunRecord), TrainError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let compiled = compile(spec, graph)?;

    let (targets, row_weights) = training_targets(graph, compiled.relabel.as_ref());
    debug_assert_eq!(row_weights.len(), graph.num_nodes());

    let mut params: Vec<DenseMatrix> = compiled
        .shapes
        .iter()
        .enumerate()
        .map(|(layer, &(r, c))| glorot_init(r, c, derive_seed(config.seed, layer as u64)))
        .collect();
    let mut optimizer =
        OptimizerState::new(config.optimizer, config.lr, config.weight_decay, &compiled.shapes);

    let mut stats: Vec<EpochStat> = Vec::with_capacity(config.epochs + 1);
    let mut best: Option<(usize, f64)> = None;
    let mut snapshot: Option<Vec<DenseMatrix>> = None;
    for epoch in 0..=config.epochs {
        let mut tape = compiled.train_program.forward(&params);
        let (loss, grad_seed) = soft_cross_entropy(tape.logits(), &targets, &row_weights)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        let eval_logits_owned;
        let eval_logits = match &compiled.eval_program {
            Some(program) => {
                eval_logits_owned = program.forward_logits(&params);
                &eval_logits_owned
            }
            None => tape.logits(),
        };
        let stat = EpochStat {
            epoch,
            loss,
            train_accuracy: masked_accuracy(eval_logits, graph.labels(), graph.train_mask()),
            val_accuracy: masked_accuracy(eval_logits, graph.labels(), graph.val_mask()),
            test_accuracy: masked_accuracy(eval_logits, graph.labels(), graph.test_mask()),
        };
        if let Some(val) = stat.val_accuracy {
            if best.map_or(true, |(_, b)| val > b) {
                best = Some((epoch, val));
                snapshot = Some(params.clone());
            }
        }
        stats.push(stat);
        if epoch == config.epochs {
            break;
        }
        let grads = tape.backward(grad_seed, &params)?;
        optimizer.step(&mut params, &grads)?;
    }

    let (selected_epoch, selected_params) = match (best, snapshot) {
        (Some((epoch, _)), Some(p)) => (epoch, p),
        // No validation mask: keep the fully trained state.
        _ => (config.epochs, params),
    };
    let selected = &stats[selected_epoch];
    let record = RunRecord {
        selected_epoch,
        selected_val_accuracy: selected.val_accuracy,
        selected_test_accuracy: selected.test_accuracy,
        epochs: stats,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let model = TrainedModel {
        spec: *spec,
        params: selected_params,
        relabel: compiled.relabel,
        adj: compiled.adj,
        seed: config.seed,
    };
    Ok((model, record))
}

/// Accuracy of the model's own prediction rule over a mask.
pub fn evaluate(model: &TrainedModel, graph: &Graph, mask: &[bool]) -> Result<f64, TrainError> {
    let logits = model.predict(graph)?;
    masked_accuracy(&logits, graph.labels(), mask).ok_or(TrainError::EmptyMask("evaluation"))
}

/// Mean ± sample standard deviation of selected test accuracy over seeds
/// `config.seed .. config.seed + n_seeds`.
#[derive(Debug, Clone)]
pub struct SeedSweep {
    pub accuracies: Vec<f64>,
    pub records: Vec<RunRecord>,
    pub mean: f64,
    pub std: f64,
}

pub fn repeat_runs(
    graph: &Graph,
    spec: &ModelSpec,
    config: &TrainConfig,
    n_seeds: usize,
) -> Result<SeedSweep, TrainError> {
    if n_seeds < 2 {
        return Err(TrainError::TooFewSeeds(n_seeds));
    }
    let mut accuracies = Vec::with_capacity(n_seeds);
    let mut records = Vec::with_capacity(n_seeds);
    for offset in 0..n_seeds {
        let run_config = TrainConfig { seed: config.seed + offset as u64, ..*config };
        let (_, record) = fit(graph, spec, &run_config)?;
        let accuracy = record.selected_test_accuracy.ok_or(TrainError::EmptyMask("test"))?;
        accuracies.push(accuracy);
        records.push(record);
    }
    let mean = accuracies.iter().sum::<f64>() / n_seeds as f64;
    let var = accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n_seeds - 1) as f64;
    Ok(SeedSweep { accuracies, records, mean, std: var.sqrt() })
}
