//! Reverse-mode differentiation over a fixed vocabulary of steps:
//! dense linear layers, sparse adjacency aggregation, and relu. The loss
//! (soft cross-entropy) lives outside the tape and supplies the gradient
//! seed, so a `Tape` is just the cached forward values of one program run.

use crate::matrix::{CsrMatrix, DenseMatrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TapeError {
    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,
    #[error("gradient seed is {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    SeedShape { got_rows: usize, got_cols: usize, want_rows: usize, want_cols: usize },
}

/// Leaf feature matrix. Sparse inputs (bag-of-words features) keep the
/// first linear layer and its weight gradient proportional to nnz instead
/// of N×d.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl FeatureSource {
    pub fn rows(&self) -> usize {
        match self {
            FeatureSource::Dense(m) => m.rows(),
            FeatureSource::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            FeatureSource::Dense(m) => m.cols(),
            FeatureSource::Sparse(m) => m.cols(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            FeatureSource::Dense(m) => m.clone(),
            FeatureSource::Sparse(m) => m.to_dense(),
        }
    }

    /// `self · w`. Both arms accumulate contributions in the same row/column
    /// order, so dense and sparse representations of the same matrix produce
    /// bitwise-identical products.
    pub fn matmul(&self, w: &DenseMatrix) -> DenseMatrix {
        match self {
            FeatureSource::Dense(m) => m.matmul(w),
            FeatureSource::Sparse(m) => {
                assert_eq!(m.cols(), w.rows(), "matmul shape mismatch");
                let mut out = DenseMatrix::zeros(m.rows(), w.cols());
                for r in 0..m.rows() {
                    let (cols, vals) = m.row_entries(r);
                    let out_row = out.row_mut(r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        for (o, &b) in out_row.iter_mut().zip(w.row(c)) {
                            *o += v * b;
                        }
                    }
                }
                out
            }
        }
    }

    /// `selfᵀ · g` — the weight gradient of a linear layer on this leaf.
    pub fn transpose_matmul(&self, g: &DenseMatrix) -> DenseMatrix {
        match self {
            FeatureSource::Dense(m) => m.transpose_matmul(g),
            FeatureSource::Sparse(m) => {
                assert_eq!(m.rows(), g.rows(), "transpose_matmul shape mismatch");
                let mut out = DenseMatrix::zeros(m.cols(), g.cols());
                for r in 0..m.rows() {
                    let (cols, vals) = m.row_entries(r);
                    let g_row = g.row(r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        let out_row = out.row_mut(c);
                        for (o, &b) in out_row.iter_mut().zip(g_row) {
                            *o += v * b;
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    /// `H ← H · params[param]`
    Linear { param: usize },
    /// `H ← adjacencies[adj] · H`
    Aggregate { adj: usize },
    /// `H ← max(0, H)` elementwise; subgradient 0 at exactly 0
    Relu,
}

/// The static structure of one forward computation: a leaf feature matrix
/// and a chain of steps. Built once per fit; adjacency transposes are cached
/// here so every backward pass reuses them.
#[derive(Debug, Clone)]
pub struct TapeProgram {
    input: FeatureSource,
    steps: Vec<Step>,
    adjacencies: Vec<(CsrMatrix, CsrMatrix)>,
}

impl TapeProgram {
    pub fn new(input: FeatureSource) -> Self {
        Self { input, steps: Vec::new(), adjacencies: Vec::new() }
    }

    pub fn input(&self) -> &FeatureSource {
        &self.input
    }

    pub fn push_linear(&mut self, param: usize) {
        self.steps.push(Step::Linear { param });
    }

    pub fn push_relu(&mut self) {
        self.steps.push(Step::Relu);
    }

    pub fn push_aggregate(&mut self, adj: CsrMatrix) {
        let transposed = adj.transpose();
        self.adjacencies.push((adj, transposed));
        self.steps.push(Step::Aggregate { adj: self.adjacencies.len() - 1 });
    }

    /// Run the chain, caching every intermediate value on the returned tape.
    pub fn forward(&self, params: &[DenseMatrix]) -> Tape<'_> {
        assert!(!self.steps.is_empty(), "empty tape program");
        let mut values: Vec<DenseMatrix> = Vec::with_capacity(self.steps.len());
        for (idx, step) in self.steps.iter().enumerate() {
            let out = match *step {
                Step::Linear { param } => match idx {
                    0 => self.input.matmul(&params[param]),
                    _ => values[idx - 1].matmul(&params[param]),
                },
                Step::Aggregate { adj } => {
                    let a = &self.adjacencies[adj].0;
                    match idx {
                        0 => match &self.input {
                            FeatureSource::Dense(m) => a.matmul_dense(m),
                            FeatureSource::Sparse(m) => a.matmul_sparse(m).to_dense(),
                        },
                        _ => a.matmul_dense(&values[idx - 1]),
                    }
                }
                Step::Relu => {
                    let mut out = values[idx - 1].clone();
                    for v in out.data_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                    out
                }
            };
            values.push(out);
        }
        Tape { program: self, values, consumed: false }
    }

    /// Forward pass keeping only the final value (for evaluation passes
    /// that never call backward).
    pub fn forward_logits(&self, params: &[DenseMatrix]) -> DenseMatrix {
        self.forward(params).into_logits()
    }
}

/// Cached forward values of one program execution. `backward` may run once.
#[derive(Debug)]
pub struct Tape<'p> {
    program: &'p TapeProgram,
    values: Vec<DenseMatrix>,
    consumed: bool,
}

impl Tape<'_> {
    pub fn logits(&self) -> &DenseMatrix {
        self.values.last().expect("program is never empty")
    }

    pub fn into_logits(mut self) -> DenseMatrix {
        self.values.pop().expect("program is never empty")
    }

    /// Reverse-mode sweep. Returns one gradient per entry of `params`;
    /// parameters not used by the program get zero gradients. The gradient
    /// with respect to the leaf input is never materialized.
    pub fn backward(&mut self, seed: DenseMatrix, params: &[DenseMatrix]) -> Result<Vec<DenseMatrix>, TapeError> {
        if self.consumed {
            return Err(TapeError::TapeConsumed);
        }
        self.consumed = true;
        let out = self.logits();
        if (seed.rows(), seed.cols()) != (out.rows(), out.cols()) {
            return Err(TapeError::SeedShape {
                got_rows: seed.rows(),
                got_cols: seed.cols(),
                want_rows: out.rows(),
                want_cols: out.cols(),
            });
        }
        let mut grads: Vec<DenseMatrix> =
            params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect();
        let mut grad = seed;
        for (idx, step) in self.program.steps.iter().enumerate().rev() {
            match *step {
                Step::Linear { param } => {
                    if idx == 0 {
                        grads[param].add_scaled(&self.program.input.transpose_matmul(&grad), 1.0);
                    } else {
                        grads[param].add_scaled(&self.values[idx - 1].transpose_matmul(&grad), 1.0);
                        grad = grad.matmul_transpose(&params[param]);
                    }
                }
                Step::Aggregate { adj } => {
                    if idx == 0 {
                        break;
                    }
                    grad = self.program.adjacencies[adj].1.matmul_dense(&grad);
                }
                Step::Relu => {
                    if idx == 0 {
                        break;
                    }
                    for (g, &v) in grad.data_mut().iter_mut().zip(self.values[idx].data()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
            }
        }
        Ok(grads)
    }
}
