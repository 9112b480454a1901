//! Multilayer perceptron with dropout on the input layer.
//!
//! Hidden layers are affine + ReLU. The head is one sigmoid unit for binary
//! tasks and a softmax for multiclass tasks, trained with binary or
//! categorical cross-entropy respectively. Dropout is inverted: surviving
//! inputs are scaled by `1 / (1 - rate)` at train time so evaluation needs no
//! correction.

mod adam;
mod checkpoint;
mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::feature_store::LabeledFeatureSet;

pub use adam::AdamState;
pub use train::{train, TrainHistory, TrainSpec};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub n_outputs: usize,
    pub input_dropout_rate: f64,
    pub task_kind: TaskKind,
}

impl MlpConfig {
    /// DR identification preset: hidden (256, 128), sigmoid head, 0.2 input dropout.
    pub fn identify(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_sizes: vec![256, 128],
            n_outputs: 1,
            input_dropout_rate: 0.2,
            task_kind: TaskKind::Binary,
        }
    }

    /// Severity grading preset: hidden (512, 256, 128), softmax head, 0.2 input dropout.
    pub fn severity(input_dim: usize, n_classes: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_sizes: vec![512, 256, 128],
            n_outputs: n_classes,
            input_dropout_rate: 0.2,
            task_kind: TaskKind::Multiclass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(Error::domain("layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.input_dropout_rate) {
            return Err(Error::domain(format!(
                "input dropout rate must lie in [0, 1), got {}",
                self.input_dropout_rate
            )));
        }
        match (self.task_kind, self.n_outputs) {
            (TaskKind::Binary, 1) => Ok(()),
            (TaskKind::Multiclass, n) if n >= 2 => Ok(()),
            (kind, n) => Err(Error::domain(format!(
                "{kind:?} head cannot have {n} outputs"
            ))),
        }
    }

    /// Number of classes the head distinguishes.
    pub fn n_classes(&self) -> usize {
        match self.task_kind {
            TaskKind::Binary => 2,
            TaskKind::Multiclass => self.n_outputs,
        }
    }

    fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 2);
        sizes.push(self.input_dim);
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(self.n_outputs);
        sizes
    }
}

/// Weights are `fan_in x fan_out`, so a layer computes `x . W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerParams {
    fn zeros_like(other: &LayerParams) -> Self {
        LayerParams {
            weights: Array2::zeros(other.weights.raw_dim()),
            bias: Array1::zeros(other.bias.raw_dim()),
        }
    }
}

/// Parameter-shaped gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<LayerParams>,
}

/// Activations kept from a forward pass: the (dropped-out) input, each
/// hidden layer after ReLU, and finally the output probabilities.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Array2<f64> {
        self.activations
            .last()
            .expect("cache holds at least the output")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active; the mask is drawn from `seed`.
    Train {
        seed: u64,
    },
}

impl Mlp {
    /// He-normal weights (variance `2 / fan_in`), zero biases.
    pub fn init(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = config.layer_sizes();
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                LayerParams {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        normal.sample(&mut rng)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Mlp { config, layers })
    }

    /// Builds a network from explicit parameters, checking shapes against `config`.
    pub fn from_parts(config: MlpConfig, layers: Vec<LayerParams>) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes();
        if layers.len() != sizes.len() - 1 {
            return Err(Error::domain(format!(
                "expected {} layers, got {}",
                sizes.len() - 1,
                layers.len()
            )));
        }
        for (i, (layer, w)) in layers.iter().zip(sizes.windows(2)).enumerate() {
            if layer.weights.dim() != (w[0], w[1]) || layer.bias.len() != w[1] {
                return Err(Error::domain(format!(
                    "layer {i} does not match {}x{}",
                    w[0], w[1]
                )));
            }
            if layer
                .weights
                .iter()
                .chain(layer.bias.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::domain(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        Ok(Mlp { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Inverted-dropout mask for a batch of `rows`, or `None` when the rate is 0.
    pub fn dropout_mask(&self, rows: usize, seed: u64) -> Option<Array2<f64>> {
        let rate = self.config.input_dropout_rate;
        if rate == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - rate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Some(Array2::from_shape_simple_fn(
            (rows, self.config.input_dim),
            || {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            },
        ))
    }

    pub fn forward(&self, batch: ArrayView2<'_, f64>, mode: Mode) -> Result<ForwardCache> {
        let mask = match mode {
            Mode::Eval => None,
            Mode::Train { seed } => self.dropout_mask(batch.nrows(), seed),
        };
        self.forward_masked(batch, mask.as_ref())
    }

    /// Forward pass with an explicit dropout mask (`None` = identity).
    pub fn forward_masked(
        &self,
        batch: ArrayView2<'_, f64>,
        mask: Option<&Array2<f64>>,
    ) -> Result<ForwardCache> {
        if batch.ncols() != self.config.input_dim {
            return Err(Error::domain(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.config.input_dim
            )));
        }
        let input = match mask {
            Some(m) => {
                if m.dim() != batch.dim() {
                    return Err(Error::domain("dropout mask shape differs from batch"));
                }
                &batch * m
            }
            None => batch.to_owned(),
        };

        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&layer.weights) + &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                match self.config.task_kind {
                    TaskKind::Binary => z.mapv_inplace(sigmoid),
                    TaskKind::Multiclass => softmax_rows(&mut z),
                }
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Evaluation-mode probabilities.
    pub fn predict_proba(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self
            .forward(batch, Mode::Eval)?
            .activations
            .pop()
            .expect("output layer"))
    }

    /// Gradients of the mean cross-entropy with respect to every parameter,
    /// under the given dropout mask. Returns the batch loss alongside.
    pub fn gradients(
        &self,
        batch: ArrayView2<'_, f64>,
        labels: &[usize],
        mask: Option<&Array2<f64>>,
    ) -> Result<(Gradients, f64)> {
        if labels.len() != batch.nrows() {
            return Err(Error::domain(format!(
                "{} labels for {} rows",
                labels.len(),
                batch.nrows()
            )));
        }
        let cache = self.forward_masked(batch, mask)?;
        let probs = cache.probabilities();
        let batch_loss = loss(probs.view(), labels, self.config.task_kind)?;

        // sigmoid + BCE and softmax + CE share the output delta p - onehot(y)
        let n = labels.len() as f64;
        let mut delta = probs.clone();
        match self.config.task_kind {
            TaskKind::Binary => {
                for (row, &y) in labels.iter().enumerate() {
                    delta[[row, 0]] -= y as f64;
                }
            }
            TaskKind::Multiclass => {
                for (row, &y) in labels.iter().enumerate() {
                    delta[[row, y]] -= 1.0;
                }
            }
        }
        delta /= n;

        let mut grads: Vec<LayerParams> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let a_prev = &cache.activations[l];
            grads.push(LayerParams {
                weights: a_prev.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                back.zip_mut_with(a_prev, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, batch_loss))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Mean cross-entropy. Binary expects one probability column for class 1.
pub fn loss(probabilities: ArrayView2<'_, f64>, labels: &[usize], kind: TaskKind) -> Result<f64> {
    if probabilities.nrows() != labels.len() {
        return Err(Error::domain(format!(
            "{} probability rows for {} labels",
            probabilities.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::domain("loss of an empty batch"));
    }
    let clamp = |p: f64| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let mut total = 0.0;
    for (row, &y) in probabilities.rows().into_iter().zip(labels) {
        total += match kind {
            TaskKind::Binary => {
                let p = clamp(row[0]);
                match y {
                    0 => -(1.0 - p).ln(),
                    1 => -p.ln(),
                    _ => return Err(Error::domain(format!("binary label {y} out of range"))),
                }
            }
            TaskKind::Multiclass => {
                if y >= row.len() {
                    return Err(Error::domain(format!(
                        "label {y} out of range for {} classes",
                        row.len()
                    )));
                }
                -clamp(row[y]).ln()
            }
        };
    }
    Ok(total / labels.len() as f64)
}

/// Class ids from probabilities: threshold 0.5 for binary, first argmax otherwise.
pub fn decide(probabilities: ArrayView2<'_, f64>, kind: TaskKind) -> Vec<usize> {
    probabilities
        .rows()
        .into_iter()
        .map(|row| match kind {
            TaskKind::Binary => usize::from(row[0] >= 0.5),
            TaskKind::Multiclass => {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            }
        })
        .collect()
}

/// Stacks a feature set into an `n x dim` matrix.
pub fn features_matrix(set: &LabeledFeatureSet) -> Array2<f64> {
    let dim = set.dim();
    let mut out = Array2::zeros((set.len(), dim));
    for (mut dst, row) in out.rows_mut().into_iter().zip(set.rows()) {
        for (d, &v) in dst.iter_mut().zip(row.as_slice()) {
            *d = f64::from(v);
        }
    }
    out
}

/// Evaluation-mode predictions for every row of `set`.
pub fn predict(mlp: &Mlp, set: &LabeledFeatureSet) -> Result<Vec<usize>> {
    let probs = mlp.predict_proba(features_matrix(set).view())?;
    Ok(decide(probs.view(), mlp.config.task_kind))
}
