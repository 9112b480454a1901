use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{decide, features_matrix, loss, AdamState, Mlp, TaskKind};
use crate::error::{Error, Result};
use crate::feature_store::LabeledFeatureSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation-loss improvement; 0 disables.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::domain("Adam betas must lie in (0, 1)"));
        }
        if self.epsilon.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::domain("Adam epsilon must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::domain("batch_size and max_epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Mean mini-batch loss per epoch, dropout active.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub epochs_run: usize,
    /// 0-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_train_loss(&self) -> f64 {
        self.train_loss[self.best_epoch]
    }

    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }
}

fn check_set(mlp: &Mlp, set: &LabeledFeatureSet, role: &str) -> Result<()> {
    let cfg = mlp.config();
    if set.dim() != cfg.input_dim {
        return Err(Error::domain(format!(
            "{role} features have dim {}, network expects {}",
            set.dim(),
            cfg.input_dim
        )));
    }
    if set.n_classes() > cfg.n_classes() {
        let kind = match cfg.task_kind {
            TaskKind::Binary => "binary",
            TaskKind::Multiclass => "multiclass",
        };
        return Err(Error::domain(format!(
            "{role} set has {} classes but the {kind} head covers {}",
            set.n_classes(),
            cfg.n_classes()
        )));
    }
    Ok(())
}

/// Mini-batch Adam with per-epoch reshuffling and early stopping on
/// validation loss. Returns the parameters of the best validation epoch.
pub fn train(
    mut mlp: Mlp,
    train_set: &LabeledFeatureSet,
    val_set: &LabeledFeatureSet,
    spec: &TrainSpec,
) -> Result<(Mlp, TrainHistory)> {
    spec.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::domain(
            "training and validation sets must be non-empty",
        ));
    }
    check_set(&mlp, train_set, "training")?;
    check_set(&mlp, val_set, "validation")?;

    let kind = mlp.config().task_kind;
    let x_train = features_matrix(train_set);
    let y_train = train_set.labels();
    let x_val = features_matrix(val_set);
    let y_val = val_set.labels();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut adam = AdamState::new(&mlp);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let mut best = mlp.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..spec.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(spec.batch_size) {
            let xb = x_train.select(Axis(0), idx);
            let yb: Vec<usize> = idx.iter().map(|&i| y_train[i]).collect();
            let mask = mlp.dropout_mask(idx.len(), rng.next_u64());
            let (grads, batch_loss) = mlp.gradients(xb.view(), &yb, mask.as_ref())?;
            adam.update(&mut mlp, &grads, spec);
            loss_sum += batch_loss * idx.len() as f64;
        }

        let probs = mlp.predict_proba(x_val.view())?;
        let val_loss = loss(probs.view(), y_val, kind)?;
        let correct = decide(probs.view(), kind)
            .iter()
            .zip(y_val)
            .filter(|(p, y)| p == y)
            .count();
        history.train_loss.push(loss_sum / train_set.len() as f64);
        history.val_loss.push(val_loss);
        history
            .val_accuracy
            .push(correct as f64 / y_val.len() as f64);
        history.epochs_run = epoch + 1;

        if !val_loss.is_finite() {
            return Err(Error::domain(format!(
                "validation loss diverged at epoch {}",
                epoch + 1
            )));
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best = mlp.clone();
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if spec.patience > 0 && stale >= spec.patience {
                break;
            }
        }
    }
    Ok((best, history))
}
