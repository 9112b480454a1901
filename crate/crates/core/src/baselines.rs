//! Shallow comparators: logistic regression, k-nearest neighbours, Gaussian naive Bayes.

use rayon::prelude::*;

use crate::dnn::{self, Mlp, MlpConfig, TaskKind, TrainHistory, TrainSpec};
use crate::error::{Error, Result};
use crate::feature_store::{FeatureVector, LabeledFeatureSet};

/// Variance floor for Gaussian naive Bayes.
pub const GNB_VAR_FLOOR: f64 = 1e-9;

pub const DEFAULT_KNN_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineModel {
    LogReg {
        weights: Vec<f64>,
        bias: f64,
    },
    Knn {
        train: LabeledFeatureSet,
        k: usize,
    },
    GaussianNb {
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
        priors: Vec<f64>,
    },
}

impl BaselineModel {
    pub fn knn(train: LabeledFeatureSet, k: usize) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::domain(format!(
                "k = {k} must lie in 1..={} (training rows)",
                train.len()
            )));
        }
        Ok(BaselineModel::Knn { train, k })
    }

    pub fn predict(&self, query: &FeatureVector) -> Result<usize> {
        match self {
            BaselineModel::LogReg { weights, bias } => {
                check_dim(weights.len(), query.dim())?;
                let z = bias
                    + weights
                        .iter()
                        .zip(query.as_slice())
                        .map(|(w, &x)| w * f64::from(x))
                        .sum::<f64>();
                // p >= 0.5 exactly when z >= 0
                Ok(usize::from(z >= 0.0))
            }
            BaselineModel::Knn { train, k } => predict_knn(train, *k, query),
            BaselineModel::GaussianNb { .. } => predict_gnb(self, query),
        }
    }

    pub fn predict_set(&self, set: &LabeledFeatureSet) -> Result<Vec<usize>> {
        set.rows().par_iter().map(|q| self.predict(q)).collect()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::domain(format!(
            "query dim {got}, model expects {expected}"
        )));
    }
    Ok(())
}

/// Logistic regression trained by the MLP's Adam loop (a network with no
/// hidden layers). Early stopping monitors the training loss itself.
pub fn fit_logreg_traced(
    train: &LabeledFeatureSet,
    spec: &TrainSpec,
) -> Result<(BaselineModel, TrainHistory)> {
    if train.n_classes() != 2 {
        return Err(Error::domain(format!(
            "logistic regression needs binary labels, got {} classes",
            train.n_classes()
        )));
    }
    let cfg = MlpConfig {
        input_dim: train.dim(),
        hidden_sizes: vec![],
        n_outputs: 1,
        input_dropout_rate: 0.0,
        task_kind: TaskKind::Binary,
    };
    let (mlp, history) = dnn::train(Mlp::init(cfg, spec.seed)?, train, train, spec)?;
    let layer = &mlp.layers()[0];
    let model = BaselineModel::LogReg {
        weights: layer.weights.column(0).to_vec(),
        bias: layer.bias[0],
    };
    Ok((model, history))
}

pub fn fit_logreg(train: &LabeledFeatureSet, spec: &TrainSpec) -> Result<BaselineModel> {
    fit_logreg_traced(train, spec).map(|(m, _)| m)
}

/// Majority vote among the `k` nearest training rows (Euclidean). Distance
/// ties go to the lower training index, vote ties to the lower class id.
pub fn predict_knn(train: &LabeledFeatureSet, k: usize, query: &FeatureVector) -> Result<usize> {
    if k == 0 || k > train.len() {
        return Err(Error::domain(format!(
            "k = {k} must lie in 1..={} (training rows)",
            train.len()
        )));
    }
    check_dim(train.dim(), query.dim())?;
    let q = query.as_slice();
    let mut dists: Vec<(f64, usize)> = train
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let d2: f64 = row
                .as_slice()
                .iter()
                .zip(q)
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum();
            (d2, i)
        })
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut votes = vec![0usize; train.n_classes()];
    for &(_, i) in &dists[..k] {
        votes[train.labels()[i]] += 1;
    }
    Ok(first_argmax(&votes))
}

fn first_argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn fit_gnb(train: &LabeledFeatureSet) -> Result<BaselineModel> {
    let counts = train.class_counts();
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::domain(format!(
            "class {c} has {} samples; naive Bayes needs at least 2 per class",
            counts[c]
        )));
    }
    let dim = train.dim();
    let k = train.n_classes();
    let mut means = vec![vec![0.0; dim]; k];
    for (row, &c) in train.rows().iter().zip(train.labels()) {
        for (m, &x) in means[c].iter_mut().zip(row.as_slice()) {
            *m += f64::from(x);
        }
    }
    for (m, &n) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= n as f64);
    }
    let mut variances = vec![vec![0.0; dim]; k];
    for (row, &c) in train.rows().iter().zip(train.labels()) {
        for ((v, &m), &x) in variances[c].iter_mut().zip(&means[c]).zip(row.as_slice()) {
            let d = f64::from(x) - m;
            *v += d * d;
        }
    }
    for (v, &n) in variances.iter_mut().zip(&counts) {
        v.iter_mut()
            .for_each(|s| *s = (*s / n as f64).max(GNB_VAR_FLOOR));
    }
    let total = train.len() as f64;
    let priors = counts.iter().map(|&n| n as f64 / total).collect();
    Ok(BaselineModel::GaussianNb {
        means,
        variances,
        priors,
    })
}

/// Per-class log posterior up to a shared constant.
pub fn gnb_log_scores(model: &BaselineModel, query: &FeatureVector) -> Result<Vec<f64>> {
    let BaselineModel::GaussianNb {
        means,
        variances,
        priors,
    } = model
    else {
        return Err(Error::domain("not a Gaussian naive Bayes model"));
    };
    check_dim(means[0].len(), query.dim())?;
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    Ok(means
        .iter()
        .zip(variances)
        .zip(priors)
        .map(|((mu, var), &prior)| {
            let ll: f64 = query
                .as_slice()
                .iter()
                .zip(mu.iter().zip(var))
                .map(|(&x, (&m, &v))| {
                    let d = f64::from(x) - m;
                    -0.5 * (log_2pi + v.ln() + d * d / v)
                })
                .sum();
            prior.ln() + ll
        })
        .collect())
}

pub fn predict_gnb(model: &BaselineModel, query: &FeatureVector) -> Result<usize> {
    Ok(first_argmax(&gnb_log_scores(model, query)?))
}
