//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! features.fc1 = fc1.fvec
//! features.fc2 = fc2.fvec
//! features.third = xception.fvec
//! task = severity            # identify | severity
//! blend = max,avg,avg        # three stages, two stages (fc1+fc2 only) or `none`
//! modality = fc2             # used when blend = none
//! model = dnn                # dnn | logreg | knn | gnb
//! knn.k = 5
//! dnn.hidden = 512,256,128   # defaults to the task preset
//! dnn.dropout = 0.2
//! split.train_fraction = 0.8
//! split.seed = 42
//! split.stratified = false
//! split.validation_fraction = 0.1
//! train.lr = 0.001
//! train.beta1 = 0.9
//! train.beta2 = 0.999
//! train.epsilon = 1e-8
//! train.batch_size = 32
//! train.max_epochs = 100
//! train.patience = 10
//! train.seed = 0
//! report.csv = out/report.csv
//! report.text = out/report.txt
//! report.checkpoint = out/model.mlp
//! ```
//!
//! Relative paths in a config file resolve against the file's directory;
//! command-line overrides resolve against the working directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dnn::{MlpConfig, TrainSpec};
use crate::error::{Error, Result};
use crate::feature_store::SplitSpec;
use crate::fusion::{BlendConfig, PoolMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Binary DR identification (grades 1-4 merged).
    Identify,
    /// Five-way severity grading.
    Severity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Fc1,
    Fc2,
    Third,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Fc1 => "fc1",
            Modality::Fc2 => "fc2",
            Modality::Third => "third",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc1" => Ok(Modality::Fc1),
            "fc2" => Ok(Modality::Fc2),
            "third" => Ok(Modality::Third),
            other => Err(Error::Config(format!("unknown modality '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    /// fc1, fc2 and the third modality through all three stages.
    Blend3(BlendConfig),
    /// fc1 and fc2 through stages 1 and 2 only.
    Blend2(BlendConfig),
    /// One modality used as-is.
    Single(Modality),
}

impl Fusion {
    pub fn modalities(&self) -> Vec<Modality> {
        match self {
            Fusion::Blend3(_) => vec![Modality::Fc1, Modality::Fc2, Modality::Third],
            Fusion::Blend2(_) => vec![Modality::Fc1, Modality::Fc2],
            Fusion::Single(m) => vec![*m],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Dnn,
    LogReg,
    Knn { k: usize },
    GaussianNb,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeaturePaths {
    pub fc1: Option<PathBuf>,
    pub fc2: Option<PathBuf>,
    pub third: Option<PathBuf>,
}

impl FeaturePaths {
    pub fn get(&self, m: Modality) -> Option<&PathBuf> {
        match m {
            Modality::Fc1 => self.fc1.as_ref(),
            Modality::Fc2 => self.fc2.as_ref(),
            Modality::Third => self.third.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportPaths {
    pub csv: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub features: FeaturePaths,
    pub task: Task,
    pub fusion: Fusion,
    pub model: ModelKind,
    /// Neighbour count applied when `model = knn`.
    pub knn_k: usize,
    /// Hidden layer sizes; `None` selects the task preset.
    pub hidden: Option<Vec<usize>>,
    pub input_dropout: f64,
    pub split: SplitSpec,
    /// Share of the training split held out for early stopping.
    pub validation_fraction: f64,
    pub train: TrainSpec,
    pub report: ReportPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            features: FeaturePaths::default(),
            task: Task::Severity,
            fusion: Fusion::Blend3(BlendConfig::default()),
            model: ModelKind::Dnn,
            knn_k: crate::baselines::DEFAULT_KNN_K,
            hidden: None,
            input_dropout: 0.2,
            split: SplitSpec::default(),
            validation_fraction: 0.1,
            train: TrainSpec::default(),
            report: ReportPaths::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got '{value}'"
        ))),
    }
}

pub fn parse_modes(value: &str) -> Result<Vec<PoolMode>> {
    value.split(',').map(str::parse).collect()
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|s| parse_num(key, s.trim())).collect()
}

/// Splits `key=value`, trimming both sides.
pub fn split_pair(line: &str) -> Result<(&str, &str)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, got '{line}'")))?;
    Ok((k.trim(), v.trim()))
}

impl ExperimentConfig {
    /// Applies one setting. `base` anchors relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        match key {
            "features.fc1" => self.features.fc1 = Some(path()),
            "features.fc2" => self.features.fc2 = Some(path()),
            "features.third" => self.features.third = Some(path()),
            "task" => {
                self.task = match value {
                    "identify" | "task1" => Task::Identify,
                    "severity" | "task2" => Task::Severity,
                    other => return Err(Error::Config(format!("unknown task '{other}'"))),
                }
            }
            "blend" => {
                let current = match self.fusion {
                    Fusion::Single(m) => Some(m),
                    _ => None,
                };
                self.fusion = if value == "none" {
                    Fusion::Single(current.unwrap_or(Modality::Fc2))
                } else {
                    let modes = parse_modes(value)?;
                    match modes[..] {
                        [s1, s2, s3] => Fusion::Blend3(BlendConfig {
                            stage1: s1,
                            stage2: s2,
                            stage3: s3,
                        }),
                        [s1, s2] => Fusion::Blend2(BlendConfig {
                            stage1: s1,
                            stage2: s2,
                            stage3: PoolMode::Avg,
                        }),
                        _ => {
                            return Err(Error::Config(format!(
                                "blend takes two or three pool modes, got '{value}'"
                            )))
                        }
                    }
                };
            }
            "modality" => self.fusion = Fusion::Single(value.parse()?),
            "model" => {
                self.model = match value {
                    "dnn" => ModelKind::Dnn,
                    "logreg" => ModelKind::LogReg,
                    "knn" => ModelKind::Knn { k: self.knn_k },
                    "gnb" => ModelKind::GaussianNb,
                    other => return Err(Error::Config(format!("unknown model '{other}'"))),
                }
            }
            "knn.k" => {
                self.knn_k = parse_num(key, value)?;
                if let ModelKind::Knn { k } = &mut self.model {
                    *k = self.knn_k;
                }
            }
            "dnn.hidden" => self.hidden = Some(parse_list(key, value)?),
            "dnn.dropout" => self.input_dropout = parse_num(key, value)?,
            "split.train_fraction" => self.split.train_fraction = parse_num(key, value)?,
            "split.seed" => self.split.seed = parse_num(key, value)?,
            "split.stratified" => self.split.stratified = parse_bool(key, value)?,
            "split.validation_fraction" => self.validation_fraction = parse_num(key, value)?,
            "train.lr" | "train.learning_rate" => self.train.learning_rate = parse_num(key, value)?,
            "train.beta1" => self.train.beta1 = parse_num(key, value)?,
            "train.beta2" => self.train.beta2 = parse_num(key, value)?,
            "train.epsilon" => self.train.epsilon = parse_num(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_num(key, value)?,
            "train.max_epochs" => self.train.max_epochs = parse_num(key, value)?,
            "train.patience" => self.train.patience = parse_num(key, value)?,
            "train.seed" => self.train.seed = parse_num(key, value)?,
            "report.csv" => self.report.csv = Some(path()),
            "report.text" => self.report.text = Some(path()),
            "report.checkpoint" => self.report.checkpoint = Some(path()),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                split_pair(line).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
            cfg.set(k, v, base)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// Reads a config file, then applies `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::parse_str(&text, p.parent())?
            }
            None => ExperimentConfig::default(),
        };
        for o in overrides {
            let (k, v) = split_pair(o)?;
            cfg.set(k, v, None)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for m in self.fusion.modalities() {
            if self.features.get(m).is_none() {
                return Err(Error::Config(format!(
                    "features.{m} is required by this run"
                )));
            }
        }
        match (self.task, self.model) {
            (Task::Severity, ModelKind::LogReg) => {
                return Err(Error::Config(
                    "logistic regression is binary only; use task = identify".into(),
                ))
            }
            (_, ModelKind::Knn { k: 0 }) => return Err(Error::Config("knn.k must be >= 1".into())),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "split.validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if let Some(h) = &self.hidden {
            if h.contains(&0) {
                return Err(Error::Config("dnn.hidden sizes must be positive".into()));
            }
        }
        self.split
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.input_dropout) {
            return Err(Error::Config(format!(
                "dnn.dropout must lie in [0, 1), got {}",
                self.input_dropout
            )));
        }
        Ok(())
    }

    /// Network shape for this task on features of `input_dim`.
    pub fn mlp_config(&self, input_dim: usize, n_classes: usize) -> MlpConfig {
        let mut cfg = match self.task {
            Task::Identify => MlpConfig::identify(input_dim),
            Task::Severity => MlpConfig::severity(input_dim, n_classes),
        };
        if let Some(h) = &self.hidden {
            cfg.hidden_sizes = h.clone();
        }
        cfg.input_dropout_rate = self.input_dropout;
        cfg
    }
}
