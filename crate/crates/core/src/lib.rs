//! Blended multi-modal deep-feature pipeline for diabetic-retinopathy recognition.
//!
//! The crate consumes per-image activation vectors exported from pretrained
//! ConvNets, fuses them with 1-D and cross pooling, trains a multilayer
//! perceptron with dropout on its input layer, and scores the result with
//! accuracy, precision, recall, F1 and Cohen's kappa.
//!
//! Modules:
//!
//! - [`feature_store`]: labeled feature sets, the FVEC container, splitting and label binarization.
//! - [`fusion`]: 1-D pooling, cross pooling and the three-stage blend.
//! - [`dnn`]: the from-scratch MLP with backpropagation and Adam.
//! - [`metrics`]: confusion matrix and the reported scores.
//! - [`baselines`]: logistic regression, k-nearest neighbours and Gaussian naive Bayes.
//! - [`experiment`]: configuration, the end-to-end runner, reports and synthetic fixtures.

pub mod baselines;
pub mod dnn;
pub mod error;
pub mod experiment;
pub mod feature_store;
pub mod fusion;
pub mod metrics;

pub use error::{Error, Result};
pub use feature_store::{FeatureVector, LabeledFeatureSet, SplitSpec};
pub use fusion::{BlendConfig, PoolMode};
