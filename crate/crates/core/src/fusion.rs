//! Pooling-based fusion of deep features.
//!
//! 1-D pooling halves one vector by combining non-overlapping adjacent pairs
//! `(u[2i], u[2i+1])`; an odd trailing element is dropped. Cross pooling
//! combines two equal-length vectors element by element. [`blend`] chains
//! them: 1-D pool the two VGG16 fully-connected activations, cross pool the
//! results together, then cross pool with a third (global) modality whose
//! dimension matches the halved vectors.
//!
//! Arithmetic runs in `f64`; results are narrowed to `f32` once, at the end.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature_store::{FeatureVector, LabeledFeatureSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolMode {
    Max,
    Min,
    Avg,
    Sum,
}

impl PoolMode {
    pub const ALL: [PoolMode; 4] = [PoolMode::Max, PoolMode::Min, PoolMode::Avg, PoolMode::Sum];

    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            PoolMode::Max => a.max(b),
            PoolMode::Min => a.min(b),
            PoolMode::Avg => (a + b) / 2.0,
            PoolMode::Sum => a + b,
        }
    }
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMode::Max => "max",
            PoolMode::Min => "min",
            PoolMode::Avg => "avg",
            PoolMode::Sum => "sum",
        })
    }
}

impl FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(PoolMode::Max),
            "min" => Ok(PoolMode::Min),
            "avg" | "mean" | "average" => Ok(PoolMode::Avg),
            "sum" => Ok(PoolMode::Sum),
            other => Err(Error::Config(format!("unknown pool mode '{other}'"))),
        }
    }
}

/// Pool modes for the three fusion stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlendConfig {
    /// 1-D pooling applied to each of fc1 and fc2.
    pub stage1: PoolMode,
    /// Cross pooling of the two pooled fc vectors.
    pub stage2: PoolMode,
    /// Cross pooling with the third modality.
    pub stage3: PoolMode,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig {
            stage1: PoolMode::Max,
            stage2: PoolMode::Avg,
            stage3: PoolMode::Avg,
        }
    }
}

impl fmt::Display for BlendConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.stage1, self.stage2, self.stage3)
    }
}

fn pool1d_raw(u: &[f64], mode: PoolMode) -> Vec<f64> {
    u.chunks_exact(2)
        .map(|p| mode.combine(p[0], p[1]))
        .collect()
}

fn cross_pool_raw(x: &[f64], y: &[f64], mode: PoolMode) -> Vec<f64> {
    x.iter().zip(y).map(|(&a, &b)| mode.combine(a, b)).collect()
}

pub fn pool1d(u: &FeatureVector, mode: PoolMode) -> Result<FeatureVector> {
    if u.dim() < 2 {
        return Err(Error::domain(format!(
            "1-D pooling needs dim >= 2, got {}",
            u.dim()
        )));
    }
    FeatureVector::from_f64(&pool1d_raw(&u.to_f64(), mode))
}

pub fn cross_pool(x: &FeatureVector, y: &FeatureVector, mode: PoolMode) -> Result<FeatureVector> {
    check_same_dim(x.dim(), y.dim())?;
    FeatureVector::from_f64(&cross_pool_raw(&x.to_f64(), &y.to_f64(), mode))
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::domain(format!(
            "cross pooling needs equal dims, got {a} and {b}"
        )));
    }
    Ok(())
}

fn check_blend_dims(fc1: usize, fc2: usize, third: Option<usize>) -> Result<()> {
    if fc1 != fc2 {
        return Err(Error::domain(format!(
            "fc1 dim {fc1} differs from fc2 dim {fc2}"
        )));
    }
    if fc1 < 2 {
        return Err(Error::domain(format!("fc dims must be >= 2, got {fc1}")));
    }
    if let Some(w) = third {
        if fc1 / 2 != w {
            return Err(Error::domain(format!(
                "third modality dim {w} must equal half the fc dim ({fc1} / 2 = {})",
                fc1 / 2
            )));
        }
    }
    Ok(())
}

fn stages_1_2(v: &[f64], u: &[f64], cfg: &BlendConfig) -> Vec<f64> {
    cross_pool_raw(
        &pool1d_raw(v, cfg.stage1),
        &pool1d_raw(u, cfg.stage1),
        cfg.stage2,
    )
}

/// Three-modality blend; output dim equals `w_third.dim()`.
pub fn blend(
    v_fc1: &FeatureVector,
    u_fc2: &FeatureVector,
    w_third: &FeatureVector,
    cfg: &BlendConfig,
) -> Result<FeatureVector> {
    check_blend_dims(v_fc1.dim(), u_fc2.dim(), Some(w_third.dim()))?;
    let uv = stages_1_2(&v_fc1.to_f64(), &u_fc2.to_f64(), cfg);
    FeatureVector::from_f64(&cross_pool_raw(&uv, &w_third.to_f64(), cfg.stage3))
}

/// Two-modality blend (stages 1 and 2 only); `cfg.stage3` is ignored.
pub fn blend_pair(
    v_fc1: &FeatureVector,
    u_fc2: &FeatureVector,
    cfg: &BlendConfig,
) -> Result<FeatureVector> {
    check_blend_dims(v_fc1.dim(), u_fc2.dim(), None)?;
    FeatureVector::from_f64(&stages_1_2(&v_fc1.to_f64(), &u_fc2.to_f64(), cfg))
}

/// Fails unless every set carries the same label sequence.
pub fn check_aligned(sets: &[&LabeledFeatureSet]) -> Result<()> {
    let Some(first) = sets.first() else {
        return Ok(());
    };
    for (k, other) in sets.iter().enumerate().skip(1) {
        if other.len() != first.len() {
            return Err(Error::Alignment(format!(
                "modality {k} has {} rows, modality 0 has {}",
                other.len(),
                first.len()
            )));
        }
        if other.n_classes() != first.n_classes() {
            return Err(Error::Alignment(format!(
                "modality {k} declares {} classes, modality 0 declares {}",
                other.n_classes(),
                first.n_classes()
            )));
        }
        if let Some(row) = first
            .labels()
            .iter()
            .zip(other.labels())
            .position(|(a, b)| a != b)
        {
            return Err(Error::Alignment(format!(
                "label mismatch at row {row} between modality 0 and modality {k}; \
                 features were not extracted in the same image order"
            )));
        }
    }
    Ok(())
}

/// Row-wise [`blend`] over three aligned sets.
pub fn blend_dataset(
    fc1: &LabeledFeatureSet,
    fc2: &LabeledFeatureSet,
    third: &LabeledFeatureSet,
    cfg: &BlendConfig,
) -> Result<LabeledFeatureSet> {
    check_aligned(&[fc1, fc2, third])?;
    check_blend_dims(fc1.dim(), fc2.dim(), Some(third.dim()))?;
    let rows = (0..fc1.len())
        .into_par_iter()
        .map(|i| blend(&fc1.rows()[i], &fc2.rows()[i], &third.rows()[i], cfg))
        .collect::<Result<Vec<_>>>()?;
    LabeledFeatureSet::new(rows, fc1.labels().to_vec(), fc1.n_classes())
}

/// Row-wise [`blend_pair`] over two aligned sets.
pub fn blend_pair_dataset(
    fc1: &LabeledFeatureSet,
    fc2: &LabeledFeatureSet,
    cfg: &BlendConfig,
) -> Result<LabeledFeatureSet> {
    check_aligned(&[fc1, fc2])?;
    check_blend_dims(fc1.dim(), fc2.dim(), None)?;
    let rows = (0..fc1.len())
        .into_par_iter()
        .map(|i| blend_pair(&fc1.rows()[i], &fc2.rows()[i], cfg))
        .collect::<Result<Vec<_>>>()?;
    LabeledFeatureSet::new(rows, fc1.labels().to_vec(), fc1.n_classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f32]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pool1d_examples() {
        assert_eq!(
            pool1d(&fv(&[4., 1., 3., 7.]), PoolMode::Max).unwrap(),
            fv(&[4., 7.])
        );
        assert_eq!(
            pool1d(&fv(&[2., 4., 6., 8.]), PoolMode::Sum).unwrap(),
            fv(&[6., 14.])
        );
        assert_eq!(
            pool1d(&fv(&[1., 2., 3.]), PoolMode::Max).unwrap(),
            fv(&[2.])
        );
        assert_eq!(
            pool1d(&fv(&[0.3; 6]), PoolMode::Avg).unwrap(),
            fv(&[0.3; 3])
        );
        assert_eq!(
            pool1d(&fv(&[2., 4., 6., 8.]), PoolMode::Min).unwrap(),
            fv(&[2., 6.])
        );
    }

    #[test]
    fn pool1d_rejects_short_input() {
        assert!(matches!(
            pool1d(&fv(&[1.]), PoolMode::Max),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn cross_pool_examples() {
        let x = fv(&[1., 5., 2.]);
        assert_eq!(
            cross_pool(&x, &fv(&[3., 4., 0.]), PoolMode::Max).unwrap(),
            fv(&[3., 5., 2.])
        );
        assert_eq!(cross_pool(&x, &x, PoolMode::Avg).unwrap(), x);
        assert_eq!(
            cross_pool(&fv(&[2., 4.]), &fv(&[4., 8.]), PoolMode::Sum).unwrap(),
            fv(&[6., 12.])
        );
    }

    #[test]
    fn cross_pool_dim_mismatch_names_both() {
        let err = cross_pool(&fv(&[1., 2.]), &fv(&[1., 2., 3.]), PoolMode::Max).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'), "{msg}");
    }

    #[test]
    fn blend_worked_example() {
        let v = fv(&[1., 3., 5., 7., 2., 4., 6., 8.]);
        let u = fv(&[8., 6., 4., 2., 7., 5., 3., 1.]);
        let w = fv(&[0., 2., 4., 6.]);
        let out = blend(&v, &u, &w, &BlendConfig::default()).unwrap();
        assert_eq!(out, fv(&[2.75, 3.75, 4.75, 5.75]));
    }

    #[test]
    fn blend_constant_inputs() {
        let c = 1.7f32;
        let out = blend(
            &fv(&[c; 8]),
            &fv(&[c; 8]),
            &fv(&[c; 4]),
            &BlendConfig::default(),
        )
        .unwrap();
        assert_eq!(out, fv(&[c; 4]));
    }

    #[test]
    fn blend_dimension_checks() {
        let cfg = BlendConfig::default();
        let v = fv(&[0.; 8]);
        assert!(blend(&v, &fv(&[0.; 6]), &fv(&[0.; 4]), &cfg).is_err());
        assert!(blend(&v, &v, &fv(&[0.; 3]), &cfg).is_err());
        assert_eq!(blend_pair(&v, &v, &cfg).unwrap().dim(), 4);
    }

    #[test]
    fn blend_dataset_rows_and_alignment() {
        let v = fv(&[1., 3., 5., 7., 2., 4., 6., 8.]);
        let u = fv(&[8., 6., 4., 2., 7., 5., 3., 1.]);
        let w = fv(&[0., 2., 4., 6.]);
        let s1 = LabeledFeatureSet::new(vec![v], vec![1], 2).unwrap();
        let s2 = LabeledFeatureSet::new(vec![u], vec![1], 2).unwrap();
        let s3 = LabeledFeatureSet::new(vec![w.clone()], vec![1], 2).unwrap();
        let out = blend_dataset(&s1, &s2, &s3, &BlendConfig::default()).unwrap();
        assert_eq!(out.rows(), &[fv(&[2.75, 3.75, 4.75, 5.75])]);
        assert_eq!(out.labels(), &[1]);

        let bad = LabeledFeatureSet::new(vec![w], vec![0], 2).unwrap();
        assert!(matches!(
            blend_dataset(&s1, &s2, &bad, &BlendConfig::default()),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn mode_parsing() {
        for m in PoolMode::ALL {
            assert_eq!(m.to_string().parse::<PoolMode>().unwrap(), m);
        }
        assert!("median".parse::<PoolMode>().is_err());
    }
}
