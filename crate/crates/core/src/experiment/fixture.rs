//! Synthetic, label-aligned three-modality feature sets.
//!
//! Class `c` puts its mean on the pair `(2c, 2c+1)` of both fc vectors and on
//! coordinate `c` of the third vector, so 1-D pooling keeps classes apart. The
//! offsets are scaled so that any two class means sit `separation` apart in
//! every modality. Noise is isotropic standard normal.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::feature_store::{write_fvec, FeatureVector, LabeledFeatureSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub n_per_class: usize,
    pub n_classes: usize,
    /// (fc1, fc2, third) dimensions.
    pub dims: (usize, usize, usize),
    pub separation: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub fc1: LabeledFeatureSet,
    pub fc2: LabeledFeatureSet,
    pub third: LabeledFeatureSet,
}

pub const FIXTURE_FILES: [&str; 3] = ["fc1.fvec", "fc2.fvec", "third.fvec"];

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let (d1, d2, d3) = self.dims;
        if self.n_per_class == 0 || self.n_classes == 0 || self.n_classes > 256 {
            return Err(Error::domain(
                "need 1..=256 classes with at least one row each",
            ));
        }
        if d1 != d2 || d3 == 0 || d1 / 2 != d3 {
            return Err(Error::domain(format!(
                "fixture dims ({d1}, {d2}, {d3}) are not blend-compatible; need d_fc1 = d_fc2 and d_third = d_fc1 / 2"
            )));
        }
        if d3 < self.n_classes {
            return Err(Error::domain(format!(
                "third dim {d3} cannot host {} separate class means",
                self.n_classes
            )));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::domain("separation must be finite and non-negative"));
        }
        Ok(())
    }
}

fn modality(
    rng: &mut ChaCha8Rng,
    labels: &[usize],
    n_classes: usize,
    dim: usize,
    mean_of: impl Fn(usize, &mut [f64]),
) -> Result<LabeledFeatureSet> {
    let mut rows = Vec::with_capacity(labels.len());
    let mut buf = vec![0.0; dim];
    for &c in labels {
        buf.fill(0.0);
        mean_of(c, &mut buf);
        for v in buf.iter_mut() {
            let noise: f64 = StandardNormal.sample(rng);
            *v += noise;
        }
        rows.push(FeatureVector::from_f64(&buf)?);
    }
    LabeledFeatureSet::new(rows, labels.to_vec(), n_classes)
}

pub fn make_synthetic_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let (d_fc, _, d_third) = spec.dims;
    let labels: Vec<usize> = (0..spec.n_per_class * spec.n_classes)
        .map(|i| i % spec.n_classes)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // two active coordinates per class: |a*(e_2i + e_2i+1) - a*(e_2j + e_2j+1)| = 2a
    let fc_offset = spec.separation / 2.0;
    let third_offset = spec.separation / std::f64::consts::SQRT_2;
    let fc_mean = |c: usize, buf: &mut [f64]| {
        buf[2 * c] = fc_offset;
        buf[2 * c + 1] = fc_offset;
    };

    let fc1 = modality(&mut rng, &labels, spec.n_classes, d_fc, fc_mean)?;
    let fc2 = modality(&mut rng, &labels, spec.n_classes, d_fc, fc_mean)?;
    let third = modality(&mut rng, &labels, spec.n_classes, d_third, |c, buf| {
        buf[c] = third_offset;
    })?;
    Ok(Fixture { fc1, fc2, third })
}

/// Writes `fc1.fvec`, `fc2.fvec` and `third.fvec` into `dir`.
pub fn write_fixture(spec: &FixtureSpec, dir: impl AsRef<Path>) -> Result<[PathBuf; 3]> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fx = make_synthetic_fixture(spec)?;
    let paths = FIXTURE_FILES.map(|f| dir.join(f));
    write_fvec(&fx.fc1, &paths[0])?;
    write_fvec(&fx.fc2, &paths[1])?;
    write_fvec(&fx.third, &paths[2])?;
    Ok(paths)
}
