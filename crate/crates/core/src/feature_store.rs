//! Labeled feature sets and the FVEC container.
//!
//! FVEC layout (all integers little-endian):
//!
//! ```text
//! b"FVB1" | n_rows: u32 | dim: u32 | n_classes: u16 | labels: [u8; n_rows] | values: [f32; n_rows * dim]
//! ```
//!
//! Values are row-major IEEE-754 binary32. The extractor writes the same layout.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const FVEC_MAGIC: &[u8; 4] = b"FVB1";
const HEADER_LEN: usize = 4 + 4 + 4 + 2;

/// Dense activation vector for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f32>,
}

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("feature vector must have dim >= 1"));
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        Ok(FeatureVector { values })
    }

    /// Narrows 64-bit values to storage precision.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.values
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f32;

    fn index(&self, i: usize) -> &f32 {
        &self.values[i]
    }
}

/// Rows of equal-dimension features with one class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatureSet {
    rows: Vec<FeatureVector>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledFeatureSet {
    pub fn new(rows: Vec<FeatureVector>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("feature set must contain at least one row"));
        }
        if rows.len() != labels.len() {
            return Err(Error::domain(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if n_classes == 0 {
            return Err(Error::domain("n_classes must be positive"));
        }
        let dim = rows[0].dim();
        if let Some(i) = rows.iter().position(|r| r.dim() != dim) {
            return Err(Error::domain(format!(
                "row {i} has dim {}, expected {dim}",
                rows[i].dim()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l >= n_classes) {
            return Err(Error::domain(format!(
                "label {} at row {i} is out of range for {n_classes} classes",
                labels[i]
            )));
        }
        Ok(LabeledFeatureSet {
            rows,
            labels,
            n_classes,
        })
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Subset in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::domain(format!(
                "row index {bad} out of range for {} rows",
                self.len()
            )));
        }
        Self::new(
            indices.iter().map(|&i| self.rows[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.n_classes,
        )
    }

    /// Serializes to the FVEC byte layout.
    pub fn to_fvec_bytes(&self) -> Result<Vec<u8>> {
        let n_rows =
            u32::try_from(self.len()).map_err(|_| Error::domain("too many rows for FVEC"))?;
        let dim = u32::try_from(self.dim()).map_err(|_| Error::domain("dim too large for FVEC"))?;
        let n_classes = u16::try_from(self.n_classes)
            .map_err(|_| Error::domain("n_classes too large for FVEC"))?;
        if self.labels.iter().any(|&l| l > u8::MAX as usize) {
            return Err(Error::domain("FVEC labels must fit in u8"));
        }

        let mut buf = Vec::with_capacity(HEADER_LEN + self.len() * (1 + 4 * self.dim()));
        buf.extend_from_slice(FVEC_MAGIC);
        buf.extend_from_slice(&n_rows.to_le_bytes());
        buf.extend_from_slice(&dim.to_le_bytes());
        buf.extend_from_slice(&n_classes.to_le_bytes());
        buf.extend(self.labels.iter().map(|&l| l as u8));
        for row in &self.rows {
            for v in row.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(buf)
    }

    /// Parses the FVEC byte layout. `origin` only labels the magic error.
    pub fn from_fvec_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != FVEC_MAGIC {
            return Err(Error::NotFvec(origin.to_path_buf()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::CorruptFvec(format!(
                "header truncated at {} bytes",
                bytes.len()
            )));
        }
        let n_rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n_classes = u16::from_le_bytes(bytes[12..14].try_into().unwrap()) as usize;
        if n_rows == 0 || dim == 0 || n_classes == 0 {
            return Err(Error::CorruptFvec(format!(
                "degenerate header: n_rows={n_rows}, dim={dim}, n_classes={n_classes}"
            )));
        }

        let expected = n_rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN + n_rows))
            .ok_or_else(|| Error::CorruptFvec("header sizes overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::CorruptFvec(format!(
                "expected {expected} bytes for {n_rows}x{dim}, found {}",
                bytes.len()
            )));
        }

        let label_bytes = &bytes[HEADER_LEN..HEADER_LEN + n_rows];
        let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
        if let Some(i) = labels.iter().position(|&l| l >= n_classes) {
            return Err(Error::CorruptFvec(format!(
                "label {} at row {i} exceeds n_classes {n_classes}",
                labels[i]
            )));
        }

        let payload = &bytes[HEADER_LEN + n_rows..];
        let mut rows = Vec::with_capacity(n_rows);
        for (r, chunk) in payload.chunks_exact(dim * 4).enumerate() {
            let mut values = Vec::with_capacity(dim);
            for (c, b) in chunk.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(b.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
                values.push(v);
            }
            rows.push(FeatureVector { values });
        }
        Self::new(rows, labels, n_classes)
    }
}

pub fn write_fvec(set: &LabeledFeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = set.to_fvec_bytes()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_fvec(path: impl AsRef<Path>) -> Result<LabeledFeatureSet> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    LabeledFeatureSet::from_fvec_bytes(&bytes, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            stratified: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Split(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

// floor(fraction * n), tolerant of products like 0.7 * 10 landing just below an integer.
fn train_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Partitions `0..labels.len()` deterministically in `spec.seed`.
///
/// Unstratified: one shuffle, the first `floor(fraction * N)` go to train.
/// Stratified: the same rule applied within each class.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();

    if spec.stratified {
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        for class in 0..n_classes {
            let mut members: Vec<usize> =
                (0..labels.len()).filter(|&i| labels[i] == class).collect();
            members.shuffle(&mut rng);
            let k = train_count(spec.train_fraction, members.len());
            train.extend_from_slice(&members[..k]);
            test.extend_from_slice(&members[k..]);
        }
    } else {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng);
        let k = train_count(spec.train_fraction, order.len());
        train.extend_from_slice(&order[..k]);
        test.extend_from_slice(&order[k..]);
    }

    if train.is_empty() || test.is_empty() {
        return Err(Error::Split(format!(
            "{} rows at fraction {} leave {} train / {} test rows",
            labels.len(),
            spec.train_fraction,
            train.len(),
            test.len()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split(
    set: &LabeledFeatureSet,
    spec: &SplitSpec,
) -> Result<(LabeledFeatureSet, LabeledFeatureSet)> {
    let idx = split_indices(set.labels(), spec)?;
    Ok((set.select(&idx.train)?, set.select(&idx.test)?))
}

/// Collapses severity grades to DR identification: grade 0 stays negative, grades 1-4 become positive.
pub fn binarize_labels(set: &LabeledFeatureSet) -> Result<LabeledFeatureSet> {
    if set.n_classes() != 5 {
        return Err(Error::domain(format!(
            "binarization expects 5 severity classes, got {}",
            set.n_classes()
        )));
    }
    let labels = set
        .labels()
        .iter()
        .map(|&l| match l {
            0 => Ok(0),
            1..=4 => Ok(1),
            other => Err(Error::domain(format!(
                "severity grade {other} outside 0..=4"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledFeatureSet::new(set.rows().to_vec(), labels, 2)
}
