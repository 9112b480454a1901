//! Confusion matrix, accuracy, precision/recall/F1 and Cohen's kappa.

use crate::error::{Error, Result};

/// `counts[t * k + p]` = samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::domain(
                "confusion matrix must be square and non-empty",
            ));
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.concat(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.k).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, predicted)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k).map(<[u64]>::to_vec).collect()
    }

    fn require_nonempty(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::domain("confusion matrix has no samples")),
            n => Ok(n as f64),
        }
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::domain(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    let mut counts = vec![0u64; k * k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::domain(format!(
                "class pair ({t}, {p}) out of range for k = {k}"
            )));
        }
        counts[t * k + p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.require_nonempty()?;
    Ok(cm.trace() as f64 / n)
}

/// Cohen's kappa: `(observed - expected) / (1 - expected)` where expected
/// agreement comes from the row and column marginals.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.require_nonempty()?;
    let observed = cm.trace() as f64 / n;
    let expected = (0..cm.k)
        .map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64)
        .sum::<f64>()
        / (n * n);
    if (1.0 - expected).abs() <= f64::EPSILON {
        return Err(Error::UndefinedKappa);
    }
    Ok((observed - expected) / (1.0 - expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    Macro,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class scores; an empty row or column scores 0 instead of NaN.
pub fn per_class(cm: &ConfusionMatrix) -> Vec<PrecisionRecallF1> {
    (0..cm.k)
        .map(|c| {
            let tp = cm.get(c, c);
            let precision = ratio(tp, cm.col_sum(c));
            let recall = ratio(tp, cm.row_sum(c));
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            PrecisionRecallF1 {
                precision,
                recall,
                f1,
            }
        })
        .collect()
}

pub fn classification_metrics(
    cm: &ConfusionMatrix,
    averaging: Averaging,
) -> Result<PrecisionRecallF1> {
    let n = cm.require_nonempty()?;
    let scores = per_class(cm);
    let weights: Vec<f64> = match averaging {
        Averaging::Macro => vec![1.0 / cm.k as f64; cm.k],
        Averaging::Weighted => (0..cm.k).map(|c| cm.row_sum(c) as f64 / n).collect(),
    };
    let avg =
        |f: fn(&PrecisionRecallF1) -> f64| scores.iter().zip(&weights).map(|(s, w)| f(s) * w).sum();
    Ok(PrecisionRecallF1 {
        precision: avg(|s| s.precision),
        recall: avg(|s| s.recall),
        f1: avg(|s| s.f1),
    })
}

/// One results-table row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Weighted-average scores; these fill the precision/recall/F1 columns.
    pub weighted: PrecisionRecallF1,
    pub macro_avg: PrecisionRecallF1,
    pub kappa: f64,
    pub confusion: ConfusionMatrix,
    pub epochs_run: usize,
    pub final_loss: f64,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix, epochs_run: usize, final_loss: f64) -> Result<Self> {
        Ok(EvalReport {
            accuracy: accuracy(&cm)?,
            weighted: classification_metrics(&cm, Averaging::Weighted)?,
            macro_avg: classification_metrics(&cm, Averaging::Macro)?,
            kappa: kappa(&cm)?,
            confusion: cm,
            epochs_run,
            final_loss,
        })
    }

    pub fn precision(&self) -> f64 {
        self.weighted.precision
    }

    pub fn recall(&self) -> f64 {
        self.weighted.recall
    }

    pub fn f1(&self) -> f64 {
        self.weighted.f1
    }
}
