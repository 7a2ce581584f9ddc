//! Accuracy and confusion matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Per true class instance counts.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Unweighted mean of per-class F1. Classes with no true and no
    /// predicted instances are skipped.
    pub fn macro_f1(&self) -> f64 {
        let n = self.n_classes();
        let mut sum = 0.0;
        let mut used = 0;
        for c in 0..n {
            let tp = self.counts[c][c] as f64;
            let actual: u64 = self.counts[c].iter().sum();
            let predicted: u64 = (0..n).map(|t| self.counts[t][c]).sum();
            if actual == 0 && predicted == 0 {
                continue;
            }
            used += 1;
            let denom = (actual + predicted) as f64;
            sum += 2.0 * tp / denom;
        }
        if used == 0 {
            0.0
        } else {
            sum / used as f64
        }
    }
}

pub fn confusion(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    check_lengths(pred, truth)?;
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if let Some(&label) = [p, t].iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}
