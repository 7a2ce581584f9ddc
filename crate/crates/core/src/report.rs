//! Evaluation reports (JSON and text).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::TerminationCriterion;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, confusion, ConfusionMatrix};
use crate::model::{FitStats, GcModel};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    /// What was evaluated: "estimating", "test", "training", or a file name.
    pub split: String,
    pub n_instances: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub classes: Vec<String>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: ConfusionMatrix,
    pub n_levels: usize,
    pub termination_criterion: TerminationCriterion,
    /// Per grown level, from training.
    pub level_accuracies: Vec<f64>,
    /// Wall clock per grown level; empty when the model was loaded from disk.
    pub level_seconds: Vec<f64>,
    pub grain_seconds: Vec<f64>,
}

impl EvalReport {
    pub fn new(
        split: impl Into<String>,
        pred: &[usize],
        truth: &[usize],
        model: &GcModel,
        stats: Option<&FitStats>,
    ) -> Result<Self> {
        let cm = confusion(pred, truth, model.n_classes())?;
        let term = model.cascade().termination();
        Ok(EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            split: split.into(),
            n_instances: pred.len(),
            accuracy: accuracy(pred, truth)?,
            macro_f1: cm.macro_f1(),
            classes: model.classes().to_vec(),
            confusion: cm,
            n_levels: model.n_levels(),
            termination_criterion: term.criterion,
            level_accuracies: term.accuracies.clone(),
            level_seconds: stats.map(|s| s.growth.level_seconds.clone()).unwrap_or_default(),
            grain_seconds: stats.map(|s| s.grain_seconds.clone()).unwrap_or_default(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "split:     {} ({} instances)", self.split, self.n_instances)?;
        writeln!(f, "accuracy:  {:.4}", self.accuracy)?;
        writeln!(f, "macro F1:  {:.4}", self.macro_f1)?;
        writeln!(f, "levels:    {}", self.n_levels)?;
        for (l, acc) in self.level_accuracies.iter().enumerate() {
            write!(f, "  level {:>2}  {:?} accuracy {acc:.4}", l + 1, self.termination_criterion)?;
            if let Some(s) = self.level_seconds.get(l) {
                write!(f, "  {s:.1}s")?;
            }
            writeln!(f)?;
        }
        let width = self.classes.iter().map(String::len).max().unwrap_or(1).max(5);
        writeln!(f, "confusion (rows = true, columns = predicted):")?;
        write!(f, "{:>width$}", "")?;
        for c in &self.classes {
            write!(f, " {c:>width$}")?;
        }
        writeln!(f)?;
        for (c, row) in self.classes.iter().zip(&self.confusion.counts) {
            write!(f, "{c:>width$}")?;
            for n in row {
                write!(f, " {n:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
