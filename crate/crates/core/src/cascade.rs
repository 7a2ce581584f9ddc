//! The self-terminating cascade.
//!
//! Each level is a list of forests. A level's input is its base features
//! followed by the previous level's augmentation (per-forest class vectors
//! concatenated in config order). Training instances get out-of-fold
//! augmentation; prediction threads each level's stored forests through the
//! same layout.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split_indices, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::forest::{argmax, cv_class_vectors, ClassVector, CvMode, Forest, ForestConfig, DEFAULT_K_FOLDS, DEFAULT_TREES};
use crate::metrics::accuracy;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub forests: Vec<ForestConfig>,
    pub k_folds: usize,
    pub cv_mode: CvMode,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self::new(4, 4, DEFAULT_TREES)
    }
}

impl LevelConfig {
    /// `n_random` completely-random forests followed by `n_gini` random
    /// forests, `n_trees` each, no depth cap.
    pub fn new(n_random: usize, n_gini: usize, n_trees: usize) -> Self {
        let mut forests = vec![ForestConfig::completely_random(n_trees); n_random];
        forests.extend(std::iter::repeat(ForestConfig::random_forest(n_trees)).take(n_gini));
        LevelConfig {
            forests,
            k_folds: DEFAULT_K_FOLDS,
            cv_mode: CvMode::OutOfFold,
        }
    }

    pub fn with_k_folds(mut self, k: usize) -> Self {
        self.k_folds = k;
        self
    }

    pub fn with_cv_mode(mut self, mode: CvMode) -> Self {
        self.cv_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.forests.is_empty() {
            return Err(Error::Config("a cascade level needs at least one forest".into()));
        }
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        if self.forests.iter().any(|f| f.n_trees == 0) {
            return Err(Error::Config("forests need at least one tree".into()));
        }
        Ok(())
    }
}

/// One trained cascade level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub(crate) forests: Vec<Forest>,
    pub(crate) input_dim: usize,
    pub(crate) n_classes: usize,
}

impl Level {
    pub(crate) fn from_forests(forests: Vec<Forest>, input_dim: usize, n_classes: usize) -> Result<Self> {
        if forests.is_empty() {
            return Err(Error::Corrupt("level without forests".into()));
        }
        if forests
            .iter()
            .any(|f| f.n_features() != input_dim || f.n_classes() != n_classes)
        {
            return Err(Error::Corrupt("level forests disagree on input or class count".into()));
        }
        Ok(Level {
            forests,
            input_dim,
            n_classes,
        })
    }

    pub fn forests(&self) -> &[Forest] {
        &self.forests
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// `|forests| × n_classes`.
    pub fn augmentation_width(&self) -> usize {
        self.forests.len() * self.n_classes
    }

    fn augment_into(&self, input: &[f64], out: &mut [f64]) {
        for (f, seg) in self.forests.iter().zip(out.chunks_exact_mut(self.n_classes)) {
            f.class_vector_into(input, seg);
        }
    }

    /// Augmentation rows for a whole input matrix.
    pub fn augment(&self, input: &Matrix) -> Result<Matrix> {
        if input.n_cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: input.n_cols(),
            });
        }
        let width = self.augmentation_width();
        let mut out = Matrix::zeros(input.n_rows(), width);
        out.as_mut_slice()
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, o)| self.augment_into(input.row(i), o));
        Ok(out)
    }
}

/// Mean of the `n_classes`-wide segments of an augmentation row.
pub fn aggregate(augmentation: &[f64], n_classes: usize) -> Vec<f64> {
    let n_forests = augmentation.len() / n_classes;
    let mut mean = vec![0.0; n_classes];
    for seg in augmentation.chunks_exact(n_classes) {
        mean.iter_mut().zip(seg).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n_forests as f64);
    mean
}

fn aggregate_labels(aug: &Matrix, n_classes: usize) -> Vec<usize> {
    aug.rows().map(|r| argmax(&aggregate(r, n_classes))).collect()
}

/// Train one level on `base ++ prev` and return it with the out-of-fold
/// augmentation of every training row. Forest `j` is seeded from
/// `derive_seed(seed, FOREST + j)`.
pub fn train_level(
    base: &Matrix,
    prev: Option<&Matrix>,
    labels: &[usize],
    classes: &[String],
    cfg: &LevelConfig,
    seed: u64,
) -> Result<(Level, Matrix)> {
    cfg.validate()?;
    let input = match prev {
        Some(p) => Matrix::hconcat(&[base, p])?,
        None => base.clone(),
    };
    let input_dim = input.n_cols();
    let ds = Dataset::with_classes(input, labels.to_vec(), classes.to_vec())?;
    let rows: Vec<usize> = (0..ds.n_instances()).collect();
    let mut forests = Vec::with_capacity(cfg.forests.len());
    let mut parts = Vec::with_capacity(cfg.forests.len());
    for (j, fc) in cfg.forests.iter().enumerate() {
        let fc = fc.clone().with_seed(derive_seed(seed, stream::FOREST + j as u64));
        let cv = cv_class_vectors(&ds, &rows, &fc, cfg.k_folds, cfg.cv_mode)?;
        forests.push(cv.forest);
        parts.push(cv.vectors);
    }
    let aug = Matrix::hconcat(&parts.iter().collect::<Vec<_>>())?;
    Ok((Level::from_forests(forests, input_dim, classes.len())?, aug))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationCriterion {
    /// Accuracy on a held-out estimating split.
    #[default]
    Estimating,
    /// Accuracy of the aggregated out-of-fold augmentation on the training
    /// rows themselves; no split, no retraining.
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationConfig {
    pub criterion: TerminationCriterion,
    /// Gain over the best accuracy so far must exceed this to count.
    pub tolerance: f64,
    /// Consecutive non-improving levels before growth stops.
    pub patience: usize,
    pub max_levels: usize,
    pub growing_fraction: f64,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        TerminationConfig {
            criterion: TerminationCriterion::Estimating,
            tolerance: 1e-6,
            patience: 1,
            max_levels: 20,
            growing_fraction: 0.8,
        }
    }
}

impl TerminationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !self.tolerance.is_finite() {
            return Err(Error::Config("tolerance must be finite".into()));
        }
        if !(self.growing_fraction > 0.0 && self.growing_fraction < 1.0) {
            return Err(Error::Config(format!(
                "growing_fraction {} not in (0, 1)",
                self.growing_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationRecord {
    pub criterion: TerminationCriterion,
    /// Accuracy after each grown level.
    pub accuracies: Vec<f64>,
    /// Accuracy of each grown level's aggregated out-of-fold class vectors
    /// on the rows it was trained on (the growing set, or all rows for the
    /// training criterion).
    pub training_accuracies: Vec<f64>,
    pub grown_levels: usize,
    pub chosen_levels: usize,
}

/// Tracks the best level and decides when to stop.
#[derive(Debug, Clone)]
struct Stopper {
    tolerance: f64,
    patience: usize,
    max_levels: usize,
    best: Option<(usize, f64)>,
    stall: usize,
    seen: usize,
}

impl Stopper {
    fn new(cfg: &TerminationConfig) -> Self {
        Stopper {
            tolerance: cfg.tolerance,
            patience: cfg.patience,
            max_levels: cfg.max_levels,
            best: None,
            stall: 0,
            seen: 0,
        }
    }

    /// Record a level's accuracy; returns (improved, keep growing).
    fn observe(&mut self, acc: f64) -> (bool, bool) {
        let level = self.seen;
        self.seen += 1;
        let improved = match self.best {
            None => true,
            Some((_, b)) => acc > b + self.tolerance,
        };
        if improved {
            self.best = Some((level, acc));
            self.stall = 0;
        } else {
            self.stall += 1;
        }
        (improved, self.stall < self.patience && self.seen < self.max_levels)
    }

    fn chosen(&self) -> usize {
        self.best.map_or(0, |(l, _)| l + 1)
    }
}

/// Which base matrix feeds each level: level `l` uses source `l % n_sources`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePlan {
    pub names: Vec<String>,
    pub dims: Vec<usize>,
}

impl FeaturePlan {
    pub fn new(names: Vec<String>, dims: Vec<usize>) -> Result<Self> {
        if names.is_empty() || names.len() != dims.len() {
            return Err(Error::InvalidArgument("feature plan needs one name per source".into()));
        }
        Ok(FeaturePlan { names, dims })
    }

    pub fn n_sources(&self) -> usize {
        self.names.len()
    }

    pub fn source_of(&self, level: usize) -> usize {
        level % self.n_sources()
    }

    /// Source names for the first `n_levels` levels.
    pub fn sequence(&self, n_levels: usize) -> Vec<&str> {
        (0..n_levels).map(|l| self.names[self.source_of(l)].as_str()).collect()
    }

    /// Input width of level `l` for a cascade with `aug_width` augmentation.
    pub fn input_dim(&self, level: usize, aug_width: usize) -> usize {
        self.dims[self.source_of(level)] + if level == 0 { 0 } else { aug_width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CascadeConfig {
    pub level: LevelConfig,
    pub termination: TerminationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub(crate) levels: Vec<Level>,
    pub(crate) termination: TerminationRecord,
    pub(crate) plan: FeaturePlan,
    pub(crate) n_classes: usize,
}

/// Wall clock and holdout predictions gathered while growing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowthStats {
    /// Seconds per grown level (growth phase).
    pub level_seconds: Vec<f64>,
    /// Seconds per level of the retrain on merged data.
    pub retrain_seconds: Vec<f64>,
    /// Estimating-set truth and predictions at the chosen level (empty for
    /// the training criterion).
    pub holdout_truth: Vec<usize>,
    pub holdout_pred: Vec<usize>,
}

impl CascadeModel {
    pub(crate) fn from_parts(
        levels: Vec<Level>,
        termination: TerminationRecord,
        plan: FeaturePlan,
        n_classes: usize,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Corrupt("cascade without levels".into()));
        }
        let aug = levels[0].augmentation_width();
        for (l, level) in levels.iter().enumerate() {
            if level.n_classes != n_classes
                || level.augmentation_width() != aug
                || level.input_dim != plan.input_dim(l, aug)
            {
                return Err(Error::Corrupt(format!("level {l} does not match the feature plan")));
            }
        }
        Ok(CascadeModel {
            levels,
            termination,
            plan,
            n_classes,
        })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn termination(&self) -> &TerminationRecord {
        &self.termination
    }

    pub fn plan(&self) -> &FeaturePlan {
        &self.plan
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn check_bases(&self, dims: impl Iterator<Item = usize>) -> Result<()> {
        let dims: Vec<usize> = dims.collect();
        if dims.len() != self.plan.n_sources() {
            return Err(Error::InvalidArgument(format!(
                "expected {} base feature sources, got {}",
                self.plan.n_sources(),
                dims.len()
            )));
        }
        for (&found, &expected) in dims.iter().zip(&self.plan.dims) {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        Ok(())
    }

    /// Last level's augmentation row for one instance.
    fn forward_row(&self, bases: &[&[f64]]) -> Vec<f64> {
        let mut prev: Vec<f64> = Vec::new();
        let mut input = Vec::new();
        for (l, level) in self.levels.iter().enumerate() {
            input.clear();
            input.extend_from_slice(bases[self.plan.source_of(l)]);
            input.extend_from_slice(&prev);
            let mut out = vec![0.0; level.augmentation_width()];
            level.augment_into(&input, &mut out);
            prev = out;
        }
        prev
    }

    /// The last level's per-forest class vectors for one instance.
    pub fn cascade_class_vectors(&self, bases: &[&[f64]]) -> Result<Vec<ClassVector>> {
        self.check_bases(bases.iter().map(|b| b.len()))?;
        Ok(self
            .forward_row(bases)
            .chunks_exact(self.n_classes)
            .map(|c| ClassVector::new(c.to_vec()))
            .collect())
    }

    /// Label and mean class vector for one instance.
    pub fn predict(&self, bases: &[&[f64]]) -> Result<(usize, ClassVector)> {
        self.check_bases(bases.iter().map(|b| b.len()))?;
        let mean = aggregate(&self.forward_row(bases), self.n_classes);
        Ok((argmax(&mean), ClassVector::new(mean)))
    }

    /// Row-wise [`predict`](Self::predict), parallel over rows.
    pub fn predict_matrix(&self, bases: &[Matrix]) -> Result<(Vec<usize>, Matrix)> {
        self.check_bases(bases.iter().map(|b| b.n_cols()))?;
        let n = bases[0].n_rows();
        if let Some(b) = bases.iter().find(|b| b.n_rows() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.n_rows(),
            });
        }
        let c = self.n_classes;
        let mut probs = Matrix::zeros(n, c);
        probs
            .as_mut_slice()
            .par_chunks_mut(c)
            .enumerate()
            .for_each(|(i, out)| {
                let rows: Vec<&[f64]> = bases.iter().map(|b| b.row(i)).collect();
                out.copy_from_slice(&aggregate(&self.forward_row(&rows), c));
            });
        let labels = probs.rows().map(argmax).collect();
        Ok((labels, probs))
    }
}

fn level_seed(seed: u64, level: usize) -> u64 {
    derive_seed(seed, stream::LEVEL + level as u64)
}

fn check_rows(bases: &[Matrix], labels: &[usize]) -> Result<()> {
    if bases.is_empty() {
        return Err(Error::InvalidArgument("no base feature sources".into()));
    }
    for b in bases {
        if b.n_rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: b.n_rows(),
            });
        }
    }
    Ok(())
}

/// Grow a cascade over `bases` (one matrix per feature-plan source, rows
/// aligned with `labels`), choose its depth, and return the final model.
///
/// With the estimating criterion the rows are split into growing and
/// estimating parts; levels are grown on the growing part until the
/// estimating accuracy stops improving, then a cascade with the chosen
/// number of levels is retrained on all rows. Level `l` is seeded with the
/// same derived seed in both phases.
pub fn grow_cascade(
    bases: &[Matrix],
    labels: &[usize],
    classes: &[String],
    plan: FeaturePlan,
    cfg: &CascadeConfig,
    seed: u64,
) -> Result<(CascadeModel, GrowthStats)> {
    cfg.level.validate()?;
    cfg.termination.validate()?;
    check_rows(bases, labels)?;
    if plan.n_sources() != bases.len() || plan.dims.iter().zip(bases).any(|(&d, b)| d != b.n_cols()) {
        return Err(Error::InvalidArgument("feature plan does not match the base sources".into()));
    }
    match cfg.termination.criterion {
        TerminationCriterion::Estimating => grow_with_holdout(bases, labels, classes, plan, cfg, seed),
        TerminationCriterion::Training => grow_on_training(bases, labels, classes, plan, cfg, seed),
    }
}

fn grow_with_holdout(
    bases: &[Matrix],
    labels: &[usize],
    classes: &[String],
    plan: FeaturePlan,
    cfg: &CascadeConfig,
    seed: u64,
) -> Result<(CascadeModel, GrowthStats)> {
    let n_classes = classes.len();
    let (g_rows, e_rows) = stratified_split_indices(
        labels,
        n_classes,
        cfg.termination.growing_fraction,
        derive_seed(seed, stream::SPLIT),
    )?;
    let pick = |rows: &[usize]| -> (Vec<Matrix>, Vec<usize>) {
        (
            bases.iter().map(|b| b.select_rows(rows)).collect(),
            rows.iter().map(|&r| labels[r]).collect(),
        )
    };
    let (g_bases, g_labels) = pick(&g_rows);
    let (e_bases, e_labels) = pick(&e_rows);

    let mut stats = GrowthStats::default();
    let mut stopper = Stopper::new(&cfg.termination);
    let mut accuracies = Vec::new();
    let mut training_accuracies = Vec::new();
    let mut prev_g: Option<Matrix> = None;
    let mut prev_e: Option<Matrix> = None;
    loop {
        let l = accuracies.len();
        let src = plan.source_of(l);
        let t0 = Instant::now();
        let (level, aug_g) = train_level(
            &g_bases[src],
            prev_g.as_ref(),
            &g_labels,
            classes,
            &cfg.level,
            level_seed(seed, l),
        )?;
        let input_e = match &prev_e {
            Some(p) => Matrix::hconcat(&[&e_bases[src], p])?,
            None => e_bases[src].clone(),
        };
        let aug_e = level.augment(&input_e)?;
        training_accuracies.push(accuracy(&aggregate_labels(&aug_g, n_classes), &g_labels)?);
        let pred = aggregate_labels(&aug_e, n_classes);
        let acc = accuracy(&pred, &e_labels)?;
        stats.level_seconds.push(t0.elapsed().as_secs_f64());
        accuracies.push(acc);
        log::info!("level {} ({}): estimating accuracy {acc:.4}", l + 1, plan.names[src]);
        let (improved, more) = stopper.observe(acc);
        if improved {
            stats.holdout_pred = pred;
        }
        if !more {
            break;
        }
        prev_g = Some(aug_g);
        prev_e = Some(aug_e);
    }
    stats.holdout_truth = e_labels;

    let chosen = stopper.chosen();
    let mut levels = Vec::with_capacity(chosen);
    let mut prev: Option<Matrix> = None;
    for l in 0..chosen {
        let t0 = Instant::now();
        let (level, aug) = train_level(
            &bases[plan.source_of(l)],
            prev.as_ref(),
            labels,
            classes,
            &cfg.level,
            level_seed(seed, l),
        )?;
        levels.push(level);
        prev = Some(aug);
        stats.retrain_seconds.push(t0.elapsed().as_secs_f64());
    }
    let record = TerminationRecord {
        criterion: TerminationCriterion::Estimating,
        grown_levels: accuracies.len(),
        accuracies,
        training_accuracies,
        chosen_levels: chosen,
    };
    Ok((CascadeModel::from_parts(levels, record, plan, n_classes)?, stats))
}

fn grow_on_training(
    bases: &[Matrix],
    labels: &[usize],
    classes: &[String],
    plan: FeaturePlan,
    cfg: &CascadeConfig,
    seed: u64,
) -> Result<(CascadeModel, GrowthStats)> {
    let n_classes = classes.len();
    let mut stats = GrowthStats::default();
    let mut stopper = Stopper::new(&cfg.termination);
    let mut accuracies = Vec::new();
    let mut levels = Vec::new();
    let mut prev: Option<Matrix> = None;
    loop {
        let l = levels.len();
        let t0 = Instant::now();
        let (level, aug) = train_level(
            &bases[plan.source_of(l)],
            prev.as_ref(),
            labels,
            classes,
            &cfg.level,
            level_seed(seed, l),
        )?;
        let acc = accuracy(&aggregate_labels(&aug, n_classes), labels)?;
        stats.level_seconds.push(t0.elapsed().as_secs_f64());
        accuracies.push(acc);
        levels.push(level);
        log::info!("level {}: training accuracy {acc:.4}", l + 1);
        if !stopper.observe(acc).1 {
            break;
        }
        prev = Some(aug);
    }
    let chosen = stopper.chosen();
    levels.truncate(chosen);
    let record = TerminationRecord {
        criterion: TerminationCriterion::Training,
        grown_levels: accuracies.len(),
        training_accuracies: accuracies.clone(),
        accuracies,
        chosen_levels: chosen,
    };
    Ok((CascadeModel::from_parts(levels, record, plan, n_classes)?, stats))
}
