//! End-to-end model: scanning grains feeding a cascade.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cascade::{grow_cascade, CascadeConfig, CascadeModel, FeaturePlan, GrowthStats};
use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::forest::ClassVector;
use crate::rng::{derive_seed, stream};
use crate::scanning::{fit_transform, GrainConfig, GrainTransformer};

/// How grain outputs are wired into the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Level `l` uses grain `l mod G` as its base, plus the previous
    /// level's class vectors.
    #[default]
    GrainCycle,
    /// All grain outputs concatenated once and used as every level's base.
    Concatenated,
    /// No scanning; raw features are every level's base.
    CascadeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcConfig {
    pub variant: Variant,
    pub grains: Vec<GrainConfig>,
    pub cascade: CascadeConfig,
    /// Produce the cascade's training features from grains fitted on the
    /// other folds (k = the level's `k_folds`).
    pub scanning_oof: bool,
    pub seed: u64,
}

impl Default for GcConfig {
    fn default() -> Self {
        GcConfig {
            variant: Variant::CascadeOnly,
            grains: Vec::new(),
            cascade: CascadeConfig::default(),
            scanning_oof: false,
            seed: 0,
        }
    }
}

impl GcConfig {
    pub fn cascade_only(cascade: CascadeConfig) -> Self {
        GcConfig {
            cascade,
            ..GcConfig::default()
        }
    }

    pub fn with_grains(mut self, variant: Variant, grains: Vec<GrainConfig>) -> Self {
        self.variant = variant;
        self.grains = grains;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.variant, self.grains.is_empty()) {
            (Variant::CascadeOnly, false) => {
                return Err(Error::Config("cascade-only variant takes no grains".into()))
            }
            (Variant::GrainCycle | Variant::Concatenated, true) => {
                return Err(Error::Config("scanning variants need at least one grain".into()))
            }
            _ => {}
        }
        self.grains.iter().try_for_each(GrainConfig::validate)?;
        self.cascade.level.validate()?;
        self.cascade.termination.validate()
    }

    fn feature_plan(&self, n_features: usize, grain_dims: &[usize]) -> Result<FeaturePlan> {
        let names: Vec<String> = (1..=grain_dims.len()).map(|g| format!("grain{g}")).collect();
        match self.variant {
            Variant::CascadeOnly => FeaturePlan::new(vec!["raw".into()], vec![n_features]),
            Variant::GrainCycle => FeaturePlan::new(names, grain_dims.to_vec()),
            Variant::Concatenated => FeaturePlan::new(vec![names.join("+")], vec![grain_dims.iter().sum()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcModel {
    pub(crate) config: GcConfig,
    pub(crate) classes: Vec<String>,
    pub(crate) n_features: usize,
    pub(crate) panel_shape: Option<(usize, usize)>,
    pub(crate) transformers: Vec<GrainTransformer>,
    pub(crate) cascade: CascadeModel,
}

/// Timings and holdout predictions from one fit. Kept outside the model so
/// saved files depend only on data and config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitStats {
    pub grain_seconds: Vec<f64>,
    pub growth: GrowthStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<usize>,
    /// Mean class vector per row.
    pub probs: Matrix,
}

pub fn fit(train: &Dataset, cfg: &GcConfig) -> Result<GcModel> {
    fit_with_stats(train, cfg).map(|(m, _)| m)
}

pub fn fit_with_stats(train: &Dataset, cfg: &GcConfig) -> Result<(GcModel, FitStats)> {
    cfg.validate()?;
    let mut stats = FitStats::default();
    let mut transformers = Vec::with_capacity(cfg.grains.len());
    let mut grain_features = Vec::with_capacity(cfg.grains.len());
    let oof = cfg.scanning_oof.then_some(cfg.cascade.level.k_folds);
    for (i, g) in cfg.grains.iter().enumerate() {
        let t0 = Instant::now();
        let (t, x) = fit_transform(train, g, derive_seed(cfg.seed, stream::GRAIN + i as u64), oof)?;
        log::info!("grain {} ({:?}): {} features", i + 1, g.window, t.output_dim());
        stats.grain_seconds.push(t0.elapsed().as_secs_f64());
        transformers.push(t);
        grain_features.push(x);
    }
    let dims: Vec<usize> = transformers.iter().map(GrainTransformer::output_dim).collect();
    let plan = cfg.feature_plan(train.n_features(), &dims)?;
    let bases = bases_for(cfg.variant, &train.features, grain_features)?;
    let (cascade, growth) = grow_cascade(
        &bases,
        &train.labels,
        &train.classes,
        plan,
        &cfg.cascade,
        derive_seed(cfg.seed, stream::CASCADE),
    )?;
    stats.growth = growth;
    let model = GcModel {
        config: cfg.clone(),
        classes: train.classes.clone(),
        n_features: train.n_features(),
        panel_shape: train.panel_shape,
        transformers,
        cascade,
    };
    Ok((model, stats))
}

fn bases_for(variant: Variant, raw: &Matrix, grain_features: Vec<Matrix>) -> Result<Vec<Matrix>> {
    Ok(match variant {
        Variant::CascadeOnly => vec![raw.clone()],
        Variant::GrainCycle => grain_features,
        Variant::Concatenated => vec![Matrix::hconcat(&grain_features.iter().collect::<Vec<_>>())?],
    })
}

impl GcModel {
    pub fn config(&self) -> &GcConfig {
        &self.config
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn panel_shape(&self) -> Option<(usize, usize)> {
        self.panel_shape
    }

    pub fn transformers(&self) -> &[GrainTransformer] {
        &self.transformers
    }

    pub fn cascade(&self) -> &CascadeModel {
        &self.cascade
    }

    pub fn n_levels(&self) -> usize {
        self.cascade.n_levels()
    }

    /// Base source used by each level, e.g. `grain1, grain2, grain1`.
    pub fn level_sources(&self) -> Vec<String> {
        self.cascade
            .plan()
            .sequence(self.n_levels())
            .into_iter()
            .map(String::from)
            .collect()
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found,
            });
        }
        Ok(())
    }

    /// Label and mean class vector for one raw instance.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, ClassVector)> {
        self.check_dim(x.len())?;
        let grain: Vec<Vec<f64>> = self
            .transformers
            .iter()
            .map(|t| t.transform(x))
            .collect::<Result<_>>()?;
        let bases: Vec<Vec<f64>> = match self.config.variant {
            Variant::CascadeOnly => vec![x.to_vec()],
            Variant::GrainCycle => grain,
            Variant::Concatenated => vec![grain.concat()],
        };
        let refs: Vec<&[f64]> = bases.iter().map(Vec::as_slice).collect();
        self.cascade.predict(&refs)
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Predictions> {
        self.check_dim(x.n_cols())?;
        let grain = self
            .transformers
            .iter()
            .map(|t| t.transform_matrix(x))
            .collect::<Result<Vec<_>>>()?;
        let bases = bases_for(self.config.variant, x, grain)?;
        let (labels, probs) = self.cascade.predict_matrix(&bases)?;
        Ok(Predictions { labels, probs })
    }
}
