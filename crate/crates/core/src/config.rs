//! Run configuration files.
//!
//! A run config is a flat TOML file. Every key is optional and defaults to
//! the standard settings (8 forests of 500 trees per level, 3-fold class
//! vectors, scanning forests of 500 trees with depth cap 100). Unknown keys
//! are rejected. Relative paths are resolved against the config file's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeConfig, LevelConfig, TerminationConfig, TerminationCriterion};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{CvMode, DEFAULT_K_FOLDS, DEFAULT_TREES};
use crate::model::{GcConfig, Variant};
use crate::scanning::{default_panel_windows, default_windows, GrainConfig, Window, SCANNING_DEPTH_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: PathBuf,
    /// Optional test file, evaluated after training.
    pub test: Option<PathBuf>,
    pub label_column: String,
    /// `[height, width]` of raw features laid out as a panel.
    pub panel_shape: Option<[usize; 2]>,

    pub variant: Variant,
    /// 1-D window sizes. Empty with a scanning variant means the defaults
    /// `d/16, d/8, d/4`.
    pub windows: Vec<usize>,
    /// 2-D windows `[height, width]`; used instead of `windows` when set.
    pub panel_windows: Vec<[usize; 2]>,
    pub stride: usize,
    pub subsample: Option<f64>,
    pub scan_trees: usize,
    pub scan_depth_cap: usize,
    pub scanning_oof: bool,

    pub level_random_forests: usize,
    pub level_gini_forests: usize,
    pub level_trees: usize,
    pub k_folds: usize,
    pub cv_mode: CvMode,

    pub criterion: TerminationCriterion,
    pub growing_fraction: f64,
    pub tolerance: f64,
    pub patience: usize,
    pub max_levels: usize,

    pub seed: u64,
    pub model: PathBuf,
    pub report: PathBuf,
    pub test_report: Option<PathBuf>,
    /// Training rows copied into the probe file written next to the model.
    pub probe_rows: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TerminationConfig::default();
        RunConfig {
            train: PathBuf::from("train.csv"),
            test: None,
            label_column: "class".into(),
            panel_shape: None,
            variant: Variant::CascadeOnly,
            windows: Vec::new(),
            panel_windows: Vec::new(),
            stride: 1,
            subsample: None,
            scan_trees: DEFAULT_TREES,
            scan_depth_cap: SCANNING_DEPTH_CAP,
            scanning_oof: false,
            level_random_forests: 4,
            level_gini_forests: 4,
            level_trees: DEFAULT_TREES,
            k_folds: DEFAULT_K_FOLDS,
            cv_mode: CvMode::OutOfFold,
            criterion: t.criterion,
            growing_fraction: t.growing_fraction,
            tolerance: t.tolerance,
            patience: t.patience,
            max_levels: t.max_levels,
            seed: 0,
            model: PathBuf::from("model.gcf"),
            report: PathBuf::from("report.json"),
            test_report: None,
            probe_rows: 100,
        }
    }
}

impl RunConfig {
    /// Parse TOML text; relative paths are joined onto `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [&mut cfg.train, &mut cfg.model, &mut cfg.report] {
            *p = base_dir.join(&*p);
        }
        for p in [&mut cfg.test, &mut cfg.test_report].into_iter().flatten() {
            *p = base_dir.join(&*p);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn test_report_path(&self) -> PathBuf {
        self.test_report
            .clone()
            .unwrap_or_else(|| self.report.with_extension("test.json"))
    }

    fn grain(&self, window: Window) -> GrainConfig {
        let mut g = GrainConfig::new(window)
            .with_trees(self.scan_trees)
            .with_stride(self.stride)
            .with_subsample(self.subsample);
        for f in &mut g.forests {
            f.tree.depth_cap = Some(self.scan_depth_cap);
        }
        g
    }

    /// Model config for a training set with the given shape.
    pub fn gc_config(&self, train: &Dataset) -> Result<GcConfig> {
        let grains = match self.variant {
            Variant::CascadeOnly => Vec::new(),
            _ if !self.panel_windows.is_empty() || (self.windows.is_empty() && train.panel_shape.is_some()) => {
                let windows = if self.panel_windows.is_empty() {
                    let (h, w) = train.panel_shape.ok_or(Error::MissingPanelShape)?;
                    default_panel_windows(h, w)?
                } else {
                    self.panel_windows.iter().map(|&[h, w]| (h, w)).collect()
                };
                windows
                    .into_iter()
                    .map(|(height, width)| self.grain(Window::Panel { height, width }))
                    .collect()
            }
            _ => {
                let windows = if self.windows.is_empty() {
                    default_windows(train.n_features())?
                } else {
                    self.windows.clone()
                };
                windows.into_iter().map(|w| self.grain(Window::Sequence(w))).collect()
            }
        };
        let level = LevelConfig::new(self.level_random_forests, self.level_gini_forests, self.level_trees)
            .with_k_folds(self.k_folds)
            .with_cv_mode(self.cv_mode);
        let termination = TerminationConfig {
            criterion: self.criterion,
            tolerance: self.tolerance,
            patience: self.patience,
            max_levels: self.max_levels,
            growing_fraction: self.growing_fraction,
        };
        let cfg = GcConfig {
            variant: self.variant,
            grains,
            cascade: CascadeConfig { level, termination },
            scanning_oof: self.scanning_oof,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Matrix;

    #[test]
    fn defaults_match_standard_settings() {
        let cfg = RunConfig::from_toml_str("", Path::new("/d")).unwrap();
        assert_eq!(cfg.level_trees, 500);
        assert_eq!(cfg.scan_trees, 500);
        assert_eq!(cfg.scan_depth_cap, 100);
        assert_eq!(cfg.k_folds, 3);
        assert_eq!(cfg.level_random_forests + cfg.level_gini_forests, 8);
        assert_eq!(cfg.train, PathBuf::from("/d/train.csv"));
        assert_eq!(cfg.growing_fraction, 0.8);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("seed = 1\nlevel_tress = 5\n", Path::new(".")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("level_tress"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn scanning_variant_gets_default_windows() {
        let cfg = RunConfig::from_toml_str("variant = \"grain-cycle\"\nscan_trees = 3", Path::new(".")).unwrap();
        let ds = Dataset::new(Matrix::zeros(4, 400), vec![0, 1, 0, 1], 2).unwrap();
        let gc = cfg.gc_config(&ds).unwrap();
        let windows: Vec<Window> = gc.grains.iter().map(|g| g.window).collect();
        assert_eq!(
            windows,
            vec![Window::Sequence(25), Window::Sequence(50), Window::Sequence(100)]
        );
        assert_eq!(gc.grains[0].forests[0].n_trees, 3);
    }
}
