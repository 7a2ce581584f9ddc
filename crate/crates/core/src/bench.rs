//! Benchmark suites: gcForest against a plain random forest.
//!
//! Reference accuracies shown next to results in the "published" column
//! are for orientation only.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeConfig, LevelConfig, TerminationConfig};
use crate::dataset::{load_csv, stratified_split, CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::forest::{train_forest, CvMode, ForestConfig, DEFAULT_TREES};
use crate::metrics::accuracy;
use crate::model::{fit, GcConfig, Variant};
use crate::rng::derive_seed;
use crate::scanning::{default_windows, GrainConfig};
use crate::synthetic::{motif_dataset, MotifConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    UciLowdim,
    ScanningAblation,
    CvModeCompare,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::UciLowdim, Suite::ScanningAblation, Suite::CvModeCompare];

    pub fn name(self) -> &'static str {
        match self {
            Suite::UciLowdim => "uci-lowdim",
            Suite::ScanningAblation => "scanning-ablation",
            Suite::CvModeCompare => "cv-mode-compare",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::InvalidArgument(format!("unknown suite `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Published accuracies (percent) for gcForest and a random forest.
pub const UCI_PUBLISHED: [(&str, f64, f64); 3] =
    [("letter", 97.40, 96.50), ("adult", 86.40, 85.49), ("yeast", 63.45, 61.66)];

/// Published sEMG accuracies (percent) with and without scanning.
pub const ABLATION_PUBLISHED: (f64, f64) = (71.30, 48.15);

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub data_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub level_trees: usize,
    pub scan_trees: usize,
    pub rf_trees: usize,
    /// Restrict uci-lowdim to these dataset names.
    pub datasets: Vec<String>,
    pub motif: MotifConfig,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            data_dir: PathBuf::from("data"),
            seeds: vec![0, 1, 2],
            level_trees: DEFAULT_TREES,
            scan_trees: DEFAULT_TREES,
            rf_trees: 2000,
            datasets: UCI_PUBLISHED.iter().map(|d| d.0.to_string()).collect(),
            motif: MotifConfig::default(),
        }
    }
}

/// One method's results on one dataset, one entry per seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub test_accuracy: Vec<f64>,
    /// Best estimating accuracy seen while growing (gcForest only).
    pub estimating_accuracy: Vec<f64>,
    pub levels: Vec<usize>,
    pub seconds: Vec<f64>,
    pub published: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl MethodResult {
    fn new(method: &str, published: Option<f64>) -> Self {
        MethodResult {
            method: method.into(),
            published,
            ..Default::default()
        }
    }

    fn push(&mut self, run: RunOutcome) {
        self.test_accuracy.push(run.test_accuracy);
        if let Some(e) = run.estimating_accuracy {
            self.estimating_accuracy.push(e);
        }
        if let Some(l) = run.levels {
            self.levels.push(l);
        }
        self.seconds.push(run.seconds);
    }

    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.test_accuracy)
    }

    pub fn mean_estimating(&self) -> Option<f64> {
        (!self.estimating_accuracy.is_empty()).then(|| mean(&self.estimating_accuracy))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub dataset: String,
    pub methods: Vec<MethodResult>,
}

impl DatasetResult {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub suite: Suite,
    pub seeds: Vec<u64>,
    pub results: Vec<DatasetResult>,
}

impl BenchReport {
    pub fn dataset(&self, name: &str) -> Option<&DatasetResult> {
        self.results.iter().find(|d| d.dataset == name)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {} ({} seed(s))", self.suite.name(), self.seeds.len())?;
        writeln!(
            f,
            "{:<10} {:<20} {:>9} {:>9} {:>7} {:>9} {:>15}",
            "dataset", "method", "test acc", "est acc", "levels", "seconds", "published"
        )?;
        for d in &self.results {
            for m in &d.methods {
                let est = m.mean_estimating().map_or("-".into(), |e| format!("{:.2}%", 100.0 * e));
                let lv = if m.levels.is_empty() {
                    "-".into()
                } else {
                    format!("{:.1}", mean(&m.levels.iter().map(|&l| l as f64).collect::<Vec<_>>()))
                };
                let published = m.published.map_or("-".into(), |p| format!("{p:.2}%"));
                writeln!(
                    f,
                    "{:<10} {:<20} {:>8.2}% {:>9} {:>7} {:>9.1} {:>15}",
                    d.dataset,
                    m.method,
                    100.0 * m.mean_accuracy(),
                    est,
                    lv,
                    m.seconds.iter().sum::<f64>(),
                    published
                )?;
            }
        }
        Ok(())
    }
}

/// Outcome of a single train/test run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub test_accuracy: f64,
    pub estimating_accuracy: Option<f64>,
    pub levels: Option<usize>,
    pub seconds: f64,
}

/// Load `<dir>/<name>_train.csv` and `<dir>/<name>_test.csv` (label column
/// `class`), with test labels mapped onto the training classes.
pub fn load_uci(name: &str, data_dir: &Path) -> Result<(Dataset, Dataset)> {
    let paths = ["train", "test"].map(|part| data_dir.join(format!("{name}_{part}.csv")));
    for p in &paths {
        if !p.exists() {
            return Err(Error::MissingDataset {
                path: p.clone(),
                hint: "Create the CSV files with `python3 scripts/prepare_datasets.py --out data` \
                       (see data/README.md), or pass --data-dir."
                    .into(),
            });
        }
    }
    let train = load_csv(&paths[0], &CsvSchema::label("class"))?;
    let test = load_csv(&paths[1], &CsvSchema::label("class").with_classes(train.classes.clone()))?;
    Ok((train, test))
}

/// Cascade-only gcForest with 4 + 4 forests of `n_trees` trees.
pub fn cascade_only_config(n_trees: usize, seed: u64) -> GcConfig {
    GcConfig::cascade_only(CascadeConfig {
        level: LevelConfig::new(4, 4, n_trees),
        termination: TerminationConfig::default(),
    })
    .with_seed(seed)
}

pub fn run_gcforest(train: &Dataset, test: &Dataset, cfg: &GcConfig) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let model = fit(train, cfg)?;
    let pred = model.predict_batch(&test.features)?;
    let term = model.cascade().termination();
    Ok(RunOutcome {
        test_accuracy: accuracy(&pred.labels, &test.labels)?,
        estimating_accuracy: term.accuracies.iter().copied().reduce(f64::max),
        levels: Some(model.n_levels()),
        seconds: t0.elapsed().as_secs_f64(),
    })
}

pub fn run_random_forest(train: &Dataset, test: &Dataset, n_trees: usize, seed: u64) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let rows: Vec<usize> = (0..train.n_instances()).collect();
    let forest = train_forest(train, &rows, &ForestConfig::random_forest(n_trees).with_seed(seed))?;
    let pred = forest.predict(&test.features)?;
    Ok(RunOutcome {
        test_accuracy: accuracy(&pred, &test.labels)?,
        estimating_accuracy: None,
        levels: None,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// gcForest (cascade only) and a random forest on each low-dimensional set.
pub fn uci_lowdim(s: &BenchSettings) -> Result<BenchReport> {
    let mut results = Vec::new();
    for (name, pub_gc, pub_rf) in UCI_PUBLISHED {
        if !s.datasets.iter().any(|d| d == name) {
            continue;
        }
        let (train, test) = load_uci(name, &s.data_dir)?;
        let mut gc = MethodResult::new("gcforest", Some(pub_gc));
        let mut rf = MethodResult::new(&format!("random-forest-{}", s.rf_trees), Some(pub_rf));
        for &seed in &s.seeds {
            let run = run_gcforest(&train, &test, &cascade_only_config(s.level_trees, seed))?;
            log::info!("{name} seed {seed}: gcforest {:.4} ({:.0}s)", run.test_accuracy, run.seconds);
            gc.push(run);
            let run = run_random_forest(&train, &test, s.rf_trees, seed)?;
            log::info!("{name} seed {seed}: random forest {:.4}", run.test_accuracy);
            rf.push(run);
        }
        results.push(DatasetResult {
            dataset: name.into(),
            methods: vec![gc, rf],
        });
    }
    Ok(BenchReport {
        schema_version: 1,
        suite: Suite::UciLowdim,
        seeds: s.seeds.clone(),
        results,
    })
}

/// Train/test split of the seeded motif data: two thirds for training.
pub fn motif_split(cfg: &MotifConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    let ds = motif_dataset(cfg, seed)?;
    let split = stratified_split(&ds, 2.0 / 3.0, derive_seed(seed, 2))?;
    Ok((split.growing, split.estimating))
}

/// Full gcForest (default windows, grain cycle) against the cascade alone
/// and a random forest, on window-local synthetic data.
pub fn scanning_ablation(s: &BenchSettings) -> Result<BenchReport> {
    let (pub_full, pub_cascade) = ABLATION_PUBLISHED;
    let mut full = MethodResult::new("gcforest", Some(pub_full));
    let mut cascade = MethodResult::new("cascade-only", Some(pub_cascade));
    let mut rf = MethodResult::new(&format!("random-forest-{}", s.rf_trees), None);
    for &seed in &s.seeds {
        let (train, test) = motif_split(&s.motif, seed)?;
        let grains = default_windows(train.n_features())?
            .into_iter()
            .map(|w| GrainConfig::sequence(w).with_trees(s.scan_trees))
            .collect();
        let cfg = cascade_only_config(s.level_trees, seed).with_grains(Variant::GrainCycle, grains);
        let run = run_gcforest(&train, &test, &cfg)?;
        log::info!("motif seed {seed}: gcforest {:.4} ({:.0}s)", run.test_accuracy, run.seconds);
        full.push(run);
        let run = run_gcforest(&train, &test, &cascade_only_config(s.level_trees, seed))?;
        log::info!("motif seed {seed}: cascade-only {:.4}", run.test_accuracy);
        cascade.push(run);
        rf.push(run_random_forest(&train, &test, s.rf_trees, seed)?);
    }
    Ok(BenchReport {
        schema_version: 1,
        suite: Suite::ScanningAblation,
        seeds: s.seeds.clone(),
        results: vec![DatasetResult {
            dataset: "motif".into(),
            methods: vec![full, cascade, rf],
        }],
    })
}

/// Out-of-fold against in-fold-average class vectors on YEAST.
pub fn cv_mode_compare(s: &BenchSettings) -> Result<BenchReport> {
    let (train, test) = load_uci("yeast", &s.data_dir)?;
    let mut methods = Vec::new();
    for (mode, name) in [(CvMode::OutOfFold, "out-of-fold"), (CvMode::InFoldAverage, "in-fold-average")] {
        let mut m = MethodResult::new(name, None);
        for &seed in &s.seeds {
            let mut cfg = cascade_only_config(s.level_trees, seed);
            cfg.cascade.level.cv_mode = mode;
            let run = run_gcforest(&train, &test, &cfg)?;
            log::info!("yeast seed {seed}: {name} {:.4}", run.test_accuracy);
            m.push(run);
        }
        methods.push(m);
    }
    Ok(BenchReport {
        schema_version: 1,
        suite: Suite::CvModeCompare,
        seeds: s.seeds.clone(),
        results: vec![DatasetResult {
            dataset: "yeast".into(),
            methods,
        }],
    })
}

pub fn run_suite(suite: Suite, s: &BenchSettings) -> Result<BenchReport> {
    match suite {
        Suite::UciLowdim => uci_lowdim(s),
        Suite::ScanningAblation => scanning_ablation(s),
        Suite::CvModeCompare => cv_mode_compare(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("table9".parse::<Suite>().is_err());
    }

    #[test]
    fn missing_dataset_explains_how_to_get_it() {
        let err = load_uci("letter", Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err, Error::MissingDataset { .. }));
        assert!(err.to_string().contains("prepare_datasets.py"));
    }
}
