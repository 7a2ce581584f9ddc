//! Multi-grained scanning.
//!
//! A grain slides one window over every training example, turns each window
//! position into an instance labelled like its source example, trains forests
//! on those instances, and re-represents an example as the concatenation of
//! the forests' class vectors over all window positions.
//!
//! Output layout for one example: window positions in order (1-D left to
//! right, 2-D row-major), and within a position the grain's forests in config
//! order, each contributing `n_classes` values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_kfold_indices, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::forest::{train_forest, Forest, ForestConfig, DEFAULT_TREES};
use crate::rng::{derive_seed, rng_from, stream};

/// Depth cap for scanning forests.
pub const SCANNING_DEPTH_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Contiguous run of features (also used on flattened panels).
    Sequence(usize),
    /// `height × width` sub-panel; requires a panel-shaped dataset.
    Panel { height: usize, width: usize },
}

impl Window {
    pub fn len(&self) -> usize {
        match *self {
            Window::Sequence(w) => w,
            Window::Panel { height, width } => height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Raw input geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Sequence(usize),
    Panel { height: usize, width: usize },
}

impl Geometry {
    pub fn n_features(&self) -> usize {
        match *self {
            Geometry::Sequence(d) => d,
            Geometry::Panel { height, width } => height * width,
        }
    }

    /// Geometry a window of this kind scans over, given the data's shape.
    pub fn for_window(window: Window, n_features: usize, panel_shape: Option<(usize, usize)>) -> Result<Geometry> {
        match window {
            Window::Sequence(_) => Ok(Geometry::Sequence(n_features)),
            Window::Panel { .. } => {
                let (height, width) = panel_shape.ok_or(Error::MissingPanelShape)?;
                Ok(Geometry::Panel { height, width })
            }
        }
    }
}

/// Number of positions of a `window`-wide window over `extent` features.
pub fn window_count_1d(extent: usize, window: usize, stride: usize) -> Result<usize> {
    if stride == 0 || window == 0 {
        return Err(Error::InvalidArgument("window and stride must be positive".into()));
    }
    if window > extent {
        return Err(Error::WindowTooLarge { window, extent });
    }
    Ok((extent - window) / stride + 1)
}

pub fn window_count(geometry: Geometry, window: Window, stride: usize) -> Result<usize> {
    match (geometry, window) {
        (Geometry::Sequence(d), Window::Sequence(w)) => window_count_1d(d, w, stride),
        (Geometry::Panel { height, width }, Window::Panel { height: wh, width: ww }) => {
            Ok(window_count_1d(height, wh, stride)? * window_count_1d(width, ww, stride)?)
        }
        (Geometry::Panel { height, width }, Window::Sequence(w)) => window_count_1d(height * width, w, stride),
        (Geometry::Sequence(_), Window::Panel { .. }) => Err(Error::MissingPanelShape),
    }
}

/// Feature indices of every window position: position `p` covers
/// `starts[p] + offsets[k]` for each `k`.
#[derive(Debug, Clone, PartialEq)]
struct WindowPlan {
    starts: Vec<usize>,
    offsets: Vec<usize>,
}

impl WindowPlan {
    fn new(geometry: Geometry, window: Window, stride: usize) -> Result<Self> {
        window_count(geometry, window, stride)?;
        match (geometry, window) {
            (Geometry::Panel { height, width }, Window::Panel { height: wh, width: ww }) => {
                let rows = window_count_1d(height, wh, stride)?;
                let cols = window_count_1d(width, ww, stride)?;
                let starts = (0..rows)
                    .flat_map(|r| (0..cols).map(move |c| r * stride * width + c * stride))
                    .collect();
                let offsets = (0..wh).flat_map(|dr| (0..ww).map(move |dc| dr * width + dc)).collect();
                Ok(WindowPlan { starts, offsets })
            }
            _ => {
                let n = window_count(geometry, window, stride)?;
                Ok(WindowPlan {
                    starts: (0..n).map(|p| p * stride).collect(),
                    offsets: (0..window.len()).collect(),
                })
            }
        }
    }

    fn n_windows(&self) -> usize {
        self.starts.len()
    }

    #[inline]
    fn fill(&self, x: &[f64], position: usize, out: &mut [f64]) {
        let s = self.starts[position];
        for (o, &k) in out.iter_mut().zip(&self.offsets) {
            *o = x[s + k];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrainConfig {
    pub window: Window,
    pub stride: usize,
    /// Fraction of extracted instances kept for forest training.
    pub subsample: Option<f64>,
    pub forests: Vec<ForestConfig>,
}

impl GrainConfig {
    /// One completely-random and one random forest, 500 trees each, depth cap 100.
    pub fn new(window: Window) -> Self {
        GrainConfig {
            window,
            stride: 1,
            subsample: None,
            forests: vec![
                ForestConfig::completely_random(DEFAULT_TREES).with_depth_cap(Some(SCANNING_DEPTH_CAP)),
                ForestConfig::random_forest(DEFAULT_TREES).with_depth_cap(Some(SCANNING_DEPTH_CAP)),
            ],
        }
    }

    pub fn sequence(window: usize) -> Self {
        Self::new(Window::Sequence(window))
    }

    pub fn panel(height: usize, width: usize) -> Self {
        Self::new(Window::Panel { height, width })
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.forests.iter_mut().for_each(|f| f.n_trees = n_trees);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_subsample(mut self, rate: Option<f64>) -> Self {
        self.subsample = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.forests.is_empty() {
            return Err(Error::Config("a grain needs at least one forest".into()));
        }
        if let Some(r) = self.subsample {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(format!("subsample rate {r} not in (0, 1]")));
            }
        }
        if self.stride == 0 || self.window.is_empty() {
            return Err(Error::Config("window and stride must be positive".into()));
        }
        Ok(())
    }
}

/// Instances extracted by sliding a window over every example.
#[derive(Debug, Clone)]
pub struct Extracted {
    pub dataset: Dataset,
    /// Source example of each instance.
    pub provenance: Vec<usize>,
    /// Window position of each instance.
    pub position: Vec<usize>,
}

/// One instance per (example, window position), example-major, each
/// labelled with its source example's label. With a subsample rate `r`,
/// `ceil(r × count)` instances are kept, chosen uniformly without
/// replacement from `seed`, in their original order.
pub fn extract_instances(ds: &Dataset, g: &GrainConfig, seed: u64) -> Result<Extracted> {
    g.validate()?;
    let geometry = Geometry::for_window(g.window, ds.n_features(), ds.panel_shape)?;
    let plan = WindowPlan::new(geometry, g.window, g.stride)?;
    let n_windows = plan.n_windows();
    let total = ds.n_instances() * n_windows;
    let keep: Vec<usize> = match g.subsample {
        Some(rate) if rate < 1.0 => {
            let amount = ((rate * total as f64).ceil() as usize).clamp(1, total);
            let mut idx = rand::seq::index::sample(&mut rng_from(seed), total, amount).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..total).collect(),
    };
    let w = g.window.len();
    let mut data = vec![0.0; keep.len() * w];
    let mut labels = Vec::with_capacity(keep.len());
    let mut provenance = Vec::with_capacity(keep.len());
    let mut position = Vec::with_capacity(keep.len());
    for (dst, &k) in data.chunks_exact_mut(w).zip(&keep) {
        let (ex, pos) = (k / n_windows, k % n_windows);
        plan.fill(ds.features.row(ex), pos, dst);
        labels.push(ds.labels[ex]);
        provenance.push(ex);
        position.push(pos);
    }
    let features = Matrix::new(data, keep.len(), w)?;
    Ok(Extracted {
        dataset: Dataset::with_classes(features, labels, ds.classes.clone())?,
        provenance,
        position,
    })
}

/// A fitted grain: window layout plus the forests trained on its instances.
#[derive(Debug, Clone, PartialEq)]
pub struct GrainTransformer {
    pub(crate) config: GrainConfig,
    pub(crate) geometry: Geometry,
    pub(crate) forests: Vec<Forest>,
    pub(crate) n_classes: usize,
    plan: WindowPlan,
}

impl GrainTransformer {
    pub(crate) fn from_parts(
        config: GrainConfig,
        geometry: Geometry,
        forests: Vec<Forest>,
        n_classes: usize,
    ) -> Result<Self> {
        let plan = WindowPlan::new(geometry, config.window, config.stride)?;
        if forests.len() != config.forests.len()
            || forests
                .iter()
                .any(|f| f.n_features() != config.window.len() || f.n_classes() != n_classes)
        {
            return Err(Error::Corrupt("grain forests do not match the grain config".into()));
        }
        Ok(GrainTransformer {
            config,
            geometry,
            forests,
            n_classes,
            plan,
        })
    }

    pub fn config(&self) -> &GrainConfig {
        &self.config
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn forests(&self) -> &[Forest] {
        &self.forests
    }

    pub fn n_windows(&self) -> usize {
        self.plan.n_windows()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// `n_windows × n_classes × n_forests`.
    pub fn output_dim(&self) -> usize {
        self.n_windows() * self.n_classes * self.forests.len()
    }

    fn transform_into(&self, x: &[f64], window_buf: &mut [f64], out: &mut [f64]) {
        let c = self.n_classes;
        let per_pos = c * self.forests.len();
        for p in 0..self.n_windows() {
            self.plan.fill(x, p, window_buf);
            for (j, f) in self.forests.iter().enumerate() {
                let o = p * per_pos + j * c;
                f.class_vector_into(window_buf, &mut out[o..o + c]);
            }
        }
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut buf = vec![0.0; self.config.window.len()];
        let mut out = vec![0.0; self.output_dim()];
        self.transform_into(x, &mut buf, &mut out);
        Ok(out)
    }

    /// Row-wise [`transform`](Self::transform), parallel over rows.
    pub fn transform_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dim(x.n_cols())?;
        let dim = self.output_dim();
        let mut out = Matrix::zeros(x.n_rows(), dim);
        if dim > 0 {
            out.as_mut_slice()
                .par_chunks_mut(dim)
                .enumerate()
                .for_each_init(
                    || vec![0.0; self.config.window.len()],
                    |buf, (i, o)| self.transform_into(x.row(i), buf, o),
                );
        }
        Ok(out)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let expected = self.geometry.n_features();
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }
}

/// Train a grain's forests directly on all extracted instances.
/// Forest `j` is seeded with `derive_seed(seed, FOREST + j)`.
pub fn fit_grain(ds: &Dataset, g: &GrainConfig, seed: u64) -> Result<GrainTransformer> {
    let extracted = extract_instances(ds, g, derive_seed(seed, stream::SUBSAMPLE))?;
    let rows: Vec<usize> = (0..extracted.dataset.n_instances()).collect();
    let forests = g
        .forests
        .iter()
        .enumerate()
        .map(|(j, fc)| {
            let cfg = fc.clone().with_seed(derive_seed(seed, stream::FOREST + j as u64));
            train_forest(&extracted.dataset, &rows, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let geometry = Geometry::for_window(g.window, ds.n_features(), ds.panel_shape)?;
    GrainTransformer::from_parts(g.clone(), geometry, forests, ds.n_classes())
}

/// Fit a grain and produce transformed training features.
///
/// With `oof_folds = Some(k)`, each training example's features come from a
/// grain fitted on the other folds' examples (folds grouped by source
/// example), so the cascade never sees features from forests that were
/// trained on that example's windows. The returned transformer is always
/// fitted on all examples.
pub fn fit_transform(
    ds: &Dataset,
    g: &GrainConfig,
    seed: u64,
    oof_folds: Option<usize>,
) -> Result<(GrainTransformer, Matrix)> {
    let transformer = fit_grain(ds, g, seed)?;
    let features = match oof_folds {
        None => transformer.transform_matrix(&ds.features)?,
        Some(k) => {
            let folds = stratified_kfold_indices(&ds.labels, k, derive_seed(seed, stream::FOLDS))?;
            let mut out = Matrix::zeros(ds.n_instances(), transformer.output_dim());
            for (f, held_out) in folds.iter().enumerate() {
                let mut train: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != f)
                    .flat_map(|(_, fold)| fold.iter().copied())
                    .collect();
                train.sort_unstable();
                let fold_grain = fit_grain(
                    &ds.subset(&train),
                    g,
                    derive_seed(seed, stream::FOLD_MODEL + f as u64),
                )?;
                let part = fold_grain.transform_matrix(&ds.features.select_rows(held_out))?;
                for (i, &r) in held_out.iter().enumerate() {
                    out.row_mut(r).copy_from_slice(part.row(i));
                }
            }
            out
        }
    };
    Ok((transformer, features))
}

/// `{⌊d/16⌋, ⌊d/8⌋, ⌊d/4⌋}`, ascending, duplicates removed.
pub fn default_windows(d: usize) -> Result<Vec<usize>> {
    if d < 16 {
        return Err(Error::DimensionTooSmallForDefaultWindows(d));
    }
    let mut w = vec![d / 16, d / 8, d / 4];
    w.dedup();
    Ok(w)
}

/// Panel counterpart of [`default_windows`]: square-ish windows covering
/// 1/16, 1/8 and 1/4 of the panel area, i.e. sides `⌊s/4⌋`, `⌊s/√8⌋`,
/// `⌊s/2⌋` per axis.
pub fn default_panel_windows(height: usize, width: usize) -> Result<Vec<(usize, usize)>> {
    if height < 4 || width < 4 {
        return Err(Error::DimensionTooSmallForDefaultWindows(height.min(width)));
    }
    let side = |s: usize, div: f64| ((s as f64 / div).floor() as usize).max(1);
    let r8 = 8f64.sqrt();
    let mut w = vec![
        (side(height, 4.0), side(width, 4.0)),
        (side(height, r8), side(width, r8)),
        (side(height, 2.0), side(width, 2.0)),
    ];
    w.dedup();
    Ok(w)
}
