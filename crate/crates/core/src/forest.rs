//! Forests of one tree kind, class vectors, and cross-validated class vectors
//! for stacking.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_kfold_indices, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, stream};
use crate::tree::{grow_on_samples, Tree, TreeConfig, TreeKind};

pub const DEFAULT_TREES: usize = 500;
pub const DEFAULT_K_FOLDS: usize = 3;

/// Estimated class distribution for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassVector(Vec<f64>);

impl ClassVector {
    pub fn new(probs: Vec<f64>) -> Self {
        ClassVector(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest component; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Component-wise arithmetic mean.
    pub fn mean(vectors: &[ClassVector]) -> ClassVector {
        let n = vectors.first().map_or(0, ClassVector::len);
        let mut out = vec![0.0; n];
        for v in vectors {
            for (o, p) in out.iter_mut().zip(&v.0) {
                *o += p;
            }
        }
        let k = vectors.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        ClassVector(out)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    /// Tree settings. `tree.seed` is ignored: tree `i` is seeded with
    /// `derive_seed(seed, i)`.
    pub tree: TreeConfig,
    pub n_trees: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestConfig {
    /// Breiman random forest: gini splits over √d candidates, bootstrap.
    pub fn random_forest(n_trees: usize) -> Self {
        ForestConfig {
            tree: TreeConfig::gini(),
            n_trees,
            bootstrap: true,
            seed: 0,
        }
    }

    /// Completely-random tree forest, trained on the full row set.
    pub fn completely_random(n_trees: usize) -> Self {
        ForestConfig {
            tree: TreeConfig::completely_random(),
            n_trees,
            bootstrap: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_depth_cap(mut self, cap: Option<usize>) -> Self {
        self.tree.depth_cap = cap;
        self
    }

    pub fn kind(&self) -> TreeKind {
        self.tree.kind
    }

    /// Config of tree `i`.
    pub fn tree_config(&self, i: usize) -> TreeConfig {
        self.tree.clone().with_seed(derive_seed(self.seed, i as u64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub(crate) trees: Vec<Tree>,
    pub(crate) config: ForestConfig,
    pub(crate) n_features: usize,
    pub(crate) n_classes: usize,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>, config: ForestConfig) -> Result<Forest> {
        let first = trees
            .first()
            .ok_or_else(|| Error::InvalidArgument("forest needs at least one tree".into()))?;
        let (n_features, n_classes) = (first.n_features(), first.n_classes());
        if trees
            .iter()
            .any(|t| t.n_features() != n_features || t.n_classes() != n_classes)
        {
            return Err(Error::InvalidArgument("trees disagree on feature/class count".into()));
        }
        Ok(Forest {
            trees,
            config,
            n_features,
            n_classes,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Mean leaf distribution over all trees, written into `out`. Trees are
    /// summed in order, so the result does not depend on threading.
    #[inline]
    pub(crate) fn class_vector_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.trees {
            t.accumulate(x, 1.0, out);
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }

    pub fn class_vector(&self, x: &[f64]) -> Result<ClassVector> {
        forest_class_vector(self, x)
    }

    /// Class vectors for every row of `x` (rows × n_classes).
    pub fn class_vectors(&self, x: &Matrix) -> Result<Matrix> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.n_cols(),
            });
        }
        let mut out = Matrix::zeros(x.n_rows(), self.n_classes);
        out.as_mut_slice()
            .par_chunks_mut(self.n_classes)
            .enumerate()
            .for_each(|(i, o)| self.class_vector_into(x.row(i), o));
        Ok(out)
    }

    /// Predicted class per row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.class_vectors(x)?;
        Ok(p.rows().map(argmax).collect())
    }
}

pub fn forest_class_vector(f: &Forest, x: &[f64]) -> Result<ClassVector> {
    if x.len() != f.n_features {
        return Err(Error::DimensionMismatch {
            expected: f.n_features,
            found: x.len(),
        });
    }
    let mut out = vec![0.0; f.n_classes];
    f.class_vector_into(x, &mut out);
    Ok(ClassVector(out))
}

/// Train `cfg.n_trees` trees on `rows`. Tree `i` depends only on
/// `(ds, rows, cfg, i)`, so the forest is identical under any thread count.
pub fn train_forest(ds: &Dataset, rows: &[usize], cfg: &ForestConfig) -> Result<Forest> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("cannot train a forest on zero rows".into()));
    }
    if cfg.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    let trees: Vec<Tree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let tree_cfg = cfg.tree_config(i);
            let mut samples = if cfg.bootstrap {
                let mut rng = rng_from(derive_seed(tree_cfg.seed, stream::BOOTSTRAP));
                (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect()
            } else {
                rows.to_vec()
            };
            grow_on_samples(ds, &mut samples, &tree_cfg)
        })
        .collect();
    Ok(Forest {
        trees,
        config: cfg.clone(),
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
    })
}

/// How training instances get their stacked class vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    /// Each instance is scored by the one fold model that did not train on it.
    #[default]
    OutOfFold,
    /// Each instance gets the mean of the k−1 fold models that did train on
    /// it. Leaks labels; kept for comparison only.
    InFoldAverage,
}

#[derive(Debug, Clone)]
pub struct CvClassVectors {
    /// One row per entry of the input `rows`, in the same order.
    pub vectors: Matrix,
    /// Forest retrained on all rows, used at prediction time.
    pub forest: Forest,
    /// Fold of each position in `rows`.
    pub fold_of: Vec<usize>,
    /// Dataset rows each fold model was trained on.
    pub fold_train_rows: Vec<Vec<usize>>,
}

/// k-fold class vectors for `rows` plus a forest retrained on all of them.
///
/// Folds are stratified by label. Fold model `f` is seeded from
/// `derive_seed(cfg.seed, FOLD_MODEL + f)`; the final forest uses `cfg` as is.
pub fn cv_class_vectors(
    ds: &Dataset,
    rows: &[usize],
    cfg: &ForestConfig,
    k: usize,
    mode: CvMode,
) -> Result<CvClassVectors> {
    let labels: Vec<usize> = rows.iter().map(|&r| ds.labels[r]).collect();
    let folds = stratified_kfold_indices(&labels, k, derive_seed(cfg.seed, stream::FOLDS))?;
    let mut fold_of = vec![0; rows.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &p in fold {
            fold_of[p] = f;
        }
    }

    let mut present = vec![false; ds.n_classes()];
    labels.iter().for_each(|&l| present[l] = true);
    let mut fold_train_rows = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<usize> = (0..rows.len()).filter(|&p| fold_of[p] != f).map(|p| rows[p]).collect();
        let mut seen = vec![false; ds.n_classes()];
        train.iter().for_each(|&r| seen[ds.labels[r]] = true);
        if let Some(class) = (0..ds.n_classes()).find(|&c| present[c] && !seen[c]) {
            return Err(Error::MissingClassInFold { fold: f, class });
        }
        fold_train_rows.push(train);
    }

    let n_classes = ds.n_classes();
    let mut vectors = Matrix::zeros(rows.len(), n_classes);
    for (f, train) in fold_train_rows.iter().enumerate() {
        let fold_cfg = cfg
            .clone()
            .with_seed(derive_seed(cfg.seed, stream::FOLD_MODEL + f as u64));
        let model = train_forest(ds, train, &fold_cfg)?;
        let targets: Vec<usize> = match mode {
            CvMode::OutOfFold => folds[f].clone(),
            CvMode::InFoldAverage => (0..rows.len()).filter(|&p| fold_of[p] != f).collect(),
        };
        let scored: Vec<Vec<f64>> = targets
            .par_iter()
            .map(|&p| {
                let mut out = vec![0.0; n_classes];
                model.class_vector_into(ds.features.row(rows[p]), &mut out);
                out
            })
            .collect();
        for (&p, v) in targets.iter().zip(scored) {
            let dst = vectors.row_mut(p);
            match mode {
                CvMode::OutOfFold => dst.copy_from_slice(&v),
                CvMode::InFoldAverage => dst.iter_mut().zip(&v).for_each(|(d, s)| *d += s),
            }
        }
    }
    if mode == CvMode::InFoldAverage {
        let w = (k - 1) as f64;
        vectors.as_mut_slice().iter_mut().for_each(|v| *v /= w);
    }

    let forest = train_forest(ds, rows, cfg)?;
    Ok(CvClassVectors {
        vectors,
        forest,
        fold_of,
        fold_train_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{grow_tree, TreeNode};
    use approx::assert_abs_diff_eq;

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
        let labels = rows
            .iter()
            .map(|r| usize::from(r[0] + r[1] > 1.0) + usize::from(r[2] > 0.7))
            .collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 3).unwrap()
    }

    #[test]
    fn single_tree_forest_equals_grow_tree() {
        let ds = toy(40, 1);
        let rows: Vec<usize> = (0..40).collect();
        for cfg in [ForestConfig::random_forest(1), ForestConfig::completely_random(1)] {
            let cfg = ForestConfig { bootstrap: false, ..cfg }.with_seed(77);
            let f = train_forest(&ds, &rows, &cfg).unwrap();
            let t = grow_tree(&ds, &rows, &cfg.tree_config(0)).unwrap();
            assert_eq!(f.trees()[0], t);
        }
    }

    #[test]
    fn forest_is_identical_across_thread_counts() {
        let ds = toy(80, 2);
        let rows: Vec<usize> = (0..80).collect();
        let cfg = ForestConfig::random_forest(16).with_seed(5);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| train_forest(&ds, &rows, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn averaging_two_hand_built_trees() {
        let a = Tree::from_nodes(1, 3, &[TreeNode::Leaf { class_counts: vec![2, 0, 0] }]).unwrap();
        let b = Tree::from_nodes(1, 3, &[TreeNode::Leaf { class_counts: vec![1, 1, 0] }]).unwrap();
        let f = Forest::from_trees(vec![a, b], ForestConfig::random_forest(2)).unwrap();
        assert_eq!(f.class_vector(&[0.0]).unwrap().probs(), &[0.75, 0.25, 0.0]);
        assert!(matches!(f.class_vector(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn class_vectors_are_normalized() {
        let ds = toy(60, 3);
        let rows: Vec<usize> = (0..60).collect();
        let f = train_forest(&ds, &rows, &ForestConfig::random_forest(9).with_seed(1)).unwrap();
        let probe = toy(20, 99);
        let cv = f.class_vectors(&probe.features).unwrap();
        for r in cv.rows() {
            assert!(r.iter().all(|&p| p >= 0.0));
            assert_abs_diff_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn each_instance_scored_by_exactly_one_fold_model() {
        let ds = toy(9, 4);
        let ds = Dataset::new(ds.features.clone(), vec![0, 1, 2, 0, 1, 2, 0, 1, 2], 3).unwrap();
        let rows: Vec<usize> = (0..9).collect();
        let out = cv_class_vectors(&ds, &rows, &ForestConfig::completely_random(3), 3, CvMode::OutOfFold).unwrap();
        assert_eq!(out.fold_train_rows.len(), 3);
        for (p, &r) in rows.iter().enumerate() {
            let trained_on: usize = out.fold_train_rows.iter().filter(|t| t.contains(&r)).count();
            assert_eq!(trained_on, 2);
            assert!(!out.fold_train_rows[out.fold_of[p]].contains(&r));
        }
    }

    #[test]
    fn fold_missing_a_class_is_an_error() {
        let ds = toy(10, 5);
        let mut labels = vec![0; 10];
        labels[3] = 1;
        let ds = Dataset::new(ds.features.clone(), labels, 2).unwrap();
        let rows: Vec<usize> = (0..10).collect();
        assert!(matches!(
            cv_class_vectors(&ds, &rows, &ForestConfig::random_forest(2), 3, CvMode::OutOfFold),
            Err(Error::MissingClassInFold { class: 1, .. })
        ));
    }

    /// Separable line with one class-1 point inside the class-0 block.
    fn ambiguous_line() -> (Dataset, usize) {
        let mut xs: Vec<f64> = (0..12).map(f64::from).collect();
        xs.extend((20..32).map(f64::from));
        xs.push(5.5);
        let mut labels = vec![0; 12];
        labels.extend(vec![1; 12]);
        labels.push(1);
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        (Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap(), 24)
    }

    #[test]
    fn out_of_fold_vectors_do_not_leak_labels() {
        let (ds, odd) = ambiguous_line();
        let rows: Vec<usize> = (0..ds.n_instances()).collect();
        let cfg = ForestConfig::completely_random(20).with_seed(3);
        let leaky = cv_class_vectors(&ds, &rows, &cfg, 3, CvMode::InFoldAverage).unwrap();
        let oof = cv_class_vectors(&ds, &rows, &cfg, 3, CvMode::OutOfFold).unwrap();
        // In-fold vectors memorize every label, including the odd point.
        for (p, &r) in rows.iter().enumerate() {
            let v = leaky.vectors.row(p);
            assert_eq!(v[ds.labels[r]], 1.0, "row {r}: {v:?}");
        }
        // The out-of-fold model never saw the odd point and calls it class 0.
        assert!(oof.vectors.row(odd)[1] < 0.5, "{:?}", oof.vectors.row(odd));
        let correct = rows
            .iter()
            .enumerate()
            .filter(|&(p, &r)| oof.vectors.row(p)[ds.labels[r]] == 1.0)
            .count();
        assert!(correct < rows.len());
    }

    #[test]
    fn half_forest_disagreement_shrinks_with_more_trees() {
        let ds = toy(200, 6);
        let rows: Vec<usize> = (0..200).collect();
        let probe = toy(100, 7);
        let disagreement = |n_trees: usize| {
            let f = train_forest(&ds, &rows, &ForestConfig::completely_random(n_trees).with_seed(8)).unwrap();
            let half = n_trees / 2;
            let a = Forest::from_trees(f.trees[..half].to_vec(), f.config.clone()).unwrap();
            let b = Forest::from_trees(f.trees[half..].to_vec(), f.config.clone()).unwrap();
            let (pa, pb) = (a.class_vectors(&probe.features).unwrap(), b.class_vectors(&probe.features).unwrap());
            pa.as_slice()
                .iter()
                .zip(pb.as_slice())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
        };
        assert!(disagreement(100) < disagreement(10));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
        assert_eq!(ClassVector::mean(&[ClassVector::new(vec![0.6, 0.4]), ClassVector::new(vec![0.5, 0.5])]).argmax(), 0);
    }
}
