use gcforest::cascade::{aggregate, train_level, FeaturePlan, LevelConfig};
use gcforest::dataset::{Dataset, Matrix};
use gcforest::forest::{argmax, cv_class_vectors, train_forest, CvMode, ForestConfig};
use gcforest::metrics::{accuracy, confusion};
use gcforest::scanning::{window_count_1d, GrainConfig};
use gcforest::tree::{best_gini_split, grow_tree, TreeConfig, TreeNode};
use proptest::prelude::*;

/// Gini impurity from class proportions, computed independently of the crate.
fn oracle_gini(labels: &[usize], n_classes: usize) -> f64 {
    let n = labels.len() as f64;
    let mut p = vec![0.0; n_classes];
    labels.iter().for_each(|&l| p[l] += 1.0 / n);
    1.0 - p.iter().map(|q| q * q).sum::<f64>()
}

/// Exhaustive search: every feature, every midpoint between consecutive
/// distinct values, first best wins (lowest feature, then lowest threshold).
fn oracle_split(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Option<(usize, f64, f64)> {
    let n = y.len() as f64;
    let parent = oracle_gini(y, n_classes);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| x[i][f] <= t);
            let ly: Vec<usize> = l.iter().map(|&i| y[i]).collect();
            let ry: Vec<usize> = r.iter().map(|&i| y[i]).collect();
            let gain = parent
                - ly.len() as f64 / n * oracle_gini(&ly, n_classes)
                - ry.len() as f64 / n * oracle_gini(&ry, n_classes);
            if best.map_or(true, |(_, _, g)| gain > g + 1e-9) {
                best = Some((f, t, gain));
            }
        }
    }
    best.filter(|&(_, _, g)| g > 1e-12)
}

fn small_dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>, usize)> {
    (1usize..=8, 1usize..=4, 2usize..=3).prop_flat_map(|(n, d, c)| {
        (
            prop::collection::vec(prop::collection::vec((0u8..5).prop_map(f64::from), d), n),
            prop::collection::vec(0..c, n),
            Just(c),
        )
    })
}

fn dataset(x: &[Vec<f64>], y: &[usize], c: usize) -> Dataset {
    Dataset::new(Matrix::from_rows(x).unwrap(), y.to_vec(), c).unwrap()
}

fn random_data(max_n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (4usize..max_n, 1usize..5).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n),
            prop::collection::vec(0usize..3, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn gini_split_matches_brute_force((x, y, c) in small_dataset()) {
        let ds = dataset(&x, &y, c);
        let rows: Vec<usize> = (0..y.len()).collect();
        let all: Vec<usize> = (0..x[0].len()).collect();
        let got = best_gini_split(&ds, &rows, &all).unwrap();
        match oracle_split(&x, &y, c) {
            None => prop_assert!(got.is_none(), "expected no split, got {:?}", got),
            Some((f, t, g)) => {
                let s = got.expect("oracle found a split");
                prop_assert_eq!(s.feature, f);
                prop_assert_eq!(s.threshold, t);
                prop_assert!((s.gain - g).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forest_class_vectors_are_distributions((x, y) in random_data(30), seed in any::<u64>()) {
        let ds = dataset(&x, &y, 3);
        let rows: Vec<usize> = (0..y.len()).collect();
        for cfg in [ForestConfig::random_forest(4), ForestConfig::completely_random(4)] {
            let f = train_forest(&ds, &rows, &cfg.with_seed(seed)).unwrap();
            for r in &x {
                let v = f.class_vector(r).unwrap();
                prop_assert!(v.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
                prop_assert!((v.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn completely_random_trees_are_pure((x, y) in random_data(40), seed in any::<u64>()) {
        // Rows sharing a feature vector must share a label for purity to be reachable.
        let y: Vec<usize> = x
            .iter()
            .map(|r| x.iter().position(|s| s == r).unwrap())
            .map(|first| y[first])
            .collect();
        let ds = dataset(&x, &y, 3);
        let rows: Vec<usize> = (0..y.len()).collect();
        let t = grow_tree(&ds, &rows, &TreeConfig::completely_random().with_seed(seed)).unwrap();
        for node in t.nodes() {
            if let TreeNode::Leaf { class_counts } = node {
                prop_assert_eq!(class_counts.iter().filter(|&&c| c > 0).count(), 1);
            }
        }
    }

    #[test]
    fn out_of_fold_vectors_come_from_models_that_never_saw_the_row(
        (x, y) in random_data(40),
        seed in any::<u64>(),
    ) {
        // Every class needs at least k members for k-fold stratification.
        let y: Vec<usize> = (0..x.len()).map(|i| if i < 3 { 0 } else { y[i] % 2 }).collect();
        let counts = [y.iter().filter(|&&l| l == 0).count(), y.iter().filter(|&&l| l == 1).count()];
        prop_assume!(counts.iter().all(|&c| c >= 3));
        let ds = dataset(&x, &y, 2);
        let rows: Vec<usize> = (0..y.len()).collect();
        let cv = cv_class_vectors(&ds, &rows, &ForestConfig::random_forest(3).with_seed(seed), 3, CvMode::OutOfFold).unwrap();
        for (p, &r) in rows.iter().enumerate() {
            prop_assert!(!cv.fold_train_rows[cv.fold_of[p]].contains(&r));
            let other_folds = (0..3).filter(|&f| f != cv.fold_of[p]).count();
            let trained_on = cv.fold_train_rows.iter().filter(|t| t.contains(&r)).count();
            prop_assert_eq!(trained_on, other_folds);
        }
    }

    #[test]
    fn accuracy_equals_confusion_trace(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
    ) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let m = confusion(&pred, &truth, 4).unwrap();
        prop_assert_eq!(m.total(), pred.len() as u64);
        prop_assert!((m.accuracy() - accuracy(&pred, &truth).unwrap()).abs() < 1e-15);
        let per_class: Vec<u64> = (0..4).map(|c| truth.iter().filter(|&&t| t == c).count() as u64).collect();
        prop_assert_eq!(m.row_sums(), per_class);
    }

    #[test]
    fn argmax_ties_and_scaling(v in prop::collection::vec(0u8..4, 1..8), scale in 0.01f64..100.0) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let i = argmax(&v);
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(i, v.iter().position(|&x| x == max).unwrap());
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        prop_assert_eq!(argmax(&scaled), i);
    }

    #[test]
    fn window_count_formula(d in 1usize..500, w in 1usize..500, stride in 1usize..20) {
        match window_count_1d(d, w, stride) {
            Ok(n) => {
                prop_assert!(w <= d);
                prop_assert!((n - 1) * stride + w <= d);
                prop_assert!(n * stride + w > d);
            }
            Err(_) => prop_assert!(w > d),
        }
    }
}

#[test]
fn grain_output_width_is_windows_times_classes_times_forests() {
    let rows: Vec<Vec<f64>> = (0..12).map(|i| (0..20).map(|j| ((i * j) % 7) as f64).collect()).collect();
    let ds = Dataset::new(Matrix::from_rows(&rows).unwrap(), (0..12).map(|i| i % 3).collect(), 3).unwrap();
    for (w, stride) in [(5, 1), (7, 3), (20, 1)] {
        let g = GrainConfig::sequence(w).with_trees(2).with_stride(stride);
        let t = gcforest::scanning::fit_grain(&ds, &g, 1).unwrap();
        let expected = window_count_1d(20, w, stride).unwrap() * 3 * 2;
        assert_eq!(t.output_dim(), expected);
        let out = t.transform(ds.features.row(0)).unwrap();
        assert_eq!(out.len(), expected);
        for seg in out.chunks(3) {
            assert!((seg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn width_chain_across_levels() {
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 * 5.0 + (i % 4) as f64, (i % 5) as f64]).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let classes: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let cfg = LevelConfig::new(2, 2, 3);
    let plan = FeaturePlan::new(vec!["raw".into()], vec![2]).unwrap();
    let mut prev: Option<Matrix> = None;
    for l in 0..3 {
        let (level, aug) = train_level(&x, prev.as_ref(), &y, &classes, &cfg, l as u64).unwrap();
        assert_eq!(level.input_dim(), plan.input_dim(l, 12));
        assert_eq!(aug.n_cols(), 12);
        for row in aug.rows() {
            let mean = aggregate(row, 3);
            assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prev = Some(aug);
    }
}
