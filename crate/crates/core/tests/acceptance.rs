//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! `GCFOREST_ACCEPTANCE_SCALE=full` runs the UCI criteria with the standard
//! configuration (500-tree level forests, 3 seeds everywhere). The default
//! `desk` scale keeps YEAST and the 2000-tree random forests at full size but
//! uses smaller level forests and a single seed on LETTER and ADULT so the run
//! fits on one core. Thresholds are the same at both scales.
//! `GCFOREST_DATA_DIR` overrides the dataset directory (default `data/` at the
//! workspace root).

use std::path::PathBuf;
use std::time::Instant;

use gcforest::bench::{
    cascade_only_config, load_uci, run_gcforest, run_random_forest, scanning_ablation, BenchSettings,
};
use gcforest::cascade::{
    aggregate, grow_cascade, train_level, CascadeConfig, FeaturePlan, LevelConfig, TerminationConfig,
};
use gcforest::dataset::{Dataset, Matrix};
use gcforest::forest::{argmax, cv_class_vectors, train_forest, CvMode, ForestConfig};
use gcforest::metrics::{accuracy, confusion};
use gcforest::model::{fit, GcConfig, Variant};
use gcforest::persist::{load, save_with_probe, to_bytes, verify_probe};
use gcforest::scanning::{fit_grain, window_count, Geometry, GrainConfig, Window};
use gcforest::synthetic::{motif_dataset, separable_dataset, MotifConfig};
use gcforest::tree::{best_gini_split, grow_tree, TreeConfig, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LETTER_MIN: f64 = 0.964;
const ADULT_MIN: f64 = 0.854;
const YEAST_MIN: f64 = 0.610;
const ABLATION_MIN_GAP: f64 = 0.05;
const ABLATION_MAX_SECONDS: f64 = 600.0;
const RF_TREES: usize = 2000;

struct Scale {
    name: &'static str,
    /// (dataset, level trees, seeds)
    uci: [(&'static str, usize, usize); 3],
}

const DESK: Scale = Scale {
    name: "desk",
    uci: [("letter", 100, 1), ("adult", 100, 1), ("yeast", 500, 3)],
};

const FULL: Scale = Scale {
    name: "full",
    uci: [("letter", 500, 3), ("adult", 500, 3), ("yeast", 500, 3)],
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = Result<Outcome, String>;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn data_dir() -> PathBuf {
    std::env::var_os("GCFOREST_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

struct UciRun {
    level_trees: usize,
    gc: Vec<f64>,
    rf: Vec<f64>,
}

fn run_uci(name: &str, level_trees: usize, n_seeds: usize) -> Result<UciRun, String> {
    let (train, test) = load_uci(name, &data_dir()).map_err(|e| e.to_string())?;
    let mut run = UciRun { level_trees, gc: Vec::new(), rf: Vec::new() };
    for seed in 0..n_seeds as u64 {
        let t0 = Instant::now();
        let gc = run_gcforest(&train, &test, &cascade_only_config(level_trees, seed)).map_err(|e| e.to_string())?;
        let rf = run_random_forest(&train, &test, RF_TREES, seed).map_err(|e| e.to_string())?;
        eprintln!(
            "  {name} seed {seed}: gcforest {} ({} levels), random forest {} [{:.0}s]",
            pct(gc.test_accuracy),
            gc.levels.unwrap_or(0),
            pct(rf.test_accuracy),
            t0.elapsed().as_secs_f64()
        );
        run.gc.push(gc.test_accuracy);
        run.rf.push(rf.test_accuracy);
    }
    Ok(run)
}

fn threshold_check(run: &Result<UciRun, String>, min: f64) -> Check {
    let run = run.as_ref().map_err(Clone::clone)?;
    let m = mean(&run.gc);
    Ok(outcome(
        m >= min,
        format!(
            "mean test accuracy {} over {} seed(s), {}-tree level forests; need >= {}",
            pct(m),
            run.gc.len(),
            run.level_trees,
            pct(min)
        ),
    ))
}

fn versus_forest(runs: &[(&str, Result<UciRun, String>)]) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, run) in runs {
        let run = run.as_ref().map_err(|e| format!("{name}: {e}"))?;
        let (gc, rf) = (mean(&run.gc), mean(&run.rf));
        pass &= gc >= rf;
        parts.push(format!("{name} {} vs {} ({} seed(s))", pct(gc), pct(rf), run.gc.len()));
    }
    Ok(outcome(pass, format!("gcforest vs {RF_TREES}-tree random forest: {}", parts.join("; "))))
}

fn dimensions() -> Check {
    let e = |e: gcforest::error::Error| e.to_string();
    let (m, d) = (6, 400);
    let x: Vec<f64> = (0..m * d).map(|i| ((i * 7919) % 97) as f64).collect();
    let ds = Dataset::new(Matrix::new(x, m, d).map_err(e)?, (0..m).map(|i| i % 3).collect(), 3).map_err(e)?;
    let mut widths = Vec::new();
    for w in [100, 200, 300] {
        widths.push(fit_grain(&ds, &GrainConfig::sequence(w).with_trees(1), 0).map_err(e)?.output_dim());
    }
    let panel = window_count(
        Geometry::Panel { height: 20, width: 20 },
        Window::Panel { height: 10, width: 10 },
        1,
    )
    .map_err(e)?;

    let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![(i % 3) as f64, (i % 5) as f64]).collect();
    let y: Vec<usize> = (0..24).map(|i| i % 3).collect();
    let classes: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let xm = Matrix::from_rows(&rows).map_err(e)?;
    let (level, aug) = train_level(&xm, None, &y, &classes, &LevelConfig::new(2, 2, 2), 0).map_err(e)?;

    let pass = widths == [1806, 1206, 606] && panel == 121 && aug.n_cols() == 12 && level.augmentation_width() == 12;
    Ok(outcome(
        pass,
        format!("widths {widths:?}, panel windows {panel}, augmented features {}", aug.n_cols()),
    ))
}

fn ablation() -> Check {
    let settings = BenchSettings {
        seeds: vec![0, 1, 2],
        level_trees: 100,
        scan_trees: 100,
        rf_trees: 100,
        ..BenchSettings::default()
    };
    let t0 = Instant::now();
    let report = scanning_ablation(&settings).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let ds = report.dataset("motif").ok_or("no motif result")?;
    let full = ds.method("gcforest").ok_or("no gcforest result")?.mean_accuracy();
    let cascade = ds.method("cascade-only").ok_or("no cascade-only result")?.mean_accuracy();
    Ok(outcome(
        full - cascade >= ABLATION_MIN_GAP && secs <= ABLATION_MAX_SECONDS,
        format!(
            "gcforest {} vs cascade-only {} over 3 seeds (gap {:.1} points, need >= {:.1}) in {secs:.0}s (limit {ABLATION_MAX_SECONDS:.0}s)",
            pct(full),
            pct(cascade),
            100.0 * (full - cascade),
            100.0 * ABLATION_MIN_GAP
        ),
    ))
}

/// Exhaustive gini split search, independent of the crate.
fn oracle_split(x: &[Vec<f64>], y: &[usize], c: usize) -> Option<(usize, f64)> {
    let gini = |idx: &[usize]| {
        let n = idx.len() as f64;
        let mut p = vec![0.0; c];
        idx.iter().for_each(|&i| p[y[i]] += 1.0 / n);
        1.0 - p.iter().map(|q| q * q).sum::<f64>()
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let parent = gini(&all);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut v: Vec<f64> = x.iter().map(|r| r[f]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        for w in v.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[i][f] <= t);
            let n = y.len() as f64;
            let gain = parent - l.len() as f64 / n * gini(&l) - r.len() as f64 / n * gini(&r);
            if best.map_or(true, |b| gain > b.2 + 1e-9) {
                best = Some((f, t, gain));
            }
        }
    }
    best.filter(|b| b.2 > 1e-12).map(|b| (b.0, b.1))
}

fn invariants() -> Check {
    let e = |e: gcforest::error::Error| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures: Vec<String> = Vec::new();

    // Gini split against brute force on datasets up to 8 x 4.
    for case in 0..300 {
        let (n, d, c) = (rng.gen_range(1..=8), rng.gen_range(1..=4), rng.gen_range(2..=3));
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0..5) as f64).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let ds = Dataset::new(Matrix::from_rows(&x).map_err(e)?, y.clone(), c).map_err(e)?;
        let got = best_gini_split(&ds, &(0..n).collect::<Vec<_>>(), &(0..d).collect::<Vec<_>>()).map_err(e)?;
        if got.map(|s| (s.feature, s.threshold)) != oracle_split(&x, &y, c) {
            failures.push(format!("gini oracle case {case}"));
            break;
        }
    }

    // Normalization, completely-random purity, out-of-fold leakage.
    let ds = motif_dataset(&MotifConfig { n_instances: 90, length: 12, motif_len: 3, ..MotifConfig::default() }, 5)
        .map_err(e)?;
    let rows: Vec<usize> = (0..ds.n_instances()).collect();
    let forest = train_forest(&ds, &rows, &ForestConfig::completely_random(10).with_seed(3)).map_err(e)?;
    let vectors = forest.class_vectors(&ds.features).map_err(e)?;
    if vectors.rows().any(|r| (r.iter().sum::<f64>() - 1.0).abs() > 1e-12 || r.iter().any(|&p| p < 0.0)) {
        failures.push("class vector normalization".into());
    }
    let tree = grow_tree(&ds, &rows, &TreeConfig::completely_random().with_seed(9)).map_err(e)?;
    if tree.nodes().any(|n| matches!(n, TreeNode::Leaf { class_counts } if class_counts.iter().filter(|&&c| c > 0).count() != 1)) {
        failures.push("completely-random purity".into());
    }
    let cv = cv_class_vectors(&ds, &rows, &ForestConfig::random_forest(5).with_seed(1), 3, CvMode::OutOfFold).map_err(e)?;
    if rows.iter().enumerate().any(|(p, r)| cv.fold_train_rows[cv.fold_of[p]].contains(r)) {
        failures.push("out-of-fold leakage".into());
    }

    // Width chain and per-level aggregate normalization.
    let plan = FeaturePlan::new(vec!["raw".into()], vec![ds.n_features()]).map_err(e)?;
    let cfg = LevelConfig::new(2, 2, 3);
    let mut prev: Option<Matrix> = None;
    for l in 0..3 {
        let (level, aug) = train_level(&ds.features, prev.as_ref(), &ds.labels, &ds.classes, &cfg, l).map_err(e)?;
        if level.input_dim() != plan.input_dim(l as usize, 12)
            || aug.rows().any(|r| (aggregate(r, 3).iter().sum::<f64>() - 1.0).abs() > 1e-12)
        {
            failures.push(format!("width chain at level {}", l + 1));
        }
        prev = Some(aug);
    }

    // Argmax ties go to the lowest index; accuracy matches the confusion trace.
    if argmax(&[0.25, 0.5, 0.5, 0.1]) != 1 || argmax(&[0.0, 0.0]) != 0 {
        failures.push("argmax tie rule".into());
    }
    let pred: Vec<usize> = (0..50).map(|_| rng.gen_range(0..3)).collect();
    let truth: Vec<usize> = (0..50).map(|_| rng.gen_range(0..3)).collect();
    let cm = confusion(&pred, &truth, 3).map_err(e)?;
    if cm.trace() as f64 / cm.total() as f64 != accuracy(&pred, &truth).map_err(e)? {
        failures.push("accuracy vs confusion trace".into());
    }

    // Same config and seed give identical model bytes at any thread count.
    let gc = scanned_config(7);
    let bytes = |threads: usize| -> Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| fit(&ds, &gc).map(|m| to_bytes(&m))).map_err(e)
    };
    let one = bytes(1)?;
    if one != bytes(4)? || one != bytes(1)? {
        failures.push("determinism across thread counts".into());
    }

    let n_checks = 8;
    Ok(outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{n_checks} invariant groups hold")
        } else {
            format!("violated: {}", failures.join(", "))
        },
    ))
}

fn scanned_config(seed: u64) -> GcConfig {
    let cascade = CascadeConfig {
        level: LevelConfig::new(1, 1, 4),
        termination: TerminationConfig { tolerance: -1.0, max_levels: 3, ..TerminationConfig::default() },
    };
    GcConfig::cascade_only(cascade)
        .with_grains(
            Variant::GrainCycle,
            vec![GrainConfig::sequence(3).with_trees(3), GrainConfig::sequence(6).with_trees(3)],
        )
        .with_seed(seed)
}

fn round_trip() -> Check {
    let e = |e: gcforest::error::Error| e.to_string();
    let data = MotifConfig { n_instances: 150, length: 24, motif_len: 4, ..MotifConfig::default() };
    let ds = motif_dataset(&data, 1).map_err(e)?;
    let model = fit(&ds, &scanned_config(1)).map_err(e)?;
    let probe = motif_dataset(&MotifConfig { n_instances: 100, ..data }, 101).map_err(e)?.features;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.gcf");
    let probe_file = save_with_probe(&model, &path, &probe).map_err(e)?;
    let back = load(&path).map_err(e)?;
    let a = model.predict_batch(&probe).map_err(e)?;
    let b = back.predict_batch(&probe).map_err(e)?;
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mismatched = verify_probe(&back, &probe_file).map_err(e)?.len();
    Ok(outcome(
        model.transformers().len() >= 2
            && model.n_levels() >= 3
            && probe.n_rows() == 100
            && bits(&a.probs) == bits(&b.probs)
            && mismatched == 0,
        format!(
            "{} grains, {} levels, {} probe rows, {mismatched} rows differ after reload",
            model.transformers().len(),
            model.n_levels(),
            probe.n_rows()
        ),
    ))
}

fn termination() -> Check {
    let e = |e: gcforest::error::Error| e.to_string();
    let mut pass = true;
    let mut runs = 0;
    for patience in [1, 2, 3] {
        for seed in 0..3 {
            let ds = separable_dataset(80, 3, seed).map_err(e)?;
            let plan = FeaturePlan::new(vec!["raw".into()], vec![ds.n_features()]).map_err(e)?;
            let cfg = CascadeConfig {
                level: LevelConfig::new(2, 2, 10),
                termination: TerminationConfig { patience, ..TerminationConfig::default() },
            };
            let (m, _) = grow_cascade(&[ds.features.clone()], &ds.labels, &ds.classes, plan, &cfg, seed).map_err(e)?;
            let t = m.termination();
            let first_perfect = match t.accuracies.iter().position(|&a| a == 1.0) {
                Some(p) => p + 1,
                None => return Ok(outcome(false, format!("seed {seed} never reached accuracy 1.0"))),
            };
            pass &= t.grown_levels <= first_perfect + patience
                && t.chosen_levels == argmax(&t.accuracies) + 1
                && m.n_levels() == t.chosen_levels;
            runs += 1;
        }
    }
    Ok(outcome(pass, format!("{runs} runs over patience 1..3 stop within patience and keep the best level")))
}

fn main() {
    let scale = match std::env::var("GCFOREST_ACCEPTANCE_SCALE").as_deref() {
        Ok("full") => FULL,
        _ => DESK,
    };
    eprintln!("acceptance scale: {}, data: {}", scale.name, data_dir().display());

    let uci: Vec<(&str, Result<UciRun, String>)> = scale
        .uci
        .iter()
        .map(|&(name, trees, seeds)| (name, run_uci(name, trees, seeds)))
        .collect();

    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("1 letter accuracy", Box::new(|| threshold_check(&uci[0].1, LETTER_MIN))),
        ("2 adult accuracy", Box::new(|| threshold_check(&uci[1].1, ADULT_MIN))),
        ("3 yeast accuracy", Box::new(|| threshold_check(&uci[2].1, YEAST_MIN))),
        ("4 beats random forest", Box::new(|| versus_forest(&uci))),
        ("5 dimensional arithmetic", Box::new(dimensions)),
        ("6 scanning ablation", Box::new(ablation)),
        ("7 invariant suite", Box::new(invariants)),
        ("8 save/load round trip", Box::new(round_trip)),
        ("9 termination contract", Box::new(termination)),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(err) => (false, format!("error: {err}")),
        };
        failed += usize::from(!pass);
        println!("{} criterion {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
