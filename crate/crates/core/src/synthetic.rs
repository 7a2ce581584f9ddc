//! Seeded sequence data whose class lives in a short local motif.
//!
//! Every example is background noise with one motif written at a uniformly
//! random offset. The class motifs are permutations of one shared set of
//! values, so every class puts the same values into the sequence and only
//! their local order tells classes apart. A fixed raw feature position
//! carries almost no class signal; a window that covers the motif does.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq)]
pub struct MotifConfig {
    pub n_instances: usize,
    pub length: usize,
    pub n_classes: usize,
    pub motif_len: usize,
    /// Standard deviation of the background and of the jitter added to the motif.
    pub noise: f64,
}

impl Default for MotifConfig {
    fn default() -> Self {
        MotifConfig {
            n_instances: 600,
            length: 64,
            n_classes: 3,
            motif_len: 8,
            noise: 0.5,
        }
    }
}

/// Motif values shared by all classes: `±1, ±2, ...`, length `motif_len`.
fn base_motif(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let mag = (i / 2 + 1) as f64;
            if i % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// One permutation of the shared values per class, distinct across classes.
pub fn class_motifs(cfg: &MotifConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(derive_seed(seed, 0));
    let base = base_motif(cfg.motif_len);
    let mut motifs: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_classes);
    while motifs.len() < cfg.n_classes {
        let mut m = base.clone();
        m.shuffle(&mut rng);
        if !motifs.contains(&m) {
            motifs.push(m);
        }
    }
    motifs
}

/// Generate a dataset; labels cycle through the classes so they are balanced.
pub fn motif_dataset(cfg: &MotifConfig, seed: u64) -> Result<Dataset> {
    if cfg.motif_len < 2 || cfg.motif_len > cfg.length || cfg.n_classes < 2 {
        return Err(Error::InvalidArgument(
            "motif must fit the sequence and need at least two classes".into(),
        ));
    }
    let motifs = class_motifs(cfg, seed);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng_from(derive_seed(seed, 1));
    let mut data = Vec::with_capacity(cfg.n_instances * cfg.length);
    let mut labels = Vec::with_capacity(cfg.n_instances);
    for i in 0..cfg.n_instances {
        let class = i % cfg.n_classes;
        let mut x: Vec<f64> = (0..cfg.length).map(|_| noise.sample(&mut rng)).collect();
        let at = rng.gen_range(0..=cfg.length - cfg.motif_len);
        for (k, &v) in motifs[class].iter().enumerate() {
            x[at + k] = v + noise.sample(&mut rng);
        }
        data.extend_from_slice(&x);
        labels.push(class);
    }
    let classes = (0..cfg.n_classes).map(|c| format!("m{c}")).collect();
    Dataset::with_classes(Matrix::new(data, cfg.n_instances, cfg.length)?, labels, classes)
}

/// Two classes split by feature 0 (`x0 < 0` vs `x0 > 1`) plus
/// `n_noise` uniform noise features. Any tree reaches perfect accuracy, so
/// a cascade saturates at its first level.
pub fn separable_dataset(n_instances: usize, n_noise: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from(seed);
    let d = n_noise + 1;
    let mut data = Vec::with_capacity(n_instances * d);
    let mut labels = Vec::with_capacity(n_instances);
    for i in 0..n_instances {
        let class = i % 2;
        let x0: f64 = rng.gen_range(0.0..1.0);
        data.push(if class == 0 { -1.0 - x0 } else { 2.0 + x0 });
        data.extend((0..n_noise).map(|_| rng.gen_range(0.0..1.0)));
        labels.push(class);
    }
    Dataset::new(Matrix::new(data, n_instances, d)?, labels, 2)
}
