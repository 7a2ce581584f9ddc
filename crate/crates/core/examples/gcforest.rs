//! Full gcForest: scanning grains feeding a cascade of cascades, compared
//! with the cascade on raw features.
//!
//! cargo run --release --example gcforest

use gcforest::bench::motif_split;
use gcforest::cascade::{CascadeConfig, LevelConfig, TerminationConfig};
use gcforest::metrics::accuracy;
use gcforest::model::{fit_with_stats, GcConfig, Variant};
use gcforest::scanning::{default_windows, GrainConfig};
use gcforest::synthetic::MotifConfig;

fn main() -> Result<(), gcforest::error::Error> {
    let (train, test) = motif_split(&MotifConfig::default(), 0)?;
    let cascade = CascadeConfig { level: LevelConfig::new(2, 2, 40), termination: TerminationConfig::default() };
    let grains: Vec<GrainConfig> = default_windows(train.n_features())?
        .into_iter()
        .map(|w| GrainConfig::sequence(w).with_trees(40))
        .collect();

    for (name, cfg) in [
        ("grain cycle", GcConfig::cascade_only(cascade.clone()).with_grains(Variant::GrainCycle, grains.clone())),
        ("concatenated", GcConfig::cascade_only(cascade.clone()).with_grains(Variant::Concatenated, grains)),
        ("cascade only", GcConfig::cascade_only(cascade)),
    ] {
        let (model, stats) = fit_with_stats(&train, &cfg)?;
        let pred = model.predict_batch(&test.features)?;
        println!(
            "{name:>13}: test accuracy {:.3}, levels {:?}, scanning {:.1}s",
            accuracy(&pred.labels, &test.labels)?,
            model.level_sources(),
            stats.grain_seconds.iter().fold(0.0, |a, b| a + b)
        );
    }
    Ok(())
}
