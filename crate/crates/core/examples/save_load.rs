//! Save a model with its probe file, load it back and verify bit-exact
//! predictions. A negative tolerance keeps every level up to `max_levels`.
//!
//! cargo run --release --example save_load -- /tmp/model.gcf

use gcforest::cascade::{CascadeConfig, LevelConfig, TerminationConfig};
use gcforest::model::{fit, GcConfig, Variant};
use gcforest::persist::{load, save_with_probe, verify_probe};
use gcforest::scanning::GrainConfig;
use gcforest::synthetic::{motif_dataset, MotifConfig};

fn main() -> Result<(), gcforest::error::Error> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "model.gcf".into());
    let ds = motif_dataset(&MotifConfig { n_instances: 200, length: 24, motif_len: 4, ..MotifConfig::default() }, 1)?;
    let cfg = GcConfig::cascade_only(CascadeConfig { level: LevelConfig::new(1, 1, 10), termination: TerminationConfig { tolerance: -1.0, max_levels: 3, ..TerminationConfig::default() } })
        .with_grains(Variant::GrainCycle, vec![GrainConfig::sequence(4).with_trees(10), GrainConfig::sequence(8).with_trees(10)]);
    let model = fit(&ds, &cfg)?;

    let probe = ds.features.select_rows(&(0..100).collect::<Vec<_>>());
    let probe_path = save_with_probe(&model, &path, &probe)?;
    println!("saved {path} and {}", probe_path.display());

    let back = load(&path)?;
    let bad = verify_probe(&back, &probe_path)?;
    println!("reloaded: {} levels, {} probe rows differ", back.n_levels(), bad.len());
    Ok(())
}
