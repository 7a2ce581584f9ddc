//! Grow a cascade and inspect its termination record.
//!
//! cargo run --release --example cascade

use gcforest::cascade::{grow_cascade, CascadeConfig, FeaturePlan, LevelConfig, TerminationConfig};
use gcforest::synthetic::{motif_dataset, MotifConfig};

fn main() -> Result<(), gcforest::error::Error> {
    let ds = motif_dataset(&MotifConfig { n_instances: 400, length: 16, motif_len: 4, ..MotifConfig::default() }, 2)?;
    let plan = FeaturePlan::new(vec!["raw".into()], vec![ds.n_features()])?;
    let cfg = CascadeConfig {
        level: LevelConfig::new(2, 2, 50),
        termination: TerminationConfig { patience: 2, ..TerminationConfig::default() },
    };
    let (model, stats) = grow_cascade(&[ds.features.clone()], &ds.labels, &ds.classes, plan, &cfg, 5)?;
    let t = model.termination();
    for (l, (est, train)) in t.accuracies.iter().zip(&t.training_accuracies).enumerate() {
        println!(
            "level {}: estimating {est:.3}, growing out-of-fold {train:.3}, {:.1}s",
            l + 1,
            stats.level_seconds[l]
        );
    }
    println!("grown {} levels, kept {}", t.grown_levels, t.chosen_levels);

    let x = ds.features.row(0);
    for v in model.cascade_class_vectors(&[x])? {
        println!("last-level forest vector: {:?}", v.probs());
    }
    let (label, mean) = model.predict(&[x])?;
    println!("prediction {} ({:?}), truth {}", ds.classes[label], mean.probs(), ds.classes[ds.labels[0]]);
    Ok(())
}
