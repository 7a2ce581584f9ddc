//! Parse a TOML run config and show the model config it produces.
//!
//! cargo run --example run_config -- configs/yeast.toml

use gcforest::config::RunConfig;
use gcforest::dataset::{load_csv, CsvSchema};

fn main() -> Result<(), gcforest::error::Error> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/yeast.toml".into());
    let cfg = RunConfig::load(&path)?;
    println!("train file: {}", cfg.train.display());
    let train = load_csv(&cfg.train, &CsvSchema::label(cfg.label_column.clone()))?;
    let gc = cfg.gc_config(&train)?;
    println!("variant {:?}, {} grain(s)", gc.variant, gc.grains.len());
    println!(
        "{} forests per level ({} trees), {}-fold {:?} class vectors",
        gc.cascade.level.forests.len(),
        gc.cascade.level.forests[0].n_trees,
        gc.cascade.level.k_folds,
        gc.cascade.level.cv_mode
    );
    println!("termination: {:?}", gc.cascade.termination);

    match RunConfig::from_toml_str("level_tress = 5", std::path::Path::new(".")) {
        Err(e) => println!("a typo is rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
