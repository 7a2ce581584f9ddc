//! gcForest against a random forest on LETTER, ADULT and YEAST.
//!
//! Needs the CSVs from scripts/prepare_datasets.py in data/.
//!
//! cargo run --release --example uci_benchmark -- yeast 100

use gcforest::bench::{uci_lowdim, BenchSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let datasets = std::env::args().nth(1).unwrap_or_else(|| "yeast".into());
    let trees: usize = std::env::args().nth(2).map_or(Ok(500), |s| s.parse())?;
    let settings = BenchSettings {
        datasets: datasets.split(',').map(String::from).collect(),
        level_trees: trees,
        rf_trees: 4 * trees,
        seeds: vec![0],
        ..BenchSettings::default()
    };
    print!("{}", uci_lowdim(&settings)?);
    Ok(())
}
