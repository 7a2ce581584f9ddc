//! Multi-grained scanning on/off on synthetic window-local data.
//!
//! cargo run --release --example scanning_ablation -- [level_trees] [scan_trees] [seeds]

use gcforest::bench::{scanning_ablation, BenchSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let settings = BenchSettings {
        level_trees: args.first().copied().unwrap_or(100),
        scan_trees: args.get(1).copied().unwrap_or(100),
        rf_trees: 500,
        seeds: (0..args.get(2).copied().unwrap_or(3) as u64).collect(),
        ..BenchSettings::default()
    };
    print!("{}", scanning_ablation(&settings)?);
    Ok(())
}
