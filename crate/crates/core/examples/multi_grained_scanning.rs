//! Sliding-window re-representation of sequences and panels.
//!
//! cargo run --release --example multi_grained_scanning

use gcforest::dataset::{Dataset, Matrix};
use gcforest::scanning::{default_panel_windows, default_windows, fit_grain, GrainConfig};

fn main() -> Result<(), gcforest::error::Error> {
    let (m, d) = (30, 400);
    let x: Vec<f64> = (0..m * d).map(|i| ((i * 7919) % 101) as f64).collect();
    let ds = Dataset::new(Matrix::new(x, m, d)?, (0..m).map(|i| i % 3).collect(), 3)?;

    println!("default windows for d={d}: {:?}", default_windows(d)?);
    for w in [100, 200, 300] {
        let grain = fit_grain(&ds, &GrainConfig::sequence(w).with_trees(5), 1)?;
        println!(
            "window {w}: {} positions x {} classes x {} forests = {} features",
            grain.n_windows(),
            grain.n_classes(),
            grain.forests().len(),
            grain.output_dim()
        );
    }

    let panel = ds.with_panel_shape(20, 20)?;
    println!("default panel windows for 20x20: {:?}", default_panel_windows(20, 20)?);
    let grain = fit_grain(&panel, &GrainConfig::panel(10, 10).with_trees(5).with_subsample(Some(0.25)), 1)?;
    println!("10x10 panel window: {} positions, {} features", grain.n_windows(), grain.output_dim());
    let v = grain.transform(panel.features.row(0))?;
    println!("first position, first forest: {:?}", &v[..3]);
    Ok(())
}
