//! Forest class vectors and k-fold class vectors for stacking.
//!
//! Out-of-fold vectors score each row with the fold model that never saw it;
//! in-fold averages leak the row's own label and look overconfident.
//!
//! cargo run --release --example class_vectors

use gcforest::forest::{cv_class_vectors, train_forest, CvMode, ForestConfig};
use gcforest::metrics::accuracy;
use gcforest::synthetic::{motif_dataset, MotifConfig};

fn main() -> Result<(), gcforest::error::Error> {
    let ds = motif_dataset(&MotifConfig { n_instances: 300, length: 24, motif_len: 4, ..MotifConfig::default() }, 7)?;
    let rows: Vec<usize> = (0..ds.n_instances()).collect();
    let cfg = ForestConfig::random_forest(50).with_seed(3);

    let forest = train_forest(&ds, &rows, &cfg)?;
    println!("class vector of row 0: {:?}", forest.class_vector(ds.features.row(0))?.probs());

    for mode in [CvMode::OutOfFold, CvMode::InFoldAverage] {
        let cv = cv_class_vectors(&ds, &rows, &cfg, 3, mode)?;
        let pred: Vec<usize> = cv.vectors.rows().map(gcforest::forest::argmax).collect();
        println!("{mode:?}: accuracy of stacked vectors on training rows {:.3}", accuracy(&pred, &ds.labels)?);
    }
    Ok(())
}
