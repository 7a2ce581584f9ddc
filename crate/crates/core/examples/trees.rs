//! Grow a gini tree and a completely-random tree and print their nodes.
//!
//! cargo run --example trees

use gcforest::dataset::{Dataset, Matrix};
use gcforest::tree::{best_gini_split, gini, grow_tree, leaf_distribution, TreeConfig, TreeNode};

fn main() -> Result<(), gcforest::error::Error> {
    let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 3.0], [3.0, 4.0], [4.0, 1.0], [5.0, 2.0], [6.0, 2.5]])?;
    let ds = Dataset::new(x, vec![0, 0, 0, 1, 1, 1], 2)?;
    let rows: Vec<usize> = (0..ds.n_instances()).collect();

    println!("root gini: {:.3}", gini(&[3, 3])?);
    if let Some(s) = best_gini_split(&ds, &rows, &[0, 1])? {
        println!("best split: x{} <= {} (gain {:.3})", s.feature, s.threshold, s.gain);
    }

    for (name, cfg) in [
        ("gini", TreeConfig::gini().with_seed(1)),
        ("completely random", TreeConfig::completely_random().with_seed(1)),
    ] {
        let tree = grow_tree(&ds, &rows, &cfg)?;
        println!("\n{name} tree: {} nodes, depth {}", tree.n_nodes(), tree.depth());
        for (i, node) in tree.nodes().enumerate() {
            match node {
                TreeNode::Internal { feature, threshold, right, .. } => {
                    println!("  {i}: x{feature} <= {threshold:.3} ? {} : {right}", i + 1)
                }
                TreeNode::Leaf { class_counts } => println!("  {i}: leaf {class_counts:?}"),
            }
        }
        println!("  class vector at [3.5, 3.0]: {:?}", leaf_distribution(&tree, &[3.5, 3.0])?.probs());
    }
    Ok(())
}
