//! Binary classification trees: gini-split (random forest style) and
//! completely-random trees.
//!
//! Trees are stored as a flat pre-order node list. The left child of an
//! internal node is always the next node; the right child index is stored.
//! Leaves keep their class counts sparsely (most leaves are pure), which keeps
//! 500-tree forests grown to purity within memory.

use rand::distributions::Open01;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::ClassVector;
use crate::rng::{rng_from, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeKind {
    /// Best gini split among a random candidate subset of features.
    GiniSplit,
    /// Random feature and random threshold at every node.
    CompletelyRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub kind: TreeKind,
    /// Ignored by completely-random trees.
    pub max_features: MaxFeatures,
    /// Maximum depth; the root is depth 0, so a cap of 1 allows one split.
    pub depth_cap: Option<usize>,
    pub seed: u64,
}

impl TreeConfig {
    pub fn gini() -> Self {
        TreeConfig {
            kind: TreeKind::GiniSplit,
            max_features: MaxFeatures::Sqrt,
            depth_cap: None,
            seed: 0,
        }
    }

    pub fn completely_random() -> Self {
        TreeConfig {
            kind: TreeKind::CompletelyRandom,
            max_features: MaxFeatures::Sqrt,
            depth_cap: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_depth_cap(mut self, cap: Option<usize>) -> Self {
        self.depth_cap = cap;
        self
    }
}

/// A candidate split. Instances with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Decrease in gini impurity (zero for random splits).
    pub gain: f64,
}

pub(crate) const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Node {
    pub(crate) threshold: f64,
    /// Split feature, or `LEAF`.
    pub(crate) feature: u32,
    /// Right child for internal nodes, leaf id for leaves.
    pub(crate) child: u32,
}

/// Owned view of one node, for inspection and hand construction.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
    /// CSR offsets into `leaf_counts`; leaf `i` owns `leaf_offsets[i]..leaf_offsets[i + 1]`.
    pub(crate) leaf_offsets: Vec<u32>,
    /// Sparse `(class, count)` pairs, classes ascending within a leaf.
    pub(crate) leaf_counts: Vec<(u32, u32)>,
    pub(crate) n_features: usize,
    pub(crate) n_classes: usize,
}

impl Tree {
    pub(crate) fn empty(n_features: usize, n_classes: usize) -> Self {
        Tree {
            nodes: Vec::new(),
            leaf_offsets: vec![0],
            leaf_counts: Vec::new(),
            n_features,
            n_classes,
        }
    }

    fn push_leaf(&mut self, counts: &[u32]) -> usize {
        let id = self.leaf_offsets.len() - 1;
        for (c, &n) in counts.iter().enumerate() {
            if n > 0 {
                self.leaf_counts.push((c as u32, n));
            }
        }
        self.leaf_offsets.push(self.leaf_counts.len() as u32);
        self.nodes.push(Node {
            threshold: 0.0,
            feature: LEAF,
            child: id as u32,
        });
        self.nodes.len() - 1
    }

    fn push_internal(&mut self, feature: usize, threshold: f64) -> usize {
        self.nodes.push(Node {
            threshold,
            feature: feature as u32,
            child: 0,
        });
        self.nodes.len() - 1
    }

    /// Append a leaf given its sparse `(class, count)` entries.
    pub(crate) fn push_raw_leaf(&mut self, entries: &[(u32, u32)]) {
        let id = self.leaf_offsets.len() - 1;
        self.leaf_counts.extend_from_slice(entries);
        self.leaf_offsets.push(self.leaf_counts.len() as u32);
        self.nodes.push(Node {
            threshold: 0.0,
            feature: LEAF,
            child: id as u32,
        });
    }

    /// Append an internal node with an explicit right child index.
    pub(crate) fn push_raw_internal(&mut self, feature: u32, threshold: f64, right: u32) {
        self.nodes.push(Node {
            threshold,
            feature,
            child: right,
        });
    }

    /// Build a tree from a pre-order node list. Each internal node's left
    /// child must be the next node.
    pub fn from_nodes(n_features: usize, n_classes: usize, nodes: &[TreeNode]) -> Result<Tree> {
        let mut t = Tree::empty(n_features, n_classes);
        for (i, node) in nodes.iter().enumerate() {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features || *left != i + 1 || *right <= *left || *right >= nodes.len() {
                        return Err(Error::InvalidArgument(format!("malformed internal node {i}")));
                    }
                    let idx = t.push_internal(*feature, *threshold);
                    t.nodes[idx].child = *right as u32;
                }
                TreeNode::Leaf { class_counts } => {
                    if class_counts.len() != n_classes || class_counts.iter().all(|&c| c == 0) {
                        return Err(Error::InvalidArgument(format!("malformed leaf {i}")));
                    }
                    t.push_leaf(class_counts);
                }
            }
        }
        t.validate().map_err(Error::InvalidArgument)?;
        Ok(t)
    }

    /// Structural check: pre-order layout with left child at `i + 1`,
    /// right child right after the left subtree, and non-empty leaves.
    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        // Scan backwards keeping completed subtrees on a stack; `ends[i]` is
        // one past the last node of the subtree rooted at `i`.
        let mut stack: Vec<usize> = Vec::new();
        let mut ends = vec![0usize; self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            let node = self.nodes[i];
            if node.feature == LEAF {
                let leaf = node.child as usize;
                if leaf + 1 >= self.leaf_offsets.len() {
                    return Err(format!("leaf id {leaf} out of range"));
                }
                let (a, b) = (self.leaf_offsets[leaf] as usize, self.leaf_offsets[leaf + 1] as usize);
                if a >= b || b > self.leaf_counts.len() {
                    return Err(format!("leaf {leaf} has no counts"));
                }
                if self.leaf_counts[a..b]
                    .iter()
                    .any(|&(c, n)| c as usize >= self.n_classes || n == 0)
                {
                    return Err(format!("leaf {leaf} has invalid counts"));
                }
                ends[i] = i + 1;
            } else {
                if node.feature as usize >= self.n_features {
                    return Err(format!("node {i} splits on feature {} >= {}", node.feature, self.n_features));
                }
                let left = stack.pop().ok_or("malformed pre-order")?;
                let right = stack.pop().ok_or("malformed pre-order")?;
                if left != i + 1 || node.child as usize != right || ends[left] != right {
                    return Err(format!("node {i} has inconsistent children"));
                }
                ends[i] = ends[right];
            }
            stack.push(i);
        }
        if stack.len() != 1 {
            return Err(format!("{} disconnected subtrees", stack.len()));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_offsets.len() - 1
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            let n = self.nodes[i];
            if n.feature != LEAF {
                stack.push((i + 1, d + 1));
                stack.push((n.child as usize, d + 1));
            }
        }
        max
    }

    pub fn node(&self, i: usize) -> TreeNode {
        let n = self.nodes[i];
        if n.feature == LEAF {
            TreeNode::Leaf {
                class_counts: self.dense_counts(n.child as usize),
            }
        } else {
            TreeNode::Internal {
                feature: n.feature as usize,
                threshold: n.threshold,
                left: i + 1,
                right: n.child as usize,
            }
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = TreeNode> + '_ {
        (0..self.nodes.len()).map(|i| self.node(i))
    }

    fn dense_counts(&self, leaf: usize) -> Vec<u32> {
        let mut out = vec![0; self.n_classes];
        for &(c, n) in self.leaf_entries(leaf) {
            out[c as usize] = n;
        }
        out
    }

    #[inline]
    pub(crate) fn leaf_entries(&self, leaf: usize) -> &[(u32, u32)] {
        &self.leaf_counts[self.leaf_offsets[leaf] as usize..self.leaf_offsets[leaf + 1] as usize]
    }

    /// Leaf reached by `x`; `x[f] <= threshold` goes left.
    #[inline]
    pub(crate) fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let n = self.nodes[i];
            if n.feature == LEAF {
                return n.child as usize;
            }
            i = if x[n.feature as usize] <= n.threshold {
                i + 1
            } else {
                n.child as usize
            };
        }
    }

    /// Add `weight ×` the reached leaf's class distribution into `out`.
    #[inline]
    pub(crate) fn accumulate(&self, x: &[f64], weight: f64, out: &mut [f64]) {
        let entries = self.leaf_entries(self.leaf_of(x));
        let total: u32 = entries.iter().map(|&(_, n)| n).sum();
        let scale = weight / f64::from(total);
        for &(c, n) in entries {
            out[c as usize] += f64::from(n) * scale;
        }
    }

    pub fn leaf_class_counts(&self, x: &[f64]) -> Result<Vec<u32>> {
        self.check_dim(x)?;
        Ok(self.dense_counts(self.leaf_of(x)))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Normalized class counts of the leaf `x` falls into.
pub fn leaf_distribution(tree: &Tree, x: &[f64]) -> Result<ClassVector> {
    tree.check_dim(x)?;
    let mut out = vec![0.0; tree.n_classes];
    tree.accumulate(x, 1.0, &mut out);
    Ok(ClassVector::new(out))
}

/// Gini impurity `1 - Σ (c_i / n)²`.
pub fn gini(class_counts: &[u32]) -> Result<f64> {
    let n: u64 = class_counts.iter().map(|&c| u64::from(c)).sum();
    if n == 0 {
        return Err(Error::EmptyCounts);
    }
    let sq: u64 = class_counts.iter().map(|&c| u64::from(c) * u64::from(c)).sum();
    Ok(1.0 - sq as f64 / (n as f64 * n as f64))
}

// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

/// Reusable buffers for split search on one tree.
struct Scratch {
    pairs: Vec<(f64, u32)>,
    left: Vec<u64>,
    right: Vec<u64>,
}

impl Scratch {
    fn new(n_classes: usize) -> Self {
        Scratch {
            pairs: Vec::new(),
            left: vec![0; n_classes],
            right: vec![0; n_classes],
        }
    }
}

/// Exhaustive midpoint search over `features` (must be ascending) for the
/// rows in `samples`. Maximizes `Σ l_c²/n_l + Σ r_c²/n_r`, which is
/// equivalent to minimizing weighted child gini. Ties keep the earliest
/// (lowest feature, lowest threshold) candidate.
fn search_gini(
    ds: &Dataset,
    samples: &[usize],
    node_counts: &[u64],
    features: &[usize],
    scratch: &mut Scratch,
) -> Option<Split> {
    let n = samples.len() as u64;
    let nf = n as f64;
    let sq_total: u64 = node_counts.iter().map(|&c| c * c).sum();
    let parent_score = sq_total as f64 / nf;
    let mut best: Option<(f64, usize, f64)> = None;

    for &f in features {
        scratch.pairs.clear();
        scratch
            .pairs
            .extend(samples.iter().map(|&r| (ds.features.get(r, f), ds.labels[r] as u32)));
        scratch.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let pairs = &scratch.pairs;
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            continue;
        }
        scratch.left.iter_mut().for_each(|c| *c = 0);
        scratch.right.copy_from_slice(node_counts);
        let mut sq_left: u64 = 0;
        let mut sq_right: u64 = sq_total;
        for i in 1..pairs.len() {
            let c = pairs[i - 1].1 as usize;
            sq_left += 2 * scratch.left[c] + 1;
            scratch.left[c] += 1;
            sq_right -= 2 * scratch.right[c] - 1;
            scratch.right[c] -= 1;
            let (lo, hi) = (pairs[i - 1].0, pairs[i].0);
            if lo == hi {
                continue;
            }
            let nl = i as f64;
            let nr = (pairs.len() - i) as f64;
            let score = sq_left as f64 / nl + sq_right as f64 / nr;
            let better = match best {
                None => true,
                Some((b, _, _)) => score > b + 1e-12 * b.abs().max(1.0),
            };
            if better {
                let mut t = lo + (hi - lo) / 2.0;
                if !(t >= lo && t < hi) {
                    t = lo;
                }
                best = Some((score, f, t));
            }
        }
    }

    best.and_then(|(score, feature, threshold)| {
        let gain = (score - parent_score) / nf;
        (gain > MIN_GAIN).then_some(Split {
            feature,
            threshold,
            gain,
        })
    })
}

/// Best gini split of `rows` over `candidate_features`, or `None` when no
/// split strictly reduces impurity.
pub fn best_gini_split(ds: &Dataset, rows: &[usize], candidate_features: &[usize]) -> Result<Option<Split>> {
    if candidate_features.is_empty() {
        return Err(Error::NoCandidateFeatures);
    }
    if let Some(&f) = candidate_features.iter().find(|&&f| f >= ds.n_features()) {
        return Err(Error::InvalidArgument(format!("feature {f} out of range")));
    }
    if rows.len() < 2 {
        return Ok(None);
    }
    let mut counts = vec![0u64; ds.n_classes()];
    for &r in rows {
        counts[ds.labels[r]] += 1;
    }
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut scratch = Scratch::new(ds.n_classes());
    Ok(search_gini(ds, rows, &counts, &features, &mut scratch))
}

/// Uniform choice among features that are non-constant on the rows (via a
/// lazily drawn random permutation), threshold uniform in the open interval
/// `(min, max)`.
fn draw_random_split(ds: &Dataset, samples: &[usize], perm: &mut [usize], rng: &mut Rng) -> Option<Split> {
    let d = perm.len();
    for k in 0..d {
        let j = rng.gen_range(k..d);
        perm.swap(k, j);
        let f = perm[k];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in samples {
            let v = ds.features.get(r, f);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo < hi {
            let u: f64 = rng.sample(Open01);
            let mut t = lo + u * (hi - lo);
            if !(t < hi) {
                t = lo;
            }
            return Some(Split {
                feature: f,
                threshold: t,
                gain: 0.0,
            });
        }
    }
    None
}

/// Completely-random split of `rows`, deterministic in `seed`.
pub fn random_split(ds: &Dataset, rows: &[usize], seed: u64) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let mut perm: Vec<usize> = (0..ds.n_features()).collect();
    draw_random_split(ds, rows, &mut perm, &mut rng_from(seed))
}

/// Grow a tree on `rows` (duplicates allowed, e.g. a bootstrap sample).
///
/// Growth stops at pure nodes, at the depth cap, or where no split exists.
pub fn grow_tree(ds: &Dataset, rows: &[usize], cfg: &TreeConfig) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("cannot grow a tree on zero rows".into()));
    }
    let mut samples = rows.to_vec();
    Ok(grow_on_samples(ds, &mut samples, cfg))
}

pub(crate) fn grow_on_samples(ds: &Dataset, samples: &mut [usize], cfg: &TreeConfig) -> Tree {
    let n_classes = ds.n_classes();
    let n_features = ds.n_features();
    let mut rng = rng_from(cfg.seed);
    let mut tree = Tree::empty(n_features, n_classes);
    let mut scratch = Scratch::new(n_classes);
    let mut perm: Vec<usize> = (0..n_features).collect();
    let mut counts32 = vec![0u32; n_classes];
    let mut counts64 = vec![0u64; n_classes];
    let mut candidates: Vec<usize> = Vec::new();
    let mut rest: Vec<usize> = Vec::new();
    let m = cfg.max_features.resolve(n_features);

    struct Task {
        start: usize,
        end: usize,
        depth: usize,
        parent: Option<usize>,
    }
    let mut stack = vec![Task {
        start: 0,
        end: samples.len(),
        depth: 0,
        parent: None,
    }];

    while let Some(task) = stack.pop() {
        if let Some(p) = task.parent {
            tree.nodes[p].child = tree.nodes.len() as u32;
        }
        let node_rows = &samples[task.start..task.end];
        counts64.iter_mut().for_each(|c| *c = 0);
        for &r in node_rows {
            counts64[ds.labels[r]] += 1;
        }
        let distinct = counts64.iter().filter(|&&c| c > 0).count();
        let capped = cfg.depth_cap.is_some_and(|cap| task.depth >= cap);

        let split = if distinct <= 1 || capped || node_rows.len() < 2 {
            None
        } else {
            match cfg.kind {
                TreeKind::CompletelyRandom => draw_random_split(ds, node_rows, &mut perm, &mut rng),
                TreeKind::GiniSplit => {
                    // Partial Fisher-Yates: perm[..m] becomes the candidate set.
                    for k in 0..m {
                        let j = rng.gen_range(k..n_features);
                        perm.swap(k, j);
                    }
                    candidates.clear();
                    candidates.extend_from_slice(&perm[..m]);
                    candidates.sort_unstable();
                    search_gini(ds, node_rows, &counts64, &candidates, &mut scratch).or_else(|| {
                        // No informative split among the sampled features:
                        // fall back to the remaining ones before giving up.
                        if m == n_features {
                            return None;
                        }
                        rest.clear();
                        rest.extend_from_slice(&perm[m..]);
                        rest.sort_unstable();
                        search_gini(ds, node_rows, &counts64, &rest, &mut scratch)
                    })
                }
            }
        };

        match split {
            None => {
                for (d, s) in counts32.iter_mut().zip(&counts64) {
                    *d = *s as u32;
                }
                tree.push_leaf(&counts32);
            }
            Some(s) => {
                let node_rows = &mut samples[task.start..task.end];
                let mut mid = 0;
                for i in 0..node_rows.len() {
                    if ds.features.get(node_rows[i], s.feature) <= s.threshold {
                        node_rows.swap(i, mid);
                        mid += 1;
                    }
                }
                debug_assert!(mid > 0 && mid < node_rows.len());
                let idx = tree.push_internal(s.feature, s.threshold);
                let mid = task.start + mid;
                stack.push(Task {
                    start: mid,
                    end: task.end,
                    depth: task.depth + 1,
                    parent: Some(idx),
                });
                stack.push(Task {
                    start: task.start,
                    end: mid,
                    depth: task.depth + 1,
                    parent: None,
                });
            }
        }
    }
    tree
}
