//! Regression forest whose leaves keep the mean, population variance and
//! count of their training targets. A prediction combines the per-tree leaf
//! statistics with the law of total variance:
//!
//! ```text
//! mean     = (1/B) Σ μ_i
//! variance = (1/B) Σ σ²_i + (1/B) Σ (μ_i - mean)²
//! ```
//!
//! Trees are grown greedily by variance reduction. Candidate thresholds are
//! midpoints between adjacent distinct sorted feature values; a sample goes
//! left when `x[feature] <= threshold`. Ties prefer the lowest feature index,
//! then the lowest threshold.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{pivot_mean, Scalar};
use crate::seed::{derived_rng, Label, Rng};

/// Gaussian predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGaussian<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> PredictiveGaussian<T> {
    pub fn new(mean: T, variance: T) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < T::zero() {
            return Err(Error::invalid(format!(
                "invalid Gaussian N({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }
}

/// Draws from `N(mean, variance)`. A zero variance returns the mean exactly
/// and consumes no randomness.
pub fn sample_prediction<T: Scalar>(g: &PredictiveGaussian<T>, rng: &mut Rng) -> T {
    if g.variance == T::zero() {
        return g.mean;
    }
    let z: f64 = StandardNormal.sample(rng);
    g.mean + g.std_dev() * T::of(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafStats<T> {
    pub mean: T,
    pub variance: T,
    pub count: usize,
}

impl<T: Scalar> LeafStats<T> {
    /// Mean and population variance of `targets` (non-empty).
    pub fn from_targets(targets: impl Iterator<Item = T> + Clone) -> Self {
        let (mean, count) = pivot_mean(targets.clone()).expect("leaf needs at least one target");
        let n = T::of_usize(count);
        let variance = targets.map(|y| (y - mean) * (y - mean)).sum::<T>() / n;
        Self { mean, variance, count }
    }
}

/// Tree node. Nodes are stored in preorder: the left child of a split at
/// index `i` is `i + 1`, the right child is `right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<T> {
    Split { feature: usize, threshold: T, right: usize },
    Leaf(LeafStats<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegressionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn leaf(stats: LeafStats<T>) -> Self {
        Self {
            nodes: vec![Node::Leaf(stats)],
        }
    }

    /// Leaf reached by `x`.
    pub fn leaf_for(&self, x: &[T]) -> &LeafStats<T> {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(stats) => return stats,
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { i + 1 } else { *right };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> (usize, usize) {
            // returns (depth below i, index one past the subtree)
            match &nodes[i] {
                Node::Leaf(_) => (0, i + 1),
                Node::Split { right, .. } => {
                    let (dl, _) = walk(nodes, i + 1);
                    let (dr, end) = walk(nodes, *right);
                    (1 + dl.max(dr), end)
                }
            }
        }
        walk(&self.nodes, 0).0
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    /// Checks preorder layout, child indices, finite thresholds, feature
    /// bounds and leaf invariants.
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        fn check<T: Scalar>(nodes: &[Node<T>], i: usize, feature_dim: usize) -> Result<usize> {
            let node = nodes
                .get(i)
                .ok_or_else(|| Error::data(format!("tree references missing node {i}")))?;
            match node {
                Node::Leaf(s) => {
                    if s.count == 0 || !s.mean.is_finite() || !s.variance.is_finite() || s.variance < T::zero() {
                        return Err(Error::data(format!("invalid leaf statistics at node {i}")));
                    }
                    Ok(i + 1)
                }
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    if *feature >= feature_dim || !threshold.is_finite() {
                        return Err(Error::data(format!("invalid split at node {i}")));
                    }
                    let left_end = check(nodes, i + 1, feature_dim)?;
                    if left_end != *right {
                        return Err(Error::data(format!(
                            "node {i}: right child {right} does not follow left subtree ending at {left_end}"
                        )));
                    }
                    check(nodes, *right, feature_dim)
                }
            }
        }
        let end = check(&self.nodes, 0, feature_dim)?;
        if end != self.nodes.len() {
            return Err(Error::data("tree has unreachable nodes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestTrainConfig {
    pub num_trees: usize,
    /// Maximum number of splits on any root-to-leaf path.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn as split candidates at each node.
    pub feature_subsample: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestTrainConfig {
    fn default() -> Self {
        Self {
            num_trees: 100,
            max_depth: 64,
            min_samples_leaf: 1,
            feature_subsample: 1.0 / 3.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::invalid("num_trees must be positive"));
        }
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be positive"));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::invalid(format!(
                "feature_subsample must lie in (0, 1], got {}",
                self.feature_subsample
            )));
        }
        Ok(())
    }

    /// Number of candidate features per node for `dim` features.
    pub fn candidates_per_node(&self, dim: usize) -> usize {
        ((self.feature_subsample * dim as f64).ceil() as usize).clamp(1, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest<T> {
    pub feature_dim: usize,
    pub trees: Vec<RegressionTree<T>>,
    pub train_config: ForestTrainConfig,
}

impl<T: Scalar> RegressionForest<T> {
    /// Assembles a forest from already-built trees.
    pub fn from_trees(trees: Vec<RegressionTree<T>>, feature_dim: usize, train_config: ForestTrainConfig) -> Result<Self> {
        let forest = Self {
            feature_dim,
            trees,
            train_config,
        };
        forest.validate()?;
        Ok(forest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::data("forest has no trees"));
        }
        if self.feature_dim == 0 {
            return Err(Error::data("forest feature dimension must be positive"));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.feature_dim))
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Total-variance Gaussian at `x`.
    pub fn predict(&self, x: &[T]) -> Result<PredictiveGaussian<T>> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("forest input contains a non-finite value"));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[T]) -> PredictiveGaussian<T> {
        let b = T::of_usize(self.trees.len());
        let leaves: Vec<&LeafStats<T>> = self.trees.iter().map(|t| t.leaf_for(x)).collect();
        let (mean, _) = pivot_mean(leaves.iter().map(|l| l.mean)).expect("forest has trees");
        let var_sum = leaves.iter().map(|l| l.variance).sum::<T>();
        let spread = leaves
            .iter()
            .map(|l| {
                let d = l.mean - mean;
                d * d
            })
            .sum::<T>();
        PredictiveGaussian {
            mean,
            variance: var_sum / b + spread / b,
        }
    }
}

/// Same as [`RegressionForest::predict`].
pub fn forest_predict<T: Scalar>(forest: &RegressionForest<T>, x: &[T]) -> Result<PredictiveGaussian<T>> {
    forest.predict(x)
}

/// Fits a forest on rows `features[i] -> targets[i]`.
///
/// Tree `i` draws its bootstrap resample and feature subsets from a stream
/// derived from `(config.seed, i)`, so trees are built in parallel without
/// affecting the result.
pub fn fit_forest<T: Scalar>(features: &[Vec<T>], targets: &[T], config: &ForestTrainConfig) -> Result<RegressionForest<T>> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::data("empty training set"));
    }
    if features.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: targets.len(),
        });
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::data("training features have zero columns"));
    }
    for (i, row) in features.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::data(format!("row {i} has {} features, expected {dim}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) || !targets[i].is_finite() {
            return Err(Error::data(format!("row {i} contains a non-finite value")));
        }
    }

    let trees = (0..config.num_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = derived_rng(config.seed, &[Label::Str("tree"), Label::from(i)]);
            TreeBuilder {
                features,
                targets,
                config,
                dim,
            }
            .build(&mut rng)
        })
        .collect();
    Ok(RegressionForest {
        feature_dim: dim,
        trees,
        train_config: config.clone(),
    })
}

struct TreeBuilder<'a, T> {
    features: &'a [Vec<T>],
    targets: &'a [T],
    config: &'a ForestTrainConfig,
    dim: usize,
}

struct Task {
    rows: Vec<usize>,
    depth: usize,
    /// Split node whose `right` field should point at this task's node.
    right_of: Option<usize>,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    sse: T,
}

impl<T: Scalar> TreeBuilder<'_, T> {
    fn build(&self, rng: &mut Rng) -> RegressionTree<T> {
        let n = self.targets.len();
        let rows: Vec<usize> = if self.config.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };

        let mut nodes = Vec::new();
        let mut stack = vec![Task {
            rows,
            depth: 0,
            right_of: None,
        }];
        while let Some(task) = stack.pop() {
            let id = nodes.len();
            if let Some(parent) = task.right_of {
                if let Node::Split { right, .. } = &mut nodes[parent] {
                    *right = id;
                }
            }
            match self.find_split(&task.rows, task.depth, rng) {
                Some(best) => {
                    let (left, right): (Vec<usize>, Vec<usize>) = task
                        .rows
                        .iter()
                        .partition(|&&r| self.features[r][best.feature] <= best.threshold);
                    nodes.push(Node::Split {
                        feature: best.feature,
                        threshold: best.threshold,
                        right: usize::MAX,
                    });
                    stack.push(Task {
                        rows: right,
                        depth: task.depth + 1,
                        right_of: Some(id),
                    });
                    stack.push(Task {
                        rows: left,
                        depth: task.depth + 1,
                        right_of: None,
                    });
                }
                None => {
                    let stats = LeafStats::from_targets(task.rows.iter().map(|&r| self.targets[r]));
                    nodes.push(Node::Leaf(stats));
                }
            }
        }
        RegressionTree { nodes }
    }

    fn find_split(&self, rows: &[usize], depth: usize, rng: &mut Rng) -> Option<BestSplit<T>> {
        let min_leaf = self.config.min_samples_leaf;
        if depth >= self.config.max_depth || rows.len() < 2 * min_leaf {
            return None;
        }
        let first = self.targets[rows[0]];
        if rows.iter().all(|&r| self.targets[r] == first) {
            return None;
        }

        let mut order: Vec<usize> = (0..self.dim).collect();
        order.shuffle(rng);
        let m = self.config.candidates_per_node(self.dim);
        let mut candidates = order[..m].to_vec();
        candidates.sort_unstable();

        let mut pairs = Vec::with_capacity(rows.len());
        let best = self.best_among(&candidates, rows, &mut pairs);
        if best.is_some() {
            return best;
        }
        // none of the drawn features can separate these rows; keep drawing
        for &f in &order[m..] {
            if let Some(b) = self.best_among(&[f], rows, &mut pairs) {
                return Some(b);
            }
        }
        None
    }

    fn best_among(&self, features: &[usize], rows: &[usize], pairs: &mut Vec<(T, T)>) -> Option<BestSplit<T>> {
        let min_leaf = self.config.min_samples_leaf;
        let n = rows.len();
        let mut best: Option<BestSplit<T>> = None;
        for &f in features {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.features[r][f], self.targets[r])));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

            let (total, total_sq) = pairs.iter().fold((T::zero(), T::zero()), |(s, q), &(_, y)| (s + y, q + y * y));
            let mut left = T::zero();
            let mut left_sq = T::zero();
            for i in 1..n {
                let y = pairs[i - 1].1;
                left += y;
                left_sq += y * y;
                if i < min_leaf || n - i < min_leaf || pairs[i - 1].0 == pairs[i].0 {
                    continue;
                }
                let nl = T::of_usize(i);
                let nr = T::of_usize(n - i);
                let right = total - left;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left * left / nl) + (right_sq - right * right / nr);
                if best.as_ref().is_none_or(|b| sse < b.sse) {
                    let (lo, hi) = (pairs[i - 1].0, pairs[i].0);
                    let mut threshold = (lo + hi) / T::of(2.0);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        sse,
                    });
                }
            }
        }
        best
    }
}
