//! CART decision trees with per-output (one-vs-rest) Gini impurity.
//!
//! Grown greedily to a depth cap with a minimum leaf size; leaves store
//! the mean label vector of their samples. The same machinery fits the
//! multi-label suitability tree (labels are suitability bits) and the
//! mimic tree (labels are one-hot selections, for which summed
//! one-vs-rest Gini equals multi-class Gini exactly).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tree growth limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub max_depth: usize,
    /// Minimum samples on each side of a split. A node with fewer than
    /// `2·min_leaf` samples cannot split and becomes a leaf as-is.
    pub min_leaf: usize,
}

impl Default for TreeSpec {
    fn default() -> Self {
        TreeSpec {
            max_depth: 3,
            min_leaf: 5,
        }
    }
}

/// A fitted tree. `Split` sends `x[feature] ≤ threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Mean label vector of the training samples in this leaf.
        value: Vec<f64>,
        count: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Root-to-leaf traversal; returns the leaf's mean label vector.
    pub fn predict<'a>(&'a self, x: &[f64]) -> &'a [f64] {
        match self {
            TreeNode::Leaf { value, .. } => value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    /// Total nodes, splits and leaves both.
    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    /// Number of leaves.
    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// `N·Gini` of a node from its label sums: `Σ_m (S_m − S_m²/N)`.
/// Using the scaled form keeps the split comparison exact on sums.
fn scaled_gini(sums: &[f64], n: f64) -> f64 {
    sums.iter().map(|&s| s - s * s / n).sum()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Vec<f64>],
    features: &'a [usize],
    spec: TreeSpec,
    outputs: usize,
}

impl Builder<'_> {
    fn label_sums(&self, idx: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; self.outputs];
        for &i in idx {
            for (s, v) in sums.iter_mut().zip(&self.y[i]) {
                *s += v;
            }
        }
        sums
    }

    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let n = idx.len() as f64;
        let value = self.label_sums(idx).iter().map(|s| s / n).collect();
        TreeNode::Leaf {
            value,
            count: idx.len(),
        }
    }

    fn build(&self, idx: &[usize], depth: usize) -> TreeNode {
        let n = idx.len();
        if depth >= self.spec.max_depth || n < 2 * self.spec.min_leaf {
            return self.leaf(idx);
        }
        let total_sums = self.label_sums(idx);
        let parent = scaled_gini(&total_sums, n as f64);

        // Best (cost, feature, threshold, sorted order, boundary). Ties
        // keep the first candidate in (feature, threshold) order.
        let mut best: Option<(f64, usize, f64, Vec<usize>, usize)> = None;
        for &f in self.features {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| {
                self.x[a][f]
                    .total_cmp(&self.x[b][f])
                    .then(a.cmp(&b))
            });
            // One pass over boundaries with running left-side sums.
            let mut left_sums = vec![0.0; self.outputs];
            for k in 1..n {
                let moved = order[k - 1];
                for (s, v) in left_sums.iter_mut().zip(&self.y[moved]) {
                    *s += v;
                }
                if k < self.spec.min_leaf || n - k < self.spec.min_leaf {
                    continue;
                }
                let (lo, hi) = (self.x[order[k - 1]][f], self.x[order[k]][f]);
                if lo >= hi {
                    continue; // identical values cannot be separated
                }
                let right_sums: Vec<f64> = total_sums
                    .iter()
                    .zip(&left_sums)
                    .map(|(t, l)| t - l)
                    .collect();
                let cost = scaled_gini(&left_sums, k as f64)
                    + scaled_gini(&right_sums, (n - k) as f64);
                if best.as_ref().map_or(true, |b| cost < b.0) {
                    best = Some((cost, f, (lo + hi) / 2.0, order.clone(), k));
                }
            }
        }

        match best {
            // Require a real impurity decrease; otherwise stop early.
            Some((cost, feature, threshold, order, k)) if cost < parent - 1e-12 => {
                let left = self.build(&order[..k], depth + 1);
                let right = self.build(&order[k..], depth + 1);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
            _ => self.leaf(idx),
        }
    }
}

/// Fit a CART tree on rows `x` with label vectors `y`, splitting only
/// on the listed feature indices.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    features: &[usize],
    spec: &TreeSpec,
) -> Result<TreeNode> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::DegenerateInput(format!(
            "tree needs matching non-empty inputs, got {} rows and {} labels",
            x.len(),
            y.len()
        )));
    }
    if spec.max_depth == 0 || spec.min_leaf == 0 {
        return Err(Error::DegenerateInput(
            "tree needs max_depth ≥ 1 and min_leaf ≥ 1".into(),
        ));
    }
    let width = x[0].len();
    let outputs = y[0].len();
    if outputs == 0 {
        return Err(Error::DegenerateInput("tree labels are empty".into()));
    }
    for (i, (xi, yi)) in x.iter().zip(y).enumerate() {
        if xi.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: xi.len(),
                context: format!("tree input row {i}"),
            });
        }
        if yi.len() != outputs {
            return Err(Error::DimensionMismatch {
                expected: outputs,
                got: yi.len(),
                context: format!("tree label row {i}"),
            });
        }
        if xi.iter().chain(yi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "tree row {i} contains a non-finite value"
            )));
        }
    }
    if let Some(&f) = features.iter().find(|&&f| f >= width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: f,
            context: "tree split feature index".into(),
        });
    }
    let builder = Builder {
        x,
        y,
        features,
        spec: *spec,
        outputs,
    };
    let idx: Vec<usize> = (0..x.len()).collect();
    Ok(builder.build(&idx, 0))
}
