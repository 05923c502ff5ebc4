use serde::{Deserialize, Serialize};

use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Samples with `x[feature] < threshold` go left; NaN follows `default_left`.
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
    },
    Leaf { value: f64 },
}

/// A regression tree stored as a flat node array rooted at index 0.
///
/// `covers[i]` is the weighted count of training samples that reached node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub covers: Vec<f64>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { value }],
            covers: vec![cover],
        }
    }

    /// Index of the child `x` descends into from internal node `node`.
    pub fn next_node(&self, node: usize, value: f64) -> usize {
        match self.nodes[node] {
            TreeNode::Internal {
                threshold,
                left,
                right,
                default_left,
                ..
            } => {
                let go_left = if value.is_nan() {
                    default_left
                } else {
                    value < threshold
                };
                if go_left {
                    left
                } else {
                    right
                }
            }
            TreeNode::Leaf { .. } => node,
        }
    }

    pub fn leaf_index(&self, x: &SparseVector) -> usize {
        self.leaf_index_by(|f| x.get(f))
    }

    pub fn leaf_index_by(&self, value_of: impl Fn(usize) -> f64) -> usize {
        let mut node = 0;
        while let TreeNode::Internal { feature, .. } = self.nodes[node] {
            node = self.next_node(node, value_of(feature));
        }
        node
    }

    pub fn predict(&self, x: &SparseVector) -> f64 {
        self.leaf_value(self.leaf_index(x))
    }

    pub fn leaf_value(&self, node: usize) -> f64 {
        match self.nodes[node] {
            TreeNode::Leaf { value } => value,
            TreeNode::Internal { .. } => panic!("node {node} is not a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            match t.nodes[n] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn has_covers(&self) -> bool {
        self.covers.len() == self.nodes.len()
            && self.nodes.iter().zip(&self.covers).all(|(n, c)| {
                c.is_finite() && (*c > 0.0 || matches!(n, TreeNode::Leaf { .. }))
            })
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        fn go(t: &Tree, n: usize) -> f64 {
            match t.nodes[n] {
                TreeNode::Leaf { value } => value,
                TreeNode::Internal { left, right, .. } => {
                    (t.covers[left] * go(t, left) + t.covers[right] * go(t, right)) / t.covers[n]
                }
            }
        }
        go(self, 0)
    }

    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Internal { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}
