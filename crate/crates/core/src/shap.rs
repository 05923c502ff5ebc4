//! Exact Shapley attributions for tree ensembles (path-dependent TreeSHAP), a
//! brute-force coalition oracle, and global importance rankings.
//!
//! Attributions are in margin (log-odds) units.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{GbdtEnsemble, Tree, TreeNode};
use crate::sparse::{FeatureMatrix, SparseVector};

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero_fraction * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let d1 = (depth + 1) as f64;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * d1 / ((i + 1) as f64 * one);
            next_one = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d1 = (depth + 1) as f64;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct ShapWalk<'a, F: Fn(usize) -> f64> {
    tree: &'a Tree,
    value_of: F,
    scale: f64,
}

impl<F: Fn(usize) -> f64> ShapWalk<'_, F> {
    fn recurse(
        &self,
        node: usize,
        mut path: Vec<PathElement>,
        zero_fraction: f64,
        one_fraction: f64,
        feature: usize,
        phi: &mut [f64],
    ) {
        extend(&mut path, zero_fraction, one_fraction, feature);
        match self.tree.nodes[node] {
            TreeNode::Leaf { value } => {
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let el = path[i];
                    phi[el.feature] += self.scale * w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
            TreeNode::Internal {
                feature: split,
                left,
                right,
                ..
            } => {
                let hot = self.tree.next_node(node, (self.value_of)(split));
                let cold = if hot == left { right } else { left };
                let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
                if let Some(k) = path.iter().position(|e| e.feature == split) {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind(&mut path, k);
                }
                let cover = self.tree.covers[node];
                self.recurse(
                    hot,
                    path.clone(),
                    incoming_zero * self.tree.covers[hot] / cover,
                    incoming_one,
                    split,
                    phi,
                );
                self.recurse(
                    cold,
                    path,
                    incoming_zero * self.tree.covers[cold] / cover,
                    0.0,
                    split,
                    phi,
                );
            }
        }
    }
}

fn check_covers(tree: &Tree, index: usize) -> Result<()> {
    let ok = tree.covers.len() == tree.nodes.len() && tree.covers.iter().all(|c| c.is_finite() && *c > 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::MissingCover { tree: index })
    }
}

/// Adds `scale` times the tree's attributions for the sample described by `value_of`.
pub fn tree_shap_into(tree: &Tree, value_of: impl Fn(usize) -> f64, scale: f64, phi: &mut [f64]) -> Result<()> {
    check_covers(tree, 0)?;
    if matches!(tree.nodes[0], TreeNode::Leaf { .. }) {
        return Ok(());
    }
    let walk = ShapWalk {
        tree,
        value_of,
        scale,
    };
    let depth = tree.depth();
    walk.recurse(0, Vec::with_capacity(depth + 2), 1.0, 1.0, NO_FEATURE, phi);
    Ok(())
}

/// Per-feature attributions of one tree's output at `x`, relative to the tree's
/// cover-weighted expectation.
pub fn tree_shap(tree: &Tree, x: &SparseVector) -> Result<Vec<f64>> {
    let mut phi = vec![0.0; x.dim()];
    tree_shap_into(tree, |f| x.get(f), 1.0, &mut phi)?;
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    /// One sparse attribution row per sample.
    pub values: Vec<SparseVector>,
    pub base_value: f64,
    pub feature_names: Vec<String>,
}

pub fn ensemble_shap(m: &GbdtEnsemble, x: &FeatureMatrix) -> Result<ShapMatrix> {
    for (i, t) in m.trees.iter().enumerate() {
        check_covers(t, i)?;
    }
    if x.n_features() != m.n_features {
        return Err(Error::DimensionMismatch {
            expected: m.n_features,
            got: x.n_features(),
        });
    }
    let used: Vec<usize> = m
        .trees
        .iter()
        .flat_map(Tree::used_features)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let values = x
        .rows()
        .par_iter()
        .map_init(
            || vec![0.0; m.n_features],
            |phi, row| {
                for t in &m.trees {
                    tree_shap_into(t, |f| row.get(f), m.learning_rate, phi)?;
                }
                let pairs: Vec<(usize, f64)> = used.iter().map(|&f| (f, std::mem::take(&mut phi[f]))).collect();
                SparseVector::from_pairs(m.n_features, pairs)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(ShapMatrix {
        values,
        base_value: m.base_score + m.trees.iter().map(|t| m.learning_rate * t.expected_value()).sum::<f64>(),
        feature_names: m.feature_names.clone(),
    })
}

impl ShapMatrix {
    /// Columns with at least one nonzero attribution.
    pub fn active_features(&self) -> Vec<usize> {
        self.values
            .iter()
            .flat_map(|r| r.indices().iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Samples x active features; the header row carries feature names.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let cols = self.active_features();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(cols.iter().map(|&c| self.feature_names[c].as_str()))?;
        for row in &self.values {
            w.write_record(cols.iter().map(|&c| row.get(c).to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Exact Shapley values of the game `value` over `n_players` by coalition enumeration.
/// `value` receives a membership mask.
pub fn brute_force_shapley(n_players: usize, value: impl Fn(&[bool]) -> f64) -> Result<Vec<f64>> {
    const MAX: usize = 20;
    if n_players > MAX {
        return Err(Error::TooManyFeatures {
            max: MAX,
            got: n_players,
        });
    }
    let n_masks = 1usize << n_players;
    let mut mask = vec![false; n_players];
    let v: Vec<f64> = (0..n_masks)
        .map(|m| {
            for (i, b) in mask.iter_mut().enumerate() {
                *b = m >> i & 1 == 1;
            }
            value(&mask)
        })
        .collect();
    // w(s) = s! (n - s - 1)! / n!
    let mut fact = vec![1.0f64; n_players + 1];
    for i in 1..=n_players {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; n_players];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for m in (0..n_masks).filter(|m| m & bit == 0) {
            let s = m.count_ones() as usize;
            let w = fact[s] * fact[n_players - s - 1] / fact[n_players];
            *p += w * (v[m | bit] - v[m]);
        }
    }
    Ok(phi)
}

/// Marginal-expectation game: absent features take their values from each background
/// sample in turn. `players` lists the feature columns that participate.
pub fn background_shapley(
    model: impl Fn(&[f64]) -> f64,
    x: &[f64],
    background: &[Vec<f64>],
    players: &[usize],
) -> Result<Vec<f64>> {
    if background.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    brute_force_shapley(players.len(), |mask| {
        let total: f64 = background
            .iter()
            .map(|b| {
                let mut z = b.clone();
                for (k, &f) in players.iter().enumerate() {
                    if mask[k] {
                        z[f] = x[f];
                    }
                }
                model(&z)
            })
            .sum();
        total / background.len() as f64
    })
}

/// Path-dependent game of a single tree: features outside the coalition are integrated
/// out with the cover-weighted average of both children.
pub fn tree_path_shapley(tree: &Tree, x: &[f64], n_features: usize) -> Result<Vec<f64>> {
    check_covers(tree, 0)?;
    fn expect(t: &Tree, node: usize, x: &[f64], known: &[bool]) -> f64 {
        match t.nodes[node] {
            TreeNode::Leaf { value } => value,
            TreeNode::Internal { feature, left, right, .. } => {
                if known[feature] {
                    expect(t, t.next_node(node, x[feature]), x, known)
                } else {
                    (t.covers[left] * expect(t, left, x, known) + t.covers[right] * expect(t, right, x, known))
                        / t.covers[node]
                }
            }
        }
    }
    brute_force_shapley(n_features, |mask| expect(tree, 0, x, mask))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: usize,
    pub name: String,
    /// Mean absolute attribution over samples.
    pub mean_abs: f64,
    pub sum_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::NonNumeric)
            .from_path(path)?;
        w.write_record(["rank", "feature", "mean_abs_shap", "sum_abs_shap"])?;
        for (i, e) in self.entries.iter().enumerate() {
            w.serialize((i + 1, &e.name, e.mean_abs, e.sum_abs))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Features ranked by mean |SHAP| within `columns`, descending, zero scores omitted.
pub fn global_importance(s: &ShapMatrix, columns: Range<usize>, top_k: Option<usize>) -> Result<ImportanceRanking> {
    if s.values.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let n = s.values.len() as f64;
    let mut sums: std::collections::BTreeMap<usize, f64> = Default::default();
    for row in &s.values {
        for (f, v) in row.iter() {
            if columns.contains(&f) {
                *sums.entry(f).or_default() += v.abs();
            }
        }
    }
    let mut entries: Vec<ImportanceEntry> = sums
        .into_iter()
        .filter(|(_, t)| *t > 0.0)
        .map(|(feature, sum_abs)| ImportanceEntry {
            feature,
            name: s.feature_names[feature].clone(),
            mean_abs: sum_abs / n,
            sum_abs,
        })
        .collect();
    if entries.is_empty() {
        log::warn!("no feature in columns {columns:?} has a nonzero attribution");
    }
    entries.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs).then(a.feature.cmp(&b.feature)));
    if let Some(k) = top_k {
        if entries.len() < k {
            log::warn!("only {} features have nonzero attribution (asked for {k})", entries.len());
        }
        entries.truncate(k);
    }
    Ok(ImportanceRanking { entries })
}

/// (feature value, attribution) pairs per sample for one feature, for beeswarm-style plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImpacts {
    pub feature: usize,
    pub name: String,
    pub pairs: Vec<(f64, f64)>,
}

pub fn feature_impacts(s: &ShapMatrix, x: &FeatureMatrix, features: &[usize]) -> Result<Vec<FeatureImpacts>> {
    if x.n_rows() != s.values.len() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: s.values.len(),
        });
    }
    Ok(features
        .iter()
        .map(|&f| FeatureImpacts {
            feature: f,
            name: s.feature_names[f].clone(),
            pairs: x.rows().iter().zip(&s.values).map(|(r, v)| (r.get(f), v.get(f))).collect(),
        })
        .collect())
}
