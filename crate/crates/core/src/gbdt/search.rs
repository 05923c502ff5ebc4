//! Advertiser-grouped k-fold grid search.

use serde::{Deserialize, Serialize};

use super::{compute_class_weights, train_gbdt, GbdtParams};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, group_k_fold};
use crate::sparse::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: GbdtParams,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GbdtParams,
    pub scores: Vec<GridScore>,
}

/// 3 x 2 x 2 x 2 combinations over trees, learning rate, leaves and leaf size.
pub fn default_grid(base: &GbdtParams) -> Vec<GbdtParams> {
    let mut grid = Vec::new();
    for n_trees in [100, 200, 400] {
        for learning_rate in [0.05, 0.1] {
            for max_leaves in [15, 31] {
                for min_samples_leaf in [10, 20] {
                    grid.push(GbdtParams {
                        n_trees,
                        learning_rate,
                        max_leaves,
                        min_samples_leaf,
                        ..*base
                    });
                }
            }
        }
    }
    grid
}

fn same_except_trees(a: &GbdtParams, b: &GbdtParams) -> bool {
    GbdtParams { n_trees: 0, ..*a } == GbdtParams { n_trees: 0, ..*b }
}

/// Picks the configuration with the best mean validation F1 over `k` advertiser-disjoint
/// folds. Ties go to fewer trees, then the lower learning rate, then grid order.
///
/// Configurations differing only in `n_trees` share one training run per fold: the
/// first `n` trees of a longer run are exactly the model an `n`-tree run produces.
pub fn grid_search_cv(
    x: &FeatureMatrix,
    y: &[Label],
    groups: &[String],
    grid: &[GbdtParams],
    k: usize,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty parameter grid".into()));
    }
    if y.len() != x.n_rows() || groups.len() != x.n_rows() {
        return Err(Error::LengthMismatch {
            left: x.n_rows(),
            right: if y.len() != x.n_rows() { y.len() } else { groups.len() },
        });
    }
    for p in grid {
        p.validate()?;
    }
    let folds = group_k_fold(groups, k)?;
    let mut fold_f1 = vec![vec![0.0; folds.len()]; grid.len()];

    let mut done = vec![false; grid.len()];
    for i in 0..grid.len() {
        if done[i] {
            continue;
        }
        let family: Vec<usize> = (i..grid.len())
            .filter(|&j| !done[j] && same_except_trees(&grid[i], &grid[j]))
            .collect();
        let longest = family.iter().map(|&j| grid[j].n_trees).max().unwrap_or(0);
        for (fi, valid) in folds.iter().enumerate() {
            let mut is_valid = vec![false; x.n_rows()];
            for &r in valid {
                is_valid[r] = true;
            }
            let train: Vec<usize> = (0..x.n_rows()).filter(|r| !is_valid[*r]).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<Label> = train.iter().map(|&r| y[r]).collect();
            let wt = compute_class_weights(&yt)?.sample_weights(&yt);
            let model = train_gbdt(&xt, &yt, &wt, &GbdtParams { n_trees: longest, ..grid[i] })?;
            let truth: Vec<Label> = valid.iter().map(|&r| y[r]).collect();
            for &j in &family {
                let m = model.truncated(grid[j].n_trees);
                let pred = valid
                    .iter()
                    .map(|&r| m.predict_label(x.row(r)))
                    .collect::<Result<Vec<_>>>()?;
                fold_f1[j][fi] = compute_metrics(&pred, &truth)?.f1;
            }
            log::debug!("grid family {i}: fold {fi} done");
        }
        for j in family {
            done[j] = true;
        }
    }

    let scores: Vec<GridScore> = grid
        .iter()
        .zip(fold_f1)
        .map(|(p, f)| GridScore {
            params: *p,
            mean_f1: f.iter().sum::<f64>() / f.len() as f64,
            fold_f1: f,
        })
        .collect();
    for s in &scores {
        log::info!("grid {:?}: fold F1 {:?}, mean {:.4}", s.params, s.fold_f1, s.mean_f1);
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best];
        let better = s.mean_f1 > b.mean_f1
            || (s.mean_f1 == b.mean_f1
                && (s.params.n_trees < b.params.n_trees
                    || (s.params.n_trees == b.params.n_trees
                        && s.params.learning_rate < b.params.learning_rate)));
        if better {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best: scores[best].params,
        scores,
    })
}
