//! Gradient-boosted regression trees for binary classification with logistic loss and
//! per-sample weights.

mod grow;
mod loss;
mod search;
mod tree;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use loss::{compute_class_weights, grad_hess, logistic_loss, sigmoid, total_loss, ClassWeights};
pub use search::{default_grid, grid_search_cv, GridScore, GridSearchResult};
pub use tree::{Tree, TreeNode};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::sparse::{FeatureMatrix, SparseVector};
use grow::{Grower, SortedColumns};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_leaves: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    pub lambda_l2: f64,
    pub feature_subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 100,
            max_leaves: 31,
            max_depth: 0,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            min_gain: 0.0,
            lambda_l2: 1.0,
            feature_subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        if !(self.lambda_l2 >= 0.0) || !(self.min_gain >= 0.0) {
            return bad("lambda_l2 and min_gain must be non-negative");
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return bad("feature_subsample must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtEnsemble {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub n_features: usize,
    pub params: GbdtParams,
}

/// Per-round diagnostics from training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    /// Weighted training loss before any tree, then after each round.
    pub loss: Vec<f64>,
    /// No admissible split existed on the first round.
    pub degenerate: bool,
}

pub fn train_gbdt(x: &FeatureMatrix, y: &[Label], w: &[f64], params: &GbdtParams) -> Result<GbdtEnsemble> {
    train_gbdt_traced(x, y, w, params).map(|(m, _)| m)
}

pub fn train_gbdt_traced(
    x: &FeatureMatrix,
    y: &[Label],
    w: &[f64],
    params: &GbdtParams,
) -> Result<(GbdtEnsemble, TrainTrace)> {
    params.validate()?;
    let n = x.n_rows();
    if y.len() != n || w.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: if y.len() != n { y.len() } else { w.len() },
        });
    }
    if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParams(format!("sample weight {bad} is not positive")));
    }
    let targets: Vec<f64> = y.iter().map(|l| l.target()).collect();
    let pos: f64 = targets.iter().zip(w).map(|(t, w)| t * w).sum();
    let total: f64 = w.iter().sum();
    if pos == 0.0 || pos == total {
        return Err(Error::SingleClassTraining);
    }
    let rate = pos / total;
    let base_score = (rate / (1.0 - rate)).ln();

    let mut ensemble = GbdtEnsemble {
        base_score,
        learning_rate: params.learning_rate,
        trees: Vec::with_capacity(params.n_trees),
        feature_names: (0..x.n_features()).map(|i| format!("f{i}")).collect(),
        n_features: x.n_features(),
        params: *params,
    };
    let mut margins = vec![base_score; n];
    let mut trace = TrainTrace {
        loss: vec![total_loss(&margins, &targets, w)],
        degenerate: false,
    };
    if params.n_trees == 0 {
        return Ok((ensemble, trace));
    }

    let columns = SortedColumns::new(x);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let n_features = x.n_features();

    for round in 0..params.n_trees {
        for i in 0..n {
            (grad[i], hess[i]) = grad_hess(margins[i], targets[i], w[i]);
        }
        let allowed = if params.feature_subsample < 1.0 && n_features > 0 {
            let k = ((params.feature_subsample * n_features as f64).ceil() as usize).clamp(1, n_features);
            let mut mask = vec![false; n_features];
            for f in sample(&mut rng, n_features, k) {
                mask[f] = true;
            }
            Some(mask)
        } else {
            None
        };
        let grower = Grower {
            grad: &grad,
            hess: &hess,
            weight: w,
            params,
        };
        let Some((tree, leaf_rows)) = grower.grow(&columns, all_rows.clone(), allowed.as_deref()) else {
            if round == 0 {
                log::warn!("degenerate data: no split improves the loss; model predicts the class prior");
                trace.degenerate = true;
            } else {
                log::info!("stopping after {round} rounds: no admissible split");
            }
            break;
        };
        for (node, rows) in &leaf_rows {
            let step = params.learning_rate * tree.leaf_value(*node);
            for &r in rows {
                margins[r as usize] += step;
            }
        }
        ensemble.trees.push(tree);
        trace.loss.push(total_loss(&margins, &targets, w));
    }
    Ok((ensemble, trace))
}

impl GbdtEnsemble {
    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::LengthMismatch {
                left: self.n_features,
                right: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn predict_margin(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.dim(),
            });
        }
        Ok(self.base_score
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.predict(x))
                .sum::<f64>())
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        self.predict_margin(x).map(sigmoid)
    }

    /// Political when the probability reaches 0.5.
    pub fn predict_label(&self, x: &SparseVector) -> Result<Label> {
        Ok(Label::from_political(self.predict_margin(x)? >= 0.0))
    }

    /// The first `n` trees as a standalone model.
    pub fn truncated(&self, n: usize) -> GbdtEnsemble {
        let mut m = self.clone();
        m.trees.truncate(n);
        m.params.n_trees = n;
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ModelDocument>(s)?.try_into()
    }
}

pub const MODEL_FORMAT: &str = "polads-gbdt";
pub const MODEL_SCHEMA_MAJOR: u32 = 1;
pub const MODEL_SCHEMA_MINOR: u32 = 0;

/// Flattened per-tree arrays. Leaves have `left == right == -1` and `feature == -1`.
#[derive(Serialize, Deserialize)]
struct TreeArrays {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<i64>,
    right: Vec<i64>,
    default_left: Vec<bool>,
    value: Vec<f64>,
    #[serde(default)]
    cover: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    schema_version: String,
    params: GbdtParams,
    base_score: f64,
    learning_rate: f64,
    n_features: usize,
    feature_names: Vec<String>,
    trees: Vec<TreeArrays>,
}

impl From<&GbdtEnsemble> for ModelDocument {
    fn from(m: &GbdtEnsemble) -> Self {
        let trees = m
            .trees
            .iter()
            .map(|t| {
                let mut a = TreeArrays {
                    feature: vec![],
                    threshold: vec![],
                    left: vec![],
                    right: vec![],
                    default_left: vec![],
                    value: vec![],
                    cover: t.covers.clone(),
                };
                for node in &t.nodes {
                    match *node {
                        TreeNode::Internal {
                            feature,
                            threshold,
                            left,
                            right,
                            default_left,
                        } => {
                            a.feature.push(feature as i64);
                            a.threshold.push(threshold);
                            a.left.push(left as i64);
                            a.right.push(right as i64);
                            a.default_left.push(default_left);
                            a.value.push(0.0);
                        }
                        TreeNode::Leaf { value } => {
                            a.feature.push(-1);
                            a.threshold.push(0.0);
                            a.left.push(-1);
                            a.right.push(-1);
                            a.default_left.push(false);
                            a.value.push(value);
                        }
                    }
                }
                a
            })
            .collect();
        ModelDocument {
            format: MODEL_FORMAT.into(),
            schema_version: format!("{MODEL_SCHEMA_MAJOR}.{MODEL_SCHEMA_MINOR}"),
            params: m.params,
            base_score: m.base_score,
            learning_rate: m.learning_rate,
            n_features: m.n_features,
            feature_names: m.feature_names.clone(),
            trees,
        }
    }
}

impl TryFrom<ModelDocument> for GbdtEnsemble {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let supported = format!("{MODEL_SCHEMA_MAJOR}.x");
        let major = doc
            .schema_version
            .split('.')
            .next()
            .and_then(|m| m.parse::<u32>().ok());
        if doc.format != MODEL_FORMAT || major != Some(MODEL_SCHEMA_MAJOR) {
            return Err(Error::SchemaVersion {
                found: format!("{} {}", doc.format, doc.schema_version),
                supported,
            });
        }
        let corrupt = |t: usize| Error::InvalidParams(format!("tree {t} in model file is inconsistent"));
        let mut trees = Vec::with_capacity(doc.trees.len());
        for (ti, a) in doc.trees.into_iter().enumerate() {
            let len = a.feature.len();
            if [a.threshold.len(), a.left.len(), a.right.len(), a.default_left.len(), a.value.len()]
                .iter()
                .any(|l| *l != len)
                || len == 0
            {
                return Err(corrupt(ti));
            }
            let mut nodes = Vec::with_capacity(len);
            for i in 0..len {
                if a.left[i] < 0 {
                    nodes.push(TreeNode::Leaf { value: a.value[i] });
                } else {
                    let (l, r, f) = (a.left[i] as usize, a.right[i] as usize, a.feature[i]);
                    if l >= len || r >= len || f < 0 || f as usize >= doc.n_features {
                        return Err(corrupt(ti));
                    }
                    nodes.push(TreeNode::Internal {
                        feature: f as usize,
                        threshold: a.threshold[i],
                        left: l,
                        right: r,
                        default_left: a.default_left[i],
                    });
                }
            }
            trees.push(Tree {
                nodes,
                covers: a.cover,
            });
        }
        Ok(GbdtEnsemble {
            base_score: doc.base_score,
            learning_rate: doc.learning_rate,
            trees,
            feature_names: doc.feature_names,
            n_features: doc.n_features,
            params: doc.params,
        })
    }
}
