//! Run configuration: a flat, versioned TOML key/value document.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//! system = "gbm-text+targets"
//! n_trees = 200
//! grid_learning_rate = [0.05, 0.1]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{BootstrapConfig, ResampleUnit};
use crate::gbdt::GbdtParams;
use crate::nb::MnbParams;
use crate::pipeline::{SystemConfig, SystemKind};
use crate::text::{StopWords, VectorizerConfig};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub test_fraction: f64,
    pub system: SystemKind,
    pub strict: bool,

    pub min_df: usize,
    pub ngram_max: usize,
    /// Stop-word list, one word per line; empty means the built-in English list.
    pub stop_words: Option<PathBuf>,

    pub mnb_alpha: f64,
    pub mnb_class_weighted_prior: bool,

    pub n_trees: usize,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    pub lambda_l2: f64,
    pub feature_subsample: f64,

    pub grid: bool,
    pub folds: usize,
    pub grid_n_trees: Vec<usize>,
    pub grid_learning_rate: Vec<f64>,
    pub grid_max_leaves: Vec<usize>,
    pub grid_min_samples_leaf: Vec<usize>,

    pub bootstrap_samples: usize,
    pub bootstrap_alpha: f64,
    pub resample_unit: ResampleUnit,

    pub top_interests: usize,
    pub top_keywords: usize,
    pub top_targeting: usize,

    pub corpus: Option<PathBuf>,
    pub dataset: PathBuf,
    pub model_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GbdtParams::default();
        let v = VectorizerConfig::default();
        let b = BootstrapConfig::default();
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            test_fraction: b.test_fraction,
            system: SystemKind::GbmTextTargets,
            strict: false,
            min_df: v.min_df,
            ngram_max: v.ngram_max,
            stop_words: None,
            mnb_alpha: MnbParams::default().alpha,
            mnb_class_weighted_prior: false,
            n_trees: g.n_trees,
            max_leaves: g.max_leaves,
            max_depth: g.max_depth,
            learning_rate: g.learning_rate,
            min_samples_leaf: g.min_samples_leaf,
            min_gain: g.min_gain,
            lambda_l2: g.lambda_l2,
            feature_subsample: g.feature_subsample,
            grid: false,
            folds: 5,
            grid_n_trees: vec![100, 200, 400],
            grid_learning_rate: vec![0.05, 0.1],
            grid_max_leaves: vec![15, 31],
            grid_min_samples_leaf: vec![10, 20],
            bootstrap_samples: b.samples,
            bootstrap_alpha: b.alpha,
            resample_unit: b.resample_unit,
            top_interests: 10,
            top_keywords: 10,
            top_targeting: 15,
            corpus: None,
            dataset: PathBuf::from("work/dataset.jsonl"),
            model_dir: PathBuf::from("work/models"),
            report_dir: PathBuf::from("work/reports"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: cfg.schema_version.to_string(),
                supported: CONFIG_SCHEMA_VERSION.to_string(),
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} must lie in (0, 1)", self.test_fraction)));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.bootstrap_samples == 0 {
            return Err(Error::Config("bootstrap_samples must be at least 1".into()));
        }
        if !(self.bootstrap_alpha > 0.0 && self.bootstrap_alpha < 1.0) {
            return Err(Error::Config("bootstrap_alpha must lie in (0, 1)".into()));
        }
        if self.ngram_max == 0 || self.min_df == 0 {
            return Err(Error::Config("ngram_max and min_df must be at least 1".into()));
        }
        self.gbdt_params().validate()?;
        for p in self.grid_params() {
            p.validate()?;
        }
        Ok(())
    }

    pub fn gbdt_params(&self) -> GbdtParams {
        GbdtParams {
            n_trees: self.n_trees,
            max_leaves: self.max_leaves,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            min_samples_leaf: self.min_samples_leaf,
            min_gain: self.min_gain,
            lambda_l2: self.lambda_l2,
            feature_subsample: self.feature_subsample,
            seed: self.seed,
        }
    }

    /// Cartesian product of the grid axes in (trees, rate, leaves, leaf size) order.
    pub fn grid_params(&self) -> Vec<GbdtParams> {
        let base = self.gbdt_params();
        let mut out = Vec::new();
        for &n_trees in &self.grid_n_trees {
            for &learning_rate in &self.grid_learning_rate {
                for &max_leaves in &self.grid_max_leaves {
                    for &min_samples_leaf in &self.grid_min_samples_leaf {
                        out.push(GbdtParams {
                            n_trees,
                            learning_rate,
                            max_leaves,
                            min_samples_leaf,
                            ..base
                        });
                    }
                }
            }
        }
        out
    }

    pub fn system_config(&self, kind: SystemKind) -> Result<SystemConfig> {
        let stop_words = match &self.stop_words {
            Some(p) => StopWords::from_file(p)?,
            None => StopWords::default(),
        };
        Ok(SystemConfig {
            kind,
            vectorizer: VectorizerConfig {
                ngram_min: 1,
                ngram_max: self.ngram_max,
                min_df: self.min_df,
            },
            mnb: MnbParams {
                alpha: self.mnb_alpha,
                class_weighted_prior: self.mnb_class_weighted_prior,
            },
            gbdt: self.gbdt_params(),
            grid: self.grid.then(|| self.grid_params()),
            folds: self.folds,
            stop_words,
        })
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            samples: self.bootstrap_samples,
            alpha: self.bootstrap_alpha,
            seed: self.seed,
            test_fraction: self.test_fraction,
            resample_unit: self.resample_unit,
        }
    }
}
