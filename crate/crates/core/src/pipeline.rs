//! End-to-end systems: featurization, training and prediction for the naive Bayes
//! baseline and the two boosted-tree variants.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::evaluation::TrainableSystem;
use crate::gbdt::{compute_class_weights, grid_search_cv, train_gbdt, GbdtEnsemble, GbdtParams, GridSearchResult};
use crate::nb::{train_mnb, MnbModel, MnbParams};
use crate::shap::{ensemble_shap, feature_impacts, global_importance, FeatureImpacts, ImportanceRanking, ShapMatrix};
use crate::sparse::FeatureMatrix;
use crate::targeting::{normalize_targets, parse_targets_lenient, NormalizedTargets, TargetEncoder};
use crate::text::{Analyzer, StopWords, TfIdfVectorizer, TokenStream, VectorizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemKind {
    #[serde(rename = "mnb")]
    Mnb,
    #[serde(rename = "gbm-text")]
    GbmText,
    #[serde(rename = "gbm-text+targets")]
    GbmTextTargets,
}

impl SystemKind {
    pub const ALL: [SystemKind; 3] = [SystemKind::Mnb, SystemKind::GbmText, SystemKind::GbmTextTargets];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Mnb => "mnb",
            SystemKind::GbmText => "gbm-text",
            SystemKind::GbmTextTargets => "gbm-text+targets",
        }
    }

    pub fn uses_targets(self) -> bool {
        self == SystemKind::GbmTextTargets
    }

    pub fn is_gbdt(self) -> bool {
        self != SystemKind::Mnb
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown system `{s}` (expected mnb, gbm-text or gbm-text+targets)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub vectorizer: VectorizerConfig,
    pub mnb: MnbParams,
    pub gbdt: GbdtParams,
    /// When set, `gbdt` is replaced by the grid's cross-validated winner.
    pub grid: Option<Vec<GbdtParams>>,
    pub folds: usize,
    #[serde(skip)]
    pub stop_words: StopWords,
}

impl SystemConfig {
    pub fn new(kind: SystemKind) -> Self {
        SystemConfig {
            kind,
            vectorizer: VectorizerConfig::default(),
            mnb: MnbParams::default(),
            gbdt: GbdtParams::default(),
            grid: None,
            folds: 5,
            stop_words: StopWords::default(),
        }
    }

    /// The baseline sees unigrams only.
    pub fn effective_vectorizer(&self) -> VectorizerConfig {
        match self.kind {
            SystemKind::Mnb => VectorizerConfig {
                ngram_min: 1,
                ngram_max: 1,
                ..self.vectorizer
            },
            _ => self.vectorizer,
        }
    }
}

fn targets_of(ds: &Dataset) -> Vec<NormalizedTargets> {
    ds.records()
        .par_iter()
        .map(|r| normalize_targets(&parse_targets_lenient(&r.record.targets_raw)))
        .collect()
}

/// Text vectorizer plus optional targeting encoder. Text columns come first.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    pub stop_words: StopWords,
    pub vectorizer: TfIdfVectorizer,
    pub encoder: Option<TargetEncoder>,
}

impl Featurizer {
    pub fn fit(train: &Dataset, cfg: &SystemConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let analyzer = Analyzer::new(cfg.stop_words.clone());
        let docs: Vec<TokenStream> = train.records().par_iter().map(|r| analyzer.analyze(&r.record)).collect();
        let vectorizer = TfIdfVectorizer::fit(&docs, cfg.effective_vectorizer())?;
        let encoder = if cfg.kind.uses_targets() {
            Some(TargetEncoder::fit(&targets_of(train))?)
        } else {
            None
        };
        Ok(Featurizer {
            stop_words: cfg.stop_words.clone(),
            vectorizer,
            encoder,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectorizer.dim() + self.encoder.as_ref().map_or(0, TargetEncoder::dim)
    }

    pub fn text_columns(&self) -> Range<usize> {
        0..self.vectorizer.dim()
    }

    pub fn targeting_columns(&self) -> Range<usize> {
        self.vectorizer.dim()..self.dim()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.vectorizer.terms().to_vec();
        if let Some(e) = &self.encoder {
            names.extend(e.feature_names());
        }
        names
    }

    pub fn transform(&self, ds: &Dataset) -> Result<FeatureMatrix> {
        let analyzer = Analyzer::new(self.stop_words.clone());
        let rows = ds
            .records()
            .par_iter()
            .map(|r| {
                let text = self.vectorizer.transform(&analyzer.analyze(&r.record));
                match &self.encoder {
                    Some(e) => {
                        let nt = normalize_targets(&parse_targets_lenient(&r.record.targets_raw));
                        text.concat(&e.encode(&nt))
                    }
                    None => text,
                }
            })
            .collect();
        FeatureMatrix::new(rows, self.dim())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mnb(MnbModel),
    Gbdt(GbdtEnsemble),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSystem {
    pub config: SystemConfig,
    pub featurizer: Featurizer,
    pub model: Model,
    pub grid: Option<GridSearchResult>,
}

pub fn train_system(train: &Dataset, cfg: &SystemConfig) -> Result<TrainedSystem> {
    let featurizer = Featurizer::fit(train, cfg)?;
    let x = featurizer.transform(train)?;
    let y = train.labels();
    let mut config = cfg.clone();
    let mut grid = None;
    let model = match cfg.kind {
        SystemKind::Mnb => Model::Mnb(train_mnb(x.rows(), &y, cfg.mnb)?),
        _ => {
            if let Some(g) = &cfg.grid {
                let groups: Vec<String> = train.records().iter().map(|r| r.record.advertiser.clone()).collect();
                let result = grid_search_cv(&x, &y, &groups, g, cfg.folds)?;
                log::info!("grid search picked {:?}", result.best);
                config.gbdt = result.best;
                grid = Some(result);
            }
            let w = compute_class_weights(&y)?.sample_weights(&y);
            let m = train_gbdt(&x, &y, &w, &config.gbdt)?.with_feature_names(featurizer.feature_names())?;
            Model::Gbdt(m)
        }
    };
    Ok(TrainedSystem {
        config,
        featurizer,
        model,
        grid,
    })
}

impl TrainedSystem {
    /// P(political) per row.
    pub fn predict_proba_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        x.rows()
            .par_iter()
            .map(|r| match &self.model {
                Model::Mnb(m) => m.predict_proba(r),
                Model::Gbdt(m) => m.predict_proba(r),
            })
            .collect()
    }

    pub fn predict_proba(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.predict_proba_matrix(&self.featurizer.transform(ds)?)
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(ds)?
            .into_iter()
            .map(|p| Label::from_political(p >= 0.5))
            .collect())
    }

    /// The configuration that reproduces this model without a grid search.
    pub fn resolved_config(&self) -> SystemConfig {
        SystemConfig {
            grid: None,
            ..self.config.clone()
        }
    }
}

/// Keyword and targeting importance rankings, in margin (log-odds) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub system: SystemKind,
    pub unit: String,
    pub n_samples: usize,
    pub base_value: f64,
    pub keywords: ImportanceRanking,
    pub targeting: ImportanceRanking,
    /// (feature value, attribution) pairs for every ranked feature.
    pub impacts: Vec<FeatureImpacts>,
}

pub fn explain(system: &TrainedSystem, ds: &Dataset, top_keywords: usize, top_targeting: usize) -> Result<(ExplainReport, ShapMatrix)> {
    let Model::Gbdt(m) = &system.model else {
        return Err(Error::UnsupportedModel(format!(
            "{} has no tree ensemble to explain",
            system.config.kind
        )));
    };
    let x = system.featurizer.transform(ds)?;
    let s = ensemble_shap(m, &x)?;
    let keywords = global_importance(&s, system.featurizer.text_columns(), Some(top_keywords))?;
    let targeting = if system.featurizer.encoder.is_some() {
        global_importance(&s, system.featurizer.targeting_columns(), Some(top_targeting))?
    } else {
        log::info!("{} uses no targeting attributes; targeting report is empty", system.config.kind);
        ImportanceRanking::default()
    };
    let ranked: Vec<usize> = keywords.entries.iter().chain(&targeting.entries).map(|e| e.feature).collect();
    let impacts = feature_impacts(&s, &x, &ranked)?;
    Ok((
        ExplainReport {
            system: system.config.kind,
            unit: "log-odds".into(),
            n_samples: ds.len(),
            base_value: s.base_value,
            keywords,
            targeting,
            impacts,
        },
        s,
    ))
}

impl TrainableSystem for SystemConfig {
    fn name(&self) -> String {
        self.kind.to_string()
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<Label>> {
        train_system(train, self)?.predict(test)
    }
}
