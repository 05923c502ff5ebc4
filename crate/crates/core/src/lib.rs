//! Political ad classification: corpus ingest, targeting and text features,
//! a multinomial naive Bayes baseline, gradient boosted trees, advertiser-disjoint
//! evaluation with a paired bootstrap, and exact TreeSHAP explanations.

pub mod bundle;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod gbdt;
pub mod nb;
pub mod pipeline;
pub mod shap;
pub mod sparse;
pub mod synthetic;
pub mod targeting;
pub mod text;

pub use bundle::{check_compatible, train_bundle, Bundle, EvalSplit};
pub use config::RunConfig;
pub use corpus::{derive_label, load_corpus, AdRecord, Dataset, ErrorPolicy, IngestSummary, Label, LabeledAd};
pub use error::{Error, Result};
pub use evaluation::{compute_metrics, paired_bootstrap, split_by_advertiser, BootstrapConfig, MetricsReport};
pub use gbdt::{train_gbdt, GbdtEnsemble, GbdtParams};
pub use nb::{train_mnb, MnbModel, MnbParams};
pub use pipeline::{explain, train_system, ExplainReport, Featurizer, Model, SystemConfig, SystemKind, TrainedSystem};
pub use shap::{ensemble_shap, global_importance, tree_shap, ShapMatrix};
pub use sparse::{FeatureMatrix, SparseVector};
pub use targeting::{TargetEncoder, TargetingSpec};
pub use text::{TfIdfVectorizer, VectorizerConfig};
