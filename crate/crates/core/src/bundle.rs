//! Self-contained model bundles: one directory holding everything needed to score
//! new ads, plus the snapshot that ties the model to its training split.
//!
//! ```text
//! bundle/
//!   manifest.json    system, resolved config, dataset digest, split plan
//!   stop_words.txt
//!   vectorizer.json
//!   encoder.json     text+targets bundles only
//!   model.json
//!   metadata.json    creation time; the only file that varies between identical runs
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{split_by_advertiser, SplitPlan};
use crate::gbdt::{GbdtEnsemble, GridSearchResult};
use crate::nb::MnbModel;
use crate::pipeline::{train_system, Featurizer, Model, SystemConfig, SystemKind, TrainedSystem};
use crate::targeting::TargetEncoder;
use crate::text::{StopWords, TfIdfVectorizer};

pub const BUNDLE_FORMAT: &str = "polads-bundle";
pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub schema_version: u32,
    pub system: SystemKind,
    /// Configuration with the grid winner substituted in.
    pub config: SystemConfig,
    pub grid: Option<GridSearchResult>,
    pub dataset_digest: String,
    pub split: SplitPlan,
    pub n_train: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub manifest: BundleManifest,
    pub system: TrainedSystem,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    created_at: String,
    tool_version: String,
}

/// Splits `ds` by advertiser and trains `cfg` on the training side.
pub fn train_bundle(ds: &Dataset, cfg: &SystemConfig, test_fraction: f64, seed: u64) -> Result<Bundle> {
    let (train, test, split) = split_by_advertiser(ds, test_fraction, seed)?;
    log::info!(
        "split: {} train ads / {} advertisers, {} test ads / {} advertisers",
        train.len(),
        split.train_advertisers.len(),
        test.len(),
        split.test_advertisers.len()
    );
    let system = train_system(&train, cfg)?;
    Ok(Bundle {
        manifest: BundleManifest {
            format: BUNDLE_FORMAT.into(),
            schema_version: BUNDLE_SCHEMA_VERSION,
            system: cfg.kind,
            config: system.resolved_config(),
            grid: system.grid.clone(),
            dataset_digest: ds.digest(),
            split,
            n_train: train.len(),
            n_features: system.featurizer.dim(),
        },
        system,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn read_file(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

/// Which ads of a dataset to score relative to a bundle's training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    /// Ads of advertisers the bundle never trained on.
    #[default]
    Test,
    Train,
    All,
}

impl FromStr for EvalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(EvalSplit::Test),
            "train" => Ok(EvalSplit::Train),
            "all" => Ok(EvalSplit::All),
            other => Err(Error::Config(format!("unknown split `{other}` (expected test, train or all)"))),
        }
    }
}

impl Bundle {
    pub fn write(&self, dir: &Path, force: bool) -> Result<()> {
        let occupied = dir.exists()
            && fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .next()
                .is_some();
        if occupied && !force {
            return Err(Error::AlreadyExists { path: dir.to_path_buf() });
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let f = &self.system.featurizer;
        write_file(dir, "manifest.json", &serde_json::to_string_pretty(&self.manifest)?)?;
        write_file(dir, "stop_words.txt", &f.stop_words.to_text())?;
        write_file(dir, "vectorizer.json", &f.vectorizer.to_json()?)?;
        match &f.encoder {
            Some(e) => write_file(dir, "encoder.json", &e.to_json()?)?,
            None => {
                let stale = dir.join("encoder.json");
                if stale.exists() {
                    fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
                }
            }
        }
        let model = match &self.system.model {
            Model::Mnb(m) => m.to_json()?,
            Model::Gbdt(m) => m.to_json()?,
        };
        write_file(dir, "model.json", &model)?;
        let meta = Metadata {
            created_at: chrono::Utc::now().to_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        };
        write_file(dir, METADATA_FILE, &serde_json::to_string_pretty(&meta)?)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest: BundleManifest = serde_json::from_str(&read_file(dir, "manifest.json")?)?;
        if manifest.format != BUNDLE_FORMAT || manifest.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: format!("{} {}", manifest.format, manifest.schema_version),
                supported: format!("{BUNDLE_FORMAT} {BUNDLE_SCHEMA_VERSION}"),
            });
        }
        let stop_words = StopWords::parse(&read_file(dir, "stop_words.txt")?);
        let vectorizer = TfIdfVectorizer::from_json(&read_file(dir, "vectorizer.json")?)?;
        let encoder = if manifest.system.uses_targets() {
            Some(TargetEncoder::from_json(&read_file(dir, "encoder.json")?)?)
        } else {
            None
        };
        let model_text = read_file(dir, "model.json")?;
        let model = if manifest.system.is_gbdt() {
            Model::Gbdt(GbdtEnsemble::from_json(&model_text)?)
        } else {
            Model::Mnb(MnbModel::from_json(&model_text)?)
        };
        let featurizer = Featurizer {
            stop_words: stop_words.clone(),
            vectorizer,
            encoder,
        };
        if featurizer.dim() != manifest.n_features {
            return Err(Error::DimensionMismatch {
                expected: manifest.n_features,
                got: featurizer.dim(),
            });
        }
        let config = SystemConfig {
            stop_words,
            ..manifest.config.clone()
        };
        Ok(Bundle {
            system: TrainedSystem {
                config,
                featurizer,
                model,
                grid: manifest.grid.clone(),
            },
            manifest,
        })
    }

    pub fn select(&self, ds: &Dataset, split: EvalSplit) -> Dataset {
        let train = &self.manifest.split.train_advertisers;
        match split {
            EvalSplit::All => ds.clone(),
            EvalSplit::Train => ds.filter_advertisers(train),
            EvalSplit::Test => {
                let keep: BTreeSet<String> = ds.advertisers().difference(train).cloned().collect();
                ds.filter_advertisers(&keep)
            }
        }
    }
}

/// Bundles compared against each other must share the dataset and the split.
pub fn check_compatible(bundles: &[Bundle]) -> Result<()> {
    let Some(first) = bundles.first() else {
        return Ok(());
    };
    let a = &first.manifest;
    for b in &bundles[1..] {
        let b = &b.manifest;
        if a.dataset_digest != b.dataset_digest {
            return Err(Error::IncompatibleBundles(format!(
                "trained on different datasets ({} vs {})",
                &a.dataset_digest[..12.min(a.dataset_digest.len())],
                &b.dataset_digest[..12.min(b.dataset_digest.len())]
            )));
        }
        if a.split != b.split {
            return Err(Error::IncompatibleBundles(format!(
                "different splits (seed {} fraction {} vs seed {} fraction {})",
                a.split.seed, a.split.test_fraction, b.split.seed, b.split.test_fraction
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AdRecord, Label, LabeledAd};
    use crate::gbdt::GbdtParams;

    fn fixture() -> Dataset {
        let mut v = Vec::new();
        for i in 0..80 {
            let political = i % 4 != 0;
            let message = if political { "senate vote election" } else { "shoe sale today" };
            v.push(LabeledAd {
                record: AdRecord {
                    id: format!("a{i}"),
                    title: String::new(),
                    message: message.into(),
                    political_votes: political as u64,
                    not_political_votes: !political as u64,
                    political_probability: 0.5,
                    advertiser: format!("adv{}", i % 10),
                    created_at: String::new(),
                    targets_raw: r#"[{"target":"Region","segment":"Ohio"}]"#.into(),
                },
                label: Label::from_political(political),
            });
        }
        Dataset::new(v).unwrap()
    }

    fn cfg(kind: SystemKind) -> SystemConfig {
        SystemConfig {
            gbdt: GbdtParams {
                n_trees: 4,
                min_samples_leaf: 2,
                ..Default::default()
            },
            ..SystemConfig::new(kind)
        }
    }

    #[test]
    fn write_read_round_trip() {
        let ds = fixture();
        let dir = tempfile::tempdir().unwrap();
        for kind in SystemKind::ALL {
            let b = train_bundle(&ds, &cfg(kind), 0.2, 5).unwrap();
            let path = dir.path().join(kind.as_str());
            b.write(&path, false).unwrap();
            assert_eq!(path.join("encoder.json").exists(), kind.uses_targets());
            let back = Bundle::read(&path).unwrap();
            assert_eq!(back, b);
            assert_eq!(back.system.predict(&ds).unwrap(), b.system.predict(&ds).unwrap());
        }
    }

    #[test]
    fn refuses_overwrite_without_force() {
        let ds = fixture();
        let dir = tempfile::tempdir().unwrap();
        let b = train_bundle(&ds, &cfg(SystemKind::Mnb), 0.2, 5).unwrap();
        b.write(dir.path(), false).unwrap();
        assert!(matches!(b.write(dir.path(), false), Err(Error::AlreadyExists { .. })));
        b.write(dir.path(), true).unwrap();
    }

    #[test]
    fn selection_respects_training_advertisers() {
        let ds = fixture();
        let b = train_bundle(&ds, &cfg(SystemKind::Mnb), 0.2, 5).unwrap();
        let test = b.select(&ds, EvalSplit::Test);
        assert_eq!(test.advertisers(), &b.manifest.split.test_advertisers);
        assert_eq!(b.select(&ds, EvalSplit::Train).len(), b.manifest.n_train);
        assert_eq!(b.select(&ds, EvalSplit::All).len(), ds.len());
    }

    #[test]
    fn compatibility() {
        let ds = fixture();
        let a = train_bundle(&ds, &cfg(SystemKind::Mnb), 0.2, 5).unwrap();
        let b = train_bundle(&ds, &cfg(SystemKind::GbmText), 0.2, 5).unwrap();
        check_compatible(&[a.clone(), b]).unwrap();
        let c = train_bundle(&ds, &cfg(SystemKind::GbmText), 0.2, 6).unwrap();
        assert!(matches!(check_compatible(&[a, c]), Err(Error::IncompatibleBundles(_))));
    }
}
