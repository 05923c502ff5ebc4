//! Advertiser-disjoint splits, classification metrics and the paired bootstrap test.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label, LabeledAd};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_advertisers: BTreeSet<String>,
    pub test_advertisers: BTreeSet<String>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Shuffles the advertisers with a seeded generator and sends the first
/// `ceil(fraction * n)` of them (at least one, leaving at least one) to test.
pub fn plan_split(advertisers: &BTreeSet<String>, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParams(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = advertisers.len();
    if n < 2 {
        return Err(Error::InsufficientGroups { needed: 2, found: n });
    }
    let mut order: Vec<&String> = advertisers.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((test_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    Ok(SplitPlan {
        test_advertisers: order[..n_test].iter().map(|s| s.to_string()).collect(),
        train_advertisers: order[n_test..].iter().map(|s| s.to_string()).collect(),
        seed,
        test_fraction,
    })
}

/// Returns `(train, test, plan)`; every ad follows its advertiser.
pub fn split_by_advertiser(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset, SplitPlan)> {
    let plan = plan_split(ds.advertisers(), test_fraction, seed)?;
    Ok((
        ds.filter_advertisers(&plan.train_advertisers),
        ds.filter_advertisers(&plan.test_advertisers),
        plan,
    ))
}

/// Validation row indices for each of `k` folds, no group spanning two folds.
/// Groups are dealt largest first to the currently smallest fold.
pub fn group_k_fold<S: AsRef<str>>(groups: &[S], k: usize) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParams("k must be at least 2".into()));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_ref()).or_default().push(i);
    }
    if members.len() < k {
        return Err(Error::InsufficientGroups {
            needed: k,
            found: members.len(),
        });
    }
    let mut by_size: Vec<(&str, Vec<usize>)> = members.into_iter().collect();
    by_size.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (_, rows) in by_size {
        let target = (0..k).min_by_key(|&f| (folds[f].len(), f)).unwrap();
        folds[target].extend(rows);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Precision, recall and F1 in percent, political being the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    /// A precision or recall denominator was zero.
    pub degenerate: bool,
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_from_precision_recall(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn compute_metrics(pred: &[Label], truth: &[Label]) -> Result<MetricsReport> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        match (p.is_political(), t.is_political()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(MetricsReport {
        precision,
        recall,
        f1: f1_from_precision_recall(precision, recall),
        tp,
        fp,
        fn_,
        tn,
        degenerate: tp + fp == 0 || tp + fn_ == 0,
    })
}

/// Anything that can be trained on one dataset and label another.
pub trait TrainableSystem: Sync {
    fn name(&self) -> String;

    fn fit_predict(&self, train: &Dataset, test: &Dataset) -> Result<Vec<Label>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    #[default]
    Advertisers,
    Ads,
}

impl std::str::FromStr for ResampleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "advertisers" => Ok(ResampleUnit::Advertisers),
            "ads" => Ok(ResampleUnit::Ads),
            other => Err(Error::Config(format!("unknown resample unit `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub samples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub test_fraction: f64,
    pub resample_unit: ResampleUnit,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            samples: 1000,
            alpha: 0.05,
            seed: 0,
            test_fraction: 0.2,
            resample_unit: ResampleUnit::Advertisers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapVerdict {
    pub system_a: String,
    pub system_b: String,
    pub b: usize,
    pub alpha: f64,
    /// F1(B) - F1(A) per resample, in iteration order.
    pub deltas: Vec<f64>,
    pub p_value: f64,
    pub significant: bool,
}

/// One-sided add-one p-value for "B beats A": `(#{delta <= 0} + 1) / (B + 1)`.
pub fn bootstrap_p_value(deltas: &[f64]) -> f64 {
    let non_positive = deltas.iter().filter(|d| **d <= 0.0).count();
    (non_positive + 1) as f64 / (deltas.len() + 1) as f64
}

fn copy_id(rec: &LabeledAd, copy: usize) -> LabeledAd {
    let mut r = rec.clone();
    if copy > 0 {
        r.record.id = format!("{}#{copy}", r.record.id);
    }
    r
}

/// Draws a same-size resample. Advertiser-level draws keep each advertiser's ads
/// together and stop once the ad count first reaches the original size.
pub fn resample(ds: &Dataset, unit: ResampleUnit, rng: &mut impl Rng) -> Result<Dataset> {
    let n = ds.len();
    let mut out = Vec::with_capacity(n + n / 4);
    match unit {
        ResampleUnit::Advertisers => {
            let index: Vec<Vec<usize>> = ds.advertiser_index().into_values().collect();
            if index.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let mut copies = vec![0usize; index.len()];
            while out.len() < n {
                let a = rng.gen_range(0..index.len());
                for &i in &index[a] {
                    out.push(copy_id(&ds.records()[i], copies[a]));
                }
                copies[a] += 1;
            }
        }
        ResampleUnit::Ads => {
            let mut copies = vec![0usize; n];
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                out.push(copy_id(&ds.records()[i], copies[i]));
                copies[i] += 1;
            }
        }
    }
    Dataset::new(out)
}

/// Paired bootstrap comparison of two systems, retraining both on every resample.
pub fn paired_bootstrap(
    ds: &Dataset,
    sys_a: &dyn TrainableSystem,
    sys_b: &dyn TrainableSystem,
    cfg: &BootstrapConfig,
) -> Result<BootstrapVerdict> {
    if cfg.samples == 0 {
        return Err(Error::InvalidParams("bootstrap needs at least one sample".into()));
    }
    if ds.advertisers().len() < 2 {
        return Err(Error::InsufficientGroups {
            needed: 2,
            found: ds.advertisers().len(),
        });
    }
    let deltas = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<f64> {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64 + 1);
                let sample = resample(ds, cfg.resample_unit, &mut rng)?;
                let (train, test, _) = split_by_advertiser(&sample, cfg.test_fraction, rng.next_u64())?;
                let truth = test.labels();
                let f1_a = compute_metrics(&sys_a.fit_predict(&train, &test)?, &truth)?.f1;
                let f1_b = compute_metrics(&sys_b.fit_predict(&train, &test)?, &truth)?.f1;
                Ok(f1_b - f1_a)
            };
            run().map_err(|e| Error::Bootstrap {
                iteration: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let p_value = bootstrap_p_value(&deltas);
    Ok(BootstrapVerdict {
        system_a: sys_a.name(),
        system_b: sys_b.name(),
        b: cfg.samples,
        alpha: cfg.alpha,
        significant: p_value < cfg.alpha,
        p_value,
        deltas,
    })
}

impl BootstrapVerdict {
    pub fn write_deltas_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "delta_f1"])?;
        for (i, d) in self.deltas.iter().enumerate() {
            w.serialize((i, d))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
