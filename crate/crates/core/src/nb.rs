//! Multinomial naive Bayes over nonnegative sparse features, computed in log space.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnbParams {
    pub alpha: f64,
    /// Replace empirical priors by class-weighted (uniform) ones.
    pub class_weighted_prior: bool,
}

impl Default for MnbParams {
    fn default() -> Self {
        MnbParams {
            alpha: 1.0,
            class_weighted_prior: false,
        }
    }
}

/// Index 0 is the political class, index 1 the non-political class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub alpha: f64,
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
}

fn class_index(label: Label) -> usize {
    if label.is_political() {
        0
    } else {
        1
    }
}

pub fn train_mnb(x: &[SparseVector], y: &[Label], params: MnbParams) -> Result<MnbModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidParams("alpha must be positive".into()));
    }
    let n_features = x.first().map_or(0, SparseVector::dim);
    let mut class_docs = [0usize; 2];
    let mut counts = [vec![0.0; n_features], vec![0.0; n_features]];
    for (row, label) in x.iter().zip(y) {
        if row.dim() != n_features {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                got: row.dim(),
            });
        }
        let c = class_index(*label);
        class_docs[c] += 1;
        for (f, v) in row.iter() {
            if v < 0.0 {
                return Err(Error::NegativeFeature { feature: f, value: v });
            }
            counts[c][f] += v;
        }
    }
    if class_docs.contains(&0) {
        return Err(Error::SingleClassTraining);
    }

    let n = x.len() as f64;
    let log_prior = if params.class_weighted_prior {
        [0.5f64.ln(), 0.5f64.ln()]
    } else {
        [
            (class_docs[0] as f64 / n).ln(),
            (class_docs[1] as f64 / n).ln(),
        ]
    };
    let log_likelihood = counts.map(|c| {
        let denom = (c.iter().sum::<f64>() + params.alpha * n_features as f64).ln();
        c.iter().map(|v| (v + params.alpha).ln() - denom).collect()
    });
    Ok(MnbModel {
        alpha: params.alpha,
        log_prior,
        log_likelihood,
    })
}

impl MnbModel {
    pub fn n_features(&self) -> usize {
        self.log_likelihood[0].len()
    }

    /// Unnormalized per-class log joint.
    pub fn joint_log_likelihood(&self, x: &SparseVector) -> [f64; 2] {
        let mut jll = self.log_prior;
        for (f, v) in x.iter() {
            for (c, j) in jll.iter_mut().enumerate() {
                *j += v * self.log_likelihood[c][f];
            }
        }
        jll
    }

    /// P(political | x) via log-sum-exp normalization.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.dim(),
            });
        }
        let [p, n] = self.joint_log_likelihood(x);
        let m = p.max(n);
        let lse = m + ((p - m).exp() + (n - m).exp()).ln();
        Ok((p - lse).exp())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MnbDocument {
            format: MNB_FORMAT.into(),
            schema_version: MNB_SCHEMA_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MnbDocument = serde_json::from_str(s)?;
        if doc.format != MNB_FORMAT || doc.schema_version != MNB_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: format!("{} {}", doc.format, doc.schema_version),
                supported: format!("{MNB_FORMAT} {MNB_SCHEMA_VERSION}"),
            });
        }
        Ok(doc.model)
    }
}

pub const MNB_FORMAT: &str = "polads-mnb";
pub const MNB_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MnbDocument {
    format: String,
    schema_version: u32,
    #[serde(flatten)]
    model: MnbModel,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use Label::*;

    #[test]
    fn json_round_trip() {
        let m = hand_model();
        let back = MnbModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bumped = m.to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(MnbModel::from_json(&bumped), Err(Error::SchemaVersion { .. })));
    }

    fn hand_model() -> MnbModel {
        let x = vec![
            SparseVector::from_dense(&[1.0, 0.0]),
            SparseVector::from_dense(&[0.0, 1.0]),
        ];
        train_mnb(&x, &[Political, NonPolitical], MnbParams::default()).unwrap()
    }

    #[test]
    fn smoothed_likelihoods() {
        let m = hand_model();
        assert_abs_diff_eq!(m.log_likelihood[0][0].exp(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.log_likelihood[0][1].exp(), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.log_prior[0], 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.log_prior[1], 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn likelihoods_and_priors_normalize() {
        let x = vec![
            SparseVector::from_dense(&[0.3, 0.0, 1.2]),
            SparseVector::from_dense(&[0.0, 2.0, 0.1]),
            SparseVector::from_dense(&[0.5, 0.5, 0.0]),
        ];
        let m = train_mnb(&x, &[Political, NonPolitical, Political], MnbParams::default()).unwrap();
        for c in 0..2 {
            let s: f64 = m.log_likelihood[c].iter().map(|l| l.exp()).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(m.log_prior[0].exp() + m.log_prior[1].exp(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unused_feature_gets_smoothing_floor() {
        let x = vec![
            SparseVector::from_dense(&[1.0, 0.0]),
            SparseVector::from_dense(&[1.0, 0.0]),
        ];
        let m = train_mnb(&x, &[Political, NonPolitical], MnbParams::default()).unwrap();
        for c in 0..2 {
            // T_c = 1, F = 2
            assert_abs_diff_eq!(m.log_likelihood[c][1].exp(), 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn errors() {
        let x = vec![SparseVector::from_dense(&[1.0])];
        assert!(matches!(
            train_mnb(&x, &[Political], MnbParams::default()),
            Err(Error::SingleClassTraining)
        ));
        let x = vec![SparseVector::from_dense(&[-1.0]), SparseVector::from_dense(&[1.0])];
        assert!(matches!(
            train_mnb(&x, &[Political, NonPolitical], MnbParams::default()),
            Err(Error::NegativeFeature { .. })
        ));
    }

    #[test]
    fn empty_input_returns_prior() {
        let m = hand_model();
        assert_abs_diff_eq!(m.predict_proba(&SparseVector::zeros(2)).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hand_posterior() {
        let m = hand_model();
        let p = m.predict_proba(&SparseVector::from_dense(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(p, 2.0 / 3.0, epsilon = 1e-12);
        let p2 = m.predict_proba(&SparseVector::from_dense(&[2.0, 0.0])).unwrap();
        assert!(p2 > p);
    }

    #[test]
    fn neutral_feature_leaves_posterior_unchanged() {
        let x = vec![
            SparseVector::from_dense(&[2.0, 0.0, 1.0]),
            SparseVector::from_dense(&[0.0, 2.0, 1.0]),
        ];
        let m = train_mnb(&x, &[Political, NonPolitical], MnbParams::default()).unwrap();
        let base = m.predict_proba(&SparseVector::from_dense(&[1.0, 0.0, 0.0])).unwrap();
        let with = m.predict_proba(&SparseVector::from_dense(&[1.0, 0.0, 3.0])).unwrap();
        assert_abs_diff_eq!(base, with, epsilon = 1e-12);
    }

    #[test]
    fn long_documents_stay_finite() {
        let m = hand_model();
        let p = m.predict_proba(&SparseVector::from_dense(&[10_000.0, 3.0])).unwrap();
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        let q = m.predict_proba(&SparseVector::from_dense(&[3.0, 10_000.0])).unwrap();
        assert!(q.is_finite() && q < 1e-100 || q == 0.0);
        assert_abs_diff_eq!(p + (1.0 - p), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_prior_is_uniform() {
        let x = vec![
            SparseVector::from_dense(&[1.0]),
            SparseVector::from_dense(&[1.0]),
            SparseVector::from_dense(&[1.0]),
        ];
        let params = MnbParams { class_weighted_prior: true, ..Default::default() };
        let m = train_mnb(&x, &[Political, Political, NonPolitical], params).unwrap();
        assert_eq!(m.log_prior[0], m.log_prior[1]);
    }
}
