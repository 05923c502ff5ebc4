//! Targeting payload parsing, normalization and one-hot encoding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Attributes removed during normalization: State overlaps Region, the other two are too
/// sparse to learn from.
pub const DROPPED_ATTRIBUTES: [&str; 3] = ["State", "Engaged with Content", "Language"];

/// Attributes that always receive a missing-indicator column, even when absent from the
/// training data.
pub const CORE_ATTRIBUTES: [&str; 14] = [
    "Activity",
    "Agency",
    "City",
    "Employer",
    "Gender",
    "Interest",
    "Job Title",
    "Like",
    "List",
    "Region",
    "Retargeting",
    "School",
    "Segment",
    "Website",
];

/// Encoded value of an absent age bound.
pub const AGE_SENTINEL: f64 = -1.0;

pub const MIN_AGE: u32 = 13;
pub const MAX_AGE: u32 = 120;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetEntry {
    pub target: String,
    pub segment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TargetingSpec {
    pub entries: Vec<TargetEntry>,
}

pub fn parse_targets(raw: &str) -> Result<TargetingSpec> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(TargetingSpec::default());
    }
    let value: Value =
        serde_json::from_str(raw).map_err(|e| Error::MalformedTargets(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(Error::MalformedTargets("expected a JSON array".into()));
    };
    let mut entries = Vec::with_capacity(items.len());
    for item in items {
        let Value::Object(obj) = item else {
            return Err(Error::MalformedTargets("array element is not an object".into()));
        };
        let target = match obj.get("target") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            _ => {
                log::warn!("targeting entry without a target name ignored");
                continue;
            }
        };
        let segment = match obj.get("segment") {
            Some(Value::String(s)) => Some(s.clone()),
            Some(Value::Number(n)) => Some(n.to_string()),
            _ => None,
        };
        entries.push(TargetEntry { target, segment });
    }
    Ok(TargetingSpec { entries })
}

/// Like [`parse_targets`] but degrades a malformed payload to "no targeting".
pub fn parse_targets_lenient(raw: &str) -> TargetingSpec {
    parse_targets(raw).unwrap_or_else(|e| {
        log::warn!("{e}; treating targeting as absent");
        TargetingSpec::default()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedTargets {
    pub min_age: Option<u32>,
    pub max_age: Option<u32>,
    /// Every attribute in use, including ones without a value.
    pub attributes: BTreeSet<String>,
    pub categorical: BTreeSet<(String, String)>,
}

fn parse_age(s: &str) -> Option<u32> {
    s.trim()
        .parse::<u32>()
        .ok()
        .filter(|a| (MIN_AGE..=MAX_AGE).contains(a))
}

/// Reads an age-range phrase such as `"25 - 54"`, `"18 and older"`, `"65+"` or
/// `"up to 45"`.
pub fn parse_age_range(s: &str) -> (Option<u32>, Option<u32>) {
    let numbers: Vec<u32> = s
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
        .collect();
    let lower = s.to_lowercase();
    let bounded = |a: u32| Some(a).filter(|a| (MIN_AGE..=MAX_AGE).contains(a));
    match numbers.as_slice() {
        [lo, hi, ..] => (bounded(*lo), bounded(*hi)),
        [n] => {
            if ["older", "over", "+", "above", "plus"].iter().any(|k| lower.contains(k)) {
                (bounded(*n), None)
            } else if ["younger", "under", "up to", "below"].iter().any(|k| lower.contains(k)) {
                (None, bounded(*n))
            } else {
                (bounded(*n), bounded(*n))
            }
        }
        [] => (None, None),
    }
}

pub fn normalize_targets(spec: &TargetingSpec) -> NormalizedTargets {
    let mut out = NormalizedTargets::default();
    let mut range = (None, None);
    for entry in &spec.entries {
        let attr = entry.target.trim();
        let value = entry
            .segment
            .as_deref()
            .map(str::trim)
            .filter(|v| !v.is_empty());
        match attr {
            a if DROPPED_ATTRIBUTES.contains(&a) => {}
            "MinAge" | "MaxAge" => {
                let age = value.and_then(parse_age);
                if age.is_none() {
                    log::debug!("unparseable {attr} value {:?}", entry.segment);
                }
                let slot = if attr == "MinAge" { &mut out.min_age } else { &mut out.max_age };
                if slot.is_none() {
                    *slot = age;
                }
            }
            "Age" => {
                if let Some(v) = value {
                    let (lo, hi) = parse_age_range(v);
                    range = (range.0.or(lo), range.1.or(hi));
                }
            }
            _ => {
                out.attributes.insert(attr.to_string());
                if let Some(v) = value {
                    out.categorical.insert((attr.to_string(), v.to_string()));
                }
            }
        }
    }
    if out.min_age.is_none() && out.max_age.is_none() {
        out.min_age = range.0;
        out.max_age = range.1;
    }
    if let (Some(lo), Some(hi)) = (out.min_age, out.max_age) {
        if hi < lo {
            log::debug!("max age {hi} below min age {lo}; dropping max");
            out.max_age = None;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetColumn {
    MinAge,
    MaxAge,
    Missing { attribute: String },
    Value { attribute: String, value: String },
}

impl TargetColumn {
    /// Display name; missing indicators carry the `_0` suffix.
    pub fn name(&self) -> String {
        match self {
            TargetColumn::MinAge => "MinAge".into(),
            TargetColumn::MaxAge => "MaxAge".into(),
            TargetColumn::Missing { attribute } => format!("{attribute}_0"),
            TargetColumn::Value { attribute, value } => format!("{attribute}={value}"),
        }
    }
}

pub const ENCODER_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct EncoderDocument {
    schema_version: u32,
    attributes: Vec<String>,
    columns: Vec<TargetColumn>,
}

/// One-hot vocabulary for targeting attributes, fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEncoder {
    attributes: Vec<String>,
    columns: Vec<TargetColumn>,
    missing_index: BTreeMap<String, usize>,
    value_index: BTreeMap<(String, String), usize>,
}

impl TargetEncoder {
    pub fn fit(train: &[NormalizedTargets]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut values: BTreeMap<String, BTreeSet<String>> = CORE_ATTRIBUTES
            .iter()
            .map(|a| (a.to_string(), BTreeSet::new()))
            .collect();
        for nt in train {
            for a in &nt.attributes {
                values.entry(a.clone()).or_default();
            }
            for (a, v) in &nt.categorical {
                values.entry(a.clone()).or_default().insert(v.clone());
            }
        }
        let mut columns = vec![TargetColumn::MinAge, TargetColumn::MaxAge];
        for (attribute, vals) in &values {
            columns.push(TargetColumn::Missing {
                attribute: attribute.clone(),
            });
            columns.extend(vals.iter().map(|v| TargetColumn::Value {
                attribute: attribute.clone(),
                value: v.clone(),
            }));
        }
        Ok(Self::from_parts(values.into_keys().collect(), columns))
    }

    fn from_parts(attributes: Vec<String>, columns: Vec<TargetColumn>) -> Self {
        let mut missing_index = BTreeMap::new();
        let mut value_index = BTreeMap::new();
        for (i, c) in columns.iter().enumerate() {
            match c {
                TargetColumn::Missing { attribute } => {
                    missing_index.insert(attribute.clone(), i);
                }
                TargetColumn::Value { attribute, value } => {
                    value_index.insert((attribute.clone(), value.clone()), i);
                }
                _ => {}
            }
        }
        TargetEncoder {
            attributes,
            columns,
            missing_index,
            value_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[TargetColumn] {
        &self.columns
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(TargetColumn::name).collect()
    }

    pub fn column_of(&self, attribute: &str, value: &str) -> Option<usize> {
        self.value_index
            .get(&(attribute.to_string(), value.to_string()))
            .copied()
    }

    pub fn missing_column(&self, attribute: &str) -> Option<usize> {
        self.missing_index.get(attribute).copied()
    }

    pub fn encode(&self, nt: &NormalizedTargets) -> SparseVector {
        let age = |a: Option<u32>| a.map_or(AGE_SENTINEL, f64::from);
        let mut pairs = vec![(0, age(nt.min_age)), (1, age(nt.max_age))];
        for (attribute, &col) in &self.missing_index {
            if !nt.attributes.contains(attribute) {
                pairs.push((col, 1.0));
            }
        }
        for (a, v) in &nt.categorical {
            if let Some(&col) = self.value_index.get(&(a.clone(), v.clone())) {
                pairs.push((col, 1.0));
            }
        }
        SparseVector::from_pairs(self.dim(), pairs).expect("columns come from the encoder")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EncoderDocument {
            schema_version: ENCODER_SCHEMA_VERSION,
            attributes: self.attributes.clone(),
            columns: self.columns.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: EncoderDocument = serde_json::from_str(s)?;
        if doc.schema_version != ENCODER_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: doc.schema_version.to_string(),
                supported: ENCODER_SCHEMA_VERSION.to_string(),
            });
        }
        Ok(Self::from_parts(doc.attributes, doc.columns))
    }
}
