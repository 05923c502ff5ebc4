//! Ad archive ingestion: record parsing, vote-derived labels, deduplication and
//! dataset-level aggregates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::targeting::parse_targets;

/// One archived ad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdRecord {
    pub id: String,
    pub title: String,
    pub message: String,
    pub political_votes: u64,
    pub not_political_votes: u64,
    /// Output of the archive's own classifier. Kept for audit, never used as a feature.
    pub political_probability: f64,
    pub advertiser: String,
    pub created_at: String,
    pub targets_raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Political,
    NonPolitical,
}

impl Label {
    pub fn is_political(self) -> bool {
        self == Label::Political
    }

    /// 1.0 for the positive (political) class.
    pub fn target(self) -> f64 {
        if self.is_political() {
            1.0
        } else {
            0.0
        }
    }

    pub fn from_political(political: bool) -> Self {
        if political {
            Label::Political
        } else {
            Label::NonPolitical
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledAd {
    pub record: AdRecord,
    pub label: Label,
}

fn line_err(line: Option<usize>, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        line,
        reason: reason.into(),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str, line: Option<usize>) -> Result<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(_) => Err(line_err(line, format!("field `{key}` must be a string"))),
    }
}

fn vote_field(obj: &Map<String, Value>, key: &'static str, line: Option<usize>) -> Result<u64> {
    let bad = || Error::BadVoteCount { line, field: key };
    match obj.get(key) {
        None | Some(Value::Null) => Ok(0),
        Some(Value::Number(n)) => {
            if let Some(v) = n.as_u64() {
                Ok(v)
            } else if let Some(f) = n.as_f64() {
                if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
                    Ok(f as u64)
                } else {
                    Err(bad())
                }
            } else {
                Err(bad())
            }
        }
        Some(_) => Err(bad()),
    }
}

/// Parses one JSON object in the archive schema.
pub fn parse_record(raw: &str) -> Result<AdRecord> {
    parse_record_at(raw, None)
}

fn parse_record_at(raw: &str, line: Option<usize>) -> Result<AdRecord> {
    let value: Value =
        serde_json::from_str(raw).map_err(|e| line_err(line, format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(line_err(line, "expected a JSON object"));
    };

    let id = string_field(&obj, "id", line)?.unwrap_or_default();
    if id.is_empty() {
        return Err(line_err(line, "missing or empty `id`"));
    }
    let title = string_field(&obj, "title", line)?;
    let message = string_field(&obj, "message", line)?;
    if title.as_deref().unwrap_or("").is_empty() && message.as_deref().unwrap_or("").is_empty() {
        return Err(line_err(line, "both `title` and `message` are absent or empty"));
    }

    let political_votes = vote_field(&obj, "political", line)?;
    let not_political_votes = vote_field(&obj, "not_political", line)?;

    let political_probability = match obj.get("political_probability") {
        None | Some(Value::Null) => 0.0,
        Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
        Some(_) => f64::NAN,
    };
    if !(0.0..=1.0).contains(&political_probability) {
        return Err(line_err(line, "`political_probability` must lie in [0, 1]"));
    }

    // The archive stores targets as a JSON-encoded string; accept an inline array too.
    let targets_raw = match obj.get("targets") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(v @ Value::Array(_)) => v.to_string(),
        Some(_) => return Err(line_err(line, "field `targets` must be a string or an array")),
    };

    Ok(AdRecord {
        id,
        title: title.unwrap_or_default(),
        message: message.unwrap_or_default(),
        political_votes,
        not_political_votes,
        political_probability,
        advertiser: string_field(&obj, "advertiser", line)?.unwrap_or_default(),
        created_at: string_field(&obj, "created_at", line)?.unwrap_or_default(),
        targets_raw,
    })
}

impl AdRecord {
    /// Serializes the record back into the ingest schema.
    pub fn to_json_line(&self) -> String {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::String(self.id.clone()));
        obj.insert("title".into(), Value::String(self.title.clone()));
        obj.insert("message".into(), Value::String(self.message.clone()));
        obj.insert("political".into(), Value::from(self.political_votes));
        obj.insert("not_political".into(), Value::from(self.not_political_votes));
        obj.insert(
            "political_probability".into(),
            Value::from(self.political_probability),
        );
        obj.insert("advertiser".into(), Value::String(self.advertiser.clone()));
        obj.insert("created_at".into(), Value::String(self.created_at.clone()));
        obj.insert("targets".into(), Value::String(self.targets_raw.clone()));
        Value::Object(obj).to_string()
    }

    fn created_key(&self) -> (Option<DateTime<Utc>>, &str) {
        (parse_timestamp(&self.created_at), &self.created_at)
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f%#z", "%Y-%m-%dT%H:%M:%S%.f%#z"] {
        if let Ok(t) = DateTime::parse_from_str(s, fmt) {
            return Some(t.with_timezone(&Utc));
        }
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

/// Strict-majority vote rule. Ties (including 0-0) yield `None`.
pub fn derive_label(rec: &AdRecord) -> Option<Label> {
    use std::cmp::Ordering::*;
    match rec.political_votes.cmp(&rec.not_political_votes) {
        Greater => Some(Label::Political),
        Less => Some(Label::NonPolitical),
        Equal => None,
    }
}

/// An immutable, labeled, id-unique collection of ads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<LabeledAd>,
    advertisers: BTreeSet<String>,
}

impl Dataset {
    pub fn new(records: Vec<LabeledAd>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if !ids.insert(r.record.id.as_str()) {
                return Err(line_err(None, format!("duplicate id `{}`", r.record.id)));
            }
            if derive_label(&r.record) != Some(r.label) {
                return Err(line_err(
                    None,
                    format!("label of `{}` disagrees with its votes", r.record.id),
                ));
            }
        }
        let advertisers = records.iter().map(|r| r.record.advertiser.clone()).collect();
        Ok(Dataset {
            records,
            advertisers,
        })
    }

    /// Labels every record with the vote rule, dropping ties.
    pub fn from_records(records: Vec<AdRecord>) -> Result<Self> {
        Dataset::new(
            records
                .into_iter()
                .filter_map(|record| derive_label(&record).map(|label| LabeledAd { record, label }))
                .collect(),
        )
    }

    pub fn records(&self) -> &[LabeledAd] {
        &self.records
    }

    pub fn advertisers(&self) -> &BTreeSet<String> {
        &self.advertisers
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.records.iter().filter(|r| r.label.is_political()).count();
        (pos, self.records.len() - pos)
    }

    /// Records whose advertiser is in `keep`, in dataset order.
    pub fn filter_advertisers(&self, keep: &BTreeSet<String>) -> Dataset {
        let records: Vec<LabeledAd> = self
            .records
            .iter()
            .filter(|r| keep.contains(&r.record.advertiser))
            .cloned()
            .collect();
        let advertisers = records.iter().map(|r| r.record.advertiser.clone()).collect();
        Dataset {
            records,
            advertisers,
        }
    }

    /// Ad indices grouped by advertiser.
    pub fn advertiser_index(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            map.entry(r.record.advertiser.as_str()).or_default().push(i);
        }
        map
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.record.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// SHA-256 over the serialized records; identifies the dataset in model bundles.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for r in &self.records {
            hasher.update(r.record.to_json_line().as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ErrorPolicy {
    #[default]
    SkipAndLog,
    FailFast,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub lines: usize,
    pub kept: usize,
    /// Records without a strict vote majority.
    pub skipped_tied: usize,
    pub malformed: usize,
    /// Older snapshots superseded by a later record with the same id.
    pub duplicates_dropped: usize,
    pub malformed_lines: Vec<usize>,
}

pub fn load_corpus(path: &Path, policy: ErrorPolicy) -> Result<(Dataset, IngestSummary)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, policy)
}

/// Parses newline-delimited records already held in memory.
pub fn parse_corpus(text: &str, policy: ErrorPolicy) -> Result<(Dataset, IngestSummary)> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let parsed: Vec<(usize, Result<AdRecord>)> = lines
        .par_iter()
        .map(|&(n, l)| (n, parse_record_at(l, Some(n))))
        .collect();

    let mut summary = IngestSummary {
        lines: lines.len(),
        ..Default::default()
    };
    let mut order: Vec<String> = Vec::new();
    let mut latest: HashMap<String, AdRecord> = HashMap::new();
    for (n, result) in parsed {
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                if policy == ErrorPolicy::FailFast {
                    return Err(e);
                }
                log::warn!("skipping line {n}: {e}");
                summary.malformed += 1;
                summary.malformed_lines.push(n);
                continue;
            }
        };
        match latest.get_mut(&rec.id) {
            Some(existing) => {
                summary.duplicates_dropped += 1;
                // later line wins ties on timestamp
                if rec.created_key() >= existing.created_key() {
                    *existing = rec;
                }
            }
            None => {
                order.push(rec.id.clone());
                latest.insert(rec.id.clone(), rec);
            }
        }
    }

    let mut records = Vec::with_capacity(order.len());
    for id in order {
        let rec = latest.remove(&id).expect("id recorded on first sight");
        match derive_label(&rec) {
            Some(label) => records.push(LabeledAd { record: rec, label }),
            None => summary.skipped_tied += 1,
        }
    }
    summary.kept = records.len();
    Ok((Dataset::new(records)?, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeStat {
    pub attribute: String,
    pub ads: usize,
    pub political_ads: usize,
    pub occurrences: usize,
    pub unique_values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCount {
    pub value: String,
    pub ads: usize,
    pub political_ads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_ads: usize,
    pub political_ads: usize,
    pub non_political_ads: usize,
    /// political : non-political; absent when there are no non-political ads.
    pub class_ratio: Option<f64>,
    pub advertisers: usize,
    pub malformed_targets: usize,
    pub attributes: Vec<AttributeStat>,
    pub regions: Vec<ValueCount>,
    pub top_interests: Vec<ValueCount>,
}

/// Aggregates over the raw targeting payloads: per-attribute usage, per-region ad
/// counts, and the `top_k` most used interests.
pub fn corpus_stats(ds: &Dataset, top_k: usize) -> Result<StatsReport> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (political_ads, non_political_ads) = ds.class_counts();

    #[derive(Default)]
    struct Acc {
        ads: usize,
        political: usize,
        occurrences: usize,
        values: BTreeSet<String>,
    }
    let mut attrs: BTreeMap<String, Acc> = BTreeMap::new();
    let mut regions: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut interests: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut malformed_targets = 0;

    for ad in ds.records() {
        let spec = match parse_targets(&ad.record.targets_raw) {
            Ok(s) => s,
            Err(_) => {
                malformed_targets += 1;
                continue;
            }
        };
        let pol = usize::from(ad.label.is_political());
        let mut seen_attr = BTreeSet::new();
        let mut seen_region = BTreeSet::new();
        let mut seen_interest = BTreeSet::new();
        for entry in &spec.entries {
            let acc = attrs.entry(entry.target.clone()).or_default();
            acc.occurrences += 1;
            if let Some(seg) = &entry.segment {
                acc.values.insert(seg.clone());
            }
            if seen_attr.insert(entry.target.as_str()) {
                acc.ads += 1;
                acc.political += pol;
            }
            let Some(seg) = entry.segment.as_deref().map(str::trim) else {
                continue;
            };
            let table = match entry.target.as_str() {
                "Region" if seen_region.insert(seg) => &mut regions,
                "Interest" if seen_interest.insert(seg) => &mut interests,
                _ => continue,
            };
            let c = table.entry(seg.to_string()).or_default();
            c.0 += 1;
            c.1 += pol;
        }
    }

    let to_rows = |m: BTreeMap<String, (usize, usize)>| -> Vec<ValueCount> {
        m.into_iter()
            .map(|(value, (ads, political_ads))| ValueCount {
                value,
                ads,
                political_ads,
            })
            .collect()
    };
    let mut regions = to_rows(regions);
    regions.sort_by(|a, b| {
        b.political_ads
            .cmp(&a.political_ads)
            .then(b.ads.cmp(&a.ads))
            .then(a.value.cmp(&b.value))
    });
    let mut top_interests = to_rows(interests);
    top_interests.sort_by(|a, b| b.ads.cmp(&a.ads).then(a.value.cmp(&b.value)));
    top_interests.truncate(top_k);

    Ok(StatsReport {
        total_ads: ds.len(),
        political_ads,
        non_political_ads,
        class_ratio: (non_political_ads > 0).then(|| political_ads as f64 / non_political_ads as f64),
        advertisers: ds.advertisers().len(),
        malformed_targets,
        attributes: attrs
            .into_iter()
            .map(|(attribute, a)| AttributeStat {
                attribute,
                ads: a.ads,
                political_ads: a.political,
                occurrences: a.occurrences,
                unique_values: a.values.len(),
            })
            .collect(),
        regions,
        top_interests,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_path(path)
        .map_err(Error::from)
}

impl StatsReport {
    pub fn write_attributes_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["attribute", "ads", "political_ads", "occurrences", "unique_values"])?;
        for a in &self.attributes {
            w.serialize((&a.attribute, a.ads, a.political_ads, a.occurrences, a.unique_values))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_value_csv(rows: &[ValueCount], header: &str, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record([header, "ads", "political_ads"])?;
        for r in rows {
            w.serialize((&r.value, r.ads, r.political_ads))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, pol: u64, not: u64, adv: &str, created: &str, targets: &str) -> String {
        serde_json::json!({
            "id": id, "title": "T", "message": "M", "political": pol, "not_political": not,
            "political_probability": 0.9, "advertiser": adv, "created_at": created, "targets": targets,
        })
        .to_string()
    }

    #[test]
    fn parses_full_record() {
        let r = parse_record(
            r#"{"id":"a1","title":"T","message":"M","political":3,"not_political":1,"political_probability":0.8,"advertiser":"X","created_at":"2018-01-01T00:00:00Z","targets":"[]"}"#,
        )
        .unwrap();
        assert_eq!(r.id, "a1");
        assert_eq!(r.title, "T");
        assert_eq!(r.political_votes, 3);
        assert_eq!(r.not_political_votes, 1);
        assert_eq!(r.advertiser, "X");
        assert_eq!(r.targets_raw, "[]");
    }

    #[test]
    fn missing_title_defaults_to_empty() {
        let r = parse_record(r#"{"id":"a2","message":"M","political":0,"not_political":0}"#).unwrap();
        assert_eq!(r.title, "");
        assert_eq!(r.political_votes, 0);
    }

    #[test]
    fn missing_votes_default_to_zero() {
        let r = parse_record(r#"{"id":"a3","title":"T"}"#).unwrap();
        assert_eq!((r.political_votes, r.not_political_votes), (0, 0));
    }

    #[test]
    fn rejects_empty_id_and_textless_records() {
        assert!(matches!(
            parse_record(r#"{"id":"","message":"M"}"#),
            Err(Error::MalformedRecord { .. })
        ));
        assert!(matches!(
            parse_record(r#"{"id":"x"}"#),
            Err(Error::MalformedRecord { .. })
        ));
        assert!(matches!(
            parse_record("{not json"),
            Err(Error::MalformedRecord { .. })
        ));
    }

    #[test]
    fn rejects_bad_votes() {
        for raw in [
            r#"{"id":"a","message":"M","political":-1}"#,
            r#"{"id":"a","message":"M","not_political":1.5}"#,
            r#"{"id":"a","message":"M","political":"3"}"#,
        ] {
            assert!(matches!(parse_record(raw), Err(Error::BadVoteCount { .. })), "{raw}");
        }
    }

    #[test]
    fn inline_target_array_is_accepted() {
        let r = parse_record(r#"{"id":"a","message":"M","targets":[{"target":"Region","segment":"Texas"}]}"#)
            .unwrap();
        assert!(r.targets_raw.contains("Texas"));
    }

    #[test]
    fn label_rule() {
        let mut r = parse_record(r#"{"id":"a","message":"M"}"#).unwrap();
        let mut label = |p, n| {
            r.political_votes = p;
            r.not_political_votes = n;
            derive_label(&r)
        };
        assert_eq!(label(3, 1), Some(Label::Political));
        assert_eq!(label(0, 2), Some(Label::NonPolitical));
        assert_eq!(label(2, 2), None);
        assert_eq!(label(0, 0), None);
    }

    #[test]
    fn tied_votes_are_skipped() {
        let text = [
            line("1", 3, 1, "A", "", "[]"),
            line("2", 0, 2, "A", "", "[]"),
            line("3", 2, 2, "B", "", "[]"),
            line("4", 5, 0, "B", "", "[]"),
            line("5", 1, 4, "C", "", "[]"),
        ]
        .join("\n");
        let (ds, summary) = parse_corpus(&text, ErrorPolicy::FailFast).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(summary.skipped_tied, 1);
        assert_eq!(summary.kept, 4);
    }

    #[test]
    fn empty_input_gives_empty_dataset() {
        let (ds, summary) = parse_corpus("", ErrorPolicy::FailFast).unwrap();
        assert!(ds.is_empty());
        assert_eq!(summary, IngestSummary::default());
    }

    #[test]
    fn duplicate_ids_keep_latest_snapshot() {
        let text = [
            line("1", 3, 1, "late", "2018-05-02T00:00:00Z", "[]"),
            line("1", 3, 1, "early", "2018-05-01T00:00:00Z", "[]"),
        ]
        .join("\n");
        let (ds, summary) = parse_corpus(&text, ErrorPolicy::FailFast).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].record.advertiser, "late");
        assert_eq!(summary.duplicates_dropped, 1);
    }

    #[test]
    fn archive_timestamp_format_is_ordered() {
        let a = parse_timestamp("2018-01-15 19:13:59.0129-05").unwrap();
        let b = parse_timestamp("2018-01-15T23:00:00Z").unwrap();
        assert!(a > b);
    }

    #[test]
    fn error_policy() {
        let text = format!("{}\nnot json\n{}", line("1", 1, 0, "A", "", ""), line("2", 0, 1, "A", "", ""));
        let (ds, summary) = parse_corpus(&text, ErrorPolicy::SkipAndLog).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(summary.malformed_lines, vec![2]);
        match parse_corpus(&text, ErrorPolicy::FailFast) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let text = [
            line("1", 3, 1, "A", "2018-01-01", r#"[{"target":"Region","segment":"Texas"}]"#),
            line("2", 0, 2, "B", "", ""),
        ]
        .join("\n");
        let (ds, _) = parse_corpus(&text, ErrorPolicy::FailFast).unwrap();
        let (again, _) = parse_corpus(&ds.to_jsonl(), ErrorPolicy::FailFast).unwrap();
        assert_eq!(ds, again);
        assert_eq!(ds.digest(), again.digest());
    }

    fn stats_fixture(rows: &[(u64, u64, &str)]) -> Dataset {
        let text = rows
            .iter()
            .enumerate()
            .map(|(i, (p, n, t))| line(&i.to_string(), *p, *n, "A", "", t))
            .collect::<Vec<_>>()
            .join("\n");
        parse_corpus(&text, ErrorPolicy::FailFast).unwrap().0
    }

    #[test]
    fn stats_class_ratio() {
        let mut rows = vec![(2, 0, "[]"); 9];
        rows.push((0, 2, "[]"));
        let s = corpus_stats(&stats_fixture(&rows), 10).unwrap();
        assert_eq!(s.political_ads + s.non_political_ads, s.total_ads);
        assert_eq!(s.class_ratio, Some(9.0));
    }

    #[test]
    fn stats_single_region() {
        let t = r#"[{"target":"Region","segment":"Texas"}]"#;
        let s = corpus_stats(&stats_fixture(&[(1, 0, t), (1, 0, t), (1, 0, t)]), 10).unwrap();
        assert_eq!(s.regions.len(), 1);
        assert_eq!(s.regions[0].value, "Texas");
        assert_eq!(s.regions[0].political_ads, 3);
        assert_eq!(s.attributes[0].ads, 3);
    }

    #[test]
    fn stats_top_interests() {
        let obama = r#"[{"target":"Interest","segment":"Barack Obama"}]"#;
        let sanders = r#"[{"target":"Interest","segment":"Bernie Sanders"}]"#;
        let s = corpus_stats(&stats_fixture(&[(1, 0, obama), (1, 0, obama), (1, 0, sanders)]), 10).unwrap();
        let top: Vec<_> = s.top_interests.iter().map(|v| (v.value.as_str(), v.ads)).collect();
        assert_eq!(top, vec![("Barack Obama", 2), ("Bernie Sanders", 1)]);
        for a in &s.attributes {
            assert!(a.ads <= s.total_ads);
        }
    }

    #[test]
    fn stats_reject_empty() {
        assert!(matches!(corpus_stats(&Dataset::default(), 10), Err(Error::EmptyDataset)));
    }
}
