//! Seeded generator of ProPublica-shaped ad records for tests, benchmarks and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{derive_label, AdRecord, Dataset, LabeledAd};
use crate::error::Result;

const POLITICAL_WORDS: &[&str] = &[
    "vote", "election", "senate", "congress", "candidate", "campaign", "democrats", "republicans", "trump",
    "ballot", "policy", "healthcare", "immigration", "petition", "rally", "volunteer", "district", "governor",
    "taxes", "rights", "donate", "midterm", "representative", "legislation",
];

const COMMERCIAL_WORDS: &[&str] = &[
    "sale", "shoes", "discount", "shipping", "recipe", "fitness", "travel", "hotel", "coffee", "fashion",
    "skincare", "gadget", "subscription", "weekend", "concert", "furniture", "garden", "kitchen", "course",
    "delivery", "offer", "collection", "beauty", "vacation",
];

const SHARED_WORDS: &[&str] = &[
    "today", "new", "community", "family", "join", "learn", "more", "free", "local", "people", "great", "help",
    "support", "share", "future", "world", "best", "time", "work", "home",
];

const REGIONS: &[&str] = &[
    "California", "Texas", "Florida", "New York", "Ohio", "Pennsylvania", "Michigan", "Georgia", "Arizona",
    "Wisconsin",
];

const POLITICAL_INTERESTS: &[&str] = &[
    "Barack Obama", "Bernie Sanders", "Democratic Party", "Politics", "Social justice", "Republican Party",
    "Environmentalism",
];

const COMMERCIAL_INTERESTS: &[&str] = &["Running", "Cooking", "Travel", "Fashion", "Video games", "Coffee", "Yoga"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_ads: usize,
    pub n_advertisers: usize,
    /// Share of advertisers that mainly run political ads.
    pub political_share: f64,
    /// Probability that any one word is drawn from the other class's vocabulary.
    pub noise: f64,
    /// Share of records whose votes tie and are therefore unlabeled.
    pub tie_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_ads: 600,
            n_advertisers: 60,
            political_share: 0.9,
            noise: 0.1,
            tie_rate: 0.0,
            seed: 0,
        }
    }
}

fn words(rng: &mut ChaCha8Rng, political: bool, n: usize, noise: f64) -> String {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r: f64 = rng.gen();
        let pool = if r < 0.35 {
            SHARED_WORDS
        } else if (rng.gen::<f64>() < noise) != political {
            COMMERCIAL_WORDS
        } else {
            POLITICAL_WORDS
        };
        out.push(*pool.choose(rng).unwrap());
    }
    out.join(" ")
}

fn targets(rng: &mut ChaCha8Rng, political: bool) -> String {
    let mut entries: Vec<(String, String)> = Vec::new();
    let region = *REGIONS.choose(rng).unwrap();
    if rng.gen_bool(0.7) {
        entries.push(("Region".into(), region.into()));
        entries.push(("State".into(), region.into()));
    }
    if political {
        if rng.gen_bool(0.85) {
            entries.push(("MinAge".into(), "18".into()));
        }
        if rng.gen_bool(0.6) {
            entries.push(("Interest".into(), POLITICAL_INTERESTS.choose(rng).unwrap().to_string()));
        }
        if rng.gen_bool(0.2) {
            entries.push(("Retargeting".into(), "people who may be similar to their customers".into()));
        }
    } else {
        if rng.gen_bool(0.3) {
            entries.push(("MinAge".into(), rng.gen_range(21..35).to_string()));
            entries.push(("MaxAge".into(), rng.gen_range(40..65).to_string()));
        }
        if rng.gen_bool(0.7) {
            entries.push(("Interest".into(), COMMERCIAL_INTERESTS.choose(rng).unwrap().to_string()));
        }
        if rng.gen_bool(0.4) {
            entries.push(("Gender".into(), ["men", "women"].choose(rng).unwrap().to_string()));
        }
    }
    if rng.gen_bool(0.05) {
        entries.push(("Language".into(), "English (US)".into()));
    }
    let arr: Vec<serde_json::Value> = entries
        .into_iter()
        .map(|(t, s)| serde_json::json!({"target": t, "segment": s}))
        .collect();
    serde_json::Value::Array(arr).to_string()
}

/// Raw records in generation order, including tied-vote records when `tie_rate > 0`.
pub fn generate_records(cfg: &SyntheticConfig) -> Vec<AdRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_adv = cfg.n_advertisers.max(1);
    let political_adv: Vec<bool> = (0..n_adv).map(|_| rng.gen_bool(cfg.political_share)).collect();
    (0..cfg.n_ads)
        .map(|i| {
            let a = i % n_adv;
            let lean = if political_adv[a] { 0.95 } else { 0.1 };
            let political = rng.gen_bool(lean);
            let title_len = rng.gen_range(0..4);
            let body_len = rng.gen_range(5..14);
            let (mut yes, mut no) = if political {
                (rng.gen_range(2..7), rng.gen_range(0..2))
            } else {
                (rng.gen_range(0..2), rng.gen_range(2..7))
            };
            if rng.gen::<f64>() < cfg.tie_rate {
                no = yes.max(1);
                yes = no;
            }
            AdRecord {
                id: format!("ad-{:06}", i),
                title: words(&mut rng, political, title_len, cfg.noise),
                message: format!("<p>{}</p>", words(&mut rng, political, body_len, cfg.noise)),
                political_votes: yes,
                not_political_votes: no,
                political_probability: if political { 0.8 } else { 0.2 },
                advertiser: format!("advertiser-{a:04}"),
                created_at: format!("2018-{:02}-{:02}T12:00:00Z", 1 + i % 12, 1 + i % 28),
                targets_raw: targets(&mut rng, political),
            }
        })
        .collect()
}

pub fn generate_dataset(cfg: &SyntheticConfig) -> Result<Dataset> {
    let records = generate_records(cfg)
        .into_iter()
        .filter_map(|record| derive_label(&record).map(|label| LabeledAd { record, label }))
        .collect();
    Dataset::new(records)
}

/// The records as newline-delimited JSON in the ingest schema.
pub fn to_ndjson(records: &[AdRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}
