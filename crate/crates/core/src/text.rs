//! Ad text to TF-IDF: markup stripping, tokenization, stop words, Snowball stemming,
//! uni/bigram vocabulary with smoothed idf and L2-normalized rows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::corpus::AdRecord;
use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Separates title from message. Bigrams never span it.
pub const BOUNDARY_MARKER: char = '\u{22A5}';

const DEFAULT_STOP_WORDS: &str = include_str!("../data/english_stop_words.txt");

/// Removes `<...>` spans and decodes the five standard XML entities.
pub fn strip_markup(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                out.push(' ');
            }
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    let decoded = out
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&");
    decoded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Title and markup-free message joined around the boundary marker.
pub fn build_text(rec: &AdRecord) -> String {
    let title = rec.title.split_whitespace().collect::<Vec<_>>().join(" ");
    let message = strip_markup(&rec.message);
    match (title.is_empty(), message.is_empty()) {
        (true, _) => message,
        (false, true) => title,
        (false, false) => format!("{title} {BOUNDARY_MARKER} {message}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(BTreeSet<String>);

impl Default for StopWords {
    fn default() -> Self {
        StopWords::parse(DEFAULT_STOP_WORDS)
    }
}

impl StopWords {
    /// One word per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(StopWords::parse(&text))
    }

    /// Sorted, one word per line.
    pub fn to_text(&self) -> String {
        self.0.iter().map(|w| format!("{w}\n")).collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Stemmed tokens. `breaks` holds the positions that start a new segment; no bigram
/// joins `tokens[b - 1]` and `tokens[b]` for any `b` in `breaks`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub breaks: Vec<usize>,
}

impl TokenStream {
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        TokenStream {
            tokens: tokens.into_iter().map(Into::into).collect(),
            breaks: Vec::new(),
        }
    }

    /// All n-grams with `n` in `min..=max`, space-joined.
    pub fn ngrams(&self, min: usize, max: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut bounds = vec![0];
        bounds.extend(self.breaks.iter().copied());
        bounds.push(self.tokens.len());
        for seg in bounds.windows(2) {
            let tokens = &self.tokens[seg[0]..seg[1]];
            for n in min.max(1)..=max {
                for w in tokens.windows(n) {
                    out.push(w.join(" "));
                }
            }
        }
        out
    }
}

pub struct Analyzer {
    stop_words: StopWords,
    stemmer: Stemmer,
}

impl fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analyzer")
            .field("stop_words", &self.stop_words.len())
            .finish()
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer::new(StopWords::default())
    }
}

impl Analyzer {
    pub fn new(stop_words: StopWords) -> Self {
        Analyzer {
            stop_words,
            stemmer: Stemmer::create(Algorithm::English),
        }
    }

    pub fn stem(&self, word: &str) -> String {
        self.stemmer.stem(word).into_owned()
    }

    /// Lowercases, splits into runs of two or more alphanumerics, drops stop words,
    /// then stems. Stems that land on a stop word or shrink below two characters are
    /// dropped as well.
    pub fn tokenize_and_stem(&self, text: &str) -> TokenStream {
        let mut out = TokenStream::default();
        let mut word = String::new();
        let flush = |word: &mut String, out: &mut TokenStream| {
            if word.chars().nth(1).is_some() && !self.stop_words.contains(word) {
                let stem = self.stemmer.stem(word);
                if stem.chars().nth(1).is_some() && !self.stop_words.contains(&stem) {
                    out.tokens.push(stem.into_owned());
                }
            }
            word.clear();
        };
        for c in text.chars() {
            if c.is_alphanumeric() {
                word.extend(c.to_lowercase());
            } else {
                flush(&mut word, &mut out);
                if c == BOUNDARY_MARKER
                    && !out.tokens.is_empty()
                    && out.breaks.last() != Some(&out.tokens.len())
                {
                    out.breaks.push(out.tokens.len());
                }
            }
        }
        flush(&mut word, &mut out);
        if out.breaks.last() == Some(&out.tokens.len()) {
            out.breaks.pop();
        }
        out
    }

    pub fn analyze(&self, rec: &AdRecord) -> TokenStream {
        self.tokenize_and_stem(&build_text(rec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorizerConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub min_df: usize,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            ngram_min: 1,
            ngram_max: 2,
            min_df: 2,
        }
    }
}

pub const VECTORIZER_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VectorizerDocument {
    schema_version: u32,
    config: VectorizerConfig,
    terms: Vec<String>,
    idf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfVectorizer {
    config: VectorizerConfig,
    vocabulary: HashMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl TfIdfVectorizer {
    /// Fits the vocabulary and smoothed idf `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit(docs: &[TokenStream], config: VectorizerConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if config.ngram_min == 0 || config.ngram_max < config.ngram_min {
            return Err(Error::InvalidParams(format!(
                "bad n-gram range {}..={}",
                config.ngram_min, config.ngram_max
            )));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let grams: BTreeSet<String> = doc.ngrams(config.ngram_min, config.ngram_max).into_iter().collect();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let (terms, idf): (Vec<String>, Vec<f64>) = df
            .into_iter()
            .filter(|(_, d)| *d >= config.min_df)
            .map(|(t, d)| {
                let idf = ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0;
                (t, idf)
            })
            .unzip();
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary {
                min_df: config.min_df,
            });
        }
        Ok(Self::from_parts(config, terms, idf))
    }

    fn from_parts(config: VectorizerConfig, terms: Vec<String>, idf: Vec<f64>) -> Self {
        let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfIdfVectorizer {
            config,
            vocabulary,
            terms,
            idf,
        }
    }

    pub fn config(&self) -> VectorizerConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn column_of(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    /// Raw counts times idf, L2-normalized. Out-of-vocabulary n-grams are ignored.
    pub fn transform(&self, doc: &TokenStream) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for g in doc.ngrams(self.config.ngram_min, self.config.ngram_max) {
            if let Some(&col) = self.vocabulary.get(&g) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        let weighted: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(c, n)| (c, n * self.idf[c]))
            .collect();
        let norm = weighted.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        let pairs = if norm > 0.0 {
            weighted.into_iter().map(|(c, v)| (c, v / norm)).collect()
        } else {
            Vec::new()
        };
        SparseVector::from_pairs(self.dim(), pairs).expect("columns come from the vocabulary")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&VectorizerDocument {
            schema_version: VECTORIZER_SCHEMA_VERSION,
            config: self.config,
            terms: self.terms.clone(),
            idf: self.idf.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: VectorizerDocument = serde_json::from_str(s)?;
        if doc.schema_version != VECTORIZER_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: doc.schema_version.to_string(),
                supported: VECTORIZER_SCHEMA_VERSION.to_string(),
            });
        }
        if doc.terms.len() != doc.idf.len() {
            return Err(Error::LengthMismatch {
                left: doc.terms.len(),
                right: doc.idf.len(),
            });
        }
        Ok(Self::from_parts(doc.config, doc.terms, doc.idf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn record(title: &str, message: &str) -> AdRecord {
        AdRecord {
            id: "x".into(),
            title: title.into(),
            message: message.into(),
            political_votes: 1,
            not_political_votes: 0,
            political_probability: 0.0,
            advertiser: "a".into(),
            created_at: String::new(),
            targets_raw: String::new(),
        }
    }

    #[test]
    fn build_text_joins_with_boundary() {
        assert_eq!(
            build_text(&record("Vote Now", "<p>for change</p>")),
            format!("Vote Now {BOUNDARY_MARKER} for change")
        );
        assert_eq!(build_text(&record("", "hello")), "hello");
        assert_eq!(build_text(&record("A", "")), "A");
    }

    #[test]
    fn markup_entities_decoded() {
        assert_eq!(strip_markup("Tom &amp; Jerry&lt;3 <br/>said &quot;hi&quot;"), "Tom & Jerry<3 said \"hi\"");
        assert_eq!(strip_markup("a<br>b"), "a b");
    }

    #[test]
    fn default_stop_list_size() {
        assert_eq!(StopWords::default().len(), 318);
    }

    #[test]
    fn tokenize_drops_stop_words() {
        let a = Analyzer::default();
        assert_eq!(a.tokenize_and_stem("Vote for Trump!").tokens, vec!["vote", "trump"]);
        assert_eq!(a.tokenize_and_stem("elections").tokens, vec!["elect"]);
        assert!(a.tokenize_and_stem("a I .").tokens.is_empty());
    }

    // Pairs from the Snowball English sample vocabulary.
    const PORTER2_VOCAB: &[(&str, &str)] = &[
        ("consign", "consign"),
        ("consigned", "consign"),
        ("consigning", "consign"),
        ("consignment", "consign"),
        ("consist", "consist"),
        ("consisted", "consist"),
        ("consistency", "consist"),
        ("consistent", "consist"),
        ("consistently", "consist"),
        ("consisting", "consist"),
        ("consists", "consist"),
        ("consolation", "consol"),
        ("consolations", "consol"),
        ("consolatory", "consolatori"),
        ("console", "consol"),
        ("consoled", "consol"),
        ("consoles", "consol"),
        ("consolidate", "consolid"),
        ("consolidated", "consolid"),
        ("consolidating", "consolid"),
        ("consoling", "consol"),
        ("consolingly", "consol"),
        ("consols", "consol"),
        ("consonant", "conson"),
        ("consort", "consort"),
        ("consorted", "consort"),
        ("consorting", "consort"),
        ("conspicuous", "conspicu"),
        ("conspicuously", "conspicu"),
        ("conspiracy", "conspiraci"),
        ("conspirator", "conspir"),
        ("conspirators", "conspir"),
        ("conspire", "conspir"),
        ("conspired", "conspir"),
        ("conspiring", "conspir"),
        ("constable", "constabl"),
        ("constables", "constabl"),
        ("constance", "constanc"),
        ("constancy", "constanc"),
        ("constant", "constant"),
    ];

    #[test]
    fn stems_match_reference_vocabulary() {
        let a = Analyzer::default();
        for (word, stem) in PORTER2_VOCAB {
            assert_eq!(a.stem(word), *stem, "{word}");
        }
    }

    #[test]
    fn stemming_is_idempotent_on_lexicon() {
        let a = Analyzer::default();
        let lexicon = PORTER2_VOCAB
            .iter()
            .map(|(w, _)| *w)
            .chain(["elections", "voting", "senate", "congress", "trump", "campaign", "donate"]);
        for w in lexicon {
            let s = a.stem(w);
            assert_eq!(a.stem(&s), s, "{w}");
        }
    }

    #[test]
    fn boundary_blocks_cross_bigrams() {
        let a = Analyzer::default();
        let ts = a.tokenize_and_stem(&build_text(&record("Vote Now", "<p>change today</p>")));
        let grams = ts.ngrams(2, 2);
        assert!(grams.contains(&"chang today".to_string()), "{grams:?}");
        assert!(grams.iter().all(|g| !g.starts_with("now ")), "{grams:?}");
    }

    fn docs(raw: &[&[&str]]) -> Vec<TokenStream> {
        raw.iter().map(|d| TokenStream::from_tokens(d.iter().copied())).collect()
    }

    #[test]
    fn fit_vocabulary_and_idf() {
        let v = TfIdfVectorizer::fit(
            &docs(&[&["vote", "trump"], &["buy", "shoe"]]),
            VectorizerConfig { min_df: 1, ..Default::default() },
        )
        .unwrap();
        assert_eq!(v.dim(), 6);
        assert!(v.column_of("vote trump").is_some() && v.column_of("buy shoe").is_some());
        let idf = v.idf()[v.column_of("vote").unwrap()];
        assert_abs_diff_eq!(idf, 1.405_465_108_108_164_4, epsilon = 1e-12);
        assert_abs_diff_eq!(idf, (3.0f64 / 2.0).ln() + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ubiquitous_term_has_unit_idf() {
        let v = TfIdfVectorizer::fit(
            &docs(&[&["vote", "a1"], &["vote", "b1"]]),
            VectorizerConfig { min_df: 1, ..Default::default() },
        )
        .unwrap();
        assert_eq!(v.idf()[v.column_of("vote").unwrap()], 1.0);
    }

    #[test]
    fn min_df_can_empty_vocabulary() {
        let r = TfIdfVectorizer::fit(&docs(&[&["a1"], &["b1"]]), VectorizerConfig::default());
        assert!(matches!(r, Err(Error::EmptyVocabulary { min_df: 2 })));
        assert!(matches!(TfIdfVectorizer::fit(&[], VectorizerConfig::default()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn transform_normalizes() {
        let uni = VectorizerConfig { ngram_max: 1, min_df: 1, ..Default::default() };
        let v = TfIdfVectorizer::fit(&docs(&[&["vote", "trump"]]), uni).unwrap();
        let x = v.transform(&TokenStream::from_tokens(["vote", "trump"]));
        for val in x.values() {
            assert_abs_diff_eq!(*val, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        }
        let empty = v.transform(&TokenStream::from_tokens(["other"]));
        assert_eq!(empty.nnz(), 0);

        let single = TfIdfVectorizer::fit(&docs(&[&["vote"]]), uni).unwrap();
        let x = single.transform(&TokenStream::from_tokens(["vote", "vote"]));
        assert_eq!(x.values(), &[1.0]);
    }

    #[test]
    fn serialization_round_trip() {
        let v = TfIdfVectorizer::fit(
            &docs(&[&["vote", "trump"], &["buy", "shoe"], &["vote", "now"]]),
            VectorizerConfig { min_df: 1, ..Default::default() },
        )
        .unwrap();
        let back = TfIdfVectorizer::from_json(&v.to_json().unwrap()).unwrap();
        assert_eq!(back, v);
    }

    fn arb_doc() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["aa", "bb", "cc", "dd", "ee"]).prop_map(String::from), 0..8)
    }

    proptest! {
        #[test]
        fn rows_have_unit_or_zero_norm(corpus in prop::collection::vec(arb_doc(), 1..6), probe in arb_doc()) {
            let ds: Vec<TokenStream> = corpus.iter().map(|d| TokenStream::from_tokens(d.clone())).collect();
            let cfg = VectorizerConfig { min_df: 1, ..Default::default() };
            if let Ok(v) = TfIdfVectorizer::fit(&ds, cfg) {
                let n = v.transform(&TokenStream::from_tokens(probe)).norm_l2();
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn unigram_counts_ignore_order(doc in arb_doc()) {
            let mut rev = doc.clone();
            rev.reverse();
            let a = TokenStream::from_tokens(doc).ngrams(1, 1);
            let b = TokenStream::from_tokens(rev).ngrams(1, 1);
            let count = |g: Vec<String>| g.into_iter().fold(BTreeMap::new(), |mut m, t| { *m.entry(t).or_insert(0) += 1; m });
            prop_assert_eq!(count(a), count(b));
        }

        #[test]
        fn duplicated_corpus_keeps_idf_order(corpus in prop::collection::vec(arb_doc(), 1..6)) {
            let ds: Vec<TokenStream> = corpus.iter().map(|d| TokenStream::from_tokens(d.clone())).collect();
            let twice: Vec<TokenStream> = ds.iter().chain(ds.iter()).cloned().collect();
            let cfg = VectorizerConfig { min_df: 1, ..Default::default() };
            if let (Ok(a), Ok(b)) = (TfIdfVectorizer::fit(&ds, cfg), TfIdfVectorizer::fit(&twice, cfg)) {
                prop_assert_eq!(a.terms(), b.terms());
                for i in 0..a.dim() {
                    for j in 0..a.dim() {
                        if a.idf()[i] < a.idf()[j] {
                            prop_assert!(b.idf()[i] < b.idf()[j]);
                        }
                    }
                }
            }
        }
    }
}
