use std::fmt::Write as _;
use std::path::PathBuf;

use polads_core::bundle::EvalSplit;
use polads_core::evaluation::{BootstrapConfig, BootstrapVerdict};
use polads_core::pipeline::SystemKind;
use polads_core::shap::ImportanceRanking;
use polads_core::MetricsReport;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct MetricsRow {
    pub system: SystemKind,
    pub bundle: PathBuf,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub system_a: String,
    pub system_b: String,
    pub samples: usize,
    pub mean_delta_f1: f64,
    pub delta_ci_low: f64,
    pub delta_ci_high: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    pub deltas_csv: PathBuf,
}

impl Comparison {
    pub fn new(v: &BootstrapVerdict, deltas_csv: PathBuf) -> Self {
        let mut sorted = v.deltas.clone();
        sorted.sort_by(f64::total_cmp);
        Comparison {
            system_a: v.system_a.clone(),
            system_b: v.system_b.clone(),
            samples: v.b,
            mean_delta_f1: sorted.iter().sum::<f64>() / sorted.len() as f64,
            delta_ci_low: quantile(&sorted, v.alpha / 2.0),
            delta_ci_high: quantile(&sorted, 1.0 - v.alpha / 2.0),
            p_value: v.p_value,
            alpha: v.alpha,
            significant: v.significant,
            deltas_csv,
        }
    }
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Serialize)]
pub struct EvaluationReport {
    pub split: EvalSplit,
    pub dataset_digest: String,
    pub n_eval: usize,
    pub n_advertisers: usize,
    pub bootstrap: Option<BootstrapConfig>,
    pub systems: Vec<MetricsRow>,
    pub comparisons: Vec<Comparison>,
}

impl EvaluationReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} split: {} ads from {} advertisers",
            split_name(self.split),
            self.n_eval,
            self.n_advertisers
        );
        let _ = writeln!(s, "{:<18} {:>9} {:>9} {:>9}", "system", "precision", "recall", "f1");
        for r in &self.systems {
            let _ = writeln!(
                s,
                "{:<18} {:>9.2} {:>9.2} {:>9.2}{}",
                r.system.as_str(),
                r.metrics.precision,
                r.metrics.recall,
                r.metrics.f1,
                if r.metrics.degenerate { "  (degenerate)" } else { "" }
            );
        }
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{} vs {}: mean dF1 {:+.2} [{:+.2}, {:+.2}], p = {:.4} over {} resamples{}",
                c.system_b,
                c.system_a,
                c.mean_delta_f1,
                c.delta_ci_low,
                c.delta_ci_high,
                c.p_value,
                c.samples,
                if c.significant {
                    format!(", significant at {}", c.alpha)
                } else {
                    String::new()
                }
            );
        }
        s
    }
}

fn split_name(s: EvalSplit) -> &'static str {
    match s {
        EvalSplit::Test => "test",
        EvalSplit::Train => "train",
        EvalSplit::All => "all",
    }
}

pub fn ranking_table(title: &str, r: &ImportanceRanking) -> String {
    let mut s = format!("{title}\n");
    if r.entries.is_empty() {
        s.push_str("  (none)\n");
    }
    for (i, e) in r.entries.iter().enumerate() {
        let _ = writeln!(s, "  {:>3}. {:<40} {:.5}", i + 1, e.name, e.mean_abs);
    }
    s
}
