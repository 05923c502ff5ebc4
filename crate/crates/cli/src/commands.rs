use std::fs;
use std::path::{Path, PathBuf};

use polads_core::bundle::EvalSplit;
use polads_core::corpus::{corpus_stats, StatsReport};
use polads_core::pipeline::SystemKind;
use polads_core::{
    check_compatible, compute_metrics, explain as explain_bundle, load_corpus, paired_bootstrap, train_bundle,
    Bundle, Dataset, Error, ErrorPolicy,
};
use serde::Serialize;

use crate::report::{ranking_table, Comparison, EvaluationReport, MetricsRow};
use crate::{CliError, Context};

type Result<T> = std::result::Result<T, CliError>;

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn load_dataset(ctx: &Context, path: Option<PathBuf>) -> Result<Dataset> {
    let path = path.unwrap_or_else(|| ctx.cfg.dataset.clone());
    let (ds, summary) = load_corpus(&path, ErrorPolicy::FailFast)?;
    log::info!("{}: {} labeled ads", path.display(), summary.kept);
    if ds.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    Ok(ds)
}

pub fn ingest(ctx: &Context, corpus: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let corpus = corpus
        .or_else(|| ctx.cfg.corpus.clone())
        .ok_or_else(|| CliError::User("no corpus given (pass a path or set `corpus` in the config)".into()))?;
    let policy = if ctx.cfg.strict {
        ErrorPolicy::FailFast
    } else {
        ErrorPolicy::SkipAndLog
    };
    let (ds, summary) = load_corpus(&corpus, policy)?;
    let out = out.unwrap_or_else(|| ctx.cfg.dataset.clone());
    ensure_parent(&out)?;
    ds.write_jsonl(&out)?;
    write_json(&ctx.cfg.report_dir.join("ingest_summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if summary.malformed > 0 {
        log::warn!("skipped {} malformed records", summary.malformed);
    }
    Ok(())
}

pub fn stats(ctx: &Context, dataset: Option<PathBuf>, out_dir: Option<PathBuf>, top_k: Option<usize>) -> Result<()> {
    let ds = load_dataset(ctx, dataset)?;
    let report = corpus_stats(&ds, top_k.unwrap_or(ctx.cfg.top_interests))?;
    let dir = out_dir.unwrap_or_else(|| ctx.cfg.report_dir.join("stats"));
    ensure_dir(&dir)?;
    write_json(&dir.join("stats.json"), &report)?;
    report.write_attributes_csv(&dir.join("attributes.csv"))?;
    StatsReport::write_value_csv(&report.regions, "region", &dir.join("regions.csv"))?;
    StatsReport::write_value_csv(&report.top_interests, "interest", &dir.join("interests.csv"))?;
    println!(
        "{} ads ({} political, {} non-political) from {} advertisers",
        report.total_ads, report.political_ads, report.non_political_ads, report.advertisers
    );
    match report.class_ratio {
        Some(r) => println!("class ratio {r:.2}:1"),
        None => println!("class ratio undefined (no non-political ads)"),
    }
    println!("{:<28} {:>8} {:>10} {:>8}", "attribute", "ads", "political", "values");
    for a in &report.attributes {
        println!("{:<28} {:>8} {:>10} {:>8}", a.attribute, a.ads, a.political_ads, a.unique_values);
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    system: SystemKind,
    bundle: &'a Path,
    n_train: usize,
    n_features: usize,
    train_advertisers: usize,
    test_advertisers: usize,
    grid_searched: bool,
}

pub fn train(ctx: &Context, dataset: Option<PathBuf>, system: Option<SystemKind>, out: Option<PathBuf>) -> Result<()> {
    let kind = system.unwrap_or(ctx.cfg.system);
    let out = out.unwrap_or_else(|| ctx.cfg.model_dir.join(kind.as_str()));
    let occupied = fs::read_dir(&out).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !ctx.force {
        return Err(Error::AlreadyExists { path: out }.into());
    }
    let ds = load_dataset(ctx, dataset)?;
    let cfg = ctx.cfg.system_config(kind)?;
    let bundle = train_bundle(&ds, &cfg, ctx.cfg.test_fraction, ctx.cfg.seed)?;
    bundle.write(&out, ctx.force)?;
    let m = &bundle.manifest;
    let summary = TrainSummary {
        system: kind,
        bundle: &out,
        n_train: m.n_train,
        n_features: m.n_features,
        train_advertisers: m.split.train_advertisers.len(),
        test_advertisers: m.split.test_advertisers.len(),
        grid_searched: m.grid.is_some(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn evaluate(
    ctx: &Context,
    dataset: Option<PathBuf>,
    paths: &[PathBuf],
    compare_all: bool,
    split: EvalSplit,
    allow_train_eval: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    if paths.len() > 2 && !compare_all {
        return Err(CliError::User(format!(
            "{} bundles given; pass --compare-all to compare each against the first",
            paths.len()
        )));
    }
    if split != EvalSplit::Test && !allow_train_eval {
        return Err(CliError::User(
            "this split includes advertisers the bundles were trained on; pass --allow-train-eval to score it anyway"
                .into(),
        ));
    }
    let bundles = paths.iter().map(|p| Bundle::read(p)).collect::<polads_core::Result<Vec<_>>>()?;
    check_compatible(&bundles)?;
    let ds = load_dataset(ctx, dataset)?;
    let digest = ds.digest();
    if digest != bundles[0].manifest.dataset_digest {
        log::warn!("dataset differs from the one the bundles were trained on");
    }
    let eval = bundles[0].select(&ds, split);
    if eval.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let truth = eval.labels();
    let mut systems = Vec::with_capacity(bundles.len());
    for (b, p) in bundles.iter().zip(paths) {
        let metrics = compute_metrics(&b.system.predict(&eval)?, &truth)?;
        if metrics.degenerate {
            log::warn!("{}: precision or recall undefined on this split", b.manifest.system);
        }
        systems.push(MetricsRow {
            system: b.manifest.system,
            bundle: p.clone(),
            metrics,
        });
    }

    let out = out.unwrap_or_else(|| ctx.cfg.report_dir.join("evaluation.json"));
    let report_dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut comparisons = Vec::new();
    let boot = (bundles.len() > 1).then(|| ctx.cfg.bootstrap());
    if let Some(bcfg) = &boot {
        let baseline = bundles[0].system.resolved_config();
        for b in &bundles[1..] {
            let verdict = paired_bootstrap(&ds, &baseline, &b.system.resolved_config(), bcfg)?;
            let csv = report_dir.join(format!("deltas_{}_vs_{}.csv", verdict.system_b, verdict.system_a));
            ensure_parent(&csv)?;
            verdict.write_deltas_csv(&csv)?;
            comparisons.push(Comparison::new(&verdict, csv));
        }
    }
    let report = EvaluationReport {
        split,
        dataset_digest: digest,
        n_eval: eval.len(),
        n_advertisers: eval.advertisers().len(),
        bootstrap: boot,
        systems,
        comparisons,
    };
    write_json(&out, &report)?;
    print!("{}", report.table());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn explain(
    ctx: &Context,
    bundle: &Path,
    dataset: Option<PathBuf>,
    split: EvalSplit,
    top_keywords: Option<usize>,
    top_targeting: Option<usize>,
    out_dir: Option<PathBuf>,
    dump_matrix: bool,
) -> Result<()> {
    let b = Bundle::read(bundle)?;
    if !b.manifest.system.is_gbdt() {
        return Err(Error::UnsupportedModel(format!(
            "{} is not a tree model; explain needs a gbm-text or gbm-text+targets bundle",
            b.manifest.system
        ))
        .into());
    }
    let ds = load_dataset(ctx, dataset)?;
    let subset = b.select(&ds, split);
    if subset.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let (report, matrix) = explain_bundle(
        &b.system,
        &subset,
        top_keywords.unwrap_or(ctx.cfg.top_keywords),
        top_targeting.unwrap_or(ctx.cfg.top_targeting),
    )?;
    let dir = out_dir.unwrap_or_else(|| ctx.cfg.report_dir.join(format!("explain-{}", b.manifest.system)));
    ensure_dir(&dir)?;
    write_json(&dir.join("explain.json"), &report)?;
    report.keywords.write_csv(&dir.join("keywords.csv"))?;
    report.targeting.write_csv(&dir.join("targeting.csv"))?;
    if dump_matrix {
        matrix.write_csv(&dir.join("shap_matrix.csv"))?;
    }
    println!(
        "{} on {} ads, base value {:.4} log-odds",
        report.system, report.n_samples, report.base_value
    );
    print!("{}", ranking_table("keywords (mean |SHAP|)", &report.keywords));
    if b.system.featurizer.encoder.is_some() {
        print!("{}", ranking_table("targeting (mean |SHAP|)", &report.targeting));
    } else {
        println!("targeting: not used by {}", report.system);
    }
    Ok(())
}
