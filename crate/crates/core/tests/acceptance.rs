//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Criterion 8 needs the public ProPublica snapshot as newline-delimited JSON; point
//! `POLADS_PROPUBLICA` at it to enable the check, otherwise it is reported as skipped.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use polads_core::bundle::{train_bundle, EvalSplit};
use polads_core::corpus::{load_corpus, AdRecord, Dataset, ErrorPolicy, Label, LabeledAd};
use polads_core::evaluation::{
    compute_metrics, f1_from_precision_recall, group_k_fold, paired_bootstrap, plan_split, BootstrapConfig,
    TrainableSystem,
};
use polads_core::gbdt::{compute_class_weights, grad_hess, logistic_loss, train_gbdt_traced, GbdtParams, Tree, TreeNode};
use polads_core::pipeline::{explain, train_system, Model, SystemConfig, SystemKind};
use polads_core::shap::{ensemble_shap, tree_shap, tree_path_shapley};
use polads_core::sparse::{FeatureMatrix, SparseVector};
use polads_core::synthetic::{generate_dataset, SyntheticConfig};
use polads_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn from_result(r: Result<Outcome>) -> Outcome {
    r.unwrap_or_else(|e| Outcome::Fail(format!("error: {e}")))
}

fn harmonic_mean() -> Outcome {
    let rows = [
        ("MultinomialNB text", 88.75, 96.65, 92.53),
        ("GBM text", 90.33, 99.25, 94.58),
        ("GBM text+targets", 90.83, 99.68, 95.05),
    ];
    let mut worst: f64 = 0.0;
    for (_, p, r, f1) in rows {
        worst = worst.max((f1_from_precision_recall(p, r) - f1).abs());
    }
    let perfect = compute_metrics(&[Label::Political; 4], &[Label::Political; 4]).map(|m| m.f1 == 100.0);
    ensure(
        worst <= 0.01 && perfect.unwrap_or(false),
        format!("max |F1 - reported F1| = {worst:.4}"),
    )
}

fn class_weights() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..400);
        let mut y: Vec<Label> = (0..n).map(|_| Label::from_political(rng.gen_bool(0.8))).collect();
        y[0] = Label::Political;
        y[1] = Label::NonPolitical;
        let w = match compute_class_weights(&y) {
            Ok(w) => w,
            Err(e) => return Outcome::Fail(format!("error: {e}")),
        };
        let np = y.iter().filter(|l| l.is_political()).count() as f64;
        let nn = n as f64 - np;
        worst = worst
            .max((w.political - n as f64 / np).abs())
            .max((w.non_political - n as f64 / nn).abs());
    }
    let mut y = vec![Label::Political; 90];
    y.extend([Label::NonPolitical; 10]);
    let w = compute_class_weights(&y).unwrap();
    let nine_to_one = (w.political - 10.0 / 9.0).abs() < 1e-12 && (w.non_political - 10.0).abs() < 1e-12;
    ensure(
        worst < 1e-12 && nine_to_one,
        format!(
            "max deviation {worst:.1e}; 9:1 -> ({:.6}, {:.6})",
            w.political, w.non_political
        ),
    )
}

fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_depth: usize) -> Tree {
    fn grow(rng: &mut ChaCha8Rng, t: &mut Tree, depth: usize, max_depth: usize, nf: usize) -> usize {
        let id = t.nodes.len();
        t.nodes.push(TreeNode::Leaf { value: 0.0 });
        t.covers.push(0.0);
        if depth < max_depth && (depth == 0 || rng.gen_bool(0.75)) {
            let feature = rng.gen_range(0..nf);
            let threshold = rng.gen_range(0.05..0.95);
            let left = grow(rng, t, depth + 1, max_depth, nf);
            let right = grow(rng, t, depth + 1, max_depth, nf);
            t.nodes[id] = TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                default_left: rng.gen(),
            };
            t.covers[id] = t.covers[left] + t.covers[right];
        } else {
            t.nodes[id] = TreeNode::Leaf {
                value: rng.gen_range(-2.0..2.0),
            };
            t.covers[id] = rng.gen_range(0.5..50.0);
        }
        id
    }
    let mut t = Tree {
        nodes: Vec::new(),
        covers: Vec::new(),
    };
    grow(rng, &mut t, 0, max_depth, n_features);
    t
}

fn treeshap_oracle() -> Outcome {
    from_result((|| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let nf = rng.gen_range(1..=12);
            let depth = rng.gen_range(1..=4);
            let t = random_tree(&mut rng, nf, depth);
            for _ in 0..3 {
                let x: Vec<f64> = (0..nf).map(|_| rng.gen()).collect();
                let fast = tree_shap(&t, &SparseVector::from_dense(&x))?;
                let slow = tree_path_shapley(&t, &x, nf)?;
                for (a, b) in fast.iter().zip(&slow) {
                    worst = worst.max((a - b).abs());
                }
            }
        }

        let ds = generate_dataset(&SyntheticConfig {
            n_ads: 500,
            seed: 3,
            ..Default::default()
        })?;
        let cfg = SystemConfig {
            gbdt: GbdtParams {
                n_trees: 30,
                min_samples_leaf: 5,
                ..Default::default()
            },
            ..SystemConfig::new(SystemKind::GbmTextTargets)
        };
        let s = train_system(&ds, &cfg)?;
        let Model::Gbdt(m) = &s.model else { unreachable!() };
        let x = s.featurizer.transform(&ds)?;
        let shap = ensemble_shap(m, &x)?;
        let mut local: f64 = 0.0;
        for (row, phi) in x.rows().iter().zip(&shap.values) {
            let sum: f64 = phi.values().iter().sum();
            local = local.max((shap.base_value + sum - m.predict_margin(row)?).abs());
        }
        Ok(ensure(
            worst <= 1e-9 && local <= 1e-6 && x.n_rows() >= 500,
            format!(
                "oracle max diff {worst:.1e} over 200 trees; local accuracy max {local:.1e} over {} samples",
                x.n_rows()
            ),
        ))
    })())
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-4;
    let (mut wg, mut wh): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let f: f64 = rng.gen_range(-6.0..6.0);
        let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let w = rng.gen_range(0.1..10.0);
        let (g, hs) = grad_hess(f, y, w);
        let (lp, l0, lm) = (logistic_loss(f + h, y, w), logistic_loss(f, y, w), logistic_loss(f - h, y, w));
        wg = wg.max((g - (lp - lm) / (2.0 * h)).abs());
        wh = wh.max((hs - (lp - 2.0 * l0 + lm) / (h * h)).abs());
    }
    ensure(
        wg < 1e-5 && wh < 1e-5,
        format!("max |g - fd| = {wg:.1e}, max |h - fd| = {wh:.1e}"),
    )
}

fn separable(rng: &mut ChaCha8Rng, n: usize) -> (FeatureMatrix, Vec<Label>) {
    // political iff x0 + x1 exceeds the cut; x2, x3 are noise; a 0.2-wide margin
    // around the hyperplane is left empty
    let cut = -1.1;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    while rows.len() < n {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let score = x[0] + x[1];
        if (score - cut).abs() < 0.1 {
            continue;
        }
        y.push(Label::from_political(score > cut));
        rows.push(x);
    }
    (FeatureMatrix::from_dense(&rows).unwrap(), y)
}

/// Ten seeds; the criterion holds for the worst of them.
fn gbdt_sanity() -> Outcome {
    from_result((|| {
        let mut worst_f1 = f64::INFINITY;
        let mut shares = Vec::new();
        let mut monotone = true;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let (x, y) = separable(&mut rng, 500);
            let (xt, yt) = separable(&mut rng, 500);
            shares.push(y.iter().filter(|l| l.is_political()).count() as f64 / y.len() as f64);
            let w = compute_class_weights(&y)?.sample_weights(&y);
            let params = GbdtParams {
                n_trees: 100,
                min_samples_leaf: 5,
                seed,
                ..Default::default()
            };
            let (m, trace) = train_gbdt_traced(&x, &y, &w, &params)?;
            monotone &= trace.loss.windows(2).all(|p| p[1] <= p[0] + 1e-9);
            let pred = xt.rows().iter().map(|r| m.predict_label(r)).collect::<Result<Vec<_>>>()?;
            worst_f1 = worst_f1.min(compute_metrics(&pred, &yt)?.f1);
        }
        let share = shares.iter().sum::<f64>() / shares.len() as f64;
        Ok(ensure(
            worst_f1 >= 99.0 && monotone,
            format!("mean political share {share:.2}, worst test F1 over 10 seeds {worst_f1:.2}%, loss monotone: {monotone}"),
        ))
    })())
}

fn split_discipline() -> Outcome {
    from_result((|| {
        let ds = generate_dataset(&SyntheticConfig {
            n_ads: 400,
            n_advertisers: 50,
            seed: 6,
            ..Default::default()
        })?;
        let mut violations = 0;
        for seed in 0..1000 {
            let plan = plan_split(ds.advertisers(), 0.2, seed)?;
            let covers: BTreeSet<String> = plan.train_advertisers.union(&plan.test_advertisers).cloned().collect();
            if plan.train_advertisers.intersection(&plan.test_advertisers).next().is_some()
                || &covers != ds.advertisers()
            {
                violations += 1;
            }
        }
        let groups: Vec<&str> = ds.records().iter().map(|r| r.record.advertiser.as_str()).collect();
        let folds = group_k_fold(&groups, 5)?;
        for (i, valid) in folds.iter().enumerate() {
            let v: BTreeSet<&str> = valid.iter().map(|&r| groups[r]).collect();
            let t: BTreeSet<&str> = (0..groups.len())
                .filter(|r| !valid.contains(r))
                .map(|r| groups[r])
                .collect();
            if v.intersection(&t).next().is_some() {
                violations += 1;
                eprintln!("fold {i} leaks advertisers");
            }
        }
        Ok(ensure(
            violations == 0,
            format!("1000 splits + {} folds, {violations} violations", folds.len()),
        ))
    })())
}

struct Crippled;

impl TrainableSystem for Crippled {
    fn name(&self) -> String {
        "always-non-political".into()
    }

    fn fit_predict(&self, _train: &Dataset, test: &Dataset) -> Result<Vec<Label>> {
        Ok(vec![Label::NonPolitical; test.len()])
    }
}

fn hand_fixture() -> Dataset {
    let mut v = Vec::new();
    for a in 0..20 {
        for i in 0..10 {
            let political = i < 8;
            let id = a * 10 + i;
            v.push(LabeledAd {
                record: AdRecord {
                    id: format!("f{id}"),
                    title: String::new(),
                    message: if political {
                        format!("vote senate election candidate {}", ["today", "now"][id % 2])
                    } else {
                        format!("shoe sale discount shipping {}", ["today", "now"][id % 2])
                    },
                    political_votes: if political { 2 } else { 0 },
                    not_political_votes: if political { 0 } else { 2 },
                    political_probability: 0.5,
                    advertiser: format!("adv{a:02}"),
                    created_at: String::new(),
                    targets_raw: "[]".into(),
                },
                label: Label::from_political(political),
            });
        }
    }
    Dataset::new(v).unwrap()
}

fn bootstrap_calibration() -> Outcome {
    from_result((|| {
        let ds = hand_fixture();
        let cfg = BootstrapConfig {
            samples: 100,
            seed: 7,
            ..Default::default()
        };
        let strong = SystemConfig {
            gbdt: GbdtParams {
                n_trees: 10,
                min_samples_leaf: 2,
                ..Default::default()
            },
            ..SystemConfig::new(SystemKind::GbmText)
        };
        let mnb = SystemConfig::new(SystemKind::Mnb);
        let same = paired_bootstrap(&ds, &mnb, &mnb, &cfg)?;
        let dominant = paired_bootstrap(&ds, &Crippled, &strong, &cfg)?;
        let expected = 1.0 / 101.0;
        Ok(ensure(
            same.p_value == 1.0 && !same.significant && (dominant.p_value - expected).abs() < 1e-15 && dominant.significant,
            format!(
                "identical p = {}, dominant p = {:.5} (1/101 = {expected:.5}), significant: {}",
                same.p_value, dominant.p_value, dominant.significant
            ),
        ))
    })())
}

fn pipeline_ordering() -> Outcome {
    let Some(path) = std::env::var_os("POLADS_PROPUBLICA") else {
        return Outcome::Skip("POLADS_PROPUBLICA not set; ProPublica snapshot not supplied".into());
    };
    from_result((|| {
        let (ds, summary) = load_corpus(Path::new(&path), ErrorPolicy::SkipAndLog)?;
        eprintln!(
            "  loaded {} ads ({} tied skipped, {} malformed)",
            ds.len(),
            summary.skipped_tied,
            summary.malformed
        );
        let mut f1 = Vec::new();
        let mut minage_rank = None;
        for kind in SystemKind::ALL {
            let b = train_bundle(&ds, &SystemConfig::new(kind), 0.2, 0)?;
            let test = b.select(&ds, EvalSplit::Test);
            let m = compute_metrics(&b.system.predict(&test)?, &test.labels())?;
            eprintln!(
                "  {kind}: P {:.2} R {:.2} F1 {:.2}",
                m.precision, m.recall, m.f1
            );
            f1.push(m.f1);
            if kind == SystemKind::GbmTextTargets {
                let train = b.select(&ds, EvalSplit::Train);
                let (report, _) = explain(&b.system, &train, 10, 15)?;
                minage_rank = report.targeting.entries.iter().position(|e| e.name == "MinAge").map(|r| r + 1);
                eprintln!("  MinAge targeting rank: {minage_rank:?}");
            }
        }
        let ordered = f1[2] >= f1[1] && f1[1] >= f1[0];
        let minage = minage_rank.is_some_and(|r| r <= 5);
        Ok(ensure(
            ordered && minage,
            format!(
                "F1 mnb {:.2} <= gbm-text {:.2} <= gbm-text+targets {:.2}: {ordered}; MinAge rank {minage_rank:?}",
                f1[0], f1[1], f1[2]
            ),
        ))
    })())
}

fn run_once(ds: &Dataset, dir: &Path) -> Result<()> {
    for kind in SystemKind::ALL {
        let cfg = SystemConfig {
            gbdt: GbdtParams {
                n_trees: 25,
                min_samples_leaf: 5,
                ..Default::default()
            },
            ..SystemConfig::new(kind)
        };
        let b = train_bundle(ds, &cfg, 0.2, 9)?;
        let out = dir.join(kind.as_str());
        b.write(&out, false)?;
        let test = b.select(ds, EvalSplit::Test);
        let metrics = compute_metrics(&b.system.predict(&test)?, &test.labels())?;
        std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)
            .map_err(|e| Error::Config(e.to_string()))?;
        if kind.is_gbdt() {
            let (report, _) = explain(&b.system, &b.select(ds, EvalSplit::Train), 10, 15)?;
            std::fs::write(out.join("explain.json"), serde_json::to_string_pretty(&report)?)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    from_result((|| {
        let ds = generate_dataset(&SyntheticConfig {
            n_ads: 500,
            seed: 9,
            ..Default::default()
        })?;
        let a = tempfile::tempdir().map_err(|e| Error::Config(e.to_string()))?;
        let b = tempfile::tempdir().map_err(|e| Error::Config(e.to_string()))?;
        run_once(&ds, a.path())?;
        run_once(&ds, b.path())?;
        let mut compared = 0;
        let mut differing = Vec::new();
        for kind in SystemKind::ALL {
            let da = a.path().join(kind.as_str());
            let mut names: Vec<_> = std::fs::read_dir(&da)
                .map_err(|e| Error::Config(e.to_string()))?
                .map(|e| e.unwrap().file_name())
                .collect();
            names.sort();
            for name in names {
                if name == "metadata.json" {
                    continue;
                }
                let x = std::fs::read(da.join(&name)).unwrap();
                let y = std::fs::read(b.path().join(kind.as_str()).join(&name)).unwrap_or_default();
                compared += 1;
                if x != y {
                    differing.push(format!("{kind}/{}", name.to_string_lossy()));
                }
            }
        }
        Ok(ensure(
            differing.is_empty() && compared >= 15,
            format!("{compared} files compared, differing: {differing:?}"),
        ))
    })())
}

fn main() {
    let criteria: [(&str, Check, Duration); 9] = [
        ("harmonic-mean consistency", harmonic_mean, Duration::from_secs(1)),
        ("class weight exactness", class_weights, Duration::from_secs(1)),
        ("TreeSHAP oracle equivalence", treeshap_oracle, Duration::from_secs(120)),
        ("gradient/hessian check", gradient_check, Duration::from_secs(5)),
        ("GBDT sanity", gbdt_sanity, Duration::from_secs(30)),
        ("split discipline", split_discipline, Duration::from_secs(10)),
        ("bootstrap calibration", bootstrap_calibration, Duration::from_secs(120)),
        ("pipeline ordering", pipeline_ordering, Duration::from_secs(3600)),
        ("determinism", determinism, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let over = took > *budget;
        let (tag, detail) = match outcome {
            Outcome::Pass(d) if !over => ("PASS", d),
            Outcome::Pass(d) => ("FAIL", format!("{d}; over budget {budget:?}")),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} criterion {} {name} ({:.2}s): {detail}", i + 1, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
