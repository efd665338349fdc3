//! `metrics`: macro-AUC with bootstrap CI, per-class Youden operating
//! points, class distribution, ROC plot data, and optional subgroup shift.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::json;
use triagebench_core::cohort::Cohort;
use triagebench_core::inference::subgroup_shift_report;
use triagebench_core::metrics::{confusion_at_threshold, macro_auc_ovr, youden_optimal};
use triagebench_core::policy::{sweep, SweepSemantics};
use triagebench_core::resample;

use crate::report::{ci_json, fmt_f64, fmt_opt, p_value_json, to_value, write_csv, Report};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Cohort CSV (case_id, label, score or score_<class>..., tags, center, stage)
    #[arg(long)]
    pub input: PathBuf,
    /// Class map: "neg,pos;positive=pos" or a JSON file
    #[arg(long)]
    pub schema: String,
    /// Cohort name (defaults to the input file stem)
    #[arg(long)]
    pub name: Option<String>,
    /// Cohort role: train, val, internal_test, retrospective_external, prospective
    #[arg(long, default_value = "internal_test")]
    pub role: String,
    /// Also report score-distribution shift for this subgroup tag
    #[arg(long)]
    pub subgroup_tag: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn resampled(cohort: &Cohort, idx: &[usize]) -> Cohort {
    Cohort {
        name: cohort.name.clone(),
        class_map: cohort.class_map.clone(),
        records: idx.iter().map(|&i| cohort.records[i].clone()).collect(),
        role: cohort.role,
    }
}

pub fn run(args: &MetricsArgs) -> Result<Report> {
    let seed = super::resolve_seed(args.seed);
    let cohort = super::load_cohort(&args.input, &args.schema, args.name.as_deref(), &args.role)?;
    let cfg = super::bootstrap_config(seed, args.resamples, args.level);

    let mut report = Report::new(
        "metrics",
        json!({
            "input": args.input,
            "schema": args.schema,
            "name": cohort.name,
            "role": cohort.role,
            "subgroup_tag": args.subgroup_tag,
            "seed": seed,
            "resamples": args.resamples,
            "level": args.level,
            "out": args.out,
        }),
    );
    report.insert("n_cases", cohort.len());
    report.insert("class_distribution", cohort.class_distribution());

    // Macro one-vs-rest AUC with a case-resampled bootstrap CI.
    let macro_point = macro_auc_ovr(&cohort)?;
    let macro_ci = resample::bootstrap_ci(
        &cohort.records,
        |idx, _| macro_auc_ovr(&resampled(&cohort, idx)).ok().map(|m| m.value),
        cfg.n_resamples,
        cfg.seed,
        cfg.level,
    )?;
    report.insert(
        "macro_auc",
        json!({
            "value": macro_point.value,
            "ci": ci_json(macro_ci.point, macro_ci.lo, macro_ci.hi),
            "per_class": macro_point.per_class,
            "excluded_classes": macro_point.excluded,
            "n_degenerate_resamples": macro_ci.n_degenerate,
        }),
    );

    // Youden operating points, one row per one-vs-rest problem (the positive
    // class only for binary tasks), with fixed-threshold bootstrap CIs.
    let class_rows: Vec<usize> = match cohort.class_map.positive_index() {
        Some(p) if cohort.class_map.len() == 2 => vec![p],
        _ => (0..cohort.class_map.len()).collect(),
    };
    let mut youden_rows = Vec::new();
    for class in class_rows {
        let scores: Vec<f64> = cohort.records.iter().map(|r| r.scores[class]).collect();
        let labels: Vec<bool> = cohort.records.iter().map(|r| r.true_label == class).collect();
        let op = match youden_optimal(&scores, &labels) {
            Ok(op) => op,
            Err(e) => {
                report.errors.push(crate::report::SectionError {
                    section: format!("youden:{}", cohort.class_map.names()[class]),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let t = op.threshold;
        let rates = resample::replicate_statistics_vec(
            scores.len(),
            cfg.n_resamples,
            cfg.seed,
            |idx| {
                let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
                let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
                let c = confusion_at_threshold(&s, &l, t).ok()?;
                Some(vec![
                    c.sensitivity().unwrap_or(f64::NAN),
                    c.specificity().unwrap_or(f64::NAN),
                    c.npv().unwrap_or(f64::NAN),
                ])
            },
        );
        let ci_of = |component: usize| {
            let mut vals: Vec<f64> = rates
                .iter()
                .filter_map(|r| r.as_ref().map(|v| v[component]))
                .filter(|v| v.is_finite())
                .collect();
            if vals.is_empty() {
                return serde_json::Value::Null;
            }
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let alpha = 1.0 - cfg.level;
            json!({
                "lo": resample::quantile_sorted(&vals, alpha / 2.0),
                "hi": resample::quantile_sorted(&vals, 1.0 - alpha / 2.0),
            })
        };
        youden_rows.push(json!({
            "class": cohort.class_map.names()[class],
            "threshold": op.threshold,
            "youden": op.youden,
            "sensitivity": op.sensitivity,
            "sensitivity_ci": ci_of(0),
            "specificity": op.specificity,
            "specificity_ci": ci_of(1),
            "ppv": op.ppv,
            "npv": op.npv,
            "npv_ci": ci_of(2),
        }));
    }
    report.insert("youden_operating_points", youden_rows);

    // ROC plot data per class (binary: the positive class).
    let roc_classes: Vec<usize> = match cohort.class_map.positive_index() {
        Some(p) if cohort.class_map.len() == 2 => vec![p],
        _ => (0..cohort.class_map.len()).collect(),
    };
    for class in roc_classes {
        let scores: Vec<f64> = cohort.records.iter().map(|r| r.scores[class]).collect();
        let labels: Vec<bool> = cohort.records.iter().map(|r| r.true_label == class).collect();
        if let Ok(rows) = sweep(&scores, &labels, SweepSemantics::RuleIn) {
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.threshold),
                        fmt_opt(r.sensitivity),
                        fmt_opt(r.specificity.map(|s| 1.0 - s)),
                    ]
                })
                .collect();
            write_csv(
                &args.out,
                &format!("roc_{}", cohort.class_map.names()[class]),
                &["threshold", "tpr", "fpr"],
                &csv_rows,
            )?;
        }
    }

    // Optional subgroup robustness section.
    if let Some(tag) = &args.subgroup_tag {
        let section = cohort.subgroup_filter(tag).map_err(anyhow::Error::from).and_then(
            |subgroup| {
                if subgroup.is_empty() {
                    anyhow::bail!("subgroup tag '{tag}' matches no cases");
                }
                let shift = subgroup_shift_report(&cohort, &subgroup, &cfg)?;
                Ok(json!({
                    "tag": tag,
                    "subgroup_n": subgroup.len(),
                    "per_class": shift.per_class.iter().map(|c| json!({
                        "class": c.class_name,
                        "baseline_n": c.baseline_n,
                        "subgroup_n": c.subgroup_n,
                        "ks_d": c.ks.d,
                        "ks_p": p_value_json(c.ks.p),
                    })).collect::<Vec<_>>(),
                    "baseline_auc": shift.baseline_auc,
                    "subgroup_auc": shift.subgroup_auc.as_ref().map(|b| ci_json(b.point, b.lo, b.hi)),
                }))
            },
        );
        report.section("subgroup_shift", section.map(to_value));
    }

    Ok(report)
}
