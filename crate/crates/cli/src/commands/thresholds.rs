//! `threshold-select`, `threshold-apply`, and `triage`: constrained
//! selection into the locked registry, and band application.

use std::path::PathBuf;

use anyhow::{bail, Result};
use chrono::{SecondsFormat, Utc};
use clap::Args;
use serde_json::json;
use triagebench_core::policy::{
    apply_locked, select_threshold, sweep, LockedThreshold, Selection, SweepSemantics,
    ThresholdPolicy, TriageClass,
};
use triagebench_core::simulate::triage;

use crate::parse;
use crate::registry::Registry;
use crate::report::{fmt_f64, fmt_opt, to_value, write_csv, Report};

#[derive(Debug, Args)]
pub struct ThresholdSelectArgs {
    /// Cohort CSV used for selection
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: String,
    /// Task the threshold will be locked under
    #[arg(long)]
    pub task: String,
    /// Selection policy, e.g. "ruleout_npv:min_npv=1.0"
    #[arg(long)]
    pub policy: String,
    #[arg(long, default_value = crate::registry::DEFAULT_REGISTRY)]
    pub registry: PathBuf,
    /// Replace an existing registry slot
    #[arg(long)]
    pub relock: bool,
    /// Lock timestamp (RFC 3339); defaults to now. Pin it for reproducible
    /// registry files.
    #[arg(long)]
    pub locked_at: Option<String>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "internal_test")]
    pub role: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn write_sweep_csv(
    out: &std::path::Path,
    rows: &[triagebench_core::policy::SweepRow],
) -> Result<()> {
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.threshold),
                r.counts.true_pos.to_string(),
                r.counts.false_pos.to_string(),
                r.counts.true_neg.to_string(),
                r.counts.false_neg.to_string(),
                fmt_opt(r.sensitivity),
                fmt_opt(r.specificity),
                r.set_size.to_string(),
                fmt_opt(r.set_rate),
                fmt_f64(r.coverage),
            ]
        })
        .collect();
    write_csv(
        out,
        "sweep",
        &[
            "threshold",
            "true_pos",
            "false_pos",
            "true_neg",
            "false_neg",
            "sensitivity",
            "specificity",
            "set_size",
            "set_rate",
            "coverage",
        ],
        &csv_rows,
    )?;
    Ok(())
}

pub fn run_select(args: &ThresholdSelectArgs) -> Result<Report> {
    let policy = parse::parse_policy(&args.policy)?;
    if matches!(policy, ThresholdPolicy::RescueBurden { .. }) {
        bail!("rescue_burden thresholds are selected by the second-review command");
    }
    let cohort = super::load_cohort(&args.input, &args.schema, args.name.as_deref(), &args.role)?;
    let (scores, labels) = cohort.binary_scores_labels()?;
    let semantics = match policy {
        ThresholdPolicy::RuleInPpv { .. } => SweepSemantics::RuleIn,
        _ => SweepSemantics::RuleOut,
    };
    let locked_at = args
        .locked_at
        .clone()
        .unwrap_or_else(|| Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));

    let mut report = Report::new(
        "threshold_select",
        json!({
            "input": args.input,
            "schema": args.schema,
            "task": args.task,
            "policy": args.policy,
            "registry": args.registry,
            "relock": args.relock,
            "locked_at": locked_at,
            "source_cohort": cohort.name,
            "out": args.out,
        }),
    );

    let rows = sweep(&scores, &labels, semantics)?;
    write_sweep_csv(&args.out, &rows)?;
    let selection = select_threshold(&rows, &policy)?;
    report.insert("selection", &selection);

    if let Selection::Selected { value, .. } = &selection {
        let locked = LockedThreshold {
            task: args.task.clone(),
            value: *value,
            policy: policy.clone(),
            source_cohort: cohort.name.clone(),
            locked_at,
        };
        let mut registry = Registry::load(&args.registry)?;
        registry.lock(policy.slot(), locked.clone(), args.relock)?;
        registry.save(&args.registry)?;
        report.insert("locked", &locked);
        report.insert("registry_slot", policy.slot().to_string());
    }
    Ok(report)
}

#[derive(Debug, Args)]
pub struct ThresholdApplyArgs {
    /// Cohort CSV the locked thresholds are applied to
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: String,
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value = crate::registry::DEFAULT_REGISTRY)]
    pub registry: PathBuf,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "prospective")]
    pub role: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run_apply(args: &ThresholdApplyArgs) -> Result<Report> {
    let seed = super::resolve_seed(args.seed);
    let cohort = super::load_cohort(&args.input, &args.schema, args.name.as_deref(), &args.role)?;
    let (scores, labels) = cohort.binary_scores_labels()?;

    let registry = Registry::load(&args.registry)?;
    let low = registry.require(&args.task, triagebench_core::policy::BandSlot::RuleOut).ok();
    let high = registry.require(&args.task, triagebench_core::policy::BandSlot::RuleIn).ok();
    if low.is_none() && high.is_none() {
        bail!(
            "registry {} has no rule_out or rule_in threshold for task '{}'",
            args.registry.display(),
            args.task
        );
    }

    let mut report = Report::new(
        "threshold_apply",
        json!({
            "input": args.input,
            "schema": args.schema,
            "task": args.task,
            "registry": args.registry,
            "cohort": cohort.name,
            "seed": seed,
            "resamples": args.resamples,
            "level": args.level,
            "out": args.out,
        }),
    );
    report.insert("locked_rule_out", low);
    report.insert("locked_rule_in", high);

    let assignments = apply_locked(low, high, &args.task, &scores)?;
    let csv_rows: Vec<Vec<String>> = cohort
        .records
        .iter()
        .zip(&assignments)
        .map(|(rec, cls)| {
            vec![
                rec.case_id.clone(),
                fmt_f64(rec.positive_score(&cohort.class_map)),
                match cls {
                    TriageClass::RuledOut => "ruled_out".to_string(),
                    TriageClass::GrayZone => "gray_zone".to_string(),
                    TriageClass::RuledIn => "ruled_in".to_string(),
                },
            ]
        })
        .collect();
    write_csv(&args.out, "assignments", &["case_id", "score", "assignment"], &csv_rows)?;

    let cfg = super::bootstrap_config(seed, args.resamples, args.level);
    let outcome = triage(
        &scores,
        &labels,
        low.map(|l| l.value),
        high.map(|h| h.value),
        Some(&cfg),
    )?;
    report.insert("triage", to_value(outcome));
    Ok(report)
}

#[derive(Debug, Args)]
pub struct TriageArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: String,
    /// Rule-out threshold: score < t_low is excluded from review
    #[arg(long)]
    pub t_low: Option<f64>,
    /// Rule-in threshold: score >= t_high is prioritized
    #[arg(long)]
    pub t_high: Option<f64>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "internal_test")]
    pub role: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run_triage(args: &TriageArgs) -> Result<Report> {
    if args.t_low.is_none() && args.t_high.is_none() {
        bail!("pass --t-low and/or --t-high");
    }
    let seed = super::resolve_seed(args.seed);
    let cohort = super::load_cohort(&args.input, &args.schema, args.name.as_deref(), &args.role)?;
    let (scores, labels) = cohort.binary_scores_labels()?;
    let cfg = super::bootstrap_config(seed, args.resamples, args.level);

    let mut report = Report::new(
        "triage",
        json!({
            "input": args.input,
            "schema": args.schema,
            "t_low": args.t_low,
            "t_high": args.t_high,
            "cohort": cohort.name,
            "seed": seed,
            "resamples": args.resamples,
            "level": args.level,
            "out": args.out,
        }),
    );
    let outcome = triage(&scores, &labels, args.t_low, args.t_high, Some(&cfg))?;
    report.insert("triage", to_value(outcome));
    Ok(report)
}
