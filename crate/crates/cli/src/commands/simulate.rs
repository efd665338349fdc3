//! `second-review`, `prioritize`, and `deferral` workflow simulations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use clap::Args;
use serde_json::json;
use triagebench_core::policy::{BandSlot, LockedThreshold, ThresholdPolicy};
use triagebench_core::simulate::{
    deferral_analysis, prioritize_external, prioritize_internal, prioritize_transfer_threshold,
    second_review, second_review_sweep, DeferralCase, SecondReviewCase, SecondReviewSelection,
};

use crate::parse;
use crate::registry::Registry;
use crate::report::{fmt_f64, fmt_opt, to_value, write_csv, Report};

#[derive(Debug, Args)]
pub struct SecondReviewArgs {
    /// Doctor-negative cases: cohort CSV whose label column is the surgical
    /// reference truth
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: String,
    /// Sweep-and-select policy, e.g. "rescue_burden:min_rescue_rate=0.4,max_review_burden=0.4"
    #[arg(long)]
    pub policy: Option<String>,
    /// Evaluate a fixed threshold instead of selecting one
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Read the locked review threshold for --task from the registry
    #[arg(long)]
    pub from_registry: bool,
    /// Task name for locking or registry lookup
    #[arg(long)]
    pub task: Option<String>,
    /// Lock the selected threshold into the registry's review slot
    #[arg(long)]
    pub lock: bool,
    #[arg(long, default_value = crate::registry::DEFAULT_REGISTRY)]
    pub registry: PathBuf,
    #[arg(long)]
    pub relock: bool,
    #[arg(long)]
    pub locked_at: Option<String>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "retrospective_external")]
    pub role: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn review_cases(args_input: &Path, schema: &str, name: Option<&str>, role: &str) -> Result<Vec<SecondReviewCase>> {
    let cohort = super::load_cohort(args_input, schema, name, role)?;
    let (scores, labels) = cohort.binary_scores_labels()?;
    Ok(scores
        .into_iter()
        .zip(labels)
        .map(|(score, truth_positive)| SecondReviewCase { score, truth_positive })
        .collect())
}

pub fn run_second_review(args: &SecondReviewArgs) -> Result<Report> {
    let cases = review_cases(&args.input, &args.schema, args.name.as_deref(), &args.role)?;
    let mut report = Report::new(
        "second_review",
        json!({
            "input": args.input,
            "schema": args.schema,
            "policy": args.policy,
            "threshold": args.threshold,
            "from_registry": args.from_registry,
            "task": args.task,
            "lock": args.lock,
            "registry": args.registry,
            "out": args.out,
        }),
    );
    report.insert("n_doctor_negative", cases.len());

    let modes = usize::from(args.policy.is_some())
        + usize::from(args.threshold.is_some())
        + usize::from(args.from_registry);
    if modes != 1 {
        bail!("pass exactly one of --policy, --threshold, --from-registry");
    }

    if let Some(policy_spec) = &args.policy {
        let policy = parse::parse_policy(policy_spec)?;
        if !matches!(policy, ThresholdPolicy::RescueBurden { .. }) {
            bail!("second-review selection needs a rescue_burden policy; use threshold-select for {policy_spec}");
        }
        let sweep = second_review_sweep(&cases, &policy)?;
        let csv_rows: Vec<Vec<String>> = sweep
            .rows
            .iter()
            .map(|(t, o)| {
                vec![
                    fmt_f64(*t),
                    o.total_fn.to_string(),
                    o.rescued_fn.to_string(),
                    fmt_opt(o.rescue_rate),
                    o.review_cases.to_string(),
                    o.false_alarm_reviews.to_string(),
                    fmt_f64(o.review_burden),
                    fmt_opt(o.number_needed_to_review),
                ]
            })
            .collect();
        write_csv(
            &args.out,
            "sweep",
            &[
                "threshold",
                "total_fn",
                "rescued_fn",
                "rescue_rate",
                "review_cases",
                "false_alarm_reviews",
                "review_burden",
                "number_needed_to_review",
            ],
            &csv_rows,
        )?;
        report.insert("selection", &sweep.selection);

        if args.lock {
            let task = args
                .task
                .clone()
                .context("--lock requires --task")?;
            if let SecondReviewSelection::Selected { value, .. } = &sweep.selection {
                let locked = LockedThreshold {
                    task,
                    value: *value,
                    policy: policy.clone(),
                    source_cohort: args
                        .name
                        .clone()
                        .unwrap_or_else(|| args.input.file_stem().unwrap().to_string_lossy().into_owned()),
                    locked_at: args
                        .locked_at
                        .clone()
                        .unwrap_or_else(|| Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)),
                };
                let mut registry = Registry::load(&args.registry)?;
                registry.lock(BandSlot::Review, locked.clone(), args.relock)?;
                registry.save(&args.registry)?;
                report.insert("locked", &locked);
            } else {
                // The infeasible selection stays in the report; only the
                // lock step fails.
                report.errors.push(crate::report::SectionError {
                    section: "lock".into(),
                    message: "selection is infeasible; nothing to lock".into(),
                });
            }
        }
    } else {
        let threshold = match (args.threshold, args.from_registry) {
            (Some(t), _) => t,
            (None, true) => {
                let task = args.task.clone().context("--from-registry requires --task")?;
                let registry = Registry::load(&args.registry)?;
                let locked = registry.require(&task, BandSlot::Review)?;
                report.insert("locked", locked);
                locked.value
            }
            _ => unreachable!(),
        };
        let outcome = second_review(&cases, threshold)?;
        report.insert("threshold", threshold);
        report.insert("outcome", to_value(outcome));
    }
    Ok(report)
}

#[derive(Debug, Args)]
pub struct PrioritizeArgs {
    /// Internal ranking CSV: case_id, label, one score column per strategy
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: String,
    /// Intended testing rates, e.g. "0.1,0.2,0.3,0.5,1.0"
    #[arg(long)]
    pub rates: String,
    /// Strategy columns (default: every column besides case_id and label)
    #[arg(long)]
    pub strategies: Option<String>,
    /// External cohort CSV; switches to threshold-transfer validation
    #[arg(long)]
    pub external: Option<PathBuf>,
    /// Strategy whose internal ranking defines transferred thresholds
    #[arg(long)]
    pub transfer_strategy: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

struct RankingTable {
    case_ids: Vec<String>,
    truth: Vec<bool>,
    strategies: Vec<(String, Vec<f64>)>,
}

fn load_ranking(path: &Path, schema: &str, wanted: Option<&[String]>) -> Result<RankingTable> {
    let class_map = parse::parse_class_map(schema)?;
    let positive = class_map
        .positive_index()
        .ok_or_else(|| anyhow::anyhow!("schema must designate the positive (mutated) class"))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let case_col = col("case_id").context("missing column 'case_id'")?;
    let label_col = col("label").context("missing column 'label'")?;
    let strategy_names: Vec<String> = match wanted {
        Some(names) => names.to_vec(),
        None => headers
            .iter()
            .filter(|h| h.as_str() != "case_id" && h.as_str() != "label")
            .cloned()
            .collect(),
    };
    let strategy_cols: Vec<usize> = strategy_names
        .iter()
        .map(|n| col(n).with_context(|| format!("missing strategy column '{n}'")))
        .collect::<Result<_>>()?;

    let mut case_ids = Vec::new();
    let mut truth = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); strategy_cols.len()];
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let get = |c: usize| row.get(c).unwrap_or("").trim().to_string();
        case_ids.push(get(case_col));
        let label = get(label_col);
        let label_idx = class_map
            .index_of(&label)
            .with_context(|| format!("row {}: unknown label '{label}'", i + 2))?;
        truth.push(label_idx == positive);
        for (k, &c) in strategy_cols.iter().enumerate() {
            let raw = get(c);
            let v: f64 = raw
                .parse()
                .with_context(|| format!("row {}: unparseable score '{raw}'", i + 2))?;
            columns[k].push(v);
        }
    }
    if case_ids.is_empty() {
        bail!("no records in {}", path.display());
    }
    Ok(RankingTable {
        case_ids,
        truth,
        strategies: strategy_names.into_iter().zip(columns).collect(),
    })
}

pub fn run_prioritize(args: &PrioritizeArgs) -> Result<Report> {
    let rates = parse::parse_rates(&args.rates)?;
    let wanted: Option<Vec<String>> = args
        .strategies
        .as_ref()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let internal = load_ranking(&args.input, &args.schema, wanted.as_deref())?;

    let mut report = Report::new(
        "prioritize",
        json!({
            "input": args.input,
            "schema": args.schema,
            "rates": args.rates,
            "strategies": internal.strategies.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            "external": args.external,
            "transfer_strategy": args.transfer_strategy,
            "out": args.out,
        }),
    );

    let outcomes =
        prioritize_internal(&internal.case_ids, &internal.truth, &internal.strategies, &rates)?;
    report.insert("internal", to_value(&outcomes));
    let csv_rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            vec![
                o.strategy.clone(),
                fmt_f64(o.intended_rate),
                fmt_f64(o.actual_rate),
                fmt_opt(o.threshold),
                o.selected.to_string(),
                fmt_opt(o.sensitivity),
                fmt_opt(o.ppv),
                fmt_opt(o.enrichment),
                fmt_opt(o.tests_per_mutation),
            ]
        })
        .collect();
    write_csv(
        &args.out,
        "prioritize_internal",
        &[
            "strategy",
            "intended_rate",
            "actual_rate",
            "threshold",
            "selected",
            "sensitivity",
            "ppv",
            "enrichment",
            "tests_per_mutation",
        ],
        &csv_rows,
    )?;

    if let Some(external_path) = &args.external {
        let strategy = args
            .transfer_strategy
            .clone()
            .unwrap_or_else(|| internal.strategies[0].0.clone());
        let internal_scores = &internal
            .strategies
            .iter()
            .find(|(n, _)| *n == strategy)
            .with_context(|| format!("internal table has no strategy '{strategy}'"))?
            .1;
        let external = load_ranking(external_path, &args.schema, Some(std::slice::from_ref(&strategy)))?;
        let external_scores = &external.strategies[0].1;
        let mut rows = Vec::new();
        for &rate in &rates {
            if !(0.0 < rate && rate < 1.0) {
                continue;
            }
            let threshold = prioritize_transfer_threshold(internal_scores, rate)?;
            rows.push(prioritize_external(
                &strategy,
                external_scores,
                &external.truth,
                threshold,
                rate,
            )?);
        }
        report.insert("external", to_value(&rows));
    }
    Ok(report)
}

#[derive(Debug, Args)]
pub struct DeferralArgs {
    /// Cohort CSV with deferral annotations in the tags column
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: String,
    /// Tag marking deferred cases
    #[arg(long, default_value = "Defer")]
    pub tag: String,
    /// Locked rule-out threshold value (otherwise read from the registry)
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, default_value = crate::registry::DEFAULT_REGISTRY)]
    pub registry: PathBuf,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = "internal_test")]
    pub role: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run_deferral(args: &DeferralArgs) -> Result<Report> {
    let cohort = super::load_cohort(&args.input, &args.schema, args.name.as_deref(), &args.role)?;
    let (scores, labels) = cohort.binary_scores_labels()?;

    let locked = match (args.threshold, &args.task) {
        (Some(value), _) => LockedThreshold {
            task: args.task.clone().unwrap_or_else(|| "adhoc".into()),
            value,
            policy: ThresholdPolicy::RuleOutNpv { min_npv: 1.0 },
            source_cohort: "supplied".into(),
            locked_at: String::new(),
        },
        (None, Some(task)) => {
            let registry = Registry::load(&args.registry)?;
            registry.require(task, BandSlot::RuleOut)?.clone()
        }
        (None, None) => bail!("pass --threshold or --task (with a registry)"),
    };

    let cases: Vec<DeferralCase> = cohort
        .records
        .iter()
        .zip(scores.iter().zip(&labels))
        .map(|(rec, (&score, &truth_positive))| DeferralCase {
            score,
            truth_positive,
            deferred: rec.has_tag(&args.tag),
        })
        .collect();

    let mut report = Report::new(
        "deferral",
        json!({
            "input": args.input,
            "schema": args.schema,
            "tag": args.tag,
            "threshold": locked.value,
            "task": locked.task,
            "registry": args.registry,
            "out": args.out,
        }),
    );
    let outcome = deferral_analysis(&cases, &locked)?;
    report.insert("deferral", to_value(outcome));
    report.insert("n_deferred", cases.iter().filter(|c| c.deferred).count());
    Ok(report)
}
