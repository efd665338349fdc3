//! `reader-study`: descriptive summaries, condition and sequence GEE
//! models, per-condition agreement with bootstrap kappa differences, and
//! decision trajectories.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::{json, Value};
use triagebench_core::cohort::{load_reader, ReaderObservation};
use triagebench_core::inference::{
    decision_trajectory, kappa_with_delta, reader_condition_gee, sequence_effect, summarize_readers,
    GeeFit, GeeOutcomeKind,
};

use crate::report::{fmt_opt, p_value_json, to_value, write_csv, Report, SectionError};

#[derive(Debug, Args)]
pub struct ReaderStudyArgs {
    /// Reader observations CSV
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn gee_row(scope: &str, outcome: GeeOutcomeKind, fit: &GeeFit, exposure: &str) -> Value {
    let coef = fit.coefficients.iter().find(|c| c.name == exposure);
    let metric = match outcome {
        GeeOutcomeKind::Accuracy => "accuracy_or",
        GeeOutcomeKind::Time => "time_ratio",
        GeeOutcomeKind::Confidence => "confidence_diff",
    };
    json!({
        "scope": scope,
        "metric": metric,
        "exposure": exposure,
        "effect": coef.map(|c| c.effect),
        "ci": coef.map(|c| json!({"lo": c.ci.0, "hi": c.ci.1})),
        "p": coef.map(|c| p_value_json(c.p)),
        "alpha": fit.alpha,
        "n_obs": fit.n_obs,
        "n_clusters": fit.n_clusters,
        "converged": fit.converged,
    })
}

fn gee_section(
    obs: &[ReaderObservation],
    tasks: &[String],
    errors: &mut Vec<SectionError>,
    section: &str,
    fit_fn: impl Fn(&[ReaderObservation], GeeOutcomeKind, Option<&str>) -> triagebench_core::Result<GeeFit>,
    exposure: &str,
) -> Vec<Value> {
    let mut rows = Vec::new();
    let mut scopes: Vec<Option<&str>> = vec![None];
    scopes.extend(tasks.iter().map(|t| Some(t.as_str())));
    for scope in scopes {
        let label = scope.unwrap_or("overall");
        for outcome in [GeeOutcomeKind::Accuracy, GeeOutcomeKind::Time, GeeOutcomeKind::Confidence]
        {
            match fit_fn(obs, outcome, scope) {
                Ok(fit) => rows.push(gee_row(label, outcome, &fit, exposure)),
                Err(e) => errors.push(SectionError {
                    section: format!("{section}:{label}:{outcome:?}"),
                    message: e.to_string(),
                }),
            }
        }
    }
    rows
}

pub fn run(args: &ReaderStudyArgs) -> Result<Report> {
    let seed = super::resolve_seed(args.seed);
    let obs = load_reader(&args.input)?;
    let tasks: Vec<String> =
        obs.iter().map(|o| o.task.clone()).collect::<BTreeSet<_>>().into_iter().collect();

    let mut report = Report::new(
        "reader_study",
        json!({
            "input": args.input,
            "seed": seed,
            "resamples": args.resamples,
            "out": args.out,
            "tasks": tasks,
        }),
    );
    report.insert("n_observations", obs.len());

    // Descriptive per reader-task-condition summaries.
    match summarize_readers(&obs) {
        Ok(rows) => {
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.reader_id.clone(),
                        format!("{:?}", r.experience).to_lowercase(),
                        r.task.clone(),
                        r.condition.to_string(),
                        r.n_cases.to_string(),
                        r.n_timeouts.to_string(),
                        format!("{}", r.balanced_accuracy),
                        format!("{}", r.mean_time_s),
                        fmt_opt(r.mean_confidence),
                    ]
                })
                .collect();
            write_csv(
                &args.out,
                "reader_summaries",
                &[
                    "reader_id",
                    "experience",
                    "task",
                    "condition",
                    "n_cases",
                    "n_timeouts",
                    "balanced_accuracy",
                    "mean_time_s",
                    "mean_confidence",
                ],
                &csv_rows,
            )?;
            report.insert("summaries", to_value(rows));
        }
        Err(e) => report.errors.push(SectionError {
            section: "summaries".into(),
            message: e.to_string(),
        }),
    }

    // Condition effects (unassisted reads are the reference).
    let mut errors = Vec::new();
    let rows = gee_section(&obs, &tasks, &mut errors, "gee", reader_condition_gee, "with_ai");
    report.insert("gee", rows);

    // Inter-rater agreement with bootstrap kappa differences.
    let mut kappa_rows = Vec::new();
    for task in &tasks {
        match kappa_with_delta(&obs, task, args.resamples, seed) {
            Ok(k) => kappa_rows.push(json!({
                "task": k.task,
                "without_ai": to_value(k.without_ai),
                "with_ai": to_value(k.with_ai),
                "difference": {
                    "delta": k.difference.delta,
                    "lo": k.difference.lo,
                    "hi": k.difference.hi,
                    "p": p_value_json(k.difference.p),
                    "n_resamples": k.difference.n_resamples,
                },
            })),
            Err(e) => errors.push(SectionError {
                section: format!("agreement:{task}"),
                message: e.to_string(),
            }),
        }
    }
    report.insert("agreement", kappa_rows);

    // Sequence effects keyed on with_ai_first.
    let rows = gee_section(&obs, &tasks, &mut errors, "sequence", sequence_effect, "with_ai_first");
    report.insert("sequence_effects", rows);

    // Decision trajectories.
    let mut trajectory_rows = Vec::new();
    for task in &tasks {
        match decision_trajectory(&obs, task) {
            Ok(t) => trajectory_rows.push(to_value(t)),
            Err(e) => errors.push(SectionError {
                section: format!("trajectory:{task}"),
                message: e.to_string(),
            }),
        }
    }
    report.insert("trajectories", trajectory_rows);

    report.errors.extend(errors);
    Ok(report)
}
