//! `compare`: mean within-cohort ranks across models plus one-sided
//! Wilcoxon signed-rank comparisons of the baseline model per task.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use triagebench_core::inference::{model_mean_rank, wilcoxon_signed_rank_one_sided};

use crate::report::{p_value_json, Report, SectionError};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Metric table CSV: task, cohort, one column per model
    #[arg(long)]
    pub input: PathBuf,
    /// Model whose superiority is tested one-sided against every other
    /// (defaults to the first model column)
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run(args: &CompareArgs) -> Result<Report> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&args.input)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let task_col = headers.iter().position(|h| h == "task").context("missing column 'task'")?;
    let cohort_col =
        headers.iter().position(|h| h == "cohort").context("missing column 'cohort'")?;
    let model_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != task_col && *i != cohort_col)
        .map(|(i, h)| (i, h.clone()))
        .collect();
    if model_cols.len() < 2 {
        bail!("need at least two model columns");
    }
    let models: Vec<String> = model_cols.iter().map(|(_, n)| n.clone()).collect();
    let baseline = args.baseline.clone().unwrap_or_else(|| models[0].clone());
    let baseline_idx = models
        .iter()
        .position(|m| *m == baseline)
        .with_context(|| format!("baseline '{baseline}' is not a model column"))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut per_task: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let values: Vec<f64> = model_cols
            .iter()
            .map(|(c, name)| {
                record
                    .get(*c)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .with_context(|| format!("row {}: unparseable value for '{name}'", i + 2))
            })
            .collect::<Result<_>>()?;
        let task = record.get(task_col).unwrap_or("").trim().to_string();
        per_task.entry(task).or_default().push(values.clone());
        rows.push(values);
    }
    if rows.is_empty() {
        bail!("no cohort rows in {}", args.input.display());
    }

    let mut report = Report::new(
        "compare",
        json!({
            "input": args.input,
            "models": models,
            "baseline": baseline,
            "n_cohorts": rows.len(),
            "n_tasks": per_task.len(),
            "out": args.out,
        }),
    );

    let ranks = model_mean_rank(&models, &rows)?;
    report.insert(
        "mean_ranks",
        ranks
            .iter()
            .map(|(m, r)| json!({"model": m, "mean_rank": r}))
            .collect::<Vec<_>>(),
    );

    // One-sided Wilcoxon per task: is the baseline's metric shifted above
    // each competitor's over the task's cohorts?
    let mut tests = Vec::new();
    for (task, task_rows) in &per_task {
        for (j, model) in models.iter().enumerate() {
            if j == baseline_idx {
                continue;
            }
            let diffs: Vec<f64> =
                task_rows.iter().map(|r| r[baseline_idx] - r[j]).collect();
            match wilcoxon_signed_rank_one_sided(&diffs) {
                Ok(p) => tests.push(json!({
                    "task": task,
                    "baseline": baseline,
                    "model": model,
                    "n_cohorts": diffs.len(),
                    "p": p_value_json(p),
                })),
                Err(e) => report.errors.push(SectionError {
                    section: format!("wilcoxon:{task}:{model}"),
                    message: e.to_string(),
                }),
            }
        }
    }
    report.insert("wilcoxon_one_sided", tests);
    Ok(report)
}
