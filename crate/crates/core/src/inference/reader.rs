//! Reader-study analysis on pathologist-case-condition observations:
//! descriptive summaries, condition and sequence GEE models, per-condition
//! Fleiss kappa with a bootstrap kappa difference, and decision
//! trajectories.
//!
//! Timeout rules: timed-out reads count as incorrect for accuracy, keep
//! their recorded time for the time model, are excluded pairwise from the
//! confidence model, and form an extra response category for agreement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::agreement::{bootstrap_kappa_difference, fleiss_kappa, KappaDifference, KappaResult};
use super::gee::{gee_fit, GeeFit, GeeLink, GeeOptions};
use crate::cohort::{Condition, Experience, ReaderObservation, Response};
use crate::error::{Error, Result};
use crate::metrics::balanced_accuracy;

/// Reference label per (task, case), reconstructed from the reads: any
/// correct non-timeout read pins the truth; incorrect binary reads pin it
/// as the opposite class. Conflicts are hard errors.
pub fn infer_truth(obs: &[ReaderObservation]) -> Result<BTreeMap<(String, String), usize>> {
    let mut truth: BTreeMap<(String, String), usize> = BTreeMap::new();
    for o in obs {
        if let (true, Response::Class(c)) = (o.correct, o.response) {
            let key = (o.task.clone(), o.case_id.clone());
            if let Some(&existing) = truth.get(&key) {
                if existing != c {
                    return Err(Error::Record {
                        row: 0,
                        message: format!(
                            "conflicting correct responses for case '{}' in task '{}'",
                            o.case_id, o.task
                        ),
                    });
                }
            } else {
                truth.insert(key, c);
            }
        }
    }
    // Binary fallback: an incorrect read of class c implies truth 1 - c when
    // the task only uses classes {0, 1}.
    let mut classes_per_task: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for o in obs {
        if let Response::Class(c) = o.response {
            classes_per_task.entry(o.task.clone()).or_default().insert(c);
        }
    }
    for o in obs {
        let key = (o.task.clone(), o.case_id.clone());
        if truth.contains_key(&key) {
            continue;
        }
        let classes = &classes_per_task[&o.task];
        if classes.len() == 2 && classes.contains(&0) && classes.contains(&1) {
            if let (false, Response::Class(c)) = (o.correct, o.response) {
                truth.insert(key, 1 - c);
            }
        }
    }
    // Validate: incorrect reads must disagree with the inferred truth.
    for o in obs {
        let key = (o.task.clone(), o.case_id.clone());
        match truth.get(&key) {
            Some(&t) => {
                if let Response::Class(c) = o.response {
                    if o.correct != (c == t) {
                        return Err(Error::Record {
                            row: 0,
                            message: format!(
                                "read of case '{}' in task '{}' contradicts the inferred label",
                                o.case_id, o.task
                            ),
                        });
                    }
                }
            }
            None => {
                return Err(Error::Undefined(format!(
                    "no read determines the label of case '{}' in task '{}'",
                    o.case_id, o.task
                )))
            }
        }
    }
    Ok(truth)
}

/// One reader-task-condition row of descriptive statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderSummaryRow {
    pub reader_id: String,
    pub experience: Experience,
    pub task: String,
    pub condition: Condition,
    pub n_cases: usize,
    pub n_timeouts: usize,
    pub balanced_accuracy: f64,
    pub mean_time_s: f64,
    /// Mean confidence over completed reads; absent if everything timed out.
    pub mean_confidence: Option<f64>,
}

pub fn summarize_readers(obs: &[ReaderObservation]) -> Result<Vec<ReaderSummaryRow>> {
    let truth = infer_truth(obs)?;
    let mut groups: BTreeMap<(String, String, Condition), Vec<&ReaderObservation>> =
        BTreeMap::new();
    for o in obs {
        groups
            .entry((o.reader_id.clone(), o.task.clone(), o.condition))
            .or_default()
            .push(o);
    }
    let mut rows = Vec::new();
    for ((reader_id, task, condition), reads) in groups {
        let predicted: Vec<Option<usize>> = reads
            .iter()
            .map(|o| match o.response {
                Response::Class(c) => Some(c),
                Response::Timeout => None,
            })
            .collect();
        let truths: Vec<usize> = reads
            .iter()
            .map(|o| truth[&(o.task.clone(), o.case_id.clone())])
            .collect();
        let completed: Vec<&&ReaderObservation> = reads.iter().filter(|o| !o.timed_out).collect();
        rows.push(ReaderSummaryRow {
            experience: reads[0].experience,
            n_cases: reads.len(),
            n_timeouts: reads.iter().filter(|o| o.timed_out).count(),
            balanced_accuracy: balanced_accuracy(&predicted, &truths)?,
            mean_time_s: reads.iter().map(|o| o.time_s).sum::<f64>() / reads.len() as f64,
            mean_confidence: if completed.is_empty() {
                None
            } else {
                Some(
                    completed.iter().map(|o| o.confidence.unwrap() as f64).sum::<f64>()
                        / completed.len() as f64,
                )
            },
            reader_id,
            task,
            condition,
        });
    }
    Ok(rows)
}

/// Outcome modeled by the condition/sequence GEE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeeOutcomeKind {
    /// Correctness, logit link; the condition effect is an odds ratio.
    Accuracy,
    /// Reading seconds, log link; the condition effect is a time ratio.
    Time,
    /// Confidence, identity link; the condition effect is a mean difference.
    Confidence,
}

fn task_dummies(tasks: &BTreeSet<String>, task_of: &[String]) -> Vec<(String, Vec<f64>)> {
    // Sorted task names; first is the reference level.
    let levels: Vec<&String> = tasks.iter().collect();
    levels
        .iter()
        .skip(1)
        .map(|t| {
            (
                format!("task_{t}"),
                task_of.iter().map(|v| if v == *t { 1.0 } else { 0.0 }).collect(),
            )
        })
        .collect()
}

/// Pairs (reader, task, case) where either condition timed out; those pairs
/// leave the confidence model entirely.
fn timeout_pairs(obs: &[ReaderObservation]) -> BTreeSet<(String, String, String)> {
    obs.iter()
        .filter(|o| o.timed_out)
        .map(|o| (o.reader_id.clone(), o.task.clone(), o.case_id.clone()))
        .collect()
}

/// Reading-condition GEE, pathologist as the clustering unit, adjusted for
/// condition, period, task (when pooled) and experience; unassisted reads
/// are the reference level.
pub fn reader_condition_gee(
    obs: &[ReaderObservation],
    outcome: GeeOutcomeKind,
    task_filter: Option<&str>,
) -> Result<GeeFit> {
    build_reader_gee(obs, outcome, task_filter, "with_ai", |o| match o.condition {
        Condition::WithAi => 1.0,
        Condition::WithoutAi => 0.0,
    })
}

/// Sequence-effect GEE: the exposure is whether the reader saw the
/// AI-assisted condition first. Inestimable when every reader shares the
/// same sequence.
pub fn sequence_effect(
    obs: &[ReaderObservation],
    outcome: GeeOutcomeKind,
    task_filter: Option<&str>,
) -> Result<GeeFit> {
    build_reader_gee(obs, outcome, task_filter, "with_ai_first", |o| {
        if o.with_ai_first {
            1.0
        } else {
            0.0
        }
    })
}

fn build_reader_gee(
    obs: &[ReaderObservation],
    outcome: GeeOutcomeKind,
    task_filter: Option<&str>,
    exposure_name: &str,
    exposure: impl Fn(&ReaderObservation) -> f64,
) -> Result<GeeFit> {
    let excluded = match outcome {
        GeeOutcomeKind::Confidence => timeout_pairs(obs),
        _ => BTreeSet::new(),
    };
    let selected: Vec<&ReaderObservation> = obs
        .iter()
        .filter(|o| task_filter.is_none_or(|t| o.task == t))
        .filter(|o| {
            !excluded.contains(&(o.reader_id.clone(), o.task.clone(), o.case_id.clone()))
        })
        .collect();
    if selected.is_empty() {
        return Err(Error::Empty("no observations after filtering".into()));
    }

    let y: Vec<f64> = selected
        .iter()
        .map(|o| match outcome {
            GeeOutcomeKind::Accuracy => {
                if o.correct {
                    1.0
                } else {
                    0.0
                }
            }
            GeeOutcomeKind::Time => o.time_s,
            GeeOutcomeKind::Confidence => o.confidence.map(f64::from).unwrap_or(f64::NAN),
        })
        .collect();
    let link = match outcome {
        GeeOutcomeKind::Accuracy => GeeLink::Logit,
        GeeOutcomeKind::Time => GeeLink::Log,
        GeeOutcomeKind::Confidence => GeeLink::Identity,
    };

    let mut covariates: Vec<(String, Vec<f64>)> = vec![(
        exposure_name.to_string(),
        selected.iter().map(|o| exposure(o)).collect(),
    )];
    covariates.push((
        "period2".into(),
        selected.iter().map(|o| if o.period == 2 { 1.0 } else { 0.0 }).collect(),
    ));
    covariates.push((
        "senior".into(),
        selected
            .iter()
            .map(|o| if o.experience == Experience::Senior { 1.0 } else { 0.0 })
            .collect(),
    ));
    if task_filter.is_none() {
        let tasks: BTreeSet<String> = selected.iter().map(|o| o.task.clone()).collect();
        if tasks.len() > 1 {
            let task_of: Vec<String> = selected.iter().map(|o| o.task.clone()).collect();
            covariates.extend(task_dummies(&tasks, &task_of));
        }
    }
    // Drop adjusters that happen to be constant in this subset; the exposure
    // itself staying constant is a real inestimability and surfaces as an error.
    covariates.retain(|(name, col)| {
        name == exposure_name || col.iter().any(|&v| v != col[0])
    });

    let clusters: Vec<String> = selected.iter().map(|o| o.reader_id.clone()).collect();
    gee_fit(&y, &covariates, &clusters, link, &GeeOptions::default())
}

/// Case-by-category Fleiss count matrix for one task and condition. The
/// timeout category is appended when any read of the task timed out in
/// either condition, keeping both condition matrices on the same category
/// space.
pub fn fleiss_matrix(
    obs: &[ReaderObservation],
    task: &str,
    condition: Condition,
) -> Result<Vec<Vec<usize>>> {
    let task_obs: Vec<&ReaderObservation> = obs.iter().filter(|o| o.task == task).collect();
    if task_obs.is_empty() {
        return Err(Error::Empty(format!("no reads for task '{task}'")));
    }
    let n_classes = task_obs
        .iter()
        .filter_map(|o| match o.response {
            Response::Class(c) => Some(c + 1),
            Response::Timeout => None,
        })
        .max()
        .ok_or_else(|| Error::Degenerate("every read timed out".into()))?;
    let any_timeout = task_obs.iter().any(|o| o.timed_out);
    let n_categories = n_classes + usize::from(any_timeout);

    let cases: BTreeSet<String> =
        task_obs.iter().map(|o| o.case_id.clone()).collect();
    let mut matrix = Vec::with_capacity(cases.len());
    let mut raters_seen: Option<usize> = None;
    for case in &cases {
        let mut row = vec![0usize; n_categories];
        let mut raters = 0usize;
        for o in task_obs.iter().filter(|o| o.condition == condition && &o.case_id == case) {
            raters += 1;
            match o.response {
                Response::Class(c) => row[c] += 1,
                Response::Timeout => row[n_categories - 1] += 1,
            }
        }
        if raters == 0 {
            return Err(Error::Record {
                row: 0,
                message: format!("case '{case}' has no {condition} reads"),
            });
        }
        match raters_seen {
            None => raters_seen = Some(raters),
            Some(r) if r != raters => {
                return Err(Error::Record {
                    row: 0,
                    message: format!(
                        "case '{case}' was read by {raters} raters, others by {r}"
                    ),
                })
            }
            _ => {}
        }
        matrix.push(row);
    }
    Ok(matrix)
}

/// Per-condition Fleiss kappas for a task plus the bootstrap difference
/// (assisted minus unassisted), resampling cases jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionKappas {
    pub task: String,
    pub without_ai: KappaResult,
    pub with_ai: KappaResult,
    pub difference: KappaDifference,
}

pub fn kappa_with_delta(
    obs: &[ReaderObservation],
    task: &str,
    n_resamples: usize,
    seed: u64,
) -> Result<ConditionKappas> {
    let without = fleiss_matrix(obs, task, Condition::WithoutAi)?;
    let with = fleiss_matrix(obs, task, Condition::WithAi)?;
    let kw = fleiss_kappa(&without)?;
    let ka = fleiss_kappa(&with)?;
    let difference = bootstrap_kappa_difference(&with, &without, n_resamples, seed)?;
    Ok(ConditionKappas { task: task.to_string(), without_ai: kw, with_ai: ka, difference })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCell {
    pub count: usize,
    pub pct: f64,
}

/// A (truth, response) breakdown entry; `response = None` marks a timeout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySubtype {
    pub truth: usize,
    pub response: Option<usize>,
    pub count: usize,
    pub pct: f64,
}

/// Transition of reader verdicts between the unassisted and assisted read
/// of the same case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub task: String,
    pub n_pairs: usize,
    pub correct_to_correct: TrajectoryCell,
    pub error_to_correct: TrajectoryCell,
    pub correct_to_error: TrajectoryCell,
    pub error_to_error: TrajectoryCell,
    /// Unassisted errors fixed with AI, keyed by the unassisted response.
    pub corrected_subtypes: Vec<TrajectorySubtype>,
    /// New errors introduced with AI, keyed by the assisted response.
    pub introduced_subtypes: Vec<TrajectorySubtype>,
}

pub fn decision_trajectory(obs: &[ReaderObservation], task: &str) -> Result<TrajectoryReport> {
    let truth = infer_truth(obs)?;
    let mut by_pair: BTreeMap<(String, String), [Option<&ReaderObservation>; 2]> = BTreeMap::new();
    for o in obs.iter().filter(|o| o.task == task) {
        let slot = match o.condition {
            Condition::WithoutAi => 0,
            Condition::WithAi => 1,
        };
        let entry = by_pair.entry((o.reader_id.clone(), o.case_id.clone())).or_insert([None, None]);
        if entry[slot].is_some() {
            return Err(Error::Record {
                row: 0,
                message: format!(
                    "duplicate {} read of case '{}' by reader '{}'",
                    o.condition, o.case_id, o.reader_id
                ),
            });
        }
        entry[slot] = Some(o);
    }
    if by_pair.is_empty() {
        return Err(Error::Empty(format!("no reads for task '{task}'")));
    }

    let mut cells = [0usize; 4]; // cc, ec, ce, ee
    let mut corrected: BTreeMap<(usize, Option<usize>), usize> = BTreeMap::new();
    let mut introduced: BTreeMap<(usize, Option<usize>), usize> = BTreeMap::new();
    let mut n_pairs = 0usize;
    for ((reader, case), pair) in &by_pair {
        let [Some(without), Some(with)] = pair else {
            return Err(Error::Record {
                row: 0,
                message: format!(
                    "reader '{reader}' read case '{case}' under only one condition"
                ),
            });
        };
        n_pairs += 1;
        let t = truth[&(task.to_string(), case.clone())];
        match (without.correct, with.correct) {
            (true, true) => cells[0] += 1,
            (false, true) => {
                cells[1] += 1;
                let resp = match without.response {
                    Response::Class(c) => Some(c),
                    Response::Timeout => None,
                };
                *corrected.entry((t, resp)).or_insert(0) += 1;
            }
            (true, false) => {
                cells[2] += 1;
                let resp = match with.response {
                    Response::Class(c) => Some(c),
                    Response::Timeout => None,
                };
                *introduced.entry((t, resp)).or_insert(0) += 1;
            }
            (false, false) => cells[3] += 1,
        }
    }

    let cell = |count: usize| TrajectoryCell { count, pct: count as f64 / n_pairs as f64 };
    let subtype_rows = |m: BTreeMap<(usize, Option<usize>), usize>| {
        m.into_iter()
            .map(|((truth, response), count)| TrajectorySubtype {
                truth,
                response,
                count,
                pct: count as f64 / n_pairs as f64,
            })
            .collect()
    };
    Ok(TrajectoryReport {
        task: task.to_string(),
        n_pairs,
        correct_to_correct: cell(cells[0]),
        error_to_correct: cell(cells[1]),
        correct_to_error: cell(cells[2]),
        error_to_error: cell(cells[3]),
        corrected_subtypes: subtype_rows(corrected),
        introduced_subtypes: subtype_rows(introduced),
    })
}
