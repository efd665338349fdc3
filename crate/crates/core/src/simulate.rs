//! Clinical workflow simulations: AI-assisted second review of
//! doctor-negative cases, safety-constrained triage, prioritization of
//! genomic testing, and deferral-rescue analysis.
//!
//! All outcomes are count-level with derived rates; rates are kept at full
//! precision here and rounded only by the report layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{self, LockedThreshold, ThresholdPolicy};
use crate::resample;
pub use crate::resample::BootstrapConfig;

/// A case initially called negative by pathologists, with its model score
/// and the surgical reference truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondReviewCase {
    pub score: f64,
    pub truth_positive: bool,
}

/// Outcome of the second-review workflow at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondReviewOutcome {
    /// Doctor false negatives versus the surgical reference.
    pub total_fn: usize,
    /// False negatives flagged for review (score >= T).
    pub rescued_fn: usize,
    /// All flagged cases.
    pub review_cases: usize,
    /// Flagged cases that are negative by the reference too.
    pub false_alarm_reviews: usize,
    /// Initially-negative cases entering the workflow (burden denominator).
    pub doctor_negative_cases: usize,
    /// rescued_fn / total_fn; undefined when there were no misses.
    pub rescue_rate: Option<f64>,
    /// review_cases / doctor_negative_cases.
    pub review_burden: f64,
    /// review_cases / rescued_fn; undefined when nothing was rescued.
    pub number_needed_to_review: Option<f64>,
}

/// Simulate second review: flag `score >= t` among doctor-negative cases.
pub fn second_review(cases: &[SecondReviewCase], t: f64) -> Result<SecondReviewOutcome> {
    if cases.is_empty() {
        return Err(Error::Empty("no doctor-negative cases".into()));
    }
    let total_fn = cases.iter().filter(|c| c.truth_positive).count();
    let flagged: Vec<&SecondReviewCase> = cases.iter().filter(|c| c.score >= t).collect();
    let rescued_fn = flagged.iter().filter(|c| c.truth_positive).count();
    let review_cases = flagged.len();
    let false_alarm_reviews = review_cases - rescued_fn;
    Ok(SecondReviewOutcome {
        total_fn,
        rescued_fn,
        review_cases,
        false_alarm_reviews,
        doctor_negative_cases: cases.len(),
        rescue_rate: if total_fn == 0 { None } else { Some(rescued_fn as f64 / total_fn as f64) },
        review_burden: review_cases as f64 / cases.len() as f64,
        number_needed_to_review: if rescued_fn == 0 {
            None
        } else {
            Some(review_cases as f64 / rescued_fn as f64)
        },
    })
}

/// Per-threshold second-review table plus the policy-selected operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondReviewSweep {
    pub rows: Vec<(f64, SecondReviewOutcome)>,
    pub selection: SecondReviewSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SecondReviewSelection {
    Selected { value: f64, candidate: f64, row: SecondReviewOutcome },
    Infeasible { constraint: String },
}

/// Sweep candidate thresholds (unique scores plus sentinels) and select the
/// operating point under a rescue/burden policy: among feasible rows
/// (rescue rate >= min, burden <= max) maximize the rescue rate, breaking
/// ties toward minimal burden, then minimal NNR, then the largest threshold.
pub fn second_review_sweep(
    cases: &[SecondReviewCase],
    policy: &ThresholdPolicy,
) -> Result<SecondReviewSweep> {
    let ThresholdPolicy::RescueBurden { min_rescue_rate, max_review_burden } = policy else {
        return Err(Error::InvalidArgument(
            "second-review sweep selects under a rescue_burden policy".into(),
        ));
    };
    policy.validate()?;
    if cases.is_empty() {
        return Err(Error::Empty("no doctor-negative cases".into()));
    }

    let scores: Vec<f64> = cases.iter().map(|c| c.score).collect();
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(crate::metrics::threshold_candidates(&scores));

    let rows: Vec<(f64, SecondReviewOutcome)> = thresholds
        .iter()
        .map(|&t| Ok((t, second_review(cases, t)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(usize, SecondReviewOutcome)> = None;
    for (i, (_, out)) in rows.iter().enumerate() {
        let Some(rescue) = out.rescue_rate else { continue };
        if rescue < *min_rescue_rate || out.review_burden > *max_review_burden {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => match rescue.partial_cmp(&b.rescue_rate.unwrap()).unwrap() {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => {
                    if out.review_burden != b.review_burden {
                        out.review_burden < b.review_burden
                    } else {
                        let nnr = out.number_needed_to_review.unwrap_or(f64::INFINITY);
                        let bnnr = b.number_needed_to_review.unwrap_or(f64::INFINITY);
                        // Equal on every objective: later row = larger T wins.
                        nnr <= bnnr
                    }
                }
            },
        };
        if better {
            best = Some((i, *out));
        }
    }

    let selection = match best {
        Some((i, row)) => SecondReviewSelection::Selected {
            value: policy::reported_value(&thresholds, i),
            candidate: thresholds[i],
            row,
        },
        None => SecondReviewSelection::Infeasible {
            constraint: format!(
                "rescue_rate >= {min_rescue_rate} with review_burden <= {max_review_burden}"
            ),
        },
    };
    Ok(SecondReviewSweep { rows, selection })
}

/// Outcome of applying rule-out/rule-in bands to a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageOutcome {
    pub total_cases: usize,
    pub ruleout_cases: usize,
    pub rulein_cases: usize,
    pub ruleout_coverage: f64,
    pub rulein_coverage: f64,
    /// True negatives among ruled-out / ruled-out; undefined when the band is empty.
    pub npv_at_ruleout: Option<f64>,
    pub ppv_at_rulein: Option<f64>,
    pub npv_ci: Option<(f64, f64)>,
    pub ppv_ci: Option<(f64, f64)>,
}

/// Three-way triage of scored cases: `score < t_low` ruled out,
/// `score >= t_high` ruled in. Either band may be absent. Band predictive
/// values get percentile bootstrap CIs when `boot` is supplied.
pub fn triage(
    scores: &[f64],
    labels: &[bool],
    t_low: Option<f64>,
    t_high: Option<f64>,
    boot: Option<&BootstrapConfig>,
) -> Result<TriageOutcome> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Empty("no cases".into()));
    }
    if let (Some(lo), Some(hi)) = (t_low, t_high) {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "t_low {lo} exceeds t_high {hi}; bands would overlap"
            )));
        }
    }
    let total = scores.len();
    let band_rates = |idx: &[usize]| -> (usize, usize, Option<f64>, Option<f64>) {
        let mut out = 0usize;
        let mut out_neg = 0usize;
        let mut inn = 0usize;
        let mut inn_pos = 0usize;
        for &i in idx {
            if let Some(lo) = t_low {
                if scores[i] < lo {
                    out += 1;
                    if !labels[i] {
                        out_neg += 1;
                    }
                    continue;
                }
            }
            if let Some(hi) = t_high {
                if scores[i] >= hi {
                    inn += 1;
                    if labels[i] {
                        inn_pos += 1;
                    }
                }
            }
        }
        let npv = (out > 0).then(|| out_neg as f64 / out as f64);
        let ppv = (inn > 0).then(|| inn_pos as f64 / inn as f64);
        (out, inn, npv, ppv)
    };

    let identity: Vec<usize> = (0..total).collect();
    let (ruleout_cases, rulein_cases, npv, ppv) = band_rates(&identity);

    let mut npv_ci = None;
    let mut ppv_ci = None;
    if let Some(cfg) = boot {
        if npv.is_some() {
            let stats = resample::replicate_statistics(total, cfg.n_resamples, cfg.seed, |idx| {
                band_rates(idx).2
            });
            let defined: Vec<f64> = stats.into_iter().flatten().collect();
            if !defined.is_empty() {
                let mut v = defined;
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let alpha = 1.0 - cfg.level;
                npv_ci = Some((
                    resample::quantile_sorted(&v, alpha / 2.0),
                    resample::quantile_sorted(&v, 1.0 - alpha / 2.0),
                ));
            }
        }
        if ppv.is_some() {
            let stats = resample::replicate_statistics(total, cfg.n_resamples, cfg.seed, |idx| {
                band_rates(idx).3
            });
            let defined: Vec<f64> = stats.into_iter().flatten().collect();
            if !defined.is_empty() {
                let mut v = defined;
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let alpha = 1.0 - cfg.level;
                ppv_ci = Some((
                    resample::quantile_sorted(&v, alpha / 2.0),
                    resample::quantile_sorted(&v, 1.0 - alpha / 2.0),
                ));
            }
        }
    }

    Ok(TriageOutcome {
        total_cases: total,
        ruleout_cases,
        rulein_cases,
        ruleout_coverage: ruleout_cases as f64 / total as f64,
        rulein_coverage: rulein_cases as f64 / total as f64,
        npv_at_ruleout: npv,
        ppv_at_rulein: ppv,
        npv_ci,
        ppv_ci,
    })
}

/// One strategy's prioritization result at one intended testing rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrioritizationOutcome {
    pub strategy: String,
    pub intended_rate: f64,
    pub actual_rate: f64,
    /// Boundary score of the selection; `None` when nothing was selected.
    pub threshold: Option<f64>,
    pub selected: usize,
    pub mutated_selected: usize,
    /// Mutated selected / all mutated; `None` when the cohort has no mutations.
    pub sensitivity: Option<f64>,
    /// Mutated selected / selected; `None` when the selection is empty.
    pub ppv: Option<f64>,
    /// ppv / cohort prevalence.
    pub enrichment: Option<f64>,
    /// selected / mutated selected = 1 / ppv.
    pub tests_per_mutation: Option<f64>,
}

fn prioritization_metrics(
    strategy: &str,
    intended_rate: f64,
    threshold: Option<f64>,
    selected_mask: &[bool],
    truth: &[bool],
) -> PrioritizationOutcome {
    let n = truth.len();
    let selected = selected_mask.iter().filter(|&&s| s).count();
    let mutated = truth.iter().filter(|&&m| m).count();
    let mutated_selected =
        selected_mask.iter().zip(truth).filter(|(&s, &m)| s && m).count();
    let ppv = (selected > 0).then(|| mutated_selected as f64 / selected as f64);
    let prevalence = (mutated > 0).then(|| mutated as f64 / n as f64);
    PrioritizationOutcome {
        strategy: strategy.to_string(),
        intended_rate,
        actual_rate: selected as f64 / n as f64,
        threshold,
        selected,
        mutated_selected,
        sensitivity: prevalence.map(|_| mutated_selected as f64 / mutated as f64),
        ppv,
        enrichment: match (ppv, prevalence) {
            (Some(p), Some(base)) => Some(p / base),
            _ => None,
        },
        tests_per_mutation: (mutated_selected > 0)
            .then(|| selected as f64 / mutated_selected as f64),
    }
}

/// Internal prioritization: rank each strategy's scores (ties broken by
/// case id), select the top `ceil(rate * n)` with boundary score ties all
/// included, and report yield metrics at every requested rate.
pub fn prioritize_internal(
    case_ids: &[String],
    truth: &[bool],
    strategies: &[(String, Vec<f64>)],
    rates: &[f64],
) -> Result<Vec<PrioritizationOutcome>> {
    if rates.is_empty() {
        return Err(Error::Empty("no testing rates requested".into()));
    }
    let n = truth.len();
    if n == 0 {
        return Err(Error::Empty("no cases".into()));
    }
    if case_ids.len() != n {
        return Err(Error::LengthMismatch("case_ids vs truth".into()));
    }
    for r in rates {
        if !(0.0..=1.0).contains(r) {
            return Err(Error::InvalidArgument(format!("rate {r} outside [0,1]")));
        }
    }
    let mut out = Vec::new();
    for (name, scores) in strategies {
        if scores.len() != n {
            return Err(Error::LengthMismatch(format!("strategy '{name}' score length")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap()
                .then_with(|| case_ids[a].cmp(&case_ids[b]))
        });
        for &rate in rates {
            let k = (rate * n as f64).ceil() as usize;
            let (threshold, mask) = if k == 0 {
                (None, vec![false; n])
            } else {
                let boundary = scores[order[k - 1]];
                (Some(boundary), scores.iter().map(|&s| s >= boundary).collect())
            };
            out.push(prioritization_metrics(name, rate, threshold, &mask, truth));
        }
    }
    Ok(out)
}

/// Threshold at the internal rate-quantile boundary: the score of the
/// `ceil(rate * n)`-th highest-ranked internal case.
pub fn prioritize_transfer_threshold(internal_scores: &[f64], intended_rate: f64) -> Result<f64> {
    if internal_scores.is_empty() {
        return Err(Error::Empty("no internal scores".into()));
    }
    if !(0.0 < intended_rate && intended_rate < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "intended_rate {intended_rate} outside (0,1)"
        )));
    }
    let mut sorted = internal_scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("all internal scores are equal".into()));
    }
    let k = (intended_rate * sorted.len() as f64).ceil() as usize;
    Ok(sorted[k.max(1) - 1])
}

/// Apply a transferred threshold to an external cohort: selection is
/// `score >= threshold`; the realized rate may deviate from the intended one.
pub fn prioritize_external(
    strategy: &str,
    external_scores: &[f64],
    external_truth: &[bool],
    threshold: f64,
    intended_rate: f64,
) -> Result<PrioritizationOutcome> {
    if external_scores.len() != external_truth.len() {
        return Err(Error::LengthMismatch("external scores vs truth".into()));
    }
    if external_scores.is_empty() {
        return Err(Error::Empty("no external cases".into()));
    }
    let mask: Vec<bool> = external_scores.iter().map(|&s| s >= threshold).collect();
    Ok(prioritization_metrics(strategy, intended_rate, Some(threshold), &mask, external_truth))
}

/// A case from a cohort with deferral annotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeferralCase {
    pub score: f64,
    pub truth_positive: bool,
    pub deferred: bool,
}

/// Partition of an annotated case set under a locked rule-out threshold.
/// The four categories are exhaustive and disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeferralOutcome {
    pub non_deferred: usize,
    /// Deferred, ruled out, and negative by the final reference.
    pub safe_rescues: usize,
    /// Deferred, ruled out, but positive: unsafe rule-out errors.
    pub unsafe_rescues: usize,
    /// Deferred and not ruled out: still in the routine pathway.
    pub still_deferred: usize,
}

pub fn deferral_analysis(
    cases: &[DeferralCase],
    locked_ruleout: &LockedThreshold,
) -> Result<DeferralOutcome> {
    if cases.is_empty() {
        return Err(Error::Empty("no annotated cases".into()));
    }
    let t = locked_ruleout.value;
    let mut out = DeferralOutcome {
        non_deferred: 0,
        safe_rescues: 0,
        unsafe_rescues: 0,
        still_deferred: 0,
    };
    for c in cases {
        if !c.deferred {
            out.non_deferred += 1;
        } else if c.score < t {
            if c.truth_positive {
                out.unsafe_rescues += 1;
            } else {
                out.safe_rescues += 1;
            }
        } else {
            out.still_deferred += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cases(pos_scores: &[f64], neg_scores: &[f64]) -> Vec<SecondReviewCase> {
        let mut v: Vec<SecondReviewCase> = pos_scores
            .iter()
            .map(|&s| SecondReviewCase { score: s, truth_positive: true })
            .collect();
        v.extend(neg_scores.iter().map(|&s| SecondReviewCase { score: s, truth_positive: false }));
        v
    }

    #[test]
    fn second_review_counts_and_rates() {
        // 3 missed positives, 2 rescued at T = 0.5; 1 false alarm.
        let cs = cases(&[0.9, 0.6, 0.2], &[0.7, 0.3, 0.1, 0.05]);
        let out = second_review(&cs, 0.5).unwrap();
        assert_eq!(out.total_fn, 3);
        assert_eq!(out.rescued_fn, 2);
        assert_eq!(out.review_cases, 3);
        assert_eq!(out.false_alarm_reviews, 1);
        assert_eq!(out.review_cases, out.rescued_fn + out.false_alarm_reviews);
        assert_abs_diff_eq!(out.rescue_rate.unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.review_burden, 3.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.number_needed_to_review.unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn second_review_above_all_scores() {
        let cs = cases(&[0.9], &[0.7]);
        let out = second_review(&cs, 0.95).unwrap();
        assert_eq!(out.review_cases, 0);
        assert_eq!(out.number_needed_to_review, None);
    }

    #[test]
    fn second_review_at_negative_infinity_reviews_everything() {
        let cs = cases(&[0.9, 0.1], &[0.7, 0.0]);
        let out = second_review(&cs, f64::NEG_INFINITY).unwrap();
        assert_eq!(out.review_cases, 4);
        assert_eq!(out.rescue_rate, Some(1.0));
        assert_eq!(out.review_burden, 1.0);
    }

    #[test]
    fn nnr_identity_holds() {
        let cs = cases(&[0.9, 0.8, 0.3, 0.2, 0.15], &[0.85, 0.4, 0.35, 0.1, 0.02, 0.01]);
        for t in [0.05, 0.25, 0.5, 0.82] {
            let out = second_review(&cs, t).unwrap();
            if let (Some(nnr), Some(rr)) = (out.number_needed_to_review, out.rescue_rate) {
                assert_abs_diff_eq!(
                    nnr * rr * out.total_fn as f64,
                    out.review_cases as f64,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn sweep_selection_matches_brute_force() {
        let cs = cases(
            &[0.95, 0.9, 0.8, 0.7, 0.55, 0.35, 0.2, 0.1],
            &[0.85, 0.6, 0.5, 0.45, 0.3, 0.25, 0.15, 0.08, 0.05, 0.02, 0.01, 0.005],
        );
        let policy = ThresholdPolicy::RescueBurden { min_rescue_rate: 0.4, max_review_burden: 0.4 };
        let sweep = second_review_sweep(&cs, &policy).unwrap();

        // Brute force over the same candidate grid.
        let mut best: Option<(f64, SecondReviewOutcome)> = None;
        for (t, out) in &sweep.rows {
            let Some(rr) = out.rescue_rate else { continue };
            if rr < 0.4 || out.review_burden > 0.4 {
                continue;
            }
            let replace = match &best {
                None => true,
                Some((bt, b)) => {
                    let brr = b.rescue_rate.unwrap();
                    if rr != brr {
                        rr > brr
                    } else if out.review_burden != b.review_burden {
                        out.review_burden < b.review_burden
                    } else if out.number_needed_to_review != b.number_needed_to_review {
                        out.number_needed_to_review.unwrap_or(f64::INFINITY)
                            < b.number_needed_to_review.unwrap_or(f64::INFINITY)
                    } else {
                        *t > *bt
                    }
                }
            };
            if replace {
                best = Some((*t, *out));
            }
        }
        let (bt, brow) = best.expect("feasible point exists");
        match sweep.selection {
            SecondReviewSelection::Selected { candidate, row, .. } => {
                assert_eq!(candidate, bt);
                assert_eq!(row, brow);
            }
            _ => panic!("expected feasible selection"),
        }
    }

    #[test]
    fn sweep_selection_reproduces_er_operating_row() {
        // Case set realizing the published ER per-threshold counts
        // (50 missed positives among 207 doctor-negative cases), including
        // the selected operating row at threshold 0.479 with 22 rescued and
        // 74 reviews.
        let pos_bands: [(f64, usize); 11] = [
            (0.05, 3),
            (0.1, 9),
            (0.2, 8),
            (0.3, 5),
            (0.4, 3),
            (0.479, 2),
            (0.5, 9),
            (0.6, 1),
            (0.7, 0),
            (0.8, 1),
            (0.9, 9),
        ];
        let neg_bands: [(f64, usize); 11] = [
            (0.05, 15),
            (0.1, 33),
            (0.2, 30),
            (0.3, 14),
            (0.4, 13),
            (0.479, 1),
            (0.5, 12),
            (0.6, 13),
            (0.7, 4),
            (0.8, 11),
            (0.9, 11),
        ];
        let mut cs = Vec::new();
        for (score, count) in pos_bands {
            cs.extend(std::iter::repeat_n(
                SecondReviewCase { score, truth_positive: true },
                count,
            ));
        }
        for (score, count) in neg_bands {
            cs.extend(std::iter::repeat_n(
                SecondReviewCase { score, truth_positive: false },
                count,
            ));
        }
        assert_eq!(cs.len(), 207);

        let policy = ThresholdPolicy::RescueBurden { min_rescue_rate: 0.4, max_review_burden: 0.4 };
        let sweep = second_review_sweep(&cs, &policy).unwrap();
        let SecondReviewSelection::Selected { candidate, row, .. } = sweep.selection else {
            panic!("expected feasible selection");
        };
        assert_eq!(candidate, 0.479);
        assert_eq!(row.rescued_fn, 22);
        assert_eq!(row.review_cases, 74);
        assert_abs_diff_eq!(row.rescue_rate.unwrap(), 0.440, epsilon = 0.001);
        assert_abs_diff_eq!(row.review_burden, 0.357, epsilon = 0.001);
        assert_abs_diff_eq!(row.number_needed_to_review.unwrap(), 74.0 / 22.0, epsilon = 1e-12);
    }

    #[test]
    fn sweep_with_zero_min_rescue_is_most_permissive_feasible() {
        let cs = cases(&[0.9, 0.7], &[0.5, 0.3, 0.1, 0.05]);
        let policy = ThresholdPolicy::RescueBurden { min_rescue_rate: 0.0, max_review_burden: 1.0 };
        let sweep = second_review_sweep(&cs, &policy).unwrap();
        match sweep.selection {
            SecondReviewSelection::Selected { row, .. } => {
                // Maximal rescue rate is 1.0; among those the minimal burden
                // reviews both positives and nothing else.
                assert_eq!(row.rescue_rate, Some(1.0));
                assert_eq!(row.review_cases, 2);
            }
            _ => panic!("expected feasible selection"),
        }
    }

    #[test]
    fn sweep_infeasible_constraints() {
        let cs = cases(&[0.1], &[0.9, 0.8, 0.7]);
        // Rescuing the positive forces reviewing everything: burden 1.0.
        let policy = ThresholdPolicy::RescueBurden { min_rescue_rate: 1.0, max_review_burden: 0.2 };
        let sweep = second_review_sweep(&cs, &policy).unwrap();
        assert!(matches!(sweep.selection, SecondReviewSelection::Infeasible { .. }));
    }

    #[test]
    fn triage_three_way_counts() {
        let scores = [0.005, 0.2, 0.5, 0.999, 0.01];
        let labels = [false, false, true, true, false];
        let out = triage(&scores, &labels, Some(0.011), Some(0.999), None).unwrap();
        assert_eq!(out.ruleout_cases, 2);
        assert_eq!(out.rulein_cases, 1);
        assert_eq!(out.total_cases, 5);
        assert_eq!(out.npv_at_ruleout, Some(1.0));
        assert_eq!(out.ppv_at_rulein, Some(1.0));
    }

    #[test]
    fn triage_empty_ruleout_band_is_undefined() {
        let scores = [0.4, 0.6];
        let labels = [false, true];
        let out = triage(&scores, &labels, Some(f64::NEG_INFINITY), None, None).unwrap();
        assert_eq!(out.ruleout_cases, 0);
        assert_eq!(out.npv_at_ruleout, None);
    }

    #[test]
    fn triage_attaches_bootstrap_cis() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let labels: Vec<bool> = (0..100).map(|i| i >= 55).collect();
        let cfg = BootstrapConfig { n_resamples: 500, seed: 9, level: 0.95 };
        let out = triage(&scores, &labels, Some(0.3), Some(0.8), Some(&cfg)).unwrap();
        let (lo, hi) = out.npv_ci.unwrap();
        assert!(lo <= out.npv_at_ruleout.unwrap());
        assert!(hi >= out.npv_at_ruleout.unwrap() - 1e-12);
        assert!(out.ppv_ci.is_some());
    }

    #[test]
    fn prioritize_full_rate_recovers_prevalence() {
        let n = 235;
        let mutated = 85;
        let case_ids: Vec<String> = (0..n).map(|i| format!("c{i:03}")).collect();
        let truth: Vec<bool> = (0..n).map(|i| i < mutated).collect();
        let scores: Vec<f64> = (0..n).map(|i| (i as f64 * 0.377).sin().abs()).collect();
        let out = prioritize_internal(
            &case_ids,
            &truth,
            &[("model".into(), scores)],
            &[1.0],
        )
        .unwrap();
        let o = &out[0];
        assert_eq!(o.selected, n);
        assert_eq!(o.sensitivity, Some(1.0));
        let prevalence = mutated as f64 / n as f64;
        assert_abs_diff_eq!(o.ppv.unwrap(), prevalence, epsilon = 1e-12);
        assert_abs_diff_eq!(o.enrichment.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.tests_per_mutation.unwrap(), 1.0 / prevalence, epsilon = 1e-12);
    }

    #[test]
    fn prioritize_zero_rate_is_empty() {
        let case_ids = vec!["a".into(), "b".into()];
        let truth = [true, false];
        let out =
            prioritize_internal(&case_ids, &truth, &[("m".into(), vec![0.9, 0.1])], &[0.0])
                .unwrap();
        assert_eq!(out[0].selected, 0);
        assert_eq!(out[0].sensitivity, Some(0.0));
        assert_eq!(out[0].ppv, None);
        assert_eq!(out[0].threshold, None);
    }

    #[test]
    fn prioritize_matches_top_k_oracle() {
        let case_ids: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let truth = [true, false, true, false, true, false, false, true, false, false];
        let scores = vec![0.9, 0.8, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        for rate in [0.1, 0.2, 0.3, 0.5, 0.7, 1.0] {
            let out = prioritize_internal(
                &case_ids,
                &truth,
                &[("m".into(), scores.clone())],
                &[rate],
            )
            .unwrap();
            let o = &out[0];
            // Oracle: k-th highest score, everything at or above selected.
            let k = (rate * 10.0).ceil() as usize;
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let boundary = sorted[k - 1];
            let selected: Vec<usize> =
                (0..10).filter(|&i| scores[i] >= boundary).collect();
            assert_eq!(o.selected, selected.len());
            let mut_sel = selected.iter().filter(|&&i| truth[i]).count();
            assert_eq!(o.mutated_selected, mut_sel);
            // Identities.
            if let (Some(ppv), Some(enr)) = (o.ppv, o.enrichment) {
                let prevalence = 4.0 / 10.0;
                assert_abs_diff_eq!(enr, ppv / prevalence, epsilon = 1e-12);
            }
            if let (Some(ppv), Some(tpm)) = (o.ppv, o.tests_per_mutation) {
                assert_abs_diff_eq!(tpm, 1.0 / ppv, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn prioritize_sensitivity_monotone_in_rate() {
        let case_ids: Vec<String> = (0..50).map(|i| format!("c{i:02}")).collect();
        let truth: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let scores: Vec<f64> = (0..50).map(|i| ((i * 37 % 50) as f64) / 50.0).collect();
        let rates: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let out =
            prioritize_internal(&case_ids, &truth, &[("m".into(), scores)], &rates).unwrap();
        for w in out.windows(2) {
            assert!(w[1].sensitivity.unwrap() >= w[0].sensitivity.unwrap());
            assert!(w[1].selected >= w[0].selected);
        }
    }

    #[test]
    fn transfer_threshold_and_external_application() {
        let internal: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let t = prioritize_transfer_threshold(&internal, 0.2).unwrap();
        // Top 20 of 100: boundary is the 20th highest = 0.81.
        assert_abs_diff_eq!(t, 0.81, epsilon = 1e-12);
        let external = [0.9, 0.85, 0.81, 0.5, 0.2];
        let truth = [true, true, false, true, false];
        let out = prioritize_external("model", &external, &truth, t, 0.2).unwrap();
        assert_eq!(out.selected, 3);
        assert_abs_diff_eq!(out.actual_rate, 0.6, epsilon = 1e-12);
        // Threshold above every external score selects nothing.
        let none = prioritize_external("model", &external, &truth, 0.99, 0.2).unwrap();
        assert_eq!(none.selected, 0);
        assert_eq!(none.ppv, None);
    }

    #[test]
    fn transfer_rejects_degenerate_scores() {
        assert!(prioritize_transfer_threshold(&[0.5, 0.5, 0.5], 0.2).is_err());
    }

    fn locked_at(value: f64) -> LockedThreshold {
        LockedThreshold {
            task: "t".into(),
            value,
            policy: ThresholdPolicy::RuleOutNpv { min_npv: 1.0 },
            source_cohort: "internal".into(),
            locked_at: "2024-02-12T00:00:00Z".into(),
        }
    }

    #[test]
    fn deferral_partition() {
        let cases = [
            DeferralCase { score: 0.9, truth_positive: true, deferred: false },
            DeferralCase { score: 0.05, truth_positive: false, deferred: true },
            DeferralCase { score: 0.02, truth_positive: true, deferred: true },
            DeferralCase { score: 0.8, truth_positive: true, deferred: true },
        ];
        let out = deferral_analysis(&cases, &locked_at(0.1)).unwrap();
        assert_eq!(out, DeferralOutcome {
            non_deferred: 1,
            safe_rescues: 1,
            unsafe_rescues: 1,
            still_deferred: 1,
        });
        let total = out.non_deferred + out.safe_rescues + out.unsafe_rescues + out.still_deferred;
        assert_eq!(total, cases.len());
    }

    #[test]
    fn deferral_edge_cases() {
        // Nothing below the threshold.
        let cases = [
            DeferralCase { score: 0.5, truth_positive: false, deferred: true },
            DeferralCase { score: 0.6, truth_positive: true, deferred: true },
        ];
        let out = deferral_analysis(&cases, &locked_at(0.1)).unwrap();
        assert_eq!(out.safe_rescues, 0);
        assert_eq!(out.unsafe_rescues, 0);
        // Ideal separation: negatives below, positives above.
        let cases = [
            DeferralCase { score: 0.01, truth_positive: false, deferred: true },
            DeferralCase { score: 0.02, truth_positive: false, deferred: true },
            DeferralCase { score: 0.9, truth_positive: true, deferred: true },
        ];
        let out = deferral_analysis(&cases, &locked_at(0.1)).unwrap();
        assert_eq!(out.safe_rescues, 2);
        assert_eq!(out.unsafe_rescues, 0);
    }
}
