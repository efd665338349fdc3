//! Constraint-based threshold selection over ROC sweeps, and the locked
//! threshold registry model.
//!
//! Band semantics are fixed: the rule-out band is `score < T` and the
//! rule-in band is `score >= T`, so for `T_low <= T_high` the bands plus
//! the gray zone are exhaustive and non-overlapping. A case exactly at
//! `T_low` is not ruled out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{confusion_at_threshold, ConfusionCounts};

/// How a threshold is chosen under a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pick {
    Largest,
    Smallest,
}

/// The four selection policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Largest threshold whose rule-out band keeps NPV >= `min_npv`
    /// (maximizes rule-out coverage).
    RuleOutNpv { min_npv: f64 },
    /// Threshold whose rule-in band keeps PPV >= `min_ppv`; `pick` selects
    /// the largest (most restrictive) or smallest (maximal coverage)
    /// feasible threshold.
    RuleInPpv { min_ppv: f64, pick: Pick },
    /// Second-review operating point: rescue rate >= `min_rescue_rate`
    /// with review burden <= `max_review_burden`. Selected on the
    /// second-review sweep, not on a plain ROC sweep.
    RescueBurden { min_rescue_rate: f64, max_review_burden: f64 },
    /// Largest threshold keeping flagging sensitivity >= `min_sensitivity`.
    SensitivityFloor { min_sensitivity: f64 },
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64, name: &str| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} = {v} outside [0,1]")))
            }
        };
        match self {
            ThresholdPolicy::RuleOutNpv { min_npv } => in_unit(*min_npv, "min_npv"),
            ThresholdPolicy::RuleInPpv { min_ppv, .. } => in_unit(*min_ppv, "min_ppv"),
            ThresholdPolicy::RescueBurden { min_rescue_rate, max_review_burden } => {
                in_unit(*min_rescue_rate, "min_rescue_rate")?;
                in_unit(*max_review_burden, "max_review_burden")
            }
            ThresholdPolicy::SensitivityFloor { min_sensitivity } => {
                in_unit(*min_sensitivity, "min_sensitivity")
            }
        }
    }

    /// Registry slot this policy locks: rule-out thresholds act as T_low,
    /// rule-in as T_high, review policies as the second-review threshold.
    pub fn slot(&self) -> BandSlot {
        match self {
            ThresholdPolicy::RuleOutNpv { .. } => BandSlot::RuleOut,
            ThresholdPolicy::RuleInPpv { .. } => BandSlot::RuleIn,
            ThresholdPolicy::RescueBurden { .. } | ThresholdPolicy::SensitivityFloor { .. } => {
                BandSlot::Review
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSlot {
    RuleOut,
    RuleIn,
    Review,
}

impl std::fmt::Display for BandSlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandSlot::RuleOut => write!(f, "rule_out"),
            BandSlot::RuleIn => write!(f, "rule_in"),
            BandSlot::Review => write!(f, "review"),
        }
    }
}

/// A frozen threshold with provenance. Applying it never re-optimizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockedThreshold {
    pub task: String,
    pub value: f64,
    pub policy: ThresholdPolicy,
    pub source_cohort: String,
    pub locked_at: String,
}

/// Which side of a sweep row's partition the derived set statistics describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepSemantics {
    /// Set = cases with score < T; reports the set's NPV and coverage.
    RuleOut,
    /// Set = cases with score >= T; reports the set's PPV and coverage.
    RuleIn,
}

/// One candidate threshold's partition and derived rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    /// Size of the semantic set (ruled-out or ruled-in cases).
    pub set_size: usize,
    /// NPV of the rule-out set, or PPV of the rule-in set; `None` when empty.
    pub set_rate: Option<f64>,
    /// set_size / total cases.
    pub coverage: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// One row per candidate threshold: the unique scores ascending, bracketed
/// by -inf and +inf sentinels.
pub fn sweep(scores: &[f64], labels: &[bool], semantics: SweepSemantics) -> Result<Vec<SweepRow>> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    if scores.is_empty() || labels.len() != scores.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass("sweep needs both classes present".into()));
    }
    let mut candidates = vec![f64::NEG_INFINITY];
    candidates.extend(crate::metrics::threshold_candidates(scores));
    let total = scores.len();
    let rows = candidates
        .into_iter()
        .map(|t| {
            let counts = confusion_at_threshold(scores, labels, t)?;
            let (set_size, set_rate) = match semantics {
                SweepSemantics::RuleOut => {
                    (counts.true_neg + counts.false_neg, counts.npv())
                }
                SweepSemantics::RuleIn => (counts.true_pos + counts.false_pos, counts.ppv()),
            };
            Ok(SweepRow {
                threshold: t,
                counts,
                set_size,
                set_rate,
                coverage: set_size as f64 / total as f64,
                sensitivity: counts.sensitivity(),
                specificity: counts.specificity(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows)
}

/// Result of a constrained selection. Infeasibility is a value, not an
/// error, so pipeline reports can record it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Selection {
    Selected {
        /// Reported threshold: the midpoint of the score gap realizing the
        /// selected partition (stable against future score jitter).
        value: f64,
        /// The raw candidate threshold the partition was evaluated at.
        candidate: f64,
        row: SweepRow,
    },
    Infeasible {
        constraint: String,
    },
}

/// Reported value for the candidate at position `i` among the sweep
/// thresholds: the midpoint of the gap below it. Sentinel candidates map
/// to values just outside the observed score range so the partition is
/// preserved for any probability-scaled score.
pub(crate) fn reported_value(thresholds: &[f64], i: usize) -> f64 {
    let t = thresholds[i];
    if t == f64::NEG_INFINITY {
        let min_finite = thresholds.iter().copied().find(|v| v.is_finite());
        return min_finite.map(|m| m - 1.0).unwrap_or(f64::NEG_INFINITY);
    }
    if t == f64::INFINITY {
        let max_finite = thresholds.iter().rev().copied().find(|v| v.is_finite());
        return max_finite.map(|m| m + 1.0).unwrap_or(f64::INFINITY);
    }
    debug_assert!(i > 0);
    let below = thresholds[i - 1];
    if below == f64::NEG_INFINITY {
        t
    } else {
        (below + t) / 2.0
    }
}

/// Select a threshold from a sweep under `policy`.
///
/// The sweep must have been built with the matching semantics: rule-out for
/// `RuleOutNpv`, rule-in for `RuleInPpv`, either for `SensitivityFloor`
/// (which constrains the classifier's sensitivity, not a band rate).
/// `RescueBurden` is selected on the second-review sweep instead.
pub fn select_threshold(rows: &[SweepRow], policy: &ThresholdPolicy) -> Result<Selection> {
    policy.validate()?;
    if rows.is_empty() {
        return Err(Error::Empty("empty sweep".into()));
    }
    let thresholds: Vec<f64> = rows.iter().map(|r| r.threshold).collect();

    let (feasible, constraint): (Vec<usize>, String) = match policy {
        ThresholdPolicy::RuleOutNpv { min_npv } => (
            rows.iter()
                .enumerate()
                .filter(|(_, r)| r.set_rate.is_some_and(|v| v >= *min_npv))
                .map(|(i, _)| i)
                .collect(),
            format!("rule-out NPV >= {min_npv}"),
        ),
        ThresholdPolicy::RuleInPpv { min_ppv, .. } => (
            rows.iter()
                .enumerate()
                .filter(|(_, r)| r.set_rate.is_some_and(|v| v >= *min_ppv))
                .map(|(i, _)| i)
                .collect(),
            format!("rule-in PPV >= {min_ppv}"),
        ),
        ThresholdPolicy::SensitivityFloor { min_sensitivity } => (
            rows.iter()
                .enumerate()
                .filter(|(_, r)| r.sensitivity.is_some_and(|v| v >= *min_sensitivity))
                .map(|(i, _)| i)
                .collect(),
            format!("sensitivity >= {min_sensitivity}"),
        ),
        ThresholdPolicy::RescueBurden { .. } => {
            return Err(Error::UnsupportedPolicy("rescue_burden".into()))
        }
    };

    let pick = match policy {
        ThresholdPolicy::RuleInPpv { pick, .. } => *pick,
        // Rule-out and sensitivity-floor selections maximize coverage of
        // their band, which means the largest feasible threshold.
        _ => Pick::Largest,
    };

    // Rows are in ascending threshold order.
    let chosen = match pick {
        Pick::Largest => feasible.last().copied(),
        Pick::Smallest => feasible.first().copied(),
    };
    Ok(match chosen {
        Some(i) => Selection::Selected {
            value: reported_value(&thresholds, i),
            candidate: thresholds[i],
            row: rows[i],
        },
        None => Selection::Infeasible { constraint },
    })
}

/// Per-case triage assignment under locked thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageClass {
    RuledOut,
    GrayZone,
    RuledIn,
}

/// Apply locked thresholds to new scores: `score < T_low` is ruled out,
/// `score >= T_high` is ruled in, anything else is gray zone. Only the
/// stored values are used; nothing is re-optimized. Errors when a locked
/// threshold belongs to a different task.
pub fn apply_locked(
    low: Option<&LockedThreshold>,
    high: Option<&LockedThreshold>,
    task: &str,
    scores: &[f64],
) -> Result<Vec<TriageClass>> {
    for locked in [low, high].into_iter().flatten() {
        if locked.task != task {
            return Err(Error::TaskMismatch {
                locked: locked.task.clone(),
                requested: task.to_string(),
            });
        }
    }
    if low.is_none() && high.is_none() {
        return Err(Error::InvalidArgument("no locked threshold supplied".into()));
    }
    Ok(scores
        .iter()
        .map(|&s| {
            if let Some(l) = low {
                if s < l.value {
                    return TriageClass::RuledOut;
                }
            }
            if let Some(h) = high {
                if s >= h.value {
                    return TriageClass::RuledIn;
                }
            }
            TriageClass::GrayZone
        })
        .collect())
}
