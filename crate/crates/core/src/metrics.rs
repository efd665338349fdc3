//! Classification metrics: confusion counts, ROC/AUC, operating points,
//! balanced accuracy, AUPRC, Brier score.
//!
//! Decision direction is fixed everywhere: `score >= T` is a positive call.
//! Statistics whose defining denominator can vanish return `Option<f64>`,
//! with `None` meaning undefined (reported downstream as NaN/null, never
//! silently coerced to zero).

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};

/// Cell counts of a 2x2 confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.true_neg, self.true_neg + self.false_pos)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    pub fn npv(&self) -> Option<f64> {
        ratio(self.true_neg, self.true_neg + self.false_neg)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// A threshold together with the rates it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    /// sensitivity + specificity - 1.
    pub youden: f64,
}

fn check_binary_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
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
    Ok(())
}

/// Confusion counts of the classifier `score >= t  =>  positive call`.
pub fn confusion_at_threshold(scores: &[f64], labels: &[bool], t: f64) -> Result<ConfusionCounts> {
    check_binary_inputs(scores, labels)?;
    let mut c = ConfusionCounts { true_pos: 0, false_pos: 0, true_neg: 0, false_neg: 0 };
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= t, y) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// ROC AUC as the Mann-Whitney concordance probability, ties credited 1/2.
/// Returns `None` when either class is empty.
///
/// Computed from rank sums with doubled ranks so the numerator stays integer
/// valued; the result is then exactly the pair-counting value
/// `(2*concordant + ties) / (2 * n_pos * n_neg)`.
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    check_binary_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Sum of doubled average ranks of the positive class.
    let mut doubled_rank_sum_pos: f64 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j share the doubled average rank (i+1) + j.
        let doubled_avg = (i + 1 + j) as f64;
        for &idx in &order[i..j] {
            if labels[idx] {
                doubled_rank_sum_pos += doubled_avg;
            }
        }
        i = j;
    }

    let numerator = doubled_rank_sum_pos - (n_pos * (n_pos + 1)) as f64;
    Ok(Some(numerator / (2 * n_pos * n_neg) as f64))
}

/// Macro AUC over one-vs-rest problems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacroAuc {
    pub value: f64,
    /// Per-class one-vs-rest AUC; `None` where a class was absent.
    pub per_class: Vec<Option<f64>>,
    /// Indices of classes excluded from the mean because their AUC was undefined.
    pub excluded: Vec<usize>,
}

/// Unweighted mean of per-class one-vs-rest AUCs. Classes whose AUC is
/// undefined (class absent from the cohort) are excluded; it is an error
/// for every class to be undefined.
pub fn macro_auc_ovr(cohort: &Cohort) -> Result<MacroAuc> {
    let k = cohort.class_map.len();
    if k < 2 {
        return Err(Error::InvalidArgument("macro AUC requires at least 2 classes".into()));
    }
    let mut per_class = Vec::with_capacity(k);
    let mut excluded = Vec::new();
    for class in 0..k {
        let scores: Vec<f64> = cohort.records.iter().map(|r| r.scores[class]).collect();
        let labels: Vec<bool> = cohort.records.iter().map(|r| r.true_label == class).collect();
        let auc = binary_auc(&scores, &labels)?;
        if auc.is_none() {
            excluded.push(class);
        }
        per_class.push(auc);
    }
    let defined: Vec<f64> = per_class.iter().filter_map(|a| *a).collect();
    if defined.is_empty() {
        return Err(Error::Undefined("every per-class AUC is undefined".into()));
    }
    let value = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(MacroAuc { value, per_class, excluded })
}

/// Candidate thresholds: the unique observed scores ascending, plus +inf.
/// Sufficient to realize every achievable confusion matrix under `>=`.
pub(crate) fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = scores.to_vec();
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c.dedup();
    c.push(f64::INFINITY);
    c
}

/// Operating point maximizing Youden's index over the candidate grid.
/// Ties resolve to the smallest threshold.
pub fn youden_optimal(scores: &[f64], labels: &[bool]) -> Result<OperatingPoint> {
    check_binary_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass("Youden optimum needs both classes present".into()));
    }
    let mut best: Option<OperatingPoint> = None;
    for t in threshold_candidates(scores) {
        let c = confusion_at_threshold(scores, labels, t)?;
        let (sens, spec) = (c.sensitivity().unwrap(), c.specificity().unwrap());
        let youden = sens + spec - 1.0;
        let better = match &best {
            None => true,
            Some(b) => youden > b.youden,
        };
        if better {
            best = Some(OperatingPoint {
                threshold: t,
                sensitivity: Some(sens),
                specificity: Some(spec),
                ppv: c.ppv(),
                npv: c.npv(),
                youden,
            });
        }
    }
    Ok(best.unwrap())
}

/// Mean per-class recall over the classes present in `truth`.
/// A `None` prediction (e.g. a timed-out read) never matches.
pub fn balanced_accuracy(predicted: &[Option<usize>], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions vs {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("no cases".into()));
    }
    let max_class = *truth.iter().max().unwrap();
    let mut per_class = vec![(0usize, 0usize); max_class + 1]; // (correct, total)
    for (&p, &t) in predicted.iter().zip(truth) {
        per_class[t].1 += 1;
        if p == Some(t) {
            per_class[t].0 += 1;
        }
    }
    let recalls: Vec<f64> = per_class
        .iter()
        .filter(|(_, total)| *total > 0)
        .map(|(correct, total)| *correct as f64 / *total as f64)
        .collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Area under the precision-recall curve via the step (rectangle) sum:
/// at each distinct score cut, area += delta(recall) * precision.
/// `None` when the positive class is empty.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    check_binary_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut area = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        // Consume the whole tie group before evaluating the cut.
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(Some(area))
}

/// Mean squared error of the positive-class probability.
pub fn brier(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_binary_inputs(scores, labels)?;
    let sum: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let target = if y { 1.0 } else { 0.0 };
            (s - target).powi(2)
        })
        .sum();
    Ok(sum / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{CaseRecord, ClassMap, Cohort, CohortRole};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn make_cohort(class_scores: Vec<(usize, Vec<f64>)>, k: usize) -> Cohort {
        let names: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let class_map = ClassMap::new(names, Some(1.min(k - 1))).unwrap();
        let records = class_scores
            .into_iter()
            .enumerate()
            .map(|(i, (label, scores))| CaseRecord {
                case_id: format!("id{i}"),
                true_label: label,
                scores,
                subgroup_tags: BTreeSet::new(),
                center: String::new(),
                stage: None,
            })
            .collect();
        Cohort::new("t".into(), class_map, records, CohortRole::InternalTest).unwrap()
    }

    /// Brute-force AUC: count concordant pairs, half credit for ties, using
    /// integer arithmetic so the division matches the rank-based route bit
    /// for bit.
    fn auc_pair_oracle(scores: &[f64], labels: &[bool]) -> Option<f64> {
        let pos: Vec<f64> =
            scores.iter().zip(labels).filter(|(_, &y)| y).map(|(&s, _)| s).collect();
        let neg: Vec<f64> =
            scores.iter().zip(labels).filter(|(_, &y)| !y).map(|(&s, _)| s).collect();
        if pos.is_empty() || neg.is_empty() {
            return None;
        }
        let mut doubled = 0u64;
        for &p in &pos {
            for &n in &neg {
                if p > n {
                    doubled += 2;
                } else if p == n {
                    doubled += 1;
                }
            }
        }
        Some(doubled as f64 / (2 * pos.len() * neg.len()) as f64)
    }

    #[test]
    fn confusion_separated() {
        let scores = [1.0, 1.0, 0.0, 0.0];
        let labels = [true, true, false, false];
        let c = confusion_at_threshold(&scores, &labels, 0.5).unwrap();
        assert_eq!(c.false_pos, 0);
        assert_eq!(c.false_neg, 0);
    }

    #[test]
    fn confusion_hand_enumerated() {
        let scores = [0.9, 0.7, 0.6, 0.2];
        let labels = [true, true, false, false];
        let c = confusion_at_threshold(&scores, &labels, 0.5).unwrap();
        assert_eq!(
            c,
            ConfusionCounts { true_pos: 2, false_pos: 1, true_neg: 1, false_neg: 0 }
        );
    }

    #[test]
    fn confusion_above_max_score() {
        let scores = [0.9, 0.7, 0.6, 0.2];
        let labels = [true, true, false, false];
        let c = confusion_at_threshold(&scores, &labels, 0.95).unwrap();
        assert_eq!(c.true_pos, 0);
        assert_eq!(c.false_pos, 0);
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn auc_known_values() {
        assert_eq!(binary_auc(&[1.0, 1.0, 0.0], &[true, true, false]).unwrap(), Some(1.0));
        // pos {0.9, 0.4}, neg {0.6, 0.2}: concordant pairs 3 of 4.
        let auc = binary_auc(&[0.9, 0.4, 0.6, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(auc, Some(0.75));
        // One class empty is undefined, not an error.
        assert_eq!(binary_auc(&[0.5, 0.7], &[true, true]).unwrap(), None);
    }

    #[test]
    fn macro_auc_binary_equals_binary_auc() {
        let cohort = make_cohort(
            vec![
                (1, vec![0.1, 0.9]),
                (1, vec![0.6, 0.4]),
                (0, vec![0.4, 0.6]),
                (0, vec![0.8, 0.2]),
            ],
            2,
        );
        let macro_auc = macro_auc_ovr(&cohort).unwrap();
        let (scores, labels) = cohort.binary_scores_labels().unwrap();
        let auc = binary_auc(&scores, &labels).unwrap().unwrap();
        assert_abs_diff_eq!(macro_auc.value, auc, epsilon = 1e-12);
    }

    #[test]
    fn macro_auc_three_class_mean_of_known_per_class_values() {
        // Per-class one-vs-rest AUCs built by hand: 1.0, 0.5, 0.75.
        let cohort = make_cohort(
            vec![
                (0, vec![0.9, 0.5, 0.6]),
                (1, vec![0.1, 0.5, 0.2]),
                (2, vec![0.1, 0.5, 0.9]),
                (2, vec![0.1, 0.5, 0.4]),
            ],
            3,
        );
        let m = macro_auc_ovr(&cohort).unwrap();
        assert_eq!(m.per_class, vec![Some(1.0), Some(0.5), Some(0.75)]);
        assert_abs_diff_eq!(m.value, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn macro_auc_perfect_three_class() {
        let cohort = make_cohort(
            vec![
                (0, vec![0.8, 0.1, 0.1]),
                (1, vec![0.1, 0.8, 0.1]),
                (2, vec![0.1, 0.1, 0.8]),
                (0, vec![0.9, 0.05, 0.05]),
            ],
            3,
        );
        assert_abs_diff_eq!(macro_auc_ovr(&cohort).unwrap().value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn macro_auc_excludes_absent_class() {
        // Class 2 never appears; its one-vs-rest AUC is undefined.
        let cohort = make_cohort(
            vec![(0, vec![0.8, 0.1, 0.1]), (1, vec![0.1, 0.8, 0.1]), (0, vec![0.7, 0.2, 0.1])],
            3,
        );
        let m = macro_auc_ovr(&cohort).unwrap();
        assert_eq!(m.excluded, vec![2]);
        assert!(m.per_class[2].is_none());
    }

    #[test]
    fn youden_separated_picks_smallest_achieving_candidate() {
        let scores = [1.0, 1.0, 0.0, 0.0];
        let labels = [true, true, false, false];
        let op = youden_optimal(&scores, &labels).unwrap();
        assert_eq!(op.threshold, 1.0);
        assert_abs_diff_eq!(op.youden, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn youden_matches_exhaustive_sweep() {
        let scores = [0.9, 0.7, 0.6, 0.2];
        let labels = [true, true, false, false];
        let op = youden_optimal(&scores, &labels).unwrap();
        // Exhaustive sweep oracle over the same candidate grid.
        let mut best = f64::NEG_INFINITY;
        let mut best_t = f64::NAN;
        for t in threshold_candidates(&scores) {
            let c = confusion_at_threshold(&scores, &labels, t).unwrap();
            let y = c.sensitivity().unwrap() + c.specificity().unwrap() - 1.0;
            if y > best {
                best = y;
                best_t = t;
            }
        }
        assert_eq!(op.threshold, best_t);
        assert_abs_diff_eq!(op.youden, best, epsilon = 1e-12);
        // The reported rates reproduce from the confusion matrix at the threshold.
        let c = confusion_at_threshold(&scores, &labels, op.threshold).unwrap();
        assert_eq!(op.sensitivity, c.sensitivity());
        assert_eq!(op.specificity, c.specificity());
    }

    #[test]
    fn youden_constant_scores_degenerate() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [true, false, true, false];
        let op = youden_optimal(&scores, &labels).unwrap();
        assert_abs_diff_eq!(op.youden, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn youden_single_class_errors() {
        assert!(youden_optimal(&[0.4, 0.5], &[true, true]).is_err());
    }

    #[test]
    fn balanced_accuracy_cases() {
        // All correct.
        let pred: Vec<Option<usize>> = vec![Some(0), Some(1), Some(2)];
        assert_abs_diff_eq!(balanced_accuracy(&pred, &[0, 1, 2]).unwrap(), 1.0);
        // Always predicting class 0 on a binary task.
        let pred = vec![Some(0); 4];
        assert_abs_diff_eq!(balanced_accuracy(&pred, &[0, 0, 1, 1]).unwrap(), 0.5);
        // Recalls 1.0, 0.5, 0.0 average to 0.5.
        let pred = vec![Some(0), Some(0), Some(1), Some(1), Some(2), Some(0), Some(0)];
        let truth = [0, 0, 1, 1, 1, 1, 2];
        // class0: 2/2, class1: 2/4, class2: 0/1 -> (1.0 + 0.5 + 0.0)/3 = 0.5.
        assert_abs_diff_eq!(balanced_accuracy(&pred, &truth).unwrap(), 0.5, epsilon = 1e-12);
        // Timeouts count as incorrect.
        let pred = vec![None, Some(1)];
        assert_abs_diff_eq!(balanced_accuracy(&pred, &[0, 1]).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn auprc_and_brier_known_values() {
        let scores = [1.0, 0.9, 0.1, 0.0];
        let labels = [true, true, false, false];
        assert_abs_diff_eq!(auprc(&scores, &labels).unwrap().unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(brier(&scores, &labels).unwrap(), 0.005, epsilon = 1e-12);
        let constant = [0.5; 4];
        assert_abs_diff_eq!(brier(&constant, &labels).unwrap(), 0.25, epsilon = 1e-12);
        // A hard perfect classifier scores exactly zero.
        let hard = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(brier(&hard, &labels).unwrap(), 0.0);
        assert_eq!(auprc(&hard, &labels).unwrap(), Some(1.0));
    }

    #[test]
    fn auprc_matches_rectangle_oracle_on_small_set() {
        // 5 cases, worked by hand: sorted desc (0.9,P) (0.8,N) (0.7,P) (0.4,P) (0.3,N).
        let scores = [0.9, 0.8, 0.7, 0.4, 0.3];
        let labels = [true, false, true, true, false];
        // Cuts: r=1/3,p=1 -> area 1/3; r=1/3 no change; r=2/3,p=2/3 -> +1/3*2/3;
        // r=1,p=3/4 -> +1/3*3/4; r=1,p=3/5 -> +0.
        let expected = 1.0 / 3.0 + (1.0 / 3.0) * (2.0 / 3.0) + (1.0 / 3.0) * 0.75;
        assert_abs_diff_eq!(
            auprc(&scores, &labels).unwrap().unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn auc_equals_pair_counting_oracle(
            raw in proptest::collection::vec((0u8..=20, proptest::bool::ANY), 1..9)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 20.0).collect();
            let labels: Vec<bool> = raw.iter().map(|(_, y)| *y).collect();
            let ours = binary_auc(&scores, &labels).unwrap();
            let oracle = auc_pair_oracle(&scores, &labels);
            prop_assert_eq!(ours, oracle);
        }

        #[test]
        fn auc_invariant_under_increasing_transform(
            raw in proptest::collection::vec((0.0f64..=1.0, proptest::bool::ANY), 2..40)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s).collect();
            let labels: Vec<bool> = raw.iter().map(|(_, y)| *y).collect();
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s + 1.0).exp()).collect();
            let a = binary_auc(&scores, &labels).unwrap();
            let b = binary_auc(&transformed, &labels).unwrap();
            match (a, b) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "definedness changed under transform"),
            }
        }

        #[test]
        fn confusion_identities_hold_over_sweep(
            raw in proptest::collection::vec((0.0f64..=1.0, proptest::bool::ANY), 1..30)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s).collect();
            let labels: Vec<bool> = raw.iter().map(|(_, y)| *y).collect();
            for t in threshold_candidates(&scores) {
                let c = confusion_at_threshold(&scores, &labels, t).unwrap();
                prop_assert_eq!(c.total(), scores.len());
                if let Some(s) = c.sensitivity() {
                    prop_assert!((s - c.true_pos as f64 / (c.true_pos + c.false_neg) as f64).abs() < 1e-15);
                }
                if let Some(s) = c.specificity() {
                    prop_assert!((s - c.true_neg as f64 / (c.true_neg + c.false_pos) as f64).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn random_predictor_balanced_accuracy_near_one_over_k() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let k = 3usize;
        let n = 10_000usize;
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<Option<usize>> = (0..n).map(|_| Some(rng.random_range(0..k))).collect();
        let ba = balanced_accuracy(&pred, &truth).unwrap();
        assert!((ba - 1.0 / k as f64).abs() < 0.02, "ba = {ba}");
    }
}
