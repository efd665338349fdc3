//! Score-distribution shift between a subgroup and its baseline cohort:
//! per-class two-sample KS plus discrimination on both sides.

use serde::{Deserialize, Serialize};

use super::nonparam::{ks_two_sample, KsResult};
use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::metrics;
use crate::resample::{self, BootstrapConfig, BootstrapResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShift {
    pub class_name: String,
    pub baseline_n: usize,
    pub subgroup_n: usize,
    pub ks: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupShiftReport {
    pub per_class: Vec<ClassShift>,
    pub baseline_auc: Option<f64>,
    pub subgroup_auc: Option<BootstrapResult>,
}

/// Compare the subgroup's per-class score distributions against the
/// baseline cohort. For binary tasks with a designated positive class the
/// positive-class score is compared within each class of cases; for
/// multiclass tasks each class's own score is used. Classes absent from
/// the subgroup are skipped. AUC is macro one-vs-rest for multiclass
/// cohorts and plain binary AUC otherwise, with a bootstrap CI on the
/// subgroup side.
pub fn subgroup_shift_report(
    baseline: &Cohort,
    subgroup: &Cohort,
    boot: &BootstrapConfig,
) -> Result<SubgroupShiftReport> {
    if baseline.class_map != subgroup.class_map {
        return Err(Error::Schema(
            "subgroup and baseline must share the same class map".into(),
        ));
    }
    let class_map = &baseline.class_map;
    let score_column = |class: usize| -> usize {
        match class_map.positive_index() {
            Some(p) if class_map.len() == 2 => p,
            _ => class,
        }
    };

    let mut per_class = Vec::new();
    for class in 0..class_map.len() {
        let col = score_column(class);
        let base: Vec<f64> = baseline
            .records
            .iter()
            .filter(|r| r.true_label == class)
            .map(|r| r.scores[col])
            .collect();
        let sub: Vec<f64> = subgroup
            .records
            .iter()
            .filter(|r| r.true_label == class)
            .map(|r| r.scores[col])
            .collect();
        if base.is_empty() || sub.is_empty() {
            continue;
        }
        per_class.push(ClassShift {
            class_name: class_map.names()[class].clone(),
            baseline_n: base.len(),
            subgroup_n: sub.len(),
            ks: ks_two_sample(&base, &sub)?,
        });
    }
    if per_class.is_empty() {
        return Err(Error::Empty("no class is populated on both sides".into()));
    }

    let auc_of = |cohort: &Cohort| -> Option<f64> {
        if class_map.len() == 2 {
            let (scores, labels) = cohort.binary_scores_labels().ok()?;
            metrics::binary_auc(&scores, &labels).ok().flatten()
        } else {
            metrics::macro_auc_ovr(cohort).ok().map(|m| m.value)
        }
    };
    let baseline_auc = auc_of(baseline);

    let subgroup_auc = if subgroup.is_empty() {
        None
    } else {
        let records = &subgroup.records;
        let stat = |idx: &[usize], _data: &[()]| -> Option<f64> {
            let resampled = Cohort {
                name: subgroup.name.clone(),
                class_map: class_map.clone(),
                records: idx.iter().map(|&i| records[i].clone()).collect(),
                role: subgroup.role,
            };
            auc_of(&resampled)
        };
        let placeholder = vec![(); records.len()];
        resample::bootstrap_ci(&placeholder, stat, boot.n_resamples, boot.seed, boot.level).ok()
    };

    Ok(SubgroupShiftReport { per_class, baseline_auc, subgroup_auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{CaseRecord, ClassMap, CohortRole};
    use std::collections::BTreeSet;

    fn binary_cohort(name: &str, cases: Vec<(usize, f64)>) -> Cohort {
        let class_map = ClassMap::binary("negative", "positive").unwrap();
        let records = cases
            .into_iter()
            .enumerate()
            .map(|(i, (label, pos_score))| CaseRecord {
                case_id: format!("{name}{i}"),
                true_label: label,
                scores: vec![1.0 - pos_score, pos_score],
                subgroup_tags: BTreeSet::new(),
                center: String::new(),
                stage: None,
            })
            .collect();
        Cohort::new(name.into(), class_map, records, CohortRole::InternalTest).unwrap()
    }

    #[test]
    fn subgroup_equal_to_baseline_has_zero_d() {
        let base = binary_cohort(
            "b",
            vec![(0, 0.1), (0, 0.2), (1, 0.8), (1, 0.9), (0, 0.3), (1, 0.7)],
        );
        let report =
            subgroup_shift_report(&base, &base, &BootstrapConfig { n_resamples: 50, seed: 1, level: 0.95 })
                .unwrap();
        for class in &report.per_class {
            assert_eq!(class.ks.d, 0.0);
            assert_eq!(class.ks.p, 1.0);
        }
        assert!(report.baseline_auc.is_some());
    }

    #[test]
    fn shifted_subgroup_detected() {
        let base = binary_cohort(
            "b",
            (0..40)
                .map(|i| (usize::from(i >= 20), if i >= 20 { 0.7 + (i as f64 % 10.0) / 40.0 } else { 0.05 + (i as f64) / 100.0 }))
                .collect(),
        );
        // Subgroup negatives sit much higher than baseline negatives.
        let sub = binary_cohort("s", (0..10).map(|i| (0usize, 0.5 + i as f64 / 50.0)).collect());
        let report =
            subgroup_shift_report(&base, &sub, &BootstrapConfig { n_resamples: 50, seed: 1, level: 0.95 })
                .unwrap();
        let neg = report.per_class.iter().find(|c| c.class_name == "negative").unwrap();
        // Oracle: supports are disjoint above/below 0.5 except boundary.
        assert!(neg.ks.d > 0.9, "D = {}", neg.ks.d);
        assert_eq!(report.per_class.len(), 1); // subgroup has no positives
    }

    #[test]
    fn mismatched_class_maps_rejected() {
        let a = binary_cohort("a", vec![(0, 0.2), (1, 0.9)]);
        let mut b = binary_cohort("b", vec![(0, 0.2), (1, 0.9)]);
        b.class_map = ClassMap::binary("neg", "pos").unwrap();
        assert!(subgroup_shift_report(
            &a,
            &b,
            &BootstrapConfig { n_resamples: 10, seed: 1, level: 0.95 }
        )
        .is_err());
    }
}
