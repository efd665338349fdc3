//! Concordance index, risk dichotomization, and the fold-level evaluation
//! harness (fold-averaged risk scores; within-fold bootstrap pooling).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resample::{self, BootstrapConfig};

/// Harrell-style concordance: over comparable pairs (the strictly earlier
/// time carries an event), a pair is concordant when the earlier-event case
/// has the higher risk; risk ties score half.
pub fn concordance_index(risk: &[f64], times: &[f64], events: &[bool]) -> Result<f64> {
    let n = risk.len();
    if n != times.len() || n != events.len() {
        return Err(Error::LengthMismatch("risk vs survival records".into()));
    }
    let mut doubled_concordant = 0u64;
    let mut doubled_comparable = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let (early, late) = if times[i] < times[j] {
                (i, j)
            } else if times[j] < times[i] {
                (j, i)
            } else {
                continue;
            };
            if !events[early] {
                continue;
            }
            doubled_comparable += 2;
            if risk[early] > risk[late] {
                doubled_concordant += 2;
            } else if risk[early] == risk[late] {
                doubled_concordant += 1;
            }
        }
    }
    if doubled_comparable == 0 {
        return Err(Error::Degenerate("no comparable pairs".into()));
    }
    Ok(doubled_concordant as f64 / doubled_comparable as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Split at the sample median; values equal to the median go low.
    Median,
    /// Split at an externally supplied cut; `risk >= cut` is high.
    Cut(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomizedRisk {
    pub high: Vec<bool>,
    /// The cut actually used, recorded for auditability.
    pub cut: f64,
    pub rule: SplitRule,
}

pub fn risk_dichotomize(risk: &[f64], rule: SplitRule) -> Result<DichotomizedRisk> {
    if risk.len() < 2 {
        return Err(Error::Empty("need at least 2 cases to split".into()));
    }
    match rule {
        SplitRule::Median => {
            let mut sorted = risk.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len();
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            };
            Ok(DichotomizedRisk {
                high: risk.iter().map(|&r| r > median).collect(),
                cut: median,
                rule,
            })
        }
        SplitRule::Cut(cut) => Ok(DichotomizedRisk {
            high: risk.iter().map(|&r| r >= cut).collect(),
            cut,
            rule,
        }),
    }
}

/// External risk scores from a cross-validation ensemble: the mean of the
/// fold-specific model scores, case by case.
pub fn average_fold_scores(per_fold: &[Vec<f64>]) -> Result<Vec<f64>> {
    if per_fold.is_empty() {
        return Err(Error::Empty("no fold score vectors".into()));
    }
    let n = per_fold[0].len();
    if per_fold.iter().any(|f| f.len() != n) {
        return Err(Error::LengthMismatch("fold score vectors differ in length".into()));
    }
    Ok((0..n)
        .map(|i| per_fold.iter().map(|f| f[i]).sum::<f64>() / per_fold.len() as f64)
        .collect())
}

/// One fold's validation data.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub risk: Vec<f64>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledBootstrap {
    /// Unweighted mean of the per-fold point estimates.
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    /// Replicates pooled over folds (n_per_fold per fold).
    pub n_resamples: usize,
    pub n_degenerate: usize,
}

/// C-index uncertainty for a fold-evaluated model: resample within each
/// fold, pool every fold's replicate statistics, and take the percentile
/// interval of the pooled set.
pub fn cindex_bootstrap_folds(
    folds: &[FoldData],
    n_per_fold: usize,
    cfg: &BootstrapConfig,
) -> Result<PooledBootstrap> {
    if folds.is_empty() {
        return Err(Error::Empty("no folds".into()));
    }
    let mut points = Vec::with_capacity(folds.len());
    let mut pooled: Vec<f64> = Vec::with_capacity(folds.len() * n_per_fold);
    let mut n_degenerate = 0usize;
    for (f, fold) in folds.iter().enumerate() {
        points.push(concordance_index(&fold.risk, &fold.times, &fold.events)?);
        let stats = resample::replicate_statistics(
            fold.risk.len(),
            n_per_fold,
            cfg.seed.wrapping_add(f as u64),
            |idx| {
                let r: Vec<f64> = idx.iter().map(|&i| fold.risk[i]).collect();
                let t: Vec<f64> = idx.iter().map(|&i| fold.times[i]).collect();
                let e: Vec<bool> = idx.iter().map(|&i| fold.events[i]).collect();
                concordance_index(&r, &t, &e).ok()
            },
        );
        for s in stats {
            match s {
                Some(v) => pooled.push(v),
                None => n_degenerate += 1,
            }
        }
    }
    if pooled.is_empty() {
        return Err(Error::Degenerate("every replicate was degenerate".into()));
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = 1.0 - cfg.level;
    Ok(PooledBootstrap {
        point: points.iter().sum::<f64>() / points.len() as f64,
        lo: resample::quantile_sorted(&pooled, alpha / 2.0),
        hi: resample::quantile_sorted(&pooled, 1.0 - alpha / 2.0),
        n_resamples: folds.len() * n_per_fold,
        n_degenerate,
    })
}
