//! Inter-rater agreement: Cohen's kappa on paired labels, Fleiss' kappa on
//! multi-rater count matrices, and the bootstrap test for a kappa difference.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::resample;

/// Conventional interpretation bands for kappa values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementBand {
    Poor,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl AgreementBand {
    pub fn of(kappa: f64) -> Self {
        if kappa <= 0.20 {
            AgreementBand::Poor
        } else if kappa <= 0.40 {
            AgreementBand::Fair
        } else if kappa <= 0.60 {
            AgreementBand::Moderate
        } else if kappa <= 0.80 {
            AgreementBand::Substantial
        } else {
            AgreementBand::AlmostPerfect
        }
    }
}

impl std::fmt::Display for AgreementBand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AgreementBand::Poor => "poor",
            AgreementBand::Fair => "fair",
            AgreementBand::Moderate => "moderate",
            AgreementBand::Substantial => "substantial",
            AgreementBand::AlmostPerfect => "almost_perfect",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub interpretation: AgreementBand,
    /// Observed agreement (concordance for Cohen, mean pairwise for Fleiss).
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub n_items: usize,
}

/// Cohen's kappa over paired categorical labels, chance agreement from the
/// marginal products. Undefined (error) when both margins are a single
/// category.
pub fn cohen_kappa(pairs: &[(usize, usize)]) -> Result<KappaResult> {
    if pairs.is_empty() {
        return Err(Error::Empty("no rating pairs".into()));
    }
    let n = pairs.len() as f64;
    let categories: BTreeSet<usize> =
        pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let observed = pairs.iter().filter(|&&(a, b)| a == b).count() as f64 / n;
    let mut expected = 0.0;
    for &cat in &categories {
        let ma = pairs.iter().filter(|&&(a, _)| a == cat).count() as f64 / n;
        let mb = pairs.iter().filter(|&&(_, b)| b == cat).count() as f64 / n;
        expected += ma * mb;
    }
    if (1.0 - expected).abs() < 1e-12 {
        // Single category on both margins.
        if observed == 1.0 && categories.len() == 1 {
            return Err(Error::Undefined(
                "kappa undefined: a single category on both margins".into(),
            ));
        }
        // Perfect expected agreement with imperfect observed cannot occur
        // with marginal products unless degenerate.
        return Err(Error::Undefined("kappa undefined: expected agreement is 1".into()));
    }
    let kappa = (observed - expected) / (1.0 - expected);
    Ok(KappaResult {
        kappa,
        interpretation: AgreementBand::of(kappa),
        observed_agreement: observed,
        expected_agreement: expected,
        n_items: pairs.len(),
    })
}

/// Cohen's kappa from a binary paired table: `pp` both positive, `pn` first
/// positive only, `np` second positive only, `nn` both negative.
pub fn cohen_kappa_from_counts(pp: usize, pn: usize, np: usize, nn: usize) -> Result<KappaResult> {
    let mut pairs = Vec::with_capacity(pp + pn + np + nn);
    pairs.extend(std::iter::repeat_n((1usize, 1usize), pp));
    pairs.extend(std::iter::repeat_n((1usize, 0usize), pn));
    pairs.extend(std::iter::repeat_n((0usize, 1usize), np));
    pairs.extend(std::iter::repeat_n((0usize, 0usize), nn));
    cohen_kappa(&pairs)
}

/// Fleiss' kappa on a case-by-category count matrix; every row must sum to
/// the same rater count (>= 2).
pub fn fleiss_kappa(ratings: &[Vec<usize>]) -> Result<KappaResult> {
    if ratings.is_empty() {
        return Err(Error::Empty("no cases".into()));
    }
    let k = ratings[0].len();
    if k == 0 {
        return Err(Error::Schema("no rating categories".into()));
    }
    let raters: usize = ratings[0].iter().sum();
    if raters < 2 {
        return Err(Error::InvalidArgument("Fleiss kappa needs >= 2 raters per case".into()));
    }
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(Error::LengthMismatch(format!("row {i} has {} categories", row.len())));
        }
        if row.iter().sum::<usize>() != raters {
            return Err(Error::Record {
                row: i + 1,
                message: format!("row sums to {}, expected {raters}", row.iter().sum::<usize>()),
            });
        }
    }
    let n = ratings.len() as f64;
    let nr = raters as f64;

    // Category proportions.
    let mut p = vec![0.0f64; k];
    for row in ratings {
        for (j, &c) in row.iter().enumerate() {
            p[j] += c as f64;
        }
    }
    for pj in &mut p {
        *pj /= n * nr;
    }

    // Per-case pairwise agreement.
    let p_bar = ratings
        .iter()
        .map(|row| {
            let s: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (s - nr) / (nr * (nr - 1.0))
        })
        .sum::<f64>()
        / n;
    let p_e: f64 = p.iter().map(|pj| pj * pj).sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(Error::Undefined("kappa undefined: a single category overall".into()));
    }
    let kappa = (p_bar - p_e) / (1.0 - p_e);
    Ok(KappaResult {
        kappa,
        interpretation: AgreementBand::of(kappa),
        observed_agreement: p_bar,
        expected_agreement: p_e,
        n_items: ratings.len(),
    })
}

/// Bootstrap comparison of two Fleiss kappas computed on the same cases
/// under two conditions; cases are resampled jointly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaDifference {
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// kappa_a - kappa_b.
    pub delta: f64,
    pub lo: f64,
    pub hi: f64,
    pub p: f64,
    pub n_resamples: usize,
    pub n_degenerate: usize,
}

pub fn bootstrap_kappa_difference(
    ratings_a: &[Vec<usize>],
    ratings_b: &[Vec<usize>],
    n_resamples: usize,
    seed: u64,
) -> Result<KappaDifference> {
    if ratings_a.len() != ratings_b.len() {
        return Err(Error::LengthMismatch(
            "conditions must rate the same case set".into(),
        ));
    }
    let ka = fleiss_kappa(ratings_a)?;
    let kb = fleiss_kappa(ratings_b)?;
    let n = ratings_a.len();

    let delta_on = |idx: &[usize]| -> Option<f64> {
        let a: Vec<Vec<usize>> = idx.iter().map(|&i| ratings_a[i].clone()).collect();
        let b: Vec<Vec<usize>> = idx.iter().map(|&i| ratings_b[i].clone()).collect();
        match (fleiss_kappa(&a), fleiss_kappa(&b)) {
            (Ok(x), Ok(y)) => Some(x.kappa - y.kappa),
            _ => None,
        }
    };

    let stats = resample::replicate_statistics(n, n_resamples, seed, delta_on);
    let defined: Vec<f64> = stats.into_iter().flatten().collect();
    if defined.is_empty() {
        return Err(Error::Degenerate("kappa difference undefined on every resample".into()));
    }
    let n_degenerate = n_resamples - defined.len();
    let mut sorted = defined.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = resample::quantile_sorted(&sorted, 0.025);
    let hi = resample::quantile_sorted(&sorted, 0.975);
    let p = resample::zero_crossing_pvalue(&defined, n_resamples);
    Ok(KappaDifference {
        kappa_a: ka.kappa,
        kappa_b: kb.kappa,
        delta: ka.kappa - kb.kappa,
        lo,
        hi,
        p,
        n_resamples,
        n_degenerate,
    })
}
