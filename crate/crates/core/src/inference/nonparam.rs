//! Non-parametric tests: two-sample Kolmogorov-Smirnov, McNemar on paired
//! discordant counts, and the one-sided Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};

use super::dist;
use crate::error::{Error, Result};

/// Two-sample KS test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Supremum gap between the two empirical CDFs.
    pub d: f64,
    pub p: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Supremum CDF gap between two samples. The p-value comes from the
/// asymptotic Kolmogorov series with effective n = n1*n2/(n1+n2) and the
/// small-sample adjustment lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS test needs both samples non-empty".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("KS input contains NaN".into()));
    }
    let d = ks_statistic(a, b);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p = kolmogorov_survival(lambda);
    Ok(KsResult { d, p, n1: a.len(), n2: b.len() })
}

/// D = sup |F_a - F_b| from a merge scan, evaluating after all points equal
/// to the current value are consumed from both samples.
pub(crate) fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n1, n2) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let v = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] == v {
            i += 1;
        }
        while j < sb.len() && sb[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}

/// Q_KS(lambda) = 2 * sum_{k=1..100} (-1)^{k-1} exp(-2 k^2 lambda^2),
/// clamped into (0, 1]. Below lambda = 0.2 the survival probability is 1
/// to double precision.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100u32 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(f64::MIN_POSITIVE, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMode {
    /// Two-sided binomial tail doubled and capped at 1.
    Exact,
    /// Continuity-corrected chi-squared with 1 df.
    Chi2,
    /// Exact below 25 discordant pairs, chi-squared otherwise.
    Auto,
}

/// McNemar test on the discordant counts of a paired 2x2 table.
pub fn mcnemar(b: usize, c: usize, mode: McNemarMode) -> Result<f64> {
    let n = b + c;
    if n == 0 {
        return Err(Error::Degenerate("no discordant pairs".into()));
    }
    let exact = match mode {
        McNemarMode::Exact => true,
        McNemarMode::Chi2 => false,
        McNemarMode::Auto => n < 25,
    };
    if exact {
        // p = 2 * P(X <= min(b, c)) for X ~ Binomial(n, 1/2), capped at 1.
        // Binomial coefficients via the multiplicative recurrence stay exact
        // in f64 for the small discordant counts this mode is meant for.
        let k = b.min(c);
        let half_pow = 0.5f64.powi(n as i32);
        let mut coeff = 1.0f64;
        let mut tail = 0.0f64;
        for i in 0..=k {
            tail += coeff * half_pow;
            coeff = coeff * (n - i) as f64 / (i + 1) as f64;
        }
        Ok((2.0 * tail).min(1.0))
    } else {
        let diff = (b as f64 - c as f64).abs() - 1.0;
        let chi2 = diff * diff / n as f64;
        Ok(dist::chi_squared_sf(chi2, 1.0))
    }
}

/// One-sided Wilcoxon signed-rank test of the alternative "the differences
/// are shifted positive": p = P(W+ >= observed | H0).
///
/// Zero differences are dropped. For up to 20 non-zero differences the null
/// distribution is enumerated exactly via the rank-sum count polynomial;
/// beyond that a normal approximation with tie correction and a continuity
/// correction of 1/2 is used.
pub fn wilcoxon_signed_rank_one_sided(diffs: &[f64]) -> Result<f64> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::Degenerate("all differences are zero".into()));
    }
    if nonzero.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidArgument("differences contain NaN".into()));
    }
    let m = nonzero.len();

    // Doubled average ranks of |d| stay integer valued under ties.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().partial_cmp(&nonzero[b].abs()).unwrap());
    let mut doubled_ranks = vec![0u64; m];
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j < m && nonzero[order[j]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let doubled_avg = (i + 1 + j) as u64;
        for &idx in &order[i..j] {
            doubled_ranks[idx] = doubled_avg;
        }
        i = j;
    }
    let w2_obs: u64 = (0..m).filter(|&i| nonzero[i] > 0.0).map(|i| doubled_ranks[i]).sum();

    if m <= 20 {
        // counts[s] = #sign assignments with doubled rank sum s.
        let total: u64 = doubled_ranks.iter().sum();
        let mut counts = vec![0.0f64; total as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &doubled_ranks {
            let r = r as usize;
            reach += r;
            for s in (r..=reach).rev() {
                counts[s] += counts[s - r];
            }
        }
        let upper: f64 = counts[w2_obs as usize..].iter().sum();
        Ok(upper / 2.0f64.powi(m as i32))
    } else {
        let w = w2_obs as f64 / 2.0;
        let mf = m as f64;
        let mean = mf * (mf + 1.0) / 4.0;
        // Tie correction over groups of equal |d|.
        let mut tie_term = 0.0;
        let mut i = 0;
        while i < m {
            let mut j = i;
            while j < m && nonzero[order[j]].abs() == nonzero[order[i]].abs() {
                j += 1;
            }
            let t = (j - i) as f64;
            tie_term += t * t * t - t;
            i = j;
        }
        let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            return Err(Error::Degenerate("zero variance in signed-rank null".into()));
        }
        let z = (w - mean - 0.5) / var.sqrt();
        Ok(dist::normal_sf(z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Exact two-sample KS p-value by enumerating all label assignments of
    /// the pooled sample (valid for continuous, tie-free data).
    fn ks_exact_p(a: &[f64], b: &[f64]) -> f64 {
        let mut pooled: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).collect();
        pooled.extend(b.iter().map(|&v| (v, false)));
        pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let n = pooled.len();
        let n1 = a.len();
        let d_obs = ks_statistic(a, b);

        // Walk every way to choose which pooled positions belong to sample a.
        let mut hits = 0u64;
        let mut total = 0u64;
        let mut choice: Vec<usize> = (0..n1).collect();
        loop {
            // Compute D for this assignment.
            let mut ca = 0usize;
            let mut d = 0.0f64;
            let mut pick = 0usize;
            for pos in 0..n {
                if pick < n1 && choice[pick] == pos {
                    ca += 1;
                    pick += 1;
                }
                let fa = ca as f64 / n1 as f64;
                let fb = (pos + 1 - ca) as f64 / (n - n1) as f64;
                d = d.max((fa - fb).abs());
            }
            total += 1;
            if d >= d_obs - 1e-12 {
                hits += 1;
            }
            // Next combination.
            let mut i = n1;
            loop {
                if i == 0 {
                    return hits as f64 / total as f64;
                }
                i -= 1;
                if choice[i] != i + n - n1 {
                    choice[i] += 1;
                    for j in i + 1..n1 {
                        choice[j] = choice[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn ks_identical_samples() {
        let a = [0.1, 0.5, 0.9];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.d, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn ks_disjoint_supports() {
        let r = ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_eq!(r.d, 1.0);
    }

    #[test]
    fn ks_d_matches_cdf_gap_oracle() {
        let a = [0.3, 0.1, 0.44, 0.9, 0.62, 0.21, 0.77, 0.05];
        let b = [0.52, 0.18, 0.35, 0.81, 0.66, 0.47];
        let r = ks_two_sample(&a, &b).unwrap();
        // Oracle: evaluate |F_a - F_b| at every pooled value directly.
        let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        pooled.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut d = 0.0f64;
        for &v in &pooled {
            let fa = a.iter().filter(|&&x| x <= v).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&x| x <= v).count() as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        assert_eq!(r.d, d);
    }

    #[test]
    fn ks_asymptotic_p_close_to_exact_enumeration() {
        let a = [0.14, 0.386, 0.036, 0.656, 0.099, 0.745, 0.679, 0.768];
        let b = [0.821, 0.901, 0.446, 0.475, 0.886, 1.031];
        let r = ks_two_sample(&a, &b).unwrap();
        let exact = ks_exact_p(&a, &b);
        assert_abs_diff_eq!(exact, 0.06060606060606061, epsilon = 1e-12);
        assert!((r.p - exact).abs() < 0.02, "asymp {} vs exact {exact}", r.p);
    }

    #[test]
    fn mcnemar_reference_values() {
        // 2 vs 8 discordant pairs: 2 * 56/1024 = 112/1024.
        let p = mcnemar(2, 8, McNemarMode::Exact).unwrap();
        assert_eq!(p, 112.0 / 1024.0);
        assert!((p - 0.109).abs() < 0.001);
        // 1 vs 1: doubled tail caps at 1.
        assert_eq!(mcnemar(1, 1, McNemarMode::Exact).unwrap(), 1.0);
        // 0 vs 10: 2 * 1/1024.
        assert_eq!(mcnemar(0, 10, McNemarMode::Exact).unwrap(), 2.0 / 1024.0);
    }

    #[test]
    fn mcnemar_auto_switches_mode() {
        // Below 25 discordant pairs auto = exact.
        assert_eq!(
            mcnemar(2, 8, McNemarMode::Auto).unwrap(),
            mcnemar(2, 8, McNemarMode::Exact).unwrap()
        );
        // At 25+, auto = chi2.
        assert_eq!(
            mcnemar(10, 20, McNemarMode::Auto).unwrap(),
            mcnemar(10, 20, McNemarMode::Chi2).unwrap()
        );
    }

    #[test]
    fn mcnemar_no_discordant_is_error() {
        assert!(mcnemar(0, 0, McNemarMode::Exact).is_err());
    }

    proptest! {
        #[test]
        fn mcnemar_symmetry(b in 0usize..40, c in 0usize..40) {
            prop_assume!(b + c >= 1);
            for mode in [McNemarMode::Exact, McNemarMode::Chi2, McNemarMode::Auto] {
                let p1 = mcnemar(b, c, mode).unwrap();
                let p2 = mcnemar(c, b, mode).unwrap();
                prop_assert_eq!(p1, p2);
            }
        }

        #[test]
        fn ks_d_invariant_under_common_monotone_transform(
            a in proptest::collection::vec(-3.0f64..3.0, 1..20),
            b in proptest::collection::vec(-3.0f64..3.0, 1..20),
        ) {
            let ta: Vec<f64> = a.iter().map(|v| v.exp()).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
            let d1 = ks_two_sample(&a, &b).unwrap().d;
            let d2 = ks_two_sample(&ta, &tb).unwrap().d;
            prop_assert!((d1 - d2).abs() < 1e-12);
        }
    }

    /// Brute-force 2^n enumeration of the signed-rank null.
    fn wilcoxon_exact_oracle(diffs: &[f64]) -> f64 {
        let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
        let m = nonzero.len();
        // Doubled average ranks.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| nonzero[a].abs().partial_cmp(&nonzero[b].abs()).unwrap());
        let mut dr = vec![0u64; m];
        let mut i = 0;
        while i < m {
            let mut j = i;
            while j < m && nonzero[order[j]].abs() == nonzero[order[i]].abs() {
                j += 1;
            }
            for &idx in &order[i..j] {
                dr[idx] = (i + 1 + j) as u64;
            }
            i = j;
        }
        let obs: u64 = (0..m).filter(|&i| nonzero[i] > 0.0).map(|i| dr[i]).sum();
        let mut hits = 0u64;
        for mask in 0u32..(1 << m) {
            let w: u64 = (0..m).filter(|&i| mask & (1 << i) != 0).map(|i| dr[i]).sum();
            if w >= obs {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << m) as f64
    }

    #[test]
    fn wilcoxon_all_positive_small_n() {
        let diffs = [0.5, 1.2, 0.1, 2.0, 0.7, 0.3];
        let p = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn wilcoxon_symmetric_signs_near_half() {
        let diffs = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
        let p = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
        assert!((p - 0.5).abs() < 0.1, "p = {p}");
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration_up_to_12() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for n in 1..=12usize {
            for _ in 0..20 {
                let diffs: Vec<f64> = (0..n)
                    .map(|_| {
                        // Mix of magnitudes with deliberate ties.
                        let mag = (rng.random_range(1..=5) as f64) / 2.0;
                        if rng.random::<bool>() {
                            mag
                        } else {
                            -mag
                        }
                    })
                    .collect();
                let ours = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
                let oracle = wilcoxon_exact_oracle(&diffs);
                assert_eq!(ours, oracle, "n = {n}, diffs = {diffs:?}");
            }
        }
    }

    #[test]
    fn wilcoxon_all_zero_is_error() {
        assert!(wilcoxon_signed_rank_one_sided(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn wilcoxon_normal_approximation_sane() {
        // 30 strongly positive differences: tiny p.
        let diffs: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let p = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
        assert!(p < 1e-5, "p = {p}");
        // 30 strongly negative: p near 1.
        let diffs: Vec<f64> = (1..=30).map(|i| -(i as f64)).collect();
        let p = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
        assert!(p > 0.999, "p = {p}");
    }
}
