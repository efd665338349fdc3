//! Deterministic non-parametric bootstrap: percentile confidence intervals
//! and zero-crossing p-values for arbitrary statistics.
//!
//! Every resample draws its indices from an RNG derived from
//! `(seed, resample index)`, so results do not depend on thread count or
//! scheduling; replicate statistics are reduced in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
/// Fixed default seed; override via CLI flag or TRIAGEBENCH_SEED.
pub const DEFAULT_SEED: u64 = 20240212;

/// Bootstrap settings threaded through analyses that attach CIs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { n_resamples: DEFAULT_RESAMPLES, seed: DEFAULT_SEED, level: DEFAULT_LEVEL }
    }
}

/// Point estimate with a percentile bootstrap interval.
///
/// Percentile intervals may exclude the point estimate under skew, so
/// `lo <= point <= hi` is not guaranteed; `lo <= hi` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_resamples: usize,
    pub level: f64,
    /// Resamples where the statistic was undefined; dropped, never imputed.
    pub n_degenerate: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// RNG for one replicate, independent of all others.
pub fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index as u64)))
}

/// Draw a with-replacement index sample of size `n`.
fn draw_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Evaluate `stat` on every replicate, in index order. `stat` receives the
/// resampled row indices into the caller's data.
pub fn replicate_statistics<F>(
    n_cases: usize,
    n_resamples: usize,
    seed: u64,
    stat: F,
) -> Vec<Option<f64>>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let idx = draw_indices(&mut rng, n_cases);
            stat(&idx)
        })
        .collect()
}

/// Vector-valued variant of [`replicate_statistics`] for statistics that
/// produce several components per replicate (for example all coefficients
/// of a refitted model).
pub fn replicate_statistics_vec<F>(
    n_cases: usize,
    n_resamples: usize,
    seed: u64,
    stat: F,
) -> Vec<Option<Vec<f64>>>
where
    F: Fn(&[usize]) -> Option<Vec<f64>> + Sync,
{
    (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let idx = draw_indices(&mut rng, n_cases);
            stat(&idx)
        })
        .collect()
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn percentile_interval(mut defined: Vec<f64>, level: f64) -> (f64, f64) {
    defined.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = 1.0 - level;
    (quantile_sorted(&defined, alpha / 2.0), quantile_sorted(&defined, 1.0 - alpha / 2.0))
}

/// Percentile bootstrap CI for `stat` over case resamples.
///
/// `stat` maps resampled indices into `data` to a statistic; returning
/// `None` marks the replicate degenerate (for example a class vanished).
pub fn bootstrap_ci<T, F>(
    data: &[T],
    stat: F,
    n_resamples: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult>
where
    T: Sync,
    F: Fn(&[usize], &[T]) -> Option<f64> + Sync,
{
    if data.is_empty() {
        return Err(Error::Empty("bootstrap over empty data".into()));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidArgument("n_resamples must be >= 1".into()));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0,1)")));
    }
    let identity: Vec<usize> = (0..data.len()).collect();
    let point = stat(&identity, data)
        .ok_or_else(|| Error::Undefined("statistic undefined on the full sample".into()))?;

    let stats = replicate_statistics(data.len(), n_resamples, seed, |idx| stat(idx, data));
    let defined: Vec<f64> = stats.iter().filter_map(|s| *s).collect();
    let n_degenerate = n_resamples - defined.len();
    if defined.is_empty() {
        return Err(Error::Degenerate("all bootstrap resamples were degenerate".into()));
    }
    let (lo, hi) = percentile_interval(defined, level);
    Ok(BootstrapResult { point, lo, hi, n_resamples, level, n_degenerate })
}

/// Two-sided bootstrap p-value for a signed effect:
/// `p = 2 * min(frac(effect* <= 0), frac(effect* >= 0))`, floored at
/// `1/n_resamples` and capped at 1.
pub fn bootstrap_pvalue_zero_crossing<T, F>(
    data: &[T],
    effect: F,
    n_resamples: usize,
    seed: u64,
) -> Result<f64>
where
    T: Sync,
    F: Fn(&[usize], &[T]) -> Option<f64> + Sync,
{
    if data.is_empty() {
        return Err(Error::Empty("bootstrap over empty data".into()));
    }
    if n_resamples == 0 {
        return Err(Error::InvalidArgument("n_resamples must be >= 1".into()));
    }
    let stats = replicate_statistics(data.len(), n_resamples, seed, |idx| effect(idx, data));
    let defined: Vec<f64> = stats.iter().filter_map(|s| *s).collect();
    if defined.is_empty() {
        return Err(Error::Degenerate("effect undefined on every resample".into()));
    }
    Ok(zero_crossing_pvalue(&defined, n_resamples))
}

/// p-value from already-computed replicate effects (see
/// [`bootstrap_pvalue_zero_crossing`]); the floor uses the requested
/// replicate count, not the defined count.
pub fn zero_crossing_pvalue(effects: &[f64], n_resamples: usize) -> f64 {
    let n = effects.len() as f64;
    let le = effects.iter().filter(|&&e| e <= 0.0).count() as f64 / n;
    let ge = effects.iter().filter(|&&e| e >= 0.0).count() as f64 / n;
    let p = 2.0 * le.min(ge);
    p.max(1.0 / n_resamples as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn mean_stat(idx: &[usize], data: &[f64]) -> Option<f64> {
        Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64)
    }

    /// Plain serial re-implementation used as the determinism oracle.
    fn serial_bootstrap_mean(data: &[f64], n_resamples: usize, seed: u64, level: f64) -> BootstrapResult {
        let mut stats = Vec::with_capacity(n_resamples);
        for i in 0..n_resamples {
            let mut rng = replicate_rng(seed, i);
            let idx: Vec<usize> = (0..data.len()).map(|_| rng.random_range(0..data.len())).collect();
            stats.push(mean_stat(&idx, data).unwrap());
        }
        stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let alpha = 1.0 - level;
        BootstrapResult {
            point: data.iter().sum::<f64>() / data.len() as f64,
            lo: quantile_sorted(&stats, alpha / 2.0),
            hi: quantile_sorted(&stats, 1.0 - alpha / 2.0),
            n_resamples,
            level,
            n_degenerate: 0,
        }
    }

    #[test]
    fn constant_statistic_collapses_interval() {
        let data = vec![1.0, 2.0, 3.0];
        let r = bootstrap_ci(&data, |_, _| Some(42.0), 200, 1, 0.95).unwrap();
        assert_eq!(r.point, 42.0);
        assert_eq!(r.lo, 42.0);
        assert_eq!(r.hi, 42.0);
    }

    #[test]
    fn mean_interval_matches_serial_oracle_bit_for_bit() {
        let data = vec![1.0, 2.0, 3.0];
        let ours = bootstrap_ci(&data, mean_stat, 1000, DEFAULT_SEED, 0.95).unwrap();
        let oracle = serial_bootstrap_mean(&data, 1000, DEFAULT_SEED, 0.95);
        assert_eq!(ours, oracle);
        assert!(ours.lo <= 2.0 && 2.0 <= ours.hi);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let data: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| bootstrap_ci(&data, mean_stat, 500, 99, 0.9).unwrap())
        };
        let one = run(1);
        let many = run(8);
        assert_eq!(one, many);
    }

    #[test]
    fn degenerate_resamples_dropped_and_counted() {
        let data = vec![0.0, 1.0];
        // Undefined whenever the resample is constant.
        let stat = |idx: &[usize], d: &[f64]| {
            let vals: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
            if vals.iter().all(|&v| v == vals[0]) {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let r = bootstrap_ci(&data, stat, 1000, 5, 0.95).unwrap();
        assert!(r.n_degenerate > 0);
        assert!(r.n_degenerate < 1000);
    }

    #[test]
    fn all_degenerate_is_an_error() {
        let data = vec![1.0];
        // Defined on the identity sample only (never on resamples? identity
        // resample of n=1 is always [0]); force degenerate replicates with a flag.
        let err = bootstrap_ci(
            &data,
            |idx, _| if idx.len() == 1 && false { Some(0.0) } else { None },
            10,
            1,
            0.95,
        );
        assert!(err.is_err());
    }

    #[test]
    fn pvalue_floor_and_symmetry() {
        let data = vec![1.0; 8];
        let p = bootstrap_pvalue_zero_crossing(&data, |_, _| Some(1.0), 1000, 3).unwrap();
        assert_eq!(p, 1.0 / 1000.0);

        // Symmetric effect around zero: p near 1.
        let sym: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let p = bootstrap_pvalue_zero_crossing(
            &sym,
            |idx, d| Some(idx.iter().map(|&i| d[i]).sum::<f64>() / idx.len() as f64),
            1000,
            17,
        )
        .unwrap();
        assert!(p > 0.9, "p = {p}");
    }

    #[test]
    fn widening_level_widens_interval() {
        let data: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let narrow = bootstrap_ci(&data, mean_stat, 800, 11, 0.80).unwrap();
        let wide = bootstrap_ci(&data, mean_stat, 800, 11, 0.99).unwrap();
        assert!(wide.lo <= narrow.lo);
        assert!(wide.hi >= narrow.hi);
    }

    #[test]
    fn coverage_sanity_for_normal_mean() {
        // Box-Muller standard normals.
        let mut outer = ChaCha8Rng::seed_from_u64(424242);
        let mut normal = move || {
            let u1: f64 = outer.random::<f64>().max(1e-12);
            let u2: f64 = outer.random::<f64>();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let trials = 500;
        let n = 30;
        let mut covered = 0;
        for t in 0..trials {
            let data: Vec<f64> = (0..n).map(|_| normal()).collect();
            let r = bootstrap_ci(&data, mean_stat, 1000, 1000 + t as u64, 0.95).unwrap();
            if r.lo <= 0.0 && 0.0 <= r.hi {
                covered += 1;
            }
        }
        let coverage = covered as f64 / trials as f64;
        assert!((0.92..=0.98).contains(&coverage), "coverage = {coverage}");
    }
}
