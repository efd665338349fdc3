//! Correlation and binned trend analysis.

use serde::{Deserialize, Serialize};

use super::dist;
use crate::error::{Error, Result};

fn check_xy(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} x vs {} y", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InvalidArgument("correlation needs n >= 3".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("correlation input must be finite".into()));
    }
    Ok(())
}

/// Product-moment correlation with a two-sided t-approximation p-value
/// (n - 2 degrees of freedom).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_xy(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant input to correlation".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * ((n - 2.0) / (1.0 - r * r)).sqrt();
        dist::t_two_sided(t, n - 2.0)
    };
    Ok((r, p))
}

/// Average ranks with ties.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average-tie ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_xy(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendBin {
    pub mean_score: f64,
    pub event_rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedTrend {
    pub bins: Vec<TrendBin>,
    pub pearson_r: f64,
    pub pearson_p: f64,
    /// Requested bins that collapsed into neighbours because of score ties.
    pub merged_bins: usize,
}

/// Equal-count quantile bins of the scores with the per-bin event rate, and
/// the Pearson correlation between bin mean scores and event rates.
/// Bins whose boundaries collide on tied scores are merged; fewer than two
/// effective bins is an error.
pub fn binned_trend(scores: &[f64], truth: &[bool], n_bins: usize) -> Result<BinnedTrend> {
    if n_bins < 2 {
        return Err(Error::InvalidArgument("n_bins must be >= 2".into()));
    }
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch("scores vs truth".into()));
    }
    if scores.len() < n_bins {
        return Err(Error::InvalidArgument(format!(
            "{} cases cannot fill {n_bins} bins",
            scores.len()
        )));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Nominal cut positions, advanced past ties so equal scores share a bin.
    let mut cuts: Vec<usize> = Vec::new();
    for k in 1..n_bins {
        let mut pos = k * n / n_bins;
        while pos < n && pos > 0 && scores[order[pos]] == scores[order[pos - 1]] {
            pos += 1;
        }
        if pos < n && Some(&pos) != cuts.last() {
            cuts.push(pos);
        }
    }
    cuts.dedup();
    if cuts.is_empty() {
        return Err(Error::Degenerate(
            "scores collapse into a single bin; trend undefined".into(),
        ));
    }

    let mut bins = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0usize;
    let mut bounds = cuts.clone();
    bounds.push(n);
    for end in bounds {
        let idx = &order[start..end];
        let mean_score = idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64;
        let events = idx.iter().filter(|&&i| truth[i]).count();
        bins.push(TrendBin {
            mean_score,
            event_rate: events as f64 / idx.len() as f64,
            n: idx.len(),
        });
        start = end;
    }

    let xs: Vec<f64> = bins.iter().map(|b| b.mean_score).collect();
    let ys: Vec<f64> = bins.iter().map(|b| b.event_rate).collect();
    if bins.len() < 3 {
        // Pearson p needs n >= 3 bins; report r from the two points without p.
        let (r, p) = if bins.len() == 2 {
            let dir = (ys[1] - ys[0]).signum() * (xs[1] - xs[0]).signum();
            (dir, f64::NAN)
        } else {
            return Err(Error::Degenerate("fewer than two effective bins".into()));
        };
        return Ok(BinnedTrend { bins, pearson_r: r, pearson_p: p, merged_bins: n_bins - 2 });
    }
    let (pearson_r, pearson_p) = pearson(&xs, &ys)?;
    let merged = n_bins - bins.len();
    Ok(BinnedTrend { bins, pearson_r, pearson_p, merged_bins: merged })
}
