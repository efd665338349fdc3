//! Model comparison by within-cohort ranks.

use crate::error::{Error, Result};

use super::correlation::average_ranks;

/// Mean within-cohort rank per model over a cohorts-by-models metric table
/// (higher metric is better; rank 1 is best; ties share the average rank).
pub fn model_mean_rank(models: &[String], rows: &[Vec<f64>]) -> Result<Vec<(String, f64)>> {
    if models.len() < 2 {
        return Err(Error::InvalidArgument("ranking needs at least 2 models".into()));
    }
    if rows.is_empty() {
        return Err(Error::Empty("no cohort rows".into()));
    }
    let mut sums = vec![0.0f64; models.len()];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != models.len() {
            return Err(Error::Record {
                row: i + 1,
                message: format!("{} values for {} models", row.len(), models.len()),
            });
        }
        // Rank descending: negate so the best metric gets rank 1.
        let negated: Vec<f64> = row.iter().map(|v| -v).collect();
        for (j, r) in average_ranks(&negated).into_iter().enumerate() {
            sums[j] += r;
        }
    }
    Ok(models
        .iter()
        .zip(sums)
        .map(|(m, s)| (m.clone(), s / rows.len() as f64))
        .collect())
}
