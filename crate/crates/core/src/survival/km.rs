//! Product-limit survival estimation and the two-group log-rank test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Kaplan-Meier step function. `survival[k]` is S(t) just after
/// `event_times[k]`; S(0) = 1 implicitly. Steps occur at event times only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub event_times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl KmCurve {
    /// S(t): the most recent step value at or before `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let mut s = 1.0;
        for (k, &time) in self.event_times.iter().enumerate() {
            if time <= t {
                s = self.survival[k];
            } else {
                break;
            }
        }
        s
    }
}

/// Product-limit estimate. Subjects censored at an event time are still at
/// risk for that event (censoring is processed after events at equal times).
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<KmCurve> {
    if times.is_empty() || times.len() != events.len() {
        return Err(Error::Empty("no survival records".into()));
    }
    if times.iter().any(|t| t.is_nan() || *t <= 0.0) {
        return Err(Error::InvalidArgument("times must be positive".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());

    let mut curve = KmCurve {
        event_times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let mut remaining = times.len();
    let mut s = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while i < order.len() && times[order[i]] == t {
            if events[order[i]] {
                deaths += 1;
            }
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / remaining as f64;
            curve.event_times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(remaining);
            curve.events.push(deaths);
        }
        remaining -= leaving;
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRank {
    pub chi2: f64,
    pub p: f64,
    /// Observed and expected events in the first group.
    pub observed_a: f64,
    pub expected_a: f64,
}

/// Two-group log-rank test (1 degree of freedom).
pub fn logrank_test(
    times_a: &[f64],
    events_a: &[bool],
    times_b: &[f64],
    events_b: &[bool],
) -> Result<LogRank> {
    if times_a.is_empty() || times_b.is_empty() {
        return Err(Error::Empty("both groups must be non-empty".into()));
    }
    if times_a.len() != events_a.len() || times_b.len() != events_b.len() {
        return Err(Error::LengthMismatch("times vs events".into()));
    }
    // Distinct event times over the pooled sample.
    let mut event_times: Vec<f64> = times_a
        .iter()
        .zip(events_a)
        .chain(times_b.iter().zip(events_b))
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();

    let mut observed_a = 0.0;
    let mut expected_a = 0.0;
    let mut variance = 0.0;
    for &t in &event_times {
        let n_a = times_a.iter().filter(|&&x| x >= t).count() as f64;
        let n_b = times_b.iter().filter(|&&x| x >= t).count() as f64;
        let d_a = times_a
            .iter()
            .zip(events_a)
            .filter(|(&x, &e)| x == t && e)
            .count() as f64;
        let d_b = times_b
            .iter()
            .zip(events_b)
            .filter(|(&x, &e)| x == t && e)
            .count() as f64;
        let n = n_a + n_b;
        let d = d_a + d_b;
        if n < 1.0 || d == 0.0 {
            continue;
        }
        observed_a += d_a;
        expected_a += d * n_a / n;
        if n > 1.0 {
            variance += d * (n_a / n) * (n_b / n) * (n - d) / (n - 1.0);
        }
    }
    let chi2 = if variance > 0.0 {
        let diff = observed_a - expected_a;
        diff * diff / variance
    } else {
        0.0
    };
    let p = crate::inference::dist::chi_squared_sf(chi2, 1.0);
    Ok(LogRank { chi2, p, observed_a, expected_a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_limit_no_censoring() {
        let times = [1.0, 2.0, 3.0];
        let events = [true, true, true];
        let c = kaplan_meier(&times, &events).unwrap();
        assert_eq!(c.event_times, vec![1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(c.survival[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.survival[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.survival[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn all_censored_stays_at_one() {
        let times = [1.0, 2.0, 3.0];
        let events = [false, false, false];
        let c = kaplan_meier(&times, &events).unwrap();
        assert!(c.event_times.is_empty());
        assert_eq!(c.survival_at(5.0), 1.0);
    }

    #[test]
    fn mixed_fixture_matches_hand_table() {
        // Six subjects: events at 2 (n=6), 4 (n=4, after censor at 3), 7 (n=2);
        // censored at 3, 5, and 9+.
        let times = [2.0, 3.0, 4.0, 5.0, 7.0, 9.0];
        let events = [true, false, true, false, true, false];
        let c = kaplan_meier(&times, &events).unwrap();
        assert_eq!(c.event_times, vec![2.0, 4.0, 7.0]);
        assert_eq!(c.at_risk, vec![6, 4, 2]);
        assert_abs_diff_eq!(c.survival[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.survival[1], 5.0 / 6.0 * 3.0 / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.survival[2], 5.0 / 6.0 * 3.0 / 4.0 * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn censoring_at_event_time_counts_at_risk() {
        // A censor at t = 2 is still at risk for the event at t = 2.
        let times = [2.0, 2.0, 4.0];
        let events = [true, false, true];
        let c = kaplan_meier(&times, &events).unwrap();
        assert_eq!(c.at_risk, vec![3, 1]);
        assert_abs_diff_eq!(c.survival[0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn logrank_identical_groups_is_null() {
        let times = [1.0, 2.0, 3.0, 4.0];
        let events = [true, false, true, true];
        let r = logrank_test(&times, &events, &times, &events).unwrap();
        assert_abs_diff_eq!(r.chi2, 0.0, epsilon = 1e-12);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn logrank_separated_groups_significant() {
        // Early events in group a, late in group b.
        let times_a: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let events_a = vec![true; 10];
        let times_b: Vec<f64> = (21..=30).map(|i| i as f64).collect();
        let events_b = vec![true; 10];
        let r = logrank_test(&times_a, &events_a, &times_b, &events_b).unwrap();
        assert!(r.chi2 > 6.63, "chi2 = {}", r.chi2); // beyond the 1% critical value
        assert!(r.p < 0.01);
        assert!(r.observed_a > r.expected_a);
    }

    #[test]
    fn logrank_chi2_nonnegative_p_in_unit() {
        let ta = [1.0, 3.0, 5.0, 7.0];
        let ea = [true, true, false, true];
        let tb = [2.0, 4.0, 6.0];
        let eb = [false, true, true];
        let r = logrank_test(&ta, &ea, &tb, &eb).unwrap();
        assert!(r.chi2 >= 0.0);
        assert!(r.p > 0.0 && r.p <= 1.0);
    }
}
