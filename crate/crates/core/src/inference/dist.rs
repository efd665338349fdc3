//! Thin wrappers over reference distribution functions.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

pub(crate) fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Upper tail of the standard normal.
pub(crate) fn normal_sf(z: f64) -> f64 {
    standard_normal().sf(z)
}

/// Two-sided normal p-value for a z statistic.
pub(crate) fn normal_two_sided(z: f64) -> f64 {
    (2.0 * normal_sf(z.abs())).min(1.0)
}

/// z such that Phi(z) = q.
pub(crate) fn normal_quantile(q: f64) -> f64 {
    standard_normal().inverse_cdf(q)
}

/// Upper tail of chi-squared with `df` degrees of freedom.
pub(crate) fn chi_squared_sf(x: f64, df: f64) -> f64 {
    if df <= 0.0 {
        // Zero degrees of freedom: point mass at 0.
        return if x <= 0.0 { 1.0 } else { 0.0 };
    }
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("valid df").sf(x)
}

/// Two-sided Student-t p-value.
pub(crate) fn t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid df");
    (2.0 * dist.sf(t.abs())).min(1.0)
}
