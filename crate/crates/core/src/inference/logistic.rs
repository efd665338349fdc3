//! Multivariable logistic regression by damped Newton iterations, and the
//! likelihood-ratio test with discrimination deltas.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dist;
use crate::error::{Error, Result};
use crate::metrics;

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
const BETA_BOUND: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub odds_ratio: Option<f64>,
    /// Wald CI on the odds-ratio scale.
    pub ci: Option<(f64, f64)>,
    pub p: Option<f64>,
    /// True when the covariate was standardized, making the OR per-SD.
    pub per_sd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<CoefficientEstimate>,
    pub log_likelihood: f64,
    pub n: usize,
    /// Number of optimized parameters (intercept plus active columns).
    pub n_params: usize,
    pub iterations: usize,
    pub fitted: Vec<f64>,
    pub outcome: Vec<bool>,
    /// Covariates dropped because they were identically zero.
    pub dropped: Vec<String>,
}

fn log_likelihood(y: &[bool], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &m)| {
            let m = m.clamp(1e-12, 1.0 - 1e-12);
            if yi {
                m.ln()
            } else {
                (1.0 - m).ln()
            }
        })
        .sum()
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Fit logit(P(y=1)) = b0 + X b by maximum likelihood.
///
/// Covariates that are identically zero are dropped (coefficient 0, no
/// inference); other constant covariates are rejected as collinear with the
/// intercept. With `standardize`, covariates taking more than two distinct
/// values are centred and scaled to unit SD, so their odds ratios read
/// per-SD. Divergence (separation) is reported as an error carrying the
/// iteration diagnostic.
pub fn logistic_fit(
    y: &[bool],
    covariates: &[(String, Vec<f64>)],
    standardize: bool,
) -> Result<LogisticFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("no observations".into()));
    }
    for (name, col) in covariates {
        if col.len() != n {
            return Err(Error::LengthMismatch(format!("covariate '{name}'")));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("covariate '{name}' not finite")));
        }
    }

    // Classify columns: active (possibly standardized) or dropped (all zero).
    let mut active: Vec<(String, Vec<f64>, bool)> = Vec::new();
    let mut dropped = Vec::new();
    for (name, col) in covariates {
        if col.iter().all(|&v| v == 0.0) {
            dropped.push(name.clone());
            continue;
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if var == 0.0 {
            return Err(Error::Collinear(format!(
                "covariate '{name}' is constant (collinear with the intercept)"
            )));
        }
        let distinct = {
            let mut vals = col.clone();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            vals.len()
        };
        if standardize && distinct > 2 {
            let sd = var.sqrt();
            active.push((name.clone(), col.iter().map(|v| (v - mean) / sd).collect(), true));
        } else {
            active.push((name.clone(), col.clone(), false));
        }
    }

    let p = active.len() + 1;
    let mut x = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (j, (_, col, _)) in active.iter().enumerate() {
            x[(i, j + 1)] = col[i];
        }
    }
    let yv: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let mut beta = DVector::<f64>::zeros(p);
    let mut mu: Vec<f64> = vec![0.5; n];
    let mut ll = log_likelihood(y, &mu);
    let mut iterations = 0;
    let mut hessian = DMatrix::<f64>::zeros(p, p);
    let mut converged = false;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        // Gradient X'(y - mu) and Hessian X'WX.
        let mut grad = DVector::<f64>::zeros(p);
        hessian.fill(0.0);
        for i in 0..n {
            let w = (mu[i] * (1.0 - mu[i])).max(1e-12);
            let r = yv[i] - mu[i];
            for a in 0..p {
                grad[a] += x[(i, a)] * r;
                for b in a..p {
                    hessian[(a, b)] += x[(i, a)] * w * x[(i, b)];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hessian[(a, b)] = hessian[(b, a)];
            }
        }
        if grad.amax() < GRAD_TOL {
            converged = true;
            break;
        }
        let step = hessian
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&grad))
            .or_else(|| hessian.clone().lu().solve(&grad))
            .ok_or_else(|| {
                Error::Collinear("singular information matrix; collinear covariates".into())
            })?;

        // Damped update: halve until the likelihood does not decrease.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * lambda;
            let cmu: Vec<f64> = (0..n)
                .map(|i| {
                    let eta: f64 = (0..p).map(|a| x[(i, a)] * candidate[a]).sum();
                    sigmoid(eta)
                })
                .collect();
            let cll = log_likelihood(y, &cmu);
            if cll >= ll - 1e-12 {
                beta = candidate;
                mu = cmu;
                ll = cll;
                accepted = true;
                break;
            }
            lambda /= 2.0;
        }
        if !accepted {
            break;
        }
        if beta.amax() > BETA_BOUND {
            return Err(Error::Divergence { context: "logistic".into(), iterations });
        }
    }
    if !converged {
        // Re-check the score equations at the last iterate.
        let mut grad_max = 0.0f64;
        for a in 0..p {
            let g: f64 = (0..n).map(|i| x[(i, a)] * (yv[i] - mu[i])).sum();
            grad_max = grad_max.max(g.abs());
        }
        if grad_max >= GRAD_TOL {
            return Err(Error::Divergence { context: "logistic".into(), iterations });
        }
    }

    // Wald inference from the inverse information at the optimum.
    let cov = hessian.clone().try_inverse();
    let z = dist::normal_quantile(0.975);
    let mut coefficients = Vec::with_capacity(p + dropped.len());
    let names: Vec<(String, bool)> = std::iter::once(("intercept".to_string(), false))
        .chain(active.iter().map(|(n, _, s)| (n.clone(), *s)))
        .collect();
    for (j, (name, per_sd)) in names.iter().enumerate() {
        let estimate = beta[j];
        let se = cov.as_ref().map(|c| c[(j, j)].sqrt()).filter(|v| v.is_finite());
        let (or, ci, pv) = match se {
            Some(se) => (
                Some(estimate.exp()),
                Some(((estimate - z * se).exp(), (estimate + z * se).exp())),
                Some(dist::normal_two_sided(estimate / se)),
            ),
            None => (Some(estimate.exp()), None, None),
        };
        coefficients.push(CoefficientEstimate {
            name: name.clone(),
            estimate,
            se,
            odds_ratio: or,
            ci,
            p: pv,
            per_sd: *per_sd,
        });
    }
    for name in &dropped {
        coefficients.push(CoefficientEstimate {
            name: name.clone(),
            estimate: 0.0,
            se: None,
            odds_ratio: None,
            ci: None,
            p: None,
            per_sd: false,
        });
    }

    Ok(LogisticFit {
        coefficients,
        log_likelihood: ll,
        n,
        n_params: p,
        iterations,
        fitted: mu,
        outcome: y.to_vec(),
        dropped,
    })
}

/// Likelihood-ratio test of a nested pair of logistic fits, with the change
/// in AUROC, AUPRC and Brier score of the fitted probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
    pub delta_auroc: Option<f64>,
    pub delta_auprc: Option<f64>,
    pub delta_brier: f64,
}

pub fn lr_test(full: &LogisticFit, reduced: &LogisticFit) -> Result<LrTest> {
    if full.n != reduced.n || full.outcome != reduced.outcome {
        return Err(Error::InvalidArgument(
            "models were fitted on different observations".into(),
        ));
    }
    let full_names: std::collections::BTreeSet<&String> =
        full.coefficients.iter().map(|c| &c.name).collect();
    if !reduced.coefficients.iter().all(|c| full_names.contains(&c.name)) {
        return Err(Error::InvalidArgument("reduced model is not nested in the full model".into()));
    }
    if reduced.n_params > full.n_params {
        return Err(Error::InvalidArgument("reduced model has more parameters".into()));
    }
    let chi2 = (2.0 * (full.log_likelihood - reduced.log_likelihood)).max(0.0);
    let df = full.n_params - reduced.n_params;
    let p = dist::chi_squared_sf(chi2, df as f64);

    let auroc_f = metrics::binary_auc(&full.fitted, &full.outcome)?;
    let auroc_r = metrics::binary_auc(&reduced.fitted, &reduced.outcome)?;
    let auprc_f = metrics::auprc(&full.fitted, &full.outcome)?;
    let auprc_r = metrics::auprc(&reduced.fitted, &reduced.outcome)?;
    let brier_f = metrics::brier(&full.fitted, &full.outcome)?;
    let brier_r = metrics::brier(&reduced.fitted, &reduced.outcome)?;
    Ok(LrTest {
        chi2,
        df,
        p,
        delta_auroc: match (auroc_f, auroc_r) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        },
        delta_auprc: match (auprc_f, auprc_r) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        },
        delta_brier: brier_f - brier_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn simulate_logit(n: usize, b0: f64, b1: f64, seed: u64) -> (Vec<bool>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<bool> =
            x.iter().map(|&v| rng.random::<f64>() < sigmoid(b0 + b1 * v)).collect();
        (y, x)
    }

    #[test]
    fn intercept_only_balanced_outcome() {
        let y = [true, false, true, false, true, false];
        let fit = logistic_fit(&y, &[], false).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0].estimate, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn single_covariate_matches_grid_search_oracle() {
        let (y, x) = simulate_logit(400, -0.3, 1.1, 5);
        let fit = logistic_fit(&y, &[("x".into(), x.clone())], false).unwrap();
        let b_hat = fit.coefficients[1].estimate;
        let a_hat = fit.coefficients[0].estimate;

        // Coarse-to-fine grid maximization of the log-likelihood.
        let ll_of = |a: f64, b: f64| {
            let mu: Vec<f64> = x.iter().map(|&v| sigmoid(a + b * v)).collect();
            log_likelihood(&y, &mu)
        };
        let (mut a0, mut b0, mut half) = (0.0, 0.0, 4.0);
        for _ in 0..24 {
            let mut best = (f64::NEG_INFINITY, a0, b0);
            let steps = 20;
            for i in 0..=steps {
                for j in 0..=steps {
                    let a = a0 - half + 2.0 * half * i as f64 / steps as f64;
                    let b = b0 - half + 2.0 * half * j as f64 / steps as f64;
                    let ll = ll_of(a, b);
                    if ll > best.0 {
                        best = (ll, a, b);
                    }
                }
            }
            a0 = best.1;
            b0 = best.2;
            half /= 4.0;
            if half < 1e-7 {
                break;
            }
        }
        assert_abs_diff_eq!(b_hat, b0, epsilon = 1e-4);
        assert_abs_diff_eq!(a_hat, a0, epsilon = 1e-4);
    }

    #[test]
    fn score_equations_vanish_at_mle() {
        let (y, x) = simulate_logit(300, 0.2, -0.8, 9);
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let fit =
            logistic_fit(&y, &[("x".into(), x.clone()), ("x2".into(), x2.clone())], false).unwrap();
        let b = [fit.coefficients[0].estimate, fit.coefficients[1].estimate, fit.coefficients[2].estimate];
        let mut g = [0.0f64; 3];
        for i in 0..y.len() {
            let mu = sigmoid(b[0] + b[1] * x[i] + b[2] * x2[i]);
            let r = if y[i] { 1.0 - mu } else { -mu };
            g[0] += r;
            g[1] += r * x[i];
            g[2] += r * x2[i];
        }
        for v in g {
            assert!(v.abs() < 1e-6, "gradient component {v}");
        }
    }

    #[test]
    fn zero_column_dropped_without_changing_likelihood() {
        let (y, x) = simulate_logit(200, 0.0, 0.7, 3);
        let base = logistic_fit(&y, &[("x".into(), x.clone())], false).unwrap();
        let with_zero = logistic_fit(
            &y,
            &[("x".into(), x), ("zero".into(), vec![0.0; 200])],
            false,
        )
        .unwrap();
        assert_abs_diff_eq!(base.log_likelihood, with_zero.log_likelihood, epsilon = 1e-9);
        assert_eq!(with_zero.dropped, vec!["zero".to_string()]);
    }

    #[test]
    fn constant_covariate_rejected_as_collinear() {
        let y = [true, false, true, false];
        let err = logistic_fit(&y, &[("c".into(), vec![2.0; 4])], false).unwrap_err();
        assert!(matches!(err, Error::Collinear(_)), "{err}");
    }

    #[test]
    fn separation_flagged_as_divergence() {
        let y = [false, false, false, true, true, true];
        let x = vec![0.0, 0.1, 0.2, 0.8, 0.9, 1.0];
        let err = logistic_fit(&y, &[("x".into(), x)], false).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn standardized_or_is_per_sd() {
        let (y, x) = simulate_logit(500, 0.0, 0.9, 13);
        let raw = logistic_fit(&y, &[("x".into(), x.clone())], false).unwrap();
        let std = logistic_fit(&y, &[("x".into(), x.clone())], true).unwrap();
        assert!(std.coefficients[1].per_sd);
        // Standardized slope = raw slope * sd(x).
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let sd =
            (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64).sqrt();
        assert_abs_diff_eq!(
            std.coefficients[1].estimate,
            raw.coefficients[1].estimate * sd,
            epsilon = 1e-5
        );
    }

    #[test]
    fn lr_test_identical_models() {
        let (y, x) = simulate_logit(150, 0.1, 0.4, 21);
        let fit = logistic_fit(&y, &[("x".into(), x)], false).unwrap();
        let t = lr_test(&fit, &fit).unwrap();
        assert_eq!(t.chi2, 0.0);
        assert_eq!(t.df, 0);
        assert_eq!(t.p, 1.0);
    }

    #[test]
    fn lr_test_detects_informative_covariate() {
        let (y, x) = simulate_logit(600, -0.2, 1.5, 31);
        let full = logistic_fit(&y, &[("x".into(), x)], false).unwrap();
        let reduced = logistic_fit(&y, &[], false).unwrap();
        let t = lr_test(&full, &reduced).unwrap();
        assert_eq!(t.df, 1);
        assert!(t.chi2 > 20.0, "chi2 = {}", t.chi2);
        assert!(t.p < 0.001);
        assert!(t.delta_auroc.unwrap() > 0.0);
        assert!(t.delta_brier < 0.0);
    }
}
