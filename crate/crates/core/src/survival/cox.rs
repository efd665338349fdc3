//! Cox proportional hazards regression on the Breslow partial likelihood,
//! with the Breslow baseline cumulative hazard, Wald and bootstrap
//! inference, and direct-adjustment survival curves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cohort::{Covariate, SurvivalRecord};
use crate::error::{Error, Result};
use crate::inference::dist;
use crate::resample;

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
const BETA_BOUND: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxCoefficient {
    pub name: String,
    pub beta: f64,
    pub hazard_ratio: f64,
    pub se: f64,
    /// Wald CI on the hazard-ratio scale.
    pub ci: (f64, f64),
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub coefficients: Vec<CoxCoefficient>,
    pub log_partial_likelihood: f64,
    /// Breslow cumulative baseline hazard steps (time, H0(time)), non-decreasing.
    pub baseline_cumhaz: Vec<(f64, f64)>,
    pub n: usize,
    pub n_events: usize,
    pub iterations: usize,
    /// Covariate names in design order, for prediction.
    pub names: Vec<String>,
}

impl CoxFit {
    pub fn betas(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.beta).collect()
    }

    /// Direct-adjustment survival curves: for each level of `group`, force
    /// every subject's group value to that level, average the implied
    /// individual survival curves S_i(t) = exp(-H0(t) e^eta_i), and report
    /// the average at each baseline step time.
    pub fn adjusted_curves(
        &self,
        covariates: &[(String, Vec<f64>)],
        group: &str,
        levels: &[f64],
    ) -> Result<Vec<AdjustedCurve>> {
        let group_idx = self
            .names
            .iter()
            .position(|n| n == group)
            .ok_or_else(|| Error::InvalidArgument(format!("model has no covariate '{group}'")))?;
        if covariates.len() != self.names.len() {
            return Err(Error::LengthMismatch("covariate columns vs fitted model".into()));
        }
        let n = covariates
            .first()
            .map(|(_, c)| c.len())
            .ok_or_else(|| Error::Empty("no covariates".into()))?;
        let betas = self.betas();
        let mut curves = Vec::with_capacity(levels.len());
        for &level in levels {
            let mut survival = Vec::with_capacity(self.baseline_cumhaz.len());
            // Per-subject linear predictor with the group forced to `level`.
            let etas: Vec<f64> = (0..n)
                .map(|i| {
                    self.names
                        .iter()
                        .enumerate()
                        .map(|(j, _)| {
                            let x = if j == group_idx { level } else { covariates[j].1[i] };
                            betas[j] * x
                        })
                        .sum::<f64>()
                })
                .collect();
            for &(t, h0) in &self.baseline_cumhaz {
                let s =
                    etas.iter().map(|&e| (-h0 * e.exp()).exp()).sum::<f64>() / n as f64;
                survival.push((t, s));
            }
            curves.push(AdjustedCurve { level, survival });
        }
        Ok(curves)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedCurve {
    pub level: f64,
    /// (time, adjusted survival) steps.
    pub survival: Vec<(f64, f64)>,
}

/// Numeric design columns from survival records: numeric covariates pass
/// through; categorical covariates expand into dummy columns against the
/// first (sorted) level.
pub fn survival_design(
    records: &[SurvivalRecord],
    names: &[String],
) -> Result<Vec<(String, Vec<f64>)>> {
    let mut columns = Vec::new();
    for name in names {
        let mut numeric = Vec::with_capacity(records.len());
        let mut categories: Vec<Option<&String>> = Vec::with_capacity(records.len());
        let mut any_category = false;
        for r in records {
            match r.covariates.get(name) {
                Some(Covariate::Numeric(v)) => {
                    numeric.push(*v);
                    categories.push(None);
                }
                Some(Covariate::Category(c)) => {
                    any_category = true;
                    numeric.push(f64::NAN);
                    categories.push(Some(c));
                }
                None => {
                    return Err(Error::Record {
                        row: 0,
                        message: format!("case '{}' lacks covariate '{name}'", r.case_id),
                    })
                }
            }
        }
        if any_category {
            if categories.iter().any(|c| c.is_none()) {
                return Err(Error::Schema(format!(
                    "covariate '{name}' mixes numeric and categorical values"
                )));
            }
            let mut levels: Vec<&String> = categories.iter().map(|c| c.unwrap()).collect();
            levels.sort();
            levels.dedup();
            for level in levels.iter().skip(1) {
                let col: Vec<f64> = categories
                    .iter()
                    .map(|c| if c.unwrap() == *level { 1.0 } else { 0.0 })
                    .collect();
                columns.push((format!("{name}_{level}"), col));
            }
        } else {
            columns.push((name.clone(), numeric));
        }
    }
    Ok(columns)
}

struct PartialLikelihood<'a> {
    x: &'a DMatrix<f64>,
    // Indices sorted by time descending; groups of equal times are contiguous.
    order_desc: Vec<usize>,
    times: &'a [f64],
    events: &'a [bool],
}

/// (log partial likelihood, gradient, information, baseline hazard steps).
type Evaluation = (f64, DVector<f64>, DMatrix<f64>, Vec<(f64, f64)>);

impl PartialLikelihood<'_> {
    /// Breslow log partial likelihood, gradient, and information at `beta`.
    /// Also returns the baseline hazard steps when `with_baseline`.
    fn evaluate(&self, beta: &DVector<f64>, with_derivs: bool, with_baseline: bool) -> Evaluation {
        let p = beta.len();
        let n = self.order_desc.len();
        let eta: Vec<f64> = (0..n)
            .map(|i| (0..p).map(|a| self.x[(i, a)] * beta[a]).sum())
            .collect();
        let mut ll = 0.0;
        let mut grad = DVector::<f64>::zeros(p);
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut baseline = Vec::new();

        let mut s0 = 0.0f64;
        let mut s1 = DVector::<f64>::zeros(p);
        let mut s2 = DMatrix::<f64>::zeros(p, p);
        let mut k = 0usize;
        while k < n {
            let t = self.times[self.order_desc[k]];
            // Everyone with this time enters the risk set first.
            let group_start = k;
            while k < n && self.times[self.order_desc[k]] == t {
                let i = self.order_desc[k];
                let w = eta[i].exp();
                s0 += w;
                for a in 0..p {
                    s1[a] += w * self.x[(i, a)];
                    if with_derivs {
                        for b in a..p {
                            s2[(a, b)] += w * self.x[(i, a)] * self.x[(i, b)];
                        }
                    }
                }
                k += 1;
            }
            // Then the deaths at this time contribute.
            let deaths: Vec<usize> = self.order_desc[group_start..k]
                .iter()
                .copied()
                .filter(|&i| self.events[i])
                .collect();
            if deaths.is_empty() {
                continue;
            }
            let d = deaths.len() as f64;
            for &i in &deaths {
                ll += eta[i];
            }
            ll -= d * s0.ln();
            if with_derivs {
                for a in 0..p {
                    let mean_a = s1[a] / s0;
                    let death_sum_a: f64 = deaths.iter().map(|&i| self.x[(i, a)]).sum();
                    grad[a] += death_sum_a - d * mean_a;
                    for b in a..p {
                        let mean_b = s1[b] / s0;
                        info[(a, b)] += d * (s2[(a, b)] / s0 - mean_a * mean_b);
                    }
                }
            }
            if with_baseline {
                baseline.push((t, d / s0));
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
                s2[(a, b)] = s2[(b, a)];
            }
        }
        if with_baseline {
            // Collected in descending time order; flip and accumulate.
            baseline.reverse();
            let mut acc = 0.0;
            for step in &mut baseline {
                acc += step.1;
                step.1 = acc;
            }
        }
        (ll, grad, info, baseline)
    }
}

/// Fit a Cox model by Newton-Raphson on the Breslow partial likelihood.
/// Errors on zero events, constant covariates, or monotone-likelihood
/// divergence.
pub fn cox_fit(
    times: &[f64],
    events: &[bool],
    covariates: &[(String, Vec<f64>)],
) -> Result<CoxFit> {
    let n = times.len();
    if n == 0 || events.len() != n {
        return Err(Error::Empty("no survival records".into()));
    }
    let n_events = events.iter().filter(|&&e| e).count();
    if n_events == 0 {
        return Err(Error::Degenerate("no events observed; model inestimable".into()));
    }
    if covariates.is_empty() {
        return Err(Error::InvalidArgument("no covariates supplied".into()));
    }
    for (name, col) in covariates {
        if col.len() != n {
            return Err(Error::LengthMismatch(format!("covariate '{name}'")));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("covariate '{name}' not finite")));
        }
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::Collinear(format!("covariate '{name}' is constant")));
        }
    }

    let p = covariates.len();
    let mut x = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for (j, (_, col)) in covariates.iter().enumerate() {
            x[(i, j)] = col[i];
        }
    }
    let mut order_desc: Vec<usize> = (0..n).collect();
    order_desc.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).unwrap());
    let pl = PartialLikelihood { x: &x, order_desc, times, events };

    let mut beta = DVector::<f64>::zeros(p);
    let (mut ll, _, _, _) = pl.evaluate(&beta, false, false);
    let mut iterations = 0;
    let mut converged = false;
    let mut info = DMatrix::<f64>::zeros(p, p);

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let (_, grad, information, _) = pl.evaluate(&beta, true, false);
        info = information;
        if grad.amax() < GRAD_TOL {
            converged = true;
            break;
        }
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .or_else(|| info.clone().lu().solve(&grad))
            .ok_or_else(|| Error::Collinear("singular information matrix".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * lambda;
            let (cll, _, _, _) = pl.evaluate(&candidate, false, false);
            if cll >= ll - 1e-12 {
                beta = candidate;
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
            return Err(Error::Divergence { context: "cox".into(), iterations });
        }
    }
    if !converged {
        let (_, grad, _, _) = pl.evaluate(&beta, true, false);
        if grad.amax() >= GRAD_TOL {
            return Err(Error::Divergence { context: "cox".into(), iterations });
        }
    }

    let (_, _, _, baseline_cumhaz) = pl.evaluate(&beta, false, true);
    let cov = info
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Collinear("singular information at the optimum".into()))?;
    let z = dist::normal_quantile(0.975);
    let coefficients = covariates
        .iter()
        .enumerate()
        .map(|(j, (name, _))| {
            let b = beta[j];
            let se = cov[(j, j)].max(0.0).sqrt();
            CoxCoefficient {
                name: name.clone(),
                beta: b,
                hazard_ratio: b.exp(),
                se,
                ci: ((b - z * se).exp(), (b + z * se).exp()),
                p: if se > 0.0 { dist::normal_two_sided(b / se) } else { f64::NAN },
            }
        })
        .collect();

    Ok(CoxFit {
        coefficients,
        log_partial_likelihood: ll,
        baseline_cumhaz,
        n,
        n_events,
        iterations,
        names: covariates.iter().map(|(n, _)| n.clone()).collect(),
    })
}

/// Case-resampled bootstrap inference for every coefficient: percentile CI
/// of the hazard ratio and a two-sided zero-crossing p-value on the log
/// hazard scale. Replicates whose refit fails are dropped and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxBootstrap {
    pub name: String,
    pub hazard_ratio: f64,
    pub lo: f64,
    pub hi: f64,
    pub p: f64,
    pub n_resamples: usize,
    pub n_degenerate: usize,
}

pub fn cox_bootstrap(
    times: &[f64],
    events: &[bool],
    covariates: &[(String, Vec<f64>)],
    cfg: &resample::BootstrapConfig,
) -> Result<Vec<CoxBootstrap>> {
    let point = cox_fit(times, events, covariates)?;
    let n = times.len();
    let p = covariates.len();

    let betas_of = |idx: &[usize]| -> Option<Vec<f64>> {
        let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
        let e: Vec<bool> = idx.iter().map(|&i| events[i]).collect();
        let covs: Vec<(String, Vec<f64>)> = covariates
            .iter()
            .map(|(name, col)| (name.clone(), idx.iter().map(|&i| col[i]).collect()))
            .collect();
        cox_fit(&t, &e, &covs).ok().map(|f| f.betas())
    };
    let replicate_betas = resample::replicate_statistics_vec(n, cfg.n_resamples, cfg.seed, betas_of);

    let mut out = Vec::with_capacity(p);
    for (j, coef) in point.coefficients.iter().enumerate() {
        let defined: Vec<f64> =
            replicate_betas.iter().filter_map(|r| r.as_ref().map(|v| v[j])).collect();
        if defined.is_empty() {
            return Err(Error::Degenerate("every bootstrap refit failed".into()));
        }
        let mut hr: Vec<f64> = defined.iter().map(|b| b.exp()).collect();
        hr.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let alpha = 1.0 - cfg.level;
        out.push(CoxBootstrap {
            name: coef.name.clone(),
            hazard_ratio: coef.hazard_ratio,
            lo: resample::quantile_sorted(&hr, alpha / 2.0),
            hi: resample::quantile_sorted(&hr, 1.0 - alpha / 2.0),
            p: resample::zero_crossing_pvalue(&defined, cfg.n_resamples),
            n_resamples: cfg.n_resamples,
            n_degenerate: cfg.n_resamples - defined.len(),
        });
    }
    Ok(out)
}
