//! Generalized estimating equations with an exchangeable working
//! correlation, moment-estimated each iteration, and robust sandwich
//! standard errors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dist;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeeLink {
    /// Binomial variance; effects read as odds ratios.
    Logit,
    /// Constant variance on the original scale; effects read as ratios
    /// (used for reading time).
    Log,
    /// Gaussian; effects read as mean differences.
    Identity,
}

impl GeeLink {
    fn mean(&self, eta: f64) -> f64 {
        match self {
            GeeLink::Logit => 1.0 / (1.0 + (-eta).exp()),
            GeeLink::Log => eta.exp(),
            GeeLink::Identity => eta,
        }
    }

    fn dmu_deta(&self, eta: f64) -> f64 {
        match self {
            GeeLink::Logit => {
                let m = self.mean(eta);
                (m * (1.0 - m)).max(1e-10)
            }
            GeeLink::Log => eta.exp().max(1e-10),
            GeeLink::Identity => 1.0,
        }
    }

    fn variance(&self, mu: f64) -> f64 {
        match self {
            GeeLink::Logit => (mu.clamp(1e-10, 1.0 - 1e-10) * (1.0 - mu.clamp(1e-10, 1.0 - 1e-10)))
                .max(1e-10),
            GeeLink::Log | GeeLink::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeeOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Pin the working correlation instead of estimating it.
    pub force_alpha: Option<f64>,
}

impl Default for GeeOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-8, force_alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeeCoefficient {
    pub name: String,
    pub estimate: f64,
    pub robust_se: f64,
    /// exp(beta) under logit/log links, beta itself under identity.
    pub effect: f64,
    /// Wald CI on the effect scale.
    pub ci: (f64, f64),
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeeFit {
    pub link: GeeLink,
    pub coefficients: Vec<GeeCoefficient>,
    /// Exchangeable working correlation.
    pub alpha: f64,
    /// Dispersion (Pearson residual scale).
    pub phi: f64,
    pub n_clusters: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
}

struct ClusterView {
    rows: Vec<usize>,
}

/// Fit marginal-model coefficients by iteratively reweighted estimating
/// equations. Non-convergence within `max_iter` returns a fit flagged
/// `converged = false` carrying the last iterate rather than an error.
pub fn gee_fit(
    y: &[f64],
    covariates: &[(String, Vec<f64>)],
    clusters: &[String],
    link: GeeLink,
    opts: &GeeOptions,
) -> Result<GeeFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("no observations".into()));
    }
    if clusters.len() != n {
        return Err(Error::LengthMismatch("clusters vs observations".into()));
    }
    for (name, col) in covariates {
        if col.len() != n {
            return Err(Error::LengthMismatch(format!("covariate '{name}'")));
        }
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(Error::Collinear(format!(
                "covariate '{name}' is constant; its effect is inestimable"
            )));
        }
    }
    if matches!(link, GeeLink::Logit) && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument("logit link requires a 0/1 outcome".into()));
    }
    if matches!(link, GeeLink::Log) && y.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("log link requires a positive outcome".into()));
    }

    // Group rows by cluster id, preserving first-seen order.
    let mut cluster_ids: Vec<String> = Vec::new();
    let mut groups: Vec<ClusterView> = Vec::new();
    for (i, id) in clusters.iter().enumerate() {
        match cluster_ids.iter().position(|c| c == id) {
            Some(k) => groups[k].rows.push(i),
            None => {
                cluster_ids.push(id.clone());
                groups.push(ClusterView { rows: vec![i] });
            }
        }
    }
    let n_clusters = groups.len();
    if n_clusters < 2 {
        return Err(Error::Degenerate("GEE needs at least 2 clusters".into()));
    }
    let max_cluster = groups.iter().map(|g| g.rows.len()).max().unwrap();

    let p = covariates.len() + 1;
    let mut x = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (j, (_, col)) in covariates.iter().enumerate() {
            x[(i, j + 1)] = col[i];
        }
    }
    let yv = DVector::<f64>::from_column_slice(y);

    // Initial coefficients: least squares on the link-transformed outcome.
    let z: DVector<f64> = match link {
        GeeLink::Identity => yv.clone(),
        GeeLink::Log => yv.map(|v| v.max(1e-10).ln()),
        GeeLink::Logit => yv.map(|v| (v.clamp(0.02, 0.98) / (1.0 - v.clamp(0.02, 0.98))).ln()),
    };
    let xtx = x.transpose() * &x;
    let xtz = x.transpose() * &z;
    let mut beta = xtx
        .clone()
        .cholesky()
        .map(|c| c.solve(&xtz))
        .or_else(|| xtx.lu().solve(&xtz))
        .ok_or_else(|| Error::Collinear("singular design matrix".into()))?;

    let mut alpha = 0.0f64;
    let mut phi = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let eta = &x * &beta;
        let mu: Vec<f64> = eta.iter().map(|&e| link.mean(e)).collect();

        // Standardized residuals, dispersion, and the moment estimate of alpha.
        let std_resid: Vec<f64> = (0..n)
            .map(|i| (y[i] - mu[i]) / link.variance(mu[i]).sqrt())
            .collect();
        let ss: f64 = std_resid.iter().map(|e| e * e).sum();
        phi = ss / (n as f64 - p as f64).max(1.0);
        alpha = match opts.force_alpha {
            Some(a) => a,
            None => {
                let mut cross = 0.0;
                let mut pairs = 0.0;
                for g in &groups {
                    let m = g.rows.len();
                    if m < 2 {
                        continue;
                    }
                    let sum: f64 = g.rows.iter().map(|&i| std_resid[i]).sum();
                    let sumsq: f64 = g.rows.iter().map(|&i| std_resid[i] * std_resid[i]).sum();
                    cross += (sum * sum - sumsq) / 2.0;
                    pairs += (m * (m - 1)) as f64 / 2.0;
                }
                let denom = (pairs - p as f64).max(1.0) * phi.max(1e-12);
                if pairs == 0.0 {
                    0.0
                } else {
                    (cross / denom).clamp(-1.0 / (max_cluster as f64 - 1.0).max(1.0) + 1e-3, 0.99)
                }
            }
        };

        // Estimating-equation update with the exchangeable inverse in closed
        // form: R^-1 = (I - alpha/(1+(m-1)alpha) J) / (1-alpha).
        let mut m_mat = DMatrix::<f64>::zeros(p, p);
        let mut u = DVector::<f64>::zeros(p);
        for g in &groups {
            let m = g.rows.len();
            let mut d = DMatrix::<f64>::zeros(m, p); // A^-1/2_var * dmu/deta * X
            let mut r = DVector::<f64>::zeros(m); // A^-1/2_var * (y - mu)
            for (local, &i) in g.rows.iter().enumerate() {
                let s = link.variance(mu[i]).sqrt();
                let grad = link.dmu_deta(eta[i]);
                for a in 0..p {
                    d[(local, a)] = grad * x[(i, a)] / s;
                }
                r[local] = (y[i] - mu[i]) / s;
            }
            // Apply R^-1 to the residual and to each design column.
            let shrink = alpha / (1.0 + (m as f64 - 1.0) * alpha);
            let scale = 1.0 / (1.0 - alpha);
            let rinv_vec = |v: &DVector<f64>| -> DVector<f64> {
                let s: f64 = v.sum();
                v.map(move |vi| scale * (vi - shrink * s))
            };
            let rr = rinv_vec(&r);
            let mut rd = DMatrix::<f64>::zeros(m, p);
            for a in 0..p {
                let col = DVector::from_iterator(m, d.column(a).iter().copied());
                let rc = rinv_vec(&col);
                for local in 0..m {
                    rd[(local, a)] = rc[local];
                }
            }
            m_mat += d.transpose() * &rd;
            u += d.transpose() * rr;
        }
        let step = m_mat
            .clone()
            .cholesky()
            .map(|c| c.solve(&u))
            .or_else(|| m_mat.clone().lu().solve(&u))
            .ok_or_else(|| Error::Collinear("singular estimating-equation system".into()))?;
        beta += &step;
        if step.amax() < opts.tol {
            converged = true;
            break;
        }
    }

    // Robust sandwich covariance at the final iterate.
    let eta = &x * &beta;
    let mu: Vec<f64> = eta.iter().map(|&e| link.mean(e)).collect();
    let mut bread = DMatrix::<f64>::zeros(p, p);
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for g in &groups {
        let m = g.rows.len();
        let mut d = DMatrix::<f64>::zeros(m, p);
        let mut r = DVector::<f64>::zeros(m);
        for (local, &i) in g.rows.iter().enumerate() {
            let s = link.variance(mu[i]).sqrt();
            let grad = link.dmu_deta(eta[i]);
            for a in 0..p {
                d[(local, a)] = grad * x[(i, a)] / s;
            }
            r[local] = (y[i] - mu[i]) / s;
        }
        let shrink = alpha / (1.0 + (m as f64 - 1.0) * alpha);
        let scale = 1.0 / (1.0 - alpha);
        let rinv_vec = |v: &DVector<f64>| -> DVector<f64> {
            let s: f64 = v.sum();
            v.map(move |vi| scale * (vi - shrink * s))
        };
        let rr = rinv_vec(&r);
        let mut rd = DMatrix::<f64>::zeros(m, p);
        for a in 0..p {
            let col = DVector::from_iterator(m, d.column(a).iter().copied());
            let rc = rinv_vec(&col);
            for local in 0..m {
                rd[(local, a)] = rc[local];
            }
        }
        bread += d.transpose() * &rd;
        let score = d.transpose() * rr;
        meat += &score * score.transpose();
    }
    let bread_inv = bread
        .try_inverse()
        .ok_or_else(|| Error::Collinear("singular bread matrix in sandwich".into()))?;
    let cov = &bread_inv * meat * bread_inv.transpose();

    let zq = dist::normal_quantile(0.975);
    let names: Vec<String> = std::iter::once("intercept".to_string())
        .chain(covariates.iter().map(|(n, _)| n.clone()))
        .collect();
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let se = cov[(j, j)].max(0.0).sqrt();
            let (effect, ci) = match link {
                GeeLink::Logit | GeeLink::Log => {
                    (estimate.exp(), ((estimate - zq * se).exp(), (estimate + zq * se).exp()))
                }
                GeeLink::Identity => (estimate, (estimate - zq * se, estimate + zq * se)),
            };
            let p = if se > 0.0 { dist::normal_two_sided(estimate / se) } else { f64::NAN };
            GeeCoefficient { name: name.clone(), estimate, robust_se: se, effect, ci, p }
        })
        .collect();

    Ok(GeeFit {
        link,
        coefficients,
        alpha,
        phi,
        n_clusters,
        n_obs: n,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::logistic::logistic_fit;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn singleton_clusters_match_glm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 300;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<bool> = x
            .iter()
            .map(|&v| rng.random::<f64>() < 1.0 / (1.0 + (-(-0.4 + 1.2 * v)).exp()))
            .collect();
        let yf: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let clusters: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();

        let gee = gee_fit(
            &yf,
            &[("x".into(), x.clone())],
            &clusters,
            GeeLink::Logit,
            &GeeOptions::default(),
        )
        .unwrap();
        assert!(gee.converged);
        // No intra-cluster pairs exist, so alpha must be 0.
        assert_eq!(gee.alpha, 0.0);

        let glm = logistic_fit(&y, &[("x".into(), x)], false).unwrap();
        assert_abs_diff_eq!(
            gee.coefficients[0].estimate,
            glm.coefficients[0].estimate,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            gee.coefficients[1].estimate,
            glm.coefficients[1].estimate,
            epsilon = 1e-6
        );
    }

    #[test]
    fn identity_link_with_alpha_zero_matches_ols() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 120;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let y: Vec<f64> =
            x.iter().map(|&v| 2.0 + 0.5 * v + rng.random::<f64>() - 0.5).collect();
        let clusters: Vec<String> = (0..n).map(|i| format!("g{}", i % 10)).collect();
        let opts = GeeOptions { force_alpha: Some(0.0), ..Default::default() };
        let fit =
            gee_fit(&y, &[("x".into(), x.clone())], &clusters, GeeLink::Identity, &opts).unwrap();

        // Closed-form OLS.
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        assert_abs_diff_eq!(fit.coefficients[1].estimate, slope, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.coefficients[0].estimate, intercept, epsilon = 1e-8);
    }

    #[test]
    fn constant_covariate_is_inestimable() {
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let clusters: Vec<String> = vec!["a".into(), "a".into(), "b".into(), "b".into()];
        let err = gee_fit(
            &y,
            &[("flag".into(), vec![1.0; 4])],
            &clusters,
            GeeLink::Logit,
            &GeeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Collinear(_)));
    }

    #[test]
    fn single_cluster_rejected() {
        let y = vec![1.0, 0.0, 1.0];
        let clusters: Vec<String> = vec!["a".into(); 3];
        assert!(gee_fit(&y, &[], &clusters, GeeLink::Logit, &GeeOptions::default()).is_err());
    }

    #[test]
    fn exchangeable_alpha_recovered_on_correlated_gaussian_data() {
        // Random cluster intercepts induce exchangeable correlation
        // rho = s_b^2 / (s_b^2 + s_e^2) = 0.5 here.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mut normal = {
            let mut r = rng.clone();
            move || {
                let u1: f64 = r.random::<f64>().max(1e-12);
                let u2: f64 = r.random::<f64>();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
        };
        let clusters_n = 60;
        let per = 8;
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut cl = Vec::new();
        for c in 0..clusters_n {
            let b = normal();
            for _ in 0..per {
                let xi = rng.random::<f64>() * 2.0 - 1.0;
                y.push(1.0 + 0.8 * xi + b + normal());
                x.push(xi);
                cl.push(format!("c{c}"));
            }
        }
        let fit =
            gee_fit(&y, &[("x".into(), x)], &cl, GeeLink::Identity, &GeeOptions::default())
                .unwrap();
        assert!(fit.converged);
        assert!((fit.alpha - 0.5).abs() < 0.1, "alpha = {}", fit.alpha);
        assert_abs_diff_eq!(fit.coefficients[1].estimate, 0.8, epsilon = 0.05);
    }

    #[test]
    fn log_link_time_ratio_direction() {
        // Condition halves reading time within every cluster.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut y = Vec::new();
        let mut cond = Vec::new();
        let mut cl = Vec::new();
        for c in 0..8 {
            let base = 60.0 + 10.0 * c as f64;
            for i in 0..40 {
                let with_ai = i % 2 == 0;
                let noise = 0.9 + 0.2 * rng.random::<f64>();
                y.push(base * if with_ai { 0.5 } else { 1.0 } * noise);
                cond.push(if with_ai { 1.0 } else { 0.0 });
                cl.push(format!("r{c}"));
            }
        }
        let fit = gee_fit(
            &y,
            &[("with_ai".into(), cond)],
            &cl,
            GeeLink::Log,
            &GeeOptions::default(),
        )
        .unwrap();
        let tr = fit.coefficients[1].effect;
        assert!((tr - 0.5).abs() < 0.03, "time ratio = {tr}");
        assert!(fit.coefficients[1].ci.1 < 1.0);
    }
}
