//! `survival`: concordance with bootstrap CI (plain or fold-pooled),
//! Kaplan-Meier risk-group curves, log-rank, univariable and multivariable
//! Cox models with bootstrap (default) or Wald inference, and adjusted
//! curves.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::{json, Value};
use triagebench_core::cohort::{load_survival, Covariate};
use triagebench_core::resample;
use triagebench_core::survival::{
    cindex_bootstrap_folds, concordance_index, cox_bootstrap, cox_fit, kaplan_meier,
    logrank_test, risk_dichotomize, survival_design, CoxFit, FoldData, KmCurve, SplitRule,
};

use crate::report::{fmt_f64, p_value_json, to_value, write_csv, Report, SectionError};

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    /// Survival CSV (case_id, time_months, event, risk_score, cov_*)
    #[arg(long)]
    pub input: PathBuf,
    /// Covariates for the multivariable model (names without the cov_ prefix)
    #[arg(long)]
    pub covariates: Option<String>,
    /// Risk-group cut; the sample median is used when absent
    #[arg(long)]
    pub cut: Option<f64>,
    /// Covariate holding the cross-validation fold id; enables within-fold
    /// bootstrap pooling for the C-index
    #[arg(long)]
    pub fold_covariate: Option<String>,
    /// Also report Wald inference next to the bootstrap intervals
    #[arg(long)]
    pub wald: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn km_csv(out: &std::path::Path, name: &str, curve: &KmCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .event_times
        .iter()
        .zip(&curve.survival)
        .zip(&curve.at_risk)
        .map(|((t, s), r)| vec![fmt_f64(*t), fmt_f64(*s), r.to_string()])
        .collect();
    write_csv(out, name, &["time", "survival", "at_risk"], &rows)?;
    Ok(())
}

fn cox_json(fit: &CoxFit, boots: Option<&[triagebench_core::survival::CoxBootstrap]>, wald: bool) -> Value {
    let coefficients: Vec<Value> = fit
        .coefficients
        .iter()
        .map(|c| {
            let boot = boots.and_then(|b| b.iter().find(|x| x.name == c.name));
            json!({
                "name": c.name,
                "beta": c.beta,
                "hazard_ratio": c.hazard_ratio,
                "bootstrap": boot.map(|b| json!({
                    "lo": b.lo,
                    "hi": b.hi,
                    "p": p_value_json(b.p),
                    "n_degenerate": b.n_degenerate,
                })),
                "wald": wald.then(|| json!({
                    "se": c.se,
                    "ci": {"lo": c.ci.0, "hi": c.ci.1},
                    "p": p_value_json(c.p),
                })),
            })
        })
        .collect();
    json!({
        "ties": "breslow",
        "coefficients": coefficients,
        "log_partial_likelihood": fit.log_partial_likelihood,
        "n": fit.n,
        "n_events": fit.n_events,
    })
}

pub fn run(args: &SurvivalArgs) -> Result<Report> {
    let seed = super::resolve_seed(args.seed);
    let records = load_survival(&args.input)?;
    let cfg = super::bootstrap_config(seed, args.resamples, args.level);
    let covariate_names: Vec<String> = args
        .covariates
        .as_ref()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
        .unwrap_or_default();

    let mut report = Report::new(
        "survival",
        json!({
            "input": args.input,
            "covariates": covariate_names,
            "cut": args.cut,
            "fold_covariate": args.fold_covariate,
            "wald": args.wald,
            "seed": seed,
            "resamples": args.resamples,
            "level": args.level,
            "out": args.out,
            "risk_group_rule": args.cut.map_or_else(|| "median".to_string(), |c| format!("cut={c}")),
        }),
    );
    report.insert("n_cases", records.len());
    report.insert("n_events", records.iter().filter(|r| r.event).count());

    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    let risk: Option<Vec<f64>> = records.iter().map(|r| r.risk_score).collect();

    let Some(risk) = risk else {
        report.errors.push(SectionError {
            section: "risk_score".into(),
            message: "some records lack a risk_score; model-based sections skipped".into(),
        });
        return Ok(report);
    };

    // Discrimination.
    let cindex_section: Result<Value> = (|| {
        let point = concordance_index(&risk, &times, &events)?;
        match &args.fold_covariate {
            Some(fold_cov) => {
                let mut folds: BTreeMap<String, FoldData> = BTreeMap::new();
                for (i, r) in records.iter().enumerate() {
                    let key = match r.covariates.get(fold_cov) {
                        Some(Covariate::Category(c)) => c.clone(),
                        Some(Covariate::Numeric(v)) => format!("{v}"),
                        None => anyhow::bail!("case '{}' lacks fold covariate", r.case_id),
                    };
                    let fold = folds.entry(key).or_insert_with(|| FoldData {
                        risk: Vec::new(),
                        times: Vec::new(),
                        events: Vec::new(),
                    });
                    fold.risk.push(risk[i]);
                    fold.times.push(times[i]);
                    fold.events.push(events[i]);
                }
                let folds: Vec<FoldData> = folds.into_values().collect();
                let pooled = cindex_bootstrap_folds(&folds, cfg.n_resamples, &cfg)?;
                Ok(json!({
                    "c_index": point,
                    "fold_mean": pooled.point,
                    "ci": {"lo": pooled.lo, "hi": pooled.hi},
                    "n_folds": folds.len(),
                    "n_resamples": pooled.n_resamples,
                    "n_degenerate": pooled.n_degenerate,
                }))
            }
            None => {
                let idx_data: Vec<usize> = (0..risk.len()).collect();
                let boot = resample::bootstrap_ci(
                    &idx_data,
                    |idx, _| {
                        let r: Vec<f64> = idx.iter().map(|&i| risk[i]).collect();
                        let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
                        let e: Vec<bool> = idx.iter().map(|&i| events[i]).collect();
                        concordance_index(&r, &t, &e).ok()
                    },
                    cfg.n_resamples,
                    cfg.seed,
                    cfg.level,
                )?;
                Ok(json!({
                    "c_index": point,
                    "ci": {"lo": boot.lo, "hi": boot.hi},
                    "n_resamples": boot.n_resamples,
                    "n_degenerate": boot.n_degenerate,
                }))
            }
        }
    })();
    report.section("concordance", cindex_section);

    // Risk groups, KM curves, log-rank.
    let rule = args.cut.map_or(SplitRule::Median, SplitRule::Cut);
    let split = risk_dichotomize(&risk, rule)?;
    report.insert(
        "risk_groups",
        json!({
            "cut": split.cut,
            "rule": to_value(split.rule),
            "n_high": split.high.iter().filter(|&&h| h).count(),
            "n_low": split.high.iter().filter(|&&h| !h).count(),
        }),
    );
    let take = |want_high: bool| -> (Vec<f64>, Vec<bool>) {
        let t = times
            .iter()
            .zip(&split.high)
            .filter(|(_, &h)| h == want_high)
            .map(|(&t, _)| t)
            .collect();
        let e = events
            .iter()
            .zip(&split.high)
            .filter(|(_, &h)| h == want_high)
            .map(|(&e, _)| e)
            .collect();
        (t, e)
    };
    let (high_t, high_e) = take(true);
    let (low_t, low_e) = take(false);

    let km_section: Result<Value> = (|| {
        let high_curve = kaplan_meier(&high_t, &high_e)?;
        let low_curve = kaplan_meier(&low_t, &low_e)?;
        km_csv(&args.out, "km_high_risk", &high_curve)?;
        km_csv(&args.out, "km_low_risk", &low_curve)?;
        let lr = logrank_test(&high_t, &high_e, &low_t, &low_e)?;
        Ok(json!({
            "high": {"n": high_t.len(), "steps": high_curve.event_times.len()},
            "low": {"n": low_t.len(), "steps": low_curve.event_times.len()},
            "logrank": {"chi2": lr.chi2, "p": p_value_json(lr.p)},
        }))
    })();
    report.section("kaplan_meier", km_section);

    // Cox models on the risk group plus covariates.
    let group_col: Vec<f64> = split.high.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect();
    let design = survival_design(&records, &covariate_names)?;

    let uni_section: Result<Value> = (|| {
        let single = |name: &str, col: &[f64]| -> Result<Value> {
            let covs = vec![(name.to_string(), col.to_vec())];
            let fit = cox_fit(&times, &events, &covs)?;
            let boots = cox_bootstrap(&times, &events, &covs, &cfg)?;
            Ok(json!({
                "covariate": name,
                "model": cox_json(&fit, Some(&boots), args.wald),
            }))
        };
        let mut rows = vec![single("risk_group_high", &group_col)?];
        for (name, col) in &design {
            match single(name, col) {
                Ok(row) => rows.push(row),
                Err(e) => rows.push(json!({"covariate": name, "error": e.to_string()})),
            }
        }
        Ok(Value::Array(rows))
    })();
    report.section("cox_univariable", uni_section);

    let multi_section: Result<Value> = (|| {
        let mut covs = vec![("risk_group_high".to_string(), group_col.clone())];
        covs.extend(design.iter().cloned());
        let fit = cox_fit(&times, &events, &covs)?;
        let boots = cox_bootstrap(&times, &events, &covs, &cfg)?;

        // Direct-adjustment curves for the risk group.
        let curves = fit.adjusted_curves(&covs, "risk_group_high", &[0.0, 1.0])?;
        let mut rows = Vec::new();
        for curve in &curves {
            for &(t, s) in &curve.survival {
                rows.push(vec![
                    if curve.level > 0.5 { "high" } else { "low" }.to_string(),
                    fmt_f64(t),
                    fmt_f64(s),
                ]);
            }
        }
        write_csv(&args.out, "adjusted_curves", &["risk_group", "time", "survival"], &rows)?;
        Ok(cox_json(&fit, Some(&boots), args.wald))
    })();
    report.section("cox_multivariable", multi_section);

    Ok(report)
}
