//! Time-to-event analysis: Kaplan-Meier estimation, the log-rank test, Cox
//! proportional hazards with Breslow tie handling, concordance, risk
//! dichotomization, and covariate-adjusted survival curves.

mod concordance;
mod cox;
mod km;

pub use concordance::{
    average_fold_scores, cindex_bootstrap_folds, concordance_index, risk_dichotomize,
    DichotomizedRisk, FoldData, PooledBootstrap, SplitRule,
};
pub use cox::{
    cox_bootstrap, cox_fit, survival_design, AdjustedCurve, CoxBootstrap, CoxCoefficient, CoxFit,
};
pub use km::{kaplan_meier, logrank_test, KmCurve, LogRank};
