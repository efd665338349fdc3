//! Hypothesis tests, agreement statistics, correlation and trend analysis,
//! logistic regression with likelihood-ratio testing, and GEE for clustered
//! reader data.

mod agreement;
mod correlation;
pub(crate) mod dist;
mod gee;
mod logistic;
mod nonparam;
mod ranking;
mod reader;
mod shift;

pub use agreement::{
    bootstrap_kappa_difference, cohen_kappa, cohen_kappa_from_counts, fleiss_kappa,
    AgreementBand, KappaDifference, KappaResult,
};
pub use correlation::{binned_trend, pearson, spearman, BinnedTrend, TrendBin};
pub use gee::{gee_fit, GeeCoefficient, GeeFit, GeeLink, GeeOptions};
pub use logistic::{logistic_fit, lr_test, CoefficientEstimate, LogisticFit, LrTest};
pub use nonparam::{ks_two_sample, mcnemar, wilcoxon_signed_rank_one_sided, KsResult, McNemarMode};
pub use ranking::model_mean_rank;
pub use reader::{
    decision_trajectory, fleiss_matrix, infer_truth, kappa_with_delta, reader_condition_gee,
    sequence_effect, summarize_readers, ConditionKappas, GeeOutcomeKind, ReaderSummaryRow,
    TrajectoryCell, TrajectoryReport, TrajectorySubtype,
};
pub use shift::{subgroup_shift_report, ClassShift, SubgroupShiftReport};
