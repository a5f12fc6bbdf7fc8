//! Verdicts on closed-form mass series, and reports assembled from them.

mod report;
mod verdict;

pub use report::{
    dense_combination_certify, freeness_check, isometry_check, lp_report, not_lq_report, nowhere_report,
    replay_unbounded, sp_report, verify_threshold, Evidence, IndexVerdict, IsometryCheck, Report, Target, POINTWISE_REDUCTION,
};
pub use verdict::{predicted_index, replay, series_verdict, BlockSpec, Certificate, LowerBound, PredictedIndex, Verdict};
