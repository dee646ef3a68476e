//! Scores for sample sets against the ideal distribution.

mod clicks;
mod correlation;
mod distance;
mod report;
mod ursell;

pub use clicks::{
    click_histogram, click_moments_empirical, click_moments_theoretical, fit_click_gaussian, surjections, ClickGaussian,
    MAX_THEORETICAL_ORDER,
};
pub use correlation::{delta_bounds, pearson_bootstrap, Bounds, Correlation, DEFAULT_RESAMPLES};
pub use distance::{entropy, hog_rate, kl, tvd, xe, xe_estimate, Estimate};
pub use report::{
    assemble_marginal_report, check_widths, click_report, compare_xe, marginal_report, subset_value, Aggregate, CompareOptions, MarginalMetric, MetricReport, SubsetPlan, SubsetValue,
};
pub use ursell::{
    empirical_table, joint_cumulants, ursell, ursell_empirical, ursell_mgf, UrsellValue, MAX_MGF_ORDER, MAX_URSELL_ORDER, MGF_STEP,
};
