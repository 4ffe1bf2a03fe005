//! Post-hoc campaign statistics: batch summaries, parent regressions, histograms.

mod histogram;
mod ols;
mod summary;

pub use histogram::{emit_histogram, histogram_bins, Histogram};
pub use ols::{format_p, ols, parent_regression, regression_text, student_t_cdf, student_t_quantile, OlsFit, ParentRegression};
pub use summary::{batch_summaries, percent_improvement, summaries_csv, BatchSummary, Scored};
