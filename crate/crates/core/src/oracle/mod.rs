//! Multi-rank fitness oracles. Scores follow the higher-is-better convention.

mod cache;
mod external;
mod synthetic;

pub use cache::{CachedOracle, ScoreCache};
pub use external::{conformance_check, ConformanceReport, ExternalOracle, ExternalOracleSpec};
pub use synthetic::{CalibrationReference, SyntheticLandscape, SyntheticLandscapeSpec};

use crate::error::{Error, Result};
use crate::seqcore::Sequence;

/// One score per conformation rank, index 0 holding rank 1.
pub type RankScores = Vec<f64>;

pub trait Oracle {
    fn ranks(&self) -> usize;

    /// Scores for every sequence in `batch`, in batch order.
    fn evaluate(&mut self, batch: &[Sequence]) -> Result<Vec<RankScores>>;
}

pub(crate) fn check_scores(id: &str, scores: &[f64], ranks: usize) -> Result<()> {
    if scores.len() != ranks {
        return Err(Error::ScoreArity {
            id: id.to_string(),
            expected: ranks,
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("scores for `{id}`")));
    }
    Ok(())
}
