//! Machine-learning-assisted directed evolution over amino-acid sequences,
//! scored with rank-conditioned committees that keep model (epistemic)
//! uncertainty apart from pose (conformational) uncertainty.
//!
//! The crate is organised bottom-up:
//!
//! - [`seqcore`]: alphabet, annotated sequences, alignment, substitution matrices, developability.
//! - [`evolve`]: parent weighting, substitution and crossover operators, library generation, culling.
//! - [`embed`]: one-hot encoding, PCA, imported embeddings.
//! - [`surrogate`]: MLP and gradient-boosted-tree regressors, bootstrap committees.
//! - [`rcc`]: per-rank committees, variance decomposition, acquisition, Top-B selection.
//! - [`oracle`]: synthetic multi-rank landscape, external-process adapter, score cache.
//! - [`engine`]: campaign configuration, state, and the iteration loop.
//! - [`analysis`]: batch summaries, parent regressions, histograms.

pub mod error;
pub mod analysis;
pub mod embed;
pub mod engine;
pub mod evolve;
pub mod fixtures;
pub mod hash;
pub mod oracle;
pub mod rcc;
pub mod seqcore;
pub mod surrogate;

pub use error::{Error, Result};
