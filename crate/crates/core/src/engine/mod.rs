//! Campaign orchestration: configuration, state, and the iteration loop.

mod artifacts;
mod config;
mod run;
mod state;

pub use artifacts::{candidates_csv, population_csv, selected_csv, IterationArtifacts};
pub use config::{EmbeddingMode, MatrixSource, OracleMode, RunConfig, RunMode};
pub use run::{
    embed_iteration, generate_candidates, initialize, model_seed, resolve_oracle, run_iteration, score_baseline,
    score_rcc, with_embeddings, Embedded, EmbeddingTable, Initialized, IterationOutcome, Runtime, Scored,
};
pub use state::{
    load_state, resume, save_state, write_atomic, ExcludedSequence, Record, ResolvedOracle, RunState, SCHEMA_VERSION,
};
