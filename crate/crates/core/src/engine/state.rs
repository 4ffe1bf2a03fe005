//! Persistent campaign state.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, RunConfig};
use crate::embed::{OneHotEncoder, PcaModel};
use crate::error::{Error, Result};
use crate::evolve::{Population, ScoredSequence};
use crate::oracle::{ExternalOracleSpec, SyntheticLandscapeSpec};
use crate::rcc::{rank_ids_consistent, RankCommittees, RankDataset};
use crate::seqcore::{Sequence, SubstitutionMatrix};

pub const SCHEMA_VERSION: u32 = 1;

/// Oracle description with run-start choices (calibration reference) fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedOracle {
    Synthetic(SyntheticLandscapeSpec),
    External(ExternalOracleSpec),
}

impl ResolvedOracle {
    /// Key separating cache rows of different landscapes or programs.
    pub fn cache_id(&self) -> String {
        let text = serde_json::to_string(self).expect("oracle serializes");
        hex(&Sha256::digest(text.as_bytes()))[..16].to_string()
    }
}

/// An oracle-evaluated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sequence: Sequence,
    pub scores: Vec<f64>,
    /// Rank-weighted mean score.
    pub fitness: f64,
    pub iteration_born: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSequence {
    pub id: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunState {
    pub schema_version: u32,
    pub config_hash: String,
    /// Completed iterations.
    pub iteration: usize,
    /// Index of the next per-iteration random stream.
    pub rng_cursor: u64,
    pub oracle: ResolvedOracle,
    pub weights: Vec<f64>,
    pub matrix: SubstitutionMatrix,
    pub encoder: Option<OneHotEncoder>,
    /// Embedding dimension fixed for the run.
    pub embedding_dim: usize,
    /// Every evaluated sequence in evaluation order.
    pub records: Vec<Record>,
    /// Ids of the current breeding population.
    pub population: Vec<String>,
    pub datasets: Vec<RankDataset>,
    pub pca: Option<PcaModel>,
    pub committees: Option<RankCommittees>,
    pub excluded: Vec<ExcludedSequence>,
}

impl RunState {
    pub fn record(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.sequence.id == id)
    }

    pub fn breeding_population(&self) -> Result<Population> {
        let index: std::collections::HashMap<&str, &Record> =
            self.records.iter().map(|r| (r.sequence.id.as_str(), r)).collect();
        let members = self
            .population
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|r| ScoredSequence {
                        sequence: r.sequence.clone(),
                        fitness: r.fitness,
                        iteration_born: r.iteration_born,
                    })
                    .ok_or_else(|| Error::CorruptState(format!("population member `{id}` has no record")))
            })
            .collect::<Result<Vec<_>>>()?;
        Population::new(members)
    }

    /// Structural invariants that must hold between iterations.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::CorruptState(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema version {}", self.schema_version));
        }
        if self.rng_cursor != self.iteration as u64 {
            return bad("rng cursor out of step with the iteration counter".into());
        }
        if !rank_ids_consistent(&self.datasets) || self.datasets.len() != self.weights.len() {
            return bad("rank datasets disagree".into());
        }
        let ids: Vec<&str> = self.records.iter().map(|r| r.sequence.id.as_str()).collect();
        if self.datasets.first().map_or(true, |d| !d.ids().eq(ids.iter().copied())) {
            return bad("rank datasets do not match the evaluated records".into());
        }
        let mut seen = HashSet::new();
        if ids.iter().any(|id| !seen.insert(*id)) {
            return bad("duplicate record ids".into());
        }
        if self.population.iter().any(|id| !seen.contains(id.as_str())) {
            return bad("population refers to unknown ids".into());
        }
        Ok(())
    }
}

/// Write atomically: temp file in the same directory, then rename.
pub fn save_state(state: &RunState, path: &Path) -> Result<()> {
    let text = serde_json::to_string(state)?;
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_state(path: &Path) -> Result<RunState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let state: RunState =
        serde_json::from_str(&text).map_err(|e| Error::CorruptState(format!("{}: {e}", path.display())))?;
    state.check()?;
    Ok(state)
}

/// Load a state and refuse to continue it under a different config.
pub fn resume(path: &Path, config: &RunConfig) -> Result<RunState> {
    let state = load_state(path)?;
    let found = config.hash();
    if state.config_hash != found {
        return Err(Error::ConfigHashMismatch { expected: state.config_hash, found });
    }
    Ok(state)
}
