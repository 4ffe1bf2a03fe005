//! Campaign configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::EvolutionParams;
use crate::oracle::{ExternalOracleSpec, SyntheticLandscapeSpec};
use crate::rcc::{rank_weights, AcquisitionParams};
use crate::seqcore::{AlignmentParams, DevelopabilityThresholds, RegionPooling};
use crate::surrogate::RegressorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    DeOnly,
    MldeBaseline,
    MldeRcc,
}

impl RunMode {
    pub fn uses_model(self) -> bool {
        self != RunMode::DeOnly
    }
}

fn default_dim() -> usize {
    64
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingMode {
    OnehotPca {
        #[serde(default = "default_dim")]
        d: usize,
        #[serde(default = "yes")]
        region_only: bool,
    },
    /// Precomputed vectors keyed by sequence id or residue string.
    External { path: PathBuf },
}

impl Default for EmbeddingMode {
    fn default() -> Self {
        EmbeddingMode::OnehotPca { d: default_dim(), region_only: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleMode {
    Synthetic(SyntheticLandscapeSpec),
    External(ExternalOracleSpec),
}

impl Default for OracleMode {
    fn default() -> Self {
        OracleMode::Synthetic(SyntheticLandscapeSpec::default())
    }
}

fn default_pseudocount() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSource {
    /// Estimated from alignments of the feasible initial sequences.
    Corpus {
        #[serde(default = "default_pseudocount")]
        pseudocount: f64,
        #[serde(default)]
        alignment: AlignmentParams,
        #[serde(default)]
        pooling: RegionPooling,
    },
    /// Equal off-diagonal transition probabilities.
    Uniform,
    /// A matrix CSV as written by the `matrix` subcommand.
    File { path: PathBuf },
}

impl Default for MatrixSource {
    fn default() -> Self {
        MatrixSource::Corpus {
            pseudocount: default_pseudocount(),
            alignment: AlignmentParams::default(),
            pooling: RegionPooling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub iterations: usize,
    pub candidates_per_iteration: usize,
    pub select_b: usize,
    pub ranks: usize,
    pub committee_size: usize,
    /// Aggregation weights over ranks; uniform when absent.
    pub rank_weights: Option<Vec<f64>>,
    pub regressor: RegressorSpec,
    pub acquisition: AcquisitionParams,
    pub evolution: EvolutionParams,
    pub developability: DevelopabilityThresholds,
    pub embedding: EmbeddingMode,
    pub oracle: OracleMode,
    pub mode: RunMode,
    pub culling: bool,
    pub matrix: MatrixSource,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            iterations: 2,
            candidates_per_iteration: 450,
            select_b: 50,
            ranks: 4,
            committee_size: 5,
            rank_weights: None,
            regressor: RegressorSpec::default(),
            acquisition: AcquisitionParams::default(),
            evolution: EvolutionParams::default(),
            developability: DevelopabilityThresholds::default(),
            embedding: EmbeddingMode::default(),
            oracle: OracleMode::default(),
            mode: RunMode::MldeRcc,
            culling: true,
            matrix: MatrixSource::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.select_b == 0 || self.select_b > self.candidates_per_iteration {
            return bad(format!(
                "select_b must lie in [1, candidates_per_iteration = {}], got {}",
                self.candidates_per_iteration, self.select_b
            ));
        }
        if self.committee_size < 2 {
            return bad("committee_size must be at least 2".into());
        }
        rank_weights(self.rank_weights.as_deref(), self.ranks)?;
        self.regressor.validate()?;
        self.acquisition.validate()?;
        self.evolution.validate()?;
        match &self.embedding {
            EmbeddingMode::OnehotPca { d: 0, .. } => return bad("embedding dimension must be at least 1".into()),
            _ => {}
        }
        match &self.oracle {
            OracleMode::Synthetic(s) => {
                s.validate()?;
                if s.ranks != self.ranks {
                    return bad(format!("synthetic oracle has {} ranks but the run uses {}", s.ranks, self.ranks));
                }
            }
            OracleMode::External(e) => e.validate()?,
        }
        if let MatrixSource::Corpus { pseudocount, .. } = self.matrix {
            if !(pseudocount.is_finite() && pseudocount >= 0.0) {
                return bad("matrix pseudocount must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    /// Make file references absolute relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let EmbeddingMode::External { path } = &mut self.embedding {
            fix(path);
        }
        if let MatrixSource::File { path } = &mut self.matrix {
            fix(path);
        }
        if let OracleMode::External(e) = &mut self.oracle {
            if let Some(prog) = e.command.first_mut() {
                if prog.contains('/') && Path::new(prog.as_str()).is_relative() {
                    *prog = base.join(&*prog).to_string_lossy().into_owned();
                }
            }
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }

    pub fn weights(&self) -> Vec<f64> {
        rank_weights(self.rank_weights.as_deref(), self.ranks).expect("validated")
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_is_stable() {
        let c = RunConfig::default();
        assert!(c.validate().is_ok());
        let back = RunConfig::from_json(&c.to_json_pretty()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        let other = RunConfig { select_b: 10, ..c.clone() };
        assert_ne!(other.hash(), c.hash());
    }

    #[test]
    fn empty_document_uses_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"sead": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"embedding": {"kind": "onehot_pca", "dims": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"oracle": {"kind": "synthetic", "sd": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"evolution": {"p_sub": 0.5}}"#).is_err());
    }

    #[test]
    fn tagged_sections_parse() {
        let c = RunConfig::from_json(
            r#"{"mode": "de_only", "embedding": {"kind": "external", "path": "e.csv"},
                "oracle": {"kind": "external", "command": ["./score.sh", "-v"], "negate_scores": true},
                "matrix": {"kind": "uniform"}, "ranks": 4}"#,
        )
        .unwrap();
        assert_eq!(c.mode, RunMode::DeOnly);
        let mut r = c.clone();
        r.resolve_paths(Path::new("/base"));
        assert_eq!(r.embedding, EmbeddingMode::External { path: "/base/e.csv".into() });
        match r.oracle {
            OracleMode::External(e) => assert_eq!(e.command, vec!["/base/./score.sh".to_string(), "-v".into()]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn invariants_enforced() {
        assert!(RunConfig::from_json(r#"{"select_b": 500}"#).is_err());
        assert!(RunConfig::from_json(r#"{"iterations": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"ranks": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"committee_size": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"rank_weights": [0.5, 0.5, 0.5, 0.5]}"#).is_err());
    }
}
