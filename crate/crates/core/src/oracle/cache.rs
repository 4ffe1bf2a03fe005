//! Append-only score store keyed by run id and residue string.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{check_scores, Oracle, RankScores};
use crate::error::{Error, Result};
use crate::seqcore::Sequence;

#[derive(Debug, Clone, Default)]
pub struct ScoreCache {
    path: Option<PathBuf>,
    run_id: String,
    entries: HashMap<String, RankScores>,
}

impl ScoreCache {
    pub fn in_memory(run_id: impl Into<String>) -> Self {
        ScoreCache { path: None, run_id: run_id.into(), entries: HashMap::new() }
    }

    /// Open (or lazily create) a cache file, keeping only rows for `run_id`.
    pub fn open(path: &Path, run_id: impl Into<String>, ranks: usize) -> Result<Self> {
        let run_id = run_id.into();
        let mut entries = HashMap::new();
        if path.exists() {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_path(path)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            for rec in rdr.records() {
                let rec = rec?;
                if rec.get(0) != Some(run_id.as_str()) {
                    continue;
                }
                let residues = rec.get(1).unwrap_or("").to_string();
                let scores = rec
                    .iter()
                    .skip(2)
                    .map(|f| f.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidInput(format!("{}: unreadable cache row for {residues}", path.display())))?;
                check_scores(&residues, &scores, ranks)?;
                entries.insert(residues, scores);
            }
        }
        Ok(ScoreCache { path: Some(path.to_path_buf()), run_id, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, residues: &str) -> Option<&RankScores> {
        self.entries.get(residues)
    }

    /// Record new rows, appending them to the backing file first.
    pub fn insert_all(&mut self, rows: &[(String, RankScores)]) -> Result<()> {
        if let Some(path) = &self.path {
            let mut text = String::new();
            for (res, scores) in rows {
                text.push_str(&self.run_id);
                text.push(',');
                text.push_str(res);
                for s in scores {
                    text.push(',');
                    text.push_str(&s.to_string());
                }
                text.push('\n');
            }
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        for (res, scores) in rows {
            self.entries.insert(res.clone(), scores.clone());
        }
        Ok(())
    }
}

/// Oracle decorator that only forwards residue strings it has not seen.
pub struct CachedOracle<O> {
    inner: O,
    cache: ScoreCache,
    underlying_evaluations: usize,
}

impl<O: Oracle> CachedOracle<O> {
    pub fn new(inner: O, cache: ScoreCache) -> Self {
        CachedOracle { inner, cache, underlying_evaluations: 0 }
    }

    /// Number of sequences forwarded to the wrapped oracle.
    pub fn underlying_evaluations(&self) -> usize {
        self.underlying_evaluations
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for CachedOracle<O> {
    fn ranks(&self) -> usize {
        self.inner.ranks()
    }

    fn evaluate(&mut self, batch: &[Sequence]) -> Result<Vec<RankScores>> {
        let mut misses: Vec<Sequence> = Vec::new();
        let mut pending = std::collections::HashSet::new();
        for s in batch {
            let key = s.residue_string();
            if self.cache.get(&key).is_none() && pending.insert(key) {
                misses.push(s.clone());
            }
        }
        if !misses.is_empty() {
            let scores = self.inner.evaluate(&misses)?;
            self.underlying_evaluations += misses.len();
            let rows: Vec<(String, RankScores)> =
                misses.iter().map(|s| s.residue_string()).zip(scores).collect();
            self.cache.insert_all(&rows)?;
        }
        Ok(batch.iter().map(|s| self.cache.get(&s.residue_string()).cloned().unwrap()).collect())
    }
}
