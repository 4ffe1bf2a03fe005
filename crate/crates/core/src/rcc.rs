//! Rank-conditioned committees: per-rank models, variance decomposition and acquisition.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash;
use crate::surrogate::{committee_predict, train_committee, Committee, CommitteePrediction, RegressorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: String,
    pub embedding: Vec<f64>,
    pub score: f64,
}

/// Labeled set for one conformation rank (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDataset {
    pub rank: usize,
    pub entries: Vec<RankEntry>,
}

impl RankDataset {
    pub fn empty_set(r: usize) -> Vec<RankDataset> {
        (1..=r).map(|rank| RankDataset { rank, entries: Vec::new() }).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.embedding.clone()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }
}

/// A freshly labeled sequence: embedding plus one score per rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub id: String,
    pub embedding: Vec<f64>,
    pub scores: Vec<f64>,
}

pub fn update_rank_datasets(datasets: &[RankDataset], new: &[LabeledPoint]) -> Result<Vec<RankDataset>> {
    let r = datasets.len();
    let mut seen: HashSet<&str> = datasets.first().map(|d| d.ids().collect()).unwrap_or_default();
    for p in new {
        if p.scores.len() != r {
            return Err(Error::ScoreArity { id: p.id.clone(), expected: r, got: p.scores.len() });
        }
        if !seen.insert(p.id.as_str()) {
            return Err(Error::DuplicateId(p.id.clone()));
        }
    }
    Ok(datasets
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut d = d.clone();
            d.entries.extend(new.iter().map(|p| RankEntry {
                id: p.id.clone(),
                embedding: p.embedding.clone(),
                score: p.scores[k],
            }));
            d
        })
        .collect())
}

/// Checks the shared-id-set invariant across ranks.
pub fn rank_ids_consistent(datasets: &[RankDataset]) -> bool {
    datasets.windows(2).all(|w| w[0].ids().eq(w[1].ids()))
}

/// Validated aggregation weights: uniform when not supplied.
pub fn rank_weights(prior: Option<&[f64]>, r: usize) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::Config("at least one rank is required".into()));
    }
    let Some(w) = prior else {
        return Ok(vec![1.0 / r as f64; r]);
    };
    if w.len() != r {
        return Err(Error::Config(format!("{} rank weights supplied for R = {r}", w.len())));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Config("rank weights must be finite and nonnegative".into()));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("rank weights sum to {sum}, not 1")));
    }
    Ok(w.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCommittees {
    pub committees: Vec<Committee>,
    pub weights: Vec<f64>,
}

/// Committee seed for rank `r` (1-based).
pub fn rank_seed(model_seed: u64, r: usize) -> u64 {
    hash::mix(model_seed, &[r as u64])
}

pub fn train_rank_committees(
    datasets: &[RankDataset],
    weights: &[f64],
    spec: &RegressorSpec,
    m: usize,
    model_seed: u64,
) -> Result<RankCommittees> {
    if datasets.len() != weights.len() {
        return Err(Error::Config("one weight per rank dataset is required".into()));
    }
    let committees = datasets
        .iter()
        .map(|d| train_committee(spec, &d.features(), &d.targets(), m, rank_seed(model_seed, d.rank)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankCommittees { committees, weights: weights.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionReport {
    pub per_rank: Vec<CommitteePrediction>,
    pub mu_bar: f64,
    pub sigma_epi: f64,
    pub sigma_conf: f64,
    pub sigma_tot: f64,
    pub alpha: Option<f64>,
}

/// Weighted aggregation of per-rank committee summaries.
pub fn decompose_predictions(per_rank: &[CommitteePrediction], w: &[f64]) -> AcquisitionReport {
    let first = per_rank[0].mean;
    let agree = per_rank.iter().all(|p| p.mean == first);
    let (mu_bar, conf2) = if agree {
        (first, 0.0)
    } else {
        let mu: f64 = per_rank.iter().zip(w).map(|(p, w)| w * p.mean).sum();
        let c: f64 = per_rank.iter().zip(w).map(|(p, w)| w * (p.mean - mu).powi(2)).sum();
        (mu, c)
    };
    let epi2: f64 = per_rank.iter().zip(w).map(|(p, w)| w * p.std * p.std).sum();
    AcquisitionReport {
        per_rank: per_rank.to_vec(),
        mu_bar,
        sigma_epi: epi2.sqrt(),
        sigma_conf: conf2.sqrt(),
        sigma_tot: (epi2 + conf2).sqrt(),
        alpha: None,
    }
}

pub fn decompose(rc: &RankCommittees, x: &[f64]) -> Result<AcquisitionReport> {
    let per_rank = rc.committees.iter().map(|c| committee_predict(c, x)).collect::<Result<Vec<_>>>()?;
    Ok(decompose_predictions(&per_rank, &rc.weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionMode {
    Rcc,
    UcbMean,
    UcbTotal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionParams {
    pub mode: AcquisitionMode,
    pub kappa_epi: f64,
    pub kappa_conf: f64,
    pub kappa: f64,
}

impl Default for AcquisitionParams {
    fn default() -> Self {
        AcquisitionParams { mode: AcquisitionMode::Rcc, kappa_epi: 2.0, kappa_conf: 1.0, kappa: 2.0 }
    }
}

impl AcquisitionParams {
    pub fn validate(&self) -> Result<()> {
        if [self.kappa_epi, self.kappa_conf, self.kappa].iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::Config("acquisition weights must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

pub fn acquisition(r: &AcquisitionReport, p: &AcquisitionParams) -> f64 {
    match p.mode {
        AcquisitionMode::Rcc => r.mu_bar + p.kappa_epi * r.sigma_epi - p.kappa_conf * r.sigma_conf,
        AcquisitionMode::UcbMean => r.mu_bar + p.kappa * r.sigma_epi,
        AcquisitionMode::UcbTotal => r.mu_bar + p.kappa * r.sigma_tot,
    }
}

/// The `b` best by α (ties by id); the flag is set when fewer than `b` were available.
pub fn select_top_b(candidates: &[(String, f64)], b: usize) -> (Vec<String>, bool) {
    let mut sorted: Vec<&(String, f64)> = candidates.iter().collect();
    sorted.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let short = candidates.len() < b;
    (sorted.into_iter().take(b).map(|(id, _)| id.clone()).collect(), short)
}

/// Per-candidate acquisition table.
pub fn acquisition_csv(rows: &[(String, AcquisitionReport, bool)]) -> String {
    let r = rows.first().map_or(0, |row| row.1.per_rank.len());
    let mut s = String::from("id");
    for k in 1..=r {
        write!(s, ",mu_{k}").unwrap();
    }
    for k in 1..=r {
        write!(s, ",sigma_epi_{k}").unwrap();
    }
    s.push_str(",mu_bar,sigma_epi,sigma_conf,sigma_tot,alpha,selected\n");
    for (id, rep, sel) in rows {
        s.push_str(id);
        for p in &rep.per_rank {
            write!(s, ",{}", p.mean).unwrap();
        }
        for p in &rep.per_rank {
            write!(s, ",{}", p.std).unwrap();
        }
        let alpha = rep.alpha.map(|a| a.to_string()).unwrap_or_default();
        writeln!(
            s,
            ",{},{},{},{},{},{}",
            rep.mu_bar, rep.sigma_epi, rep.sigma_conf, rep.sigma_tot, alpha, *sel as u8
        )
        .unwrap();
    }
    s
}
