//! Directed-evolution operators.
//!
//! Parents are sampled with probability proportional to the square of their
//! min-shifted fitness, children arise from a single-site substitution drawn
//! from a substitution-matrix row or from a one-cut crossover, and the
//! breeding population is culled at two standard deviations below its mean.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::{
    check_developability, AminoAcid, DevelopabilityThresholds, Lineage, RegionName, Sequence,
    SubstitutionMatrix, ALPHABET_SIZE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub sequence: Sequence,
    /// Higher is better.
    pub fitness: f64,
    pub iteration_born: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<ScoredSequence>,
}

impl Population {
    pub fn new(members: Vec<ScoredSequence>) -> Result<Self> {
        let mut ids = HashSet::new();
        for m in &members {
            if !m.fitness.is_finite() {
                return Err(Error::NonFinite(format!("fitness of `{}`", m.sequence.id)));
            }
            if !ids.insert(m.sequence.id.as_str()) {
                return Err(Error::DuplicateId(m.sequence.id.clone()));
            }
        }
        Ok(Population { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fitness(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.fitness).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionParams {
    /// Probability that a candidate comes from substitution rather than crossover.
    pub p_substitution: f64,
    pub fitness_shift_epsilon: f64,
    pub regions_enabled: Vec<RegionName>,
    /// Weight parents by raw squared fitness instead of the min-shifted form.
    pub raw_square: bool,
    /// Attempts allowed per requested candidate before giving up.
    pub retries_per_candidate: usize,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            p_substitution: 0.5,
            fitness_shift_epsilon: 1e-3,
            regions_enabled: RegionName::ALL.to_vec(),
            raw_square: false,
            retries_per_candidate: 50,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_substitution) {
            return Err(Error::Config(format!(
                "p_substitution must lie in [0, 1], got {}",
                self.p_substitution
            )));
        }
        if !(self.fitness_shift_epsilon > 0.0) {
            return Err(Error::Config("fitness_shift_epsilon must be positive".into()));
        }
        if self.retries_per_candidate == 0 {
            return Err(Error::Config("retries_per_candidate must be at least 1".into()));
        }
        Ok(())
    }
}

/// Normalized parent-sampling weights, `∝ (f_i − min f + ε)²`.
///
/// With `raw_square` the weights are `∝ f_i²`; an all-zero vector falls back to uniform.
pub fn parent_weights(fitness: &[f64], epsilon: f64, raw_square: bool) -> Vec<f64> {
    if fitness.is_empty() {
        return Vec::new();
    }
    let raw: Vec<f64> = if raw_square {
        fitness.iter().map(|f| f * f).collect()
    } else {
        let min = fitness.iter().copied().fold(f64::INFINITY, f64::min);
        fitness.iter().map(|f| (f - min + epsilon).powi(2)).collect()
    };
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        raw.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / fitness.len() as f64; fitness.len()]
    }
}

/// Replace one residue inside an enabled region with a draw from the
/// parent residue's matrix row, excluding the residue itself.
pub fn substitution_mutation<R: Rng + ?Sized>(
    parent: &Sequence,
    matrix: &SubstitutionMatrix,
    enabled: &[RegionName],
    child_id: String,
    rng: &mut R,
) -> Result<Sequence> {
    let regions: Vec<_> = parent
        .regions()
        .iter()
        .filter(|r| enabled.contains(&r.name))
        .collect();
    if regions.is_empty() {
        return Err(Error::InvalidSequence {
            id: parent.id.clone(),
            reason: "no enabled region to mutate".into(),
        });
    }
    let region = regions[rng.gen_range(0..regions.len())];
    let pos = rng.gen_range(region.start..region.end);
    let from = parent.residues()[pos];

    let mut row = *matrix.row(from);
    row[from.index()] = 0.0;
    let mass: f64 = row.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::DegenerateMatrix {
            residue: from.to_char(),
        });
    }
    let mut u = rng.gen::<f64>() * mass;
    let mut to = from;
    for (k, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        to = AminoAcid::ALL[k];
        if u < p {
            break;
        }
        u -= p;
    }
    debug_assert!(to != from && to.index() < ALPHABET_SIZE);

    let mut residues = parent.residues().to_vec();
    residues[pos] = to;
    Ok(parent.derive(child_id, residues, Lineage::substitution(parent.id.clone())))
}

fn check_compatible(p: &Sequence, q: &Sequence) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LayoutMismatch(format!(
            "crossover parents `{}` and `{}` differ in length ({} vs {})",
            p.id,
            q.id,
            p.len(),
            q.len()
        )));
    }
    if p.regions() != q.regions() {
        return Err(Error::LayoutMismatch(format!(
            "crossover parents `{}` and `{}` have different region layouts",
            p.id, q.id
        )));
    }
    if p.len() < 2 {
        return Err(Error::InvalidInput("crossover needs sequences of length ≥ 2".into()));
    }
    Ok(())
}

/// Recombinant of the first `cut` residues of `p` and the remainder of `q`.
pub fn crossover_at(p: &Sequence, q: &Sequence, cut: usize, child_id: String) -> Result<Sequence> {
    check_compatible(p, q)?;
    if cut == 0 || cut >= p.len() {
        return Err(Error::InvalidInput(format!(
            "cut {cut} outside 1..{}",
            p.len() - 1
        )));
    }
    let residues: Vec<AminoAcid> = p.residues()[..cut]
        .iter()
        .chain(&q.residues()[cut..])
        .copied()
        .collect();
    Ok(p.derive(child_id, residues, Lineage::crossover(p.id.clone(), q.id.clone())))
}

/// One-cut crossover with the cut drawn uniformly from `1..=L-1`.
pub fn crossover<R: Rng + ?Sized>(
    p: &Sequence,
    q: &Sequence,
    child_id: String,
    rng: &mut R,
) -> Result<Sequence> {
    check_compatible(p, q)?;
    let cut = rng.gen_range(1..p.len());
    crossover_at(p, q, cut, child_id)
}

/// Produces feasible, deduplicated candidate libraries from a population.
pub struct LibraryGenerator<'a> {
    pub matrix: &'a SubstitutionMatrix,
    pub params: &'a EvolutionParams,
    pub thresholds: &'a DevelopabilityThresholds,
}

impl LibraryGenerator<'_> {
    /// Generate exactly `n` candidates named `{id_prefix}{index:04}`.
    ///
    /// Candidates whose residue string appears in `exclude` or earlier in the
    /// library, or that fail the developability screen, are discarded and
    /// redrawn. The total number of draws is capped at
    /// `retries_per_candidate · n`.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        pop: &Population,
        n: usize,
        exclude: &HashSet<String>,
        id_prefix: &str,
        rng: &mut R,
    ) -> Result<Vec<Sequence>> {
        if pop.is_empty() {
            return Err(Error::InvalidInput("cannot breed from an empty population".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("library size must be at least 1".into()));
        }
        let weights = parent_weights(
            &pop.fitness(),
            self.params.fitness_shift_epsilon,
            self.params.raw_square,
        );
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidInput(format!("parent weights: {e}")))?;

        let budget = self.params.retries_per_candidate.saturating_mul(n);
        let mut seen: HashSet<String> = HashSet::new();
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            if attempts >= budget {
                return Err(Error::LibraryExhausted {
                    requested: n,
                    produced: out.len(),
                    attempts,
                });
            }
            attempts += 1;
            let id = format!("{id_prefix}{:04}", out.len());
            let child = if rng.gen_bool(self.params.p_substitution) {
                let parent = &pop.members[sampler.sample(rng)].sequence;
                substitution_mutation(parent, self.matrix, &self.params.regions_enabled, id, rng)?
            } else {
                let p = &pop.members[sampler.sample(rng)].sequence;
                let q = &pop.members[sampler.sample(rng)].sequence;
                crossover(p, q, id, rng)?
            };
            let key = child.residue_string();
            if exclude.contains(&key) || seen.contains(&key) {
                continue;
            }
            if !check_developability(child.residues(), self.thresholds).passed {
                continue;
            }
            seen.insert(key);
            out.push(child);
        }
        Ok(out)
    }
}

/// Drop members more than two sample standard deviations below the mean.
///
/// Never returns an empty population: if every member would go, the best one stays.
pub fn cull(pop: &Population) -> Population {
    if pop.len() < 2 {
        return pop.clone();
    }
    let f = pop.fitness();
    let n = f.len() as f64;
    let mean = f.iter().sum::<f64>() / n;
    let sd = (f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let threshold = mean - 2.0 * sd;
    let kept: Vec<ScoredSequence> = pop
        .members
        .iter()
        .filter(|m| m.fitness >= threshold)
        .cloned()
        .collect();
    if kept.is_empty() {
        let best = pop
            .members
            .iter()
            .max_by(|a, b| a.fitness.total_cmp(&b.fitness))
            .cloned()
            .into_iter()
            .collect();
        return Population { members: best };
    }
    Population { members: kept }
}
