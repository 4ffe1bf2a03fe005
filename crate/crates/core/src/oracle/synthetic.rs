//! Seeded additive-plus-pairwise landscape with per-rank structured offsets.

use serde::{Deserialize, Serialize};

use super::{Oracle, RankScores};
use crate::error::{Error, Result};
use crate::hash::{centered_unit, mix};
use crate::seqcore::{AminoAcid, RegionSpan, Sequence, ALPHABET_SIZE};

const TAG_SITE: u64 = 0x5349_5445;
const TAG_PAIR: u64 = 0x5041_4952;
const TAG_COUPLING: u64 = 0x4350_4c47;
const TAG_RANK: u64 = 0x5241_4e4b;
const TAG_REFERENCE: u64 = 0x5245_4653;

/// Population the affine calibration is computed over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationReference {
    /// Resolved at run start to a template built from the first initial sequence.
    Auto,
    /// Uniformly random sequences of a fixed length.
    Uniform { length: usize },
    /// The template with its region positions drawn uniformly at random.
    Template {
        residues: String,
        regions: Vec<RegionSpan>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticLandscapeSpec {
    pub seed: u64,
    pub ranks: usize,
    pub base_scale: f64,
    /// Coupled position pairs per sequence length; `None` means one per position.
    pub epistasis_pairs: Option<usize>,
    pub rank_noise_scale: Vec<f64>,
    pub target_mean: f64,
    pub target_sd: f64,
    pub reference: CalibrationReference,
    pub reference_samples: usize,
}

impl Default for SyntheticLandscapeSpec {
    fn default() -> Self {
        SyntheticLandscapeSpec {
            seed: 2024,
            ranks: 4,
            base_scale: 0.45,
            epistasis_pairs: None,
            rank_noise_scale: vec![2.0, 4.0, 6.0, 8.0],
            target_mean: 70.0,
            target_sd: 15.0,
            reference: CalibrationReference::Auto,
            reference_samples: 2000,
        }
    }
}

impl SyntheticLandscapeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic oracle: {m}")));
        if self.ranks == 0 {
            return bad("ranks must be at least 1".into());
        }
        if self.rank_noise_scale.len() != self.ranks {
            return bad(format!(
                "{} rank noise scales for {} ranks",
                self.rank_noise_scale.len(),
                self.ranks
            ));
        }
        if self.rank_noise_scale.iter().any(|s| !(s.is_finite() && *s >= 0.0))
            || self.rank_noise_scale.windows(2).any(|w| w[1] < w[0])
        {
            return bad("rank_noise_scale must be nonnegative and non-decreasing".into());
        }
        if !(self.base_scale.is_finite() && self.base_scale >= 0.0) {
            return bad("base_scale must be finite and nonnegative".into());
        }
        if !(self.target_sd.is_finite() && self.target_sd > 0.0 && self.target_mean.is_finite()) {
            return bad("target_sd must be positive and target_mean finite".into());
        }
        if self.reference_samples < 2 {
            return bad("reference_samples must be at least 2".into());
        }
        Ok(())
    }

    /// Replace an `Auto` reference with the template of `first`.
    pub fn resolve(&self, first: &Sequence) -> SyntheticLandscapeSpec {
        let mut s = self.clone();
        if s.reference == CalibrationReference::Auto {
            s.reference = if first.regions().is_empty() {
                CalibrationReference::Uniform { length: first.len() }
            } else {
                CalibrationReference::Template {
                    residues: first.residue_string(),
                    regions: first.regions().to_vec(),
                }
            };
        }
        s
    }
}

/// A landscape with its calibration constants fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLandscape {
    spec: SyntheticLandscapeSpec,
    raw_mean: f64,
    gain: f64,
    rank_mean: Vec<f64>,
    rank_sd: Vec<f64>,
}

impl SyntheticLandscape {
    pub fn new(spec: SyntheticLandscapeSpec) -> Result<Self> {
        spec.validate()?;
        let reference = reference_population(&spec)?;
        let raw: Vec<f64> = reference.iter().map(|s| raw_f0(&spec, s)).collect();
        let (raw_mean, raw_sd) = mean_sd(&raw);
        if raw_sd <= 0.0 {
            return Err(Error::Config("synthetic oracle: reference population has no fitness spread".into()));
        }
        let mut rank_mean = Vec::with_capacity(spec.ranks);
        let mut rank_sd = Vec::with_capacity(spec.ranks);
        for r in 0..spec.ranks {
            let g: Vec<f64> = reference.iter().map(|s| raw_rank_field(&spec, r, s)).collect();
            let (m, sd) = mean_sd(&g);
            rank_mean.push(m);
            rank_sd.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Ok(SyntheticLandscape {
            gain: spec.target_sd / raw_sd,
            spec,
            raw_mean,
            rank_mean,
            rank_sd,
        })
    }

    pub fn spec(&self) -> &SyntheticLandscapeSpec {
        &self.spec
    }

    /// Calibrated rank-free fitness.
    pub fn f0(&self, residues: &[AminoAcid]) -> f64 {
        self.spec.target_mean + self.gain * (raw_f0(&self.spec, residues) - self.raw_mean)
    }

    pub fn scores(&self, residues: &[AminoAcid]) -> RankScores {
        let base = self.f0(residues);
        (0..self.spec.ranks)
            .map(|r| {
                let scale = self.spec.rank_noise_scale[r];
                if scale == 0.0 {
                    base
                } else {
                    let g = (raw_rank_field(&self.spec, r, residues) - self.rank_mean[r]) / self.rank_sd[r];
                    base + scale * g
                }
            })
            .collect()
    }
}

impl Oracle for SyntheticLandscape {
    fn ranks(&self) -> usize {
        self.spec.ranks
    }

    fn evaluate(&mut self, batch: &[Sequence]) -> Result<Vec<RankScores>> {
        Ok(batch.iter().map(|s| self.scores(s.residues())).collect())
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn reference_population(spec: &SyntheticLandscapeSpec) -> Result<Vec<Vec<AminoAcid>>> {
    let draw = |i: usize, p: usize| {
        AminoAcid::from_index((mix(spec.seed, &[TAG_REFERENCE, i as u64, p as u64]) % ALPHABET_SIZE as u64) as usize)
            .unwrap()
    };
    match &spec.reference {
        CalibrationReference::Auto => Err(Error::Config(
            "synthetic oracle: calibration reference must be resolved before use".into(),
        )),
        CalibrationReference::Uniform { length } => {
            if *length == 0 {
                return Err(Error::Config("synthetic oracle: reference length must be positive".into()));
            }
            Ok((0..spec.reference_samples)
                .map(|i| (0..*length).map(|p| draw(i, p)).collect())
                .collect())
        }
        CalibrationReference::Template { residues, regions } => {
            let template = Sequence::parse("reference", residues)?.with_regions(regions.clone())?;
            let positions = template.mutable_positions();
            Ok((0..spec.reference_samples)
                .map(|i| {
                    let mut s = template.residues().to_vec();
                    for &p in &positions {
                        s[p] = draw(i, p);
                    }
                    s
                })
                .collect())
        }
    }
}

/// Site term W[i, a] for sequences of length `l`.
pub(crate) fn site_term(seed: u64, l: usize, i: usize, a: AminoAcid) -> f64 {
    centered_unit(mix(seed, &[TAG_SITE, l as u64, i as u64, a.index() as u64]))
}

/// Coupling term U[i, j, a, b] for an interacting pair i < j.
pub(crate) fn coupling_term(seed: u64, l: usize, i: usize, j: usize, a: AminoAcid, b: AminoAcid) -> f64 {
    centered_unit(mix(
        seed,
        &[TAG_COUPLING, l as u64, i as u64, j as u64, a.index() as u64, b.index() as u64],
    ))
}

/// The distinct interacting pairs for sequences of length `l`, each with i < j.
pub(crate) fn interaction_pairs(spec: &SyntheticLandscapeSpec, l: usize) -> Vec<(usize, usize)> {
    let max = l * l.saturating_sub(1) / 2;
    let k = spec.epistasis_pairs.unwrap_or(l).min(max);
    let mut pairs = Vec::with_capacity(k);
    let mut attempt = 0u64;
    while pairs.len() < k {
        let h = mix(spec.seed, &[TAG_PAIR, l as u64, attempt]);
        attempt += 1;
        let (i, j) = ((h % l as u64) as usize, ((h >> 32) % l as u64) as usize);
        if i == j {
            continue;
        }
        let p = (i.min(j), i.max(j));
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    pairs
}

pub(crate) fn raw_f0(spec: &SyntheticLandscapeSpec, s: &[AminoAcid]) -> f64 {
    let l = s.len();
    let additive: f64 = s.iter().enumerate().map(|(i, &a)| site_term(spec.seed, l, i, a)).sum();
    let pairwise: f64 = interaction_pairs(spec, l)
        .into_iter()
        .map(|(i, j)| coupling_term(spec.seed, l, i, j, s[i], s[j]))
        .sum();
    additive + spec.base_scale * pairwise
}

fn raw_rank_field(spec: &SyntheticLandscapeSpec, r: usize, s: &[AminoAcid]) -> f64 {
    let l = s.len();
    s.iter()
        .enumerate()
        .map(|(i, &a)| centered_unit(mix(spec.seed, &[TAG_RANK, l as u64, r as u64, i as u64, a.index() as u64])))
        .sum::<f64>()
        / (l as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::seqcore::alphabet::parse_residues;

    fn small_spec(l: usize) -> SyntheticLandscapeSpec {
        SyntheticLandscapeSpec {
            reference: CalibrationReference::Uniform { length: l },
            reference_samples: 500,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_calibrated() {
        let spec = small_spec(10);
        let a = SyntheticLandscape::new(spec.clone()).unwrap();
        let b = SyntheticLandscape::new(spec.clone()).unwrap();
        let s = parse_residues("ACDEFGHIKL").unwrap();
        assert_eq!(a.scores(&s), b.scores(&s));
        assert_eq!(a.scores(&s).len(), 4);
        let refs = reference_population(&spec).unwrap();
        let f: Vec<f64> = refs.iter().map(|r| a.f0(r)).collect();
        let (m, sd) = mean_sd(&f);
        assert!((m - 70.0).abs() < 1e-9 && (sd - 15.0).abs() < 1e-9);
    }

    #[test]
    fn zero_noise_gives_equal_ranks() {
        let spec = SyntheticLandscapeSpec { rank_noise_scale: vec![0.0; 4], ..small_spec(6) };
        let land = SyntheticLandscape::new(spec).unwrap();
        let s = parse_residues("WYVPQR").unwrap();
        let sc = land.scores(&s);
        assert!(sc.iter().all(|&v| v == land.f0(&s)));
    }

    #[test]
    fn rank_difference_variance_non_decreasing() {
        let spec = small_spec(12);
        let land = SyntheticLandscape::new(spec).unwrap();
        let probe = SyntheticLandscapeSpec { seed: 99, ..small_spec(12) };
        let seqs = reference_population(&SyntheticLandscapeSpec { reference_samples: 1000, ..probe }).unwrap();
        let scores: Vec<RankScores> = seqs.iter().map(|s| land.scores(s)).collect();
        let vars: Vec<f64> = (0..4)
            .map(|r| mean_sd(&scores.iter().map(|v| v[r] - v[0]).collect::<Vec<_>>()).1.powi(2))
            .collect();
        assert!(vars.windows(2).all(|w| w[1] >= w[0]), "{vars:?}");
    }

    /// Direct recomputation of one-substitution deltas on short sequences.
    #[test]
    fn single_substitution_sensitivity() {
        for l in 2..=8 {
            let spec = SyntheticLandscapeSpec { epistasis_pairs: Some(l), ..small_spec(l) };
            let pairs = interaction_pairs(&spec, l);
            let s: Vec<AminoAcid> = (0..l).map(|i| AminoAcid::ALL[(i * 7) % 20]).collect();
            for p in 0..l {
                let mut t = s.clone();
                t[p] = AminoAcid::ALL[(p * 7 + 3) % 20];
                let mut expected = site_term(spec.seed, l, p, t[p]) - site_term(spec.seed, l, p, s[p]);
                for &(i, j) in pairs.iter().filter(|(i, j)| *i == p || *j == p) {
                    expected += spec.base_scale
                        * (coupling_term(spec.seed, l, i, j, t[i], t[j]) - coupling_term(spec.seed, l, i, j, s[i], s[j]));
                }
                let got = raw_f0(&spec, &t) - raw_f0(&spec, &s);
                assert!((got - expected).abs() < 1e-12, "l={l} p={p}");
            }
        }
    }

    #[test]
    fn pairs_are_distinct_and_bounded() {
        let spec = SyntheticLandscapeSpec::default();
        let p = interaction_pairs(&spec, 120);
        assert_eq!(p.len(), 120);
        let set: std::collections::HashSet<_> = p.iter().collect();
        assert_eq!(set.len(), 120);
        assert!(p.iter().all(|&(i, j)| i < j && j < 120));
        assert_eq!(interaction_pairs(&spec, 3).len(), 3);
        assert!(interaction_pairs(&spec, 1).is_empty());
    }

    #[test]
    fn validation() {
        assert!(SyntheticLandscapeSpec { rank_noise_scale: vec![3.0, 1.0, 2.0, 4.0], ..Default::default() }
            .validate()
            .is_err());
        assert!(SyntheticLandscapeSpec { rank_noise_scale: vec![1.0], ..Default::default() }.validate().is_err());
        assert!(SyntheticLandscape::new(SyntheticLandscapeSpec::default()).is_err());
    }

    /// Share of reference-population variance carried by the pairwise terms.
    #[test]
    fn default_epistatic_share() {
        let parent = fixtures::parent();
        let spec = SyntheticLandscapeSpec::default().resolve(&parent);
        let refs = reference_population(&spec).unwrap();
        let total: Vec<f64> = refs.iter().map(|s| raw_f0(&spec, s)).collect();
        let pairs = interaction_pairs(&spec, parent.len());
        let epi: Vec<f64> = refs
            .iter()
            .map(|s| spec.base_scale * pairs.iter().map(|&(i, j)| coupling_term(spec.seed, s.len(), i, j, s[i], s[j])).sum::<f64>())
            .collect();
        let share = mean_sd(&epi).1.powi(2) / mean_sd(&total).1.powi(2);
        eprintln!("epistatic share {share:.3}");
        assert!((0.2..0.4).contains(&share), "{share}");
    }
}
