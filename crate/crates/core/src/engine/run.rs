//! Initialization and the per-iteration propose, score, select, label loop.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use log::{info, warn};

use super::artifacts::{candidates_csv, population_csv, selected_csv, IterationArtifacts};
use super::config::{EmbeddingMode, MatrixSource, OracleMode, RunConfig, RunMode};
use super::state::{ExcludedSequence, Record, ResolvedOracle, RunState, SCHEMA_VERSION};
use crate::embed::{load_embeddings, pca_fit, pca_project, EmbeddingVector, OneHotEncoder, PcaModel};
use crate::error::{Error, Result};
use crate::evolve::{cull, LibraryGenerator};
use crate::hash::{self, TAG_EVOLVE, TAG_MODEL};
use crate::oracle::{CachedOracle, ExternalOracle, Oracle, ScoreCache, SyntheticLandscape};
use crate::rcc::{
    acquisition, decompose, decompose_predictions, rank_seed, train_rank_committees, update_rank_datasets,
    AcquisitionMode, AcquisitionParams, AcquisitionReport, LabeledPoint, RankCommittees, RankDataset,
};
use crate::seqcore::{
    build_substitution_matrix, check_developability, corpus_segments, Sequence, SubstitutionMatrix,
};
use crate::surrogate::{committee_predict, train_committee};

pub type EmbeddingTable = BTreeMap<String, EmbeddingVector>;

/// Oracle and imported embeddings for a campaign.
pub struct Runtime {
    pub oracle: Box<dyn Oracle>,
    pub embeddings: Option<EmbeddingTable>,
}

impl Runtime {
    /// Build the oracle (behind a score cache) and load any imported embeddings.
    pub fn open(config: &RunConfig, resolved: &ResolvedOracle, cache_path: Option<&Path>) -> Result<Runtime> {
        let cache = match cache_path {
            Some(p) => ScoreCache::open(p, resolved.cache_id(), config.ranks)?,
            None => ScoreCache::in_memory(resolved.cache_id()),
        };
        let oracle: Box<dyn Oracle> = match resolved {
            ResolvedOracle::Synthetic(spec) => {
                Box::new(CachedOracle::new(SyntheticLandscape::new(spec.clone())?, cache))
            }
            ResolvedOracle::External(spec) => {
                Box::new(CachedOracle::new(ExternalOracle::new(spec.clone(), config.ranks)?, cache))
            }
        };
        let embeddings = match &config.embedding {
            EmbeddingMode::External { path } => Some(load_embeddings(path)?),
            EmbeddingMode::OnehotPca { .. } => None,
        };
        Ok(Runtime { oracle, embeddings })
    }

    pub fn with_oracle(oracle: Box<dyn Oracle>, embeddings: Option<EmbeddingTable>) -> Runtime {
        Runtime { oracle, embeddings }
    }
}

pub fn resolve_oracle(config: &RunConfig, first: &Sequence) -> ResolvedOracle {
    match &config.oracle {
        OracleMode::Synthetic(s) => ResolvedOracle::Synthetic(s.resolve(first)),
        OracleMode::External(e) => ResolvedOracle::External(e.clone()),
    }
}

fn weighted(scores: &[f64], w: &[f64]) -> f64 {
    scores.iter().zip(w).map(|(s, w)| s * w).sum()
}

fn evaluate(oracle: &mut dyn Oracle, batch: &[Sequence], ranks: usize) -> Result<Vec<Vec<f64>>> {
    let scores = oracle.evaluate(batch)?;
    if scores.len() != batch.len() {
        return Err(Error::MissingResponse(format!("{} of {} sequences", batch.len() - scores.len(), batch.len())));
    }
    for (s, v) in batch.iter().zip(&scores) {
        if v.len() != ranks {
            return Err(Error::ScoreArity { id: s.id.clone(), expected: ranks, got: v.len() });
        }
    }
    Ok(scores)
}

/// Outcome of run initialization.
pub struct Initialized {
    pub state: RunState,
    pub runtime: Runtime,
    pub artifacts: IterationArtifacts,
}

/// Screen, evaluate and register the initial sequences.
pub fn initialize(config: &RunConfig, initial: Vec<Sequence>, cache_path: Option<&Path>) -> Result<Initialized> {
    config.validate()?;
    if initial.is_empty() {
        return Err(Error::InvalidInput("no initial sequences".into()));
    }
    let layout = &initial[0];
    if let Some(bad) = initial.iter().find(|s| s.len() != layout.len() || s.regions() != layout.regions()) {
        return Err(Error::LayoutMismatch(format!(
            "`{}` differs in length or regions from `{}`",
            bad.id, layout.id
        )));
    }
    let mut feasible = Vec::new();
    let mut excluded = Vec::new();
    for s in initial {
        let report = check_developability(s.residues(), &config.developability);
        if report.passed {
            feasible.push(s);
        } else {
            let reasons = report.reasons(&config.developability);
            warn!("excluding `{}`: {}", s.id, reasons.join("; "));
            excluded.push(ExcludedSequence { id: s.id.clone(), reasons });
        }
    }
    if feasible.is_empty() {
        return Err(Error::InvalidInput("no initial sequence passes the developability screen".into()));
    }
    if config.mode.uses_model() && feasible.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "model-guided runs need at least 3 feasible initial sequences, got {}",
            feasible.len()
        )));
    }

    let resolved = resolve_oracle(config, &feasible[0]);
    let mut runtime = Runtime::open(config, &resolved, cache_path)?;
    let matrix = match &config.matrix {
        MatrixSource::Uniform => SubstitutionMatrix::uniform_off_diagonal(),
        MatrixSource::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SubstitutionMatrix::from_csv(&text)?
        }
        MatrixSource::Corpus { pseudocount, alignment, pooling } => {
            if feasible.len() < 2 {
                return Err(Error::InsufficientData("corpus matrix needs at least 2 sequences".into()));
            }
            build_substitution_matrix(&corpus_segments(&feasible, *pooling), alignment, *pseudocount)?
        }
    };
    let (encoder, embedding_dim) = match &config.embedding {
        EmbeddingMode::OnehotPca { d, region_only } => {
            let enc = OneHotEncoder::for_layout(&feasible[0], *region_only)?;
            let dim = (*d).min(feasible.len() - 1).min(enc.dim());
            if dim < *d {
                info!("embedding dimension lowered from {d} to {dim} for this run");
            }
            (Some(enc), dim)
        }
        EmbeddingMode::External { .. } => {
            let table = runtime.embeddings.as_ref().unwrap();
            (None, table.values().next().map_or(0, |v| v.dim()))
        }
    };

    let scores = evaluate(runtime.oracle.as_mut(), &feasible, config.ranks)?;
    let weights = config.weights();
    let records: Vec<Record> = feasible
        .into_iter()
        .zip(scores)
        .map(|(sequence, scores)| Record { fitness: weighted(&scores, &weights), sequence, scores, iteration_born: 0 })
        .collect();
    let points: Vec<LabeledPoint> = records
        .iter()
        .map(|r| LabeledPoint { id: r.sequence.id.clone(), embedding: Vec::new(), scores: r.scores.clone() })
        .collect();
    let datasets = update_rank_datasets(&RankDataset::empty_set(config.ranks), &points)?;
    let state = RunState {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        iteration: 0,
        rng_cursor: 0,
        oracle: resolved,
        weights,
        matrix,
        encoder,
        embedding_dim,
        population: records.iter().map(|r| r.sequence.id.clone()).collect(),
        records,
        datasets,
        pca: None,
        committees: None,
        excluded,
    };
    let pop = state.breeding_population()?;
    let artifacts = IterationArtifacts {
        iteration: 0,
        files: vec![("population.csv".into(), population_csv(&pop, &state))],
    };
    info!("initialized with {} sequences", state.records.len());
    Ok(Initialized { state, runtime, artifacts })
}

/// Step 1: a feasible, novel candidate library bred from the population.
pub fn generate_candidates(state: &RunState, config: &RunConfig) -> Result<Vec<Sequence>> {
    let n = state.iteration;
    let pop = state.breeding_population()?;
    let exclude: HashSet<String> = state.records.iter().map(|r| r.sequence.residue_string()).collect();
    let generator = LibraryGenerator {
        matrix: &state.matrix,
        params: &config.evolution,
        thresholds: &config.developability,
    };
    let mut rng = hash::stream(config.seed, &[TAG_EVOLVE, n as u64]);
    generator.generate(&pop, config.candidates_per_iteration, &exclude, &format!("i{}-", n + 1), &mut rng)
}

/// Embeddings of the labeled set (dataset order) and of the candidates.
pub struct Embedded {
    pub pca: Option<PcaModel>,
    pub labeled: Vec<Vec<f64>>,
    pub candidates: Vec<Vec<f64>>,
}

/// Step 2: embed, refitting PCA on the labeled set.
pub fn embed_iteration(state: &RunState, rt: &Runtime, candidates: &[Sequence]) -> Result<Embedded> {
    let labeled: Vec<&Sequence> = state.records.iter().map(|r| &r.sequence).collect();
    if let Some(table) = &rt.embeddings {
        let look = |s: &Sequence| {
            table
                .get(&s.id)
                .or_else(|| table.get(&s.residue_string()))
                .map(|v| v.0.clone())
                .ok_or_else(|| Error::InvalidInput(format!("no imported embedding for `{}`", s.id)))
        };
        return Ok(Embedded {
            pca: None,
            labeled: labeled.iter().map(|s| look(s)).collect::<Result<_>>()?,
            candidates: candidates.iter().map(look).collect::<Result<_>>()?,
        });
    }
    let enc = state
        .encoder
        .as_ref()
        .ok_or_else(|| Error::CorruptState("one-hot run without an encoder".into()))?;
    let raw: Vec<Vec<f64>> = labeled.iter().map(|s| enc.encode(s)).collect::<Result<_>>()?;
    let pca = pca_fit(&raw, state.embedding_dim)?;
    let project = |x: &[f64]| pca_project(&pca, x).map(|v| v.0);
    let labeled = raw.iter().map(|x| project(x)).collect::<Result<_>>()?;
    let candidates = candidates
        .iter()
        .map(|s| enc.encode(s).and_then(|x| project(&x)))
        .collect::<Result<_>>()?;
    Ok(Embedded { pca: Some(pca), labeled, candidates })
}

pub fn with_embeddings(datasets: &[RankDataset], labeled: &[Vec<f64>]) -> Vec<RankDataset> {
    datasets
        .iter()
        .map(|d| {
            let mut d = d.clone();
            for (e, x) in d.entries.iter_mut().zip(labeled) {
                e.embedding = x.clone();
            }
            d
        })
        .collect()
}

/// Trained models and per-candidate acquisition reports (α filled in).
pub struct Scored {
    pub committees: RankCommittees,
    pub reports: Vec<AcquisitionReport>,
}

pub fn model_seed(config: &RunConfig, iteration: usize) -> u64 {
    hash::mix(config.seed, &[TAG_MODEL, iteration as u64])
}

/// Train R rank committees on the rank datasets and score candidates.
pub fn score_rcc(
    datasets: &[RankDataset],
    weights: &[f64],
    config: &RunConfig,
    seed: u64,
    candidates: &[Vec<f64>],
    params: &AcquisitionParams,
) -> Result<Scored> {
    let committees = train_rank_committees(datasets, weights, &config.regressor, config.committee_size, seed)?;
    let reports = candidates
        .iter()
        .map(|x| {
            let mut r = decompose(&committees, x)?;
            r.alpha = Some(acquisition(&r, params));
            Ok(r)
        })
        .collect::<Result<_>>()?;
    Ok(Scored { committees, reports })
}

/// One committee on rank-weighted labels with total-variance UCB.
pub fn score_baseline(
    labeled: &[Vec<f64>],
    fitness: &[f64],
    config: &RunConfig,
    seed: u64,
    candidates: &[Vec<f64>],
) -> Result<Scored> {
    let committee = train_committee(&config.regressor, labeled, fitness, config.committee_size, rank_seed(seed, 1))?;
    let params = AcquisitionParams { mode: AcquisitionMode::UcbTotal, ..config.acquisition.clone() };
    let reports = candidates
        .iter()
        .map(|x| {
            let mut r = decompose_predictions(&[committee_predict(&committee, x)?], &[1.0]);
            r.alpha = Some(acquisition(&r, &params));
            Ok(r)
        })
        .collect::<Result<_>>()?;
    Ok(Scored { committees: RankCommittees { committees: vec![committee], weights: vec![1.0] }, reports })
}

/// Result of a completed iteration.
pub struct IterationOutcome {
    pub state: RunState,
    pub artifacts: IterationArtifacts,
    /// Acquisition reports of the selected batch (model-guided modes only).
    pub selected_reports: Vec<AcquisitionReport>,
    /// Fewer candidates than B were available.
    pub short: bool,
}

/// Advance the campaign by one iteration. The input state is never modified.
pub fn run_iteration(state: &RunState, config: &RunConfig, rt: &mut Runtime) -> Result<IterationOutcome> {
    let found = config.hash();
    if state.config_hash != found {
        return Err(Error::ConfigHashMismatch { expected: state.config_hash.clone(), found });
    }
    let n = state.iteration;
    let b = config.select_b;
    let candidates = generate_candidates(state, config)?;
    let mut files = vec![("candidates.csv".to_string(), candidates_csv(&candidates))];

    let (chosen, embeddings, datasets, pca, committees, selected_reports, short) = if config.mode.uses_model() {
        let emb = embed_iteration(state, rt, &candidates)?;
        let datasets = with_embeddings(&state.datasets, &emb.labeled);
        let seed = model_seed(config, n);
        let scored = match config.mode {
            RunMode::MldeRcc => score_rcc(&datasets, &state.weights, config, seed, &emb.candidates, &config.acquisition)?,
            _ => {
                let fitness: Vec<f64> = state.records.iter().map(|r| r.fitness).collect();
                score_baseline(&emb.labeled, &fitness, config, seed, &emb.candidates)?
            }
        };
        let alphas: Vec<(String, f64)> = candidates
            .iter()
            .zip(&scored.reports)
            .map(|(c, r)| (c.id.clone(), r.alpha.unwrap()))
            .collect();
        let (ids, short) = crate::rcc::select_top_b(&alphas, b);
        let index: HashMap<&str, usize> = candidates.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
        let chosen: Vec<usize> = ids.iter().map(|id| index[id.as_str()]).collect();
        let picked: HashSet<usize> = chosen.iter().copied().collect();
        let rows: Vec<(String, AcquisitionReport, bool)> = candidates
            .iter()
            .zip(&scored.reports)
            .enumerate()
            .map(|(i, (c, r))| (c.id.clone(), r.clone(), picked.contains(&i)))
            .collect();
        files.push(("acquisition.csv".into(), crate::rcc::acquisition_csv(&rows)));
        let reports = chosen.iter().map(|&i| scored.reports[i].clone()).collect();
        let cand_emb: Vec<Vec<f64>> = chosen.iter().map(|&i| emb.candidates[i].clone()).collect();
        (chosen, cand_emb, datasets, emb.pca, Some(scored.committees), reports, short)
    } else {
        let k = b.min(candidates.len());
        ((0..k).collect(), vec![Vec::new(); k], state.datasets.clone(), None, None, Vec::new(), k < b)
    };
    if short {
        warn!("only {} candidates available for a batch of {b}", chosen.len());
    }

    let selected: Vec<Sequence> = chosen.iter().map(|&i| candidates[i].clone()).collect();
    let scores = evaluate(rt.oracle.as_mut(), &selected, config.ranks)?;
    let new_records: Vec<Record> = selected
        .into_iter()
        .zip(scores)
        .map(|(sequence, scores)| Record {
            fitness: weighted(&scores, &state.weights),
            sequence,
            scores,
            iteration_born: n + 1,
        })
        .collect();
    let points: Vec<LabeledPoint> = new_records
        .iter()
        .zip(embeddings)
        .map(|(r, e)| LabeledPoint { id: r.sequence.id.clone(), embedding: e, scores: r.scores.clone() })
        .collect();
    let datasets = update_rank_datasets(&datasets, &points)?;

    let mut next = state.clone();
    next.records.extend(new_records.iter().cloned());
    next.population.extend(new_records.iter().map(|r| r.sequence.id.clone()));
    next.datasets = datasets;
    next.pca = pca;
    next.committees = committees;
    let mut pop = next.breeding_population()?;
    if config.culling {
        let before = pop.len();
        pop = cull(&pop);
        if pop.len() < before {
            info!("culled {} members", before - pop.len());
        }
    }
    next.population = pop.members.iter().map(|m| m.sequence.id.clone()).collect();
    next.iteration = n + 1;
    next.rng_cursor = next.iteration as u64;
    next.check()?;

    files.push(("selected.csv".into(), selected_csv(&new_records)));
    files.push(("population.csv".into(), population_csv(&pop, &next)));
    let mean = new_records.iter().map(|r| r.fitness).sum::<f64>() / new_records.len().max(1) as f64;
    info!("iteration {} selected {} sequences, mean fitness {mean:.3}", n + 1, new_records.len());
    Ok(IterationOutcome {
        state: next,
        artifacts: IterationArtifacts { iteration: n + 1, files },
        selected_reports,
        short,
    })
}
