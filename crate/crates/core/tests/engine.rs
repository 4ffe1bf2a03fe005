use std::collections::HashSet;
use std::time::Instant;

use rcc_mlde::engine::{
    initialize, load_state, resume, run_iteration, save_state, EmbeddingMode, Initialized, OracleMode, RunConfig,
    RunMode, RunState, Runtime,
};
use rcc_mlde::fixtures;
use rcc_mlde::oracle::{Oracle, RankScores, SyntheticLandscapeSpec};
use rcc_mlde::rcc::{rank_ids_consistent, AcquisitionParams};
use rcc_mlde::seqcore::{AminoAcid, RegionName, RegionSpan, Sequence};
use rcc_mlde::surrogate::{GbtSpec, MlpSpec, RegressorSpec};
use rcc_mlde::Error;

fn fast_config(mode: RunMode) -> RunConfig {
    RunConfig {
        seed: 5,
        candidates_per_iteration: 60,
        select_b: 10,
        committee_size: 3,
        mode,
        regressor: RegressorSpec { gbt: GbtSpec { trees: 20, ..Default::default() }, ..RegressorSpec::gbt() },
        embedding: EmbeddingMode::OnehotPca { d: 8, region_only: true },
        ..Default::default()
    }
}

fn start(config: &RunConfig, n: usize) -> Initialized {
    initialize(config, fixtures::initial_library(n, 0.3, 1).unwrap(), None).unwrap()
}

fn run(config: &RunConfig, n0: usize, iterations: usize) -> RunState {
    let Initialized { mut state, mut runtime, .. } = start(config, n0);
    for _ in 0..iterations {
        state = run_iteration(&state, config, &mut runtime).unwrap().state;
    }
    state
}

#[test]
fn initialization_fills_every_rank() {
    let c = fast_config(RunMode::MldeRcc);
    let init = start(&c, 50);
    assert_eq!(init.state.datasets.len(), 4);
    assert!(init.state.datasets.iter().all(|d| d.len() == 50));
    assert_eq!(init.state.population.len(), 50);
    assert_eq!(init.state.embedding_dim, 8);
    assert!(init.artifacts.get("population.csv").unwrap().lines().count() == 51);
}

struct Flat(f64, usize);

impl Oracle for Flat {
    fn ranks(&self) -> usize {
        self.1
    }
    fn evaluate(&mut self, batch: &[Sequence]) -> rcc_mlde::Result<Vec<RankScores>> {
        Ok(batch.iter().map(|_| vec![self.0; self.1]).collect())
    }
}

#[test]
fn infeasible_initial_sequences_are_excluded() {
    let c = fast_config(RunMode::DeOnly);
    let mut seqs = fixtures::initial_library(5, 0.3, 2).unwrap();
    let p = fixtures::parent();
    let mut bad = p.residues().to_vec();
    for r in &mut bad[96..103] {
        *r = AminoAcid::W;
    }
    seqs.push(Sequence::new("greasy", bad, p.regions().to_vec(), None).unwrap());
    let init = initialize(&c, seqs, None).unwrap();
    assert_eq!(init.state.records.len(), 5);
    assert_eq!(init.state.excluded.len(), 1);
    assert_eq!(init.state.excluded[0].id, "greasy");
    assert!(!init.state.excluded[0].reasons.is_empty());
}

#[test]
fn fitness_is_the_rank_weighted_mean() {
    let c = fast_config(RunMode::DeOnly);
    let Initialized { mut state, .. } = start(&c, 6);
    let mut rt = Runtime::with_oracle(Box::new(Flat(70.0, 4)), None);
    state = run_iteration(&state, &c, &mut rt).unwrap().state;
    let last = state.records.last().unwrap();
    assert_eq!(last.scores, vec![70.0; 4]);
    assert_eq!(last.fitness, 70.0);
}

#[test]
fn datasets_grow_by_b_and_stay_aligned() {
    for mode in [RunMode::DeOnly, RunMode::MldeBaseline, RunMode::MldeRcc] {
        let c = RunConfig { select_b: 50, candidates_per_iteration: 120, ..fast_config(mode) };
        let Initialized { mut state, mut runtime, .. } = start(&c, 30);
        for k in 1..=2 {
            let out = run_iteration(&state, &c, &mut runtime).unwrap();
            assert_eq!(out.state.iteration, k);
            assert!(out.state.datasets.iter().all(|d| d.len() == 30 + 50 * k));
            assert!(rank_ids_consistent(&out.state.datasets));
            assert!(out.state.records[30..].iter().all(|r| r.iteration_born >= 1));
            assert_eq!(out.artifacts.get("acquisition.csv").is_some(), mode != RunMode::DeOnly);
            assert_eq!(out.selected_reports.len(), if mode == RunMode::DeOnly { 0 } else { 50 });
            state = out.state;
        }
        let residues: HashSet<String> = state.records.iter().map(|r| r.sequence.residue_string()).collect();
        assert_eq!(residues.len(), state.records.len(), "a sequence was evaluated twice");
    }
}

#[test]
fn de_protocol_shape_with_45_per_loop() {
    let c = RunConfig { candidates_per_iteration: 45, select_b: 45, ..fast_config(RunMode::DeOnly) };
    let s = run(&c, 20, 3);
    assert_eq!(s.records.len(), 20 + 3 * 45);
    let kinds: HashSet<_> = s.records[20..].iter().map(|r| r.sequence.lineage.as_ref().unwrap().kind).collect();
    assert_eq!(kinds.len(), 2);
}

#[test]
fn runs_are_deterministic_and_resumable() {
    let c = fast_config(RunMode::MldeRcc);
    let a = serde_json::to_string(&run(&c, 20, 2)).unwrap();
    let b = serde_json::to_string(&run(&c, 20, 2)).unwrap();
    assert_eq!(a, b);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let Initialized { state, mut runtime, .. } = start(&c, 20);
    save_state(&state, &path).unwrap();
    let s0 = resume(&path, &c).unwrap();
    assert_eq!(s0, state);
    let s1 = run_iteration(&s0, &c, &mut runtime).unwrap().state;
    save_state(&s1, &path).unwrap();
    // Fresh runtime, as after a process restart.
    let mut fresh = Runtime::open(&c, &s1.oracle, None).unwrap();
    let s1 = resume(&path, &c).unwrap();
    let s2 = run_iteration(&s1, &c, &mut fresh).unwrap().state;
    assert_eq!(serde_json::to_string(&s2).unwrap(), a);
}

#[test]
fn edited_config_is_refused() {
    let c = fast_config(RunMode::DeOnly);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let Initialized { state, mut runtime, .. } = start(&c, 10);
    save_state(&state, &path).unwrap();
    let edited = RunConfig { select_b: 11, ..c.clone() };
    match resume(&path, &edited) {
        Err(Error::ConfigHashMismatch { expected, found }) => {
            assert_eq!(expected, c.hash());
            assert_eq!(found, edited.hash());
        }
        other => panic!("{other:?}"),
    }
    assert!(run_iteration(&state, &edited, &mut runtime).is_err());
    std::fs::write(&path, "{\"schema_version\": 1").unwrap();
    assert!(matches!(load_state(&path), Err(Error::CorruptState(_))));
}

struct Failing;

impl Oracle for Failing {
    fn ranks(&self) -> usize {
        4
    }
    fn evaluate(&mut self, _: &[Sequence]) -> rcc_mlde::Result<Vec<RankScores>> {
        Err(Error::OracleTimeout { secs: 1.0 })
    }
}

#[test]
fn oracle_failure_aborts_the_iteration() {
    let c = fast_config(RunMode::MldeRcc);
    let Initialized { state, .. } = start(&c, 10);
    let before = state.clone();
    let mut rt = Runtime::with_oracle(Box::new(Failing), None);
    assert!(run_iteration(&state, &c, &mut rt).is_err());
    assert_eq!(state, before);
}

/// With one rank and no conformational penalty, the rank-conditioned loop
/// reduces to the single-committee baseline.
#[test]
fn single_rank_rcc_collapses_to_baseline() {
    let oracle = SyntheticLandscapeSpec { ranks: 1, rank_noise_scale: vec![3.0], ..Default::default() };
    let acq = AcquisitionParams { kappa_conf: 0.0, kappa_epi: 2.0, kappa: 2.0, ..Default::default() };
    let rcc = RunConfig {
        ranks: 1,
        oracle: OracleMode::Synthetic(oracle),
        acquisition: acq,
        ..fast_config(RunMode::MldeRcc)
    };
    let base = RunConfig { mode: RunMode::MldeBaseline, ..rcc.clone() };
    let a = run(&rcc, 20, 2);
    let b = run(&base, 20, 2);
    assert_eq!(a.records, b.records);
    assert_eq!(a.population, b.population);
    assert_eq!(a.committees, b.committees);
}

#[test]
fn imported_embeddings_drive_the_model() {
    // Short sequences: every reachable variant gets a table row keyed by residues.
    let regions = vec![RegionSpan::new(RegionName::CdrH3, 1, 3)];
    let mk = |id: &str, r: &str| Sequence::parse(id, r).unwrap().with_regions(regions.clone()).unwrap();
    let initial = vec![mk("a", "GACG"), mk("b", "GAVG"), mk("c", "GLSG"), mk("d", "GTAG"), mk("e", "GMAG")];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    let mut text = String::from("id,e0,e1,e2\n");
    for a in AminoAcid::ALL {
        for b in AminoAcid::ALL {
            let (i, j) = (a.index() as f64, b.index() as f64);
            text.push_str(&format!("G{a}{b}G,{},{},{}\n", i / 19.0, j / 19.0, (i * j).sqrt() / 19.0));
        }
    }
    std::fs::write(&path, text).unwrap();
    let c = RunConfig {
        candidates_per_iteration: 20,
        select_b: 5,
        embedding: EmbeddingMode::External { path: path.clone() },
        oracle: OracleMode::Synthetic(SyntheticLandscapeSpec { reference_samples: 200, ..Default::default() }),
        ..fast_config(RunMode::MldeRcc)
    };
    let Initialized { state, mut runtime, .. } = initialize(&c, initial, None).unwrap();
    assert_eq!(state.embedding_dim, 3);
    let s = run_iteration(&state, &c, &mut runtime).unwrap().state;
    assert_eq!(s.records.len(), 10);
    assert!(s.datasets[0].entries.iter().all(|e| e.embedding.len() == 3));
}

/// Wall-clock probe for the default network at campaign scale.
#[test]
#[ignore]
fn timing_probe_default_mlp() {
    let c = RunConfig {
        seed: 1,
        regressor: RegressorSpec { mlp: MlpSpec::default(), ..Default::default() },
        ..Default::default()
    };
    let t = Instant::now();
    let s = run(&c, 50, 2);
    eprintln!("default campaign: {:?}, {} records", t.elapsed(), s.records.len());
}
