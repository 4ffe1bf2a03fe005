use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use log::info;

use rcc_mlde::analysis::{batch_summaries, emit_histogram, parent_regression, percent_improvement, regression_text, summaries_csv, Scored};
use rcc_mlde::engine::{initialize, load_state, resume, run_iteration, save_state, write_atomic, RunConfig, RunState, Runtime};
use rcc_mlde::oracle::{conformance_check, ExternalOracleSpec};
use rcc_mlde::seqcore::{apply_regions, build_substitution_matrix, corpus_segments, parse_fasta, parse_region_map, AlignmentParams, RegionPooling, Sequence};

const STATE: &str = "state.json";
const CONFIG: &str = "config.json";
const CACHE: &str = "oracle_cache.csv";
const LOCK: &str = "campaign.lock";

#[derive(Parser)]
#[command(name = "rcc-mlde", version, about = "Rank-conditioned committee MLDE campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a run directory and evaluate the initial library.
    Init {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        fasta: PathBuf,
        /// JSON map from sequence id to CDR spans.
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing run directory.
        #[arg(long)]
        force: bool,
    },
    /// Run more iterations; defaults to the configured count.
    Run {
        #[arg(long)]
        rundir: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Continue until the configured iteration count is reached.
    Resume {
        #[arg(long)]
        rundir: PathBuf,
    },
    /// Batch summaries, parent regressions and histograms.
    Analyze {
        #[arg(long)]
        rundir: PathBuf,
        /// Defaults to the configured batch size B.
        #[arg(long)]
        batch_size: Option<usize>,
        /// Output directory, the run directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Substitution matrix CSV from a sequence corpus.
    Matrix {
        #[arg(long)]
        fasta: PathBuf,
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        pseudocount: f64,
        #[arg(long)]
        force: bool,
    },
    /// Send fixture sequences to an external oracle and check its replies.
    OracleCheck {
        #[arg(long, default_value_t = 4)]
        ranks: usize,
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        /// Program and arguments; must come last.
        #[arg(long, required = true, num_args = 1.., allow_hyphen_values = true)]
        cmd: Vec<String>,
    },
}

/// Bad input from the user; exits with 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<rcc_mlde::Error>() {
            return if e.is_validation() { 2 } else { 1 };
        }
    }
    1
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_sequences(fasta: &Path, regions: Option<&Path>) -> anyhow::Result<Vec<Sequence>> {
    let seqs = parse_fasta(&read_input(fasta)?).with_context(|| fasta.display().to_string())?;
    match regions {
        Some(r) => {
            let map = parse_region_map(&read_input(r)?).with_context(|| r.display().to_string())?;
            Ok(apply_regions(seqs, &map).with_context(|| r.display().to_string())?)
        }
        None => Ok(seqs),
    }
}

/// Exclusive hold on a run directory, released on drop.
struct Lock(PathBuf);

impl Lock {
    fn take(rundir: &Path) -> anyhow::Result<Lock> {
        let path = rundir.join(LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| anyhow!("cannot lock {}: {e} (is another campaign running here?)", rundir.display()))?;
        Ok(Lock(path))
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

fn open_run(rundir: &Path) -> anyhow::Result<(RunConfig, RunState)> {
    let mut config = RunConfig::load(&rundir.join(CONFIG))?;
    config.resolve_paths(rundir);
    let state = resume(&rundir.join(STATE), &config)?;
    Ok((config, state))
}

fn cmd_init(config: &Path, fasta: &Path, regions: Option<&Path>, out: &Path, force: bool) -> anyhow::Result<()> {
    let text = read_input(config)?;
    let mut cfg = RunConfig::from_json(&text).with_context(|| config.display().to_string())?;
    cfg.resolve_paths(config.parent().unwrap_or(Path::new(".")));
    let initial = load_sequences(fasta, regions)?;
    if out.join(STATE).exists() || out.join(CONFIG).exists() {
        if !force {
            return Err(usage(format!("{} already holds a run; pass --force to replace it", out.display())));
        }
        for name in [STATE, CONFIG, CACHE] {
            let p = out.join(name);
            if p.exists() {
                std::fs::remove_file(&p).with_context(|| p.display().to_string())?;
            }
        }
        for entry in std::fs::read_dir(out)? {
            let p = entry?.path();
            if p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("iter_")) {
                std::fs::remove_dir_all(&p)?;
            }
        }
    }
    std::fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    let _lock = Lock::take(out)?;
    let init = initialize(&cfg, initial, Some(&out.join(CACHE)))?;
    write_atomic(&out.join(CONFIG), cfg.to_json_pretty().as_bytes())?;
    init.artifacts.write(out)?;
    save_state(&init.state, &out.join(STATE))?;
    let mean = init.state.records.iter().map(|r| r.fitness).sum::<f64>() / init.state.records.len() as f64;
    println!("config hash {}", cfg.hash());
    println!(
        "initialized {} with {} sequences ({} excluded), mean fitness {mean:.3}",
        out.display(),
        init.state.records.len(),
        init.state.excluded.len()
    );
    Ok(())
}

fn advance(rundir: &Path, target: impl FnOnce(&RunConfig, &RunState) -> usize) -> anyhow::Result<()> {
    if !rundir.join(STATE).is_file() {
        return Err(usage(format!("{} has no {STATE}; run init first", rundir.display())));
    }
    let _lock = Lock::take(rundir)?;
    let (config, mut state) = open_run(rundir)?;
    let steps = target(&config, &state);
    if steps == 0 {
        println!("nothing to do at iteration {}", state.iteration);
        return Ok(());
    }
    let mut rt = Runtime::open(&config, &state.oracle, Some(&rundir.join(CACHE)))?;
    for _ in 0..steps {
        let out = run_iteration(&state, &config, &mut rt)
            .with_context(|| format!("iteration {} failed; state left at iteration {}", state.iteration + 1, state.iteration))?;
        out.artifacts.write(rundir)?;
        save_state(&out.state, &rundir.join(STATE))?;
        state = out.state;
        let born: Vec<f64> = state.records.iter().filter(|r| r.iteration_born == state.iteration).map(|r| r.fitness).collect();
        let mean = born.iter().sum::<f64>() / born.len().max(1) as f64;
        let best = born.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "iteration {}: {} evaluated, mean fitness {mean:.3}, best {best:.3}{}",
            state.iteration,
            born.len(),
            if out.short { " (short batch)" } else { "" }
        );
    }
    Ok(())
}

fn cmd_analyze(rundir: &Path, batch_size: Option<usize>, out: Option<&Path>) -> anyhow::Result<()> {
    let state = load_state(&rundir.join(STATE))?;
    let b = match batch_size {
        Some(b) => b,
        None => RunConfig::load(&rundir.join(CONFIG))?.select_b,
    };
    let out = out.unwrap_or(rundir);
    std::fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    let scored: Vec<Scored> = state
        .records
        .iter()
        .map(|r| Scored { iteration_born: r.iteration_born, fitness: r.fitness })
        .collect();
    let summaries = batch_summaries(&scored, b).map_err(|e| usage(e.to_string()))?;
    write_atomic(&out.join("summaries.csv"), summaries_csv(&summaries).as_bytes())?;
    let reg = parent_regression(&state.records);
    for n in &reg.notices {
        info!("{n}");
    }
    write_atomic(&out.join("regression.txt"), regression_text(&reg).as_bytes())?;
    let mut per_batch = Vec::new();
    let initial: Vec<f64> = scored.iter().filter(|s| s.iteration_born == 0).map(|s| s.fitness).collect();
    if !initial.is_empty() {
        per_batch.push(initial);
    }
    let later: Vec<f64> = scored.iter().filter(|s| s.iteration_born > 0).map(|s| s.fitness).collect();
    per_batch.extend(later.chunks(b).map(<[f64]>::to_vec));
    emit_histogram(&summaries, &per_batch, out)?;
    let base = summaries.first().filter(|s| s.label == "initial").map(|s| s.mean);
    for s in &summaries {
        let gain = match base {
            Some(m0) if s.label != "initial" => format!(" ({:+.1}%)", percent_improvement(m0, s.mean)),
            _ => String::new(),
        };
        println!("{}: n = {}, mean {:.2}{gain}, variance {:.2}", s.label, s.count, s.mean, s.variance);
    }
    Ok(())
}

fn cmd_matrix(fasta: &Path, regions: Option<&Path>, out: &Path, pseudocount: f64, force: bool) -> anyhow::Result<()> {
    if out.exists() && !force {
        return Err(usage(format!("{} exists; pass --force to overwrite", out.display())));
    }
    let seqs = load_sequences(fasta, regions)?;
    if seqs.len() < 2 {
        return Err(usage("the corpus needs at least 2 sequences"));
    }
    let m = build_substitution_matrix(
        &corpus_segments(&seqs, RegionPooling::Pooled),
        &AlignmentParams::default(),
        pseudocount,
    )?;
    write_atomic(out, m.to_csv().as_bytes())?;
    println!("wrote a 20x20 substitution matrix from {} sequences to {}", seqs.len(), out.display());
    Ok(())
}

fn cmd_oracle_check(cmd: Vec<String>, ranks: usize, timeout: f64) -> anyhow::Result<()> {
    if ranks == 0 {
        return Err(usage("--ranks must be at least 1"));
    }
    let spec = ExternalOracleSpec { command: cmd, timeout_secs: timeout, negate_scores: false };
    let report = conformance_check(&spec, ranks);
    for d in &report.diagnostics {
        println!("{d}");
    }
    println!("{}", report.verdict());
    if !report.passed {
        bail!("oracle failed the conformance check");
    }
    Ok(())
}

fn main() -> ExitCode {
    let env = env_logger::Env::new().filter_or("RCC_MLDE_LOG", "warn");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Init { config, fasta, regions, out, force } => cmd_init(&config, &fasta, regions.as_deref(), &out, force),
        Command::Run { rundir, iterations } => {
            advance(&rundir, |c, _| iterations.unwrap_or(c.iterations))
        }
        Command::Resume { rundir } => advance(&rundir, |c, s| c.iterations.saturating_sub(s.iteration)),
        Command::Analyze { rundir, batch_size, out } => cmd_analyze(&rundir, batch_size, out.as_deref()),
        Command::Matrix { fasta, regions, out, pseudocount, force } => {
            cmd_matrix(&fasta, regions.as_deref(), &out, pseudocount, force)
        }
        Command::OracleCheck { cmd, ranks, timeout } => cmd_oracle_check(cmd, ranks, timeout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
