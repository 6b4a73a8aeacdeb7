//! `ldtm` command line.
//!
//! Every subcommand writes its artifacts plus a `run.json` manifest into
//! `--out`. A `--config` file holds `key = value` lines whose keys are the
//! long flag names of the subcommand; flags given on the command line win.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    filter_interactions, ingest_events, make_holdout, pair_tasks, read_events, read_interactions, sustained_steps,
    unordered, write_interactions, Corpus, HeldOutToken, Hypothesis, InteractionRecord, PruneRules,
};
use crate::dynamics::DescentOptions;
use crate::error::{Error, ErrorCategory, Result};
use crate::eval::{model_all_at_t, ratio, write_metric_csv, write_trace_csv, MetricRow};
use crate::granger::{read_tsc_rows, tsc_window, write_tsc_rows, FStatForm, FilledSeries, SeriesWindow, TscRow};
use crate::ldtm::{run_inference, DynamicsMode, Model, ModelConfig};
use crate::rng::{self, stream};
use crate::synth::{generate_corpus, planted_truth, write_corpus_events};

pub const MANIFEST: &str = "run.json";

#[derive(Debug, Parser)]
#[command(name = "ldtm", version, about = "Temporal topic dynamics and social correlation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a corpus snapshot from adoption events.
    Ingest(IngestArgs),
    /// Fit a model and write its snapshot and likelihood trace.
    Train(TrainArgs),
    /// Held-out ALL@t, either by training on nested splits or from snapshots.
    Eval(EvalArgs),
    /// Temporal social correlation for interaction pairs.
    Tsc(TscArgs),
    /// Ratio of pairs whose forward TSC wins, binned by sustained steps.
    Ratio(RatioArgs),
    /// Sample a corpus and interactions from planted parameters.
    Synth(SynthArgs),
    /// Re-execute the run recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Key-value file of default flag values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads for pair and split parallelism.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    /// Tab-separated `user, time, item[, count]` lines.
    #[arg(long, value_name = "FILE")]
    events: PathBuf,
    /// One stopword per line.
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    min_frequency: u64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 26)]
    topics: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial step of the decay line search.
    #[arg(long, default_value_t = 0.1)]
    learn_rate: f64,
    #[arg(long, default_value_t = 100)]
    max_steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    backtracking: bool,
    /// Extra constant starting points for the decay search, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    extra_starts: Vec<f64>,
    /// Normalize topic-item weights by `K beta` instead of `M beta`.
    #[arg(long = "paper-exact-gibbs", default_value_t = false, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    k_beta_normalizer: bool,
}

impl ModelArgs {
    fn config(&self, mode: DynamicsMode) -> ModelConfig {
        ModelConfig {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            dynamics_mode: mode,
            seed: self.seed,
            descent: DescentOptions {
                learn_rate: self.learn_rate,
                max_steps: self.max_steps,
                tolerance: self.tolerance,
                backtracking: self.backtracking,
                extra_starts: self.extra_starts.clone(),
            },
            k_beta_normalizer: self.k_beta_normalizer,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus snapshot from `ingest` or `synth`.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, default_value = "learned", value_parser = parse_mode)]
    mode: DynamicsMode,
    #[command(flatten)]
    model: ModelArgs,
    /// Hide this percentage of tokens and write them to `heldout.json`.
    #[arg(long)]
    holdout_level: Option<u32>,
    /// Seed of the holdout shuffle; defaults to `--seed`.
    #[arg(long)]
    holdout_seed: Option<u64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus snapshot to split and train on.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["model", "heldout"])]
    corpus: Option<PathBuf>,
    /// Model snapshots to score against `--heldout`; repeatable.
    #[arg(long, value_name = "FILE", requires = "heldout")]
    model: Vec<PathBuf>,
    /// Held-out tokens written by `train --holdout-level`.
    #[arg(long, value_name = "FILE")]
    heldout: Option<PathBuf>,
    /// Nested holdout percentages, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    levels: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "identity,half_decay,full_decay,learned", value_parser = parse_mode)]
    modes: Vec<DynamicsMode>,
    #[arg(long)]
    holdout_seed: Option<u64>,
    #[command(flatten)]
    params: ModelArgs,
}

#[derive(Debug, Args)]
struct PairArgs {
    /// Interaction records: `tau` then the users in listed order, tab separated.
    #[arg(long, value_name = "FILE")]
    interactions: PathBuf,
    #[arg(long, default_value = "AB", value_parser = parse_hypothesis)]
    hypothesis: Hypothesis,
    /// Ignore records past this time step.
    #[arg(long)]
    max_time: Option<usize>,
    /// Keep records whose users are listed alphabetically by last name.
    #[arg(long, default_value_t = false, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    keep_alphabetical: bool,
}

impl PairArgs {
    fn records(&self) -> Result<Vec<InteractionRecord>> {
        let records = read_interactions(open(&self.interactions)?, self.max_time)?;
        Ok(if self.keep_alphabetical {
            records
        } else {
            filter_interactions(&records)
        })
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct TscArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[command(flatten)]
    pairs: PairArgs,
    #[arg(long, default_value_t = crate::granger::DEFAULT_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = crate::granger::DEFAULT_LOOKAHEAD)]
    lookahead: usize,
    /// `compact` scales by `(2L - 1) / W`; `classical` uses residual degrees of freedom.
    #[arg(long, default_value = "compact", value_parser = parse_form)]
    f_form: FStatForm,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct RatioArgs {
    #[command(flatten)]
    common: Common,
    /// Rows written by `tsc`.
    #[arg(long, value_name = "FILE")]
    tsc: PathBuf,
    #[command(flatten)]
    pairs: PairArgs,
    #[arg(long, default_value_t = crate::eval::RATIO_MIN_SUPPORT)]
    min_support: usize,
    /// Value of the `model` column.
    #[arg(long, default_value = "tsc")]
    label: String,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 50)]
    users: usize,
    #[arg(long, default_value_t = 12)]
    steps: usize,
    #[arg(long, default_value_t = 5)]
    topics: usize,
    #[arg(long, default_value_t = 200)]
    items: usize,
    #[arg(long, default_value_t = 40)]
    tokens_per_step: usize,
    /// Decay of the decaying users; the others keep decay 1.
    #[arg(long, default_value_t = 0.1)]
    decay: f64,
    /// Share of users, chosen by a seeded shuffle, that get `--decay`.
    #[arg(long, default_value_t = 0.5)]
    decaying_fraction: f64,
    /// Number of random interaction records to write.
    #[arg(long, default_value_t = 0)]
    interactions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Output directory for the replayed run.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<DynamicsMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hypothesis(s: &str) -> std::result::Result<Hypothesis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_form(s: &str) -> std::result::Result<FStatForm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Reproducibility record written next to every run's artifacts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective arguments after config-file expansion, program name excluded.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub config: Option<ModelConfig>,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

/// Held-out tokens of one split, tied to the corpus they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOutFile {
    pub vocabulary_fingerprint: String,
    pub level: u32,
    pub seed: u64,
    pub tokens: Vec<HeldOutToken>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr as
/// `error: category=<usage|data|numeric> message=<text>`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match run(args) {
        Ok(()) => 0,
        Err(Failure::Clap(e)) => {
            let code = if e.use_stderr() {
                ErrorCategory::Usage.exit_code()
            } else {
                0
            };
            if code == 0 {
                let _ = e.print();
            } else {
                let msg = e.kind().to_string();
                eprint!("{}", e.render());
                report(ErrorCategory::Usage, &msg);
            }
            code
        }
        Err(Failure::Run(e)) => {
            report(e.category(), &e.to_string());
            e.category().exit_code()
        }
    }
}

fn report(cat: ErrorCategory, msg: &str) {
    let line = msg.replace(['\n', '\r'], " ");
    eprintln!("error: category={} message={}", cat.as_str(), line.trim());
}

enum Failure {
    Clap(clap::Error),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn run(raw: Vec<OsString>) -> std::result::Result<(), Failure> {
    let args = expand_config(raw)?;
    let cli = Cli::try_parse_from(&args).map_err(Failure::Clap)?;
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, recorded)?,
        Command::Train(a) => cmd_train(&a, recorded)?,
        Command::Eval(a) => cmd_eval(&a, recorded)?,
        Command::Tsc(a) => cmd_tsc(&a, recorded)?,
        Command::Ratio(a) => cmd_ratio(&a, recorded)?,
        Command::Synth(a) => cmd_synth(&a, recorded)?,
        Command::Replay(a) => return cmd_replay(&a),
    }
    Ok(())
}

/// Replaces `--config FILE` with the file's `--key=value` pairs, spliced in
/// directly after the subcommand so command-line flags override them.
fn expand_config(raw: Vec<OsString>) -> std::result::Result<Vec<OsString>, Failure> {
    let mut path = None;
    let mut rest = Vec::with_capacity(raw.len());
    let mut iter = raw.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = iter.next().map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let raw = rest;
    let Some(path) = path else { return Ok(raw) };
    let text = fs::read_to_string(&path).map_err(|e| {
        Failure::Run(Error::InvalidConfig(format!(
            "cannot read config {}: {e}",
            path.display()
        )))
    })?;
    let pairs = parse_config(&text)?;
    let sub = raw
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(raw.len());
    let mut out: Vec<OsString> = raw[..sub].to_vec();
    out.extend(pairs.into_iter().map(|(k, v)| OsString::from(format!("--{k}={v}"))));
    out.extend(raw[sub..].iter().cloned());
    Ok(out)
}

/// `key = value` per line; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected `key = value`", i + 1)))?;
        let k = k.trim().replace('_', "-");
        if k.is_empty() || k == "config" {
            return Err(Error::InvalidConfig(format!("config line {}: bad key `{k}`", i + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut f = open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

struct Run<'a> {
    out: &'a Path,
    manifest: Manifest,
}

impl<'a> Run<'a> {
    fn start(common: &'a Common, command: &str, args: Vec<String>) -> Result<Self> {
        if common.threads == 0 {
            return Err(Error::InvalidConfig("--threads must be >= 1".into()));
        }
        fs::create_dir_all(&common.out)?;
        Ok(Run {
            out: &common.out,
            manifest: Manifest {
                tool: "ldtm".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                args,
                seed: None,
                config: None,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
                notes: BTreeMap::new(),
            },
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.manifest.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.out.join(MANIFEST))?);
        serde_json::to_writer_pretty(&mut w, &self.manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    Corpus::read_snapshot(open(path)?)
}

fn read_model(path: &Path) -> Result<Model> {
    Model::read_snapshot(open(path)?)
}

fn cmd_ingest(a: &IngestArgs, args: Vec<String>) -> Result<()> {
    let mut run = Run::start(&a.common, "ingest", args)?;
    run.input(&a.events)?;
    let stopwords = match &a.stopwords {
        Some(p) => {
            run.input(p)?;
            PruneRules::read_stopwords(p)?
        }
        None => HashSet::new(),
    };
    let rules = PruneRules {
        stopwords,
        min_frequency: a.min_frequency,
    };
    let events = read_events(open(&a.events)?)?;
    let corpus = ingest_events(&events, &rules)?;
    info!(
        "ingested {} users, {} items, {} tokens",
        corpus.num_users(),
        corpus.vocab_size(),
        corpus.total_tokens()
    );
    let mut w = run.create("corpus.json")?;
    corpus.write_snapshot(&mut w)?;
    w.flush()?;
    run.finish()
}

fn cmd_train(a: &TrainArgs, args: Vec<String>) -> Result<()> {
    let mut run = Run::start(&a.common, "train", args)?;
    run.input(&a.corpus)?;
    let corpus = read_corpus(&a.corpus)?;
    let config = a.model.config(a.mode);
    config.validate()?;
    run.manifest.seed = Some(config.seed);
    run.manifest.config = Some(config.clone());

    let train = match a.holdout_level {
        Some(level) => {
            let seed = a.holdout_seed.unwrap_or(config.seed);
            let split = &make_holdout(&corpus, &[level], seed)?[0];
            let (train, held) = corpus.apply_holdout(split);
            run.write_json(
                "heldout.json",
                &HeldOutFile {
                    vocabulary_fingerprint: corpus.vocabulary().fingerprint(),
                    level,
                    seed,
                    tokens: held,
                },
            )?;
            train
        }
        None => corpus,
    };
    let model = run_inference(&train, &config)?;
    let mut w = run.create("model.json")?;
    model.write_snapshot(&mut w)?;
    w.flush()?;
    let mut w = run.create("trace.csv")?;
    write_trace_csv(&mut w, &model.trace)?;
    w.flush()?;
    run.finish()
}

fn cmd_eval(a: &EvalArgs, args: Vec<String>) -> Result<()> {
    let mut run = Run::start(&a.common, "eval", args)?;
    let rows = match (&a.corpus, &a.heldout) {
        (Some(corpus_path), _) => eval_splits(a, corpus_path, &mut run)?,
        (None, Some(held_path)) => eval_snapshots(a, held_path, &mut run)?,
        (None, None) => {
            return Err(Error::InvalidConfig(
                "eval needs --corpus or --model with --heldout".into(),
            ));
        }
    };
    let mut w = run.create("all_at_t.csv")?;
    write_metric_csv(&mut w, "t", &rows)?;
    w.flush()?;
    run.finish()
}

fn eval_splits(a: &EvalArgs, corpus_path: &Path, run: &mut Run) -> Result<Vec<MetricRow>> {
    run.input(corpus_path)?;
    let corpus = read_corpus(corpus_path)?;
    let base = a.params.config(DynamicsMode::Learned);
    base.validate()?;
    let holdout_seed = a.holdout_seed.unwrap_or(base.seed);
    run.manifest.seed = Some(base.seed);
    run.manifest.config = Some(base.clone());
    run.manifest
        .notes
        .insert("holdout_seed".into(), holdout_seed.to_string());

    let splits = make_holdout(&corpus, &a.levels, holdout_seed)?;
    let parts: Vec<_> = splits.iter().map(|s| (s.level, corpus.apply_holdout(s))).collect();
    let jobs: Vec<(usize, DynamicsMode)> = (0..parts.len())
        .flat_map(|p| a.modes.iter().map(move |&m| (p, m)))
        .collect();
    let results: Vec<Result<(Vec<MetricRow>, Vec<f64>)>> = pool(a.common.threads)?.install(|| {
        jobs.par_iter()
            .map(|&(p, mode)| {
                let (level, (train, held)) = &parts[p];
                let config = ModelConfig {
                    dynamics_mode: mode,
                    ..base.clone()
                };
                let model = run_inference(train, &config)?;
                let label = format!("holdout{level}");
                let rows = model_all_at_t(&model, held)?
                    .iter()
                    .map(|pt| MetricRow::from_all(&label, mode.as_str(), pt))
                    .collect();
                Ok((rows, model.trace))
            })
            .collect()
    });

    let mut rows = Vec::new();
    for (&(p, mode), res) in jobs.iter().zip(results) {
        let (r, trace) = res?;
        rows.extend(r);
        let mut w = run.create(&format!("trace_holdout{}_{}.csv", parts[p].0, mode.as_str()))?;
        write_trace_csv(&mut w, &trace)?;
        w.flush()?;
    }
    Ok(rows)
}

fn eval_snapshots(a: &EvalArgs, held_path: &Path, run: &mut Run) -> Result<Vec<MetricRow>> {
    if a.model.is_empty() {
        return Err(Error::InvalidConfig("--heldout needs at least one --model".into()));
    }
    run.input(held_path)?;
    let held: HeldOutFile = serde_json::from_reader(open(held_path)?)?;
    let mut rows = Vec::new();
    for path in &a.model {
        run.input(path)?;
        let model = read_model(path)?;
        if model.vocabulary_fingerprint != held.vocabulary_fingerprint {
            return Err(Error::Snapshot(format!(
                "{} was trained on a different vocabulary than {}",
                path.display(),
                held_path.display()
            )));
        }
        let label = path
            .parent()
            .and_then(|p| p.file_name())
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        for pt in model_all_at_t(&model, &held.tokens)? {
            rows.push(MetricRow::from_all(&label, model.config.dynamics_mode.as_str(), &pt));
        }
    }
    Ok(rows)
}

fn cmd_tsc(a: &TscArgs, args: Vec<String>) -> Result<()> {
    if a.width < 1 || a.lookahead < 1 {
        return Err(Error::InvalidConfig("--width and --lookahead must be >= 1".into()));
    }
    let mut run = Run::start(&a.common, "tsc", args)?;
    run.input(&a.model)?;
    run.input(&a.pairs.interactions)?;
    let model = read_model(&a.model)?;
    let records = a.pairs.records()?;

    let mut seen = HashSet::new();
    let mut unknown = 0usize;
    let mut tasks = Vec::new();
    for task in pair_tasks(&records, a.pairs.hypothesis) {
        match (
            model.user_position(&task.influencer),
            model.user_position(&task.influencee),
        ) {
            (Some(i), Some(j)) => {
                if seen.insert((i, j, task.tau)) {
                    tasks.push((i, j, task));
                }
            }
            _ => {
                warn!(
                    "skipping pair {} -> {}: user not in model",
                    task.influencer, task.influencee
                );
                unknown += 1;
            }
        }
    }

    let theta = model.theta();
    let horizon = model.step_tokens.iter().map(Vec::len).max().unwrap_or(0);
    let series: Vec<FilledSeries> = model
        .step_tokens
        .iter()
        .enumerate()
        .map(|(n, counts)| {
            let active: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
            FilledSeries::build(&theta.theta[n], &active, horizon)
        })
        .collect();

    let outcomes: Vec<Result<TscRow>> = pool(a.common.threads)?.install(|| {
        tasks
            .par_iter()
            .map(|(i, j, task)| {
                let (iw, ci) = series[*i].window(task.tau, a.width, a.lookahead)?;
                let (jw, cj) = series[*j].window(task.tau, a.width, a.lookahead)?;
                let window = SeriesWindow::new(iw, jw, task.tau, a.width, a.lookahead)?;
                Ok(TscRow {
                    i: task.influencer.clone(),
                    j: task.influencee.clone(),
                    tau: task.tau,
                    result: tsc_window(&window, a.f_form),
                    carried_forward: ci || cj,
                })
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut short = 0usize;
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(Error::InsufficientHistory { .. }) => short += 1,
            Err(e) => return Err(e),
        }
    }
    if short > 0 {
        warn!("skipped {short} pairs without a full [tau - W, tau + L] window");
    }
    if rows.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    run.manifest.notes.insert("pairs".into(), rows.len().to_string());
    run.manifest
        .notes
        .insert("skipped_unknown_user".into(), unknown.to_string());
    run.manifest
        .notes
        .insert("skipped_short_history".into(), short.to_string());
    let mut w = run.create("tsc.tsv")?;
    write_tsc_rows(&mut w, &rows)?;
    w.flush()?;
    run.finish()
}

fn cmd_ratio(a: &RatioArgs, args: Vec<String>) -> Result<()> {
    let mut run = Run::start(&a.common, "ratio", args)?;
    run.input(&a.tsc)?;
    run.input(&a.pairs.interactions)?;
    let rows = read_tsc_rows(
        &fs::read_to_string(&a.tsc)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", a.tsc.display()))))?,
    )?;
    let bins = sustained_steps(&a.pairs.records()?);
    let binned: Vec<_> = rows
        .iter()
        .filter_map(|r| bins.get(&unordered(&r.i, &r.j)).map(|&b| (b, r.result)))
        .collect();
    if binned.len() < rows.len() {
        warn!("{} TSC rows have no interaction record", rows.len() - binned.len());
    }
    let points = ratio(&binned, a.min_support)?;
    let hyp = a.pairs.hypothesis.to_string();
    let metric: Vec<_> = points
        .iter()
        .map(|p| MetricRow::from_ratio(&a.label, &hyp, p))
        .collect();
    let mut w = run.create("ratio.csv")?;
    write_metric_csv(&mut w, "bin", &metric)?;
    w.flush()?;
    run.finish()
}

fn cmd_synth(a: &SynthArgs, args: Vec<String>) -> Result<()> {
    if !(0.0..=1.0).contains(&a.decay) || !(0.0..=1.0).contains(&a.decaying_fraction) {
        return Err(Error::InvalidConfig(
            "--decay and --decaying-fraction must lie in [0, 1]".into(),
        ));
    }
    if a.users == 0 || a.steps == 0 || a.topics == 0 || a.items < a.topics || a.tokens_per_step == 0 {
        return Err(Error::InvalidConfig(
            "synth needs users, steps, topics, tokens >= 1 and items >= topics".into(),
        ));
    }
    let mut run = Run::start(&a.common, "synth", args)?;
    run.manifest.seed = Some(a.seed);

    let mut order: Vec<usize> = (0..a.users).collect();
    order.shuffle(&mut rng::rng_for(a.seed, stream::SYNTH_ROLES));
    let n_decay = (a.decaying_fraction * a.users as f64).round() as usize;
    let mut decays = vec![1.0; a.users];
    for &n in &order[..n_decay] {
        decays[n] = a.decay;
    }
    let truth = planted_truth(a.users, a.steps, a.topics, a.items, a.tokens_per_step, a.seed, |n| {
        decays[n]
    });
    let generated = generate_corpus(&truth, a.users, a.steps, a.seed)?;

    let mut w = run.create("events.tsv")?;
    write_corpus_events(&mut w, &generated.corpus)?;
    w.flush()?;
    let mut w = run.create("corpus.json")?;
    generated.corpus.write_snapshot(&mut w)?;
    w.flush()?;
    run.write_json("truth.json", &generated.truth)?;

    if a.interactions > 0 {
        let mut r = rng::rng_for(a.seed, stream::SYNTH_INTERACTIONS);
        let ids: Vec<&str> = generated.corpus.users().iter().map(|u| u.id.as_str()).collect();
        let records: Vec<InteractionRecord> = (0..a.interactions)
            .map(|_| {
                let size = r.gen_range(2..=ids.len().clamp(2, 4));
                let users = ids.choose_multiple(&mut r, size).map(|s| s.to_string()).collect();
                InteractionRecord::new(users, r.gen_range(1..=a.steps))
            })
            .collect();
        let mut w = run.create("interactions.tsv")?;
        write_interactions(&mut w, &records)?;
        w.flush()?;
    }
    run.finish()
}

fn cmd_replay(a: &ReplayArgs) -> std::result::Result<(), Failure> {
    let manifest: Manifest = serde_json::from_reader(open(&a.manifest)?).map_err(Error::from)?;
    if manifest.command == "replay" {
        return Err(Error::InvalidConfig("cannot replay a replay".into()).into());
    }
    let mut args: Vec<OsString> = vec!["ldtm".into()];
    args.extend(manifest.args.iter().map(OsString::from));
    args.push("--out".into());
    args.push(a.out.clone().into_os_string());
    run(args)
}
