//! The `jmrm` command line.
//!
//! Every subcommand writes a `manifest.json` next to its outputs recording
//! the resolved configuration, the seed, the input paths and the crate
//! version, so any output can be regenerated from its manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::data::{parse_corpus_file, parse_episode_file, serialize_corpora, serialize_episodes, Episode};
use crate::encoder::{Encoder, EncoderConfig};
use crate::episodes::{build_episodes, generate_synthetic, SynthSpec};
use crate::experiment::{self, aggregate, AblationReport, ExperimentConfig, MetricsRecord};
use crate::masks::{build_relation_mask, build_transition_mask};
use crate::oracle;
use crate::protonet::Similarity;
use crate::trainer::{evaluate, train, LossMode, RunConfig};

pub const LOG_ENV: &str = "JMRM_LOG_LEVEL";

#[derive(Debug, Parser)]
#[command(name = "jmrm", version, about = "Few-shot joint intent detection and slot filling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic source, dev and target corpora.
    GenSynth(GenSynthArgs),
    /// Sample K-shot episodes from a corpus file.
    BuildEpisodes(BuildEpisodesArgs),
    /// Train an encoder on source episodes with dev-based model selection.
    Train(TrainArgs),
    /// Evaluate a checkpoint on episodes.
    Eval(EvalArgs),
    /// Run the model × similarity ablation grid on a synthetic benchmark.
    Ablate(AblateArgs),
    /// Run the brute-force and finite-difference oracle suites.
    OracleCheck(OracleArgs),
    /// Aggregate metrics files into mean ± std tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Generator spec (JSON); defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildEpisodesArgs {
    /// Corpus file as written by `gen-synth`.
    #[arg(long)]
    pub corpora: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    #[arg(long, default_value_t = 16)]
    pub query_size: usize,
    /// Episodes per domain.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Overrides applied on top of a run config file.
#[derive(Debug, Args)]
pub struct RunOverrides {
    /// Run config (JSON); defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub similarity: Option<Similarity>,
    #[arg(long)]
    pub loss_mode: Option<LossMode>,
    #[arg(long)]
    pub i2s_train: Option<bool>,
    #[arg(long)]
    pub msd_train: Option<bool>,
    #[arg(long)]
    pub i2s_eval: Option<bool>,
    #[arg(long)]
    pub msd_eval: Option<bool>,
}

impl RunOverrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg: RunConfig = read_config(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.similarity {
            cfg.similarity = s;
        }
        if let Some(m) = self.loss_mode {
            cfg.loss_mode = m;
        }
        for (flag, field) in [
            (self.i2s_train, &mut cfg.i2s_train),
            (self.msd_train, &mut cfg.msd_train),
            (self.i2s_eval, &mut cfg.i2s_eval),
            (self.msd_eval, &mut cfg.msd_eval),
        ] {
            if let Some(v) = flag {
                *field = v;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Encoder config (JSON); its seed is replaced by `--seed` when given.
    #[arg(long)]
    pub encoder_config: Option<PathBuf>,
    /// Training (source-domain) episodes.
    #[arg(long)]
    pub episodes: PathBuf,
    /// Development episodes used for model selection.
    #[arg(long)]
    pub dev: PathBuf,
    /// Further episode files whose tokens join the encoder vocabulary.
    #[arg(long)]
    pub vocab_from: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long)]
    pub episodes: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Label of the metrics record, used to group runs in `report`.
    #[arg(long, default_value = "eval")]
    pub label: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replaces the generator, episode, run and encoder seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub loss_mode: Option<LossMode>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Episode file whose support-derived masks are dumped to `masks.json`.
    #[arg(long)]
    pub episodes: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics records from `eval` or ablation reports from `ablate`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display())),
    }
}

fn read_episodes(path: &Path) -> Result<Vec<Episode>> {
    parse_episode_file(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_manifest(
    dir: &Path,
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: &[&Path],
    outputs: &[&str],
) -> Result<()> {
    let manifest = json!({
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "outputs": outputs,
        "versions": { "jmrm": env!("CARGO_PKG_VERSION") },
    });
    write(dir, "manifest.json", &to_json(&manifest))
}

fn gen_synth(args: &GenSynthArgs) -> Result<()> {
    let mut spec: SynthSpec = read_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate()?;
    let corpora = generate_synthetic(&spec)?;
    ensure_dir(&args.out)?;
    write(&args.out, "source.json", &serialize_corpora(&corpora.source))?;
    write(&args.out, "dev.json", &serialize_corpora(&corpora.dev))?;
    write(&args.out, "target.json", &serialize_corpora(&corpora.target))?;
    let inputs: Vec<&Path> = args.config.iter().map(PathBuf::as_path).collect();
    write_manifest(
        &args.out,
        "gen-synth",
        Some(spec.seed),
        serde_json::to_value(&spec)?,
        &inputs,
        &["source.json", "dev.json", "target.json"],
    )
}

fn build_episodes_cmd(args: &BuildEpisodesArgs) -> Result<()> {
    let corpora =
        parse_corpus_file(&read(&args.corpora)?).with_context(|| format!("parsing {}", args.corpora.display()))?;
    let mut episodes = Vec::new();
    for c in &corpora {
        episodes.extend(build_episodes(c, args.shots, args.query_size, args.count, args.seed)?);
    }
    ensure_dir(&args.out)?;
    write(&args.out, "episodes.json", &serialize_episodes(&episodes))?;
    let config = json!({ "shots": args.shots, "query_size": args.query_size, "count": args.count });
    write_manifest(
        &args.out,
        "build-episodes",
        Some(args.seed),
        config,
        &[&args.corpora],
        &["episodes.json"],
    )
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let run = args.run.resolve()?;
    let mut enc_cfg: EncoderConfig = read_config(args.encoder_config.as_deref())?;
    if let Some(s) = args.run.seed {
        enc_cfg.seed = s;
    }
    enc_cfg.validate()?;
    let train_eps = read_episodes(&args.episodes)?;
    let dev_eps = read_episodes(&args.dev)?;
    if train_eps.is_empty() || dev_eps.is_empty() {
        bail!(crate::Error::InvalidArgument(
            "training and dev episode files must be non-empty".into()
        ));
    }
    let mut extra = Vec::new();
    for p in &args.vocab_from {
        extra.extend(read_episodes(p)?);
    }
    let mut vocab: Vec<&String> = train_eps
        .iter()
        .chain(&dev_eps)
        .chain(&extra)
        .flat_map(|e| e.support.iter().chain(&e.query).flat_map(|s| &s.tokens))
        .collect();
    vocab.sort();
    vocab.dedup();
    let encoder = Encoder::new(enc_cfg.clone(), vocab)?;
    let out = train(encoder, &train_eps, &dev_eps, &run)?;

    ensure_dir(&args.out)?;
    write(&args.out, "checkpoint.json", &out.encoder.to_checkpoint())?;
    write(&args.out, "train_log.jsonl", &out.log_jsonl())?;
    let record = MetricsRecord {
        label: "dev".into(),
        seed: run.seed,
        metrics: out.best_dev.clone(),
        relation_violations: 0,
        bio_violations: 0,
    };
    let summary = json!({ "best_step": out.best_step, "steps": out.steps, "skipped": out.skipped, "dev": record });
    write(&args.out, "metrics.json", &to_json(&summary))?;
    let mut inputs: Vec<&Path> = vec![&args.episodes, &args.dev];
    inputs.extend(args.run.config.as_deref());
    inputs.extend(args.encoder_config.as_deref());
    inputs.extend(args.vocab_from.iter().map(PathBuf::as_path));
    write_manifest(
        &args.out,
        "train",
        Some(run.seed),
        json!({ "run": run, "encoder": enc_cfg }),
        &inputs,
        &["checkpoint.json", "train_log.jsonl", "metrics.json"],
    )
}

fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let run = args.run.resolve()?;
    let episodes = read_episodes(&args.episodes)?;
    let encoder = Encoder::from_checkpoint(&read(&args.checkpoint)?)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let report = evaluate(&episodes, &encoder, &run)?;
    let record = MetricsRecord {
        label: args.label.clone(),
        seed: run.seed,
        metrics: report.metrics.clone(),
        relation_violations: report.relation_violations,
        bio_violations: report.bio_violations,
    };
    ensure_dir(&args.out)?;
    write(&args.out, "metrics.json", &to_json(&record))?;
    write(&args.out, "predictions.json", &to_json(&report.predictions))?;
    let mut inputs: Vec<&Path> = vec![&args.episodes, &args.checkpoint];
    inputs.extend(args.run.config.as_deref());
    write_manifest(
        &args.out,
        "eval",
        Some(run.seed),
        serde_json::to_value(&run)?,
        &inputs,
        &["metrics.json", "predictions.json"],
    )
}

fn ablate_cmd(args: &AblateArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = read_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.synth.seed = s;
        cfg.episodes.seed = s;
        cfg.run.seed = s;
        cfg.encoder.seed = s;
    }
    if let Some(k) = args.shots {
        cfg.episodes.shots = k;
    }
    if let Some(m) = args.loss_mode {
        cfg.run.loss_mode = m;
    }
    cfg.validate()?;
    let report = experiment::ablate(&cfg)?;
    ensure_dir(&args.out)?;
    let rows = report.summaries();
    write(&args.out, "ablation.json", &report.to_json())?;
    write(&args.out, "ablation.csv", &experiment::to_csv(&rows))?;
    write(&args.out, "ablation.txt", &experiment::to_text(&rows))?;
    print!("{}", experiment::to_text(&rows));
    let inputs: Vec<&Path> = args.config.iter().map(PathBuf::as_path).collect();
    write_manifest(
        &args.out,
        "ablate",
        Some(cfg.run.seed),
        serde_json::to_value(&cfg)?,
        &inputs,
        &["ablation.json", "ablation.csv", "ablation.txt"],
    )
}

fn oracle_cmd(args: &OracleArgs) -> Result<bool> {
    if args.trials == 0 {
        bail!(crate::Error::InvalidArgument("--trials must be positive".into()));
    }
    let report = oracle::run_all(args.trials, args.seed);
    let text = to_json(&report);
    print!("{text}");
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write(dir, "oracle_report.json", &text)?;
        let mut outputs = vec!["oracle_report.json"];
        if let Some(path) = &args.episodes {
            let masks: Vec<_> = read_episodes(path)?
                .iter()
                .map(|ep| {
                    let ls = &ep.label_space;
                    let rm = build_relation_mask(&ep.support, ls, true);
                    let rows: Vec<Vec<u8>> = rm
                        .rm
                        .rows()
                        .into_iter()
                        .map(|r| r.iter().map(|&b| u8::from(b)).collect())
                        .collect();
                    json!({
                        "domain": ep.domain,
                        "intents": ls.intents(),
                        "slot_labels": ls.slot_labels(),
                        "relation_mask": rows,
                        "transition_mask": build_transition_mask(ls),
                    })
                })
                .collect();
            write(dir, "masks.json", &to_json(&masks))?;
            outputs.push("masks.json");
        }
        let inputs: Vec<&Path> = args.episodes.iter().map(PathBuf::as_path).collect();
        write_manifest(
            dir,
            "oracle-check",
            Some(args.seed),
            json!({ "trials": args.trials }),
            &inputs,
            &outputs,
        )?;
    } else if args.episodes.is_some() {
        bail!(crate::Error::InvalidArgument(
            "--episodes needs --out to write masks.json".into()
        ));
    }
    Ok(report.passed)
}

fn report_cmd(args: &ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for p in &args.inputs {
        let text = read(p)?;
        if let Ok(r) = serde_json::from_str::<MetricsRecord>(&text) {
            records.push(r);
            continue;
        }
        let report: AblationReport = serde_json::from_str(&text)
            .with_context(|| format!("{} is neither a metrics record nor an ablation report", p.display()))?;
        for row in &report.rows {
            records.extend(row.runs.iter().map(|r| MetricsRecord {
                label: row.summary.label.clone(),
                seed: r.seed,
                metrics: r.test.clone(),
                relation_violations: r.relation_violations,
                bio_violations: r.bio_violations,
            }));
        }
    }
    let rows = aggregate(&records);
    print!("{}", experiment::to_text(&rows));
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write(dir, "report.csv", &experiment::to_csv(&rows))?;
        write(dir, "report.txt", &experiment::to_text(&rows))?;
        let inputs: Vec<&Path> = args.inputs.iter().map(PathBuf::as_path).collect();
        write_manifest(dir, "report", None, json!({}), &inputs, &["report.csv", "report.txt"])?;
    }
    Ok(())
}

/// Runs one parsed command. `Ok(false)` means the command ran but its checks
/// failed (oracle-check only).
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::GenSynth(a) => gen_synth(a)?,
        Command::BuildEpisodes(a) => build_episodes_cmd(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Eval(a) => eval_cmd(a)?,
        Command::Ablate(a) => ablate_cmd(a)?,
        Command::OracleCheck(a) => return oracle_cmd(a),
        Command::Report(a) => report_cmd(a)?,
    }
    Ok(true)
}

/// Machine-readable description of a failure.
pub fn error_json(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<crate::Error>())
        .map_or("Other", crate::Error::kind);
    let causes: Vec<String> = err.chain().map(ToString::to_string).collect();
    json!({ "error": { "kind": kind, "message": err.to_string(), "causes": causes } }).to_string()
}
