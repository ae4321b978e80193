//! Synthetic cross-domain benchmark, the model ablation grid and report tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Episode;
use crate::encoder::{Encoder, EncoderConfig};
use crate::episodes::{build_episodes, generate_synthetic, Corpus, SynthSpec};
use crate::error::{Error, Result};
use crate::metrics::MetricsSummary;
use crate::protonet::Similarity;
use crate::trainer::{evaluate, train, RunConfig};

/// How many episodes to draw per domain of each split, and their shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodePlan {
    pub shots: usize,
    pub query_size: usize,
    pub per_source_domain: usize,
    pub per_dev_domain: usize,
    pub per_target_domain: usize,
    pub seed: u64,
}

impl Default for EpisodePlan {
    fn default() -> Self {
        EpisodePlan {
            shots: 1,
            query_size: 8,
            per_source_domain: 10,
            per_dev_domain: 5,
            per_target_domain: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synth: SynthSpec,
    pub episodes: EpisodePlan,
    pub encoder: EncoderConfig,
    /// Base run settings; each model overrides only the mask toggles.
    pub run: RunConfig,
    /// Seed `s` offsets both the run seed and the encoder seed by `s`.
    pub n_seeds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthSpec::default(),
            episodes: EpisodePlan::default(),
            encoder: EncoderConfig {
                context_window: 0,
                ..EncoderConfig::default()
            },
            run: RunConfig::default(),
            n_seeds: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.encoder.validate()?;
        self.run.validate()?;
        if self.n_seeds == 0 {
            return Err(Error::InvalidArgument("n_seeds must be positive".into()));
        }
        let p = &self.episodes;
        if p.shots == 0 || p.query_size == 0 {
            return Err(Error::InvalidArgument("shots and query_size must be positive".into()));
        }
        if p.per_source_domain == 0 || p.per_dev_domain == 0 || p.per_target_domain == 0 {
            return Err(Error::InvalidArgument("episode counts must be positive".into()));
        }
        Ok(())
    }
}

/// Episodes of the three splits plus the token vocabulary of every corpus.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub train: Vec<Episode>,
    pub dev: Vec<Episode>,
    pub test: Vec<Episode>,
    pub vocab: Vec<String>,
}

fn split_episodes(corpora: &[Corpus], plan: &EpisodePlan, per_domain: usize) -> Result<Vec<Episode>> {
    let mut out = Vec::with_capacity(corpora.len() * per_domain);
    for c in corpora {
        out.extend(build_episodes(c, plan.shots, plan.query_size, per_domain, plan.seed)?);
    }
    Ok(out)
}

pub fn build_benchmark(cfg: &ExperimentConfig) -> Result<Benchmark> {
    let corpora = generate_synthetic(&cfg.synth)?;
    let plan = &cfg.episodes;
    let vocab: BTreeSet<&String> = corpora
        .source
        .iter()
        .chain(&corpora.dev)
        .chain(&corpora.target)
        .flat_map(|c| c.samples.iter().flat_map(|s| &s.tokens))
        .collect();
    Ok(Benchmark {
        train: split_episodes(&corpora.source, plan, plan.per_source_domain)?,
        dev: split_episodes(&corpora.dev, plan, plan.per_dev_domain)?,
        test: split_episodes(&corpora.target, plan, plan.per_target_domain)?,
        vocab: vocab.into_iter().cloned().collect(),
    })
}

/// Rows of the decoupling ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "JM")]
    Jm,
    #[serde(rename = "JMI2S")]
    JmI2s,
    #[serde(rename = "JMMSD")]
    JmMsd,
    #[serde(rename = "JMRM")]
    Jmrm,
    /// JM trained without masks, evaluated with both.
    #[serde(rename = "JM+RM")]
    JmPlusRm,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Jm, Model::JmI2s, Model::JmMsd, Model::Jmrm, Model::JmPlusRm];

    pub fn name(self) -> &'static str {
        match self {
            Model::Jm => "JM",
            Model::JmI2s => "JMI2S",
            Model::JmMsd => "JMMSD",
            Model::Jmrm => "JMRM",
            Model::JmPlusRm => "JM+RM",
        }
    }

    /// `(i2s_train, msd_train, i2s_eval, msd_eval)`.
    pub fn toggles(self) -> (bool, bool, bool, bool) {
        match self {
            Model::Jm => (false, false, false, false),
            Model::JmI2s => (true, false, true, false),
            Model::JmMsd => (false, true, false, true),
            Model::Jmrm => (true, true, true, true),
            Model::JmPlusRm => (false, false, true, true),
        }
    }

    pub fn apply(self, base: &RunConfig) -> RunConfig {
        let (i2s_train, msd_train, i2s_eval, msd_eval) = self.toggles();
        RunConfig {
            i2s_train,
            msd_train,
            i2s_eval,
            msd_eval,
            ..base.clone()
        }
    }

    /// The model whose trained checkpoint this one evaluates.
    fn trained_as(self) -> Model {
        match self {
            Model::JmPlusRm => Model::Jm,
            m => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub best_step: usize,
    pub steps: usize,
    pub skipped: usize,
    pub dev_joint_acc: Option<f64>,
    pub test: MetricsSummary,
    pub relation_violations: usize,
    pub bio_violations: usize,
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Stat {
            mean,
            std: var.sqrt(),
            n,
        })
    }
}

/// One labeled group of runs with mean ± std of the three headline metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub intent_acc: Option<Stat>,
    pub slot_f1: Option<Stat>,
    pub joint_acc: Option<Stat>,
}

impl SummaryRow {
    pub fn from_metrics<'a>(label: String, runs: impl IntoIterator<Item = &'a MetricsSummary>) -> SummaryRow {
        let (mut ia, mut sf, mut ja) = (Vec::new(), Vec::new(), Vec::new());
        for m in runs {
            ia.extend(m.intent_acc);
            sf.extend(m.slot_f1);
            ja.extend(m.joint_acc);
        }
        SummaryRow {
            label,
            intent_acc: Stat::of(&ia),
            slot_f1: Stat::of(&sf),
            joint_acc: Stat::of(&ja),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: Model,
    pub similarity: Similarity,
    pub summary: SummaryRow,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: ExperimentConfig,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, model: Model, similarity: Similarity) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.similarity == similarity)
    }

    /// Mean target joint accuracy of one cell.
    pub fn joint_acc(&self, model: Model, similarity: Similarity) -> Option<f64> {
        self.row(model, similarity)?.summary.joint_acc.map(|s| s.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summaries(&self) -> Vec<SummaryRow> {
        self.rows.iter().map(|r| r.summary.clone()).collect()
    }
}

/// Trains and evaluates one checkpoint per (training configuration,
/// similarity, seed); models sharing a training configuration share the
/// checkpoint. Work runs in parallel; rows come back in grid order.
pub fn run_grid(cfg: &ExperimentConfig, models: &[Model], similarities: &[Similarity]) -> Result<AblationReport> {
    cfg.validate()?;
    let bench = build_benchmark(cfg)?;
    let mut jobs: Vec<(Model, Similarity, usize)> = Vec::new();
    for &m in models {
        for &sim in similarities {
            for s in 0..cfg.n_seeds {
                let key = (m.trained_as(), sim, s);
                if !jobs.contains(&key) {
                    jobs.push(key);
                }
            }
        }
    }
    let trained: Vec<(Model, Similarity, usize, Encoder, RunResult)> = jobs
        .par_iter()
        .map(|&(m, sim, s)| {
            let run = RunConfig {
                similarity: sim,
                seed: cfg.run.seed + s as u64,
                ..m.apply(&cfg.run)
            };
            let enc_cfg = EncoderConfig {
                seed: cfg.encoder.seed + s as u64,
                ..cfg.encoder.clone()
            };
            let encoder = Encoder::new(enc_cfg, &bench.vocab)?;
            let out = train(encoder, &bench.train, &bench.dev, &run)?;
            let result = RunResult {
                seed: run.seed,
                best_step: out.best_step,
                steps: out.steps,
                skipped: out.skipped,
                dev_joint_acc: out.best_dev.joint_acc,
                test: MetricsSummary::default(),
                relation_violations: 0,
                bio_violations: 0,
            };
            log::info!("trained {} / {} / seed {}", m.name(), sim.name(), run.seed);
            Ok((m, sim, s, out.encoder, result))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(Model, Similarity)> = models
        .iter()
        .flat_map(|&m| similarities.iter().map(move |&sim| (m, sim)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(m, sim)| {
            let runs = (0..cfg.n_seeds)
                .map(|s| {
                    let (_, _, _, encoder, base) = trained
                        .iter()
                        .find(|t| t.0 == m.trained_as() && t.1 == sim && t.2 == s)
                        .expect("every cell was trained");
                    let run = RunConfig {
                        similarity: sim,
                        ..m.apply(&cfg.run)
                    };
                    let eval = evaluate(&bench.test, encoder, &run)?;
                    Ok(RunResult {
                        test: eval.metrics,
                        relation_violations: eval.relation_violations,
                        bio_violations: eval.bio_violations,
                        ..base.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let label = format!("{}/{}", m.name(), sim.name());
            Ok(AblationRow {
                model: m,
                similarity: sim,
                summary: SummaryRow::from_metrics(label, runs.iter().map(|r| &r.test)),
                runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        config: cfg.clone(),
        rows,
    })
}

/// The full grid: every model under every similarity.
pub fn ablate(cfg: &ExperimentConfig) -> Result<AblationReport> {
    run_grid(cfg, &Model::ALL, &Similarity::ALL)
}

/// Metrics of one evaluation, as written by `eval` and read by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub label: String,
    pub seed: u64,
    pub metrics: MetricsSummary,
    #[serde(default)]
    pub relation_violations: usize,
    #[serde(default)]
    pub bio_violations: usize,
}

/// Groups records by label, in order of first appearance.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut labels: Vec<&str> = Vec::new();
    for r in records {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
        .into_iter()
        .map(|l| {
            SummaryRow::from_metrics(
                l.to_string(),
                records.iter().filter(|r| r.label == l).map(|r| &r.metrics),
            )
        })
        .collect()
}

const COLUMNS: [&str; 3] = ["Intent Acc", "Slot F1", "Joint Acc"];

fn stats(row: &SummaryRow) -> [Option<Stat>; 3] {
    [row.intent_acc, row.slot_f1, row.joint_acc]
}

/// Percentages with four decimals; empty fields for missing metrics.
pub fn to_csv(rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("label,n,intent_acc_mean,intent_acc_std,slot_f1_mean,slot_f1_std,joint_acc_mean,joint_acc_std\n");
    for r in rows {
        let n = stats(r).iter().flatten().map(|s| s.n).max().unwrap_or(0);
        let _ = write!(out, "{},{n}", r.label);
        for s in stats(r) {
            match s {
                Some(s) => {
                    let _ = write!(out, ",{:.4},{:.4}", 100.0 * s.mean, 100.0 * s.std);
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Aligned plain-text table of `mean ± std` percentages.
pub fn to_text(rows: &[SummaryRow]) -> String {
    let cell = |s: Option<Stat>| match s {
        Some(s) => format!("{:.2} ± {:.2}", 100.0 * s.mean, 100.0 * s.std),
        None => "-".to_string(),
    };
    let width = rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<width$}", "Model");
    for c in COLUMNS {
        let _ = write!(out, "  {c:>15}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<width$}", r.label);
        for s in stats(r) {
            let _ = write!(out, "  {:>15}", cell(s));
        }
        out.push('\n');
    }
    out
}
