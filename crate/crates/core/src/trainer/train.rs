use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Episode;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::metrics::MetricsSummary;
use crate::rng::stream;

use super::adam::{adam_step, AdamConfig, OptimizerState};
use super::config::RunConfig;
use super::eval::evaluate;
use super::loss::{query_loss, EpisodeContext};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    /// Mean loss over the batch; `None` for the step-0 evaluation.
    pub loss: Option<f64>,
    pub skipped: usize,
    pub dev: Option<MetricsSummary>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Encoder with the best development joint accuracy.
    pub encoder: Encoder,
    pub best_step: usize,
    pub best_dev: MetricsSummary,
    pub steps: usize,
    /// Queries skipped because their gold path was masked out.
    pub skipped: usize,
    pub log: Vec<LogEntry>,
}

impl TrainOutcome {
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|e| serde_json::to_string(e).expect("log entry serializes") + "\n")
            .collect()
    }
}

fn dev_score(m: &MetricsSummary) -> f64 {
    m.joint_acc.unwrap_or(0.0)
}

/// Episodic training with Adam over batches of query samples.
///
/// Development joint accuracy is measured before the first step and every
/// `eval_every` steps (and after the last step); the best parameters are
/// returned, ties keeping the earlier checkpoint. A frozen encoder is never
/// updated, so training only records losses.
pub fn train(encoder: Encoder, train_eps: &[Episode], dev_eps: &[Episode], cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_eps.is_empty() && cfg.max_steps > 0 {
        return Err(Error::InvalidArgument("no training episodes".into()));
    }
    let adam = AdamConfig {
        learning_rate: cfg.learning_rate,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
    };
    let trainable = encoder.is_trainable();
    let mut state = OptimizerState::new(encoder.params());
    let mut enc = encoder;

    let dev0 = evaluate(dev_eps, &enc, cfg)?.metrics;
    let mut out = TrainOutcome {
        encoder: enc.clone(),
        best_step: 0,
        best_dev: dev0.clone(),
        steps: 0,
        skipped: 0,
        log: vec![LogEntry {
            step: 0,
            loss: None,
            skipped: 0,
            dev: Some(dev0),
        }],
    };
    if cfg.max_steps == 0 {
        return Ok(out);
    }

    let mut rng = stream(cfg.seed, "train/order");
    let mut order: Vec<usize> = (0..train_eps.len()).collect();
    let mut grads = enc.params().zeros_like();
    let mut batch_loss = 0.0;
    let mut in_batch = 0usize;
    let mut step = 0usize;
    'epochs: loop {
        order.shuffle(&mut rng);
        let mut used_this_epoch = 0usize;
        for &e in &order {
            let ep = &train_eps[e];
            let mut ctx = EpisodeContext::for_training(ep, &enc, cfg);
            for q in &ep.query {
                let g = trainable.then_some(&mut grads);
                match query_loss(q, &ctx, &enc, cfg, g) {
                    Ok(v) => batch_loss += v,
                    Err(Error::InfeasibleGold) => {
                        out.skipped += 1;
                        log::debug!("skipping query with masked gold path in {}", ep.domain);
                        continue;
                    }
                    Err(err) => return Err(err),
                }
                used_this_epoch += 1;
                in_batch += 1;
                if in_batch < cfg.batch_size {
                    continue;
                }
                if trainable {
                    grads.scale(1.0 / in_batch as f64);
                    adam_step(enc.params_mut(), &grads, &mut state, &adam);
                    grads = enc.params().zeros_like();
                    ctx = EpisodeContext::for_training(ep, &enc, cfg);
                }
                step += 1;
                let loss = batch_loss / in_batch as f64;
                batch_loss = 0.0;
                in_batch = 0;
                let dev = if step.is_multiple_of(cfg.eval_every) || step == cfg.max_steps {
                    let m = evaluate(dev_eps, &enc, cfg)?.metrics;
                    if dev_score(&m) > dev_score(&out.best_dev) {
                        out.best_dev = m.clone();
                        out.best_step = step;
                        out.encoder = enc.clone();
                    }
                    log::info!("step {step} loss {loss:.4} dev joint {:.4}", dev_score(&m));
                    Some(m)
                } else {
                    None
                };
                out.log.push(LogEntry {
                    step,
                    loss: Some(loss),
                    skipped: out.skipped,
                    dev,
                });
                if step == cfg.max_steps {
                    break 'epochs;
                }
            }
        }
        if used_this_epoch == 0 {
            log::warn!("every training query is infeasible; stopping after {step} steps");
            break;
        }
    }
    out.steps = step;
    Ok(out)
}
