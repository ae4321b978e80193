use serde::{Deserialize, Serialize};

use crate::data::{Episode, LabelSpace};
use crate::encoder::Encoder;
use crate::error::Result;
use crate::lattice::{decode_tokenwise, viterbi_decode, Decoded, JointScoreInputs};
use crate::masks::{build_relation_mask, RelationMask};
use crate::metrics::{MetricsAccumulator, MetricsSummary};
use crate::protonet::{emissions_from_encoded, Encoded};

use super::config::RunConfig;
use super::loss::EpisodeContext;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub intent: String,
    pub slots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: MetricsSummary,
    /// Predictions pairing an intent with a slot label unrelated to it in the support set.
    pub relation_violations: usize,
    /// Predictions containing an illegal BIO transition.
    pub bio_violations: usize,
    /// Per episode, per query (in file order).
    pub predictions: Vec<Vec<Prediction>>,
}

fn violates_relation(d: &Decoded, rm: &RelationMask) -> bool {
    d.slots.iter().any(|&o| !rm.related(d.intent, o))
}

fn violates_bio(slots: &[usize], ls: &LabelSpace) -> bool {
    let Some(&first) = slots.first() else { return false };
    !ls.tag(first).allows_start() || slots.windows(2).any(|w| !ls.tag(w[0]).allows_next(ls.tag(w[1])))
}

fn decode_tokens(tokens: &[String], ctx: &EpisodeContext, encoder: &Encoder, cfg: &RunConfig) -> Result<Decoded> {
    let em = emissions_from_encoded(&Encoded::new(encoder, tokens), &ctx.protos, cfg.similarity)?;
    let inp = JointScoreInputs::new(&em.intent, &em.slot, &ctx.rm, &ctx.tm, cfg.lambda);
    Ok(if cfg.msd_eval {
        viterbi_decode(&inp)
    } else {
        decode_tokenwise(&inp)
    })
}

/// Decodes every query of every episode with the evaluation-time masks.
/// Queries whose gold labels fall outside the episode label space are decoded
/// too and can never be fully correct.
pub fn evaluate(episodes: &[Episode], encoder: &Encoder, cfg: &RunConfig) -> Result<EvalReport> {
    let mut acc = MetricsAccumulator::new();
    let mut report = EvalReport {
        metrics: MetricsSummary::default(),
        relation_violations: 0,
        bio_violations: 0,
        predictions: Vec::with_capacity(episodes.len()),
    };
    for ep in episodes {
        let ls = &ep.label_space;
        let ctx = EpisodeContext::new(ep, encoder, cfg.i2s_eval, cfg.msd_eval, cfg.force_o_related);
        let support_rm = build_relation_mask(&ep.support, ls, cfg.force_o_related);
        let mut preds = Vec::with_capacity(ep.n_queries());
        for raw in ep.raw_queries() {
            let d = decode_tokens(&raw.tokens, &ctx, encoder, cfg)?;
            report.relation_violations += usize::from(violates_relation(&d, &support_rm));
            report.bio_violations += usize::from(violates_bio(&d.slots, ls));
            let pred = Prediction {
                intent: ls.intent_name(d.intent).to_string(),
                slots: d.slots.iter().map(|&o| ls.slot_name(o).to_string()).collect(),
            };
            acc.add(&pred.intent, &pred.slots, &raw.intent, &raw.slots);
            preds.push(pred);
        }
        report.predictions.push(preds);
    }
    report.metrics = acc.summary();
    Ok(report)
}
