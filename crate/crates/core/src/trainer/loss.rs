use ndarray::{Array1, Array2};

use crate::data::{Episode, Sample};
use crate::encoder::{Encoder, EncoderParams};
use crate::error::{Error, Result};
use crate::lattice::{log_partition, logsumexp, loss_gradients, nll_loss, JointScoreInputs};
use crate::masks::{build_relation_mask, build_transition_mask, RelationMask, TransitionMask};
use crate::protonet::{
    emissions_backward, emissions_from_encoded, prototypes_backward, prototypes_from_encoded, Emissions, Encoded,
    Prototypes,
};

use super::config::{LossMode, RunConfig};

/// Support encodings, prototypes and masks of one episode under the current
/// encoder parameters.
#[derive(Debug, Clone)]
pub struct EpisodeContext<'e> {
    pub episode: &'e Episode,
    pub support: Vec<Encoded>,
    pub protos: Prototypes,
    pub rm: RelationMask,
    pub tm: TransitionMask,
}

impl<'e> EpisodeContext<'e> {
    pub fn new(episode: &'e Episode, encoder: &Encoder, use_rm: bool, use_tm: bool, force_o: bool) -> Self {
        let ls = &episode.label_space;
        let support: Vec<Encoded> = episode
            .support
            .iter()
            .map(|s| Encoded::new(encoder, &s.tokens))
            .collect();
        let protos = prototypes_from_encoded(&episode.support, &support, ls);
        let rm = if use_rm {
            build_relation_mask(&episode.support, ls, force_o)
        } else {
            RelationMask::permissive(ls.n_intents(), ls.n_slots())
        };
        let tm = if use_tm {
            build_transition_mask(ls)
        } else {
            TransitionMask::permissive(ls.n_slots())
        };
        EpisodeContext {
            episode,
            support,
            protos,
            rm,
            tm,
        }
    }

    /// Context with the training-time mask toggles of `cfg`.
    pub fn for_training(episode: &'e Episode, encoder: &Encoder, cfg: &RunConfig) -> Self {
        Self::new(episode, encoder, cfg.i2s_train, cfg.msd_train, cfg.force_o_related)
    }
}

/// Loss value and its gradients with respect to the emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLoss {
    pub value: f64,
    pub d_intent: Array1<f64>,
    pub d_slot: Array2<f64>,
}

/// Intent cross-entropy over `λ·f_l`.
fn intent_ce(f_l: &Array1<f64>, gold: usize, lambda: f64) -> (f64, Array1<f64>) {
    let scaled = f_l.mapv(|v| lambda * v);
    let lz = logsumexp(scaled.iter().copied());
    let mut d = scaled.mapv(|v| lambda * (v - lz).exp());
    d[gold] -= lambda;
    ((lz - scaled[gold]).max(0.0), d)
}

/// Loss of one query given its emissions, under the configured mode and
/// training-time masks.
pub fn emission_loss(
    em: &Emissions,
    gold: &Sample,
    rm: &RelationMask,
    tm: &TransitionMask,
    cfg: &RunConfig,
) -> Result<EmissionLoss> {
    let (m, n_t) = em.slot.dim();
    match cfg.loss_mode {
        LossMode::Joint => {
            let inp = JointScoreInputs::new(&em.intent, &em.slot, rm, tm, cfg.lambda);
            let loss = nll_loss(gold.intent, &gold.slots, &inp)?;
            let (d_intent, d_slot) = loss_gradients(gold.intent, &gold.slots, &loss.posterior, &inp);
            Ok(EmissionLoss {
                value: loss.value,
                d_intent,
                d_slot,
            })
        }
        LossMode::SeqCe => {
            let (v_int, d_intent) = intent_ce(&em.intent, gold.intent, cfg.lambda);
            // Slot sequence lattice restricted to the gold intent.
            let zero = Array1::zeros(1);
            let row = rm.rm.row(gold.intent).insert_axis(ndarray::Axis(0)).to_owned();
            let one = RelationMask {
                rm: row,
                forced_o: rm.forced_o,
            };
            let inp = JointScoreInputs::new(&zero, &em.slot, &one, tm, cfg.lambda);
            let loss = nll_loss(0, &gold.slots, &inp)?;
            let (_, d_slot) = loss_gradients(0, &gold.slots, &loss.posterior, &inp);
            Ok(EmissionLoss {
                value: v_int + loss.value,
                d_intent,
                d_slot,
            })
        }
        LossMode::SumSep => {
            let (mut value, d_intent) = intent_ce(&em.intent, gold.intent, cfg.lambda);
            let mut d_slot = Array2::zeros((m, n_t));
            for i in 0..m {
                let allowed = |o: usize| rm.related(gold.intent, o);
                let g = gold.slots[i];
                if !allowed(g) {
                    return Err(Error::InfeasibleGold);
                }
                let lz = logsumexp((0..n_t).filter(|&o| allowed(o)).map(|o| em.slot[[i, o]]));
                value += (lz - em.slot[[i, g]]).max(0.0);
                for o in (0..n_t).filter(|&o| allowed(o)) {
                    d_slot[[i, o]] = (em.slot[[i, o]] - lz).exp();
                }
                d_slot[[i, g]] -= 1.0;
            }
            Ok(EmissionLoss {
                value,
                d_intent,
                d_slot,
            })
        }
    }
}

/// Loss of one query; when `grads` is given, accumulates the gradient with
/// respect to every encoder parameter (through the query encoding and, via
/// the prototypes, through the support encodings).
pub fn query_loss(
    query: &Sample,
    ctx: &EpisodeContext,
    encoder: &Encoder,
    cfg: &RunConfig,
    grads: Option<&mut EncoderParams>,
) -> Result<f64> {
    let enc = Encoded::new(encoder, &query.tokens);
    let em = emissions_from_encoded(&enc, &ctx.protos, cfg.similarity)?;
    let out = emission_loss(&em, query, &ctx.rm, &ctx.tm, cfg)?;
    if let Some(grads) = grads {
        let g = emissions_backward(&enc, &ctx.protos, cfg.similarity, out.d_intent.view(), &out.d_slot)?;
        encoder.backward_into(
            &query.tokens,
            Some(&g.query_rows),
            Some(g.query_utterance.view()),
            grads,
        )?;
        let support = &ctx.episode.support;
        for (s, (rows, utt)) in support.iter().zip(prototypes_backward(
            support,
            &ctx.protos,
            &g.intent_protos,
            &g.slot_protos,
        )) {
            encoder.backward_into(&s.tokens, Some(&rows), Some(utt.view()), grads)?;
        }
    }
    Ok(out.value)
}

/// Loss of one query of `episode` and, for a trainable encoder, its full
/// parameter gradient.
pub fn compute_loss(
    episode: &Episode,
    query: &Sample,
    encoder: &Encoder,
    cfg: &RunConfig,
) -> Result<(f64, Option<EncoderParams>)> {
    let ctx = EpisodeContext::for_training(episode, encoder, cfg);
    if encoder.is_trainable() {
        let mut grads = encoder.params().zeros_like();
        let v = query_loss(query, &ctx, encoder, cfg, Some(&mut grads))?;
        Ok((v, Some(grads)))
    } else {
        Ok((query_loss(query, &ctx, encoder, cfg, None)?, None))
    }
}

/// `log Z` of a query lattice; used by diagnostics.
pub fn query_log_partition(query: &Sample, ctx: &EpisodeContext, encoder: &Encoder, cfg: &RunConfig) -> Result<f64> {
    let em = emissions_from_encoded(&Encoded::new(encoder, &query.tokens), &ctx.protos, cfg.similarity)?;
    let inp = JointScoreInputs::new(&em.intent, &em.slot, &ctx.rm, &ctx.tm, cfg.lambda);
    Ok(log_partition(&inp)?.log_z)
}
