//! Brute-force and finite-difference checks of the lattice, the gradients,
//! support construction and the metrics.
//!
//! Every check here recomputes its reference independently of the code under
//! test: pair scores come from a direct sum with BIO legality read off the
//! label names, partitions from enumerating all `Y·T^m` pairs, gradients from
//! central differences and span counts from a conlleval-style state machine.

use ndarray::{Array1, Array2};
use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::data::{Episode, LabelSpace, Sample};
use crate::encoder::{Encoder, EncoderConfig, EncoderKind};
use crate::episodes::{select_support, Corpus};
use crate::error::Result;
use crate::lattice::{
    joint_score, log_partition, logsumexp, loss_gradients, nll_loss, viterbi_decode, JointScoreInputs,
};
use crate::masks::{build_transition_mask, RelationMask, TransitionMask};
use crate::metrics::MetricsAccumulator;
use crate::protonet::Similarity;
use crate::rng::{stream, Rng};
use crate::trainer::{compute_loss, LossMode, RunConfig};

pub const PARTITION_TOL: f64 = 1e-9;
pub const MARGINAL_TOL: f64 = 1e-9;
pub const NORMALIZATION_TOL: f64 = 1e-6;
pub const SHIFT: f64 = 3.7;
pub const SHIFT_TOL: f64 = 1e-9;
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Denominator floor of the finite-difference relative error, so entries
/// whose true gradient is zero are compared absolutely.
pub const FD_FLOOR: f64 = 1e-5;

/// `|a − b| / max(|a|, |b|, FD_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

/// A random lattice with `Y ≤ 3`, `T ≤ 5`, `m ≤ 4`.
#[derive(Debug, Clone)]
pub struct LatticeInstance {
    pub ls: LabelSpace,
    pub f_l: Array1<f64>,
    pub f_o: Array2<f64>,
    pub rm: RelationMask,
    pub tm: TransitionMask,
    pub lambda: f64,
}

impl LatticeInstance {
    pub fn random(rng: &mut Rng) -> LatticeInstance {
        let n_y = rng.random_range(1..=3);
        let n_types = rng.random_range(0..=2);
        let m = rng.random_range(1..=4);
        let mut slots = vec!["O".to_string()];
        for ty in ["city", "date"].iter().take(n_types) {
            slots.push(format!("B-{ty}"));
            slots.push(format!("I-{ty}"));
        }
        let ls = LabelSpace::new((0..n_y).map(|l| format!("intent{l}")).collect(), slots).expect("valid labels");
        let n_t = ls.n_slots();
        let f_l = Array1::from_shape_fn(n_y, |_| rng.random_range(-5.0..5.0));
        let f_o = Array2::from_shape_fn((m, n_t), |_| rng.random_range(-5.0..5.0));
        let mut rm = Array2::from_shape_fn((n_y, n_t), |_| rng.random_bool(0.6));
        rm.column_mut(ls.outside()).fill(true);
        let tm = build_transition_mask(&ls);
        let lambda = if rng.random_bool(0.5) {
            1.0
        } else {
            rng.random_range(0.25..2.0)
        };
        LatticeInstance {
            ls,
            f_l,
            f_o,
            rm: RelationMask { rm, forced_o: true },
            tm,
            lambda,
        }
    }

    pub fn inputs(&self) -> JointScoreInputs<'_> {
        JointScoreInputs::new(&self.f_l, &self.f_o, &self.rm, &self.tm, self.lambda)
    }

    /// Whether `t` is a legal BIO sequence, judged from the label names alone.
    pub fn bio_valid(&self, t: &[usize]) -> bool {
        let name = |o: usize| self.ls.slot_name(o);
        t.iter().enumerate().all(|(i, &o)| match name(o).strip_prefix("I-") {
            None => true,
            Some(ty) => i > 0 && matches!(name(t[i - 1]).split_once('-'), Some((_, prev)) if prev == ty),
        })
    }

    /// Direct evaluation of `R(y, t)` for one pair.
    pub fn pair_score(&self, y: usize, t: &[usize]) -> f64 {
        if !self.bio_valid(t) || t.iter().any(|&o| !self.rm.rm[[y, o]]) {
            return f64::NEG_INFINITY;
        }
        let emissions: f64 = t.iter().enumerate().map(|(i, &o)| self.f_o[[i, o]]).sum();
        // Every legal transition, including the one out of START, scores 1.
        self.lambda * self.f_l[y] + emissions + t.len() as f64
    }

    /// Every `(y, t)` pair with its score, intents ascending and slot
    /// sequences in lexicographic order.
    pub fn enumerate(&self) -> Vec<(usize, Vec<usize>, f64)> {
        let (m, n_t) = self.f_o.dim();
        let mut out = Vec::with_capacity(self.f_l.len() * n_t.pow(m as u32));
        for y in 0..self.f_l.len() {
            let mut t = vec![0usize; m];
            loop {
                out.push((y, t.clone(), self.pair_score(y, &t)));
                let Some(k) = (0..m).rev().find(|&k| t[k] + 1 < n_t) else {
                    break;
                };
                t[k] += 1;
                t[k + 1..].fill(0);
            }
        }
        out
    }
}

fn brute_log_z(pairs: &[(usize, Vec<usize>, f64)]) -> f64 {
    logsumexp(pairs.iter().map(|p| p.2))
}

/// First pair (in enumeration order) attaining the maximum score.
fn brute_argmax(pairs: &[(usize, Vec<usize>, f64)]) -> Option<&(usize, Vec<usize>, f64)> {
    pairs
        .iter()
        .filter(|p| p.2 > f64::NEG_INFINITY)
        .fold(None, |best: Option<&(usize, Vec<usize>, f64)>, p| match best {
            Some(b) if p.2 <= b.2 => Some(b),
            _ => Some(p),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Largest observed error of the suite's primary comparison.
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// First few failure descriptions.
    pub examples: Vec<String>,
}

struct Suite {
    result: SuiteResult,
}

impl Suite {
    fn new(name: &str, tolerance: f64) -> Suite {
        Suite {
            result: SuiteResult {
                name: name.to_string(),
                instances: 0,
                failures: 0,
                max_error: 0.0,
                tolerance,
                passed: true,
                examples: Vec::new(),
            },
        }
    }

    fn error(&mut self, e: f64) {
        let r = &mut self.result;
        if e.is_nan() || e > r.max_error {
            r.max_error = if e.is_nan() { f64::INFINITY } else { e };
        }
    }

    fn fail(&mut self, what: String) {
        self.result.failures += 1;
        if self.result.examples.len() < 5 {
            self.result.examples.push(what);
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.fail(what());
        }
    }

    fn finish(mut self) -> SuiteResult {
        let r = &mut self.result;
        r.passed = r.failures == 0 && r.max_error <= r.tolerance;
        self.result
    }
}

/// Log-partition and marginals against exhaustive enumeration.
pub fn partition_suite(instances: &[LatticeInstance]) -> SuiteResult {
    let mut suite = Suite::new("partition", PARTITION_TOL);
    for (n, inst) in instances.iter().enumerate() {
        suite.result.instances += 1;
        let pairs = inst.enumerate();
        let want = brute_log_z(&pairs);
        let post = match log_partition(&inst.inputs()) {
            Ok(p) => p,
            Err(e) => {
                suite.fail(format!("instance {n}: {e}"));
                continue;
            }
        };
        let err = (post.log_z - want).abs() / want.abs().max(1.0);
        suite.error(err);
        suite.check(err <= PARTITION_TOL, || {
            format!("instance {n}: log Z {} vs {want}", post.log_z)
        });
        for y in 0..inst.f_l.len() {
            let q = pairs
                .iter()
                .filter(|p| p.0 == y)
                .map(|p| (p.2 - want).exp())
                .sum::<f64>();
            let diff = (q - post.intent_marginals[y]).abs();
            suite.check(diff <= MARGINAL_TOL, || format!("instance {n}: q({y}) off by {diff:e}"));
            for ((i, o), &mu) in post.slot_marginals[y].indexed_iter() {
                let want_mu = pairs
                    .iter()
                    .filter(|p| p.0 == y && p.1[i] == o)
                    .map(|p| (p.2 - want).exp())
                    .sum::<f64>();
                let diff = (mu - want_mu).abs();
                suite.check(diff <= MARGINAL_TOL, || {
                    format!("instance {n}: μ[{y}][{i},{o}] off by {diff:e}")
                });
            }
        }
    }
    suite.finish()
}

/// Viterbi against the enumeration argmax; predictions must be BIO-valid and
/// relation-consistent.
pub fn decoding_suite(instances: &[LatticeInstance]) -> SuiteResult {
    let mut suite = Suite::new("decoding", 0.0);
    for (n, inst) in instances.iter().enumerate() {
        suite.result.instances += 1;
        let pairs = inst.enumerate();
        let d = viterbi_decode(&inst.inputs());
        match brute_argmax(&pairs) {
            Some((y, t, s)) => {
                suite.check(d.intent == *y && d.slots == *t, || {
                    format!(
                        "instance {n}: viterbi ({}, {:?}) vs brute force ({y}, {t:?})",
                        d.intent, d.slots
                    )
                });
                suite.check(d.score == *s || (d.score - s).abs() <= 1e-12 * s.abs().max(1.0), || {
                    format!("instance {n}: score {} vs {s}", d.score)
                });
            }
            None => suite.fail(format!("instance {n}: no feasible pair")),
        }
        suite.check(inst.bio_valid(&d.slots), || {
            format!("instance {n}: BIO-invalid {:?}", d.slots)
        });
        suite.check(d.slots.iter().all(|&o| inst.rm.rm[[d.intent, o]]), || {
            format!(
                "instance {n}: relation violation {:?} under intent {}",
                d.slots, d.intent
            )
        });
    }
    suite.finish()
}

/// Probabilities of feasible pairs sum to one; masked pairs and masked
/// marginal entries are exactly zero.
pub fn normalization_suite(instances: &[LatticeInstance]) -> SuiteResult {
    let mut suite = Suite::new("normalization", NORMALIZATION_TOL);
    for (n, inst) in instances.iter().enumerate() {
        suite.result.instances += 1;
        let inp = inst.inputs();
        let Ok(post) = log_partition(&inp) else {
            suite.fail(format!("instance {n}: infeasible"));
            continue;
        };
        let mut total = 0.0;
        for (y, t, brute) in inst.enumerate() {
            let p = (joint_score(y, &t, &inp) - post.log_z).exp();
            if brute == f64::NEG_INFINITY {
                suite.check(p == 0.0, || {
                    format!("instance {n}: masked pair ({y}, {t:?}) has p = {p:e}")
                });
            } else {
                total += p;
            }
        }
        suite.error((total - 1.0).abs());
        suite.check((total - 1.0).abs() <= NORMALIZATION_TOL, || {
            format!("instance {n}: Σp = {total}")
        });
        for y in 0..inst.f_l.len() {
            for ((_, o), &mu) in post.slot_marginals[y].indexed_iter() {
                if !inst.rm.rm[[y, o]] {
                    suite.check(mu == 0.0, || format!("instance {n}: masked marginal {mu:e}"));
                }
            }
        }
    }
    suite.finish()
}

/// Adding a constant to all intent emissions, or to one token's slot row,
/// changes no probability and no decision.
pub fn shift_suite(instances: &[LatticeInstance], rng: &mut Rng) -> SuiteResult {
    let mut suite = Suite::new("shift_invariance", SHIFT_TOL);
    for (n, inst) in instances.iter().enumerate() {
        let row = rng.random_range(0..inst.f_o.nrows());
        let mut by_intent = inst.clone();
        by_intent.f_l += SHIFT;
        let mut by_row = inst.clone();
        by_row.f_o.row_mut(row).mapv_inplace(|v| v + SHIFT);
        let base = inst.inputs();
        let (Ok(p0), d0) = (log_partition(&base), viterbi_decode(&base)) else {
            suite.fail(format!("instance {n}: infeasible"));
            continue;
        };
        for (what, shifted) in [("intent", &by_intent), ("row", &by_row)] {
            suite.result.instances += 1;
            let inp = shifted.inputs();
            let p1 = log_partition(&inp).expect("shift keeps feasibility");
            let d1 = viterbi_decode(&inp);
            suite.check(d0.intent == d1.intent && d0.slots == d1.slots, || {
                format!("instance {n} ({what}): decode changed")
            });
            for y in 0..inst.f_l.len() {
                let e = (p0.intent_marginals[y] - p1.intent_marginals[y]).abs();
                suite.error(e);
                suite.check(e <= SHIFT_TOL, || {
                    format!("instance {n} ({what}): q({y}) moved by {e:e}")
                });
            }
            for (y, t, s) in inst.enumerate() {
                if s == f64::NEG_INFINITY {
                    continue;
                }
                let a = (joint_score(y, &t, &base) - p0.log_z).exp();
                let b = (joint_score(y, &t, &inp) - p1.log_z).exp();
                let e = (a - b).abs();
                suite.error(e);
                suite.check(e <= SHIFT_TOL, || {
                    format!("instance {n} ({what}): p({y}, {t:?}) moved by {e:e}")
                });
            }
        }
    }
    suite.finish()
}

/// Lattice-loss gradients with respect to `f_l` and `f_o` against central
/// differences, for a uniformly drawn feasible gold pair.
pub fn lattice_gradient_suite(instances: &[LatticeInstance], rng: &mut Rng) -> SuiteResult {
    let mut suite = Suite::new("lattice_gradient", FD_TOL);
    for (n, inst) in instances.iter().enumerate() {
        suite.result.instances += 1;
        let feasible: Vec<_> = inst
            .enumerate()
            .into_iter()
            .filter(|p| p.2 > f64::NEG_INFINITY)
            .collect();
        let (gy, gt, _) = feasible.choose(rng).expect("forced O keeps a feasible pair").clone();
        let loss_at = |f_l: &Array1<f64>, f_o: &Array2<f64>| {
            let inp = JointScoreInputs::new(f_l, f_o, &inst.rm, &inst.tm, inst.lambda);
            nll_loss(gy, &gt, &inp).expect("gold stays feasible").value
        };
        let inp = inst.inputs();
        let loss = nll_loss(gy, &gt, &inp).expect("gold is feasible");
        let (d_l, d_o) = loss_gradients(gy, &gt, &loss.posterior, &inp);
        for y in 0..inst.f_l.len() {
            let (mut up, mut down) = (inst.f_l.clone(), inst.f_l.clone());
            up[y] += FD_STEP;
            down[y] -= FD_STEP;
            let fd = (loss_at(&up, &inst.f_o) - loss_at(&down, &inst.f_o)) / (2.0 * FD_STEP);
            let e = relative_error(d_l[y], fd);
            suite.error(e);
            suite.check(e <= FD_TOL, || format!("instance {n}: dL/df_l[{y}] {} vs {fd}", d_l[y]));
        }
        for ((i, o), &an) in d_o.indexed_iter() {
            let (mut up, mut down) = (inst.f_o.clone(), inst.f_o.clone());
            up[[i, o]] += FD_STEP;
            down[[i, o]] -= FD_STEP;
            let fd = (loss_at(&inst.f_l, &up) - loss_at(&inst.f_l, &down)) / (2.0 * FD_STEP);
            let e = relative_error(an, fd);
            suite.error(e);
            suite.check(e <= FD_TOL, || format!("instance {n}: dL/df_o[{i},{o}] {an} vs {fd}"));
        }
    }
    suite.finish()
}

/// A tiny episode with one query whose gold pair is feasible under both masks.
#[derive(Debug, Clone)]
pub struct EncoderInstance {
    pub encoder: Encoder,
    pub episode: Episode,
    pub config: RunConfig,
}

const TOY_VOCAB: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

fn random_bio(rng: &mut Rng, m: usize, types: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(m);
    for i in 0..m {
        let prev_type = (i > 0)
            .then(|| out[i - 1].split_once('-').map(|(_, t)| t.to_string()))
            .flatten();
        let r = rng.random_range(0..3);
        let label = match (r, prev_type) {
            (0, _) => "O".to_string(),
            (1, Some(t)) => format!("I-{t}"),
            _ => format!("B-{}", types.choose(rng).expect("non-empty types")),
        };
        out.push(label);
    }
    out
}

impl EncoderInstance {
    pub fn random(rng: &mut Rng, n: usize) -> EncoderInstance {
        let dim = rng.random_range(3..=8);
        let config = EncoderConfig {
            kind: EncoderKind::Trainable,
            dim,
            context_window: rng.random_range(0..=2),
            init_scale: 0.5,
            seed: rng.random(),
        };
        let encoder = Encoder::new(config, TOY_VOCAB).expect("valid encoder config");
        let types = ["a", "b"];
        let n_support = rng.random_range(2..=4);
        let mut raw: Vec<(String, Vec<String>)> = (0..n_support)
            .map(|_| {
                let m = rng.random_range(1..=4);
                (format!("y{}", rng.random_range(0..2)), random_bio(rng, m, &types))
            })
            .collect();
        raw[0].1.push("O".into());
        let mut intents: Vec<String> = raw.iter().map(|r| r.0.clone()).collect();
        intents.sort();
        intents.dedup();
        let mut slots: Vec<String> = vec!["O".into()];
        for ty in types {
            for prefix in ["B", "I"] {
                let name = format!("{prefix}-{ty}");
                if raw.iter().any(|r| r.1.contains(&name)) {
                    slots.push(name);
                }
            }
        }
        let ls = LabelSpace::new(intents, slots).expect("labels from support");
        let token = |rng: &mut Rng| TOY_VOCAB.choose(rng).expect("non-empty").to_string();
        let support: Vec<Sample> = raw
            .iter()
            .map(|(y, t)| Sample {
                tokens: (0..t.len()).map(|_| token(rng)).collect(),
                intent: ls.intent_id(y).expect("known intent"),
                slots: t.iter().map(|o| ls.slot_id(o).expect("known slot")).collect(),
            })
            .collect();
        let template = support.choose(rng).expect("non-empty support").clone();
        let query = Sample {
            tokens: (0..template.len())
                .map(|_| {
                    if rng.random_bool(0.15) {
                        "unseen".to_string()
                    } else {
                        token(rng)
                    }
                })
                .collect(),
            ..template
        };
        let loss_mode = [LossMode::Joint, LossMode::SeqCe, LossMode::SumSep][n % 3];
        let config = RunConfig {
            similarity: Similarity::ALL[(n / 3) % 3],
            lambda: rng.random_range(0.5..1.5),
            loss_mode,
            ..RunConfig::default()
        };
        EncoderInstance {
            encoder,
            episode: Episode {
                domain: format!("toy{n}"),
                label_space: ls,
                support,
                query: vec![query],
                unresolved: Vec::new(),
            },
            config,
        }
    }

    pub fn loss(&self, encoder: &Encoder) -> Result<f64> {
        Ok(compute_loss(&self.episode, &self.episode.query[0], encoder, &self.config)?.0)
    }
}

/// End-to-end encoder-parameter gradients (through query encodings,
/// prototypes and support encodings) against central differences.
pub fn encoder_gradient_suite(instances: &[EncoderInstance]) -> SuiteResult {
    let mut suite = Suite::new("encoder_gradient", FD_TOL);
    for (n, inst) in instances.iter().enumerate() {
        suite.result.instances += 1;
        let (_, grads) = match compute_loss(&inst.episode, &inst.episode.query[0], &inst.encoder, &inst.config) {
            Ok(v) => v,
            Err(e) => {
                suite.fail(format!("instance {n}: {e}"));
                continue;
            }
        };
        let grads = grads.expect("trainable encoder yields gradients");
        let mut probe = inst.encoder.clone();
        for (t, analytic) in grads.tensors().iter().enumerate() {
            for k in 0..analytic.len() {
                let orig = probe.params().tensors()[t][k];
                probe.params_mut().tensors_mut()[t][k] = orig + FD_STEP;
                let up = inst.loss(&probe);
                probe.params_mut().tensors_mut()[t][k] = orig - FD_STEP;
                let down = inst.loss(&probe);
                probe.params_mut().tensors_mut()[t][k] = orig;
                let (Ok(up), Ok(down)) = (up, down) else {
                    suite.fail(format!("instance {n}: loss failed under perturbation"));
                    continue;
                };
                let fd = (up - down) / (2.0 * FD_STEP);
                let e = relative_error(analytic[k], fd);
                suite.error(e);
                suite.check(e <= FD_TOL, || {
                    format!(
                        "instance {n} ({:?}): tensor {t}[{k}] {} vs {fd}",
                        inst.config.loss_mode, analytic[k]
                    )
                });
            }
        }
    }
    suite.finish()
}

/// Random labeled corpus for support-selection checks.
pub fn random_corpus(rng: &mut Rng) -> Corpus {
    let n_y = rng.random_range(1..=4);
    let types: Vec<String> = (0..rng.random_range(0..=3)).map(|k| format!("t{k}")).collect();
    let mut slots = vec!["O".to_string()];
    for ty in &types {
        slots.push(format!("B-{ty}"));
        slots.push(format!("I-{ty}"));
    }
    let ls = LabelSpace::new((0..n_y).map(|l| format!("i{l}")).collect(), slots).expect("valid labels");
    let type_refs: Vec<&str> = types.iter().map(String::as_str).collect();
    let samples = (0..rng.random_range(5..=40))
        .map(|_| {
            let m = rng.random_range(1..=6);
            let names = if type_refs.is_empty() {
                vec!["O".to_string(); m]
            } else {
                random_bio(rng, m, &type_refs)
            };
            Sample {
                tokens: vec!["w".into(); m],
                intent: rng.random_range(0..n_y),
                slots: names.iter().map(|o| ls.slot_id(o).expect("known slot")).collect(),
            }
        })
        .collect();
    Corpus {
        domain: "random".into(),
        samples,
        label_space: ls,
    }
}

/// Per-class counts: samples per intent, words per slot label.
fn class_counts(samples: &[&Sample], ls: &LabelSpace) -> Vec<usize> {
    let mut c = vec![0usize; ls.n_intents() + ls.n_slots()];
    for s in samples {
        c[s.intent] += 1;
        for &o in &s.slots {
            c[ls.n_intents() + o] += 1;
        }
    }
    c
}

fn covered(samples: &[&Sample], ls: &LabelSpace, k: usize) -> bool {
    class_counts(samples, ls).iter().all(|&c| c >= k)
}

/// Support sets cover every class `K` times and lose coverage when any single
/// sample is removed; selection fails exactly when the corpus itself is short.
pub fn mini_including_suite(n_corpora: usize, rng: &mut Rng) -> SuiteResult {
    let mut suite = Suite::new("mini_including", 0.0);
    for n in 0..n_corpora {
        let corpus = random_corpus(rng);
        let ls = &corpus.label_space;
        let all: Vec<&Sample> = corpus.samples.iter().collect();
        for k in [1, 2, 5] {
            suite.result.instances += 1;
            let feasible = covered(&all, ls, k);
            match select_support(&corpus, k, rng) {
                Err(e) => suite.check(!feasible, || format!("corpus {n}, K={k}: unexpected {e}")),
                Ok(idx) => {
                    suite.check(feasible, || format!("corpus {n}, K={k}: selected from a short corpus"));
                    let mut sorted = idx.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    suite.check(sorted.len() == idx.len(), || {
                        format!("corpus {n}, K={k}: duplicate sample")
                    });
                    let chosen: Vec<&Sample> = idx.iter().map(|&i| &corpus.samples[i]).collect();
                    suite.check(covered(&chosen, ls, k), || {
                        format!("corpus {n}, K={k}: coverage broken")
                    });
                    for drop in 0..chosen.len() {
                        let rest: Vec<&Sample> = chosen
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != drop)
                            .map(|(_, s)| *s)
                            .collect();
                        suite.check(!covered(&rest, ls, k), || {
                            format!("corpus {n}, K={k}: sample {} is redundant", idx[drop])
                        });
                    }
                }
            }
        }
    }
    suite.finish()
}

/// Span counts `(correct, gold, predicted)` of one tagged sentence pair via
/// the chunk-boundary state machine of the conlleval script.
pub fn conlleval_counts<S: AsRef<str>>(gold: &[S], pred: &[S]) -> (usize, usize, usize) {
    fn split(tag: &str) -> (&str, &str) {
        match tag.split_once('-') {
            Some((p, t)) => (p, t),
            None => (tag, ""),
        }
    }
    fn end_of_chunk(prev: (&str, &str), cur: (&str, &str)) -> bool {
        matches!((prev.0, cur.0), ("B", "B") | ("B", "O") | ("I", "B") | ("I", "O"))
            || (prev.0 != "O" && prev.1 != cur.1)
    }
    fn start_of_chunk(prev: (&str, &str), cur: (&str, &str)) -> bool {
        matches!((prev.0, cur.0), ("B", "B") | ("I", "B") | ("O", "B") | ("O", "I"))
            || (cur.0 != "O" && prev.1 != cur.1)
    }
    let (mut correct, mut found_gold, mut found_pred) = (0, 0, 0);
    let mut in_correct = false;
    let (mut last_g, mut last_p) = (("O", ""), ("O", ""));
    let boundary = std::iter::once(("O", "O"));
    let tokens = gold
        .iter()
        .map(AsRef::as_ref)
        .zip(pred.iter().map(AsRef::as_ref))
        .chain(boundary);
    for (g, p) in tokens {
        let (g, p) = (split(g), split(p));
        if in_correct {
            let (eg, ep) = (end_of_chunk(last_g, g), end_of_chunk(last_p, p));
            if eg && ep && last_g.1 == last_p.1 {
                in_correct = false;
                correct += 1;
            } else if eg != ep || g.1 != p.1 {
                in_correct = false;
            }
        }
        let (sg, sp) = (start_of_chunk(last_g, g), start_of_chunk(last_p, p));
        if sg && sp && g.1 == p.1 {
            in_correct = true;
        }
        found_gold += usize::from(sg);
        found_pred += usize::from(sp);
        last_g = g;
        last_p = p;
    }
    (correct, found_gold, found_pred)
}

/// Span F1 of [`MetricsAccumulator`] against [`conlleval_counts`] on random
/// (possibly BIO-invalid) prediction/gold batches.
pub fn metrics_suite(n_cases: usize, rng: &mut Rng) -> SuiteResult {
    let mut suite = Suite::new("metrics", 0.0);
    let names = ["O", "B-a", "I-a", "B-b", "I-b"];
    for n in 0..n_cases {
        suite.result.instances += 1;
        let mut acc = MetricsAccumulator::new();
        let (mut c, mut g, mut p) = (0, 0, 0);
        for _ in 0..rng.random_range(1..=5) {
            let m = rng.random_range(1..=8);
            let gold: Vec<&str> = (0..m).map(|_| *names.choose(rng).expect("labels")).collect();
            let pred: Vec<&str> = gold
                .iter()
                .map(|&o| {
                    if rng.random_bool(0.6) {
                        o
                    } else {
                        *names.choose(rng).expect("labels")
                    }
                })
                .collect();
            acc.add("x", &pred, "x", &gold);
            let (dc, dg, dp) = conlleval_counts(&gold, &pred);
            c += dc;
            g += dg;
            p += dp;
        }
        let s = acc.summary();
        let (precision, recall) = (
            if p > 0 { c as f64 / p as f64 } else { 0.0 },
            if g > 0 { c as f64 / g as f64 } else { 0.0 },
        );
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        suite.check((s.n_correct_spans, s.n_gold_spans, s.n_pred_spans) == (c, g, p), || {
            format!(
                "case {n}: counts ({}, {}, {}) vs reference ({c}, {g}, {p})",
                s.n_correct_spans, s.n_gold_spans, s.n_pred_spans
            )
        });
        suite.check(s.slot_f1 == Some(f1), || {
            format!("case {n}: F1 {:?} vs reference {f1}", s.slot_f1)
        });
    }
    suite.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub trials: usize,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl OracleReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

/// Runs every suite with `trials` random instances each (support selection
/// runs `trials` corpora, each at K = 1, 2 and 5).
pub fn run_all(trials: usize, seed: u64) -> OracleReport {
    let mut rng = stream(seed, "oracle/lattice");
    let lattices: Vec<LatticeInstance> = (0..trials).map(|_| LatticeInstance::random(&mut rng)).collect();
    let mut rng = stream(seed, "oracle/encoder");
    let encoders: Vec<EncoderInstance> = (0..trials).map(|n| EncoderInstance::random(&mut rng, n)).collect();
    let suites = vec![
        partition_suite(&lattices),
        decoding_suite(&lattices),
        normalization_suite(&lattices),
        shift_suite(&lattices, &mut stream(seed, "oracle/shift")),
        lattice_gradient_suite(&lattices, &mut stream(seed, "oracle/gold")),
        encoder_gradient_suite(&encoders),
        mini_including_suite(trials, &mut stream(seed, "oracle/support")),
        metrics_suite(trials, &mut stream(seed, "oracle/metrics")),
    ];
    OracleReport {
        seed,
        trials,
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}
