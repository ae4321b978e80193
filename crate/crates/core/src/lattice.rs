//! Exact inference over (intent, slot sequence) pairs.
//!
//! The joint score of intent `y` and slot sequence `t` is
//! `λ·f_l[y] + Σ_i (f_e(t_i | y) + f_t(t_i | t_{i-1}))`, where `f_e` is the
//! relation-masked slot emission and `f_t(t_1 | t_0)` is the START row of the
//! transition mask. Every intent owns a masked linear-chain lattice; the joint
//! partition function is a log-sum-exp over the per-intent forward scores.
//!
//! `f64::NEG_INFINITY` is the "masked" sentinel. Reductions skip it explicitly,
//! so masked configurations carry exactly zero probability.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::masks::{RelationMask, TransitionMask};

/// Default intent-score weight.
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
pub struct JointScoreInputs<'a> {
    /// Intent emissions, length Y.
    pub f_l: &'a Array1<f64>,
    /// Slot emissions, `m × T`.
    pub f_o: &'a Array2<f64>,
    pub rm: &'a RelationMask,
    pub tm: &'a TransitionMask,
    pub lambda: f64,
}

impl<'a> JointScoreInputs<'a> {
    pub fn new(
        f_l: &'a Array1<f64>,
        f_o: &'a Array2<f64>,
        rm: &'a RelationMask,
        tm: &'a TransitionMask,
        lambda: f64,
    ) -> JointScoreInputs<'a> {
        let inp = JointScoreInputs {
            f_l,
            f_o,
            rm,
            tm,
            lambda,
        };
        inp.check_shapes();
        inp
    }

    fn check_shapes(&self) {
        let (y, t) = (self.f_l.len(), self.f_o.ncols());
        assert!(y >= 1 && t >= 1 && self.f_o.nrows() >= 1, "empty lattice");
        assert_eq!(self.rm.rm.dim(), (y, t), "relation mask shape");
        assert_eq!(self.tm.trans.dim(), (t, t), "transition mask shape");
        assert_eq!(self.tm.start.len(), t, "start row length");
        assert!(self.lambda.is_finite(), "lambda must be finite");
    }

    pub fn n_intents(&self) -> usize {
        self.f_l.len()
    }

    pub fn n_slots(&self) -> usize {
        self.f_o.ncols()
    }

    pub fn len(&self) -> usize {
        self.f_o.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.f_o.nrows() == 0
    }

    /// `f_e(t_i = o | y)`.
    #[inline]
    pub fn emission(&self, y: usize, i: usize, o: usize) -> f64 {
        if self.rm.rm[[y, o]] {
            self.f_o[[i, o]]
        } else {
            f64::NEG_INFINITY
        }
    }

    #[inline]
    fn intent_term(&self, y: usize) -> f64 {
        self.lambda * self.f_l[y]
    }
}

/// `log Σ exp(x)` over the finite entries; `-inf` if there are none.
pub fn logsumexp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let v: Vec<f64> = values.into_iter().filter(|x| *x != f64::NEG_INFINITY).collect();
    let Some(max) = v.iter().copied().reduce(f64::max) else {
        return f64::NEG_INFINITY;
    };
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Joint score `R(y, t)`; `-inf` iff some factor is masked.
pub fn joint_score(y: usize, t: &[usize], inp: &JointScoreInputs) -> f64 {
    assert_eq!(t.len(), inp.len(), "slot sequence length");
    let mut acc = inp.tm.start[t[0]] + inp.emission(y, 0, t[0]);
    for i in 1..t.len() {
        acc = inp.emission(y, i, t[i]) + (acc + inp.tm.trans[[t[i - 1], t[i]]]);
    }
    inp.intent_term(y) + acc
}

/// Exact partition function and marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPosterior {
    pub log_z: f64,
    /// Per-intent slot-lattice log-partition (without the intent term).
    pub log_z_slot: Vec<f64>,
    /// `q(y)`.
    pub intent_marginals: Array1<f64>,
    /// `μ_y(i, o) = p(intent = y, t_i = o)`, one `m × T` matrix per intent.
    pub slot_marginals: Vec<Array2<f64>>,
}

fn forward(inp: &JointScoreInputs, y: usize) -> Array2<f64> {
    let (m, t) = (inp.len(), inp.n_slots());
    let mut alpha = Array2::from_elem((m, t), f64::NEG_INFINITY);
    for o in 0..t {
        alpha[[0, o]] = inp.tm.start[o] + inp.emission(y, 0, o);
    }
    for i in 1..m {
        for o in 0..t {
            let e = inp.emission(y, i, o);
            if e == f64::NEG_INFINITY {
                continue;
            }
            let inc = logsumexp((0..t).map(|p| alpha[[i - 1, p]] + inp.tm.trans[[p, o]]));
            alpha[[i, o]] = e + inc;
        }
    }
    alpha
}

fn backward(inp: &JointScoreInputs, y: usize) -> Array2<f64> {
    let (m, t) = (inp.len(), inp.n_slots());
    let mut beta = Array2::from_elem((m, t), f64::NEG_INFINITY);
    beta.row_mut(m - 1).fill(0.0);
    for i in (0..m - 1).rev() {
        for o in 0..t {
            beta[[i, o]] =
                logsumexp((0..t).map(|n| inp.tm.trans[[o, n]] + inp.emission(y, i + 1, n) + beta[[i + 1, n]]));
        }
    }
    beta
}

pub fn log_partition(inp: &JointScoreInputs) -> Result<JointPosterior> {
    let y_count = inp.n_intents();
    let mut alphas = Vec::with_capacity(y_count);
    let mut log_z_slot = Vec::with_capacity(y_count);
    for y in 0..y_count {
        let alpha = forward(inp, y);
        log_z_slot.push(logsumexp(alpha.row(inp.len() - 1).iter().copied()));
        alphas.push(alpha);
    }
    let totals: Vec<f64> = (0..y_count)
        .map(|y| {
            if log_z_slot[y] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                inp.intent_term(y) + log_z_slot[y]
            }
        })
        .collect();
    let log_z = logsumexp(totals.iter().copied());
    if log_z == f64::NEG_INFINITY {
        return Err(Error::InfeasibleLattice);
    }
    let intent_marginals: Array1<f64> = totals.iter().map(|&s| (s - log_z).exp()).collect();
    let slot_marginals = (0..y_count)
        .map(|y| {
            if totals[y] == f64::NEG_INFINITY {
                return Array2::zeros(inp.f_o.raw_dim());
            }
            let beta = backward(inp, y);
            let shift = inp.intent_term(y) - log_z;
            let alpha = &alphas[y];
            Array2::from_shape_fn(inp.f_o.raw_dim(), |(i, o)| {
                let a = alpha[[i, o]];
                if a == f64::NEG_INFINITY || beta[[i, o]] == f64::NEG_INFINITY {
                    0.0
                } else {
                    (a + beta[[i, o]] + shift).exp()
                }
            })
        })
        .collect();
    Ok(JointPosterior {
        log_z,
        log_z_slot,
        intent_marginals,
        slot_marginals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub gold_score: f64,
    pub posterior: JointPosterior,
}

/// `L = log Z − R(gold)`.
pub fn nll_loss(gold_y: usize, gold_t: &[usize], inp: &JointScoreInputs) -> Result<Loss> {
    let gold_score = joint_score(gold_y, gold_t, inp);
    if gold_score == f64::NEG_INFINITY {
        return Err(Error::InfeasibleGold);
    }
    let posterior = log_partition(inp)?;
    Ok(Loss {
        value: (posterior.log_z - gold_score).max(0.0),
        gold_score,
        posterior,
    })
}

/// `(∂L/∂f_l, ∂L/∂f_o)` of [`nll_loss`].
pub fn loss_gradients(
    gold_y: usize,
    gold_t: &[usize],
    posterior: &JointPosterior,
    inp: &JointScoreInputs,
) -> (Array1<f64>, Array2<f64>) {
    let mut d_l = posterior.intent_marginals.mapv(|q| inp.lambda * q);
    d_l[gold_y] -= inp.lambda;
    let mut d_o = Array2::zeros(inp.f_o.raw_dim());
    for mu in &posterior.slot_marginals {
        d_o += mu;
    }
    for (i, &o) in gold_t.iter().enumerate() {
        d_o[[i, o]] -= 1.0;
    }
    (d_l, d_o)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub intent: usize,
    pub slots: Vec<usize>,
    /// `R(intent, slots)`; `-inf` when no pair is feasible.
    pub score: f64,
}

/// Smallest index attaining the maximum; `None` if every value is `-inf`.
fn first_argmax<I: IntoIterator<Item = f64>>(values: I) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.into_iter().enumerate() {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best
}

/// Best path of intent `y`'s lattice, lexicographically smallest among ties.
fn best_path(inp: &JointScoreInputs, y: usize) -> Option<Vec<usize>> {
    let (m, t) = (inp.len(), inp.n_slots());
    // suffix[i][o]: best score of positions i+1.. given t_i = o
    let mut suffix = Array2::from_elem((m, t), f64::NEG_INFINITY);
    suffix.row_mut(m - 1).fill(0.0);
    let step = |suffix: &Array2<f64>, i: usize, prev: usize, o: usize| {
        inp.tm.trans[[prev, o]] + inp.emission(y, i, o) + suffix[[i, o]]
    };
    for i in (0..m - 1).rev() {
        for o in 0..t {
            let best = (0..t)
                .map(|n| step(&suffix, i + 1, o, n))
                .fold(f64::NEG_INFINITY, f64::max);
            suffix[[i, o]] = best;
        }
    }
    let (first, _) = first_argmax((0..t).map(|o| inp.tm.start[o] + inp.emission(y, 0, o) + suffix[[0, o]]))?;
    let mut path = vec![first];
    for i in 1..m {
        let prev = path[i - 1];
        let (next, _) = first_argmax((0..t).map(|o| step(&suffix, i, prev, o)))?;
        path.push(next);
    }
    Some(path)
}

fn pick_intent(
    inp: &JointScoreInputs,
    candidates: Vec<Option<Vec<usize>>>,
    score: impl Fn(usize, &[usize]) -> f64,
) -> Decoded {
    let mut best: Option<Decoded> = None;
    for (y, path) in candidates.into_iter().enumerate() {
        let Some(path) = path else { continue };
        let s = score(y, &path);
        if s == f64::NEG_INFINITY {
            continue;
        }
        if best.as_ref().is_none_or(|b| s > b.score) {
            best = Some(Decoded {
                intent: y,
                slots: path,
                score: s,
            });
        }
    }
    best.unwrap_or_else(|| infeasible_fallback(inp))
}

/// Highest intent emission and per-token unmasked argmax; only reachable when
/// masks leave no feasible pair.
fn infeasible_fallback(inp: &JointScoreInputs) -> Decoded {
    let intent = first_argmax(inp.f_l.iter().copied()).map_or(0, |(y, _)| y);
    let slots = inp
        .f_o
        .rows()
        .into_iter()
        .map(|r| first_argmax(r.iter().copied()).map_or(0, |(o, _)| o))
        .collect();
    Decoded {
        intent,
        slots,
        score: f64::NEG_INFINITY,
    }
}

/// Joint argmax of `R` with ties broken by lowest intent id, then the
/// lexicographically smallest slot sequence.
pub fn viterbi_decode(inp: &JointScoreInputs) -> Decoded {
    let paths = (0..inp.n_intents()).map(|y| best_path(inp, y)).collect();
    pick_intent(inp, paths, |y, t| joint_score(y, t, inp))
}

/// Intent by `argmax f_l`, then per-token argmax of the relation-masked slot
/// emissions under that intent, ignoring transitions. Intents whose related
/// slot set is empty are passed over. The reported score uses uniform
/// transitions.
pub fn decode_tokenwise(inp: &JointScoreInputs) -> Decoded {
    let uniform = TransitionMask::permissive(inp.n_slots());
    let flat = JointScoreInputs { tm: &uniform, ..*inp };
    let path = |y: usize| {
        (0..inp.len())
            .map(|i| first_argmax((0..inp.n_slots()).map(|o| inp.emission(y, i, o))).map(|(o, _)| o))
            .collect::<Option<Vec<_>>>()
    };
    let mut order: Vec<usize> = (0..inp.n_intents()).collect();
    order.sort_by(|&a, &b| inp.f_l[b].total_cmp(&inp.f_l[a]).then(a.cmp(&b)));
    for y in order {
        if let Some(slots) = path(y) {
            let score = joint_score(y, &slots, &flat);
            return Decoded {
                intent: y,
                slots,
                score,
            };
        }
    }
    infeasible_fallback(inp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelSpace;
    use crate::masks::build_transition_mask;
    use crate::rng::stream;
    use rand::Rng as _;

    fn label_space(types: &[&str]) -> LabelSpace {
        let mut slots = vec!["O".to_string()];
        for ty in types {
            slots.push(format!("B-{ty}"));
            slots.push(format!("I-{ty}"));
        }
        LabelSpace::new(vec!["a".into(), "b".into(), "c".into()], slots).unwrap()
    }

    #[test]
    fn logsumexp_skips_sentinel() {
        assert_eq!(logsumexp([]), f64::NEG_INFINITY);
        assert_eq!(logsumexp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(logsumexp([3.0, f64::NEG_INFINITY]), 3.0);
        assert!((logsumexp([0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        let big = logsumexp([1e6, 1e6]);
        assert!((big - (1e6 + 2f64.ln())).abs() < 1e-9);
        assert_eq!(logsumexp([-1e6, 1e6]), 1e6);
    }

    #[test]
    fn single_token_score_expansion() {
        let f_l = Array1::from(vec![0.7]);
        let f_o = Array2::from_shape_vec((1, 2), vec![0.25, -1.5]).unwrap();
        let rm = RelationMask::permissive(1, 2);
        let tm = TransitionMask::permissive(2);
        let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
        assert_eq!(joint_score(0, &[1], &inp), 0.7 + (-1.5) + 1.0);
    }

    #[test]
    fn masked_slot_scores_negative_infinity() {
        let f_l = Array1::zeros(1);
        let f_o = Array2::zeros((2, 2));
        let mut rm = RelationMask::permissive(1, 2);
        rm.rm[[0, 1]] = false;
        let tm = TransitionMask::permissive(2);
        let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
        assert_eq!(joint_score(0, &[0, 1], &inp), f64::NEG_INFINITY);
        assert!(joint_score(0, &[0, 0], &inp).is_finite());
    }

    #[test]
    fn uniform_two_by_two() {
        let f_l = Array1::zeros(1);
        let f_o = Array2::zeros((2, 2));
        let rm = RelationMask::permissive(1, 2);
        let tm = TransitionMask::permissive(2);
        let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
        let post = log_partition(&inp).unwrap();
        assert!((post.log_z - (4f64.ln() + 2.0)).abs() < 1e-12);
        for t in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let p = (joint_score(0, &t, &inp) - post.log_z).exp();
            assert!((p - 0.25).abs() < 1e-12);
        }
        assert!((post.intent_marginals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_softmax_has_zero_loss() {
        for m in 1..5 {
            let f_l = Array1::from(vec![2.5]);
            let f_o = Array2::from_elem((m, 1), -0.3);
            let rm = RelationMask::permissive(1, 1);
            let tm = TransitionMask::permissive(1);
            let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
            let loss = nll_loss(0, &vec![0; m], &inp).unwrap();
            assert_eq!(loss.value, 0.0);
            let (dl, dvo) = loss_gradients(0, &vec![0; m], &loss.posterior, &inp);
            assert!(dl.iter().all(|v| v.abs() < 1e-12));
            assert!(dvo.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn masked_gold_is_infeasible() {
        let f_l = Array1::zeros(1);
        let f_o = Array2::zeros((1, 2));
        let mut rm = RelationMask::permissive(1, 2);
        rm.rm[[0, 1]] = false;
        let tm = TransitionMask::permissive(2);
        let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
        assert!(matches!(nll_loss(0, &[1], &inp), Err(Error::InfeasibleGold)));
    }

    fn random_instance(rng: &mut crate::rng::Rng) -> (Array1<f64>, Array2<f64>, RelationMask, TransitionMask) {
        let ls = label_space(&["x", "y"]);
        let y = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let f_l = Array1::from_shape_fn(y, |_| rng.random_range(-5.0..5.0));
        let f_o = Array2::from_shape_fn((m, 5), |_| rng.random_range(-5.0..5.0));
        let mut rm = RelationMask {
            rm: Array2::from_shape_fn((y, 5), |_| rng.random_bool(0.6)),
            forced_o: true,
        };
        rm.rm.column_mut(0).fill(true);
        (f_l, f_o, rm, build_transition_mask(&ls))
    }

    #[test]
    fn gradient_sums_and_signs() {
        let mut rng = stream(12, "lattice-grad");
        for _ in 0..50 {
            let (f_l, f_o, rm, tm) = random_instance(&mut rng);
            let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
            let d = viterbi_decode(&inp);
            let loss = nll_loss(d.intent, &d.slots, &inp).unwrap();
            assert!(loss.value >= 0.0);
            let (dl, _) = loss_gradients(d.intent, &d.slots, &loss.posterior, &inp);
            assert!(dl.sum().abs() < 1e-12);
            if loss.posterior.intent_marginals[d.intent] < 1.0 - 1e-12 {
                assert!(dl[d.intent] < 0.0);
                let mut bumped = f_l.clone();
                bumped[d.intent] += 1e-3;
                let inp2 = JointScoreInputs::new(&bumped, &f_o, &rm, &tm, 1.0);
                assert!(nll_loss(d.intent, &d.slots, &inp2).unwrap().value < loss.value);
            }
        }
    }

    #[test]
    fn marginals_are_consistent_and_zero_where_masked() {
        let mut rng = stream(13, "lattice-marg");
        for _ in 0..100 {
            let (f_l, f_o, rm, tm) = random_instance(&mut rng);
            let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
            let post = log_partition(&inp).unwrap();
            assert!((post.intent_marginals.sum() - 1.0).abs() < 1e-9);
            for (y, mu) in post.slot_marginals.iter().enumerate() {
                for i in 0..inp.len() {
                    let row: f64 = mu.row(i).sum();
                    assert!((row - post.intent_marginals[y]).abs() < 1e-9);
                    for o in 0..inp.n_slots() {
                        if !rm.rm[[y, o]] {
                            assert_eq!(mu[[i, o]], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn decode_is_bio_valid_and_score_consistent() {
        let ls = label_space(&["x", "y"]);
        let mut rng = stream(14, "lattice-dec");
        for _ in 0..200 {
            let (f_l, f_o, rm, tm) = random_instance(&mut rng);
            let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
            let d = viterbi_decode(&inp);
            assert_eq!(joint_score(d.intent, &d.slots, &inp).to_bits(), d.score.to_bits());
            assert!(ls.tag(d.slots[0]).allows_start());
            for w in d.slots.windows(2) {
                assert!(ls.tag(w[0]).allows_next(ls.tag(w[1])));
            }
            assert!(d.slots.iter().all(|&o| rm.rm[[d.intent, o]]));
        }
    }

    #[test]
    fn decoder_avoids_unrelated_slot() {
        let ls = label_space(&["city"]);
        let f_l = Array1::from(vec![0.0, -10.0, -10.0]);
        let f_o = Array2::from_shape_vec((2, 3), vec![0.0, 50.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let mut rm = RelationMask::permissive(3, 3);
        rm.rm[[0, 1]] = false;
        let tm = build_transition_mask(&ls);
        let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
        let d = viterbi_decode(&inp);
        if d.intent == 0 {
            assert!(!d.slots.contains(&1));
        }
        // the large B-city emission wins through an intent that permits it
        assert_eq!(d.intent, 1);
        assert_eq!(d.slots[0], 1);

        let only = Array1::from(vec![0.0]);
        let mut rm1 = RelationMask::permissive(1, 3);
        rm1.rm[[0, 1]] = false;
        let inp1 = JointScoreInputs::new(&only, &f_o, &rm1, &tm, 1.0);
        let d1 = viterbi_decode(&inp1);
        assert!(!d1.slots.contains(&1));
        assert!(!d1.slots.contains(&2));
    }

    #[test]
    fn tokenwise_takes_best_intent_then_best_tokens() {
        let mut rng = stream(15, "tokenwise");
        for _ in 0..100 {
            let (f_l, f_o, rm, tm) = random_instance(&mut rng);
            let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
            let d = decode_tokenwise(&inp);
            let y = (0..f_l.len()).fold(0, |b, l| if f_l[l] > f_l[b] { l } else { b });
            assert_eq!(d.intent, y);
            for (i, &o) in d.slots.iter().enumerate() {
                assert!(rm.related(y, o));
                for p in 0..f_o.ncols() {
                    assert!(!rm.related(y, p) || f_o[[i, p]] < f_o[[i, o]] || (f_o[[i, p]] == f_o[[i, o]] && p >= o));
                }
            }
        }
    }

    #[test]
    fn extreme_emissions_stay_finite() {
        let mut rng = stream(16, "extreme");
        for _ in 0..50 {
            let (mut f_l, mut f_o, rm, tm) = random_instance(&mut rng);
            f_l.mapv_inplace(|v| v.signum() * 1e6);
            f_o.mapv_inplace(|v| v.signum() * 1e6);
            let inp = JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0);
            let post = log_partition(&inp).unwrap();
            assert!(post.log_z.is_finite());
            assert!(post.intent_marginals.iter().all(|q| q.is_finite()));
            assert!(post.slot_marginals.iter().all(|m| m.iter().all(|v| v.is_finite())));
            let d = viterbi_decode(&inp);
            let loss = nll_loss(d.intent, &d.slots, &inp).unwrap();
            let (dl, dvo) = loss_gradients(d.intent, &d.slots, &loss.posterior, &inp);
            assert!(dl.iter().chain(dvo.iter()).all(|v| v.is_finite()));
        }
    }

    #[test]
    fn opening_a_relation_never_lowers_log_z() {
        let mut rng = stream(17, "monotone");
        for _ in 0..100 {
            let (f_l, f_o, rm, tm) = random_instance(&mut rng);
            let base = log_partition(&JointScoreInputs::new(&f_l, &f_o, &rm, &tm, 1.0))
                .unwrap()
                .log_z;
            let closed: Vec<(usize, usize)> = rm.rm.indexed_iter().filter(|(_, &v)| !v).map(|(k, _)| k).collect();
            for (y, o) in closed {
                let mut open = rm.clone();
                open.rm[[y, o]] = true;
                let lz = log_partition(&JointScoreInputs::new(&f_l, &f_o, &open, &tm, 1.0))
                    .unwrap()
                    .log_z;
                assert!(lz >= base);
            }
        }
    }
}
