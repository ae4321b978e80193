//! Intent accuracy, span-level slot F1 (conlleval convention) and joint accuracy.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{spans_from_names, LabelSpace, Sample};
use crate::error::{Error, Result};

/// Fractions are `None` when their denominator is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub intent_acc: Option<f64>,
    pub slot_precision: Option<f64>,
    pub slot_recall: Option<f64>,
    pub slot_f1: Option<f64>,
    pub joint_acc: Option<f64>,
    pub n_queries: usize,
    pub n_intent_correct: usize,
    pub n_joint_correct: usize,
    pub n_gold_spans: usize,
    pub n_pred_spans: usize,
    pub n_correct_spans: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    n_queries: usize,
    n_intent_correct: usize,
    n_joint_correct: usize,
    n_slot_seq_correct: usize,
    n_gold_spans: usize,
    n_pred_spans: usize,
    n_correct_spans: usize,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<S: AsRef<str>, G: AsRef<str>>(
        &mut self,
        pred_intent: &str,
        pred_slots: &[S],
        gold_intent: &str,
        gold_slots: &[G],
    ) {
        self.n_queries += 1;
        let intent_ok = pred_intent == gold_intent;
        let seq_ok = pred_slots.len() == gold_slots.len()
            && pred_slots.iter().zip(gold_slots).all(|(p, g)| p.as_ref() == g.as_ref());
        self.n_intent_correct += usize::from(intent_ok);
        self.n_slot_seq_correct += usize::from(seq_ok);
        self.n_joint_correct += usize::from(intent_ok && seq_ok);

        let gold: HashSet<_> = spans_from_names(gold_slots).into_iter().collect();
        let pred = spans_from_names(pred_slots);
        self.n_gold_spans += gold.len();
        self.n_pred_spans += pred.len();
        self.n_correct_spans += pred.iter().filter(|s| gold.contains(s)).count();
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.n_queries += other.n_queries;
        self.n_intent_correct += other.n_intent_correct;
        self.n_joint_correct += other.n_joint_correct;
        self.n_slot_seq_correct += other.n_slot_seq_correct;
        self.n_gold_spans += other.n_gold_spans;
        self.n_pred_spans += other.n_pred_spans;
        self.n_correct_spans += other.n_correct_spans;
    }

    /// Queries whose whole slot sequence matched.
    pub fn n_slot_seq_correct(&self) -> usize {
        self.n_slot_seq_correct
    }

    pub fn summary(&self) -> MetricsSummary {
        let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision = frac(self.n_correct_spans, self.n_pred_spans);
        let recall = frac(self.n_correct_spans, self.n_gold_spans);
        let f1 = if self.n_queries == 0 {
            None
        } else {
            let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
            Some(if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })
        };
        MetricsSummary {
            intent_acc: frac(self.n_intent_correct, self.n_queries),
            slot_precision: precision,
            slot_recall: recall,
            slot_f1: f1,
            joint_acc: frac(self.n_joint_correct, self.n_queries),
            n_queries: self.n_queries,
            n_intent_correct: self.n_intent_correct,
            n_joint_correct: self.n_joint_correct,
            n_gold_spans: self.n_gold_spans,
            n_pred_spans: self.n_pred_spans,
            n_correct_spans: self.n_correct_spans,
        }
    }
}

/// Scores id-level predictions against gold samples of the same label space.
pub fn score(predictions: &[(usize, Vec<usize>)], golds: &[Sample], ls: &LabelSpace) -> Result<MetricsSummary> {
    if predictions.len() != golds.len() {
        return Err(Error::LengthMismatch {
            path: "predictions".into(),
            tokens: golds.len(),
            slots: predictions.len(),
        });
    }
    let mut acc = MetricsAccumulator::new();
    for ((pi, ps), g) in predictions.iter().zip(golds) {
        let pred: Vec<&str> = ps.iter().map(|&o| ls.slot_name(o)).collect();
        let gold: Vec<&str> = g.slots.iter().map(|&o| ls.slot_name(o)).collect();
        acc.add(ls.intent_name(*pi), &pred, ls.intent_name(g.intent), &gold);
    }
    Ok(acc.summary())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn ls() -> LabelSpace {
        LabelSpace::new(
            vec!["a".into(), "b".into()],
            vec!["O".into(), "B-city".into(), "I-city".into(), "B-x".into(), "I-x".into()],
        )
        .unwrap()
    }

    fn gold(intent: usize, slots: &[usize]) -> Sample {
        Sample {
            tokens: vec!["w".into(); slots.len()],
            intent,
            slots: slots.to_vec(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let g = vec![gold(0, &[1, 2, 0]), gold(1, &[3, 0])];
        let p: Vec<_> = g.iter().map(|s| (s.intent, s.slots.clone())).collect();
        let m = score(&p, &g, &ls()).unwrap();
        assert_eq!(
            (m.intent_acc, m.slot_f1, m.joint_acc),
            (Some(1.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn boundary_must_match_exactly() {
        let m = score(&[(0, vec![1, 0, 0])], &[gold(0, &[1, 2, 0])], &ls()).unwrap();
        assert_eq!(m.n_correct_spans, 0);
        assert_eq!(
            (m.slot_precision, m.slot_recall, m.slot_f1),
            (Some(0.0), Some(0.0), Some(0.0))
        );
    }

    #[test]
    fn one_wrong_sequence_halves_joint() {
        let g = vec![gold(0, &[1, 0]), gold(1, &[3, 0])];
        let p = vec![(0, vec![1, 0]), (1, vec![0, 0])];
        let m = score(&p, &g, &ls()).unwrap();
        assert_eq!(m.intent_acc, Some(1.0));
        assert_eq!(m.joint_acc, Some(0.5));
    }

    #[test]
    fn empty_is_null() {
        let m = score(&[], &[], &ls()).unwrap();
        assert_eq!(m.n_queries, 0);
        assert!(m.intent_acc.is_none() && m.slot_f1.is_none() && m.joint_acc.is_none());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            score(&[(0, vec![0])], &[], &ls()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn permutation_invariant_and_bounded() {
        let mut rng = stream(5, "metrics");
        for _ in 0..50 {
            let n = rng.random_range(1..8);
            let mut pairs: Vec<((usize, Vec<usize>), Sample)> = (0..n)
                .map(|_| {
                    let m = rng.random_range(1..6);
                    let g = gold(
                        rng.random_range(0..2),
                        &(0..m).map(|_| rng.random_range(0..5)).collect::<Vec<_>>(),
                    );
                    let p = (rng.random_range(0..2), (0..m).map(|_| rng.random_range(0..5)).collect());
                    (p, g)
                })
                .collect();
            let (p, g): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let a = score(&p, &g, &ls()).unwrap();
            pairs.shuffle(&mut rng);
            let (p, g): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let b = score(&p, &g, &ls()).unwrap();
            assert_eq!(a, b);
            assert!(a.joint_acc <= a.intent_acc);
            for f in [a.intent_acc, a.slot_f1, a.joint_acc, a.slot_precision, a.slot_recall]
                .into_iter()
                .flatten()
            {
                assert!((0.0..=1.0).contains(&f));
            }
        }
    }
}
