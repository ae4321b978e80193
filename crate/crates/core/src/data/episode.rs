use std::collections::BTreeSet;

use super::labels::LabelSpace;
use super::sample::{RawSample, Sample};

/// Support and query sets with the label space derived from the support set.
///
/// Query samples whose gold labels fall outside that label space cannot be
/// represented by ids. They are kept in `unresolved` together with their
/// position in the original query list, and score as errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub domain: String,
    pub label_space: LabelSpace,
    pub support: Vec<Sample>,
    pub query: Vec<Sample>,
    pub unresolved: Vec<(usize, RawSample)>,
}

impl Episode {
    pub fn n_queries(&self) -> usize {
        self.query.len() + self.unresolved.len()
    }

    /// Query samples in original order, labels as strings.
    pub fn raw_queries(&self) -> Vec<RawSample> {
        let mut out = Vec::with_capacity(self.n_queries());
        let mut resolved = self.query.iter();
        let mut unresolved = self.unresolved.iter().peekable();
        for pos in 0..self.n_queries() {
            match unresolved.peek() {
                Some((p, raw)) if *p == pos => {
                    out.push(raw.clone());
                    unresolved.next();
                }
                _ => {
                    let s = resolved.next().expect("query bookkeeping out of sync");
                    out.push(s.to_raw(&self.label_space));
                }
            }
        }
        out
    }
}

/// Labels of `label_space` that occur in `samples`, kept in label-space order.
pub(crate) fn used_labels(samples: &[Sample], label_space: &LabelSpace) -> (Vec<String>, Vec<String>) {
    let intents: BTreeSet<usize> = samples.iter().map(|s| s.intent).collect();
    let slots: BTreeSet<usize> = samples.iter().flat_map(|s| s.slots.iter().copied()).collect();
    (
        intents
            .into_iter()
            .map(|i| label_space.intent_name(i).to_string())
            .collect(),
        slots
            .into_iter()
            .map(|o| label_space.slot_name(o).to_string())
            .collect(),
    )
}
