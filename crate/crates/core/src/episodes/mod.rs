//! K-shot support construction (Mini-Including), episode assembly and the
//! synthetic multi-domain corpus generator.

mod synth;

use rand::seq::SliceRandom;

use crate::data::{used_labels, Episode, LabelSpace, Sample};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub use synth::{generate_synthetic, SynthCorpora, SynthSpec};

/// All labeled samples of one domain under the domain-global label space.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub domain: String,
    pub samples: Vec<Sample>,
    pub label_space: LabelSpace,
}

/// Per-class occurrence counts: samples per intent, labeled words per slot.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Coverage {
    intents: Vec<usize>,
    slots: Vec<usize>,
}

impl Coverage {
    fn empty(ls: &LabelSpace) -> Self {
        Coverage {
            intents: vec![0; ls.n_intents()],
            slots: vec![0; ls.n_slots()],
        }
    }

    fn add(&mut self, s: &Sample) {
        self.intents[s.intent] += 1;
        for &o in &s.slots {
            self.slots[o] += 1;
        }
    }

    fn remove(&mut self, s: &Sample) {
        self.intents[s.intent] -= 1;
        for &o in &s.slots {
            self.slots[o] -= 1;
        }
    }

    fn satisfies(&self, k: usize) -> bool {
        self.intents.iter().chain(&self.slots).all(|&c| c >= k)
    }

    /// Whether `s` raises any class still below `k`.
    fn helps(&self, s: &Sample, k: usize) -> bool {
        self.intents[s.intent] < k || s.slots.iter().any(|&o| self.slots[o] < k)
    }

    /// Whether removing `s` keeps every class at or above `k`.
    fn can_drop(&self, s: &Sample, k: usize) -> bool {
        if self.intents[s.intent] < k + 1 {
            return false;
        }
        let mut removed = vec![0usize; self.slots.len()];
        for &o in &s.slots {
            removed[o] += 1;
        }
        removed.iter().zip(&self.slots).all(|(&r, &c)| r == 0 || c >= k + r)
    }
}

/// Whether `samples` give every class of `ls` at least `k` occurrences.
pub fn satisfies_k_coverage(samples: &[&Sample], ls: &LabelSpace, k: usize) -> bool {
    let mut cov = Coverage::empty(ls);
    samples.iter().for_each(|s| cov.add(s));
    cov.satisfies(k)
}

/// Indices (into `corpus.samples`) of a Mini-Including K-shot support set.
///
/// Every intent gets at least `k` samples and every slot label at least `k`
/// labeled words; no selected sample can be dropped without breaking that.
pub fn select_support(corpus: &Corpus, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let ls = &corpus.label_space;
    let mut total = Coverage::empty(ls);
    corpus.samples.iter().for_each(|s| total.add(s));
    for (l, &c) in total.intents.iter().enumerate() {
        if c < k {
            return Err(Error::InsufficientCorpus(format!(
                "intent {:?} has {c} samples, needs {k}",
                ls.intent_name(l)
            )));
        }
    }
    for (o, &c) in total.slots.iter().enumerate() {
        if c < k {
            return Err(Error::InsufficientCorpus(format!(
                "slot label {:?} has {c} labeled words, needs {k}",
                ls.slot_name(o)
            )));
        }
    }

    let mut order: Vec<usize> = (0..corpus.samples.len()).collect();
    order.shuffle(rng);
    let mut cov = Coverage::empty(ls);
    let mut chosen = Vec::new();
    for &i in &order {
        if cov.satisfies(k) {
            break;
        }
        let s = &corpus.samples[i];
        if cov.helps(s, k) {
            cov.add(s);
            chosen.push(i);
        }
    }
    debug_assert!(cov.satisfies(k));

    let mut prune = chosen.clone();
    prune.shuffle(rng);
    for i in prune {
        let s = &corpus.samples[i];
        if cov.can_drop(s, k) {
            cov.remove(s);
            chosen.retain(|&c| c != i);
        }
    }
    Ok(chosen)
}

pub fn build_support_set(corpus: &Corpus, k: usize, rng: &mut Rng) -> Result<Vec<Sample>> {
    Ok(select_support(corpus, k, rng)?
        .into_iter()
        .map(|i| corpus.samples[i].clone())
        .collect())
}

pub fn build_episode(corpus: &Corpus, k: usize, query_size: usize, rng: &mut Rng) -> Result<Episode> {
    if query_size == 0 {
        return Err(Error::InvalidArgument("query size must be positive".into()));
    }
    let support_idx = select_support(corpus, k, rng)?;
    let mut rest: Vec<usize> = (0..corpus.samples.len()).filter(|i| !support_idx.contains(i)).collect();
    if rest.len() < query_size {
        return Err(Error::InsufficientCorpus(format!(
            "domain {:?}: {} samples left after support, query needs {query_size}",
            corpus.domain,
            rest.len()
        )));
    }
    rest.shuffle(rng);
    rest.truncate(query_size);

    let global = &corpus.label_space;
    let support_global: Vec<Sample> = support_idx.iter().map(|&i| corpus.samples[i].clone()).collect();
    let (intents, slots) = used_labels(&support_global, global);
    let local = LabelSpace::new(intents, slots)?;
    let support = support_global
        .iter()
        .map(|s| {
            s.to_raw(global)
                .resolve(&local)
                .expect("support labels define the local space")
        })
        .collect();
    let mut query = Vec::new();
    let mut unresolved = Vec::new();
    for (pos, &i) in rest.iter().enumerate() {
        let raw = corpus.samples[i].to_raw(global);
        match raw.resolve(&local) {
            Some(s) => query.push(s),
            None => unresolved.push((pos, raw)),
        }
    }
    Ok(Episode {
        domain: corpus.domain.clone(),
        label_space: local,
        support,
        query,
        unresolved,
    })
}

/// `count` episodes from one corpus, each on its own rng stream.
pub fn build_episodes(corpus: &Corpus, k: usize, query_size: usize, count: usize, seed: u64) -> Result<Vec<Episode>> {
    (0..count)
        .map(|n| {
            let mut rng = crate::rng::stream(seed, &format!("episode/{}/{n}", corpus.domain));
            build_episode(corpus, k, query_size, &mut rng)
        })
        .collect()
}
