//! Synthetic multi-domain NLU corpora.
//!
//! Slot types come in confusable pairs (`fNNa`, `fNNb`) that share one cue word
//! and, within a domain, one filler vocabulary. Surface tokens therefore
//! identify the slot family but not the member; which member an utterance
//! carries is decided by its intent. Within a domain, intent `l` takes
//! `slots_per_intent` consecutive families (cyclically) with alternating
//! members, so both members of a family occur under different intents; which
//! families a domain uses and which member comes first are drawn per domain.
//!
//! Each family has phrase-initial (head) and continuation (tail) words. Each
//! is partly drawn from a global per-family pool shared across domains
//! (fraction `vocab_overlap`) and partly domain-unique.
//!
//! Every utterance of an intent mentions all of that intent's slots, and the
//! phrase length of a family is fixed within a domain, so any support set that
//! covers an intent also covers all of its intent-slot co-occurrences.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::data::{LabelSpace, Sample};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

const FILLERS_PER_FAMILY: usize = 8;
const SHARED_POOL_PER_FAMILY: usize = 12;
const CARRIERS_PER_INTENT: usize = 1;
const CARRIER_POOL: usize = 40;
const FUNCTION_WORDS: &[&str] = &["please", "the", "a", "me", "now", "for", "some", "my", "to", "with"];
const PHRASE_LENGTHS: &[usize] = &[1, 2, 2, 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_source_domains: usize,
    pub n_dev_domains: usize,
    pub n_target_domains: usize,
    pub intents_per_domain: usize,
    pub slots_per_intent: usize,
    /// Fraction of each domain's slot-filler vocabulary drawn from the shared pool.
    pub vocab_overlap: f64,
    pub template_count: usize,
    pub samples_per_domain: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_source_domains: 8,
            n_dev_domains: 2,
            n_target_domains: 3,
            intents_per_domain: 3,
            slots_per_intent: 2,
            vocab_overlap: 0.7,
            template_count: 3,
            samples_per_domain: 60,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_source_domains", self.n_source_domains),
            ("n_dev_domains", self.n_dev_domains),
            ("n_target_domains", self.n_target_domains),
            ("intents_per_domain", self.intents_per_domain),
            ("slots_per_intent", self.slots_per_intent),
            ("template_count", self.template_count),
            ("samples_per_domain", self.samples_per_domain),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, c)| *c == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if !(0.0..=1.0).contains(&self.vocab_overlap) {
            return Err(Error::InvalidArgument("vocab_overlap must lie in [0, 1]".into()));
        }
        if self.intents_per_domain > CARRIER_POOL / CARRIERS_PER_INTENT {
            return Err(Error::InvalidArgument("too many intents per domain".into()));
        }
        Ok(())
    }

    fn families_per_domain(&self) -> usize {
        self.slots_per_intent + 1
    }

    fn n_families(&self) -> usize {
        3 * self.families_per_domain()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpora {
    pub source: Vec<Corpus>,
    pub dev: Vec<Corpus>,
    pub target: Vec<Corpus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct SlotKind {
    family: usize,
    member: usize,
}

impl SlotKind {
    fn type_name(self) -> String {
        format!("f{:02}{}", self.family, if self.member == 0 { 'a' } else { 'b' })
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Carrier,
    Function(&'static str),
    Cue(usize),
    Filler(usize),
}

struct FamilyPlan {
    family: usize,
    len: usize,
    heads: Vec<String>,
    tails: Vec<String>,
}

struct DomainPlan {
    families: Vec<FamilyPlan>,
    /// Per intent: carrier words and (family index into `families`, member).
    intents: Vec<(Vec<String>, Vec<SlotKind>)>,
}

fn filler_vocab(spec: &SynthSpec, name: &str, family: usize, part: char, rng: &mut Rng) -> Vec<String> {
    let n_shared = (spec.vocab_overlap * FILLERS_PER_FAMILY as f64).round() as usize;
    let mut pool: Vec<usize> = (0..SHARED_POOL_PER_FAMILY).collect();
    pool.shuffle(rng);
    let mut vocab: Vec<String> = pool[..n_shared]
        .iter()
        .map(|k| format!("f{family:02}{part}{k:02}"))
        .collect();
    vocab.extend((n_shared..FILLERS_PER_FAMILY).map(|k| format!("{name}_f{family:02}{part}u{k}")));
    vocab
}

fn plan_domain(spec: &SynthSpec, name: &str, rng: &mut Rng) -> DomainPlan {
    let mut all: Vec<usize> = (0..spec.n_families()).collect();
    all.shuffle(rng);
    let n_fam = spec.families_per_domain();
    let chosen: Vec<usize> = all[..n_fam].to_vec();

    let families = chosen
        .iter()
        .map(|&f| FamilyPlan {
            family: f,
            len: *PHRASE_LENGTHS.choose(rng).expect("non-empty"),
            heads: filler_vocab(spec, name, f, 'h', rng),
            tails: filler_vocab(spec, name, f, 't', rng),
        })
        .collect();

    let flip = rng.random_range(0..2);
    let mut carriers: Vec<usize> = (0..CARRIER_POOL).collect();
    carriers.shuffle(rng);
    let intents = (0..spec.intents_per_domain)
        .map(|l| {
            let mut rel: Vec<SlotKind> = (0..spec.slots_per_intent)
                .map(|j| SlotKind {
                    family: (l + j) % n_fam,
                    member: if l < n_fam {
                        (j + flip) % 2
                    } else {
                        rng.random_range(0..2)
                    },
                })
                .collect();
            rel.sort_unstable();
            let words = carriers[l * CARRIERS_PER_INTENT..(l + 1) * CARRIERS_PER_INTENT]
                .iter()
                .map(|c| format!("v{c:02}"))
                .collect();
            (words, rel)
        })
        .collect();
    DomainPlan { families, intents }
}

fn make_template(slots: &[SlotKind], rng: &mut Rng) -> Vec<Segment> {
    let maybe_function = |out: &mut Vec<Segment>, rng: &mut Rng| {
        if rng.random_bool(0.5) {
            out.push(Segment::Function(FUNCTION_WORDS.choose(rng).expect("non-empty")));
        }
    };
    let mut out = Vec::new();
    maybe_function(&mut out, rng);
    out.push(Segment::Carrier);
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.shuffle(rng);
    for k in order {
        maybe_function(&mut out, rng);
        out.push(Segment::Cue(k));
        out.push(Segment::Filler(k));
    }
    maybe_function(&mut out, rng);
    out
}

fn generate_domain(spec: &SynthSpec, name: &str) -> Result<Corpus> {
    let mut rng = stream(spec.seed, &format!("synth/{name}"));
    let plan = plan_domain(spec, name, &mut rng);

    let mut kinds: BTreeSet<SlotKind> = BTreeSet::new();
    for (_, rel) in &plan.intents {
        kinds.extend(rel.iter().copied());
    }
    let mut slot_labels = vec!["O".to_string()];
    for k in &kinds {
        let fp = &plan.families[k.family];
        let ty = SlotKind {
            family: fp.family,
            member: k.member,
        }
        .type_name();
        slot_labels.push(format!("B-{ty}"));
        if fp.len > 1 {
            slot_labels.push(format!("I-{ty}"));
        }
    }
    let intents: Vec<String> = (0..spec.intents_per_domain)
        .map(|l| format!("{name}_intent{l}"))
        .collect();
    let ls = LabelSpace::new(intents, slot_labels)?;

    let templates: Vec<Vec<Vec<Segment>>> = plan
        .intents
        .iter()
        .map(|(_, rel)| (0..spec.template_count).map(|_| make_template(rel, &mut rng)).collect())
        .collect();

    let mut samples = Vec::with_capacity(spec.samples_per_domain);
    for n in 0..spec.samples_per_domain {
        let intent = n % spec.intents_per_domain;
        let (carriers, rel) = &plan.intents[intent];
        let template = templates[intent].choose(&mut rng).expect("template_count >= 1");
        let mut tokens = Vec::new();
        let mut slots = Vec::new();
        let outside = ls.outside();
        for seg in template {
            match *seg {
                Segment::Carrier => {
                    tokens.push(carriers.choose(&mut rng).expect("non-empty").clone());
                    slots.push(outside);
                }
                Segment::Function(w) => {
                    tokens.push(w.to_string());
                    slots.push(outside);
                }
                Segment::Cue(k) => {
                    tokens.push(format!("c{:02}", plan.families[rel[k].family].family));
                    slots.push(outside);
                }
                Segment::Filler(k) => {
                    let fp = &plan.families[rel[k].family];
                    let ty = SlotKind {
                        family: fp.family,
                        member: rel[k].member,
                    }
                    .type_name();
                    for p in 0..fp.len {
                        let vocab = if p == 0 { &fp.heads } else { &fp.tails };
                        tokens.push(vocab.choose(&mut rng).expect("non-empty").clone());
                        let label = if p == 0 { format!("B-{ty}") } else { format!("I-{ty}") };
                        slots.push(ls.slot_id(&label).expect("label registered above"));
                    }
                }
            }
        }
        samples.push(Sample { tokens, intent, slots });
    }
    Ok(Corpus {
        domain: name.to_string(),
        samples,
        label_space: ls,
    })
}

/// Source, dev and target corpora; a pure function of `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCorpora> {
    spec.validate()?;
    let split = |prefix: &str, n: usize| {
        (0..n)
            .map(|i| generate_domain(spec, &format!("{prefix}{i:02}")))
            .collect::<Result<Vec<_>>>()
    };
    Ok(SynthCorpora {
        source: split("src", spec.n_source_domains)?,
        dev: split("dev", spec.n_dev_domains)?,
        target: split("tgt", spec.n_target_domains)?,
    })
}
