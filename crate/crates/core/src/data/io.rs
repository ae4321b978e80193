//! Episode and corpus JSON files.
//!
//! Episode file:
//!
//! ```json
//! { "episodes": [ { "domain": "...", "intents": ["..."], "slot_labels": ["O", "B-x"],
//!     "support": [ {"tokens": ["..."], "intent": "...", "slots": ["..."]} ],
//!     "query":   [ {"tokens": ["..."], "intent": "...", "slots": ["..."]} ] } ] }
//! ```
//!
//! Corpus file: same per-domain header, with a single `samples` array in place
//! of `support`/`query`, under a top-level `corpora` key.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::episode::Episode;
use super::labels::{LabelSpace, SlotTag};
use super::sample::{RawSample, Sample};
use crate::episodes::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeFile {
    episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeRecord {
    domain: String,
    intents: Vec<String>,
    slot_labels: Vec<String>,
    support: Vec<RawSample>,
    query: Vec<RawSample>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    corpora: Vec<CorpusRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusRecord {
    domain: String,
    intents: Vec<String>,
    slot_labels: Vec<String>,
    samples: Vec<RawSample>,
}

fn malformed(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::MalformedInput {
        path: path.into(),
        message: message.into(),
    }
}

fn label_space_at(path: &str, intents: Vec<String>, slots: Vec<String>) -> Result<LabelSpace> {
    LabelSpace::new(intents, slots).map_err(|e| match e {
        Error::MalformedInput { message, .. } => malformed(format!("{path}.label_space"), message),
        Error::MalformedLabel(label) => malformed(
            format!("{path}.slot_labels"),
            format!("{label:?} does not match the B-/I-/O grammar"),
        ),
        other => other,
    })
}

/// Shape checks shared by every sample: non-empty, aligned, grammatical labels.
fn check_shape(path: &str, raw: &RawSample) -> Result<()> {
    if raw.tokens.is_empty() {
        return Err(malformed(format!("{path}.tokens"), "utterance has no tokens"));
    }
    if raw.tokens.len() != raw.slots.len() {
        return Err(Error::LengthMismatch {
            path: path.to_string(),
            tokens: raw.tokens.len(),
            slots: raw.slots.len(),
        });
    }
    for (i, s) in raw.slots.iter().enumerate() {
        if SlotTag::parse(s).is_err() {
            return Err(malformed(
                format!("{path}.slots[{i}]"),
                format!("{s:?} does not match the B-/I-/O grammar"),
            ));
        }
    }
    Ok(())
}

fn resolve_strict(path: &str, raw: &RawSample, ls: &LabelSpace) -> Result<Sample> {
    check_shape(path, raw)?;
    let intent = ls.intent_id(&raw.intent).ok_or_else(|| Error::LabelMismatch {
        path: format!("{path}.intent"),
        label: raw.intent.clone(),
    })?;
    let slots = raw
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            ls.slot_id(s).ok_or_else(|| Error::LabelMismatch {
                path: format!("{path}.slots[{i}]"),
                label: s.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sample {
        tokens: raw.tokens.clone(),
        intent,
        slots,
    })
}

fn episode_from_record(path: &str, rec: EpisodeRecord) -> Result<Episode> {
    let ls = label_space_at(path, rec.intents, rec.slot_labels)?;
    if rec.support.is_empty() {
        return Err(malformed(format!("{path}.support"), "support set is empty"));
    }
    let support = rec
        .support
        .iter()
        .enumerate()
        .map(|(i, raw)| resolve_strict(&format!("{path}.support[{i}]"), raw, &ls))
        .collect::<Result<Vec<_>>>()?;

    let seen_intents: HashSet<usize> = support.iter().map(|s| s.intent).collect();
    let seen_slots: HashSet<usize> = support.iter().flat_map(|s| s.slots.iter().copied()).collect();
    if let Some(l) = (0..ls.n_intents()).find(|l| !seen_intents.contains(l)) {
        return Err(malformed(
            format!("{path}.intents"),
            format!("intent {:?} does not occur in the support set", ls.intent_name(l)),
        ));
    }
    if let Some(o) = (0..ls.n_slots()).find(|o| !seen_slots.contains(o)) {
        return Err(malformed(
            format!("{path}.slot_labels"),
            format!("slot label {:?} does not occur in the support set", ls.slot_name(o)),
        ));
    }

    let mut query = Vec::new();
    let mut unresolved = Vec::new();
    for (i, raw) in rec.query.into_iter().enumerate() {
        check_shape(&format!("{path}.query[{i}]"), &raw)?;
        match raw.resolve(&ls) {
            Some(s) => query.push(s),
            None => {
                log::warn!("{path}.query[{i}] has labels outside the support label space");
                unresolved.push((i, raw));
            }
        }
    }

    Ok(Episode {
        domain: rec.domain,
        label_space: ls,
        support,
        query,
        unresolved,
    })
}

pub fn parse_episode_file(text: &str) -> Result<Vec<Episode>> {
    let file: EpisodeFile = serde_json::from_str(text).map_err(|e| malformed("$", e.to_string()))?;
    file.episodes
        .into_iter()
        .enumerate()
        .map(|(i, rec)| episode_from_record(&format!("episodes[{i}]"), rec))
        .collect()
}

fn episode_record(ep: &Episode) -> EpisodeRecord {
    let ls = &ep.label_space;
    EpisodeRecord {
        domain: ep.domain.clone(),
        intents: ls.intents().to_vec(),
        slot_labels: ls.slot_labels().to_vec(),
        support: ep.support.iter().map(|s| s.to_raw(ls)).collect(),
        query: ep.raw_queries(),
    }
}

pub fn serialize_episode(ep: &Episode) -> String {
    serialize_episodes(std::slice::from_ref(ep))
}

pub fn serialize_episodes(episodes: &[Episode]) -> String {
    let file = EpisodeFile {
        episodes: episodes.iter().map(episode_record).collect(),
    };
    serde_json::to_string_pretty(&file).expect("episode records always serialize")
}

pub fn parse_corpus_file(text: &str) -> Result<Vec<Corpus>> {
    let file: CorpusFile = serde_json::from_str(text).map_err(|e| malformed("$", e.to_string()))?;
    file.corpora
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            let path = format!("corpora[{i}]");
            let ls = label_space_at(&path, rec.intents, rec.slot_labels)?;
            let samples = rec
                .samples
                .iter()
                .enumerate()
                .map(|(j, raw)| resolve_strict(&format!("{path}.samples[{j}]"), raw, &ls))
                .collect::<Result<Vec<_>>>()?;
            Ok(Corpus {
                domain: rec.domain,
                samples,
                label_space: ls,
            })
        })
        .collect()
}

pub fn serialize_corpora(corpora: &[Corpus]) -> String {
    let file = CorpusFile {
        corpora: corpora
            .iter()
            .map(|c| CorpusRecord {
                domain: c.domain.clone(),
                intents: c.label_space.intents().to_vec(),
                slot_labels: c.label_space.slot_labels().to_vec(),
                samples: c.samples.iter().map(|s| s.to_raw(&c.label_space)).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("corpus records always serialize")
}
