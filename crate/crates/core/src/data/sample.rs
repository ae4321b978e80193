use serde::{Deserialize, Serialize};

use super::labels::{LabelSpace, SlotTag};

/// A tokenized utterance with its intent id and one slot id per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub tokens: Vec<String>,
    pub intent: usize,
    pub slots: Vec<usize>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn to_raw(&self, ls: &LabelSpace) -> RawSample {
        RawSample {
            tokens: self.tokens.clone(),
            intent: ls.intent_name(self.intent).to_string(),
            slots: self.slots.iter().map(|&o| ls.slot_name(o).to_string()).collect(),
        }
    }
}

/// A sample with labels kept as strings, as it appears on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSample {
    pub tokens: Vec<String>,
    pub intent: String,
    pub slots: Vec<String>,
}

impl RawSample {
    /// Resolves labels against `ls`; `None` if any label is outside it.
    pub fn resolve(&self, ls: &LabelSpace) -> Option<Sample> {
        let intent = ls.intent_id(&self.intent)?;
        let slots = self.slots.iter().map(|s| ls.slot_id(s)).collect::<Option<Vec<_>>>()?;
        Some(Sample {
            tokens: self.tokens.clone(),
            intent,
            slots,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyUtterance,
    LengthMismatch { tokens: usize, slots: usize },
    UnknownIntent { intent: usize },
    UnknownSlot { position: usize, slot: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptyUtterance => f.write_str("empty utterance"),
            Violation::LengthMismatch { tokens, slots } => {
                write!(f, "length mismatch: {tokens} tokens, {slots} slots")
            }
            Violation::UnknownIntent { intent } => write!(f, "unknown intent {intent}"),
            Violation::UnknownSlot { position, slot } => {
                write!(f, "unknown slot {slot} at position {position}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// BIO irregularities in gold annotation. Reported, never fatal.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_sample(s: &Sample, ls: &LabelSpace) -> ValidationReport {
    let mut report = ValidationReport::default();
    if s.tokens.is_empty() {
        report.violations.push(Violation::EmptyUtterance);
    }
    if s.tokens.len() != s.slots.len() {
        report.violations.push(Violation::LengthMismatch {
            tokens: s.tokens.len(),
            slots: s.slots.len(),
        });
    }
    if s.intent >= ls.n_intents() {
        report.violations.push(Violation::UnknownIntent { intent: s.intent });
    }
    let mut prev: Option<&SlotTag> = None;
    for (position, &slot) in s.slots.iter().enumerate() {
        if slot >= ls.n_slots() {
            report.violations.push(Violation::UnknownSlot { position, slot });
            prev = None;
            continue;
        }
        let tag = ls.tag(slot);
        let legal = match prev {
            None => tag.allows_start(),
            Some(p) => p.allows_next(tag),
        };
        if !legal {
            report
                .warnings
                .push(format!("BIO: {tag} cannot appear at position {position}"));
        }
        prev = Some(tag);
    }
    report
}
