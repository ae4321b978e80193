use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub const OUTSIDE: &str = "O";

/// A parsed BIO slot label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SlotTag {
    Outside,
    Begin(String),
    Inside(String),
}

impl SlotTag {
    pub fn parse(name: &str) -> Result<SlotTag> {
        if name == OUTSIDE {
            return Ok(SlotTag::Outside);
        }
        let (prefix, ty) = name
            .split_once('-')
            .ok_or_else(|| Error::MalformedLabel(name.to_string()))?;
        if ty.is_empty() {
            return Err(Error::MalformedLabel(name.to_string()));
        }
        match prefix {
            "B" => Ok(SlotTag::Begin(ty.to_string())),
            "I" => Ok(SlotTag::Inside(ty.to_string())),
            _ => Err(Error::MalformedLabel(name.to_string())),
        }
    }

    pub fn slot_type(&self) -> Option<&str> {
        match self {
            SlotTag::Outside => None,
            SlotTag::Begin(t) | SlotTag::Inside(t) => Some(t),
        }
    }

    pub fn is_inside(&self) -> bool {
        matches!(self, SlotTag::Inside(_))
    }

    /// Whether `next` may directly follow `self` under BIO.
    pub fn allows_next(&self, next: &SlotTag) -> bool {
        match next {
            SlotTag::Outside | SlotTag::Begin(_) => true,
            SlotTag::Inside(ty) => match self {
                SlotTag::Begin(prev) | SlotTag::Inside(prev) => prev == ty,
                SlotTag::Outside => false,
            },
        }
    }

    /// Whether a sequence may open with this tag.
    pub fn allows_start(&self) -> bool {
        !self.is_inside()
    }
}

impl fmt::Display for SlotTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotTag::Outside => f.write_str(OUTSIDE),
            SlotTag::Begin(t) => write!(f, "B-{t}"),
            SlotTag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

/// Ordered intent and slot label inventories; a label's position is its id.
#[derive(Debug, Clone)]
pub struct LabelSpace {
    intents: Vec<String>,
    slot_labels: Vec<String>,
    tags: Vec<SlotTag>,
    intent_index: HashMap<String, usize>,
    slot_index: HashMap<String, usize>,
    outside: usize,
}

impl PartialEq for LabelSpace {
    fn eq(&self, other: &Self) -> bool {
        self.intents == other.intents && self.slot_labels == other.slot_labels
    }
}

impl LabelSpace {
    pub fn new(intents: Vec<String>, slot_labels: Vec<String>) -> Result<LabelSpace> {
        let invalid = |message: String| Error::MalformedInput {
            path: "label_space".into(),
            message,
        };
        if intents.is_empty() {
            return Err(invalid("no intent labels".into()));
        }
        if slot_labels.is_empty() {
            return Err(invalid("no slot labels".into()));
        }
        let mut intent_index = HashMap::with_capacity(intents.len());
        for (i, name) in intents.iter().enumerate() {
            if intent_index.insert(name.clone(), i).is_some() {
                return Err(invalid(format!("duplicate intent {name:?}")));
            }
        }
        let mut slot_index = HashMap::with_capacity(slot_labels.len());
        let mut tags = Vec::with_capacity(slot_labels.len());
        for (i, name) in slot_labels.iter().enumerate() {
            tags.push(SlotTag::parse(name)?);
            if slot_index.insert(name.clone(), i).is_some() {
                return Err(invalid(format!("duplicate slot label {name:?}")));
            }
        }
        let outside = *slot_index
            .get(OUTSIDE)
            .ok_or_else(|| invalid("slot label \"O\" is missing".into()))?;
        Ok(LabelSpace {
            intents,
            slot_labels,
            tags,
            intent_index,
            slot_index,
            outside,
        })
    }

    pub fn n_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn n_slots(&self) -> usize {
        self.slot_labels.len()
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn slot_labels(&self) -> &[String] {
        &self.slot_labels
    }

    pub fn tags(&self) -> &[SlotTag] {
        &self.tags
    }

    pub fn tag(&self, slot: usize) -> &SlotTag {
        &self.tags[slot]
    }

    pub fn intent_name(&self, id: usize) -> &str {
        &self.intents[id]
    }

    pub fn slot_name(&self, id: usize) -> &str {
        &self.slot_labels[id]
    }

    pub fn intent_id(&self, name: &str) -> Option<usize> {
        self.intent_index.get(name).copied()
    }

    pub fn slot_id(&self, name: &str) -> Option<usize> {
        self.slot_index.get(name).copied()
    }

    /// Id of the `O` label.
    pub fn outside(&self) -> usize {
        self.outside
    }
}
