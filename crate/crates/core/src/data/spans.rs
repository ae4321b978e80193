use serde::Serialize;

use super::labels::{LabelSpace, SlotTag};

/// A typed slot phrase covering tokens `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SlotSpan {
    pub slot_type: String,
    pub start: usize,
    pub end: usize,
}

/// Extracts spans with conlleval semantics.
///
/// A span opens at every `B-X`, and at an `I-X` whose predecessor is not
/// `B-X`/`I-X` of the same type. `O`, any `B-`, or a type change closes the
/// open span.
pub fn spans_from_tags<'a, I>(tags: I) -> Vec<SlotSpan>
where
    I: IntoIterator<Item = &'a SlotTag>,
{
    let mut spans = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    let mut len = 0;
    for (i, tag) in tags.into_iter().enumerate() {
        len = i + 1;
        let continues = match (tag, open) {
            (SlotTag::Inside(ty), Some((open_ty, _))) => ty == open_ty,
            _ => false,
        };
        if continues {
            continue;
        }
        if let Some((ty, start)) = open.take() {
            spans.push(SlotSpan {
                slot_type: ty.to_string(),
                start,
                end: i,
            });
        }
        open = tag.slot_type().map(|ty| (ty, i));
    }
    if let Some((ty, start)) = open {
        spans.push(SlotSpan {
            slot_type: ty.to_string(),
            start,
            end: len,
        });
    }
    spans
}

pub fn bio_spans(slots: &[usize], ls: &LabelSpace) -> Vec<SlotSpan> {
    spans_from_tags(slots.iter().map(|&o| ls.tag(o)))
}

/// Span extraction over label strings. Names outside the BIO grammar read as `O`.
pub fn spans_from_names<S: AsRef<str>>(names: &[S]) -> Vec<SlotSpan> {
    let tags: Vec<SlotTag> = names
        .iter()
        .map(|n| SlotTag::parse(n.as_ref()).unwrap_or(SlotTag::Outside))
        .collect();
    spans_from_tags(&tags)
}
