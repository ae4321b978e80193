//! Samples, label spaces, episodes, span extraction and file I/O.

mod episode;
mod io;
mod labels;
mod sample;
mod spans;

pub(crate) use episode::used_labels;
pub use episode::Episode;
pub use io::{parse_corpus_file, parse_episode_file, serialize_corpora, serialize_episode, serialize_episodes};
pub use labels::{LabelSpace, SlotTag, OUTSIDE};
pub use sample::{validate_sample, RawSample, Sample, ValidationReport, Violation};
pub use spans::{bio_spans, spans_from_names, spans_from_tags, SlotSpan};
