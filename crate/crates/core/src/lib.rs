//! Few-shot joint intent classification and slot filling.
//!
//! Prototype-based emissions are combined with two support-derived masks, an
//! intent-slot relation mask and a BIO transition mask, in a joint lattice over
//! (intent, slot sequence) pairs. The lattice gives an exact joint probability,
//! a single cross-entropy training loss and joint Viterbi decoding.

pub mod cli;
pub mod data;
pub mod encoder;
pub mod episodes;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod masks;
pub mod metrics;
pub mod oracle;
pub mod protonet;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
