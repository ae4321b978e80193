//! Class prototypes and similarity-based emission scores.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{LabelSpace, Sample};
use crate::encoder::{utterance_from_rows, Encoder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Cos,
    L2,
    Vpb,
}

impl Similarity {
    pub const ALL: [Similarity; 3] = [Similarity::Cos, Similarity::L2, Similarity::Vpb];

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Cos => "cos",
            Similarity::L2 => "l2",
            Similarity::Vpb => "vpb",
        }
    }
}

impl std::str::FromStr for Similarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cos" => Ok(Similarity::Cos),
            "l2" => Ok(Similarity::L2),
            "vpb" => Ok(Similarity::Vpb),
            other => Err(Error::InvalidArgument(format!("unknown similarity {other:?}"))),
        }
    }
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Higher is more similar.
///
/// * `Cos`: `e·C / (‖e‖‖C‖)`
/// * `L2`: `−‖e − C‖²`
/// * `Vpb`: `e·C/‖C‖ − ‖C‖/2`
pub fn similarity(e: ArrayView1<f64>, c: ArrayView1<f64>, kind: Similarity) -> Result<f64> {
    match kind {
        Similarity::Cos => {
            let (ne, nc) = (norm(e), norm(c));
            if ne == 0.0 || nc == 0.0 {
                return Err(Error::DegenerateVector("cos"));
            }
            Ok(e.dot(&c) / (ne * nc))
        }
        Similarity::L2 => {
            let diff = &e - &c;
            Ok(-diff.dot(&diff))
        }
        Similarity::Vpb => {
            let nc = norm(c);
            if nc == 0.0 {
                return Err(Error::DegenerateVector("vpb"));
            }
            Ok(e.dot(&c) / nc - nc / 2.0)
        }
    }
}

/// Partial derivatives of [`similarity`] with respect to `e` and `c`.
pub fn similarity_grad(e: ArrayView1<f64>, c: ArrayView1<f64>, kind: Similarity) -> Result<(Array1<f64>, Array1<f64>)> {
    match kind {
        Similarity::Cos => {
            let (ne, nc) = (norm(e), norm(c));
            if ne == 0.0 || nc == 0.0 {
                return Err(Error::DegenerateVector("cos"));
            }
            let s = e.dot(&c) / (ne * nc);
            let de = &c / (ne * nc) - &e * (s / (ne * ne));
            let dc = &e / (ne * nc) - &c * (s / (nc * nc));
            Ok((de, dc))
        }
        Similarity::L2 => {
            let diff = &e - &c;
            Ok((&diff * -2.0, &diff * 2.0))
        }
        Similarity::Vpb => {
            let nc = norm(c);
            if nc == 0.0 {
                return Err(Error::DegenerateVector("vpb"));
            }
            let de = &c / nc;
            let ec = e.dot(&c);
            let dc = &e / nc - &c * (ec / nc.powi(3)) - &c / (2.0 * nc);
            Ok((de, dc))
        }
    }
}

/// Token rows and utterance vector of one encoded sample.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub rows: Array2<f64>,
    pub utterance: Array1<f64>,
}

impl Encoded {
    pub fn new<S: AsRef<str>>(encoder: &Encoder, tokens: &[S]) -> Encoded {
        let rows = encoder.encode_tokens(tokens);
        let utterance = utterance_from_rows(&rows);
        Encoded { rows, utterance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    /// `Y × d`, row `l` is the intent prototype.
    pub intent: Array2<f64>,
    /// `T × d`, row `o` is the slot-label prototype.
    pub slot: Array2<f64>,
    pub intent_counts: Vec<usize>,
    pub slot_counts: Vec<usize>,
}

/// Prototypes from already encoded support samples (aligned with `support`).
pub fn prototypes_from_encoded(support: &[Sample], encoded: &[Encoded], ls: &LabelSpace) -> Prototypes {
    assert!(!support.is_empty(), "support set is empty");
    let d = encoded[0].utterance.len();
    let (y, t) = (ls.n_intents(), ls.n_slots());
    let mut intent = Array2::zeros((y, d));
    let mut slot = Array2::zeros((t, d));
    let mut intent_counts = vec![0usize; y];
    let mut slot_counts = vec![0usize; t];
    for (s, enc) in support.iter().zip(encoded) {
        intent.row_mut(s.intent).scaled_add(1.0, &enc.utterance);
        intent_counts[s.intent] += 1;
        for (i, &o) in s.slots.iter().enumerate() {
            slot.row_mut(o).scaled_add(1.0, &enc.rows.row(i));
            slot_counts[o] += 1;
        }
    }
    for (mut row, &n) in intent.rows_mut().into_iter().zip(&intent_counts) {
        if n > 0 {
            row /= n as f64;
        }
    }
    for (mut row, &n) in slot.rows_mut().into_iter().zip(&slot_counts) {
        if n > 0 {
            row /= n as f64;
        }
    }
    Prototypes {
        intent,
        slot,
        intent_counts,
        slot_counts,
    }
}

pub fn compute_prototypes(support: &[Sample], ls: &LabelSpace, encoder: &Encoder) -> Prototypes {
    let encoded: Vec<Encoded> = support.iter().map(|s| Encoded::new(encoder, &s.tokens)).collect();
    prototypes_from_encoded(support, &encoded, ls)
}

/// Emission scores of one query: `intent` has length Y, `slot` is `m × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Emissions {
    pub intent: Array1<f64>,
    pub slot: Array2<f64>,
}

pub fn emissions_from_encoded(query: &Encoded, protos: &Prototypes, kind: Similarity) -> Result<Emissions> {
    let y = protos.intent.nrows();
    let t = protos.slot.nrows();
    let m = query.rows.nrows();
    let mut intent = Array1::zeros(y);
    for l in 0..y {
        intent[l] = similarity(query.utterance.view(), protos.intent.row(l), kind)?;
    }
    let mut slot = Array2::zeros((m, t));
    for i in 0..m {
        for o in 0..t {
            slot[[i, o]] = similarity(query.rows.row(i), protos.slot.row(o), kind)?;
        }
    }
    Ok(Emissions { intent, slot })
}

pub fn compute_emissions(
    query: &Sample,
    protos: &Prototypes,
    encoder: &Encoder,
    kind: Similarity,
) -> Result<Emissions> {
    emissions_from_encoded(&Encoded::new(encoder, &query.tokens), protos, kind)
}

/// Gradients of a scalar loss with respect to everything emissions depend on.
#[derive(Debug, Clone)]
pub struct EmissionGrads {
    pub query_rows: Array2<f64>,
    pub query_utterance: Array1<f64>,
    pub intent_protos: Array2<f64>,
    pub slot_protos: Array2<f64>,
}

/// Back-propagates `d_intent` (len Y) and `d_slot` (`m × T`) through the similarities.
pub fn emissions_backward(
    query: &Encoded,
    protos: &Prototypes,
    kind: Similarity,
    d_intent: ArrayView1<f64>,
    d_slot: &Array2<f64>,
) -> Result<EmissionGrads> {
    let mut g = EmissionGrads {
        query_rows: Array2::zeros(query.rows.raw_dim()),
        query_utterance: Array1::zeros(query.utterance.raw_dim()),
        intent_protos: Array2::zeros(protos.intent.raw_dim()),
        slot_protos: Array2::zeros(protos.slot.raw_dim()),
    };
    for (l, &up) in d_intent.iter().enumerate() {
        if up == 0.0 {
            continue;
        }
        let (de, dc) = similarity_grad(query.utterance.view(), protos.intent.row(l), kind)?;
        g.query_utterance.scaled_add(up, &de);
        g.intent_protos.row_mut(l).scaled_add(up, &dc);
    }
    for ((i, o), &up) in d_slot.indexed_iter() {
        if up == 0.0 {
            continue;
        }
        let (de, dc) = similarity_grad(query.rows.row(i), protos.slot.row(o), kind)?;
        g.query_rows.row_mut(i).scaled_add(up, &de);
        g.slot_protos.row_mut(o).scaled_add(up, &dc);
    }
    Ok(g)
}

/// Distributes prototype gradients back onto the support encodings.
/// Returns per-sample `(row grads, utterance grad)`.
pub fn prototypes_backward(
    support: &[Sample],
    protos: &Prototypes,
    d_intent_protos: &Array2<f64>,
    d_slot_protos: &Array2<f64>,
) -> Vec<(Array2<f64>, Array1<f64>)> {
    let d = d_intent_protos.ncols();
    support
        .iter()
        .map(|s| {
            let n_l = protos.intent_counts[s.intent] as f64;
            let utt = d_intent_protos.row(s.intent).to_owned() / n_l;
            let mut rows = Array2::zeros((s.len(), d));
            for (i, &o) in s.slots.iter().enumerate() {
                let n_o = protos.slot_counts[o] as f64;
                rows.row_mut(i).scaled_add(1.0 / n_o, &d_slot_protos.row(o));
            }
            (rows, utt)
        })
        .collect()
}
