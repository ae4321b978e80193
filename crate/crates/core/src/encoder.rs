//! Token and utterance embedding functions.
//!
//! `HashedFrozen` maps every token string to a fixed unit vector derived from
//! `(seed, token)`, so a surface token embeds identically in every domain.
//! `Trainable` looks tokens up in a table, averages a `±context_window` window
//! and applies an affine projection; its gradients are exact.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const CHECKPOINT_MAGIC: &str = "JMRM-ENC-v1";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    HashedFrozen,
    Trainable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub dim: usize,
    pub context_window: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Trainable,
            dim: 32,
            context_window: 1,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("encoder dim must be at least 1".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidArgument("encoder init_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Trainable weights. Row 0 of `table` is the UNK row; `vocab[i]` owns row `i + 1`.
/// All matrices are empty for the frozen kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub vocab: Vec<String>,
    pub table: Array2<f64>,
    pub projection: Array2<f64>,
    pub bias: Array1<f64>,
}

impl EncoderParams {
    /// Zero tensors of the same shapes, for gradients and optimizer moments.
    pub fn zeros_like(&self) -> EncoderParams {
        EncoderParams {
            vocab: Vec::new(),
            table: Array2::zeros(self.table.raw_dim()),
            projection: Array2::zeros(self.projection.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [
            self.table.as_slice().expect("standard layout"),
            self.projection.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.table.as_slice_mut().expect("standard layout"),
            self.projection.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &EncoderParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= c);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    params: EncoderParams,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: EncoderConfig,
    params: EncoderParams,
}

fn hashed_vector(seed: u64, token: &str, dim: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, token));
    let v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.dot(&v).sqrt();
    v / norm
}

fn uniform_row(seed: u64, token: &str, dim: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("table/{token}")));
    (0..dim).map(|_| rng.random_range(-scale..=scale)).collect()
}

impl Encoder {
    /// Builds an encoder; `vocab` lists the tokens given their own table rows
    /// (duplicates ignored, first occurrence wins). Ignored for the frozen kind.
    pub fn new<I, S>(config: EncoderConfig, vocab: I) -> Result<Encoder>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        config.validate()?;
        let d = config.dim;
        let params = match config.kind {
            EncoderKind::HashedFrozen => EncoderParams {
                vocab: Vec::new(),
                table: Array2::zeros((0, d)),
                projection: Array2::zeros((0, 0)),
                bias: Array1::zeros(0),
            },
            EncoderKind::Trainable => {
                let mut words: Vec<String> = Vec::new();
                let mut seen = std::collections::HashSet::new();
                for w in vocab {
                    let w = w.as_ref();
                    if w != UNK && seen.insert(w.to_string()) {
                        words.push(w.to_string());
                    }
                }
                let s = config.init_scale;
                let mut table = Array2::zeros((words.len() + 1, d));
                for (row, tok) in std::iter::once(UNK).chain(words.iter().map(String::as_str)).enumerate() {
                    let vals = uniform_row(config.seed, tok, d, s);
                    table.row_mut(row).assign(&Array1::from(vals));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "projection"));
                let projection = Array2::from_shape_fn((d, d), |(i, j)| {
                    let noise = rng.random_range(-s..=s);
                    if i == j {
                        1.0 + noise
                    } else {
                        noise
                    }
                });
                EncoderParams {
                    vocab: words,
                    table,
                    projection,
                    bias: Array1::zeros(d),
                }
            }
        };
        Ok(Self::from_parts(config, params))
    }

    pub fn from_parts(config: EncoderConfig, params: EncoderParams) -> Encoder {
        let index = params
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i + 1))
            .collect();
        Encoder { config, params, index }
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &EncoderParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut EncoderParams {
        &mut self.params
    }

    pub fn is_trainable(&self) -> bool {
        self.config.kind == EncoderKind::Trainable
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    fn row_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    fn window(&self, i: usize, m: usize) -> std::ops::Range<usize> {
        let w = self.config.context_window;
        i.saturating_sub(w)..(i + w + 1).min(m)
    }

    /// Mean of the table rows in each token's window (trainable kind).
    fn window_means(&self, rows: &[usize]) -> Array2<f64> {
        let m = rows.len();
        let mut h = Array2::zeros((m, self.config.dim));
        for i in 0..m {
            let win = self.window(i, m);
            let n = win.len() as f64;
            let mut hi = h.row_mut(i);
            for j in win {
                hi.scaled_add(1.0 / n, &self.params.table.row(rows[j]));
            }
        }
        h
    }

    /// One embedding row per token.
    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Array2<f64> {
        assert!(!tokens.is_empty(), "cannot encode an empty utterance");
        let d = self.config.dim;
        match self.config.kind {
            EncoderKind::HashedFrozen => {
                let mut out = Array2::zeros((tokens.len(), d));
                for (i, t) in tokens.iter().enumerate() {
                    out.row_mut(i).assign(&hashed_vector(self.config.seed, t.as_ref(), d));
                }
                out
            }
            EncoderKind::Trainable => {
                let rows: Vec<usize> = tokens.iter().map(|t| self.row_of(t.as_ref())).collect();
                let h = self.window_means(&rows);
                h.dot(&self.params.projection.t()) + &self.params.bias
            }
        }
    }

    pub fn encode_utterance<S: AsRef<str>>(&self, tokens: &[S]) -> Array1<f64> {
        utterance_from_rows(&self.encode_tokens(tokens))
    }

    /// Accumulates parameter gradients into `grads` given the upstream gradient
    /// of the token rows (`m × d`) and, optionally, of the utterance vector.
    pub fn backward_into<S: AsRef<str>>(
        &self,
        tokens: &[S],
        row_grads: Option<&Array2<f64>>,
        utterance_grad: Option<ArrayView1<f64>>,
        grads: &mut EncoderParams,
    ) -> Result<()> {
        if !self.is_trainable() {
            return Err(Error::FrozenEncoder);
        }
        let m = tokens.len();
        let d = self.config.dim;
        let mut g = match row_grads {
            Some(r) => {
                assert_eq!(r.dim(), (m, d), "row gradient shape");
                r.clone()
            }
            None => Array2::zeros((m, d)),
        };
        if let Some(u) = utterance_grad {
            let share = 1.0 / m as f64;
            for mut row in g.rows_mut() {
                row.scaled_add(share, &u);
            }
        }
        let rows: Vec<usize> = tokens.iter().map(|t| self.row_of(t.as_ref())).collect();
        let h = self.window_means(&rows);
        // rows = h P^T + b
        grads.projection += &g.t().dot(&h);
        grads.bias += &g.sum_axis(Axis(0));
        let gh = g.dot(&self.params.projection);
        for i in 0..m {
            let win = self.window(i, m);
            let n = win.len() as f64;
            for j in win {
                grads.table.row_mut(rows[j]).scaled_add(1.0 / n, &gh.row(i));
            }
        }
        Ok(())
    }

    pub fn backward<S: AsRef<str>>(
        &self,
        tokens: &[S],
        row_grads: Option<&Array2<f64>>,
        utterance_grad: Option<ArrayView1<f64>>,
    ) -> Result<EncoderParams> {
        let mut grads = self.params.zeros_like();
        self.backward_into(tokens, row_grads, utterance_grad, &mut grads)?;
        Ok(grads)
    }

    pub fn to_checkpoint(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_MAGIC.to_string(),
            config: self.config.clone(),
            params: self.params.clone(),
        };
        serde_json::to_string(&ck).expect("encoder checkpoint serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Encoder> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "unsupported format {:?}, expected {CHECKPOINT_MAGIC:?}",
                ck.format
            )));
        }
        ck.config.validate()?;
        let d = ck.config.dim;
        let p = &ck.params;
        let shapes_ok = match ck.config.kind {
            EncoderKind::HashedFrozen => p.table.nrows() == 0,
            EncoderKind::Trainable => {
                p.table.dim() == (p.vocab.len() + 1, d) && p.projection.dim() == (d, d) && p.bias.len() == d
            }
        };
        if !shapes_ok {
            return Err(Error::Checkpoint("parameter shapes do not match the config".into()));
        }
        if !p.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self::from_parts(ck.config, ck.params))
    }
}

/// Utterance embedding: the mean of the token rows.
pub fn utterance_from_rows(rows: &Array2<f64>) -> Array1<f64> {
    rows.mean_axis(Axis(0)).expect("at least one token")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn trainable(d: usize, w: usize, vocab: &[&str]) -> Encoder {
        Encoder::new(
            EncoderConfig {
                kind: EncoderKind::Trainable,
                dim: d,
                context_window: w,
                init_scale: 0.5,
                seed: 3,
            },
            vocab,
        )
        .unwrap()
    }

    fn frozen(d: usize) -> Encoder {
        Encoder::new(
            EncoderConfig {
                kind: EncoderKind::HashedFrozen,
                dim: d,
                ..EncoderConfig::default()
            },
            std::iter::empty::<&str>(),
        )
        .unwrap()
    }

    #[test]
    fn frozen_rows_are_unit_and_token_keyed() {
        let e = frozen(16);
        let x = e.encode_tokens(&["play", "play", "song"]);
        assert_eq!(x.row(0), x.row(1));
        assert_ne!(x.row(0), x.row(2));
        for r in x.rows() {
            assert!((r.dot(&r).sqrt() - 1.0).abs() < 1e-9);
        }
        let other = frozen(16).encode_tokens(&["song"]);
        assert_eq!(other.row(0), x.row(2));
    }

    #[test]
    fn identity_projection_returns_table_rows() {
        let mut e = trainable(4, 0, &["a", "b"]);
        e.params.projection = Array2::eye(4);
        e.params.bias.fill(0.0);
        let x = e.encode_tokens(&["b", "a", "zzz"]);
        assert_eq!(x.row(0), e.params.table.row(2));
        assert_eq!(x.row(1), e.params.table.row(1));
        assert_eq!(x.row(2), e.params.table.row(0));
    }

    #[test]
    fn utterance_is_the_row_mean() {
        let e = trainable(5, 0, &["a", "b", "c"]);
        let one = e.encode_utterance(&["a"]);
        assert_eq!(one, e.encode_tokens(&["a"]).row(0));
        let ab = e.encode_utterance(&["a", "b"]);
        let rows = e.encode_tokens(&["a", "b"]);
        let mid = (&rows.row(0) + &rows.row(1)) / 2.0;
        for (x, y) in ab.iter().zip(mid.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let abc = e.encode_utterance(&["a", "b", "c"]);
        let cab = e.encode_utterance(&["c", "a", "b"]);
        for (x, y) in abc.iter().zip(cab.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_backward_is_an_error() {
        let e = frozen(4);
        assert!(matches!(e.backward(&["a"], None, None), Err(Error::FrozenEncoder)));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let e = trainable(4, 1, &["a", "b"]);
        let g = e.backward(&["a", "b"], Some(&Array2::zeros((2, 4))), None).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn absent_token_gets_no_table_gradient() {
        let e = trainable(4, 0, &["a", "b", "c"]);
        let g = e
            .backward(&["a", "b"], Some(&Array2::ones((2, 4))), Some(Array1::ones(4).view()))
            .unwrap();
        assert!(g.table.row(3).iter().all(|&v| v == 0.0));
        assert!(g.table.row(1).iter().any(|&v| v != 0.0));
    }

    /// Central finite differences of a random linear functional of the outputs.
    #[test]
    fn backward_matches_finite_differences() {
        let vocab = ["a", "b", "c", "d"];
        let mut rng = stream(9, "encoder-fd");
        for trial in 0..20 {
            let d = rng.random_range(1..=8);
            let w = rng.random_range(0..=2);
            let m = rng.random_range(1..=5);
            let mut e = trainable(d, w, &vocab);
            e.params.bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            let tokens: Vec<&str> = (0..m)
                .map(|_| ["a", "b", "c", "d", "oov"][rng.random_range(0..5)])
                .collect();
            let gr = Array2::from_shape_fn((m, d), |_| rng.random_range(-1.0..1.0));
            let gu = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
            let objective = |enc: &Encoder| {
                let x = enc.encode_tokens(&tokens);
                (&x * &gr).sum() + enc.encode_utterance(&tokens).dot(&gu)
            };
            let analytic = e.backward(&tokens, Some(&gr), Some(gu.view())).unwrap();
            let h = 1e-5;
            for t in 0..3 {
                for k in 0..e.params.tensors()[t].len() {
                    let orig = e.params.tensors()[t][k];
                    e.params.tensors_mut()[t][k] = orig + h;
                    let plus = objective(&e);
                    e.params.tensors_mut()[t][k] = orig - h;
                    let minus = objective(&e);
                    e.params.tensors_mut()[t][k] = orig;
                    let numeric = (plus - minus) / (2.0 * h);
                    let a = analytic.tensors()[t][k];
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                    assert!(rel <= 1e-4, "trial {trial} tensor {t} idx {k}: {a} vs {numeric}");
                }
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let e = trainable(3, 1, &["x", "y"]);
        let text = e.to_checkpoint();
        assert!(text.contains(CHECKPOINT_MAGIC));
        let back = Encoder::from_checkpoint(&text).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.encode_tokens(&["x", "q"]), e.encode_tokens(&["x", "q"]));
        let bad = text.replace(CHECKPOINT_MAGIC, "JMRM-ENC-v0");
        assert!(matches!(Encoder::from_checkpoint(&bad), Err(Error::Checkpoint(_))));
    }
}
