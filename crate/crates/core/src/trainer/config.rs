use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::DEFAULT_LAMBDA;
use crate::protonet::Similarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// One cross-entropy over (intent, slot sequence) pairs.
    Joint,
    /// Intent cross-entropy plus independent per-token slot cross-entropies.
    SumSep,
    /// Intent cross-entropy plus a sequence-level slot cross-entropy.
    SeqCe,
}

impl std::str::FromStr for LossMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(LossMode::Joint),
            "sum_sep" => Ok(LossMode::SumSep),
            "seq_ce" => Ok(LossMode::SeqCe),
            other => Err(Error::InvalidArgument(format!("unknown loss mode {other:?}"))),
        }
    }
}

/// Training and evaluation settings.
///
/// `batch_size` counts query samples: gradients of `batch_size` queries are
/// averaged into one Adam step. Defaults follow the reference BERT setup
/// (batch 4, learning rate 1e-5, λ = 1); small from-scratch encoders usually
/// want a much larger learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub similarity: Similarity,
    pub lambda: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_steps: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub loss_mode: LossMode,
    pub i2s_train: bool,
    pub msd_train: bool,
    pub i2s_eval: bool,
    pub msd_eval: bool,
    #[serde(alias = "force_O_related")]
    pub force_o_related: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            similarity: Similarity::Vpb,
            lambda: DEFAULT_LAMBDA,
            batch_size: 4,
            learning_rate: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_steps: 1000,
            eval_every: 100,
            seed: 0,
            loss_mode: LossMode::Joint,
            i2s_train: true,
            msd_train: true,
            i2s_eval: true,
            msd_eval: true,
            force_o_related: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) || !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam betas must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        Ok(())
    }
}
