//! Model and optimizer settings with a `key = value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::smiles::{MAX_TOKENS, VOCAB_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub latent: usize,
    /// Longest token sequence (START and END included); also the number of
    /// memory slots the latent code is upsampled to.
    pub max_len: usize,
    pub vocab: usize,
    pub tau: f64,
    pub lambda: f64,
    pub ff_mult: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 2,
            hidden: 64,
            heads: 4,
            latent: 16,
            max_len: MAX_TOKENS,
            vocab: VOCAB_SIZE,
            tau: 0.7,
            lambda: 0.5,
            ff_mult: 4,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.latent == 0 || self.ff_mult == 0 {
            return bad("layers, hidden, heads, latent and ff_mult must be positive".into());
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return bad(format!("hidden {} is not divisible by heads {}", self.hidden, self.heads));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.vocab != VOCAB_SIZE {
            return bad(format!("vocab must be {VOCAB_SIZE}, got {}", self.vocab));
        }
        if self.max_len < 2 {
            return bad("max_len must leave room for START and END".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    pub steps: usize,
    /// Anchors per batch.
    pub batch_anchors: usize,
    /// Mutant rows per anchor (at most this many).
    pub positives: usize,
    /// When positive, a batch is a random anchor plus companions drawn from
    /// its this-many nearest anchors by fingerprint distance; 0 draws all
    /// anchors uniformly.
    pub neighbourhood: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 1.0,
            steps: 1000,
            batch_anchors: 8,
            positives: 10,
            neighbourhood: 0,
        }
    }
}

impl TrainConfig {
    // negated comparisons so that NaN settings are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("lr must be positive and betas in [0, 1)".into()));
        }
        if self.batch_anchors == 0 || self.positives == 0 {
            return Err(Error::Config("batch_anchors and positives must be positive".into()));
        }
        if !(self.grad_clip >= 0.0) || !(self.adam_eps > 0.0) {
            return Err(Error::Config("grad_clip must be non-negative and adam_eps positive".into()));
        }
        Ok(())
    }
}

/// Renders both configs as `key = value` lines in a fixed order.
pub fn to_text(model: &ModelConfig, train: &TrainConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
    kv("layers", model.layers.to_string());
    kv("hidden", model.hidden.to_string());
    kv("heads", model.heads.to_string());
    kv("latent", model.latent.to_string());
    kv("max_len", model.max_len.to_string());
    kv("vocab", model.vocab.to_string());
    kv("tau", model.tau.to_string());
    kv("lambda", model.lambda.to_string());
    kv("ff_mult", model.ff_mult.to_string());
    kv("dropout", model.dropout.to_string());
    kv("seed", model.seed.to_string());
    kv("lr", train.lr.to_string());
    kv("beta1", train.beta1.to_string());
    kv("beta2", train.beta2.to_string());
    kv("adam_eps", train.adam_eps.to_string());
    kv("grad_clip", train.grad_clip.to_string());
    kv("steps", train.steps.to_string());
    kv("batch_anchors", train.batch_anchors.to_string());
    kv("positives", train.positives.to_string());
    kv("neighbourhood", train.neighbourhood.to_string());
    s
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Config(format!("bad value for {key}: {raw:?}")))
}

/// Parses `key = value` lines over defaults. Blank lines and `#` comments are
/// skipped; unknown keys are errors.
pub fn from_text(text: &str) -> Result<(ModelConfig, TrainConfig)> {
    let mut m = ModelConfig::default();
    let mut t = TrainConfig::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "layers" => m.layers = value(k, v)?,
            "hidden" => m.hidden = value(k, v)?,
            "heads" => m.heads = value(k, v)?,
            "latent" => m.latent = value(k, v)?,
            "max_len" => m.max_len = value(k, v)?,
            "vocab" => m.vocab = value(k, v)?,
            "tau" => m.tau = value(k, v)?,
            "lambda" => m.lambda = value(k, v)?,
            "ff_mult" => m.ff_mult = value(k, v)?,
            "dropout" => m.dropout = value(k, v)?,
            "seed" => m.seed = value(k, v)?,
            "lr" => t.lr = value(k, v)?,
            "beta1" => t.beta1 = value(k, v)?,
            "beta2" => t.beta2 = value(k, v)?,
            "adam_eps" => t.adam_eps = value(k, v)?,
            "grad_clip" => t.grad_clip = value(k, v)?,
            "steps" => t.steps = value(k, v)?,
            "batch_anchors" => t.batch_anchors = value(k, v)?,
            "positives" => t.positives = value(k, v)?,
            "neighbourhood" => t.neighbourhood = value(k, v)?,
            _ => return Err(Error::Config(format!("line {}: unknown key {k:?}", n + 1))),
        }
    }
    m.validate()?;
    t.validate()?;
    Ok((m, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = ModelConfig { lambda: 1.0, latent: 8, seed: 7, ..Default::default() };
        let t = TrainConfig { lr: 1e-3, steps: 12, ..Default::default() };
        let (m2, t2) = from_text(&to_text(&m, &t)).unwrap();
        assert_eq!((m, t), (m2, t2));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(from_text("hidden = 10\nheads = 4").is_err());
        assert!(from_text("lambda = 1.5").is_err());
        assert!(from_text("colour = red").is_err());
        assert!(from_text("tau = 0").is_err());
        assert!(from_text("# comment only\n\nlayers = 3 # trailing").is_ok());
    }
}
