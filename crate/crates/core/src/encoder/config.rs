use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the transformer encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub feedforward_dim: usize,
    /// Window length plus one for the leading `[CLS]`.
    pub max_seq_len: usize,
}

impl Architecture {
    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.num_heads == 0 {
            return Err(Error::invalid("vocab_size, embed_dim and num_heads must be positive"));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::invalid(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if self.feedforward_dim == 0 || self.max_seq_len < 2 {
            return Err(Error::invalid("feedforward_dim must be positive and max_seq_len at least 2"));
        }
        Ok(())
    }
}

/// Encoder shape plus masked-token pre-training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub feedforward_dim: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub mask_fraction: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl EncoderConfig {
    /// Defaults for windows of length `l` over a vocabulary of `vocab_size` tokens.
    pub fn new(vocab_size: usize, l: usize) -> Self {
        let embed_dim = 64;
        Self {
            embed_dim,
            num_layers: 2,
            num_heads: 4,
            feedforward_dim: 4 * embed_dim,
            max_seq_len: l + 1,
            vocab_size,
            mask_fraction: 0.15,
            learning_rate: 0.05,
            momentum: 0.0,
            grad_clip: Some(1.0),
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            vocab_size: self.vocab_size,
            embed_dim: self.embed_dim,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            feedforward_dim: self.feedforward_dim,
            max_seq_len: self.max_seq_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture().validate()?;
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "mask fraction must lie in (0, 1), got {}",
                self.mask_fraction
            )));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("learning rate must be positive and momentum in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        Ok(())
    }
}
