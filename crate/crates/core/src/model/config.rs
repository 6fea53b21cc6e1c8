use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::N_TIME_ROWS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Hidden width. Even: the duration and pause embeddings each take half.
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    /// Rows per temporal table (300 bins + NULL_BIN). Fixed.
    pub n_time_bins: usize,
    pub dropout_rate: f64,
    pub layer_norm_eps: f64,
    pub init_std: f64,
    /// Zero the duration half of the temporal embedding.
    pub disable_duration: bool,
    /// Zero the pause half of the temporal embedding.
    pub disable_pause: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 128,
            max_seq_len: 64,
            vocab_size: 0,
            n_time_bins: N_TIME_ROWS,
            dropout_rate: 0.1,
            layer_norm_eps: 1e-12,
            init_std: 0.02,
            disable_duration: false,
            disable_pause: false,
        }
    }
}

impl ModelConfig {
    /// BERT-base sized: 768 wide with 384 + 384 temporal halves.
    pub fn reference(vocab_size: usize) -> Self {
        ModelConfig {
            d_model: 768,
            n_layers: 12,
            n_heads: 12,
            d_ff: 3072,
            max_seq_len: 512,
            vocab_size,
            ..ModelConfig::default()
        }
    }

    pub fn half(&self) -> usize {
        self.d_model / 2
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("model: {m}")));
        if self.d_model == 0 || !self.d_model.is_multiple_of(2) {
            return fail(format!("d_model must be even and positive, got {}", self.d_model));
        }
        if self.n_layers == 0 {
            return fail("n_layers must be >= 1".into());
        }
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail(format!("n_heads {} must divide d_model {}", self.n_heads, self.d_model));
        }
        if self.d_ff == 0 {
            return fail("d_ff must be >= 1".into());
        }
        if self.max_seq_len < 8 {
            return fail(format!("max_seq_len must be >= 8, got {}", self.max_seq_len));
        }
        if self.vocab_size <= crate::tokenizer::UNK_ID {
            return fail(format!("vocab_size {} leaves no room for words", self.vocab_size));
        }
        if self.n_time_bins != N_TIME_ROWS {
            return fail(format!("n_time_bins is fixed at {N_TIME_ROWS}"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        if [self.layer_norm_eps, self.init_std].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return fail("layer_norm_eps and init_std must be positive".into());
        }
        Ok(())
    }
}
