//! Pause-augmented transformer encoder.
//!
//! Input embedding per position is `word + position + concat(duration,
//! pause)`, followed by layer norm and dropout, a post-LN encoder stack and
//! three heads: masked-word logits, 300-way pause-bin logits and a 2-way
//! classifier on the `[CLS]` position.

pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod loss;
pub mod params;
pub mod tensor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use encoder::compose_embeddings;
pub use loss::{loss_and_gradients, LossBreakdown, LossWeights};
pub use params::ModelParams;
pub use tensor::Matrix;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tokenizer::{EncodedSequence, PauseToken};
use tensor::affine;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout off.
    Eval,
    /// Dropout drawn from a stream seeded with this value.
    Train { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub hidden_states: Matrix,
    pub mlm_logits: Matrix,
    /// 300 classes; NULL_BIN is never a prediction target.
    pub pause_logits: Matrix,
    pub cls_logits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, Stream::Init, 0);
        let params = ModelParams::init(&config, &mut rng);
        Ok(Model { config, params })
    }

    fn hidden(
        &self,
        word_ids: &[usize],
        pause_tokens: &[PauseToken],
        attention_mask: &[u8],
        mode: Mode,
    ) -> Result<Matrix> {
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let (h, _) = encoder::encode(&self.params, &self.config, word_ids, pause_tokens, attention_mask, rng.as_mut())?;
        Ok(h)
    }

    /// Full forward pass over every position of `seq`, padding included.
    pub fn forward(&self, seq: &EncodedSequence, mode: Mode) -> Result<ForwardOutput> {
        self.forward_tokens(&seq.word_ids, &seq.pause_tokens, &seq.attention_mask, mode)
    }

    pub fn forward_tokens(
        &self,
        word_ids: &[usize],
        pause_tokens: &[PauseToken],
        attention_mask: &[u8],
        mode: Mode,
    ) -> Result<ForwardOutput> {
        let hidden = self.hidden(word_ids, pause_tokens, attention_mask, mode)?;
        let p = &self.params;
        let mlm_logits = affine(&hidden, &p.mlm_w, &p.mlm_b);
        let pause_logits = affine(&hidden, &p.pause_w, &p.pause_b);
        let cls = affine(&Matrix::from_vec(1, hidden.cols, hidden.row(0).to_vec()), &p.cls_w, &p.cls_b);
        let out =
            ForwardOutput { cls_logits: [cls.data[0], cls.data[1]], hidden_states: hidden, mlm_logits, pause_logits };
        if !out.mlm_logits.all_finite()
            || !out.pause_logits.all_finite()
            || !out.cls_logits.iter().all(|v| v.is_finite())
        {
            return Err(Error::Numeric("non-finite head output".into()));
        }
        Ok(out)
    }

    /// Eval-mode pause-bin logits at the given positions only, computed on
    /// the active prefix of the sequence.
    pub fn pause_logits_at(
        &self,
        word_ids: &[usize],
        pause_tokens: &[PauseToken],
        attention_mask: &[u8],
        positions: &[usize],
    ) -> Result<Vec<Vec<f64>>> {
        let n = attention_mask.iter().filter(|&&m| m == 1).count();
        let hidden = self.hidden(&word_ids[..n], &pause_tokens[..n], &attention_mask[..n], Mode::Eval)?;
        let p = &self.params;
        positions
            .iter()
            .map(|&pos| {
                if pos >= n {
                    return Err(Error::Argument(format!("position {pos} is padding")));
                }
                let row = Matrix::from_vec(1, hidden.cols, hidden.row(pos).to_vec());
                Ok(affine(&row, &p.pause_w, &p.pause_b).data)
            })
            .collect()
    }

    /// Eval-mode classifier logits, computed on the active prefix.
    pub fn cls_logits(&self, seq: &EncodedSequence) -> Result<[f64; 2]> {
        let t = seq.trimmed();
        let hidden = self.hidden(&t.word_ids, &t.pause_tokens, &t.attention_mask, Mode::Eval)?;
        let row = Matrix::from_vec(1, hidden.cols, hidden.row(0).to_vec());
        let l = affine(&row, &self.params.cls_w, &self.params.cls_b);
        Ok([l.data[0], l.data[1]])
    }
}

#[cfg(test)]
mod tests;
