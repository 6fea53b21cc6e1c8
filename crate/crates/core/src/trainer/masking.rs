use rand::Rng;

use crate::tokenizer::{EncodedSequence, PauseToken, MASK_ID, UNK_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordAction {
    /// Replace with `[MASK]`.
    Mask,
    /// Replace with this (non-reserved) word id.
    Random(usize),
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedWord {
    pub position: usize,
    pub original: usize,
    pub action: WordAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedPause {
    pub position: usize,
    pub original: PauseToken,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequencePlan {
    pub words: Vec<MaskedWord>,
    pub pauses: Vec<MaskedPause>,
}

impl SequencePlan {
    /// Model input with the plan applied. Masked pause positions take
    /// NULL_BIN in both temporal fields.
    pub fn apply(&self, seq: &EncodedSequence) -> (Vec<usize>, Vec<PauseToken>) {
        let mut ids = seq.word_ids.clone();
        let mut toks = seq.pause_tokens.clone();
        for w in &self.words {
            match w.action {
                WordAction::Mask => ids[w.position] = MASK_ID,
                WordAction::Random(id) => ids[w.position] = id,
                WordAction::Keep => {}
            }
        }
        for p in &self.pauses {
            toks[p.position] = PauseToken::NULL;
        }
        (ids, toks)
    }
}

/// Which positions of each sequence in a batch are masked, with originals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaskingPlan {
    pub sequences: Vec<SequencePlan>,
}

impl MaskingPlan {
    /// A plan that masks nothing, for classification-only batches.
    pub fn empty(batch_len: usize) -> Self {
        MaskingPlan { sequences: vec![SequencePlan::default(); batch_len] }
    }

    pub fn masked_words(&self) -> usize {
        self.sequences.iter().map(|s| s.words.len()).sum()
    }

    pub fn masked_pauses(&self) -> usize {
        self.sequences.iter().map(|s| s.pauses.len()).sum()
    }
}

/// Independently masks each word position with `word_rate` (80/10/10
/// mask/random/keep) and each word position's pause token with
/// `pause_rate`. Special and padding positions are never eligible.
pub fn make_masking_plan<R: Rng>(
    batch: &[EncodedSequence],
    word_rate: f64,
    pause_rate: f64,
    vocab_size: usize,
    rng: &mut R,
) -> MaskingPlan {
    let first_word_id = UNK_ID + 1;
    let sequences = batch
        .iter()
        .map(|seq| {
            let mut plan = SequencePlan::default();
            for pos in seq.word_positions() {
                if rng.random::<f64>() < word_rate {
                    let r: f64 = rng.random();
                    let action = if r < 0.8 {
                        WordAction::Mask
                    } else if r < 0.9 && vocab_size > first_word_id {
                        WordAction::Random(rng.random_range(first_word_id..vocab_size))
                    } else {
                        WordAction::Keep
                    };
                    plan.words.push(MaskedWord { position: pos, original: seq.word_ids[pos], action });
                }
                if rng.random::<f64>() < pause_rate {
                    plan.pauses.push(MaskedPause { position: pos, original: seq.pause_tokens[pos] });
                }
            }
            plan
        })
        .collect();
    MaskingPlan { sequences }
}
