//! Word vocabulary and joint (word, pause-token) encoding.
//!
//! A pause token is the pair (duration bin, pause bin). Both axes use 300
//! uniform 10 ms bins over [0, 3) s; the 300 x 300 product vocabulary is kept
//! factored as two axes. Index 300 ([`NULL_BIN`]) marks positions without
//! temporal information.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{IntervalSequence, Label, Transcript};

pub const N_BINS: usize = 300;
pub const NULL_BIN: usize = 300;
/// Rows in each temporal embedding table: 300 real bins plus NULL_BIN.
pub const N_TIME_ROWS: usize = N_BINS + 1;
pub const BIN_WIDTH_S: f64 = 0.01;

pub const PAD_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const SEP_ID: usize = 2;
pub const MASK_ID: usize = 3;
pub const UNK_ID: usize = 4;
pub const RESERVED_TOKENS: [&str; 5] = ["[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauseToken {
    pub dur_bin: usize,
    pub pause_bin: usize,
}

impl PauseToken {
    pub const NULL: PauseToken = PauseToken { dur_bin: NULL_BIN, pause_bin: NULL_BIN };

    pub fn from_seconds(duration: f64, pause: f64) -> Result<Self> {
        Ok(PauseToken { dur_bin: quantize_seconds(duration)?, pause_bin: quantize_seconds(pause)? })
    }

    pub fn is_null(&self) -> bool {
        self.dur_bin == NULL_BIN && self.pause_bin == NULL_BIN
    }
}

/// `min(floor(max(v, 0) / 0.01), 299)`.
pub fn quantize_seconds(v: f64) -> Result<usize> {
    if !v.is_finite() {
        return Err(Error::Argument(format!("cannot quantize non-finite value {v}")));
    }
    let v = v.max(0.0);
    // The product form avoids 0.29 / 0.01 = 28.999999999999996.
    let mut bin = (v * 100.0).floor();
    // Correct the rare cases where v * 100 rounds across an integer.
    if bin * BIN_WIDTH_S > v {
        bin -= 1.0;
    } else if (bin + 1.0) * BIN_WIDTH_S <= v {
        bin += 1.0;
    }
    Ok((bin.max(0.0) as usize).min(N_BINS - 1))
}

/// Midpoint of a real bin, in seconds.
pub fn bin_center(bin: usize) -> Result<f64> {
    if bin >= N_BINS {
        return Err(Error::Argument(format!("bin {bin} has no center (valid range 0..={})", N_BINS - 1)));
    }
    Ok((bin as f64 + 0.5) * BIN_WIDTH_S)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Builds from training text only: normalized words with count >=
    /// `min_count`, ordered by frequency desc then lexicographically.
    pub fn build(corpus: &[Transcript], min_count: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Argument("cannot build a vocabulary from an empty corpus".into()));
        }
        if min_count == 0 {
            return Err(Error::Argument("min_count must be >= 1".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in corpus {
            for w in &t.words {
                *counts.entry(w.normalized()).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> =
            counts.into_iter().filter(|(w, c)| *c >= min_count && !RESERVED_TOKENS.contains(&w.as_str())).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_tokens(
            RESERVED_TOKENS.iter().map(|s| s.to_string()).chain(kept.into_iter().map(|(w, _)| w)).collect(),
        )
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED_TOKENS.len()
            || tokens[..RESERVED_TOKENS.len()].iter().zip(RESERVED_TOKENS).any(|(a, b)| a != b)
        {
            return Err(Error::Validation("vocabulary must start with the five reserved tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.contains(char::is_whitespace) {
                return Err(Error::Validation(format!("vocabulary entry {id} is malformed")));
            }
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary entry {tok:?}")));
            }
        }
        Ok(Vocabulary { index, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// One token per line; line number (0-based) is the id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// SHA-256 of the file form; checkpoints record it to detect mismatches.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub transcript_id: String,
    pub window: usize,
    pub word_ids: Vec<usize>,
    pub pause_tokens: Vec<PauseToken>,
    pub attention_mask: Vec<u8>,
    pub label: Option<Label>,
    /// Unquantized pause (seconds) per position; 0 at special positions.
    pub pause_seconds: Vec<f64>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    /// Number of positions with attention 1 (always a prefix).
    pub fn active_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn is_word_position(&self, pos: usize) -> bool {
        self.attention_mask[pos] == 1 && !matches!(self.word_ids[pos], CLS_ID | SEP_ID | PAD_ID)
    }

    pub fn word_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&p| self.is_word_position(p))
    }

    /// Copy restricted to the active prefix. Padding never influences
    /// active positions, so encoder outputs there are unchanged.
    pub fn trimmed(&self) -> EncodedSequence {
        let n = self.active_len();
        EncodedSequence {
            transcript_id: self.transcript_id.clone(),
            window: self.window,
            word_ids: self.word_ids[..n].to_vec(),
            pause_tokens: self.pause_tokens[..n].to_vec(),
            attention_mask: self.attention_mask[..n].to_vec(),
            label: self.label,
            pause_seconds: self.pause_seconds[..n].to_vec(),
        }
    }
}

/// Encodes a transcript into one or more padded windows of
/// `[CLS] w1 .. wk [SEP] [PAD]..`, each word carrying its pause token.
pub fn encode(
    t: &Transcript,
    iv: &IntervalSequence,
    vocab: &Vocabulary,
    max_seq_len: usize,
) -> Result<Vec<EncodedSequence>> {
    if max_seq_len < 8 {
        return Err(Error::Argument(format!("max_seq_len must be >= 8, got {max_seq_len}")));
    }
    if iv.len() != t.words.len() || iv.pauses.len() != t.words.len() {
        return Err(Error::Validation(format!("transcript {}: interval sequence not aligned with words", t.id)));
    }
    let per_window = max_seq_len - 2;
    let mut out = Vec::with_capacity(t.words.len().div_ceil(per_window));
    for (window, start) in (0..t.words.len()).step_by(per_window).enumerate() {
        let end = (start + per_window).min(t.words.len());
        let mut word_ids = Vec::with_capacity(max_seq_len);
        let mut pause_tokens = Vec::with_capacity(max_seq_len);
        let mut pause_seconds = Vec::with_capacity(max_seq_len);
        word_ids.push(CLS_ID);
        pause_tokens.push(PauseToken::NULL);
        pause_seconds.push(0.0);
        for i in start..end {
            word_ids.push(vocab.id(&t.words[i].normalized()));
            pause_tokens.push(PauseToken::from_seconds(iv.durations[i], iv.pauses[i])?);
            pause_seconds.push(iv.pauses[i]);
        }
        word_ids.push(SEP_ID);
        pause_tokens.push(PauseToken::NULL);
        pause_seconds.push(0.0);
        let active = word_ids.len();
        word_ids.resize(max_seq_len, PAD_ID);
        pause_tokens.resize(max_seq_len, PauseToken::NULL);
        pause_seconds.resize(max_seq_len, 0.0);
        let mut attention_mask = vec![1u8; active];
        attention_mask.resize(max_seq_len, 0);
        out.push(EncodedSequence {
            transcript_id: t.id.clone(),
            window,
            word_ids,
            pause_tokens,
            attention_mask,
            label: t.label,
            pause_seconds,
        });
    }
    Ok(out)
}

/// Extracts intervals and encodes every transcript, in order.
pub fn encode_dataset(
    transcripts: &[Transcript],
    vocab: &Vocabulary,
    max_seq_len: usize,
) -> Result<Vec<EncodedSequence>> {
    let mut out = Vec::new();
    for t in transcripts {
        let iv = crate::ingest::extract_intervals(t);
        out.extend(encode(t, &iv, vocab, max_seq_len)?);
    }
    Ok(out)
}
