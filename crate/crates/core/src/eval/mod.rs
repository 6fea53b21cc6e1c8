//! Masked-pause RMSE, classification metrics and pause statistics.

pub mod metrics;
pub mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Label;
use crate::model::tensor::argmax;
use crate::model::Model;
use crate::tokenizer::{bin_center, EncodedSequence, PauseToken, N_BINS};

pub use metrics::{f1_score, Confusion, MetricsReport};
pub use stats::{pause_stats, PauseHistogram, PauseStats};

/// Upper end of the pause range the model can represent, in seconds.
pub const MAX_PAUSE_S: f64 = 3.0;

/// `sqrt(mean((pred - truth)^2))`.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Argument(format!("rmse: {} predictions vs {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Argument("rmse of empty sequences".into()));
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Anything that yields 300-way pause-bin logits for masked positions.
pub trait PausePredictor: Sync {
    /// `masked` is `seq.pause_tokens` with the positions under test set to
    /// NULL_BIN. Returns one logit row per entry of `positions`.
    fn pause_logits(&self, seq: &EncodedSequence, masked: &[PauseToken], positions: &[usize]) -> Result<Vec<Vec<f64>>>;
}

impl PausePredictor for Model {
    fn pause_logits(&self, seq: &EncodedSequence, masked: &[PauseToken], positions: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.pause_logits_at(&seq.word_ids, masked, &seq.attention_mask, positions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSweep {
    /// One forward pass per word, masking only that word's pause token.
    #[default]
    LeaveOneOut,
    /// One forward pass per window with every pause token masked.
    AllAtOnce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRmse {
    pub id: String,
    pub group: String,
    pub words: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub transcripts: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub sweep: MaskSweep,
    pub transcripts: Vec<TranscriptRmse>,
    /// Keyed by group name; groups without transcripts are absent.
    pub groups: BTreeMap<String, GroupSummary>,
    pub forward_passes: u64,
    pub masked_positions: u64,
}

pub fn group_name(label: Option<Label>) -> &'static str {
    label.map(Label::name).unwrap_or("unlabeled")
}

/// Groups windows by transcript id, keeping first-appearance order.
fn by_transcript(dataset: &[EncodedSequence]) -> Vec<Vec<&EncodedSequence>> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out: Vec<Vec<&EncodedSequence>> = Vec::new();
    for seq in dataset {
        let slot = *index.entry(seq.transcript_id.as_str()).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[slot].push(seq);
    }
    out
}

fn decode(logits: &[f64]) -> Result<f64> {
    if logits.len() != N_BINS {
        return Err(Error::Argument(format!("expected {N_BINS} pause logits, got {}", logits.len())));
    }
    bin_center(argmax(logits))
}

struct TranscriptResult {
    row: TranscriptRmse,
    passes: u64,
    masked: u64,
}

fn sweep_transcript(
    windows: &[&EncodedSequence],
    predictor: &dyn PausePredictor,
    sweep: MaskSweep,
) -> Result<TranscriptResult> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    let (mut passes, mut masked) = (0u64, 0u64);
    for seq in windows {
        let positions: Vec<usize> = seq.word_positions().collect();
        match sweep {
            MaskSweep::LeaveOneOut => {
                for &pos in &positions {
                    let mut toks = seq.pause_tokens.clone();
                    toks[pos] = PauseToken::NULL;
                    let logits = predictor.pause_logits(seq, &toks, &[pos])?;
                    passes += 1;
                    masked += 1;
                    pred.push(decode(&logits[0])?);
                    truth.push(seq.pause_seconds[pos].clamp(0.0, MAX_PAUSE_S));
                }
            }
            MaskSweep::AllAtOnce => {
                let mut toks = seq.pause_tokens.clone();
                for &pos in &positions {
                    toks[pos] = PauseToken::NULL;
                }
                let logits = predictor.pause_logits(seq, &toks, &positions)?;
                passes += 1;
                masked += positions.len() as u64;
                for (&pos, l) in positions.iter().zip(&logits) {
                    pred.push(decode(l)?);
                    truth.push(seq.pause_seconds[pos].clamp(0.0, MAX_PAUSE_S));
                }
            }
        }
    }
    let first = windows[0];
    Ok(TranscriptResult {
        row: TranscriptRmse {
            id: first.transcript_id.clone(),
            group: group_name(first.label).to_string(),
            words: pred.len(),
            rmse: rmse(&pred, &truth)?,
        },
        passes,
        masked,
    })
}

/// Masked-pause prediction RMSE per transcript with per-group mean, min and
/// max. Predictions decode as the center of the argmax bin; targets are the
/// unquantized pauses clamped to [0, 3] s.
pub fn eval_masked_pause(
    dataset: &[EncodedSequence],
    predictor: &dyn PausePredictor,
    sweep: MaskSweep,
) -> Result<RmseReport> {
    let groups = by_transcript(dataset);
    let results: Vec<Result<TranscriptResult>> =
        groups.par_iter().map(|windows| sweep_transcript(windows, predictor, sweep)).collect();
    let mut transcripts = Vec::with_capacity(results.len());
    let (mut passes, mut masked) = (0, 0);
    for r in results {
        let r = r?;
        passes += r.passes;
        masked += r.masked;
        transcripts.push(r.row);
    }
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in &transcripts {
        by_group.entry(t.group.clone()).or_default().push(t.rmse);
    }
    let groups = by_group
        .into_iter()
        .map(|(g, v)| {
            let summary = GroupSummary {
                transcripts: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            (g, summary)
        })
        .collect();
    Ok(RmseReport { sweep, transcripts, groups, forward_passes: passes, masked_positions: masked })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    pub predicted: Label,
    pub windows: usize,
    /// Window-averaged logits.
    pub logits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub metrics: MetricsReport,
    pub predictions: Vec<Prediction>,
}

/// Transcript-level classification: average window logits, argmax with ties
/// going to control.
pub fn eval_classification(dataset: &[EncodedSequence], model: &Model) -> Result<ClassificationReport> {
    if let Some(s) = dataset.iter().find(|s| s.label.is_none()) {
        return Err(Error::Validation(format!("transcript {} is unlabeled", s.transcript_id)));
    }
    let groups = by_transcript(dataset);
    let predictions: Vec<Result<Prediction>> = groups
        .par_iter()
        .map(|windows| {
            let mut sum = [0.0; 2];
            for w in windows {
                let l = model.cls_logits(w)?;
                sum[0] += l[0];
                sum[1] += l[1];
            }
            let n = windows.len() as f64;
            let logits = [sum[0] / n, sum[1] / n];
            let predicted = if logits[1] > logits[0] { Label::Ad } else { Label::Control };
            Ok(Prediction {
                id: windows[0].transcript_id.clone(),
                label: windows[0].label.expect("checked above"),
                predicted,
                windows: windows.len(),
                logits,
            })
        })
        .collect();
    let predictions = predictions.into_iter().collect::<Result<Vec<_>>>()?;
    let metrics = MetricsReport::from_pairs(predictions.iter().map(|p| (p.label, p.predicted)));
    Ok(ClassificationReport { metrics, predictions })
}
