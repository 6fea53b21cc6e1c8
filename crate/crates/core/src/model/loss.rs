//! Masked-word, masked-pause and classification losses with exact gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::encoder::{backward, encode};
use super::params::ModelParams;
use super::tensor::{softmax_in_place, Matrix};
use crate::error::{Error, Result};
use crate::tokenizer::EncodedSequence;
use crate::trainer::masking::{MaskingPlan, SequencePlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub mlm: f64,
    pub pause: f64,
    pub cls: f64,
}

impl LossWeights {
    pub const PRETRAIN: LossWeights = LossWeights { mlm: 1.0, pause: 1.0, cls: 0.0 };
    pub const FINETUNE: LossWeights = LossWeights { mlm: 0.0, pause: 0.0, cls: 1.0 };
}

/// Mean cross-entropy per term (unweighted) and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mlm: f64,
    pub pause: f64,
    pub cls: f64,
}

/// Cross-entropy of one hidden row through a linear head. Returns the loss
/// and `softmax - onehot`.
fn head_ce(h: &[f64], w: &Matrix, b: &Matrix, target: usize) -> (f64, Vec<f64>) {
    let mut logits = b.data.clone();
    for (k, &hv) in h.iter().enumerate() {
        for (l, &wv) in logits.iter_mut().zip(w.row(k)) {
            *l += hv * wv;
        }
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    softmax_in_place(&mut logits);
    logits[target] -= 1.0;
    (loss, logits)
}

/// Accumulates a head's parameter gradients for `scale * dlogits` and adds
/// the input gradient into `dh`.
fn head_backward(h: &[f64], w: &Matrix, dlogits: &[f64], scale: f64, dw: &mut Matrix, db: &mut Matrix, dh: &mut [f64]) {
    for (bv, &g) in db.data.iter_mut().zip(dlogits) {
        *bv += scale * g;
    }
    for (k, &hv) in h.iter().enumerate() {
        let wrow = w.row(k);
        let dwrow = &mut dw.data[k * w.cols..(k + 1) * w.cols];
        let mut acc = 0.0;
        for ((dwv, &wv), &g) in dwrow.iter_mut().zip(wrow).zip(dlogits) {
            *dwv += hv * scale * g;
            acc += wv * g;
        }
        dh[k] += scale * acc;
    }
}

struct Scales {
    mlm: f64,
    pause: f64,
    cls: f64,
}

struct SeqResult {
    mlm_sum: f64,
    pause_sum: f64,
    cls_sum: f64,
    grads: ModelParams,
}

fn sequence_loss(
    seq: &EncodedSequence,
    plan: &SequencePlan,
    params: &ModelParams,
    cfg: &ModelConfig,
    weights: &LossWeights,
    scales: &Scales,
    dropout_seed: Option<u64>,
) -> Result<SeqResult> {
    let seq = seq.trimmed();
    let (ids, toks) = plan.apply(&seq);
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let (hidden, cache) = encode(params, cfg, &ids, &toks, &seq.attention_mask, rng.as_mut())?;
    let mut grads = params.zeros_like();
    let mut d_hidden = Matrix::zeros(hidden.rows, hidden.cols);
    let (mut mlm_sum, mut pause_sum, mut cls_sum) = (0.0, 0.0, 0.0);

    for w in &plan.words {
        let h = hidden.row(w.position);
        let (loss, dl) = head_ce(h, &params.mlm_w, &params.mlm_b, w.original);
        mlm_sum += loss;
        if weights.mlm != 0.0 {
            head_backward(
                h,
                &params.mlm_w,
                &dl,
                scales.mlm,
                &mut grads.mlm_w,
                &mut grads.mlm_b,
                d_hidden.row_mut(w.position),
            );
        }
    }
    for p in &plan.pauses {
        let h = hidden.row(p.position);
        let (loss, dl) = head_ce(h, &params.pause_w, &params.pause_b, p.original.pause_bin);
        pause_sum += loss;
        if weights.pause != 0.0 {
            head_backward(
                h,
                &params.pause_w,
                &dl,
                scales.pause,
                &mut grads.pause_w,
                &mut grads.pause_b,
                d_hidden.row_mut(p.position),
            );
        }
    }
    if let Some(label) = seq.label {
        let h = hidden.row(0);
        let (loss, dl) = head_ce(h, &params.cls_w, &params.cls_b, label.as_index());
        cls_sum += loss;
        if weights.cls != 0.0 {
            head_backward(h, &params.cls_w, &dl, scales.cls, &mut grads.cls_w, &mut grads.cls_b, d_hidden.row_mut(0));
        }
    }
    backward(params, cfg, &cache, d_hidden, &mut grads);
    Ok(SeqResult { mlm_sum, pause_sum, cls_sum, grads })
}

/// Weighted sum of mean cross-entropies over masked words, masked pauses and
/// labeled sequences, plus its gradient for every parameter.
///
/// `dropout_seed` enables train-mode dropout; each sequence derives its own
/// stream from it so results do not depend on thread count.
pub fn loss_and_gradients(
    batch: &[EncodedSequence],
    plan: &MaskingPlan,
    params: &ModelParams,
    cfg: &ModelConfig,
    weights: &LossWeights,
    dropout_seed: Option<u64>,
) -> Result<(LossBreakdown, ModelParams)> {
    if plan.sequences.len() != batch.len() {
        return Err(Error::Argument(format!(
            "masking plan covers {} sequences, batch has {}",
            plan.sequences.len(),
            batch.len()
        )));
    }
    if weights.mlm == 0.0 && weights.pause == 0.0 && weights.cls == 0.0 {
        return Err(Error::Argument("all loss weights are zero".into()));
    }
    let n_mlm = plan.masked_words();
    let n_pause = plan.masked_pauses();
    let n_cls = batch.iter().filter(|s| s.label.is_some()).count();
    let active =
        (weights.mlm != 0.0 && n_mlm > 0) || (weights.pause != 0.0 && n_pause > 0) || (weights.cls != 0.0 && n_cls > 0);
    if !active {
        return Err(Error::NoLossSource);
    }
    let per = |w: f64, n: usize| if n > 0 { w / n as f64 } else { 0.0 };
    let scales =
        Scales { mlm: per(weights.mlm, n_mlm), pause: per(weights.pause, n_pause), cls: per(weights.cls, n_cls) };

    let results: Vec<Result<SeqResult>> = batch
        .par_iter()
        .zip(plan.sequences.par_iter())
        .enumerate()
        .map(|(i, (seq, sp))| {
            let seed = dropout_seed.map(|s| crate::rng::mix(s, i as u64));
            sequence_loss(seq, sp, params, cfg, weights, &scales, seed)
        })
        .collect();

    let mut grads = params.zeros_like();
    let (mut mlm, mut pause, mut cls) = (0.0, 0.0, 0.0);
    for r in results {
        let r = r?;
        mlm += r.mlm_sum;
        pause += r.pause_sum;
        cls += r.cls_sum;
        grads.add_assign(&r.grads);
    }
    let mean = |s: f64, n: usize| if n > 0 { s / n as f64 } else { 0.0 };
    let breakdown =
        LossBreakdown { mlm: mean(mlm, n_mlm), pause: mean(pause, n_pause), cls: mean(cls, n_cls), total: 0.0 };
    let total = weights.mlm * breakdown.mlm + weights.pause * breakdown.pause + weights.cls * breakdown.cls;
    if !total.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {total}")));
    }
    Ok((LossBreakdown { total, ..breakdown }, grads))
}
