//! Embedding composition and the post-layer-norm transformer encoder, with
//! hand-written backward passes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::params::{LayerParams, ModelParams};
use super::tensor::{
    affine, affine_backward, gelu, gelu_grad, layer_norm, layer_norm_backward, softmax_in_place, LayerNormCache, Matrix,
};
use crate::error::{Error, Result};
use crate::tokenizer::{PauseToken, N_TIME_ROWS};

/// Sum of word, position and temporal embeddings before layer norm.
///
/// Row `i` is `word[id_i] + pos[i] + concat(dur[d_i], pause[p_i])`. A disabled
/// half is left at zero and its table is never read.
pub fn compose_embeddings(
    word_ids: &[usize],
    pause_tokens: &[PauseToken],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<Matrix> {
    let n = word_ids.len();
    if pause_tokens.len() != n {
        return Err(Error::Argument(format!("{} word ids but {} pause tokens", n, pause_tokens.len())));
    }
    if n > cfg.max_seq_len {
        return Err(Error::Argument(format!("sequence length {n} exceeds max_seq_len {}", cfg.max_seq_len)));
    }
    let d = cfg.d_model;
    let half = cfg.half();
    let mut out = Matrix::zeros(n, d);
    for (i, (&id, tok)) in word_ids.iter().zip(pause_tokens).enumerate() {
        if id >= params.word_table.rows {
            return Err(Error::Argument(format!("word id {id} out of range at position {i}")));
        }
        if tok.dur_bin >= N_TIME_ROWS || tok.pause_bin >= N_TIME_ROWS {
            return Err(Error::Argument(format!("time bin out of range at position {i}: {tok:?}")));
        }
        let row = out.row_mut(i);
        for ((o, &w), &p) in row.iter_mut().zip(params.word_table.row(id)).zip(params.pos_table.row(i)) {
            *o = w + p;
        }
        if !cfg.disable_duration {
            for (o, &v) in row[..half].iter_mut().zip(params.dur_table.row(tok.dur_bin)) {
                *o += v;
            }
        }
        if !cfg.disable_pause {
            for (o, &v) in row[half..].iter_mut().zip(params.pause_table.row(tok.pause_bin)) {
                *o += v;
            }
        }
    }
    Ok(out)
}

fn dropout_mask(n: usize, rate: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Vec<f64>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some((0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect())
}

fn apply_mask(m: &mut Matrix, mask: &Option<Vec<f64>>) {
    if let Some(mask) = mask {
        for (v, s) in m.data.iter_mut().zip(mask) {
            *v *= s;
        }
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    x_in: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Attention probabilities, one `n x n` matrix per head.
    probs: Vec<Matrix>,
    ctx: Matrix,
    drop_attn: Option<Vec<f64>>,
    ln1: LayerNormCache,
    y1: Matrix,
    ff_pre: Matrix,
    ff_act: Matrix,
    drop_ff: Option<Vec<f64>>,
    ln2: LayerNormCache,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    word_ids: Vec<usize>,
    pause_tokens: Vec<PauseToken>,
    emb_ln: LayerNormCache,
    drop_emb: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
}

impl EncoderCache {
    /// Attention probabilities of layer `layer`, head `head`.
    pub fn attention(&self, layer: usize, head: usize) -> &Matrix {
        &self.layers[layer].probs[head]
    }
}

/// Runs embeddings and the encoder stack. `dropout` is `Some` in train mode.
pub fn encode(
    params: &ModelParams,
    cfg: &ModelConfig,
    word_ids: &[usize],
    pause_tokens: &[PauseToken],
    attention_mask: &[u8],
    mut dropout: Option<&mut ChaCha8Rng>,
) -> Result<(Matrix, EncoderCache)> {
    let n = word_ids.len();
    if attention_mask.len() != n {
        return Err(Error::Argument("attention mask length mismatch".into()));
    }
    let key_valid: Vec<bool> = attention_mask.iter().map(|&m| m == 1).collect();
    let summed = compose_embeddings(word_ids, pause_tokens, params, cfg)?;
    let (mut x, emb_ln) = layer_norm(&summed, &params.emb_ln_gamma, &params.emb_ln_beta, cfg.layer_norm_eps);
    let drop_emb = dropout_mask(x.len(), cfg.dropout_rate, dropout.as_deref_mut());
    apply_mask(&mut x, &drop_emb);
    if !x.all_finite() {
        return Err(Error::Numeric("non-finite value after embedding layer norm".into()));
    }

    let mut layers = Vec::with_capacity(params.layers.len());
    for (li, lp) in params.layers.iter().enumerate() {
        let (out, cache) = layer_forward(lp, cfg, x, &key_valid, dropout.as_deref_mut());
        if !out.all_finite() {
            return Err(Error::Numeric(format!("non-finite activation in encoder layer {li}")));
        }
        layers.push(cache);
        x = out;
    }
    Ok((x, EncoderCache { word_ids: word_ids.to_vec(), pause_tokens: pause_tokens.to_vec(), emb_ln, drop_emb, layers }))
}

fn layer_forward(
    lp: &LayerParams,
    cfg: &ModelConfig,
    x: Matrix,
    key_valid: &[bool],
    mut dropout: Option<&mut ChaCha8Rng>,
) -> (Matrix, LayerCache) {
    let n = x.rows;
    let d = cfg.d_model;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let q = affine(&x, &lp.wq, &lp.bq);
    let k = affine(&x, &lp.wk, &lp.bk);
    let v = affine(&x, &lp.wv, &lp.bv);

    let mut ctx = Matrix::zeros(n, d);
    let mut probs = Vec::with_capacity(cfg.n_heads);
    let mut scores = vec![0.0; n];
    let valid: Vec<usize> = (0..n).filter(|&j| key_valid[j]).collect();
    for h in 0..cfg.n_heads {
        let off = h * dh;
        let mut p = Matrix::zeros(n, n);
        for i in 0..n {
            let qi = &q.row(i)[off..off + dh];
            scores.clear();
            for &j in &valid {
                let kj = &k.row(j)[off..off + dh];
                scores.push(qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale);
            }
            softmax_in_place(&mut scores);
            let prow = p.row_mut(i);
            for (&j, &s) in valid.iter().zip(&scores) {
                prow[j] = s;
            }
            let crow = &mut ctx.data[i * d + off..i * d + off + dh];
            for (&j, &s) in valid.iter().zip(&scores) {
                for (c, &vv) in crow.iter_mut().zip(&v.row(j)[off..off + dh]) {
                    *c += s * vv;
                }
            }
        }
        probs.push(p);
    }

    let mut attn_out = affine(&ctx, &lp.wo, &lp.bo);
    let drop_attn = dropout_mask(attn_out.len(), cfg.dropout_rate, dropout.as_deref_mut());
    apply_mask(&mut attn_out, &drop_attn);
    attn_out.add_assign(&x);
    let (y1, ln1) = layer_norm(&attn_out, &lp.ln1_gamma, &lp.ln1_beta, cfg.layer_norm_eps);

    let ff_pre = affine(&y1, &lp.w1, &lp.b1);
    let ff_act = Matrix::from_vec(ff_pre.rows, ff_pre.cols, ff_pre.data.iter().map(|&z| gelu(z)).collect());
    let mut ff_out = affine(&ff_act, &lp.w2, &lp.b2);
    let drop_ff = dropout_mask(ff_out.len(), cfg.dropout_rate, dropout);
    apply_mask(&mut ff_out, &drop_ff);
    ff_out.add_assign(&y1);
    let (out, ln2) = layer_norm(&ff_out, &lp.ln2_gamma, &lp.ln2_beta, cfg.layer_norm_eps);

    (out, LayerCache { x_in: x, q, k, v, probs, ctx, drop_attn, ln1, y1, ff_pre, ff_act, drop_ff, ln2 })
}

/// Backpropagates `d_hidden` (gradient w.r.t. the final hidden states) into
/// `grads`, accumulating.
pub fn backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    cache: &EncoderCache,
    d_hidden: Matrix,
    grads: &mut ModelParams,
) {
    let mut dx = d_hidden;
    for (li, lc) in cache.layers.iter().enumerate().rev() {
        dx = layer_backward(&params.layers[li], cfg, lc, dx, &mut grads.layers[li]);
    }
    apply_mask(&mut dx, &cache.drop_emb);
    let dsum =
        layer_norm_backward(&cache.emb_ln, &params.emb_ln_gamma, &dx, &mut grads.emb_ln_gamma, &mut grads.emb_ln_beta);
    let half = cfg.half();
    for (i, (&id, tok)) in cache.word_ids.iter().zip(&cache.pause_tokens).enumerate() {
        let g = dsum.row(i);
        for (a, &b) in grads.word_table.row_mut(id).iter_mut().zip(g) {
            *a += b;
        }
        for (a, &b) in grads.pos_table.row_mut(i).iter_mut().zip(g) {
            *a += b;
        }
        if !cfg.disable_duration {
            for (a, &b) in grads.dur_table.row_mut(tok.dur_bin).iter_mut().zip(&g[..half]) {
                *a += b;
            }
        }
        if !cfg.disable_pause {
            for (a, &b) in grads.pause_table.row_mut(tok.pause_bin).iter_mut().zip(&g[half..]) {
                *a += b;
            }
        }
    }
}

fn layer_backward(lp: &LayerParams, cfg: &ModelConfig, lc: &LayerCache, d_out: Matrix, g: &mut LayerParams) -> Matrix {
    let n = d_out.rows;
    let d = cfg.d_model;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    // out = LN2(y1 + drop(ffn(y1)))
    let d_res2 = layer_norm_backward(&lc.ln2, &lp.ln2_gamma, &d_out, &mut g.ln2_gamma, &mut g.ln2_beta);
    let mut d_ff_out = d_res2.clone();
    apply_mask(&mut d_ff_out, &lc.drop_ff);
    let mut d_act = affine_backward(&lc.ff_act, &lp.w2, &d_ff_out, &mut g.w2, &mut g.b2);
    for (da, &z) in d_act.data.iter_mut().zip(&lc.ff_pre.data) {
        *da *= gelu_grad(z);
    }
    let mut d_y1 = affine_backward(&lc.y1, &lp.w1, &d_act, &mut g.w1, &mut g.b1);
    d_y1.add_assign(&d_res2);

    // y1 = LN1(x + drop(attn(x)))
    let d_res1 = layer_norm_backward(&lc.ln1, &lp.ln1_gamma, &d_y1, &mut g.ln1_gamma, &mut g.ln1_beta);
    let mut d_attn_out = d_res1.clone();
    apply_mask(&mut d_attn_out, &lc.drop_attn);
    let d_ctx = affine_backward(&lc.ctx, &lp.wo, &d_attn_out, &mut g.wo, &mut g.bo);

    let mut dq = Matrix::zeros(n, d);
    let mut dk = Matrix::zeros(n, d);
    let mut dv = Matrix::zeros(n, d);
    let mut dp = vec![0.0; n];
    for h in 0..cfg.n_heads {
        let off = h * dh;
        let p = &lc.probs[h];
        for i in 0..n {
            let dci = &d_ctx.row(i)[off..off + dh];
            let prow = p.row(i);
            let mut dot = 0.0;
            for j in 0..n {
                if prow[j] == 0.0 {
                    dp[j] = 0.0;
                    continue;
                }
                let vj = &lc.v.row(j)[off..off + dh];
                dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                dot += dp[j] * prow[j];
                let dvj = &mut dv.data[j * d + off..j * d + off + dh];
                for (a, &b) in dvj.iter_mut().zip(dci) {
                    *a += prow[j] * b;
                }
            }
            let qi = &lc.q.row(i)[off..off + dh];
            for j in 0..n {
                if prow[j] == 0.0 {
                    continue;
                }
                let ds = prow[j] * (dp[j] - dot) * scale;
                let kj = &lc.k.row(j)[off..off + dh];
                let dqi = &mut dq.data[i * d + off..i * d + off + dh];
                for (a, &b) in dqi.iter_mut().zip(kj) {
                    *a += ds * b;
                }
                let dkj = &mut dk.data[j * d + off..j * d + off + dh];
                for (a, &b) in dkj.iter_mut().zip(qi) {
                    *a += ds * b;
                }
            }
        }
    }

    let mut dx = d_res1;
    dx.add_assign(&affine_backward(&lc.x_in, &lp.wq, &dq, &mut g.wq, &mut g.bq));
    dx.add_assign(&affine_backward(&lc.x_in, &lp.wk, &dk, &mut g.wk, &mut g.bk));
    dx.add_assign(&affine_backward(&lc.x_in, &lp.wv, &dv, &mut g.wv, &mut g.bv));
    dx
}
