use rand::Rng;

use super::config::ModelConfig;
use super::tensor::Matrix;
use crate::tokenizer::{N_BINS, N_TIME_ROWS};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Matrix,
    pub bq: Matrix,
    pub wk: Matrix,
    pub bk: Matrix,
    pub wv: Matrix,
    pub bv: Matrix,
    pub wo: Matrix,
    pub bo: Matrix,
    pub ln1_gamma: Matrix,
    pub ln1_beta: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub ln2_gamma: Matrix,
    pub ln2_beta: Matrix,
}

/// Every trainable tensor. Gradients and Adam moments reuse this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub word_table: Matrix,
    pub pos_table: Matrix,
    pub dur_table: Matrix,
    pub pause_table: Matrix,
    pub emb_ln_gamma: Matrix,
    pub emb_ln_beta: Matrix,
    pub layers: Vec<LayerParams>,
    pub mlm_w: Matrix,
    pub mlm_b: Matrix,
    pub pause_w: Matrix,
    pub pause_b: Matrix,
    pub cls_w: Matrix,
    pub cls_b: Matrix,
}

const LAYER_TENSORS: [&str; 16] = [
    "attn.q.weight",
    "attn.q.bias",
    "attn.k.weight",
    "attn.k.bias",
    "attn.v.weight",
    "attn.v.bias",
    "attn.out.weight",
    "attn.out.bias",
    "ln1.gamma",
    "ln1.beta",
    "ffn.in.weight",
    "ffn.in.bias",
    "ffn.out.weight",
    "ffn.out.bias",
    "ln2.gamma",
    "ln2.beta",
];

impl LayerParams {
    fn build(cfg: &ModelConfig, weight: &mut dyn FnMut(usize, usize) -> Matrix) -> Self {
        let d = cfg.d_model;
        LayerParams {
            wq: weight(d, d),
            bq: Matrix::zeros(1, d),
            wk: weight(d, d),
            bk: Matrix::zeros(1, d),
            wv: weight(d, d),
            bv: Matrix::zeros(1, d),
            wo: weight(d, d),
            bo: Matrix::zeros(1, d),
            ln1_gamma: Matrix::filled(1, d, 1.0),
            ln1_beta: Matrix::zeros(1, d),
            w1: weight(d, cfg.d_ff),
            b1: Matrix::zeros(1, cfg.d_ff),
            w2: weight(cfg.d_ff, d),
            b2: Matrix::zeros(1, d),
            ln2_gamma: Matrix::filled(1, d, 1.0),
            ln2_beta: Matrix::zeros(1, d),
        }
    }

    fn tensors(&self) -> [&Matrix; 16] {
        [
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln1_gamma,
            &self.ln1_beta,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.ln2_gamma,
            &self.ln2_beta,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 16] {
        [
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln1_gamma,
            &mut self.ln1_beta,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln2_gamma,
            &mut self.ln2_beta,
        ]
    }
}

impl ModelParams {
    /// BERT-style init: N(0, init_std) weights and tables, unit LN gains,
    /// zero biases.
    pub fn init<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let std = cfg.init_std;
        Self::build(cfg, &mut |r, c| Matrix::random_normal(r, c, std, rng))
    }

    /// Zero weights and tables; layer-norm gains stay at 1.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self::build(cfg, &mut Matrix::zeros)
    }

    fn build(cfg: &ModelConfig, weight: &mut dyn FnMut(usize, usize) -> Matrix) -> Self {
        let d = cfg.d_model;
        let word_table = weight(cfg.vocab_size, d);
        let pos_table = weight(cfg.max_seq_len, d);
        let dur_table = weight(N_TIME_ROWS, cfg.half());
        let pause_table = weight(N_TIME_ROWS, cfg.half());
        let layers = (0..cfg.n_layers).map(|_| LayerParams::build(cfg, weight)).collect();
        ModelParams {
            word_table,
            pos_table,
            dur_table,
            pause_table,
            emb_ln_gamma: Matrix::filled(1, d, 1.0),
            emb_ln_beta: Matrix::zeros(1, d),
            layers,
            mlm_w: weight(d, cfg.vocab_size),
            mlm_b: Matrix::zeros(1, cfg.vocab_size),
            pause_w: weight(d, N_BINS),
            pause_b: Matrix::zeros(1, N_BINS),
            cls_w: weight(d, 2),
            cls_b: Matrix::zeros(1, 2),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Stable names in a fixed order, used by checkpoints and diagnostics.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = [
            "embeddings.word",
            "embeddings.position",
            "embeddings.duration",
            "embeddings.pause",
            "embeddings.ln.gamma",
            "embeddings.ln.beta",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 0..self.layers.len() {
            out.extend(LAYER_TENSORS.iter().map(|t| format!("encoder.{i}.{t}")));
        }
        out.extend(
            [
                "heads.mlm.weight",
                "heads.mlm.bias",
                "heads.pause.weight",
                "heads.pause.bias",
                "heads.cls.weight",
                "heads.cls.bias",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        out
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = vec![
            &self.word_table,
            &self.pos_table,
            &self.dur_table,
            &self.pause_table,
            &self.emb_ln_gamma,
            &self.emb_ln_beta,
        ];
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.extend([&self.mlm_w, &self.mlm_b, &self.pause_w, &self.pause_b, &self.cls_w, &self.cls_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![
            &mut self.word_table,
            &mut self.pos_table,
            &mut self.dur_table,
            &mut self.pause_table,
            &mut self.emb_ln_gamma,
            &mut self.emb_ln_beta,
        ];
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.extend([
            &mut self.mlm_w,
            &mut self.mlm_b,
            &mut self.pause_w,
            &mut self.pause_b,
            &mut self.cls_w,
            &mut self.cls_b,
        ]);
        out
    }

    pub fn named(&self) -> Vec<(String, &Matrix)> {
        self.names().into_iter().zip(self.tensors()).collect()
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.sum_sq()).sum::<f64>().sqrt()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    /// Shapes implied by a config, in [`names`](Self::names) order.
    pub fn expected_shapes(cfg: &ModelConfig) -> Vec<(usize, usize)> {
        let d = cfg.d_model;
        let mut out = vec![
            (cfg.vocab_size, d),
            (cfg.max_seq_len, d),
            (N_TIME_ROWS, cfg.half()),
            (N_TIME_ROWS, cfg.half()),
            (1, d),
            (1, d),
        ];
        for _ in 0..cfg.n_layers {
            out.extend([
                (d, d),
                (1, d),
                (d, d),
                (1, d),
                (d, d),
                (1, d),
                (d, d),
                (1, d),
                (1, d),
                (1, d),
                (d, cfg.d_ff),
                (1, cfg.d_ff),
                (cfg.d_ff, d),
                (1, d),
                (1, d),
                (1, d),
            ]);
        }
        out.extend([(d, cfg.vocab_size), (1, cfg.vocab_size), (d, N_BINS), (1, N_BINS), (d, 2), (1, 2)]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_tensors_and_shapes_line_up() {
        let cfg = ModelConfig {
            vocab_size: 20,
            d_model: 8,
            n_heads: 2,
            d_ff: 16,
            max_seq_len: 8,
            n_layers: 2,
            ..Default::default()
        };
        let p = ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let names = p.names();
        let shapes = ModelParams::expected_shapes(&cfg);
        let tensors = p.tensors();
        assert_eq!(names.len(), tensors.len());
        assert_eq!(shapes.len(), tensors.len());
        for (t, s) in tensors.iter().zip(&shapes) {
            assert_eq!((t.rows, t.cols), *s);
        }
        // NULL_BIN rows exist in both temporal tables
        assert_eq!(p.dur_table.rows, 301);
        assert_eq!(p.pause_table.rows, 301);
        assert_eq!(p.pause_w.cols, 300);
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }
}
