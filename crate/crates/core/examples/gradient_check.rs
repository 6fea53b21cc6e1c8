//! Compares backpropagated gradients with central finite differences for
//! every parameter tensor of a tiny model and prints the worst relative
//! error per tensor.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use pause_lm::ingest::Label;
use pause_lm::model::{loss_and_gradients, LossWeights, Matrix, Model, ModelConfig, ModelParams};
use pause_lm::rng::{stream_rng, Stream};
use pause_lm::tokenizer::{EncodedSequence, PauseToken, CLS_ID, SEP_ID};
use pause_lm::trainer::make_masking_plan;

fn main() -> pause_lm::Result<()> {
    let cfg = ModelConfig {
        d_model: 8,
        n_layers: 2,
        n_heads: 2,
        d_ff: 16,
        max_seq_len: 8,
        vocab_size: 20,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    };
    let mut model = Model::new(cfg.clone(), 1)?;
    let mut rng = stream_rng(1, Stream::Init, 9);
    for t in model.params.tensors_mut() {
        let noise = Matrix::random_normal(t.rows, t.cols, 0.5, &mut rng);
        t.add_assign(&noise);
    }
    let tok = |d, p| PauseToken { dur_bin: d, pause_bin: p };
    let seq = EncodedSequence {
        transcript_id: "g".into(),
        window: 0,
        word_ids: vec![CLS_ID, 9, 5, 14, SEP_ID],
        pause_tokens: vec![PauseToken::NULL, tok(20, 4), tok(33, 90), tok(8, 0), PauseToken::NULL],
        attention_mask: vec![1; 5],
        label: Some(Label::Ad),
        pause_seconds: vec![0.0, 0.04, 0.9, 0.0, 0.0],
    };
    let batch = [seq];
    let plan = make_masking_plan(&batch, 0.5, 0.5, cfg.vocab_size, &mut stream_rng(1, Stream::Masking, 0));
    let weights = LossWeights { mlm: 1.0, pause: 1.0, cls: 1.0 };
    let loss = |p: &ModelParams| loss_and_gradients(&batch, &plan, p, &cfg, &weights, None).map(|r| r.0.total);
    let (_, grads) = loss_and_gradients(&batch, &plan, &model.params, &cfg, &weights, None)?;

    let h = 1e-5;
    let mut probe = model.params.clone();
    for (t, (name, g)) in grads.named().into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..g.data.len() {
            let orig = probe.tensors()[t].data[i];
            probe.tensors_mut()[t].data[i] = orig + h;
            let up = loss(&probe)?;
            probe.tensors_mut()[t].data[i] = orig - h;
            let down = loss(&probe)?;
            probe.tensors_mut()[t].data[i] = orig;
            let num = (up - down) / (2.0 * h);
            let rel = (g.data[i] - num).abs() / g.data[i].abs().max(num.abs()).max(1e-5);
            worst = worst.max(rel);
        }
        println!("{name:<32} {:>6} params  max rel err {worst:.2e}", g.data.len());
    }
    Ok(())
}
