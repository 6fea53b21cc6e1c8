//! Fine-tunes the classifier head and encoder on labeled synthetic
//! transcripts and prints transcript-level metrics on a held-out set.
//!
//! ```text
//! cargo run --release --example finetune_classifier
//! ```

use pause_lm::eval::eval_classification;
use pause_lm::model::{Checkpoint, Model, ModelConfig};
use pause_lm::synth::{generate, SynthSpec};
use pause_lm::tokenizer::{encode_dataset, Vocabulary};
use pause_lm::trainer::{finetune, NoopObserver, TrainConfig};

fn main() -> pause_lm::Result<()> {
    let train = generate(&SynthSpec { n_per_group: 80, seed: 21, ..SynthSpec::default() })?;
    let test = generate(&SynthSpec { n_per_group: 40, seed: 22, id_prefix: "test".into(), ..SynthSpec::default() })?;
    let vocab = Vocabulary::build(&train, 1)?;
    let cfg = ModelConfig {
        d_model: 32,
        n_heads: 4,
        d_ff: 64,
        max_seq_len: 24,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    // 24 positions force each transcript into two windows whose logits are averaged.
    let train_seqs = encode_dataset(&train, &vocab, cfg.max_seq_len)?;
    let test_seqs = encode_dataset(&test, &vocab, cfg.max_seq_len)?;
    let init = Checkpoint::new(Model::new(cfg, 0)?, vocab.fingerprint());
    let tc = TrainConfig { learning_rate: 1e-3, batch_size: 8, iterations: Some(150), ..TrainConfig::finetune() };
    let out = finetune(&train_seqs, init, &tc, &mut NoopObserver)?;
    for e in &out.log {
        println!("epoch {:>2}  step {:>4}  cls loss {:.4}", e.epoch, e.iteration, e.loss_cls);
    }
    let report = eval_classification(&test_seqs, &out.checkpoint.model)?;
    let p = &report.metrics.percent;
    println!(
        "held-out: accuracy {:.1}  precision {:.1}  recall {:.1}  F1 {:.1}  ({:?})",
        p.accuracy, p.precision, p.recall, p.f1, report.metrics.confusion
    );
    Ok(())
}
