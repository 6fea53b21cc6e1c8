//! Trains the full model and the temporal-ablated variants on a synthetic
//! corpus whose only label signal is pause length, then reports held-out
//! accuracy for each.
//!
//! ```text
//! cargo run --release --example ablation_sweep [n_per_group]
//! ```

use std::time::Instant;

use pause_lm::eval::eval_classification;
use pause_lm::model::{Checkpoint, Model, ModelConfig};
use pause_lm::synth::{generate, SynthSpec};
use pause_lm::tokenizer::{encode_dataset, Vocabulary};
use pause_lm::trainer::{finetune, pretrain, NoopObserver, TrainConfig};

fn main() -> pause_lm::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().expect("n_per_group")).unwrap_or(200);
    let train = generate(&SynthSpec { n_per_group: n, seed: 1, ..SynthSpec::default() })?;
    let test =
        generate(&SynthSpec { n_per_group: n / 2, seed: 2, id_prefix: "heldout".into(), ..SynthSpec::default() })?;
    let vocab = Vocabulary::build(&train, 1)?;
    let base = ModelConfig {
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        d_ff: 64,
        max_seq_len: 48,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    let train_seqs = encode_dataset(&train, &vocab, base.max_seq_len)?;
    let test_seqs = encode_dataset(&test, &vocab, base.max_seq_len)?;

    let pre =
        TrainConfig { learning_rate: 1e-3, batch_size: 16, epochs: 4, checkpoint_every: 0, ..TrainConfig::pretrain() };
    let fine = TrainConfig { learning_rate: 1e-3, batch_size: 16, iterations: Some(200), ..TrainConfig::finetune() };

    println!("{:<24} {:>9} {:>9}", "variant", "accuracy", "seconds");
    for (name, disable_duration, disable_pause) in [
        ("full", false, false),
        ("no duration", true, false),
        ("no pause", false, true),
        ("no duration, no pause", true, true),
    ] {
        let started = Instant::now();
        let cfg = ModelConfig { disable_duration, disable_pause, ..base.clone() };
        let init = Checkpoint::new(Model::new(cfg, 0)?, vocab.fingerprint());
        let stage1 = pretrain(&train_seqs, init, &pre, &mut NoopObserver)?;
        let stage2 = finetune(&train_seqs, stage1.checkpoint, &fine, &mut NoopObserver)?;
        let report = eval_classification(&test_seqs, &stage2.checkpoint.model)?;
        println!("{:<24} {:>8.1}% {:>9.1}", name, report.metrics.percent.accuracy, started.elapsed().as_secs_f64());
    }
    Ok(())
}
