//! Pretrains with masked word and masked pause prediction, saving a
//! resumable checkpoint per epoch, then resumes from the midpoint and
//! confirms the result matches the uninterrupted run.
//!
//! ```text
//! cargo run --release --example pretrain_mlm
//! ```

use pause_lm::model::{Checkpoint, Model, ModelConfig};
use pause_lm::synth::{generate, SynthSpec};
use pause_lm::tokenizer::{encode_dataset, Vocabulary};
use pause_lm::trainer::{pretrain, CheckpointKind, LogEntry, TrainConfig, TrainObserver};

#[derive(Default)]
struct Keep(Vec<(u64, Checkpoint)>);

impl TrainObserver for Keep {
    fn on_log(&mut self, e: &LogEntry) -> pause_lm::Result<()> {
        println!(
            "epoch {:>2}  step {:>4}  mlm {:.3}  pause {:.3}  ({} ms)",
            e.epoch, e.iteration, e.loss_mlm, e.loss_pause, e.wall_ms
        );
        Ok(())
    }

    fn on_checkpoint(&mut self, kind: CheckpointKind, c: &Checkpoint) -> pause_lm::Result<()> {
        if let CheckpointKind::Epoch(n) = kind {
            self.0.push((n, c.clone()));
        }
        Ok(())
    }
}

fn main() -> pause_lm::Result<()> {
    let corpus = generate(&SynthSpec { n_per_group: 40, seed: 5, ..SynthSpec::default() })?;
    let vocab = Vocabulary::build(&corpus, 1)?;
    let cfg = ModelConfig {
        d_model: 32,
        n_heads: 4,
        d_ff: 64,
        max_seq_len: 48,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    let data = encode_dataset(&corpus, &vocab, cfg.max_seq_len)?;
    let init = Checkpoint::new(Model::new(cfg, 0)?, vocab.fingerprint());
    let tc = TrainConfig { learning_rate: 1e-3, batch_size: 8, epochs: 6, ..TrainConfig::pretrain() };

    let mut keep = Keep::default();
    let full = pretrain(&data, init, &tc, &mut keep)?;
    let (_, midpoint) = keep.0.iter().find(|(n, _)| *n == 3).expect("epoch 3 checkpoint");
    let restored = Checkpoint::from_bytes(&midpoint.to_bytes())?;
    println!("resuming from epoch {} ...", restored.meta.epoch);
    let resumed = pretrain(&data, restored, &tc, &mut Keep::default())?;
    let same = resumed.checkpoint.to_bytes() == full.checkpoint.to_bytes();
    println!("resumed run byte-identical to uninterrupted run: {same}");
    Ok(())
}
