//! Pretrains on control-like timing only, then measures leave-one-out
//! masked-pause RMSE on held-out control-like and AD-like transcripts.
//!
//! ```text
//! cargo run --release --example masked_pause_rmse
//! ```

use pause_lm::eval::{eval_masked_pause, MaskSweep};
use pause_lm::ingest::Label;
use pause_lm::model::{Checkpoint, Model, ModelConfig};
use pause_lm::synth::{generate, SynthSpec};
use pause_lm::tokenizer::{encode_dataset, Vocabulary};
use pause_lm::trainer::{pretrain, NoopObserver, TrainConfig};

fn main() -> pause_lm::Result<()> {
    let control_only =
        SynthSpec { ad: SynthSpec::default().control, n_per_group: 100, seed: 11, ..SynthSpec::default() };
    let corpus = generate(&control_only)?;
    let heldout: Vec<_> =
        generate(&SynthSpec { n_per_group: 40, seed: 12, id_prefix: "heldout".into(), ..SynthSpec::default() })?;
    let vocab = Vocabulary::build(&corpus, 1)?;
    let cfg = ModelConfig {
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        d_ff: 64,
        max_seq_len: 48,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    };
    let train = encode_dataset(&corpus, &vocab, cfg.max_seq_len)?;
    let test = encode_dataset(&heldout, &vocab, cfg.max_seq_len)?;
    let init = Checkpoint::new(Model::new(cfg, 0)?, vocab.fingerprint());
    let tc =
        TrainConfig { learning_rate: 1e-3, batch_size: 16, epochs: 5, checkpoint_every: 0, ..TrainConfig::pretrain() };
    let out = pretrain(&train, init, &tc, &mut NoopObserver)?;
    for e in &out.log {
        println!("epoch {:>2}  mlm {:.3}  pause {:.3}", e.epoch, e.loss_mlm, e.loss_pause);
    }

    let report = eval_masked_pause(&test, &out.checkpoint.model, MaskSweep::LeaveOneOut)?;
    println!("{} forward passes", report.forward_passes);
    for label in [Label::Control, Label::Ad] {
        let g = &report.groups[label.name()];
        println!("{:<8} mean {:.4}  min {:.4}  max {:.4}", label.name(), g.mean, g.min, g.max);
    }
    let ratio = report.groups["ad"].mean / report.groups["control"].mean;
    println!("AD-like / control-like mean RMSE = {ratio:.3}");
    Ok(())
}
