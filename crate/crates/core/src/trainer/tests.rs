use super::*;
use crate::ingest::Label;
use crate::model::{Model, ModelConfig};
use crate::synth::{generate, SynthSpec, TextMode};
use crate::tokenizer::{encode_dataset, Vocabulary};

fn corpus(n_per_group: usize, text_mode: TextMode, seed: u64) -> (Vec<EncodedSequence>, Vocabulary) {
    let spec = SynthSpec { n_per_group, words_min: 8, words_max: 12, text_mode, seed, ..SynthSpec::default() };
    let ts = generate(&spec).unwrap();
    let vocab = Vocabulary::build(&ts, 1).unwrap();
    (encode_dataset(&ts, &vocab, 16).unwrap(), vocab)
}

fn small_model(vocab: &Vocabulary, seed: u64) -> Checkpoint {
    let cfg = ModelConfig {
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        d_ff: 32,
        max_seq_len: 16,
        vocab_size: vocab.len(),
        dropout_rate: 0.1,
        ..ModelConfig::default()
    };
    Checkpoint::new(Model::new(cfg, seed).unwrap(), vocab.fingerprint())
}

fn fast_pretrain(epochs: usize) -> TrainConfig {
    TrainConfig { learning_rate: 3e-3, batch_size: 4, epochs, ..TrainConfig::pretrain() }
}

#[derive(Default)]
struct Recorder {
    logs: Vec<LogEntry>,
    checkpoints: Vec<(CheckpointKind, Checkpoint)>,
}

impl TrainObserver for Recorder {
    fn on_log(&mut self, entry: &LogEntry) -> Result<()> {
        self.logs.push(entry.clone());
        Ok(())
    }

    fn on_checkpoint(&mut self, kind: CheckpointKind, ckpt: &Checkpoint) -> Result<()> {
        self.checkpoints.push((kind, ckpt.clone()));
        Ok(())
    }
}

#[test]
fn pretraining_reduces_loss_and_logs_each_epoch() {
    let (data, vocab) = corpus(8, TextMode::Shared, 1);
    let mut rec = Recorder::default();
    let out = pretrain(&data, small_model(&vocab, 0), &fast_pretrain(6), &mut rec).unwrap();
    assert_eq!(out.log.len(), 6);
    assert_eq!(rec.logs, out.log);
    assert!(out.log.last().unwrap().loss_total < out.log[0].loss_total);
    assert!(out.log.iter().all(|e| e.loss_cls == 0.0 && e.stage == Stage::Pretrain));
    assert_eq!(out.checkpoint.meta.epoch, 6);
    let kinds: Vec<CheckpointKind> = rec.checkpoints.iter().map(|(k, _)| *k).collect();
    assert_eq!(kinds, (1..=6).map(CheckpointKind::Epoch).collect::<Vec<_>>());
}

#[test]
fn same_seed_gives_identical_checkpoint_bytes() {
    let (data, vocab) = corpus(4, TextMode::Shared, 2);
    let run = || pretrain(&data, small_model(&vocab, 3), &fast_pretrain(2), &mut NoopObserver).unwrap();
    assert_eq!(run().checkpoint.to_bytes(), run().checkpoint.to_bytes());
    let other = TrainConfig { seed: 1, ..fast_pretrain(2) };
    let b = pretrain(&data, small_model(&vocab, 3), &other, &mut NoopObserver).unwrap();
    assert_ne!(run().checkpoint.to_bytes(), b.checkpoint.to_bytes());
}

#[test]
fn thread_count_does_not_change_results() {
    let (data, vocab) = corpus(4, TextMode::Shared, 2);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| pretrain(&data, small_model(&vocab, 3), &fast_pretrain(1), &mut NoopObserver).unwrap())
    };
    assert_eq!(run(1).checkpoint.to_bytes(), run(3).checkpoint.to_bytes());
}

#[test]
fn zero_word_mask_rate_gives_zero_mlm_loss() {
    let (data, vocab) = corpus(4, TextMode::Shared, 3);
    let cfg = TrainConfig { word_mask_rate: 0.0, ..fast_pretrain(2) };
    let out = pretrain(&data, small_model(&vocab, 0), &cfg, &mut NoopObserver).unwrap();
    assert!(out.log.iter().all(|e| e.loss_mlm == 0.0 && e.loss_pause > 0.0));
    let init = small_model(&vocab, 0);
    assert_eq!(out.checkpoint.model.params.mlm_w, init.model.params.mlm_w);
    assert_eq!(out.checkpoint.model.params.mlm_b, init.model.params.mlm_b);
}

#[test]
fn nothing_to_learn_is_reported() {
    let (data, vocab) = corpus(2, TextMode::Shared, 3);
    let cfg = TrainConfig { word_mask_rate: 0.0, pause_mask_rate: 0.0, ..fast_pretrain(1) };
    let out = pretrain(&data, small_model(&vocab, 0), &cfg, &mut NoopObserver).unwrap();
    assert!(out.log.is_empty());
    assert_eq!(out.skipped_batches, 1);
    assert_eq!(out.checkpoint.model, small_model(&vocab, 0).model);
}

#[test]
fn zero_weight_terms_contribute_no_gradient() {
    let (data, vocab) = corpus(2, TextMode::Shared, 4);
    let ckpt = small_model(&vocab, 0);
    let mut rng = stream_rng(0, Stream::Masking, 0);
    let plan = make_masking_plan(&data, 0.5, 0.5, vocab.len(), &mut rng);
    let cfg = &ckpt.model.config;
    let w = LossWeights { mlm: 0.0, pause: 1.0, cls: 0.0 };
    let (loss, grads) = loss_and_gradients(&data, &plan, &ckpt.model.params, cfg, &w, None).unwrap();
    assert!(loss.mlm > 0.0 && loss.cls > 0.0);
    assert_eq!(loss.total, loss.pause);
    assert!(grads.mlm_w.data.iter().all(|&g| g == 0.0));
    assert!(grads.cls_w.data.iter().all(|&g| g == 0.0));
    assert!(grads.pause_w.data.iter().any(|&g| g != 0.0));
}

#[test]
fn finetune_with_zero_iterations_returns_init() {
    let (data, vocab) = corpus(3, TextMode::Shared, 5);
    let init = small_model(&vocab, 7);
    let cfg = TrainConfig { iterations: Some(0), ..TrainConfig::finetune() };
    let out = finetune(&data, init.clone(), &cfg, &mut NoopObserver).unwrap();
    assert_eq!(out.checkpoint.model, init.model);
    assert!(out.log.is_empty());
}

#[test]
fn finetune_rejects_unlabeled_data_and_wrong_stage() {
    let (mut data, vocab) = corpus(2, TextMode::Shared, 5);
    data[1].label = None;
    let err = finetune(&data, small_model(&vocab, 0), &TrainConfig::finetune(), &mut NoopObserver).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    let err = finetune(&data, small_model(&vocab, 0), &TrainConfig::pretrain(), &mut NoopObserver).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn finetune_counts_optimizer_steps() {
    let (data, vocab) = corpus(3, TextMode::Shared, 5);
    let cfg = TrainConfig { iterations: Some(5), batch_size: 4, ..TrainConfig::finetune() };
    let out = finetune(&data, small_model(&vocab, 0), &cfg, &mut NoopObserver).unwrap();
    assert_eq!(out.checkpoint.meta.iteration, 5);
    assert_eq!(out.checkpoint.meta.stage, "finetune");
    assert_eq!(out.log.last().unwrap().iteration, 5);
}

#[test]
fn resumed_pretraining_matches_uninterrupted_run() {
    let (data, vocab) = corpus(4, TextMode::Shared, 6);
    let full = pretrain(&data, small_model(&vocab, 1), &fast_pretrain(4), &mut NoopObserver).unwrap();
    let mut rec = Recorder::default();
    pretrain(&data, small_model(&vocab, 1), &fast_pretrain(4), &mut rec).unwrap();
    let (_, after_two) = rec.checkpoints.iter().find(|(k, _)| *k == CheckpointKind::Epoch(2)).unwrap();
    let reloaded = Checkpoint::from_bytes(&after_two.to_bytes()).unwrap();
    let resumed = pretrain(&data, reloaded, &fast_pretrain(4), &mut NoopObserver).unwrap();
    assert_eq!(resumed.checkpoint.to_bytes(), full.checkpoint.to_bytes());
    assert_eq!(resumed.log.len(), 2);
}

#[test]
fn temporal_only_freezes_everything_else() {
    let (data, vocab) = corpus(3, TextMode::Shared, 7);
    let init = small_model(&vocab, 2);
    let cfg = TrainConfig { temporal_only: true, ..fast_pretrain(1) };
    let out = pretrain(&data, init.clone(), &cfg, &mut NoopObserver).unwrap();
    let before = init.model.params.named();
    let after = out.checkpoint.model.params.named();
    for ((name, a), (_, b)) in before.iter().zip(&after) {
        let temporal = name.starts_with("embeddings.duration") || name.starts_with("embeddings.pause");
        assert_eq!(a == b, !temporal, "{name}");
    }
}

#[test]
fn separable_labels_are_learned() {
    let (data, vocab) = corpus(6, TextMode::GroupSpecific, 8);
    let cfg = TrainConfig { learning_rate: 3e-3, iterations: Some(60), ..TrainConfig::finetune() };
    let out = finetune(&data, small_model(&vocab, 0), &cfg, &mut NoopObserver).unwrap();
    let model = &out.checkpoint.model;
    for seq in &data {
        let l = model.cls_logits(seq).unwrap();
        let predicted = if l[1] > l[0] { Label::Ad } else { Label::Control };
        assert_eq!(Some(predicted), seq.label, "{}", seq.transcript_id);
    }
}

#[test]
fn invalid_configs_fail_validation() {
    for cfg in [
        TrainConfig { learning_rate: 0.0, ..TrainConfig::pretrain() },
        TrainConfig { batch_size: 0, ..TrainConfig::pretrain() },
        TrainConfig { word_mask_rate: 1.5, ..TrainConfig::pretrain() },
        TrainConfig { loss_weights: LossWeights { mlm: 0.0, pause: 0.0, cls: 0.0 }, ..TrainConfig::pretrain() },
    ] {
        assert!(cfg.validate().is_err());
    }
}
