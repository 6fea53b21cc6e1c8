use super::*;
use crate::ingest::Label;
use crate::tokenizer::{Vocabulary, CLS_ID, NULL_BIN, PAD_ID, SEP_ID};
use crate::trainer::masking::{MaskedPause, MaskedWord, SequencePlan, WordAction};
use crate::trainer::MaskingPlan;

fn tiny_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        d_ff: 16,
        max_seq_len: 8,
        vocab_size: 20,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    }
}

/// `[CLS] w w w w [SEP] [PAD] [PAD]`.
fn padded_sequence() -> EncodedSequence {
    let tok = |d, p| PauseToken { dur_bin: d, pause_bin: p };
    EncodedSequence {
        transcript_id: "t".into(),
        window: 0,
        word_ids: vec![CLS_ID, 7, 9, 11, 5, SEP_ID, PAD_ID, PAD_ID],
        pause_tokens: vec![
            PauseToken::NULL,
            tok(12, 3),
            tok(40, 0),
            tok(25, 120),
            tok(7, 299),
            PauseToken::NULL,
            PauseToken::NULL,
            PauseToken::NULL,
        ],
        attention_mask: vec![1, 1, 1, 1, 1, 1, 0, 0],
        label: Some(Label::Ad),
        pause_seconds: vec![0.0, 0.035, 0.0, 1.2, 2.995, 0.0, 0.0, 0.0],
    }
}

fn randomized(cfg: &ModelConfig, seed: u64) -> Model {
    let mut m = Model::new(cfg.clone(), seed).unwrap();
    // Push away from the near-identity layer-norm init so every path matters.
    let mut rng = stream_rng(seed, Stream::Init, 1);
    for t in m.params.tensors_mut() {
        let noise = Matrix::random_normal(t.rows, t.cols, 0.3, &mut rng);
        t.add_assign(&noise);
    }
    m
}

#[test]
fn output_shapes() {
    let cfg = tiny_config();
    let m = Model::new(cfg.clone(), 1).unwrap();
    let out = m.forward(&padded_sequence(), Mode::Eval).unwrap();
    assert_eq!((out.hidden_states.rows, out.hidden_states.cols), (8, 8));
    assert_eq!((out.mlm_logits.rows, out.mlm_logits.cols), (8, 20));
    assert_eq!((out.pause_logits.rows, out.pause_logits.cols), (8, 300));
    let shapes: Vec<(usize, usize)> = m.params.tensors().iter().map(|t| (t.rows, t.cols)).collect();
    assert_eq!(shapes, ModelParams::expected_shapes(&cfg));
    assert_eq!(m.params.dur_table.rows, NULL_BIN + 1);
    assert_eq!(m.params.dur_table.cols, 4);
}

#[test]
fn padding_gets_zero_attention_and_does_not_leak() {
    let cfg = tiny_config();
    let m = randomized(&cfg, 2);
    let seq = padded_sequence();
    let (_, cache) =
        encoder::encode(&m.params, &cfg, &seq.word_ids, &seq.pause_tokens, &seq.attention_mask, None).unwrap();
    for h in 0..cfg.n_heads {
        let a = cache.attention(0, h);
        for q in 0..8 {
            assert_eq!(a.get(q, 6), 0.0);
            assert_eq!(a.get(q, 7), 0.0);
            let s: f64 = a.row(q).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
    let full = m.forward(&seq, Mode::Eval).unwrap();
    let mut other = seq.clone();
    other.word_ids[6] = 13;
    other.pause_tokens[7] = PauseToken { dur_bin: 1, pause_bin: 2 };
    let changed = m.forward(&other, Mode::Eval).unwrap();
    for r in 0..6 {
        assert_eq!(full.hidden_states.row(r), changed.hidden_states.row(r));
    }
    let trimmed = m.forward(&seq.trimmed(), Mode::Eval).unwrap();
    for r in 0..6 {
        assert_eq!(full.hidden_states.row(r), trimmed.hidden_states.row(r));
    }
}

#[test]
fn eval_is_deterministic_and_train_dropout_is_seeded() {
    let cfg = ModelConfig { dropout_rate: 0.3, ..tiny_config() };
    let m = Model::new(cfg, 3).unwrap();
    let seq = padded_sequence();
    assert_eq!(m.forward(&seq, Mode::Eval).unwrap(), m.forward(&seq, Mode::Eval).unwrap());
    let a = m.forward(&seq, Mode::Train { seed: 5 }).unwrap();
    assert_eq!(a, m.forward(&seq, Mode::Train { seed: 5 }).unwrap());
    assert_ne!(a, m.forward(&seq, Mode::Train { seed: 6 }).unwrap());
    assert_ne!(a, m.forward(&seq, Mode::Eval).unwrap());
}

#[test]
fn same_seed_same_init() {
    let a = Model::new(tiny_config(), 9).unwrap();
    assert_eq!(a, Model::new(tiny_config(), 9).unwrap());
    assert_ne!(a, Model::new(tiny_config(), 10).unwrap());
}

#[test]
fn one_hot_probe_recovers_each_table_row() {
    let cfg = tiny_config();
    let mut params = ModelParams::zeros(&cfg);
    params.word_table.row_mut(7)[0] = 1.0;
    params.pos_table.row_mut(1)[1] = 10.0;
    params.dur_table.row_mut(12)[2] = 100.0;
    params.pause_table.row_mut(3)[3] = 1000.0;
    let toks = [PauseToken::NULL, PauseToken { dur_bin: 12, pause_bin: 3 }];
    let e = compose_embeddings(&[CLS_ID, 7], &toks, &params, &cfg).unwrap();
    assert_eq!(e.row(0), &[0.0; 8]);
    assert_eq!(e.row(1), &[1.0, 10.0, 100.0, 0.0, 0.0, 0.0, 0.0, 1000.0]);
}

#[test]
fn ablation_flags_zero_their_half() {
    let cfg = ModelConfig { disable_pause: true, ..tiny_config() };
    let mut params = ModelParams::zeros(&cfg);
    params.dur_table.data.fill(1.0);
    params.pause_table.data.fill(2.0);
    let e = compose_embeddings(&[5], &[PauseToken { dur_bin: 0, pause_bin: 0 }], &params, &cfg).unwrap();
    assert_eq!(e.row(0), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn uniform_heads_give_log_classes() {
    let cfg = tiny_config();
    let params = ModelParams::zeros(&cfg);
    let seq = padded_sequence();
    let plan = MaskingPlan {
        sequences: vec![SequencePlan {
            words: vec![MaskedWord { position: 2, original: 9, action: WordAction::Mask }],
            pauses: vec![MaskedPause { position: 3, original: seq.pause_tokens[3] }],
        }],
    };
    let w = LossWeights { mlm: 1.0, pause: 1.0, cls: 1.0 };
    let (loss, _) = loss_and_gradients(&[seq], &plan, &params, &cfg, &w, None).unwrap();
    assert!((loss.mlm - 20f64.ln()).abs() < 1e-12);
    assert!((loss.pause - 300f64.ln()).abs() < 1e-12);
    assert!((loss.cls - 2f64.ln()).abs() < 1e-12);
    assert!((loss.total - (20f64.ln() + 300f64.ln() + 2f64.ln())).abs() < 1e-12);
}

#[test]
fn confident_correct_classifier_has_near_zero_loss() {
    let cfg = tiny_config();
    let mut params = ModelParams::zeros(&cfg);
    params.cls_b.data = vec![-30.0, 30.0];
    let seq = padded_sequence();
    let (loss, _) =
        loss_and_gradients(&[seq], &MaskingPlan::empty(1), &params, &cfg, &LossWeights::FINETUNE, None).unwrap();
    assert!(loss.cls < 1e-20);
}

fn total_loss(batch: &[EncodedSequence], plan: &MaskingPlan, params: &ModelParams, cfg: &ModelConfig) -> f64 {
    let w = LossWeights { mlm: 1.0, pause: 0.5, cls: 2.0 };
    loss_and_gradients(batch, plan, params, cfg, &w, None).unwrap().0.total
}

#[test]
fn sampled_gradients_match_finite_differences() {
    let cfg = tiny_config();
    let m = randomized(&cfg, 4);
    let seq = padded_sequence();
    let plan = MaskingPlan {
        sequences: vec![SequencePlan {
            words: vec![
                MaskedWord { position: 1, original: 7, action: WordAction::Mask },
                MaskedWord { position: 3, original: 11, action: WordAction::Random(17) },
            ],
            pauses: vec![MaskedPause { position: 2, original: seq.pause_tokens[2] }],
        }],
    };
    let batch = [seq];
    let w = LossWeights { mlm: 1.0, pause: 0.5, cls: 2.0 };
    let (_, grads) = loss_and_gradients(&batch, &plan, &m.params, &cfg, &w, None).unwrap();
    let names = m.params.names();
    let analytic = grads.tensors();
    let h = 1e-5;
    for (t, name) in names.iter().enumerate() {
        let len = analytic[t].data.len();
        for i in [0, len / 2, len - 1] {
            let mut p = m.params.clone();
            p.tensors_mut()[t].data[i] += h;
            let up = total_loss(&batch, &plan, &p, &cfg);
            p.tensors_mut()[t].data[i] -= 2.0 * h;
            let down = total_loss(&batch, &plan, &p, &cfg);
            let num = (up - down) / (2.0 * h);
            let a = analytic[t].data[i];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
            assert!(rel < 1e-4, "{name}[{i}]: analytic {a} numeric {num}");
        }
    }
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let cfg = tiny_config();
    let mut c = Checkpoint::new(randomized(&cfg, 5), "abc");
    c.meta = checkpoint::CheckpointMeta { stage: "pretrain".into(), epoch: 2, iteration: 17 };
    let bytes = c.to_bytes();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_bytes(), bytes);

    let mut state = crate::trainer::AdamState::new(&c.model.params);
    state.step = 3;
    state.m.word_table.data[0] = 0.5;
    c.optimizer = Some(state);
    let bytes = c.to_bytes();
    assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().to_bytes(), bytes);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let bytes = Checkpoint::new(Model::new(tiny_config(), 0).unwrap(), "x").to_bytes();
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad).is_err());
}

#[test]
fn vocabulary_mismatch_is_detected() {
    let text = "[PAD]\n[CLS]\n[SEP]\n[MASK]\n[UNK]\nalpha\nbeta\n";
    let vocab = Vocabulary::from_text(text).unwrap();
    let other = Vocabulary::from_text(&text.replace("beta", "gamma")).unwrap();
    let cfg = ModelConfig { vocab_size: vocab.len(), ..tiny_config() };
    let c = Checkpoint::new(Model::new(cfg, 0).unwrap(), vocab.fingerprint());
    c.check_vocab(&vocab).unwrap();
    assert!(c.check_vocab(&other).is_err());
}

#[test]
fn bad_inputs_are_rejected() {
    let cfg = tiny_config();
    let m = Model::new(cfg.clone(), 0).unwrap();
    let mut seq = padded_sequence();
    seq.word_ids[1] = 20;
    assert!(m.forward(&seq, Mode::Eval).is_err());
    let mut seq = padded_sequence();
    seq.pause_tokens[1].pause_bin = NULL_BIN + 1;
    assert!(m.forward(&seq, Mode::Eval).is_err());
    let long = vec![5; 9];
    assert!(compose_embeddings(&long, &[PauseToken::NULL; 9], &m.params, &cfg).is_err());
    assert!(Model::new(ModelConfig { d_model: 7, ..cfg }, 0).is_err());
}
