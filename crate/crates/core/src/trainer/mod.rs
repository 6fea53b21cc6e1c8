//! Two-stage training: masked word + pause prediction, then classification
//! fine-tuning.

pub mod adam;
pub mod masking;

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::checkpoint::CheckpointMeta;
use crate::model::{loss_and_gradients, Checkpoint, LossBreakdown, LossWeights, ModelParams};
use crate::rng::{mix, stream_rng, stream_seed, Stream};
use crate::tokenizer::EncodedSequence;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use masking::{make_masking_plan, MaskingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Finetune,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub stage: Stage,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epoch budget; ignored when `iterations` is set.
    pub epochs: usize,
    /// Optimizer-step budget. Takes precedence over `epochs`.
    pub iterations: Option<usize>,
    pub word_mask_rate: f64,
    pub pause_mask_rate: f64,
    pub loss_weights: LossWeights,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Update only the duration and pause tables.
    pub temporal_only: bool,
    /// Write a resumable checkpoint every N epochs (0 = never).
    pub checkpoint_every: usize,
}

impl TrainConfig {
    /// lr 1e-5, batch 8, 10 epochs.
    pub fn pretrain() -> Self {
        TrainConfig {
            stage: Stage::Pretrain,
            learning_rate: 1e-5,
            batch_size: 8,
            epochs: 10,
            iterations: None,
            word_mask_rate: 0.15,
            pause_mask_rate: 0.15,
            loss_weights: LossWeights::PRETRAIN,
            seed: 0,
            adam: AdamConfig::default(),
            temporal_only: false,
            checkpoint_every: 1,
        }
    }

    /// lr 2e-5, batch 4, 200 optimizer steps.
    pub fn finetune() -> Self {
        TrainConfig {
            stage: Stage::Finetune,
            learning_rate: 2e-5,
            batch_size: 4,
            epochs: 0,
            iterations: Some(200),
            word_mask_rate: 0.0,
            pause_mask_rate: 0.0,
            loss_weights: LossWeights::FINETUNE,
            checkpoint_every: 0,
            ..TrainConfig::pretrain()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("{}: {m}", self.stage.name())));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        for r in [self.word_mask_rate, self.pause_mask_rate] {
            if !(0.0..=1.0).contains(&r) {
                return fail("mask rates must lie in [0, 1]");
            }
        }
        let w = self.loss_weights;
        if [w.mlm, w.pause, w.cls].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail("loss weights must be finite and non-negative");
        }
        if w.mlm == 0.0 && w.pause == 0.0 && w.cls == 0.0 {
            return fail("at least one loss weight must be positive");
        }
        let a = self.adam;
        if !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || a.epsilon.is_nan()
            || a.epsilon <= 0.0
            || a.clip_norm.is_nan()
            || a.clip_norm < 0.0
        {
            return fail("invalid adam settings");
        }
        Ok(())
    }
}

/// One line of the JSONL training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub stage: Stage,
    pub epoch: u64,
    pub iteration: u64,
    pub loss_total: f64,
    pub loss_mlm: f64,
    pub loss_pause: f64,
    pub loss_cls: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    /// End of the given (1-based) epoch; resumable.
    Epoch(u64),
    /// State at the moment training aborted.
    Diagnostic,
}

/// Receives log lines and intermediate checkpoints during training.
pub trait TrainObserver {
    fn on_log(&mut self, _entry: &LogEntry) -> Result<()> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _kind: CheckpointKind, _ckpt: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogEntry>,
    /// Batches skipped because nothing in them was masked or labeled.
    pub skipped_batches: u64,
}

/// Stage 1: masked word and pause prediction. Labels are ignored.
///
/// Continues from `init.meta.epoch` when `init` carries optimizer state, so
/// a resumed run matches an uninterrupted one.
pub fn pretrain(
    corpus: &[EncodedSequence],
    init: Checkpoint,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    if cfg.stage != Stage::Pretrain {
        return Err(Error::Config("pretrain called with a finetune config".into()));
    }
    let unlabeled: Vec<EncodedSequence> = corpus.iter().map(|s| EncodedSequence { label: None, ..s.clone() }).collect();
    run(&unlabeled, init, cfg, observer)
}

/// Stage 2: classification fine-tuning from `init`. Every sequence must be
/// labeled; the optimizer starts fresh.
pub fn finetune(
    labeled: &[EncodedSequence],
    init: Checkpoint,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    if cfg.stage != Stage::Finetune {
        return Err(Error::Config("finetune called with a pretrain config".into()));
    }
    if let Some(s) = labeled.iter().find(|s| s.label.is_none()) {
        return Err(Error::Validation(format!(
            "finetune requires labels; transcript {} window {} is unlabeled",
            s.transcript_id, s.window
        )));
    }
    let mut init = init;
    if init.meta.stage != Stage::Finetune.name() {
        init.meta = CheckpointMeta { stage: Stage::Finetune.name().into(), epoch: 0, iteration: 0 };
        init.optimizer = None;
    }
    run(labeled, init, cfg, observer)
}

fn run(
    data: &[EncodedSequence],
    init: Checkpoint,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let started = Instant::now();
    let mut ckpt = init;
    ckpt.meta.stage = cfg.stage.name().into();
    let mut state = ckpt.optimizer.take().unwrap_or_else(|| AdamState::new(&ckpt.model.params));
    let model_cfg = ckpt.model.config.clone();
    let vocab_size = model_cfg.vocab_size;
    let budget_steps = cfg.iterations.map(|n| n as u64);
    let mut log = Vec::new();
    let mut skipped = 0u64;

    let done = |ckpt: &Checkpoint| match budget_steps {
        Some(n) => ckpt.meta.iteration >= n,
        None => ckpt.meta.epoch >= cfg.epochs as u64,
    };

    while !done(&ckpt) {
        let epoch = ckpt.meta.epoch;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut stream_rng(cfg.seed, Stream::Shuffle, epoch));
        let mut sums = LossBreakdown::default();
        let mut steps = 0u64;
        let mut finished_epoch = true;

        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if budget_steps.is_some_and(|n| ckpt.meta.iteration >= n) {
                finished_epoch = false;
                break;
            }
            let batch: Vec<EncodedSequence> = chunk.iter().map(|&i| data[i].clone()).collect();
            let plan = if cfg.word_mask_rate > 0.0 || cfg.pause_mask_rate > 0.0 {
                let mut rng = stream_rng(cfg.seed, Stream::Masking, mix(epoch, b as u64));
                make_masking_plan(&batch, cfg.word_mask_rate, cfg.pause_mask_rate, vocab_size, &mut rng)
            } else {
                MaskingPlan::empty(batch.len())
            };
            let dropout_seed = stream_seed(cfg.seed, Stream::Dropout, ckpt.meta.iteration);
            let result = loss_and_gradients(
                &batch,
                &plan,
                &ckpt.model.params,
                &model_cfg,
                &cfg.loss_weights,
                Some(dropout_seed),
            );
            let (loss, mut grads) = match result {
                Ok(r) => r,
                Err(Error::NoLossSource) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(abort(ckpt, state, e, observer)),
            };
            if cfg.temporal_only {
                keep_temporal_only(&mut grads);
            }
            if let Err(e) = adam_step(&mut ckpt.model.params, &grads, &mut state, cfg.learning_rate, &cfg.adam) {
                return Err(abort(ckpt, state, e, observer));
            }
            if !ckpt.model.params.all_finite() {
                let e = Error::Numeric(format!("non-finite parameters after step {}", ckpt.meta.iteration + 1));
                return Err(abort(ckpt, state, e, observer));
            }
            ckpt.meta.iteration += 1;
            steps += 1;
            sums.total += loss.total;
            sums.mlm += loss.mlm;
            sums.pause += loss.pause;
            sums.cls += loss.cls;
        }
        if finished_epoch {
            ckpt.meta.epoch += 1;
        }
        if steps > 0 {
            let n = steps as f64;
            let entry = LogEntry {
                stage: cfg.stage,
                epoch: ckpt.meta.epoch,
                iteration: ckpt.meta.iteration,
                loss_total: sums.total / n,
                loss_mlm: sums.mlm / n,
                loss_pause: sums.pause / n,
                loss_cls: sums.cls / n,
                wall_ms: started.elapsed().as_millis() as u64,
            };
            observer.on_log(&entry)?;
            log.push(entry);
        } else if finished_epoch && skipped > 0 && budget_steps.is_some() {
            return Err(Error::NoLossSource);
        }
        if finished_epoch && cfg.checkpoint_every > 0 && ckpt.meta.epoch.is_multiple_of(cfg.checkpoint_every as u64) {
            let snapshot = Checkpoint { optimizer: Some(state.clone()), ..ckpt.clone() };
            observer.on_checkpoint(CheckpointKind::Epoch(ckpt.meta.epoch), &snapshot)?;
        }
    }
    ckpt.optimizer = Some(state);
    Ok(TrainOutcome { checkpoint: ckpt, log, skipped_batches: skipped })
}

fn abort(ckpt: Checkpoint, state: AdamState, err: Error, observer: &mut dyn TrainObserver) -> Error {
    let diag = Checkpoint { optimizer: Some(state), ..ckpt };
    if let Err(e) = observer.on_checkpoint(CheckpointKind::Diagnostic, &diag) {
        return Error::Numeric(format!("{err}; writing diagnostic checkpoint also failed: {e}"));
    }
    err
}

fn keep_temporal_only(grads: &mut ModelParams) {
    let dur = std::mem::replace(&mut grads.dur_table, crate::model::Matrix::zeros(0, 0));
    let pause = std::mem::replace(&mut grads.pause_table, crate::model::Matrix::zeros(0, 0));
    *grads = grads.zeros_like();
    grads.dur_table = dur;
    grads.pause_table = pause;
}

#[cfg(test)]
mod tests;
