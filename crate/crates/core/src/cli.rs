//! The `pause-lm` command-line tool.
//!
//! Every subcommand reads the resolved [`RunConfig`] and writes its outputs,
//! together with `config.toml`, into a fresh run directory.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{eval_classification, eval_masked_pause, pause_stats};
use crate::ingest::{parse_dataset, write_dataset, Transcript};
use crate::model::{Checkpoint, Model, ModelConfig};
use crate::synth::{generate, word_chi_square};
use crate::tokenizer::{encode_dataset, Vocabulary};
use crate::trainer::{self, CheckpointKind, LogEntry, TrainObserver};

#[derive(Debug, Parser)]
#[command(name = "pause-lm", version, about = "Pause-aware language model toolkit")]
pub struct Cli {
    /// TOML config file; unspecified keys keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config key, e.g. `--set model.d_model=32`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Worker threads. Results do not depend on this value.
    #[arg(long, default_value_t = 1, global = true)]
    pub threads: usize,

    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Write outputs here instead of `<runs_dir>/<timestamp>-<hash>-<command>`.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-group corpus from the [synth] section.
    GenSynth,
    /// Parse and validate `paths.data`, reporting counts.
    Ingest,
    /// Build a vocabulary from `paths.data`.
    BuildVocab,
    /// Masked word + pause pretraining.
    Pretrain,
    /// Classification fine-tuning.
    Finetune,
    /// Masked-pause RMSE per transcript and group.
    EvalPause,
    /// Transcript-level classification metrics.
    EvalClf,
    /// Pause histograms and moments per group.
    Stats,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GenSynth => "gen-synth",
            Command::Ingest => "ingest",
            Command::BuildVocab => "build-vocab",
            Command::Pretrain => "pretrain",
            Command::Finetune => "finetune",
            Command::EvalPause => "eval-pause",
            Command::EvalClf => "eval-clf",
            Command::Stats => "stats",
        }
    }
}

/// Parses arguments, runs the command and returns the run directory.
pub fn run<I, T>(args: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Result<PathBuf> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let run_dir = match &cli.run_dir {
        Some(d) => d.clone(),
        None => {
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
            cfg.paths.runs_dir.join(format!("{stamp}-{}-{}", cfg.short_hash(), cli.command.name()))
        }
    };
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    write_file(&run_dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    let ctx = Ctx { cfg: &cfg, dir: &run_dir, quiet: cli.quiet };
    match cli.command {
        Command::GenSynth => ctx.gen_synth()?,
        Command::Ingest => ctx.ingest()?,
        Command::BuildVocab => ctx.build_vocab()?,
        Command::Pretrain => ctx.pretrain()?,
        Command::Finetune => ctx.finetune()?,
        Command::EvalPause => ctx.eval_pause()?,
        Command::EvalClf => ctx.eval_clf()?,
        Command::Stats => ctx.stats()?,
    }
    Ok(run_dir)
}

/// Binary entry point: parses `std::env::args`, maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }
    match execute(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

struct FileObserver {
    dir: PathBuf,
    log: BufWriter<File>,
    quiet: bool,
}

impl FileObserver {
    fn new(dir: &Path, quiet: bool) -> Result<Self> {
        let path = dir.join("train_log.jsonl");
        let f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(FileObserver { dir: dir.to_path_buf(), log: BufWriter::new(f), quiet })
    }
}

impl TrainObserver for FileObserver {
    fn on_log(&mut self, entry: &LogEntry) -> Result<()> {
        let line = serde_json::to_string(entry).expect("log entry serializes");
        if !self.quiet {
            eprintln!("{line}");
        }
        let path = self.dir.join("train_log.jsonl");
        writeln!(self.log, "{line}").and_then(|_| self.log.flush()).map_err(|e| Error::io(path, e))
    }

    fn on_checkpoint(&mut self, kind: CheckpointKind, ckpt: &Checkpoint) -> Result<()> {
        let name = match kind {
            CheckpointKind::Epoch(n) => format!("checkpoint-epoch{n:03}.bin"),
            CheckpointKind::Diagnostic => "diagnostic.bin".to_string(),
        };
        ckpt.save(self.dir.join(name))
    }
}

#[derive(Serialize)]
struct IngestReport {
    transcripts: usize,
    words: usize,
    control: usize,
    ad: usize,
    unlabeled: usize,
}

#[derive(Serialize)]
struct SynthReport {
    transcripts: usize,
    per_group: usize,
    word_chi_square: f64,
    chi_square_dof: usize,
    expected_pause_control_s: f64,
    expected_pause_ad_s: f64,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    quiet: bool,
}

impl Ctx<'_> {
    fn data(&self) -> Result<Vec<Transcript>> {
        parse_dataset(self.cfg.require("paths.data", &self.cfg.paths.data)?)
    }

    fn vocab(&self) -> Result<Vocabulary> {
        Vocabulary::load(self.cfg.require("paths.vocab", &self.cfg.paths.vocab)?)
    }

    fn checkpoint(&self) -> Result<Checkpoint> {
        Checkpoint::load(self.cfg.require("paths.checkpoint", &self.cfg.paths.checkpoint)?)
    }

    fn model_config(&self, vocab: &Vocabulary) -> Result<ModelConfig> {
        let mc = ModelConfig { vocab_size: vocab.len(), ..self.cfg.model.clone() };
        mc.validate()?;
        Ok(mc)
    }

    /// Initial checkpoint: `paths.checkpoint` when set, else a fresh model.
    fn init(&self, vocab: &Vocabulary, seed: u64) -> Result<Checkpoint> {
        match &self.cfg.paths.checkpoint {
            Some(p) => {
                let c = Checkpoint::load(p)?;
                c.check_vocab(vocab)?;
                Ok(c)
            }
            None => Ok(Checkpoint::new(Model::new(self.model_config(vocab)?, seed)?, vocab.fingerprint())),
        }
    }

    fn gen_synth(&self) -> Result<()> {
        let spec = &self.cfg.synth;
        let ts = generate(spec)?;
        write_dataset(self.dir.join("dataset.jsonl"), &ts)?;
        let (chi, dof) = word_chi_square(&ts);
        if !self.quiet {
            eprintln!("word chi-square between groups: {chi:.2} on {dof} dof");
        }
        write_json(
            &self.dir.join("synth_report.json"),
            &SynthReport {
                transcripts: ts.len(),
                per_group: spec.n_per_group,
                word_chi_square: chi,
                chi_square_dof: dof,
                expected_pause_control_s: spec.control.expected_pause(),
                expected_pause_ad_s: spec.ad.expected_pause(),
            },
        )
    }

    fn ingest(&self) -> Result<()> {
        let ts = self.data()?;
        let count = |l: Option<crate::ingest::Label>| ts.iter().filter(|t| t.label == l).count();
        write_json(
            &self.dir.join("ingest_report.json"),
            &IngestReport {
                transcripts: ts.len(),
                words: ts.iter().map(|t| t.words.len()).sum(),
                control: count(Some(crate::ingest::Label::Control)),
                ad: count(Some(crate::ingest::Label::Ad)),
                unlabeled: count(None),
            },
        )
    }

    fn build_vocab(&self) -> Result<()> {
        let ts = self.data()?;
        Vocabulary::build(&ts, self.cfg.vocab.min_count)?.save(self.dir.join("vocab.txt"))
    }

    fn pretrain(&self) -> Result<()> {
        let vocab = self.vocab()?;
        let init = self.init(&vocab, self.cfg.pretrain.seed)?;
        let data = encode_dataset(&self.data()?, &vocab, init.model.config.max_seq_len)?;
        let mut obs = FileObserver::new(self.dir, self.quiet)?;
        let out = trainer::pretrain(&data, init, &self.cfg.pretrain, &mut obs)?;
        out.checkpoint.save(self.dir.join("checkpoint.bin"))
    }

    fn finetune(&self) -> Result<()> {
        let vocab = self.vocab()?;
        let init = self.init(&vocab, self.cfg.finetune.seed)?;
        let data = encode_dataset(&self.data()?, &vocab, init.model.config.max_seq_len)?;
        let mut obs = FileObserver::new(self.dir, self.quiet)?;
        let out = trainer::finetune(&data, init, &self.cfg.finetune, &mut obs)?;
        out.checkpoint.save(self.dir.join("checkpoint.bin"))
    }

    fn loaded(&self) -> Result<(Checkpoint, Vec<crate::tokenizer::EncodedSequence>)> {
        let ckpt = self.checkpoint()?;
        let vocab = self.vocab()?;
        ckpt.check_vocab(&vocab)?;
        let data = encode_dataset(&self.data()?, &vocab, ckpt.model.config.max_seq_len)?;
        Ok((ckpt, data))
    }

    fn eval_pause(&self) -> Result<()> {
        let (ckpt, data) = self.loaded()?;
        let report = eval_masked_pause(&data, &ckpt.model, self.cfg.eval.sweep)?;
        write_json(&self.dir.join("rmse_report.json"), &report)
    }

    fn eval_clf(&self) -> Result<()> {
        let (ckpt, data) = self.loaded()?;
        let report = eval_classification(&data, &ckpt.model)?;
        write_json(&self.dir.join("clf_report.json"), &report)
    }

    fn stats(&self) -> Result<()> {
        let s = pause_stats(&self.data()?);
        write_json(&self.dir.join("pause_stats.json"), &s)?;
        write_file(&self.dir.join("pause_histogram.csv"), s.histogram.to_csv().as_bytes())?;
        write_file(&self.dir.join("pause_histogram_long.csv"), s.histogram.long_pause_csv().as_bytes())
    }
}
