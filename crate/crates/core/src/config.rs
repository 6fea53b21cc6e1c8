//! Run configuration: TOML file merged over defaults, then `section.key=value`
//! overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::eval::MaskSweep;
use crate::model::ModelConfig;
use crate::synth::SynthSpec;
use crate::trainer::{Stage, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Parent directory for timestamped run directories.
    pub runs_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabConfig {
    pub min_count: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig { min_count: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub sweep: MaskSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub vocab: VocabConfig,
    pub eval: EvalConfig,
    pub model: ModelConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths { runs_dir: PathBuf::from("runs"), ..Paths::default() },
            vocab: VocabConfig::default(),
            eval: EvalConfig::default(),
            model: ModelConfig::default(),
            pretrain: TrainConfig::pretrain(),
            finetune: TrainConfig::finetune(),
            synth: SynthSpec::default(),
        }
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies one `section.key=value` override. Values parse as TOML when
/// possible and fall back to strings.
fn apply_override(root: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry.as_table_mut().ok_or_else(|| Error::Config(format!("override {key:?}: {p} is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_sources(file_text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut root =
            Table::try_from(RunConfig::default()).map_err(|e| Error::Config(format!("serializing defaults: {e}")))?;
        if let Some(text) = file_text {
            let user: Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
            merge(&mut root, user);
        }
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: RunConfig =
            Value::Table(root).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => None,
        };
        Self::from_sources(text.as_deref(), overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pretrain.stage != Stage::Pretrain {
            return Err(Error::Config("pretrain.stage must be \"pretrain\"".into()));
        }
        if self.finetune.stage != Stage::Finetune {
            return Err(Error::Config("finetune.stage must be \"finetune\"".into()));
        }
        self.pretrain.validate()?;
        self.finetune.validate()?;
        self.synth.validate()?;
        if self.vocab.min_count == 0 {
            return Err(Error::Config("vocab.min_count must be >= 1".into()));
        }
        Ok(())
    }

    /// Fully-resolved config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 8 hex digits of the SHA-256 of the resolved TOML.
    pub fn short_hash(&self) -> String {
        hex::encode(&Sha256::digest(self.to_toml().as_bytes())[..4])
    }

    pub fn require<'a>(&self, field: &'a str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value.as_deref().ok_or_else(|| Error::Config(format!("missing required field {field}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_reported_hyperparameters() {
        let c = RunConfig::from_sources(None, &[]).unwrap();
        assert_eq!(c.pretrain.learning_rate, 1e-5);
        assert_eq!(c.pretrain.batch_size, 8);
        assert_eq!(c.pretrain.epochs, 10);
        assert_eq!(c.finetune.learning_rate, 2e-5);
        assert_eq!(c.finetune.batch_size, 4);
        assert_eq!(c.finetune.iterations, Some(200));
    }

    #[test]
    fn file_merges_over_defaults_per_section() {
        let c = RunConfig::from_sources(Some("[finetune]\nbatch_size = 2\n[model]\nd_model = 16\n"), &[]).unwrap();
        assert_eq!(c.finetune.batch_size, 2);
        assert_eq!(c.finetune.learning_rate, 2e-5);
        assert_eq!(c.model.d_model, 16);
        assert_eq!(c.model.n_layers, ModelConfig::default().n_layers);
    }

    #[test]
    fn overrides_parse_typed_values_and_strings() {
        let c = RunConfig::from_sources(
            None,
            &[
                "model.disable_pause=true".into(),
                "pretrain.learning_rate=0.001".into(),
                "paths.data=some/file.jsonl".into(),
                "synth.control.pause_sigma=0.5".into(),
                "eval.sweep=\"all_at_once\"".into(),
            ],
        )
        .unwrap();
        assert!(c.model.disable_pause);
        assert_eq!(c.pretrain.learning_rate, 0.001);
        assert_eq!(c.paths.data.as_deref(), Some(Path::new("some/file.jsonl")));
        assert_eq!(c.synth.control.pause_sigma, 0.5);
        assert_eq!(c.eval.sweep, MaskSweep::AllAtOnce);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        assert!(RunConfig::from_sources(Some("[model]\nwidth = 3\n"), &[]).is_err());
        assert!(RunConfig::from_sources(None, &["pretrain.batch_size=0".into()]).is_err());
        assert!(RunConfig::from_sources(None, &["noequals".into()]).is_err());
    }

    #[test]
    fn resolved_toml_round_trips() {
        let c = RunConfig::from_sources(None, &["finetune.iterations=7".into()]).unwrap();
        let again = RunConfig::from_sources(Some(&c.to_toml()), &[]).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.short_hash(), c.short_hash());
        assert_eq!(c.short_hash().len(), 8);
    }
}
