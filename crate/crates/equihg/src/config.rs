//! Line-oriented `key = value` config files with `[model]`, `[train]` and
//! `[data]` sections. Every key is optional; missing keys keep their
//! defaults. Command-line flags are applied on top by the caller.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelKind};
use crate::trainer::TrainConfig;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataConfig {
    /// SDF file or directory of .xyz files.
    pub molecules: Option<PathBuf>,
    /// CSV with a `name` column plus one column per target.
    pub targets: Option<PathBuf>,
    /// Seed for the train/val/test split shuffle.
    pub split_seed: u64,
    /// Keep only the first n records after the molecule/target join.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

pub fn load_config(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// Parses config text over the defaults. `label` names the source in errors.
pub fn parse_config(text: &str, label: &str) -> Result<Settings> {
    let mut settings = Settings::default();
    let mut section: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let at = |msg: String| Error::Config(format!("{label}:{lineno}: {msg}"));
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| at(format!("malformed section header {line:?}")))?
                .trim();
            section = Some(match name {
                "model" => "model",
                "train" => "train",
                "data" => "data",
                other => return Err(at(format!("unknown section [{other}]"))),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(at("empty key".into()));
        }
        match section {
            None => return Err(at(format!("key {key:?} appears before any section"))),
            Some("model") => apply_model(&mut settings.model, key, value).map_err(at)?,
            Some("train") => apply_train(&mut settings.train, key, value).map_err(at)?,
            Some("data") => apply_data(&mut settings.data, key, value).map_err(at)?,
            Some(_) => unreachable!(),
        }
    }
    Ok(settings)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn apply_model(cfg: &mut ModelConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "kind" => {
            cfg.kind = ModelKind::parse(value).ok_or_else(|| {
                format!("unknown model kind {value:?} (expected equihgnn, mhnn or gin)")
            })?
        }
        "hidden" => cfg.hidden = parse_num(key, value)?,
        "geo_layers" => cfg.geo_layers = parse_num(key, value)?,
        "hg_layers" => cfg.hg_layers = parse_num(key, value)?,
        "head_layers" => cfg.head_layers = parse_num(key, value)?,
        "cutoff" => cfg.cutoff = parse_num(key, value)?,
        "max_neighbors" => cfg.max_neighbors = parse_num(key, value)?,
        "seed" => cfg.seed = parse_num(key, value)?,
        other => return Err(format!("unknown key {other:?} in [model]")),
    }
    Ok(())
}

fn apply_train(cfg: &mut TrainConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "epochs" => cfg.epochs = parse_num(key, value)?,
        "batch_size" => cfg.batch_size = parse_num(key, value)?,
        "lr" => cfg.lr = parse_num(key, value)?,
        "seed" => cfg.seed = parse_num(key, value)?,
        "target_name" => cfg.target_name = value.to_string(),
        "eval_every" => cfg.eval_every = parse_num(key, value)?,
        "out_dir" => cfg.out_dir = PathBuf::from(value),
        "threads" => cfg.threads = parse_num(key, value)?,
        other => return Err(format!("unknown key {other:?} in [train]")),
    }
    Ok(())
}

fn apply_data(cfg: &mut DataConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "molecules" => cfg.molecules = Some(PathBuf::from(value)),
        "targets" => cfg.targets = Some(PathBuf::from(value)),
        "split_seed" => cfg.split_seed = parse_num(key, value)?,
        "n" => cfg.n = Some(parse_num(key, value)?),
        other => return Err(format!("unknown key {other:?} in [data]")),
    }
    Ok(())
}
