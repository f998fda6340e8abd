//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! model.kind = ComplEx
//! model.dim = 64
//! train.batch_size = 100
//! train.lr = 0.1
//! reg.kind = DURA
//! reg.lambda = 0.1
//! paths.train = data/train.tsv
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{KgeError, Result};
use crate::model::ModelKind;
use crate::regularizer::{RegularizerKind, RegularizerSpec};
use crate::train::{ModelSpec, TrainConfig};

pub const DEFAULT_INIT_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub paths: DataPaths,
}

const KEYS: &[&str] = &[
    "model.kind",
    "model.dim",
    "model.init_scale",
    "train.batch_size",
    "train.max_epochs",
    "train.lr",
    "train.epsilon",
    "train.w0",
    "train.valid_every",
    "train.patience",
    "train.seed",
    "train.workers",
    "reg.kind",
    "reg.lambda",
    "reg.lambda1",
    "reg.lambda2",
    "paths.train",
    "paths.valid",
    "paths.test",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// unknown or repeated keys are errors.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| KgeError::Config(format!("line {}: expected key=value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(KgeError::Config(format!("line {}: unknown key `{k}`", i + 1)));
        }
        if map.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(KgeError::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(map)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: Option<T>) -> Result<T> {
    match map.get(key) {
        Some(v) => v
            .parse()
            .map_err(|_| KgeError::Config(format!("bad value `{v}` for {key}"))),
        None => default.ok_or_else(|| KgeError::Config(format!("missing required key {key}"))),
    }
}

impl RunConfig {
    pub fn from_pairs(map: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self> {
        let kind: ModelKind = map
            .get("model.kind")
            .ok_or_else(|| KgeError::Config("missing required key model.kind".into()))?
            .parse()?;
        let model = ModelSpec {
            kind,
            dim: get(map, "model.dim", None)?,
            init_scale: get(map, "model.init_scale", Some(DEFAULT_INIT_SCALE))?,
        };
        let reg_kind: RegularizerKind = match map.get("reg.kind") {
            Some(v) => v.parse()?,
            None => RegularizerKind::None,
        };
        let reg = RegularizerSpec {
            kind: reg_kind,
            lambda: get(map, "reg.lambda", Some(0.0))?,
            lambda1: get(map, "reg.lambda1", Some(1.0))?,
            lambda2: get(map, "reg.lambda2", Some(1.0))?,
        };
        let d = TrainConfig::default();
        let train = TrainConfig {
            batch_size: get(map, "train.batch_size", Some(d.batch_size))?,
            max_epochs: get(map, "train.max_epochs", Some(d.max_epochs))?,
            learning_rate: get(map, "train.lr", Some(d.learning_rate))?,
            adagrad_epsilon: get(map, "train.epsilon", Some(d.adagrad_epsilon))?,
            w0: get(map, "train.w0", Some(d.w0))?,
            valid_every: get(map, "train.valid_every", Some(d.valid_every))?,
            patience: get(map, "train.patience", Some(d.patience))?,
            seed: get(map, "train.seed", Some(d.seed))?,
            workers: get(map, "train.workers", Some(d.workers))?,
            reg,
        };
        train.validate()?;
        reg.validate(kind)?;
        let path = |key: &str| -> Result<PathBuf> {
            let p = PathBuf::from(get::<String>(map, key, None)?);
            Ok(if p.is_absolute() { p } else { base_dir.join(p) })
        };
        Ok(RunConfig {
            model,
            train,
            paths: DataPaths {
                train: path("paths.train")?,
                valid: path("paths.valid")?,
                test: path("paths.test")?,
            },
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?, base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            KgeError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Every setting with defaults filled in, as written to run manifests.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let t = &self.train;
        let entries: [(&str, String); 19] = [
            ("model.kind", self.model.kind.to_string()),
            ("model.dim", self.model.dim.to_string()),
            ("model.init_scale", self.model.init_scale.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.max_epochs", t.max_epochs.to_string()),
            ("train.lr", t.learning_rate.to_string()),
            ("train.epsilon", t.adagrad_epsilon.to_string()),
            ("train.w0", t.w0.to_string()),
            ("train.valid_every", t.valid_every.to_string()),
            ("train.patience", t.patience.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.workers", t.workers.to_string()),
            ("reg.kind", t.reg.kind.to_string()),
            ("reg.lambda", t.reg.lambda.to_string()),
            ("reg.lambda1", t.reg.lambda1.to_string()),
            ("reg.lambda2", t.reg.lambda2.to_string()),
            ("paths.train", self.paths.train.display().to_string()),
            ("paths.valid", self.paths.valid.display().to_string()),
            ("paths.test", self.paths.test.display().to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }
}
