//! Command implementations behind the `kge` binary.
//!
//! Each command returns a [`Result`]; [`exit_code`] maps failures onto the
//! process exit status (1 configuration, 2 data, 3 numeric).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::data::Split;
use crate::duality::{model_balance_report, rebalance_model, BalanceReport};
use crate::error::{KgeError, Result};
use crate::eval::{evaluate_with_workers, RankingReport};
use crate::io::{
    encode_embeddings_binary, entity_export_matrix, load_model, save_model, write_embeddings_tsv,
    SavedModel,
};
use crate::sparsity::{sparsity_mrr_sweep, SparsitySweep};
use crate::train::{fit, history_jsonl, DataBundle};

pub const MODEL_FILE: &str = "model.kgm";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

/// Process exit status for an error.
pub fn exit_code(err: &KgeError) -> i32 {
    match err {
        KgeError::Config(_) | KgeError::Unsupported(_) | KgeError::Contract(_) => 1,
        KgeError::Numeric(_) => 3,
        KgeError::Parse { .. }
        | KgeError::UnknownToken { .. }
        | KgeError::State(_)
        | KgeError::Format(_)
        | KgeError::Empty(_)
        | KgeError::Io { .. } => 2,
    }
}

/// One-line `key=value` failure description for stderr.
pub fn error_line(err: &KgeError) -> String {
    let kind = match exit_code(err) {
        1 => "config",
        2 => "data",
        _ => "numeric",
    };
    format!("error kind={kind} code={} reason={:?}", exit_code(err), err.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    /// sha256 of each input data file, keyed by split.
    pub dataset_sha256: BTreeMap<String, String>,
    pub build: String,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn build_id() -> String {
    option_env!("KGE_BUILD_ID")
        .map(str::to_owned)
        .unwrap_or_else(|| format!("kge-v{}", env!("CARGO_PKG_VERSION")))
}

fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| KgeError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| KgeError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub model: PathBuf,
    pub history: PathBuf,
    pub manifest: PathBuf,
    pub report: PathBuf,
    pub test_report: RankingReport,
}

/// Trains per the config and writes model, history, test report and
/// manifest into `out_dir`.
pub fn cmd_train(config_path: &Path, out_dir: &Path, workers: Option<usize>) -> Result<TrainOutputs> {
    let started = now_unix();
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(w) = workers {
        cfg.train.workers = w.max(1);
    }
    let data = DataBundle::load(&cfg.paths.train, &cfg.paths.valid, &cfg.paths.test, cfg.train.w0)?;
    log::info!(
        "loaded {} entities, {} relations, {} train queries",
        data.vocab.n_entities(),
        data.vocab.n_relations_original(),
        data.train.len()
    );
    let result = fit(cfg.model, &data, &cfg.train)?;
    let test_report = evaluate_with_workers(&result.best, &data.test, &data.filter, cfg.train.workers)?;

    fs::create_dir_all(out_dir).map_err(|e| KgeError::io(out_dir, e))?;
    let outputs = TrainOutputs {
        model: out_dir.join(MODEL_FILE),
        history: out_dir.join(HISTORY_FILE),
        manifest: out_dir.join(MANIFEST_FILE),
        report: out_dir.join(REPORT_FILE),
        test_report,
    };
    save_model(
        &outputs.model,
        &SavedModel {
            params: result.best,
            vocab: data.vocab.clone(),
        },
    )?;
    write_file(&outputs.history, history_jsonl(&result.history))?;
    write_file(&outputs.report, outputs.test_report.to_json() + "\n")?;

    let mut checksums = BTreeMap::new();
    for (split, path) in [
        ("train", &cfg.paths.train),
        ("valid", &cfg.paths.valid),
        ("test", &cfg.paths.test),
    ] {
        checksums.insert(split.to_owned(), sha256_file(path)?);
    }
    let manifest = RunManifest {
        command: "train".into(),
        config: cfg.resolved(),
        seed: cfg.train.seed,
        dataset_sha256: checksums,
        build: build_id(),
        started_unix: started,
        finished_unix: now_unix(),
    };
    write_file(
        &outputs.manifest,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(outputs)
}

fn model_and_data(model_path: &Path, config_path: &Path) -> Result<(RunConfig, SavedModel, DataBundle)> {
    let cfg = RunConfig::load(config_path)?;
    let saved = load_model(model_path)?;
    let data = DataBundle::load_with_vocab(
        &saved.vocab,
        &cfg.paths.train,
        &cfg.paths.valid,
        &cfg.paths.test,
        0.0,
    )?;
    if data.vocab.n_relations_total() != saved.params.n_relations() {
        return Err(KgeError::Format(format!(
            "model has {} relation rows, data needs {}",
            saved.params.n_relations(),
            data.vocab.n_relations_total()
        )));
    }
    Ok((cfg, saved, data))
}

/// Filtered ranking of a saved model on the `valid` or `test` split.
pub fn cmd_evaluate(
    model_path: &Path,
    config_path: &Path,
    split: Split,
    workers: Option<usize>,
) -> Result<RankingReport> {
    let (cfg, saved, data) = model_and_data(model_path, config_path)?;
    let store = match split {
        Split::Valid => &data.valid,
        _ => &data.test,
    };
    evaluate_with_workers(&saved.params, store, &data.filter, workers.unwrap_or(cfg.train.workers))
}

/// Sparsity-vs-MRR sweep on the test split.
pub fn cmd_sparsify(
    model_path: &Path,
    config_path: &Path,
    targets: &[f64],
    workers: Option<usize>,
) -> Result<SparsitySweep> {
    if targets.is_empty() {
        return Err(KgeError::Config("no sparsity targets given".into()));
    }
    let (cfg, saved, data) = model_and_data(model_path, config_path)?;
    sparsity_mrr_sweep(
        &saved.params,
        &data.test,
        &data.filter,
        targets,
        workers.unwrap_or(cfg.train.workers),
    )
}

/// Balance reports before and after rebalancing a saved CP model.
pub fn cmd_check_duality(model_path: &Path) -> Result<(BalanceReport, BalanceReport)> {
    let saved = load_model(model_path)?;
    let before = model_balance_report(&saved.params)?;
    let after = model_balance_report(&rebalance_model(&saved.params)?)?;
    Ok((before, after))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Tsv,
    Binary,
}

impl std::str::FromStr for ExportFormat {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ExportFormat::Tsv),
            "bin" | "binary" => Ok(ExportFormat::Binary),
            _ => Err(KgeError::Config(format!("unknown export format `{s}`"))),
        }
    }
}

/// Writes entity embeddings of a saved model.
pub fn cmd_export(model_path: &Path, format: ExportFormat, out: &Path) -> Result<()> {
    let saved = load_model(model_path)?;
    let matrix = entity_export_matrix(&saved.params);
    match format {
        ExportFormat::Tsv => {
            let file = fs::File::create(out).map_err(|e| KgeError::io(out, e))?;
            write_embeddings_tsv(file, saved.vocab.entity_names(), &matrix)
        }
        ExportFormat::Binary => write_file(out, encode_embeddings_binary(&matrix)?),
    }
}

/// Parses `0,0.2,0.6`.
pub fn parse_targets(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| KgeError::Config(format!("bad sparsity target `{p}`")))
        })
        .collect()
}
