use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kge::synthetic::{generate, SyntheticConfig};
use tempfile::TempDir;

fn kge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a small synthetic dataset and a config for `kind` into a temp dir.
fn setup(kind: &str, extra: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let kg = generate(&SyntheticConfig {
        n_entities: 30,
        n_relations: 2,
        density: 0.05,
        ..SyntheticConfig::default()
    })
    .unwrap();
    kg.write_tsv(dir.path()).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "model.kind = {kind}\nmodel.dim = 4\ntrain.max_epochs = 6\ntrain.valid_every = 2\n\
             train.batch_size = 16\nreg.kind = DURA\nreg.lambda = 0.05\n\
             paths.train = train.tsv\npaths.valid = valid.tsv\npaths.test = test.tsv\n{extra}"
        ),
    )
    .unwrap();
    (dir, cfg)
}

fn train(cfg: &Path, out: &Path) -> Output {
    kge(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn json_mrr(text: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with('{')).expect("json line");
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    v["mrr"].as_f64().unwrap()
}

#[test]
fn train_writes_outputs_and_reruns_identically() {
    let (dir, cfg) = setup("CP", "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = train(&cfg, &a);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(train(&cfg, &b).status.success());
    for f in ["model.kgm", "history.jsonl", "manifest.json", "report.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    assert_eq!(fs::read(a.join("history.jsonl")).unwrap(), fs::read(b.join("history.jsonl")).unwrap());
    assert_eq!(fs::read(a.join("model.kgm")).unwrap(), fs::read(b.join("model.kgm")).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["dataset_sha256"]["train"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["reg.kind"], "DURA");

    // evaluating the saved model reproduces the test MRR recorded at save time
    let model = a.join("model.kgm");
    let eval = kge(&["evaluate", "--model", model.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    assert_eq!(json_mrr(&stdout(&eval)), json_mrr(&stdout(&out)));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert!(report["hits1"].as_f64() <= report["hits3"].as_f64());
    assert!(report["hits3"].as_f64() <= report["hits10"].as_f64());

    let csv = dir.path().join("sweep.csv");
    let sweep = kge(&[
        "sparsify", "--model", model.to_str().unwrap(), "--config", cfg.to_str().unwrap(),
        "--targets", "0.6,0,0.3", "--out", csv.to_str().unwrap(),
    ]);
    assert!(sweep.status.success(), "{}", stderr(&sweep));
    let rows: Vec<String> = fs::read_to_string(&csv).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], "target,threshold,achieved,mrr,storage_numbers");
    let zero_mrr: f64 = rows[1].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(zero_mrr, json_mrr(&stdout(&out)));

    let duality = kge(&["check-duality", "--model", model.to_str().unwrap()]);
    assert!(duality.status.success(), "{}", stderr(&duality));
    assert!(stdout(&duality).contains("after rebalance"));

    let tsv = dir.path().join("emb.tsv");
    let exp = kge(&["export", "--model", model.to_str().unwrap(), "--format", "tsv", "--out", tsv.to_str().unwrap()]);
    assert!(exp.status.success());
    let text = fs::read_to_string(&tsv).unwrap();
    let train_entities: std::collections::HashSet<String> = fs::read_to_string(dir.path().join("train.tsv"))
        .unwrap()
        .lines()
        .flat_map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            [f[0].to_owned(), f[2].to_owned()]
        })
        .collect();
    let n_entities = train_entities.len();
    assert_eq!(text.lines().count(), n_entities);
    // CP exports head and tail roles side by side
    assert_eq!(text.lines().next().unwrap().split('\t').count(), 1 + 8);

    let bin = dir.path().join("emb.bin");
    let exp = kge(&["export", "--model", model.to_str().unwrap(), "--format", "bin", "--out", bin.to_str().unwrap()]);
    assert!(exp.status.success());
    let decoded = kge::io::decode_embeddings_binary(&fs::read(&bin).unwrap()).unwrap();
    assert_eq!(decoded.dim(), (n_entities, 8));
}

#[test]
fn missing_data_file_is_exit_2() {
    let (dir, cfg) = setup("ComplEx", "");
    fs::remove_file(dir.path().join("train.tsv")).unwrap();
    let out = train(&cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.lines().any(|l| l.starts_with("error kind=")), "{err}");
}

#[test]
fn config_errors_are_exit_1() {
    let (dir, cfg) = setup("RESCAL", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("DURA", "N3");
    fs::write(&cfg, text).unwrap();
    assert_eq!(train(&cfg, &dir.path().join("o")).status.code(), Some(1));

    let (dir, cfg) = setup("CP", "train.lr = fast\n");
    assert_eq!(train(&cfg, &dir.path().join("o")).status.code(), Some(1));
}

#[test]
fn divergence_is_exit_3() {
    let (dir, cfg) = setup("RESCAL", "model.init_scale = 1e200\n");
    let out = train(&cfg, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("epoch"));
}

#[test]
fn corrupt_model_is_exit_2() {
    let (dir, cfg) = setup("CP", "");
    let bad = dir.path().join("bad.kgm");
    fs::write(&bad, b"NOTAMODEL0000000").unwrap();
    let out = kge(&["evaluate", "--model", bad.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_duality_rejects_rescal() {
    let (dir, cfg) = setup("RESCAL", "");
    let out_dir = dir.path().join("o");
    assert!(train(&cfg, &out_dir).status.success());
    let out = kge(&["check-duality", "--model", out_dir.join("model.kgm").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unsupported"), "{}", stderr(&out));
}
