use std::path::Path;
use std::process::{Command, Output};

fn gcn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcn"))
        .args(args)
        .current_dir(dir)
        .env_remove("GCN_OUT_DIR")
        .output()
        .expect("run gcn")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

const SMALL: [&str; 8] = ["--filters", "4", "--embed-dim", "8", "--max-len", "20", "--epochs", "2"];

fn synth(dir: &Path) {
    ok(&gcn(dir, &["synth-gen", "--size", "80", "--seed", "3", "--out", "data"]));
}

#[test]
fn train_writes_checkpoint_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let mut args = vec!["train", "--source", "data/alpha.jsonl", "--gate", "glu", "--seed", "7", "--out", "run"];
    args.extend(SMALL);
    ok(&gcn(dir, &args));
    for f in ["model.gcnc", "vocab.json", "train_report.json", "train_report.csv", "manifest.json"] {
        assert!(dir.join("run").join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["gate"], "glu");
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["overrides"]["seed"], 7);
    assert_eq!(manifest["config"]["batchSize"], 16);
    assert_eq!(manifest["config"]["patience"], 10);
    assert_eq!(manifest["inputs"][0]["hash"].as_str().unwrap().len(), 64);

    let o = gcn(dir, &["eval", "--checkpoint", "run/model.gcnc", "--target", "data/beta.jsonl", "--out", "ev"]);
    ok(&o);
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("ev/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["examples"], 16);

    let o = gcn(dir, &["inspect-gates", "--checkpoint", "run/model.gcnc", "--text", "sharedpos1 alphanoise2", "--out", "ig"]);
    ok(&o);
    assert!(dir.join("ig/gates_h3.csv").exists());
}

#[test]
fn out_dir_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gcn"))
        .args(["synth-gen", "--size", "20"])
        .current_dir(tmp.path())
        .env("GCN_OUT_DIR", "from_env")
        .output()
        .unwrap();
    ok(&o);
    assert!(tmp.path().join("from_env/alpha.jsonl").exists());
}

#[test]
fn matrix_rows_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let mut csvs = Vec::new();
    for run in ["m1", "m2"] {
        let mut args = vec![
            "matrix", "--domains", "data/alpha.jsonl", "data/beta.jsonl", "--models", "glu,none", "--runs", "1",
            "--out", run,
        ];
        args.extend(SMALL);
        ok(&gcn(dir, &args));
        csvs.push(std::fs::read(dir.join(run).join("matrix.csv")).unwrap());
        assert!(dir.join(run).join("timing.csv").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--source", "data/alpha.jsonl", "--filters", "0"],
        vec!["train", "--source", "data/alpha.jsonl", "--gate", "lstm"],
        vec!["train"],
        vec!["eval", "--checkpoint", "x.gcnc"],
        vec!["matrix", "--domains", "data/alpha.jsonl"],
        vec!["bogus"],
    ];
    for c in cases {
        assert_eq!(gcn(dir, &c).status.code(), Some(2), "{c:?}");
    }
    std::fs::write(dir.join("cfg.json"), r#"{"filtres": 4}"#).unwrap();
    let o = gcn(dir, &["train", "--source", "data/alpha.jsonl", "--config", "cfg.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("filtres"));
}

#[test]
fn runtime_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = gcn(dir, &["train", "--source", "missing.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(dir.join("bad.jsonl"), "{\"text\": \"a\", \"label\": 3, \"domain\": \"bad\"}\n").unwrap();
    let o = gcn(dir, &["train", "--source", "bad.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":1:"));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    std::fs::write(
        dir.join("cfg.json"),
        r#"{"gate": "gtru", "filters": 4, "embedDim": 8, "maxLen": 20, "epochs": 1, "seed": 5}"#,
    )
    .unwrap();
    let o = gcn(
        dir,
        &["train", "--source", "data/alpha.jsonl", "--config", "cfg.json", "--seed", "9", "--out", "p"],
    );
    ok(&o);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("p/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["gate"], "gtru");
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["filters"], 4);
}

#[test]
fn grad_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gcn(tmp.path(), &["grad-check", "--seeds", "0"]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("max relative error"));
}
