use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_ABLATION: &str = r#"{
  "synth": { "n_source_domains": 3, "n_dev_domains": 1, "n_target_domains": 2, "samples_per_domain": 30 },
  "episodes": { "per_source_domain": 3, "per_dev_domain": 2, "per_target_domain": 3 },
  "encoder": { "dim": 16, "context_window": 0 },
  "run": { "learning_rate": 0.01, "max_steps": 20, "eval_every": 10 },
  "n_seeds": 2
}"#;

fn jmrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jmrm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = jmrm(args);
    assert!(
        out.status.success(),
        "jmrm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ablate_twice_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(&cfg, SMALL_ABLATION).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["ablate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["ablate", "--config", s(&cfg), "--out", s(&b)]);
    for name in ["ablation.json", "ablation.csv", "ablation.txt", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
    let csv = fs::read_to_string(a.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 3);
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "ablate");
    assert!(manifest.get("timestamp").is_none());
}

#[test]
fn train_then_eval_reproduces_the_best_dev_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let syn = d.join("syn");
    ok(&["gen-synth", "--seed", "3", "--out", s(&syn)]);
    for split in ["source", "dev", "target"] {
        ok(&[
            "build-episodes",
            "--corpora",
            s(&syn.join(format!("{split}.json"))),
            "--shots",
            "1",
            "--query-size",
            "6",
            "--count",
            "3",
            "--out",
            s(&d.join(split)),
        ]);
    }
    let enc = d.join("enc.json");
    fs::write(&enc, r#"{ "dim": 16, "context_window": 0 }"#).unwrap();
    let run = d.join("run.json");
    fs::write(&run, r#"{ "learning_rate": 0.01, "max_steps": 30, "eval_every": 10 }"#).unwrap();
    let dev = d.join("dev/episodes.json");
    ok(&[
        "train",
        "--config",
        s(&run),
        "--encoder-config",
        s(&enc),
        "--episodes",
        s(&d.join("source/episodes.json")),
        "--dev",
        s(&dev),
        "--vocab-from",
        s(&d.join("target/episodes.json")),
        "--out",
        s(&d.join("train")),
    ]);
    ok(&[
        "eval",
        "--config",
        s(&run),
        "--episodes",
        s(&dev),
        "--checkpoint",
        s(&d.join("train/checkpoint.json")),
        "--out",
        s(&d.join("eval")),
    ]);
    let trained = json(&d.join("train/metrics.json"));
    let evaluated = json(&d.join("eval/metrics.json"));
    assert_eq!(trained["dev"]["metrics"], evaluated["metrics"]);

    let log = fs::read_to_string(d.join("train/train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 31);

    let report = d.join("report");
    ok(&["report", s(&d.join("eval/metrics.json")), "--out", s(&report)]);
    let text = fs::read_to_string(report.join("report.txt")).unwrap();
    assert!(text.contains("eval"));
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["oracle-check", "--trials", "40", "--seed", "11", "--out", s(dir.path())]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(dir.path().join("oracle_report.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = jmrm(&["build-episodes", "--corpora", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["kind"].is_string());
    assert!(err["error"]["message"].is_string());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{ "corpora": [ { "domain": "d" } ] }"#).unwrap();
    let out = jmrm(&["build-episodes", "--corpora", s(&bad), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "MalformedInput");
}
