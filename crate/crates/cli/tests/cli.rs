use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prochart_core::session::{comparable, parse_log};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prochart"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn transcript(name: &str) -> PathBuf {
    repo().join("crates/core/fixtures/transcripts").join(name)
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn replay_to(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let log = dir.join(name);
    ok(bin()
        .args(["replay", "--config"])
        .arg(repo().join("config/example.toml"))
        .arg("--transcript")
        .arg(transcript("explicit_examples.tsv"))
        .arg("--log-out")
        .arg(&log)
        .args(extra)
        .output()
        .unwrap());
    log
}

#[test]
fn replay_is_deterministic_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let a = parse_log(&std::fs::read_to_string(replay_to(dir.path(), "a.jsonl", &[])).unwrap()).unwrap();
    let b = parse_log(&std::fs::read_to_string(replay_to(dir.path(), "b.jsonl", &[])).unwrap()).unwrap();
    assert!(a.iter().all(|e| e.wall_time.is_some()));
    assert_eq!(comparable(&a), comparable(&b));
    assert!(a.iter().filter(|e| e.kind() == "chart_generated").count() >= 4);

    let c = replay_to(dir.path(), "c.jsonl", &["--no-wall-clock"]);
    let d = replay_to(dir.path(), "d.jsonl", &["--no-wall-clock"]);
    assert_eq!(std::fs::read(c).unwrap(), std::fs::read(d).unwrap());
}

#[test]
fn mode_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let log = parse_log(&std::fs::read_to_string(replay_to(dir.path(), "np.jsonl", &["--mode", "NP"])).unwrap())
        .unwrap();
    let charts = log.iter().filter(|e| e.kind() == "chart_generated").count();
    assert_eq!(charts, 3);
}

#[test]
fn gold_label_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("m.json");
    ok(bin()
        .args(["replay", "--mode", "NP", "--gold-labels", "--config"])
        .arg(repo().join("config/example.toml"))
        .arg("--transcript")
        .arg(transcript("metrics_50.tsv"))
        .arg("--metrics-out")
        .arg(&metrics)
        .output()
        .unwrap());
    let got: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(metrics).unwrap()).unwrap();
    let want: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(transcript("metrics_50.expected.json")).unwrap()).unwrap();
    assert_eq!(got["utterances"], want["utterances"]);
    assert_eq!(got["keyword_counts"], want["keyword_counts"]);
    assert_eq!(got["time_to_first_explicit"], want["time_to_first_explicit"]);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.tsv");
    let model = dir.path().join("model.json");
    ok(bin().args(["gen-corpus", "--per-class", "60", "--seed", "5", "--out"]).arg(&corpus).output().unwrap());
    let out = ok(bin().arg("train").arg("--corpus").arg(&corpus).arg("--out").arg(&model).output().unwrap());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("epoch 20"), "{stdout}");
    let out = ok(bin().arg("eval").arg("--model").arg(&model).arg("--corpus").arg(&corpus).output().unwrap());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("accuracy: "), "{stdout}");
    assert!(stdout.contains("(180 examples)"), "{stdout}");

    let cfg = dir.path().join("session.toml");
    std::fs::write(
        &cfg,
        format!(
            "mode = \"non_proactive\"\ndataset = \"{}\"\ncheckpoint = \"model.json\"\n",
            repo().join("crates/core/fixtures/hcdp_subset.csv").display()
        ),
    )
    .unwrap();
    let out = ok(bin().arg("replay").arg("--config").arg(&cfg).arg("--transcript").arg(transcript("explicit_examples.tsv")).output().unwrap());
    assert!(String::from_utf8_lossy(&out.stdout).lines().count() > 5);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let out = bin()
        .args(["replay", "--config"])
        .arg(repo().join("config/example.toml"))
        .args(["--transcript", "/nonexistent/t.tsv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reading /nonexistent/t.tsv"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "mode = \"sometimes\"\ndataset = \"x.csv\"\n").unwrap();
    let out = bin().arg("replay").arg("--config").arg(&cfg).args(["--transcript", "t"]).output().unwrap();
    assert!(!out.status.success());

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "A\tnot-a-time\t2\thello\n").unwrap();
    let out = bin()
        .arg("replay")
        .arg("--config")
        .arg(repo().join("config/example.toml"))
        .arg("--transcript")
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!out.status.success());
}
