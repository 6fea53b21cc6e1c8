use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pause-lm");

const SMALL: &str = r#"
[synth]
n_per_group = 5
words_min = 6
words_max = 9

[model]
d_model = 8
n_layers = 1
n_heads = 2
d_ff = 16
max_seq_len = 12

[pretrain]
learning_rate = 0.001
epochs = 1

[finetune]
learning_rate = 0.001
iterations = 2
"#;

fn pause_lm(root: &Path, args: &[&str]) -> Output {
    let config = root.join("small.toml");
    if !config.exists() {
        fs::write(&config, SMALL).unwrap();
    }
    Command::new(BIN).arg("--config").arg(&config).args(args).current_dir(root).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_synth_then_ingest_counts_match() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let o = pause_lm(root, &["gen-synth", "--run-dir", "synth"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("synth/config.toml").exists());
    let o = pause_lm(root, &["ingest", "--run-dir", "ingest", "--set", "paths.data=synth/dataset.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("ingest/ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["transcripts"], 10);
    assert_eq!(report["control"], 5);
    assert_eq!(report["ad"], 5);
}

#[test]
fn default_run_directory_is_timestamped_and_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let o = pause_lm(dir.path(), &["gen-synth", "--set", "paths.runs_dir=out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed = String::from_utf8_lossy(&o.stdout).trim().to_string();
    let name = Path::new(&printed).file_name().unwrap().to_string_lossy().into_owned();
    let parts: Vec<&str> = name.splitn(3, '-').collect();
    assert_eq!(parts.len(), 3, "{name}");
    assert_eq!(parts[1].len(), 8);
    assert_eq!(parts[2], "gen-synth");
    assert!(dir.path().join(&printed).join("dataset.jsonl").exists());
}

#[test]
fn eval_clf_without_checkpoint_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = pause_lm(dir.path(), &["eval-clf", "--run-dir", "r"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("paths.checkpoint"), "{}", stderr(&o));
}

#[test]
fn bad_input_maps_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(root.join("bad.jsonl"), "{\"id\": \"a\", \"words\": [{\"w\": \"x\", \"start\": 1.0, \"end\": 0.5}]}\n")
        .unwrap();
    let o = pause_lm(root, &["ingest", "--run-dir", "r", "--set", "paths.data=bad.jsonl"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = pause_lm(root, &["stats", "--run-dir", "r", "--set", "model.bogus=1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = Command::new(BIN).arg("no-such-command").output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn full_pipeline_leaves_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let run = |args: &[&str]| {
        let o = pause_lm(root, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    let data = "paths.data=synth/dataset.jsonl";
    let vocab = "paths.vocab=vocab/vocab.txt";
    run(&["gen-synth", "--run-dir", "synth"]);
    let before = fs::read(root.join("synth/dataset.jsonl")).unwrap();
    run(&["build-vocab", "--run-dir", "vocab", "--set", data]);
    run(&["pretrain", "--run-dir", "pre", "--set", data, "--set", vocab]);
    run(&[
        "finetune",
        "--run-dir",
        "fine",
        "--set",
        data,
        "--set",
        vocab,
        "--set",
        "paths.checkpoint=pre/checkpoint.bin",
    ]);
    let ckpt = "paths.checkpoint=fine/checkpoint.bin";
    let pre_ckpt = fs::read(root.join("pre/checkpoint.bin")).unwrap();
    run(&["eval-pause", "--run-dir", "ep", "--set", data, "--set", vocab, "--set", ckpt, "--threads", "2"]);
    run(&["eval-clf", "--run-dir", "ec", "--set", data, "--set", vocab, "--set", ckpt]);
    run(&["stats", "--run-dir", "st", "--set", data]);

    assert_eq!(fs::read(root.join("synth/dataset.jsonl")).unwrap(), before);
    assert_eq!(fs::read(root.join("pre/checkpoint.bin")).unwrap(), pre_ckpt);
    let log = fs::read_to_string(root.join("pre/train_log.jsonl")).unwrap();
    let entry: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["stage", "epoch", "iteration", "loss_total", "loss_mlm", "loss_pause", "loss_cls", "wall_ms"] {
        assert!(entry.get(key).is_some(), "{key}");
    }
    assert!(root.join("pre/checkpoint-epoch001.bin").exists());
    let clf: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("ec/clf_report.json")).unwrap()).unwrap();
    assert_eq!(clf["predictions"].as_array().unwrap().len(), 10);
    let rmse: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("ep/rmse_report.json")).unwrap()).unwrap();
    assert!(rmse["groups"]["ad"]["mean"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(root.join("st/pause_histogram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 300);
    assert!(root.join("st/pause_histogram_long.csv").exists());
}

#[test]
fn mismatched_vocabulary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let run = |args: &[&str]| pause_lm(root, args);
    assert!(run(&["gen-synth", "--run-dir", "synth"]).status.success());
    let data = "paths.data=synth/dataset.jsonl";
    assert!(run(&["build-vocab", "--run-dir", "vocab", "--set", data]).status.success());
    assert!(run(&["pretrain", "--run-dir", "pre", "--set", data, "--set", "paths.vocab=vocab/vocab.txt"])
        .status
        .success());
    let mut text = fs::read_to_string(root.join("vocab/vocab.txt")).unwrap();
    text.push_str("extra\n");
    fs::write(root.join("other.txt"), text).unwrap();
    let o = run(&[
        "eval-clf",
        "--run-dir",
        "ec",
        "--set",
        data,
        "--set",
        "paths.vocab=other.txt",
        "--set",
        "paths.checkpoint=pre/checkpoint.bin",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("vocabulary mismatch"));
}
