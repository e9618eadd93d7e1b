use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
length=60
feature_dim=6
distractor_dim=2
hidden=6
n_neurons=11
sessions=4
eval_sessions=1
w=5
epochs=2
";

fn sinesteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sinesteer"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn help_documents_every_subcommand() {
    let subcommands = [
        "synth",
        "prep",
        "codec-encode",
        "codec-decode",
        "train",
        "eval",
        "compare",
        "plot-data",
    ];
    for sub in subcommands {
        let out = sinesteer(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        let text = stdout(&out);
        for flag in ["--seed", "--config", "--out"] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
    }
    assert!(sinesteer(&["--help"]).status.success());
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = sinesteer(&["codec-encode", "--angle", "3", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("ERROR 1:"));
    let out = sinesteer(&["train", "--epochs", "1"]);
    assert_eq!(out.status.code(), Some(1), "missing --out");
}

#[test]
fn encode_zero_starts_at_zero() {
    let out = sinesteer(&[
        "codec-encode",
        "--angle",
        "0",
        "--n",
        "95",
        "--phi-max",
        "190",
    ]);
    assert!(out.status.success());
    let values: Vec<f64> = stdout(&out)
        .trim()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 95);
    assert_eq!(values[0], 0.0);
}

#[test]
fn encode_then_decode_round_trips() {
    for angle in ["42", "-117.5", "190"] {
        let wave = stdout(&sinesteer(&["codec-encode", "--angle", angle]));
        let out = sinesteer(&["codec-decode", "--wave", wave.trim()]);
        assert!(out.status.success(), "{}", stderr(&out));
        let got: f64 = stdout(&out).trim().parse().unwrap();
        assert!((got - angle.parse::<f64>().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn numeric_and_data_errors_have_their_codes() {
    let out = sinesteer(&["codec-decode", "--wave", "0,0,0,0,0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("ERROR 3:"));
    let out = sinesteer(&["codec-encode", "--angle", "300"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("ERROR 2:"));
}

#[test]
fn prep_writes_downsampled_labels() {
    let dir = tempfile::tempdir().unwrap();
    let mut log = String::from("timestamp_s,angle_deg\n");
    for i in 0..1001 {
        log.push_str(&format!(
            "{},{}\n",
            i as f64 / 100.0,
            (i as f64 / 50.0).sin() * 30.0
        ));
    }
    let log_path = dir.path().join("log.csv");
    fs::write(&log_path, log).unwrap();
    let out_dir = dir.path().join("out");
    let out = sinesteer(&[
        "prep",
        "--log",
        log_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let labels = fs::read_to_string(out_dir.join("labels.csv")).unwrap();
    // 10 s at 20 Hz is 201 frames; every 10th is kept.
    assert_eq!(labels.lines().count(), 1 + 21);
}

#[test]
fn file_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run_all = |tag: &str| {
        let base = dir.path().join(tag);
        let sub = |name: &str| base.join(name).to_str().unwrap().to_string();
        let ok = |args: &[&str]| {
            let out = sinesteer(args);
            assert!(out.status.success(), "{args:?}: {}", stderr(&out));
        };
        ok(&[
            "synth",
            "--config",
            &cfg,
            "--sessions",
            "2",
            "--seed",
            "5",
            "--out",
            &sub("synth"),
        ]);
        ok(&[
            "train",
            "--config",
            &cfg,
            "--seed",
            "3",
            "--out",
            &sub("train"),
        ]);
        let ckpt = sub("train/checkpoint.ckpt");
        ok(&[
            "eval",
            "--config",
            &cfg,
            "--checkpoint",
            &ckpt,
            "--out",
            &sub("eval"),
        ]);
        ok(&[
            "eval",
            "--config",
            &cfg,
            "--checkpoint",
            &ckpt,
            "--features",
            &sub("synth/session0_features.csv"),
            "--labels",
            &sub("synth/session0_labels.csv"),
            "--out",
            &sub("eval_files"),
        ]);
        ok(&[
            "compare",
            "--config",
            &cfg,
            "--seeds",
            "2",
            "--out",
            &sub("compare"),
        ]);
        ok(&[
            "plot-data",
            "--config",
            &cfg,
            "--checkpoint",
            &ckpt,
            "--comparison",
            &sub("compare/comparison.csv"),
            "--out",
            &sub("plot"),
        ]);
        [
            "synth",
            "train",
            "eval",
            "eval_files",
            "compare",
            "compare/checkpoints",
            "plot",
        ]
        .iter()
        .map(|d| read_dir_sorted(&base.join(d)))
        .collect::<Vec<_>>()
    };
    let a = run_all("a");
    let b = run_all("b");
    assert_eq!(a, b);

    let comparison = String::from_utf8(a[4][0].1.clone()).unwrap();
    assert_eq!(comparison.lines().count(), 7);
    assert!(!comparison.contains("failed"));
}

#[test]
fn compare_reuses_cached_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("cmp");
    let args = [
        "compare",
        "--config",
        &cfg,
        "--seeds",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    assert!(sinesteer(&args).status.success());
    let first = read_dir_sorted(&out.join("checkpoints"));
    assert_eq!(first.len(), 6);
    assert!(sinesteer(&args).status.success());
    assert_eq!(read_dir_sorted(&out.join("checkpoints")), first);
}
