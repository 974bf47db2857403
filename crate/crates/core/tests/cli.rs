use std::path::Path;
use std::process::{Command, Output};

fn milli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_milli"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

const TINY: &str = r#"
name = "tiny"
repeats = 1
models = ["oracle", "instance"]
methods = ["inherent", "single", "milli"]

[dataset.generator]
train = 40
val = 10
test = 10
bag_size_mean = 8.0
dim = 3

[train]
max_epochs = 2
patience = 2
"#;

#[test]
fn help_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(milli(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(milli(dir.path(), &["--bogus", "evaluate"]).status.code(), Some(1));
    assert_eq!(milli(dir.path(), &["--config", "missing.toml", "evaluate"]).status.code(), Some(1));
    assert_eq!(milli(dir.path(), &["--jobs", "0", "generate"]).status.code(), Some(1));
}

#[test]
fn bad_config_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "repeats = 0\n").unwrap();
    assert_eq!(milli(dir.path(), &["--config", "bad.toml", "evaluate"]).status.code(), Some(1));
    std::fs::write(dir.path().join("typo.toml"), "repaets = 2\n").unwrap();
    assert_eq!(milli(dir.path(), &["--config", "typo.toml", "evaluate"]).status.code(), Some(1));
}

#[test]
fn evaluate_resumes_and_pins_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let first = milli(dir.path(), &["--config", "tiny.toml", "--out", "out", "evaluate"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.starts_with("# milli-report v1"));
    assert!(report.contains("n/a"), "oracle has no inherent method");

    let second = milli(dir.path(), &["--config", "tiny.toml", "--out", "out", "evaluate"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap(), report);

    // a different seed into the same directory is refused
    let clash = milli(dir.path(), &["--seed", "9", "--config", "tiny.toml", "--out", "out", "evaluate"]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn generate_train_explain() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let run = |args: &[&str]| {
        let mut all = vec!["--config", "tiny.toml", "--out", "out"];
        all.extend_from_slice(args);
        milli(dir.path(), &all)
    };
    let g = run(&["generate", "--kind", "four-class"]);
    assert_eq!(g.status.code(), Some(0), "{}", String::from_utf8_lossy(&g.stderr));
    let t = run(&["train", "--model", "attention", "--dataset", "out/dataset.txt"]);
    assert_eq!(t.status.code(), Some(0), "{}", String::from_utf8_lossy(&t.stderr));
    assert!(dir.path().join("out/attention.ckpt").exists());

    let e = run(&[
        "explain",
        "--model",
        "out/attention.ckpt",
        "--dataset",
        "out/dataset.txt",
        "--methods",
        "single,milli,inherent",
        "--limit",
        "3",
    ]);
    assert_eq!(e.status.code(), Some(0), "{}", String::from_utf8_lossy(&e.stderr));
    let tsv = std::fs::read_to_string(dir.path().join("out/attributions.tsv")).unwrap();
    let mut lines = tsv.lines();
    assert_eq!(lines.next(), Some("# milli-attributions v1"));
    // 3 bags x 3 methods x 4 classes, after the column header
    assert_eq!(lines.skip(1).count(), 36);

    let oracle = run(&["train", "--model", "oracle", "--dataset", "out/dataset.txt"]);
    assert_eq!(oracle.status.code(), Some(1));
    let missing = run(&["explain", "--model", "out/nope.ckpt", "--dataset", "out/dataset.txt"]);
    assert_eq!(missing.status.code(), Some(1));
}
