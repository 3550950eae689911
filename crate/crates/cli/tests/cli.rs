use std::path::Path;
use std::process::{Command, Output};

fn genisbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genisbench"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn small_spec(dir: &Path) {
    std::fs::write(dir.join("spec.toml"), "n_rows = 1200\nseed = 5\n").unwrap();
}

#[test]
fn synth_then_pipeline_then_report() {
    let dir = tempfile::tempdir().unwrap();
    small_spec(dir.path());

    let out = genisbench(dir.path(), &["synth", "--synth", "spec.toml", "--out", "data"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("wrote 1200 rows"));
    assert!(dir.path().join("data/synth.csv").is_file());
    assert!(dir.path().join("data/taxonomy.csv").is_file());

    let out = genisbench(
        dir.path(),
        &["pipeline", "--synth", "spec.toml", "--task", "multiclass", "--models", "rf", "--select-k", "4", "--out", "run"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let run = dir.path().join("run");
    assert!(run.join("selection.json").is_file());
    assert!(run.join("models/rf_full.json").is_file());
    assert!(run.join("models/rf_selected.json").is_file());
    assert!(run.join("attribution/rf.json").is_file());

    let out = genisbench(dir.path(), &["report", "run"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let human = text(&out.stdout);
    assert!(human.contains("rf"), "{human}");

    let out = genisbench(dir.path(), &["report", "run", "--out", "again"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(std::fs::read_dir(dir.path().join("again")).unwrap().count() >= 2);
}

#[test]
fn ingest_reads_a_written_dataset() {
    let dir = tempfile::tempdir().unwrap();
    small_spec(dir.path());
    assert!(genisbench(dir.path(), &["synth", "--synth", "spec.toml", "--out", "data"]).status.success());
    std::fs::rename(dir.path().join("data/synth.csv"), dir.path().join("data/train.csv")).unwrap();

    let out = Command::new(env!("CARGO_BIN_EXE_genisbench"))
        .current_dir(dir.path())
        .env("GENISBENCH_DATA_DIR", dir.path().join("data"))
        .args(["ingest", "--task", "multiclass", "--out", "ingest"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("rows: 1200"), "{stdout}");
    for class in ["DoS", "Recon", "Benign", "Bruteforce"] {
        assert!(stdout.contains(class), "{stdout}");
    }
    assert!(dir.path().join("ingest/dataset.json").is_file());
}

#[test]
fn oversized_selection_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    small_spec(dir.path());
    let out = genisbench(dir.path(), &["select", "--synth", "spec.toml", "--select-k", "500"]);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("select"), "{err}");
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small_spec(dir.path());
    let out = genisbench(dir.path(), &["pipeline", "--synth", "spec.toml", "--models", "svm"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("svm"));

    let out = genisbench(dir.path(), &["select", "--synth", "spec.toml", "--select-k", "0"]);
    assert!(!out.status.success());

    let out = genisbench(dir.path(), &["report", "missing"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("missing"));
}
