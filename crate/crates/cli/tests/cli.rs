use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_seislabel"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn synth(dir: &Path) {
    let out = run(
        &["synth", "--classes", "3", "--per-class", "12", "--size", "32", "--seed", "4", "--out", "s"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn quickstart_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = run(&["pipeline", "--config", "s/quickstart.cfg", "--set", "iterations=40"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("s/run");
    for f in [
        "weak_labels.csv",
        "weak_corpus.slc",
        "weak_masks.slm",
        "labels.slm",
        "raw_labels.slm",
        "convergence.csv",
        "metrics.csv",
        "precision_at_m.csv",
        "roc.csv",
        "pixel_metrics.csv",
        "pipeline.cfg",
    ] {
        assert!(run_dir.join(f).is_file(), "missing {f}");
    }
    let weak = std::fs::read_to_string(run_dir.join("weak_labels.csv")).unwrap();
    assert_eq!(weak.lines().next().unwrap(), "patch_id,class_id,exemplar_id,rank,score");
    assert_eq!(weak.lines().count(), 1 + 36);
    let conv = std::fs::read_to_string(run_dir.join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().next().unwrap(), "iteration,overall,w_part,h_part");
    assert_eq!(conv.lines().count(), 1 + 41);
}

#[test]
fn missing_exemplars_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = run(
        &["pipeline", "--config", "s/quickstart.cfg", "--set", "exemplars=s/nowhere"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exemplars"));
}

#[test]
fn unknown_key_and_bad_numbers_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    for set in ["colour=red", "k=0", "rho_w=1.5"] {
        let out = run(&["pipeline", "--config", "s/quickstart.cfg", "--set", set], dir.path());
        assert_eq!(out.status.code(), Some(2), "{set}");
    }
}

#[test]
fn corrupt_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.slc"), b"NOPE0000000000000000").unwrap();
    let out = run(&["features", "--corpus", "bad.slc"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn same_seed_gives_identical_masks() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let mut masks = Vec::new();
    for out_dir in ["a", "b"] {
        let set = format!("output={out_dir}");
        let out = run(
            &["pipeline", "--config", "s/quickstart.cfg", "--set", "iterations=30", "--set", &set],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        masks.push(std::fs::read(dir.path().join(out_dir).join("labels.slm")).unwrap());
    }
    assert_eq!(masks[0], masks[1]);
}

#[test]
fn stages_run_standalone_on_previous_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let steps: [&[&str]; 4] = [
        &["features", "--corpus", "s/corpus.slc", "--out", "f"],
        &[
            "retrieve", "--corpus", "s/corpus.slc", "--exemplars", "s/exemplars", "--m", "12", "--masks",
            "s/masks.slm", "--out", "r",
        ],
        &["labelmap", "--corpus", "r/weak_corpus.slc", "--k", "5", "--iters", "30", "--out", "l"],
        &[
            "evaluate", "--corpus", "s/corpus.slc", "--similarity", "f/similarity.sls", "--labels", "l/labels.slm",
            "--masks", "r/weak_masks.slm", "--max-m", "5", "--out", "e",
        ],
    ];
    for args in steps {
        let out = run(args, d);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["f/features.slf", "f/similarity.sls", "f/similarity.csv", "e/metrics.csv", "e/pixel_metrics.csv"] {
        assert!(d.join(f).is_file(), "missing {f}");
    }
    let pam = std::fs::read_to_string(d.join("e/precision_at_m.csv")).unwrap();
    assert_eq!(pam.lines().count(), 1 + 5 * 4);
}

#[test]
fn evaluate_writes_robustness_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let out = run(
        &[
            "evaluate", "--corpus", "s/corpus.slc", "--masks", "s/masks.slm", "--robustness", "--robustness-k", "2,4",
            "--fractions", "0,0.1", "--trials", "1", "--iters", "20", "--out", "e",
        ],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("e/robustness.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "parameter,value,fraction,relative_performance,accuracy,trials"
    );
    assert_eq!(lines.next().unwrap().split(',').nth(3), Some("1"));
    assert_eq!(text.lines().count(), 1 + 4);
}
