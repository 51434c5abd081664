use std::path::Path;
use std::process::{Command, Output};

fn plotgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plotgrid"))
        .args(args)
        .env_remove("PLOTGRID_WORKERS")
        .output()
        .expect("spawn plotgrid")
}

fn ok(args: &[&str]) -> String {
    let out = plotgrid(args);
    assert!(
        out.status.success(),
        "plotgrid {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn collage(root: &Path) {
    ok(&[
        "make-collage",
        "--out",
        s(root),
        "--species",
        "5",
        "--per-species",
        "20",
        "--plots",
        "6",
        "--grid",
        "2",
        "--species-per-plot",
        "2",
        "--seed",
        "3",
    ]);
}

fn write_config(root: &Path, work: &str, min_count: u64) -> std::path::PathBuf {
    let path = root.join(format!("{work}.toml"));
    let text = format!(
        r#"workers = 2

[paths]
train_images = "train"
plots = "plots"
truth = "truth.csv"
work_dir = "{work}"

[preprocess]
min_count = {min_count}

[train]
epochs = 20

[infer]
mode = "grid-argmax"
grid_n = 2
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_then_rerun_skips_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    collage(dir.path());
    let cfg = write_config(dir.path(), "work", 10);

    let first = ok(&["run", "--config", s(&cfg)]);
    for stage in [
        "preprocess",
        "embed",
        "train",
        "infer",
        "evaluate",
        "submit",
    ] {
        assert!(first.contains(&format!("{stage}: ran")), "{first}");
    }
    assert!(first.contains("micro_f1="));
    let work = dir.path().join("work");
    let artifacts = [
        "model.lin1",
        "predictions.jsonl",
        "report.json",
        "submission.csv",
    ];
    let before: Vec<Vec<u8>> = artifacts
        .iter()
        .map(|a| std::fs::read(work.join(a)).unwrap())
        .collect();

    let second = ok(&["run", "--config", s(&cfg)]);
    assert_eq!(second.matches(": skipped").count(), 6, "{second}");
    let after: Vec<Vec<u8>> = artifacts
        .iter()
        .map(|a| std::fs::read(work.join(a)).unwrap())
        .collect();
    assert_eq!(before, after);

    // A changed output is detected and rebuilt.
    std::fs::write(work.join("submission.csv"), "tampered").unwrap();
    let third = ok(&["run", "--config", s(&cfg)]);
    assert!(
        third.contains("submit: ran") && third.contains("infer: skipped"),
        "{third}"
    );
    assert_eq!(
        std::fs::read(work.join("submission.csv")).unwrap(),
        before[3]
    );
}

#[test]
fn empty_catalog_fails_in_train() {
    let dir = tempfile::tempdir().unwrap();
    collage(dir.path());
    let cfg = write_config(dir.path(), "work", 1000);
    let out = plotgrid(&["run", "--config", s(&cfg)]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("train") && stderr.contains("empty catalog"),
        "{stderr}"
    );
    assert!(!dir.path().join("work/model.lin1").exists());
}

#[test]
fn invalid_config_fails_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    collage(dir.path());
    let cfg = write_config(dir.path(), "work", 10);
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("epochs = 20", "epochs = 0");
    std::fs::write(&cfg, text).unwrap();
    let out = plotgrid(&["run", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[train]"));
    assert!(!dir.path().join("work").exists());
}

#[test]
fn subcommands_match_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    collage(d);
    let cfg = write_config(d, "work", 10);
    ok(&["run", "--config", s(&cfg)]);

    let step = d.join("step");
    let p = |name: &str| step.join(name).to_str().unwrap().to_string();
    ok(&[
        "preprocess",
        "--input",
        s(&d.join("train")),
        "--output",
        &p("images"),
        "--min-count",
        "10",
    ]);
    ok(&[
        "embed",
        "--input",
        &p("images"),
        "--output",
        &p("emb"),
        "--kind",
        "cls768",
        "--extractor",
        "toy",
        "--seed",
        "7",
    ]);
    ok(&[
        "train",
        "--embeddings",
        &p("emb"),
        "--catalog",
        &p("images/catalog.csv"),
        "--out",
        &p("model.lin1"),
        "--lr",
        "1e-3",
        "--epochs",
        "20",
        "--batch",
        "64",
        "--seed",
        "7",
    ]);
    ok(&[
        "--workers",
        "1",
        "infer",
        "--model",
        &p("model.lin1"),
        "--images",
        s(&d.join("plots")),
        "--mode",
        "grid-argmax",
        "--grid",
        "2",
        "--out",
        &p("pred.jsonl"),
    ]);
    let eval = ok(&[
        "evaluate",
        "--pred",
        &p("pred.jsonl"),
        "--truth",
        s(&d.join("truth.csv")),
        "--report",
        &p("report.json"),
    ]);
    assert!(eval.contains("micro_f1="));
    ok(&[
        "submit",
        "--pred",
        &p("pred.jsonl"),
        "--cap",
        "5",
        "--out",
        &p("sub.csv"),
    ]);

    let work = d.join("work");
    for (a, b) in [
        ("model.lin1", "model.lin1"),
        ("predictions.jsonl", "pred.jsonl"),
        ("report.json", "report.json"),
        ("submission.csv", "sub.csv"),
    ] {
        assert_eq!(
            std::fs::read(work.join(a)).unwrap(),
            std::fs::read(step.join(b)).unwrap(),
            "{a}"
        );
    }
    let sub = std::fs::read_to_string(step.join("sub.csv")).unwrap();
    assert!(sub.starts_with("plot_id;species_ids\nplot_0000;["));
}

#[test]
fn bad_arguments_are_reported() {
    let out = plotgrid(&[
        "infer", "--model", "m", "--images", "i", "--out", "o", "--mode", "fancy",
    ]);
    assert!(!out.status.success());
    let out = plotgrid(&[
        "evaluate",
        "--pred",
        "/nonexistent/p.jsonl",
        "--truth",
        "t",
        "--report",
        "r",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}
