use std::process::Command;

fn perimit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perimit"))
}

#[test]
fn validate_reports_every_check() {
    let out = perimit().arg("validate").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 6, "{text}");
}

#[test]
fn demo_writes_keypoints_and_exemplar() {
    let dir = tempfile::tempdir().unwrap();
    let out = perimit()
        .args(["demo", "--task", "winding", "--reps", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let kp = std::fs::read_to_string(dir.path().join("demo_keypoints.csv")).unwrap();
    assert!(kp.lines().count() > 10);
    assert!(dir.path().join("exemplar.csv").exists());
}

#[test]
fn run_then_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        "[experiment]\ntask = \"stirring\"\nmethod = \"random-bo\"\nseeds = [4]\nbudget = 3\n\n[bo]\npool_random = 20\npool_local = 0\n",
    )
    .unwrap();
    let out = perimit()
        .arg("run")
        .arg(&cfg)
        .env("PERIMIT_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("stirring-random-bo");
    for f in [
        "config.toml",
        "trials-seed4.csv",
        "summary.csv",
        "aggregate.csv",
        "timings.csv",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let tidy = perimit().arg("plot-data").arg(&run).output().unwrap();
    let text = String::from_utf8_lossy(&tidy.stdout);
    assert!(text.starts_with("task,method,seed,trial,provenance,objective,performance,best_so_far"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn bad_input_fails_cleanly() {
    let unknown = perimit().args(["run", "--task", "folding"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let missing = perimit().args(["run", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
}
