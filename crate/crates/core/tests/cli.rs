use std::fs;
use std::process::Command;

fn dmobo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmobo"))
}

#[test]
fn run_then_inspect_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    let out = dir.path().join("results");
    let base = r#"{
        "problem": {"name": "dtlz2", "n_vars": 5, "n_objectives": 2},
        "optimizer": {"name": "OPT"},
        "workers": 2,
        "repetitions": 2,
        "budget": {"evaluations": 25},
        "seed": 7
    }"#;
    for opt in ["random", "nsga2"] {
        fs::write(&config, base.replace("OPT", opt)).unwrap();
        let status = dmobo().arg("run").arg("--config").arg(&config).env("DMOBO_OUTPUT_DIR", &out).output().unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let table = String::from_utf8(status.stdout).unwrap();
        assert!(table.lines().next().unwrap().contains("method"));
    }
    let archive = out.join("dtlz2_random_w2_r0.jsonl");
    assert!(archive.exists());

    let metrics = dmobo().args(["metrics", "--ref", "2,2", "--archive"]).arg(&archive).output().unwrap();
    assert!(metrics.status.success());
    let csv = String::from_utf8(metrics.stdout).unwrap();
    assert_eq!(csv.lines().count(), 26);

    let pattern = format!("{}/*.jsonl", out.display());
    let rank = dmobo().args(["rank", "--inputs", &pattern]).output().unwrap();
    assert!(rank.status.success(), "{}", String::from_utf8_lossy(&rank.stderr));
    let rank = String::from_utf8(rank.stdout).unwrap();
    assert!(rank.contains("nsga2") && rank.contains("random"));

    let summary = dmobo().args(["summarize", "--inputs", &pattern]).output().unwrap();
    assert!(summary.status.success());
    assert_eq!(String::from_utf8(summary.stdout).unwrap().lines().count(), 3);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"problem": {"name": "nope"}}"#).unwrap();
    let out = dmobo().arg("run").arg("--config").arg(&config).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
