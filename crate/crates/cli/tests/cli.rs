use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stochround(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochround"))
        .args(args)
        .env("STOCHROUND_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn generate_validate_solve() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "inst.json");
    for kind in ["sufl", "vc", "sc", "cip"] {
        let out = stochround(&["gen", "--kind", kind, "--seed", "4", "--out", &inst]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = stochround(&["validate", &inst]);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
        let sol = path(dir.path(), "sol.json");
        let out = stochround(&["solve-lp", &inst, "--dual", "--out", &sol]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
        assert!(doc["objective"].as_f64().unwrap() > 0.0);
        if kind == "sufl" {
            assert!(doc["yA"].is_array() && doc["duals"]["v"].is_array());
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let a = stochround(&["gen", "--kind", "sufl", "--seed", "9", "--facilities", "5"]);
    let b = stochround(&["gen", "--kind", "sufl", "--seed", "9", "--facilities", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn invalid_instance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    fs::write(
        &bad,
        r#"{"kind":"sufl","facilities":[{"id":"f","f1":1,"f2_by_scenario":[2]}],
            "clients":[{"id":"c"}],"distances":[[1]],
            "scenarios":[{"prob":0.9,"clients":[0]}]}"#,
    )
    .unwrap();
    let out = stochround(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prob"));
}

#[test]
fn round_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "inst.json");
    assert!(
        stochround(&["gen", "--kind", "sufl", "--seed", "2", "--out", &inst])
            .status
            .success()
    );
    let r1 = path(dir.path(), "r1.json");
    let r2 = path(dir.path(), "r2.json");
    for r in [&r1, &r2] {
        let out = stochround(&[
            "round",
            "sufl",
            &inst,
            "--algo",
            "per-scenario",
            "--trials",
            "300",
            "--seed",
            "5",
            "--report",
            r,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&r1).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["algorithm"], "per-scenario");
}

#[test]
fn round_covering_and_strict() {
    let dir = tempfile::tempdir().unwrap();
    let tree = path(dir.path(), "tree.json");
    assert!(
        stochround(&["gen", "--kind", "vc", "--seed", "1", "--out", &tree])
            .status
            .success()
    );
    for (algo, lambda) in [
        ("dependent", "auto"),
        ("independent", "auto"),
        ("independent", "3.5"),
    ] {
        let out = stochround(&[
            "round", "cip", &tree, "--algo", algo, "--lambda", lambda, "--trials", "200",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let inst = path(dir.path(), "inst.json");
    assert!(
        stochround(&["gen", "--kind", "sufl", "--seed", "1", "--out", &inst])
            .status
            .success()
    );
    let out = stochround(&[
        "round",
        "sufl",
        &inst,
        "--algo",
        "per-scenario",
        "--strict",
        "--trials",
        "200",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("stretch <= 5.0000"));
    let out = stochround(&[
        "round", "sufl", &inst, "--algo", "lp", "--strict", "--trials", "200",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "inst.json");
    assert!(
        stochround(&["gen", "--kind", "sufl", "--seed", "6", "--out", &inst])
            .status
            .success()
    );
    let out_file = path(dir.path(), "all.json");
    let out = stochround(&[
        "evaluate",
        &inst,
        "--algo",
        "pd,lp,alg1,alg2,alg3,alg3-coin,per-scenario",
        "--trials",
        "200",
        "--oracle",
        "--out",
        &out_file,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 7);
    assert!(String::from_utf8_lossy(&out.stdout).contains("algorithm              mean"));

    // too few trials is an input error
    let out = stochround(&["evaluate", &inst, "--algo", "lp", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = stochround(&["evaluate", &inst, "--algo", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown algorithm"));
}
