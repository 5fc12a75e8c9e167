//! End-to-end CLI behavior: flag parsing, exit codes, output schemas,
//! config-file precedence and the plan export.

use std::process::Command;

fn ctv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctv"))
}

#[test]
fn unknown_suite_exits_2_with_usage() {
    let out = ctv()
        .args(["verify", "--suite", "nonexistent"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown suite"), "{err}");
    assert!(err.contains("usage:"), "{err}");
}

#[test]
fn missing_seed_for_randomized_suite_exits_2() {
    let out = ctv().args(["verify", "--suite", "lemmas"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_model_exits_2() {
    let out = ctv()
        .args(["verify", "--suite", "thm1", "--model", "gauss:n=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_exits_2() {
    let out = ctv().args(["verify", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_case_csv_schema() {
    let dir = std::env::temp_dir().join("ctv-cli-test-csv");
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("r.csv");
    let out = ctv()
        .args([
            "verify",
            "--suite",
            "thm1",
            "--model",
            "cauchy:beta=2,n=1",
            "--grid",
            "512",
            "--eps",
            "0.1",
            "--seed",
            "7",
            "--format",
            "csv",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "suite,case_id,model,params,lhs,rhs,margin,tol,pass"
    );
    // one row per (kind, eps): three kinds at a single epsilon
    assert_eq!(lines.count(), 3);
    // margins round-trip through 17 significant digits
    let mut rdr = csv::Reader::from_path(&out_path).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let margin: f64 = rec[6].parse().unwrap();
        assert!(margin.is_finite());
        assert!(rec[4].contains('e'), "17-digit scientific notation expected");
    }
}

#[test]
fn json_report_structure() {
    let out = ctv()
        .args([
            "verify",
            "--suite",
            "thm1",
            "--model",
            "ball:sigma=1,beta=2,n=1",
            "--grid",
            "512",
            "--eps",
            "0.1",
            "--seed",
            "7",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["config"]["suite"], "thm1");
    assert_eq!(parsed["partial"], false);
    let cases = parsed["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 3);
    for c in cases {
        assert_eq!(c["pass"], true);
        assert!(c["margin"].as_f64().unwrap() >= -1e-6);
        assert!(c["runtime_ms"].as_f64().unwrap() >= 0.0);
    }
    let summary = parsed["summary"].as_array().unwrap();
    assert_eq!(summary[0]["cases"], 3);
    assert_eq!(summary[0]["passed"], 3);
}

#[test]
fn config_file_flags_win_on_conflict() {
    let dir = std::env::temp_dir().join("ctv-cli-test-config");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("run.conf");
    std::fs::write(
        &cfg_path,
        "suite = thm1\nmodel = ball:sigma=1,beta=2,n=1\ngrid = 256\neps = 0.2\nseed = 9\n",
    )
    .unwrap();
    // config alone works
    let out = ctv()
        .args(["verify", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["config"]["grid"], 256);
    // a flag overrides the file
    let out = ctv()
        .args([
            "verify",
            "--config",
            cfg_path.to_str().unwrap(),
            "--grid",
            "512",
        ])
        .output()
        .unwrap();
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["config"]["grid"], 512);
}

#[test]
fn custom_model_id_from_file() {
    let dir = std::env::temp_dir().join("ctv-cli-test-custom");
    std::fs::create_dir_all(&dir).unwrap();
    let model_path = dir.join("quartic.model");
    std::fs::write(
        &model_path,
        "# convex quartic weight\ncase = 2\nbeta = 3\nn = 1\nhalfwidth = 60\ncoeffs = 1, 1, 0.1\n",
    )
    .unwrap();
    let id = format!("custom:{}", model_path.display());
    let out = ctv()
        .args([
            "verify", "--suite", "thm1", "--model", &id, "--grid", "1024", "--eps", "0.1",
            "--seed", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn export_plan_writes_triplets() {
    let dir = std::env::temp_dir().join("ctv-cli-test-plan");
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("plan.csv");
    let out = ctv()
        .args([
            "export-plan",
            "--source",
            "ball:sigma=1,beta=1,n=1",
            "--target",
            "ball:sigma=1,beta=2,n=1",
            "--cells",
            "32",
            "--cost",
            "w2",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "i,j,mass");
    let mut total = 0.0f64;
    for line in lines {
        let parts: Vec<&str> = line.split(',').collect();
        assert_eq!(parts.len(), 3);
        let _i: usize = parts[0].parse().unwrap();
        let _j: usize = parts[1].parse().unwrap();
        total += parts[2].parse::<f64>().unwrap();
    }
    assert!((total - 1.0).abs() < 1e-9, "plan mass {total}");
}

#[test]
fn ct_jobs_env_sets_default_worker_count() {
    let out = ctv()
        .env("CT_JOBS", "2")
        .args([
            "verify", "--suite", "thm1", "--model", "ball:sigma=1,beta=1,n=1", "--grid", "256",
            "--eps", "0.1", "--seed", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["config"]["jobs"], 2);
}

#[test]
fn invalid_h_fails_at_runtime_with_partial_report() {
    // an absurd user-supplied constant fails family validation: the run
    // aborts with exit 3 but still flushes a (partial) report document
    let out = ctv()
        .args([
            "verify", "--suite", "thm2", "--model", "ball:sigma=1,beta=2,n=1", "--grid", "512",
            "--eps", "0.1", "--h", "1e9", "--seed", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["partial"], true);
}

#[test]
fn tolerance_override_applies() {
    // an absurdly strict tolerance turns passing margins into failures
    let out = ctv()
        .args([
            "verify",
            "--suite",
            "decomp",
            "--model",
            "cauchy:beta=2,n=1",
            "--grid",
            "1024",
            "--tol",
            "decomp=1e-12",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical_modulo_runtime() {
    let args = [
        "verify", "--suite", "thm1", "--model", "cauchy:beta=3,n=1", "--grid", "1024",
        "--eps", "0.1,0.2", "--seed", "123",
    ];
    let run = || {
        let out = ctv().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        // strip the runtime fields, the only nondeterministic content
        text.lines()
            .filter(|l| !l.trim_start().starts_with("\"runtime_ms\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    assert!(first.contains("\"margin\""));
}
