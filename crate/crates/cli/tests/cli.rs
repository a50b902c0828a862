use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ossslab"))
        .args(args)
        .env_remove("OSSSLAB_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn pc_solve_reports_the_square_lattice_point() {
    let out = run(&["pc-solve", "--family", "square", "--q", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let p_c = v["p_c"].as_f64().unwrap();
    assert!((p_c - 2f64.sqrt() / (1.0 + 2f64.sqrt())).abs() < 1e-12);
}

#[test]
fn verify_osss_succeeds_on_a_small_box() {
    let out = run(&[
        "verify-osss",
        "--graph",
        "box:square:1",
        "--q",
        "2",
        "--p",
        "0.5",
        "--tree",
        "fixed",
        "--f",
        "connect",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["holds"], serde_json::Value::Bool(true));
}

#[test]
fn verify_osss_csv_has_edge_rows() {
    let out = run(&[
        "--format",
        "csv",
        "verify-osss",
        "--graph",
        "box:square:1",
        "--p",
        "0.3",
        "--f",
        "or",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("edge,"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["pc-solve", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(
        run(&["pc-solve", "--family", "kagome"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["--format", "csv", "pc-solve"]).status.code(), Some(1));
    let big = run(&[
        "exact-law",
        "--graph",
        "box:square:2",
        "--max-exact-edges",
        "24",
    ]);
    assert_eq!(big.status.code(), Some(1));
}

#[test]
fn hypothesis_witness_exits_with_two() {
    let out = run(&["lemma31", "--family", "threshold"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        json(&out)["hypothesis_holds"],
        serde_json::Value::Bool(false)
    );
    assert_eq!(
        run(&["lemma31", "--family", "smoothed"]).status.code(),
        Some(0)
    );
}

#[test]
fn selftests_pass() {
    for cmd in [
        "pc-solve",
        "verify-osss",
        "duality-check",
        "potts-identity",
        "revealment",
        "exact-law",
    ] {
        let out = run(&["--selftest", cmd]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert_eq!(json(&out)["passed"], serde_json::Value::Bool(true));
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = [
        "--seed",
        "7",
        "estimate-theta",
        "--n",
        "2",
        "--q",
        "2",
        "--p",
        "0.5",
        "--sweeps",
        "200",
        "--burnin",
        "50",
        "--chains",
        "2",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&[
        "--seed",
        "8",
        "estimate-theta",
        "--n",
        "2",
        "--q",
        "2",
        "--p",
        "0.5",
        "--sweeps",
        "200",
        "--burnin",
        "50",
        "--chains",
        "2",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn output_file_is_written() {
    let dir = std::env::temp_dir().join(format!("ossslab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("grid.csv");
    let out = run(&[
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
        "sharpness-scan",
        "--mode",
        "exact",
        "--family",
        "hexagonal",
        "--sizes",
        "1",
        "--beta-min",
        "0.2",
        "--beta-max",
        "0.6",
        "--beta-step",
        "0.2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("beta,n,theta"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn crossing_defaults_to_the_self_dual_rectangle() {
    let out = run(&["crossing", "--n", "2", "--q", "1", "--p", "0.5", "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["details"]["height"], 3);
    assert!((v["exact"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
