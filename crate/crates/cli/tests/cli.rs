use std::path::Path;
use std::process::{Command, Output};

fn spre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spre"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn converge_csv_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = spre(&[
            "converge",
            "--problem",
            "cubature",
            "--d",
            "2",
            "--s",
            "1",
            "--max-exponent",
            "3",
            "--methods",
            "RAW,MRE,SPRE,GRE",
            "--output",
            path_str(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "problem,method,kernel,h,estimate,variance,abs_error,rel_error,chosen_A,theta,wall_time_ms,error"
    );
    assert_eq!(lines.count(), 4 * 4);
}

#[test]
fn calibrate_stdout_matches_rerun() {
    let args = [
        "calibrate",
        "--problem",
        "cubature",
        "--exponents",
        "0,2,4",
        "--methods",
        "SPRE",
    ];
    let first = spre(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, spre(&args).stdout);
    assert_eq!(String::from_utf8_lossy(&first.stdout).lines().count(), 4);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"kind": "cubature", "d": 1, "s": 0}, "methods": ["RAW"], "exponents": [0, 1]}"#,
    )
    .unwrap();
    let o = spre(&["converge", "--config", path_str(&cfg), "--s", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("cubature-d1-s1,RAW,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"problem": {"kind": "cubature", "d": 1, "s": 0}, "methods": []}"#,
    )
    .unwrap();
    assert_eq!(code(&spre(&["converge", "--config", path_str(&empty)])), 2);
    assert_eq!(code(&spre(&["converge", "--problem", "cubature", "--methods", ""])), 2);

    let unknown = dir.path().join("unknown.json");
    std::fs::write(
        &unknown,
        r#"{"problem": {"kind": "cubature", "d": 1, "s": 0}, "colour": "red"}"#,
    )
    .unwrap();
    assert_eq!(code(&spre(&["converge", "--config", path_str(&unknown)])), 2);

    assert_eq!(code(&spre(&["converge"])), 2);
    assert_eq!(
        code(&spre(&["converge", "--problem", "cubature", "--methods", "FOO"])),
        2
    );
    assert_eq!(
        code(&spre(&["calibrate", "--problem", "cubature", "--methods", "RAW"])),
        2
    );
    assert_eq!(code(&spre(&["design", "--problem", "cubature"])), 2);
    assert_eq!(code(&spre(&["flock", "--x1=-0.1"])), 2);
    assert_eq!(code(&spre(&["flock", "--agent", "60"])), 2);
}

#[test]
fn runtime_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // A single point cannot support a linear fit.
    let data = dir.path().join("one.csv");
    std::fs::write(&data, "x_1,f\n0.5,2\n").unwrap();
    let o = spre(&["fit", path_str(&data), "--index-set", "[[0],[1]]"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_recovers_polynomial_limit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "x_1,f\n0.5,1.25\n0.25,1.0625\n0.125,1.015625\n").unwrap();
    for method in ["spre", "mre"] {
        let o = spre(&["fit", path_str(&data), "--method", method, "--index-set", "[[0],[2]]"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let est = v["estimate"].as_f64().unwrap();
        assert!((est - 1.0).abs() < 1e-10, "{method}: {est}");
    }
}

#[test]
fn design_emits_one_json_line_per_round() {
    let o = spre(&[
        "design",
        "--problem",
        "ed-synthetic",
        "--seed",
        "3",
        "--rounds",
        "2",
        "--candidates",
        "50",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["round"], 0);
    assert_eq!(lines[1]["round"], 1);
    assert!(lines[2]["estimate"].is_number());
    assert_eq!(
        lines[2]["n_points"],
        6 + lines[0]["values"].as_array().unwrap().len() + lines[1]["values"].as_array().unwrap().len()
    );
}

#[test]
fn flock_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let o = spre(&[
        "flock",
        "--x1",
        "0.5",
        "--t-final",
        "1.0",
        "--agents",
        "4",
        "--trajectory",
        path_str(&traj),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["qoi"].as_f64().unwrap() >= 0.0);
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,agent,u1,u2");
    // Three times (0, 0.5, 1.0) for four agents.
    assert_eq!(lines.count(), 12);
}

#[test]
fn sparsity_emits_json_trace() {
    let o = spre(&[
        "sparsity",
        "--problem",
        "ed-synthetic",
        "--seed",
        "1",
        "--exponents",
        "0,1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 2);
}
