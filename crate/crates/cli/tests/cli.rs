use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kzsketch"));
    c.env_remove("KZSKETCH_REPORT_DIR");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kzsketch-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad report ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_data(dir: &Path, n: usize, d: usize) -> PathBuf {
    let path = dir.join("data.kzds");
    let out = run(&["gen", "--n", &n.to_string(), "--d", &d.to_string(), "--seed", "3", "--out", s(&path)]);
    assert!(out.status.success());
    path
}

#[test]
fn encode_size_eval_roundtrip() {
    let dir = scratch("roundtrip");
    let data = make_data(&dir, 300, 4);
    let sketch = dir.join("s.kzsk");
    let enc = run(&["encode", "--data", s(&data), "--k", "3", "--eps", "0.2", "--out", s(&sketch)]);
    assert_eq!(enc.status.code(), Some(0));
    let enc = json(&enc);
    assert_eq!(enc["spec"]["command"], "encode");
    assert_eq!(enc["spec"]["args"]["problem"]["k"], 3);

    let size = json(&run(&["size", "--sketch", s(&sketch)]));
    let bytes = fs::read(&sketch).unwrap().len() as u64;
    let total = size["result"]["bits"]["total_bits"].as_u64().unwrap();
    let pad = size["result"]["padding_bits"].as_u64().unwrap();
    assert_eq!(total, bytes * 8 - pad);
    assert!(pad < 8);
    assert_eq!(total, enc["result"]["bits"]["total_bits"].as_u64().unwrap());

    let centers = dir.join("c.csv");
    fs::write(&centers, "100,200,300,400\n900,50,512,7\n1,1,1,1\n").unwrap();
    let out = run(&["eval", "--sketch", s(&sketch), "--centers", s(&centers), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(0));
    let ev = json(&out);
    let est = ev["result"]["estimate"].as_f64().unwrap();
    assert!(est.is_finite() && est >= 0.0);
    assert!(ev["result"]["relative_error"].as_f64().unwrap() <= 0.2);
}

#[test]
fn verify_identity_sketch_within_eps() {
    let dir = scratch("verify");
    let data = make_data(&dir, 400, 6);
    let out = run(&["verify", "--data", s(&data), "--k", "4", "--z", "1", "--eps", "0.2", "--trials", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["result"]["worst_relative_error"].as_f64().unwrap() <= 0.2);
}

#[test]
fn failed_check_exits_one() {
    let dir = scratch("fail");
    let data = make_data(&dir, 200, 3);
    let sketch = dir.join("s.kzsk");
    run(&["encode", "--data", s(&data), "--k", "2", "--eps", "0.5", "--out", s(&sketch)]);
    let out = run(&[
        "verify", "--data", s(&data), "--k", "2", "--eps", "1e-9", "--sketch", s(&sketch), "--trials", "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["encode", "--k", "2"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let out = run(&["size", "--sketch", "/nonexistent/kzsketch/file"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let dir = scratch("usage");
    let data = make_data(&dir, 20, 2);
    let out = run(&["encode", "--data", s(&data), "--k", "2", "--eps", "1.5", "--out", s(&dir.join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    let csv = dir.join("d.csv");
    fs::write(&csv, "1,2\n3,4\n").unwrap();
    let out = run(&["encode", "--data", s(&csv), "--k", "1", "--eps", "0.1", "--out", s(&dir.join("y"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lowerbound_orthogonal_certificate() {
    let out = run(&["lowerbound", "--n", "100", "--d", "256", "--eps", "0.05", "--mode", "orthogonal"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["result"]["separated"], true);
    let ineq = r["result"]["inequalities"].as_array().unwrap();
    let gap = ineq.iter().find(|i| i["name"] == "z=2 cost gap").unwrap();
    assert!(gap["lhs"].as_f64().unwrap() >= 5.0 - 1e-6);
    assert!(ineq.iter().all(|i| i["pass"] == true && i.get("rhs").is_some()));
}

#[test]
fn lowerbound_dump_files() {
    let dir = scratch("dump");
    let out = run(&[
        "lowerbound", "--n", "8", "--d", "40", "--eps", "0.05", "--dump-dir", s(&dir),
    ]);
    assert!(out.status.code().is_some());
    for f in ["p.kzob", "q.kzob", "p.kzds", "q.kzds", "center.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let p = kzsketch_core::io::read_matrix(fs::read(dir.join("p.kzob")).unwrap().as_slice()).unwrap();
    assert_eq!((p.nrows(), p.ncols()), (40, 8));
}

#[test]
fn angles_fixture_and_sampling() {
    let r = json(&run(&["angles", "--d", "3", "--n", "2", "--fixture", "tilted-planes"]));
    let t = r["result"]["thetas"].as_array().unwrap();
    assert!(t[0].as_f64().unwrap().abs() <= 1e-9);
    assert!((t[1].as_f64().unwrap() - std::f64::consts::FRAC_PI_3).abs() <= 1e-9);
    let out = run(&["angles", "--d", "64", "--n", "4", "--trials", "20", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["trials"], 20);
}

#[test]
fn single_site_matches_encode() {
    let dir = scratch("onesite");
    let data = make_data(&dir, 250, 3);
    let sketch = dir.join("s.kzsk");
    let enc = json(&run(&[
        "encode", "--data", s(&data), "--k", "3", "--eps", "0.1", "--seed", "5", "--out", s(&sketch),
    ]));
    let dist = json(&run(&[
        "distributed", "--data", s(&data), "--sites", "1", "--k", "3", "--eps", "0.1", "--seed", "5",
    ]));
    assert_eq!(dist["pass"], true);
    assert_eq!(dist["result"]["ledger"]["total_bits"], enc["result"]["bits"]["total_bits"]);
    assert_eq!(dist["result"]["transmitted_bytes"][0], enc["result"]["file_bytes"]);
}

#[test]
fn distributed_and_stream_reports() {
    let dir = scratch("dist");
    let data = make_data(&dir, 2000, 4);
    let dist = json(&run(&[
        "distributed", "--data", s(&data), "--sites", "4", "--k", "4", "--eps", "0.2", "--trials", "50",
    ]));
    assert_eq!(dist["pass"], true);
    let per: u64 = dist["result"]["ledger"]["per_site_bits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(per, dist["result"]["ledger"]["total_bits"].as_u64().unwrap());
    let st = json(&run(&[
        "stream", "--data", s(&data), "--block", "200", "--cap", "4", "--k", "4", "--eps", "0.2", "--trials", "50",
    ]));
    assert_eq!(st["pass"], true);
    assert_eq!(st["result"]["blocks"], 10);
}

#[test]
fn report_dir_from_environment() {
    let dir = scratch("envdir");
    let out = bin()
        .env("KZSKETCH_REPORT_DIR", &dir)
        .args(["angles", "--d", "3", "--n", "2", "--fixture", "tilted-planes"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(dir.join("angles.json")).unwrap(), out.stdout);
    let table = run(&["angles", "--d", "3", "--n", "2", "--fixture", "tilted-planes", "--report", "table"]);
    assert!(String::from_utf8_lossy(&table.stdout).contains("result.thetas"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = scratch("determinism");
    let data = make_data(&dir, 600, 5);
    let centers = dir.join("c.csv");
    fs::write(&centers, "10,20,30,40,50\n500,500,500,500,500\n").unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec!["encode", "--data", s(&data), "--k", "3", "--eps", "0.1", "--method", "sensitivity", "--seed", "9", "--out"]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["verify", "--data", s(&data), "--k", "3", "--eps", "0.2", "--method", "sensitivity", "--seed", "9", "--trials", "20"]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["lowerbound", "--n", "16", "--d", "40", "--eps", "0.05", "--mode", "perturbed", "--seed", "4"]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["angles", "--d", "32", "--n", "4", "--trials", "10", "--seed", "1"]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["distributed", "--data", s(&data), "--sites", "3", "--k", "3", "--eps", "0.2", "--seed", "2", "--trials", "10"]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["stream", "--data", s(&data), "--block", "100", "--cap", "3", "--k", "3", "--eps", "0.2", "--seed", "2", "--trials", "10"]
            .into_iter()
            .map(String::from)
            .collect(),
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let mut args = args.clone();
            let sketch = dir.join(format!("s{i}-{rep}.kzsk"));
            if args.last().map(String::as_str) == Some("--out") {
                args.push(s(&sketch).to_string());
            }
            let out = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
            assert!(out.status.code().is_some_and(|c| c <= 1), "{args:?}");
            let mut report = json(&out);
            // The output path is the only intended difference between the two runs.
            if let Some(o) = report["spec"]["args"].get_mut("out") {
                *o = Value::Null;
            }
            let file = sketch.exists().then(|| fs::read(&sketch).unwrap());
            outputs.push((report, file));
        }
        assert_eq!(outputs[0], outputs[1], "{args:?}");
    }
}
