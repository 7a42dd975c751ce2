//! End-to-end checks of the `rqab` binary: exit codes, JSON reports on
//! stdout, and the CSV files each subcommand writes.

use std::path::Path;
use std::process::{Command, Output};

fn rqab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON document")
}

const MM1M: &str = r#"{
    "interarrival": {"family": "exponential", "mean": 1.1111111111111112},
    "service": {"family": "exponential", "mean": 1.0},
    "patience": {"base": {"family": "exponential", "mean": 1.0}, "alpha": 0.125}
}"#;

#[test]
fn usage_errors_exit_with_code_2() {
    let out = rqab(&[]);
    assert_eq!(out.status.code(), Some(2));

    let out = rqab(&["solve"]);
    assert_eq!(out.status.code(), Some(2), "missing --config");
}

#[test]
fn malformed_and_invalid_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");

    write(&cfg, "{ not json");
    let out = rqab(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    // Unknown field.
    write(
        &cfg,
        &format!(r#"{{"model": {MM1M}, "algorithm": "first", "tyop": 1}}"#),
    );
    let out = rqab(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Valid JSON, invalid parameter.
    write(
        &cfg,
        r#"{"model": {
            "interarrival": {"family": "exponential", "mean": -1.0},
            "service": {"family": "exponential", "mean": 1.0},
            "patience": {"base": {"family": "exponential", "mean": 1.0},
                         "alpha": 0.5}
        }, "algorithm": "first"}"#,
    );
    let out = rqab(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Missing config file.
    let out = rqab(&["solve", "--config", "/nonexistent/x.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_first_prints_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    write(
        &cfg,
        &format!(r#"{{"model": {MM1M}, "algorithm": "first", "b": 1.4142135623730951}}"#),
    );
    let json = dir.path().join("report.json");
    let out = rqab(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let z = v["solution"]["z"].as_f64().unwrap();
    assert!(z > 0.0 && z.is_finite());
    assert_eq!(v["solution"]["algorithm"], "first");
    assert_eq!(v["b_source"], "given");
    let p = v["derived"]["p_abandon"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);
    // The --out file holds the same document.
    let file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn benchmark_writes_a_csv_alongside_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    write(&cfg, &format!(r#"{{"model": {MM1M}}}"#));
    let csv = dir.path().join("bench.csv");
    let out = rqab(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: rqab.benchmark.v1"));
    assert_eq!(lines.next(), Some("method,applicable,value,note"));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 5);
    assert!(body[0].starts_with("exact_mm1_gi,true,"));
}

#[test]
fn unsupported_distribution_for_phase_type_idc_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("idc.json");
    write(
        &cfg,
        r#"{"distribution": {"family": "lognormal", "mean": 1.0, "scv": 2.0},
            "t_grid": [1.0, 2.0], "method": "phase_type"}"#,
    );
    let out = rqab(&[
        "idc",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("idc.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported family"));
}

#[test]
fn simulate_writes_batches_and_the_idw_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    write(
        &cfg,
        &format!(
            r#"{{"model": {MM1M}, "run_time": 4000.0, "n_batches": 10,
                 "seed": 11, "idw_grid": [1.0, 5.0]}}"#
        ),
    );
    let csv = dir.path().join("sim.csv");
    let out = rqab(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["estimate"]["mean_virtual_wait"].as_f64().unwrap() > 0.0);
    assert_eq!(v["seed"], 11);

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# schema: rqab.sim.v1\n"));
    assert_eq!(text.lines().count(), 2 + 10, "one line per batch");

    let idw = std::fs::read_to_string(dir.path().join("sim.idw.csv")).unwrap();
    assert!(idw.starts_with("# schema: rqab.idw.v1\n"));
    assert_eq!(idw.lines().count(), 2 + 2);
}

#[test]
fn grid_then_heatmap_produces_matrices_gaps_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.json");
    write(
        &cfg,
        r#"{
            "lambda_values": [0.9, 1.25],
            "alpha_values": [0.5, 0.125],
            "template": {
                "interarrival": {"family": "exponential", "mean": 1.0},
                "service": {"family": "exponential", "mean": 1.0},
                "patience_base": {"family": "exponential", "mean": 1.0}
            },
            "methods": ["rq_first", "hazard_rate", "hg"],
            "b": 1.4142135623730951,
            "seed": 3
        }"#,
    );
    let csv = dir.path().join("grid.csv");
    let out = rqab(&[
        "grid",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["n_rows"], 2 * 2 * 3);
    assert_eq!(v["truth"], "formula");

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# schema: rqab.grid.v1\n"));
    assert!(dir.path().join("grid.timing.csv").exists());

    let prefix = dir.path().join("hm");
    let out = rqab(&[
        "heatmap",
        "--csv",
        csv.to_str().unwrap(),
        "--out-prefix",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["hm.rq_first.csv", "hm.hazard_rate.csv", "hm.hg.csv", "hm.gaps.csv", "hm.svg"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let svg = std::fs::read_to_string(dir.path().join("hm.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    // A heatmap over a nonexistent CSV is a configuration error.
    let out = rqab(&["heatmap", "--csv", "/nonexistent.csv", "--out-prefix", "x"]);
    assert_eq!(out.status.code(), Some(2));
}
