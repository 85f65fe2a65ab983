use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowlab"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn minimal_scenario_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&scenario("minimal.json"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(out.path());
    assert_eq!(s["schema"], "flowlab.report.v1");
    assert_eq!(s["pass"], true);
    let task = &s["tasks"][0];
    for field in ["scenario", "task", "pass", "max_residual", "wall_time_ms"] {
        assert!(task.get(field).is_some(), "missing {field}");
    }
    assert_eq!(task["max_residual"], 0.0);
}

#[test]
fn phase_scenario_tables() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&scenario("phase.json"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));

    let (header, rows) = csv_rows(&out.path().join("perturb.csv"));
    assert_eq!(
        header,
        ["t", "method", "norm_u_frobenius", "discrepancy", "cocycle_defect_max", "lhs_cocycle", "rhs_bound", "pass"]
    );
    assert_eq!(rows.len(), 9 * 3);
    let worst = rows.iter().map(|r| r[3].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(worst < 1e-7, "method discrepancy {worst:e}");

    let (header, rows) = csv_rows(&out.path().join("smooth.csv"));
    assert_eq!(header, ["n", "diff_frobenius", "norm_frobenius", "quad_error_estimate"]);
    let expected = [0.2212, 0.02469, 0.002497, 0.0002500];
    for (row, want) in rows.iter().zip(expected) {
        let got: f64 = row[1].parse().unwrap();
        assert_eq!(format!("{got:.3e}"), format!("{want:.3e}"));
    }

    let (header, _) = csv_rows(&out.path().join("decompose.csv"));
    assert_eq!(header, ["n", "norm_w_minus_1", "stability_u", "stability_v", "defect_v", "pass"]);
    let (header, rows) = csv_rows(&out.path().join("extract.csv"));
    assert_eq!(header, ["spec", "op", "residual", "lhs", "rhs", "gauge", "pass"]);
    assert_eq!(rows[0][6], "true");
}

#[test]
fn relate_reports_both_checks_and_overall_pass_is_conjunction() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&scenario("nest_pair.json"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let (_, rows) = csv_rows(&out.path().join("relate.csv"));
    assert_eq!(rows[0][1], "relate_flows:literal_exp");
    assert_eq!(rows[0][6], "false");
    assert_eq!(rows[1][1], "relate_flows:cocycle");
    assert_eq!(rows[1][6], "true");
    let s = summary(out.path());
    let tasks = s["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 4);
    assert_eq!(s["pass"], tasks.iter().all(|t| t["pass"] == true));
}

#[test]
fn unsorted_time_grid_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("minimal.json"))
        .unwrap()
        .replace("[-1, 0, 1]", "[1, 0, -1]");
    let o = run(&write_config(dir.path(), &text), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("time_grid") && err.contains("sorted"), "{err}");
    assert!(!dir.path().join("out").join("summary.json").exists());
}

#[test]
fn type_error_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("minimal.json"))
        .unwrap()
        .replace("\"seed\": 1", "\"seed\": \"one\"");
    let o = run(&write_config(dir.path(), &text), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("`seed`"), "{err}");
}

#[test]
fn task_failure_is_recorded_and_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("minimal.json"))
        .unwrap()
        .replace("\"tasks\": [\"verify_cocycle\"]", "\"tasks\": [\"smooth\", \"verify_cocycle\"], \"smoothing\": {\"xi\": 50}");
    let out = dir.path().join("out");
    let o = run(&write_config(dir.path(), &text), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let s = summary(&out);
    assert_eq!(s["tasks"][0]["pass"], false);
    assert!(s["tasks"][0]["error"].as_str().unwrap().contains("exceeds sqrt(n)"));
    assert_eq!(s["tasks"][1]["pass"], true);
    assert!(out.join("verify_cocycle.csv").exists());
}

#[test]
fn reports_are_deterministic() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    run(&scenario("phase.json"), dirs[0].path(), &["--no-timing"]);
    run(&scenario("phase.json"), dirs[1].path(), &["--no-timing"]);
    run(&scenario("phase.json"), dirs[2].path(), &[]);
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in &names {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        assert_eq!(a, std::fs::read(dirs[1].path().join(name)).unwrap(), "{name}");
        if name.ends_with(".csv") {
            assert_eq!(a, std::fs::read(dirs[2].path().join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn shortcuts_mirror_config_fields() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["perturb", "--generator", "[[[0,1],0],[0,0]]", "--perturbation", "[[0,1],[0,0]]"])
        .args(["--time-grid", "-1,0,1", "--nest-dims", "0,1,2", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.path().join("perturb.csv")).1.len(), 9);

    let o = bin()
        .args(["smooth", "--generator", "[[[0,1],0],[0,0]]", "--n-list", "1,10", "--xi", "0", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = csv_rows(&out.path().join("smooth.csv"));
    assert_eq!(rows.len(), 2);

    let o = bin()
        .args(["extract", "--generator", "[[1,2],[0,-1]]", "--nest-dims", "0,1,2", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary(out.path())["tasks"][0]["task"], "extract");
}

#[test]
fn usage_errors_exit_two() {
    let out = tempfile::tempdir().unwrap();
    let o = bin().args(["verify", "--level", "medium", "--out"]).arg(out.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["extract", "--generator", "[[1,2],[0", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["perturb", "--generator", "[[0,0],[0,0]]", "--perturbation", "[[0,0],[0,0]]"])
        .args(["--time-grid", "1,0", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("time_grid"));
}
