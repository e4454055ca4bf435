//! End-to-end runs of the `spinsqueeze` binary and the runner library.

use std::path::Path;
use std::process::Command;

use spinsqueeze_cli::{execute, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinsqueeze"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SWEEP: &str = r#"
name = "thermal"
[model]
kind = "thermal"
n = 6
n_th = 0.05
[[sweep]]
param = "r"
grid = { kind = "linear", start = 0.0, stop = 1.5, points = 4 }
"#;

#[test]
fn sweep_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SWEEP);
    let out = dir.path().join("out");
    let st = bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(out.join("thermal.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "point,r,xi2,purity,Sz,Sy2,Sx2,gap,status");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with(",nan,ok")), "{csv}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("thermal.json")).unwrap()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 4);
    assert!(json["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let echo: RunConfig = serde_json::from_value(json["config"].clone()).unwrap();
    assert_eq!(echo.model.unwrap().n, 6);
}

#[test]
fn schema_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &SWEEP.replace("n_th = 0.05", "n_th = \"hot\""));
    let o = bin().args(["sweep", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.n_th"), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = write_config(dir.path(), "bad2.toml", &SWEEP.replace("param = \"r\"", "param = \"gamma_phi\""));
    let o = bin().args(["sweep", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep[0].param"));

    let good = write_config(dir.path(), "good.toml", SWEEP);
    let o = bin().args(["sweep", "--config"]).arg(&good).env("SPINSQUEEZE_RTOL", "tight").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SPINSQUEEZE_RTOL"));
}

#[test]
fn failed_points_are_reported_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = SWEEP.replace("param = \"r\"\ngrid = { kind = \"linear\", start = 0.0, stop = 1.5, points = 4 }", "param = \"gamma\"\ngrid = { kind = \"list\", values = [1.0, -1.0] }");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("o");
    let st = bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(out.join("thermal.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].ends_with(",ok"));
    assert!(rows[1].contains("error:"), "{csv}");

    let all_bad = text.replace("[1.0, -1.0]", "[-1.0, -2.0]");
    let cfg = write_config(dir.path(), "c2.toml", &all_bad);
    let o = bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn worker_count_does_not_change_output() {
    let mut c = RunConfig::from_toml_str(&SWEEP.replace("points = 4", "points = 7")).unwrap();
    c.task = Some(spinsqueeze_cli::Task::Sweep);
    c.compute_gap = true;
    let mut csvs = vec![];
    for w in [1, 3] {
        c.workers = Some(w);
        csvs.push(execute(&c).unwrap()[0].to_csv().unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn evolve_and_gap_tasks() {
    let text = r#"
task = "evolve"
[model]
kind = "ideal"
n = 4
r = 0.5
[evolve]
t_final = 5.0
points = 6
"#;
    let c = spinsqueeze_cli::resolve(RunConfig::from_toml_str(text).unwrap()).unwrap();
    let t = &execute(&c).unwrap()[0];
    assert_eq!(t.columns, vec!["t"]);
    assert_eq!(t.rows.len(), 6);
    assert!((t.rows[0].values.sz + 2.0).abs() < 1e-12);
    let mut g = c.clone();
    g.task = Some(spinsqueeze_cli::Task::Gap);
    let t = &execute(&g).unwrap()[0];
    assert!(t.rows[0].values.gap > 0.0 && t.rows[0].values.xi2.is_nan());
}

#[test]
fn even_n_optimum_saturates_at_upper_bound() {
    let text = r#"
task = "optimize"
[model]
kind = "ideal"
n = 20
[optimize]
objective = "xi2"
axes = [{ param = "r", lo = 0.0, hi = 3.0, points = 7 }]
"#;
    let c = spinsqueeze_cli::resolve(RunConfig::from_toml_str(text).unwrap()).unwrap();
    let t = &execute(&c).unwrap()[0];
    let r = t.column("r")[0];
    assert!((r - 3.0).abs() < 1e-3, "r_opt = {r}");
    assert_eq!(t.rows[0].extra["at_boundary"], serde_json::Value::Bool(true));
    let profile: Vec<f64> = t.rows[0].extra["profile"].as_array().unwrap().iter().map(|p| p[1].as_f64().unwrap()).collect();
    assert!(profile.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn thermal_optimum_is_interior() {
    let text = r#"
task = "optimize"
[model]
kind = "thermal"
n = 200
n_th = 0.1
[optimize]
objective = "xi2"
axes = [{ param = "r", lo = 0.0, hi = 3.0, points = 13 }]
"#;
    let c = spinsqueeze_cli::resolve(RunConfig::from_toml_str(text).unwrap()).unwrap();
    let t = &execute(&c).unwrap()[0];
    let r = t.column("r")[0];
    assert!(r > 0.1 && r < 2.9, "r_opt = {r}");
    assert_eq!(t.rows[0].extra["at_boundary"], serde_json::Value::Bool(false));
}

#[test]
fn validate_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["validate", "--out"]).arg(dir.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));
}

#[test]
fn unknown_preset_is_rejected() {
    let o = bin().args(["preset", "fig99"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
