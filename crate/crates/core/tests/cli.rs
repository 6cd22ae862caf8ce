use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = r#"
n = 2
R = 1.0
alpha = 0.5
kappa = 1.0
M = 1.0
initial.kind = "gaussian"
initial.mass = 3.0
initial.width = 0.25
cells = 32
t_end = 0.02
output_stride = 20
lp = [2.0]
"#;

const PLAN: &str = r#"
alphas = [0.0, 2.0]
t_end = 0.01

[base]
n = 2
R = 1.0
alpha = 0.0
kappa = 1.0
M = 1.0
initial.kind = "gaussian"
initial.mass = 3.0
initial.width = 0.25
cells = 32
t_end = 1.0

[variants.ball]
n = 3

[variants.disc]
n = 2
"#;

fn chemolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemolab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_series_snapshots_and_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", CONFIG);
    let out = dir.path().join("out");
    let o = chemolab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let series = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(series.starts_with("step,t,dt,mass,linf,l2,u_boundary,dv_dnu,min_u\n"));
    assert!(series.lines().count() > 2);
    let initial = fs::read_to_string(out.join("snapshot_initial.csv")).unwrap();
    assert!(initial.starts_with("r,value,v\n"));
    assert_eq!(initial.lines().count(), 33);
    assert!(out.join("snapshot_final.csv").exists());
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.starts_with("verdict "));
}

#[test]
fn zero_horizon_skips_final_snapshot() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", CONFIG);
    let out = dir.path().join("out");
    let o = chemolab(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--t-end",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("snapshot_initial.csv").exists());
    assert!(!out.join("snapshot_final.csv").exists());
    let series = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(series.lines().count(), 2);
}

#[test]
fn recorder_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", CONFIG);
    let mut series = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = chemolab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        series.push(fs::read(out.join("timeseries.csv")).unwrap());
    }
    assert_eq!(series[0], series[1]);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let cfg = write(dir.path(), "unknown.toml", &format!("{CONFIG}beta = 1\n"));
    let o = chemolab(&["simulate", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta"));

    let cfg = write(dir.path(), "missing.toml", &CONFIG.replace("R = 1.0\n", ""));
    let o = chemolab(&["simulate", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`R`"));

    let cfg = write(dir.path(), "run.toml", CONFIG);
    let o = chemolab(&["simulate", "--config", &cfg, "--out", out, "--cells", "4"]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(chemolab(&["simulate"]).status.code(), Some(2));
    assert_eq!(chemolab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let absent = dir.path().join("absent.toml");
    let o = chemolab(&[
        "simulate",
        "--config",
        absent.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = chemolab(&[
        "plot",
        "--input",
        dir.path().join("absent.csv").to_str().unwrap(),
        "--output",
        dir.path().join("x.svg").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn verify_prints_a_ledger_and_catches_an_injected_fault() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", CONFIG);
    let o = chemolab(&["verify", "--config", &cfg]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() > 10);
    assert!(text
        .lines()
        .all(|l| l.starts_with("CHECK ") && l.contains(" pass ")));

    let o = chemolab(&["verify", "--config", &cfg, "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("CHECK mass_conservation fail"));
}

#[test]
fn sweep_csv_does_not_depend_on_workers() {
    let dir = TempDir::new().unwrap();
    let plan = write(dir.path(), "plan.toml", PLAN);
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("sweep{workers}.csv"));
        let o = chemolab(&[
            "sweep",
            "--plan",
            &plan,
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
            "--no-timing",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(fs::read_to_string(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let lines: Vec<&str> = outputs[0].lines().collect();
    assert_eq!(
        lines[0],
        "alpha,data_id,verdict,peak_linf,terminal_t,steps,wall_ms"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.0000000000000000e0,ball,"));
    assert!(lines[4].starts_with("2.0000000000000000e0,disc,"));
}

#[test]
fn plot_renders_recorded_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", CONFIG);
    let out = dir.path().join("out");
    let o = chemolab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    let svg = dir.path().join("linf.svg");
    let o = chemolab(&[
        "plot",
        "--input",
        out.join("timeseries.csv").to_str().unwrap(),
        "--output",
        svg.to_str().unwrap(),
        "--x",
        "t",
        "--columns",
        "linf,mass",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<polyline").count(), 2);

    let o = chemolab(&[
        "plot",
        "--input",
        out.join("timeseries.csv").to_str().unwrap(),
        "--output",
        svg.to_str().unwrap(),
        "--columns",
        "nope",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let empty = write(dir.path(), "empty.csv", "t,linf\n");
    let o = chemolab(&["plot", "--input", &empty, "--output", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 0);
}
