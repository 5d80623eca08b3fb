use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mtdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtdc")).args(args).output().expect("run mtdc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn three_area() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios/three_area.scenario")
        .display()
        .to_string()
}

fn write_variant(dir: &Path, name: &str, edit: impl Fn(String) -> String) -> String {
    let text = edit(fs::read_to_string(three_area()).unwrap());
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn certify_reports_stable() {
    let o = mtdc(&["certify", &three_area()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("q1_positive_definite = true"));
    let verdict = out.lines().find(|l| l.starts_with("VERDICT:")).unwrap();
    assert!(verdict.starts_with("VERDICT: STABLE"), "{verdict}");
}

#[test]
fn bounds_hold_on_reference_scenario() {
    let o = mtdc(&["bounds", &three_area()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("VERDICT: BOUNDS_HOLD"));
}

#[test]
fn bounds_require_explicit_voltage_gain() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "no_kv.scenario", |t| t.replace("k_v = [10.0, 10.0, 10.0]", ""));
    let o = mtdc(&["bounds", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("params.k_v"), "{}", stderr(&o));
    assert_eq!(mtdc(&["certify", &path]).status.code(), Some(0));
}

#[test]
fn zero_disturbance_equilibrium_is_zero() {
    let o = mtdc(&["equilibrium", &three_area(), "--pm", "0,0,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let numbers: Vec<f64> = out
        .lines()
        .filter_map(|l| l.trim().trim_end_matches(',').parse::<f64>().ok())
        .collect();
    assert_eq!(numbers.len(), 12);
    assert!(numbers.iter().all(|x| *x == 0.0));
}

#[test]
fn negative_disturbance_flag_parses() {
    let o = mtdc(&["equilibrium", &three_area(), "--pm", "-0.1,0,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("-0.1"));
}

#[test]
fn simulate_plotdata_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let csv_s = csv.display().to_string();
    let o = mtdc(&["simulate", &three_area(), "--out", &csv_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("VERDICT: SETTLED"));

    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time,omega_1,omega_2,omega_3,v_1,v_2,v_3,pdroop_1,pdroop_2,pdroop_3,pinj_1,pinj_2,pinj_3,W"
    );
    let samples = lines.count();
    assert_eq!(samples, 4001);

    let o = mtdc(&["plotdata", &csv_s, "--figure", "volt"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let blocks: Vec<&str> = out.split("\n\n").collect();
    assert_eq!(blocks.len(), 3);
    for (k, block) in blocks.iter().enumerate() {
        let mut rows = block.lines();
        assert_eq!(rows.next().unwrap(), format!("# v_{}", k + 1));
        let series: Vec<(f64, f64)> = rows
            .map(|r| {
                let (t, v) = r.split_once(' ').unwrap();
                (t.parse().unwrap(), v.parse().unwrap())
            })
            .collect();
        assert_eq!(series.len(), samples);
        assert!(series.iter().filter(|(t, _)| *t < 1.0).all(|(_, v)| (v - 1.0).abs() < 1e-12));
        let after: Vec<f64> = series.iter().filter(|(t, _)| *t > 1.0).map(|(_, v)| v - 1.0).collect();
        assert!(after.iter().all(|d| d.abs() > 1e-6));
        let tail = &after[after.len() - 100..];
        let spread = tail.iter().cloned().fold(f64::MIN, f64::max) - tail.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-8);
    }

    let o = mtdc(&["plotdata", &csv_s, "--figure", "freq", "--node", "2"]);
    assert_eq!(stdout(&o).lines().count(), samples + 1);
    assert_eq!(mtdc(&["plotdata", &csv_s, "--figure", "freq", "--node", "4"]).status.code(), Some(1));
}

#[test]
fn trajectory_output_is_deterministic() {
    let a = mtdc(&["simulate", &three_area()]);
    let b = mtdc(&["simulate", &three_area()]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_rows_follow_requested_values() {
    let o = mtdc(&["sweep", &three_area(), "--param", "k-omega", "--values", "1,10,100,501"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (row, value) in rows.iter().zip(["1", "10", "100", "501"]) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], "k_omega");
        assert_eq!(fields[1], value);
        assert_eq!(fields[2], "true");
        assert_eq!(fields[11], "true");
    }
}

#[test]
fn usage_errors_exit_one() {
    let o = mtdc(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(mtdc(&["certify"]).status.code(), Some(1));
    assert_eq!(mtdc(&["--help"]).status.code(), Some(0));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "zero_r.scenario", |t| t.replace("resistance_pu = 0.0045", "resistance_pu = 0.0"));
    let o = mtdc(&["certify", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2 (1-3)"), "{}", stderr(&o));

    let typo = write_variant(dir.path(), "typo.scenario", |t| t.replace("k_omega =", "k_omgea ="));
    assert_eq!(mtdc(&["certify", &typo]).status.code(), Some(1));

    let extra = write_variant(dir.path(), "extra.scenario", |t| t.replace("v_nom = 1.0", "v_nom = 1.0\nnotes = \"x\""));
    assert_eq!(mtdc(&["certify", &extra]).status.code(), Some(1));
    assert_eq!(mtdc(&["--lax", "certify", &extra]).status.code(), Some(0));

    let missing = dir.path().join("absent.scenario").display().to_string();
    assert_eq!(mtdc(&["certify", &missing]).status.code(), Some(1));
}

#[test]
fn voltage_collapse_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_variant(dir.path(), "collapse.scenario", |t| {
        t.replace("model = \"linear\"", "model = \"nonlinear\"").replace(
            "[disturbance]",
            "[initial_state]\nomega = 1.0\nvoltage = [1.0, 0.0, 1.0]\n\n[disturbance]",
        )
    });
    let o = mtdc(&["simulate", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("node 2"), "{}", stderr(&o));
}
