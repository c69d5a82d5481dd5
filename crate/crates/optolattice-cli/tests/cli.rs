use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optolattice"))
        .args(args)
        .current_dir(dir)
        .env_remove("OPTOLATTICE_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn spectrum_writes_expected_header_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--n-cells", "4", "--out", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("g_plus,im_e_end,im_e_bulk_max,im_e_twosite"));
    assert_eq!(lines.count(), 81);
    assert!(!text.contains('\r'));

    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "spectrum");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config"]["params"]["n_cells"], 4);
    assert!(meta["timings"]["total_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn output_is_identical_across_thread_counts_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"line": {"g_plus_min": 0.1, "g_plus_max": 0.3, "steps": 9}}"#);
    let mut outputs = Vec::new();
    for (i, extra) in [vec!["--threads", "1"], vec!["--threads", "3"], vec!["--sequential"]].iter().enumerate() {
        let out = format!("n{i}.csv");
        let mut args = vec!["negativity", "--config", &cfg, "--n-cells", "3", "--out", &out];
        args.extend(extra.iter().copied());
        let o = run(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(dir.path().join(&out)).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn threads_can_come_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_optolattice"))
        .args(["twosite", "--out", "t.csv"])
        .current_dir(dir.path())
        .env("OPTOLATTICE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("t.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["threads"], 2);
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"params": {"g_plus": 0.1, "g_pluss": 0.2}}"#);
    let o = run(dir.path(), &["spectrum", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[invalid-config]"), "{}", stderr(&o));
}

#[test]
fn invalid_parameters_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--gamma", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error["));
    let o = run(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unstable_steady_state_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["steady", "--g-plus", "0.3", "--n-cells", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[no-stationary-state]"), "{}", stderr(&o));
}

#[test]
fn disorder_realizations_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"realizations": 2, "disorder": [{"kind": "hopping_j", "amplitude": 0.1, "seed": 7}]}"#,
    );
    let o = run(dir.path(), &["disorder", "--config", &cfg, "--n-cells", "2", "--out", "d.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(text.starts_with("realization,index,re_e,im_e,localization,label\n"));
    let realizations: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(realizations.contains(&"0") && realizations.contains(&"1"));
}

#[test]
fn json_format_has_columns_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["steady", "--n-cells", "3", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("steady.json")).unwrap()).unwrap();
    assert_eq!(v["columns"], serde_json::json!(["site", "n_opt", "n_mech"]));
    assert_eq!(v["data"]["site"].as_array().unwrap().len(), 12);
    assert!(dir.path().join("steady.json.meta.json").exists());
}

#[test]
fn selfcheck_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["selfcheck", "--n-cells", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("selfcheck.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")), "{text}");
}

#[test]
fn saturation_reports_iterates() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["saturation", "--g-plus", "0.26"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("saturation.csv.meta.json")).unwrap()).unwrap();
    assert!(meta["result"]["log_negativity"].as_f64().unwrap() > 0.0);
}

#[test]
fn phase_diagram_labels_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"grid": {"n_g_minus": 2, "n_g_plus": 3}, "phase": {"delta_gap": 1e-3, "boundary": 1e-7, "k_points": 64}}"#,
    );
    let o = run(dir.path(), &["phase-diagram", "--config", &cfg, "--n-cells", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("phase-diagram.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(1).all(|l| !l.ends_with(',')));
}

#[test]
fn evolve_starts_from_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"times": {"t_max": 10.0, "steps": 3}}"#);
    let o = run(dir.path(), &["evolve", "--config", &cfg, "--n-cells", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("evolve.csv")).unwrap();
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!(first[1].abs() < 1e-12 && first[2].abs() < 1e-12 && first[4].abs() < 1e-12);
}
