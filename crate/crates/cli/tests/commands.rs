use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use etrap_core::spectra::{frequency_axis, synthetic_trace, write_trace_csv};
use serde_json::Value;

fn etrap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etrap")).args(args).output().expect("spawn etrap")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

/// Data rows of a CSV with optional `#` comment lines, keyed by header name.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn num(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn malformed_unit_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.ini", "[dispersive]\n# comment\ng_ec = 33 parsecs\n");
    let o = etrap(&["dispersive-sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_key_and_preset_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.ini", "[cooling]\nmode_frequency = 1 GHz\n");
    assert_eq!(etrap(&["cooling", "--cavity", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(etrap(&["readout-budget", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(etrap(&["cooling"]).status.code(), Some(2));
    assert_eq!(etrap(&["readout-budget", "--config", "/nonexistent/x.ini"]).status.code(), Some(2));
}

#[test]
fn zero_electron_coupling_gives_zero_shift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "z.ini", "[dispersive]\ng_ec = 0 Hz\npoints = 12\n");
    let rows = csv_rows(&stdout(&etrap(&["dispersive-sweep", "--config", &cfg])));
    assert_eq!(rows.len(), 12);
    for r in &rows {
        for k in ["zeta_analytic_hz", "zeta_approx_hz", "zeta_numeric_hz"] {
            assert_eq!(num(r, k), 0.0, "{k}");
        }
    }
}

#[test]
fn cavity_equilibrium_at_cited_conditions() {
    let rows = csv_rows(&stdout(&etrap(&["cooling", "--cavity"])));
    assert!((num(&rows[0], "n_eq") - 5.76).abs() < 0.01);
}

#[test]
fn ideal_protocol_reaches_low_occupation() {
    let rows = csv_rows(&stdout(&etrap(&["cooling", "--protocol", "--preset", "ideal-pulse"])));
    let last = rows.last().unwrap();
    assert_eq!(last["cycle"], "30");
    assert!(num(last, "mean_n_cavity") <= 0.06, "{}", last["mean_n_cavity"]);
}

#[test]
fn sympathetic_row_one() {
    let rows = csv_rows(&stdout(&etrap(&["cooling", "--sympathetic", "--preset", "table2-row1"])));
    assert_eq!(rows.len(), 1);
    assert!((num(&rows[0], "ne_calc") - 0.165).abs() < 0.002);
    assert_eq!(num(&rows[0], "ne_paper"), 5.3e-2);
}

#[test]
fn coulomb_table_has_four_rows() {
    let rows = csv_rows(&stdout(&etrap(&["coulomb-table"])));
    assert_eq!(rows.len(), 4);
    let published: Vec<f64> = rows.iter().map(|r| num(r, "g0_paper_khz")).collect();
    assert_eq!(published, [33.0, 0.39, 39.0, 1600.0]);
}

#[test]
fn five_rail_trap_json() {
    let v = json(&etrap(&["trap", "--layout", "--preset", "fiverail"]));
    assert_eq!(v["trapped"], true);
    for k in ["depth_ev", "min_position_m", "q", "secular_freq_hz", "notes"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    let f = v["secular_freq_hz"][0].as_f64().unwrap();
    assert!(f > 5e8 && f < 1.5e9, "{f}");
}

#[test]
fn untrapped_layout_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "off.ini", "[trapfields]\nmw_voltage = 0 V\nrf_voltage = 0 V\n");
    let v = json(&etrap(&["trap", "--layout", "--config", &cfg]));
    assert_eq!(v["trapped"], false);
    assert!(v["reason"].is_string());
}

#[test]
fn readout_budget_defaults() {
    let v = json(&etrap(&["readout-budget"]));
    assert!((v["n_min"].as_f64().unwrap() - 40.0).abs() < 1.0);
    assert_eq!(v["noise_density_dbm_per_hz"], -195.0);
}

#[test]
fn fit_spectrum_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let (f0, q_int, q_ext) = (6.1e9, 4e4, 2e4);
    let kappa = f0 * (1.0 / q_int + 1.0 / q_ext);
    let trace = synthetic_trace(f0, q_int, q_ext, frequency_axis(f0, 6.0 * kappa, 301)).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace).unwrap();
    let path = write(dir.path(), "trace.csv", &String::from_utf8(buf).unwrap());

    let v = json(&etrap(&["fit-spectrum", &path]));
    assert!((v["f0_hz"].as_f64().unwrap() / f0 - 1.0).abs() < 1e-9);
    assert!((v["q_int"].as_f64().unwrap() / q_int - 1.0).abs() < 1e-3);
    assert!((v["q_ext"].as_f64().unwrap() / q_ext - 1.0).abs() < 1e-3);

    let v = json(&etrap(&["fit-spectrum", &path, "--modes"]));
    assert!(v["fit"].is_object());
    assert!(v["modes"].as_array().is_some_and(|m| !m.is_empty()));

    let short = write(dir.path(), "short.csv", "freq_hz,mag\n1e9,1\n2e9,1\n");
    assert_eq!(etrap(&["fit-spectrum", &short]).status.code(), Some(2));
}

#[test]
fn echo_config_goes_to_stderr_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let o = etrap(&["readout-budget", "--preset", "coax", "--echo-config"]);
    let first = stdout(&o);
    let echoed = String::from_utf8(o.stderr).unwrap();
    assert!(echoed.contains("[dispersive]"));
    let cfg = write(dir.path(), "echo.ini", &echoed);
    assert_eq!(stdout(&etrap(&["readout-budget", "--config", &cfg])), first);
}

#[test]
fn exported_map_reloads_with_same_trap() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("map.csv");
    let map = map.to_str().unwrap();
    let a = json(&etrap(&["trap", "--synthetic", "--preset", "coax", "--export-map", map]));
    let b = json(&etrap(&["trap", "--fieldmap", map, "--preset", "coax"]));
    assert_eq!(a["trapped"], true);
    for k in 0..2 {
        let (x, y) = (a["secular_freq_hz"][k].as_f64().unwrap(), b["secular_freq_hz"][k].as_f64().unwrap());
        assert!((x / y - 1.0).abs() < 1e-6, "{x} {y}");
    }
    let bad = write(dir.path(), "bad.csv", "x,y\n1,2\n");
    assert_eq!(etrap(&["trap", "--fieldmap", &bad]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let o = etrap(&["readout-budget", "--out", path.to_str().unwrap()]);
    assert!(o.status.success() && o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(v["n_min"].is_number());
}
