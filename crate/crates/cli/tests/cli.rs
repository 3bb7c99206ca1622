use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaplab::meshgen::read_mesh;
use gaplab::sweep::{format_f64, records_from_csv, RECORD_COLUMNS};
use tempfile::TempDir;

fn gaplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaplab")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    let text = format!("{body}\n[output]\ndir = {}\n", dir.join("out").display());
    std::fs::write(&path, text).unwrap();
    path
}

const COARSE: &str = "[sweep]\neps = 1e-1, 1e-2, 1e-3, 1e-4\nh_far = 0.6\ncusp_cutoff = 4e-3\n";

fn shipped(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

#[test]
fn sweep_writes_records() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), &format!("[geometry]\nfamily = two_disks\n{COARSE}"));
    let o = gaplab(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(tmp.path().join("out/records.csv")).unwrap();
    let recs = records_from_csv(&text).unwrap();
    assert!(recs.len() >= 4);
    assert!(recs.iter().all(|r| r.is_valid()));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/fit.json")).unwrap()).unwrap();
    assert_eq!(fit["model"], "POWER");
}

#[test]
fn fit_recovers_synthetic_power_law() {
    let tmp = TempDir::new().unwrap();
    let mut text = RECORD_COLUMNS.join(",") + "\n";
    for k in 0..9 {
        let eps = 0.1 * 10f64.powf(-(k as f64) / 2.0);
        let row: Vec<String> = RECORD_COLUMNS
            .iter()
            .map(|c| match *c {
                "eps" => format_f64(eps),
                "kind" => "CONDUCTIVITY".into(),
                "phi_id" => "X2".into(),
                "max_grad_segment" | "grad_midpoint" => format_f64(eps.powf(-0.5)),
                "profile" | "coefficients" | "c_diff" | "b1" | "error" => String::new(),
                "a11_22" | "a11_12" | "a11_33" | "a22_33" | "det_a22" => String::new(),
                _ => "0".into(),
            })
            .collect();
        text += &(row.join(",") + "\n");
    }
    let records = tmp.path().join("records.csv");
    std::fs::write(&records, text).unwrap();
    let o = gaplab(&["fit", "--model", "power", records.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("records_fit.json")).unwrap()).unwrap();
    assert!((fit["params"]["p"].as_f64().unwrap() - 0.5).abs() < 1e-10, "{fit}");
}

#[test]
fn validate_rejects_short_grid() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "[sweep]\neps = 1e-1, 1e-2\n");
    let o = gaplab(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 4 points"), "{}", stderr(&o));
}

#[test]
fn validate_passes_on_a_shipped_config() {
    let o = gaplab(&["validate", "--config", &shipped("symmetric_control.cfg")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("PASS gram symmetry"));
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(gaplab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gaplab(&["sweep"]).status.code(), Some(2));
    assert_eq!(gaplab(&[]).status.code(), Some(2));
}

#[test]
fn missing_config_is_a_runtime_failure() {
    let o = gaplab(&["sweep", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn mesh_and_solve_write_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), &format!("[material]\nkind = elasticity\n{COARSE}"));
    let cfg = cfg.to_str().unwrap();
    let mesh_path = tmp.path().join("m.txt");
    let o = gaplab(&["mesh", "--config", cfg, "--eps", "0.05", "--out", mesh_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mesh = read_mesh(&std::fs::read_to_string(&mesh_path).unwrap()).unwrap();
    assert!(mesh.n_cells() > 100);

    let o = gaplab(&["solve", "--config", cfg, "--eps", "0.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let field = std::fs::read_to_string(tmp.path().join("out/field.csv")).unwrap();
    assert!(field.starts_with("node,x,y,u1,u2\n"));
    let flux: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/flux.json")).unwrap()).unwrap();
    assert_eq!(flux["coefficients"].as_array().unwrap().len(), 6);
    for c in flux["natural_conditions"].as_array().unwrap() {
        assert!(c["relative"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn decompose_and_factors_write_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), COARSE);
    let cfg = cfg.to_str().unwrap();
    let o = gaplab(&["decompose", "--config", cfg, "--eps", "0.01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let diag = std::fs::read_to_string(tmp.path().join("out/diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().count(), 2);

    let o = gaplab(&["factors", "--config", cfg, "--touching-only"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/factors.json")).unwrap()).unwrap();
    for key in ["b_star", "c_star", "b_eps", "cusp_sensitivity", "verdict"] {
        assert!(rep.get(key).is_some(), "{key}");
    }
    assert_eq!(rep["verdict"], "BLOW_UP");
}
