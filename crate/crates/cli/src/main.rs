//! `gaplab`: command-line driver for the gap blow-up laboratory.
//!
//! Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
//! Messages go to stderr; results are written to files only.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gaplab::blowup::{touching_factors, BlowupReport};
use gaplab::config::{parse_config, OutputFormat, RunConfig};
use gaplab::constrained::{solve_constrained, verify_natural_conditions, ConstraintMode};
use gaplab::decomposition::{decompose, diagnostics_csv, solve_selected_system, DiagnosticsRow};
use gaplab::fem::{assemble, flux_moment, Psi};
use gaplab::geometry::Tag;
use gaplab::meshgen::{generate_mesh, write_mesh};
use gaplab::sweep::{
    fit_records, records_from_csv, records_to_csv, run_point, run_sweep, segment_series, RateModel, SweepRecord,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Gradient blow-up between nearly touching inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One constrained solve; writes the nodal field and a flux report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Gap width (default: the first grid value).
        #[arg(long)]
        eps: Option<f64>,
        /// Tie both inclusions to one rigid motion (constant).
        #[arg(long)]
        shared: bool,
        /// Output directory (default: the config's output dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coefficient decomposition diagnostics over the grid (or one eps).
    Decompose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Touching-limit blow-up factors, compared against the eps-sweep.
    Factors {
        #[arg(long)]
        config: PathBuf,
        /// Skip the finite-gap comparison.
        #[arg(long)]
        touching_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// eps-sweep records.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate fit of a records CSV.
    Fit {
        /// power, log3d or bounded.
        #[arg(long)]
        model: String,
        records: PathBuf,
        /// Output file (default: `<records>_fit.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parses a config and runs the invariant checks at both ends of its grid.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Writes the generated mesh.
    Mesh {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        /// Output file (default: `<output dir>/mesh.txt`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure that has already been reported.
#[derive(Debug)]
struct Reported;

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("failed")
    }
}

impl std::error::Error for Reported {}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match parse_config(&text) {
        Ok(c) => Ok(c),
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            Err(Reported.into())
        }
    }
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn pick_eps(cfg: &RunConfig, eps: Option<f64>) -> f64 {
    eps.unwrap_or(cfg.eps_grid[0])
}

fn report_failures(records: &[SweepRecord]) {
    for r in records.iter().filter(|r| !r.is_valid()) {
        eprintln!("eps = {}: {}", r.eps, r.error.as_deref().unwrap_or(""));
    }
}

fn solve(config: &Path, eps: Option<f64>, shared: bool, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(config)?;
    let eps = pick_eps(&cfg, eps);
    let geom = cfg.geometry.build(eps)?;
    let mesh = generate_mesh(&geom, &cfg.grading)?;
    let system = assemble(&cfg.material()?, Arc::new(mesh), cfg.degree)?;
    let mode = ConstraintMode::for_kind(cfg.kind, shared);
    let res = solve_constrained(&system, mode, &cfg.build_phi()?)?;
    let dir = out_dir(&cfg, out)?;

    let nc = res.field.components();
    let mut text = if nc == 2 { String::from("node,x,y,u1,u2\n") } else { String::from("node,x,y,u\n") };
    for (n, p) in system.space.node_coords.iter().enumerate() {
        let vals: Vec<String> = (0..nc).map(|k| res.field.values[n * nc + k].to_string()).collect();
        text.push_str(&format!("{n},{},{},{}\n", p[0], p[1], vals.join(",")));
    }
    write(&dir.join("field.csv"), &text)?;

    let mut moments = Vec::new();
    for tag in [Tag::D1, Tag::D2, Tag::Outer] {
        for psi in Psi::basis(cfg.kind) {
            moments.push(json!({
                "boundary": tag.name(),
                "psi": psi,
                "moment": flux_moment(&res.field, &system, tag, psi)?,
            }));
        }
    }
    let report = json!({
        "eps": eps,
        "kind": cfg.kind.name(),
        "mode": mode.name(),
        "phi": cfg.build_phi()?.id(),
        "coefficients": res.coefficients,
        "energy": res.energy,
        "flux_moments": moments,
        "natural_conditions": verify_natural_conditions(&system, mode, &res.field),
        "cells": system.space.mesh.n_cells(),
        "dofs": system.space.n_dofs(),
    });
    write(&dir.join("flux.json"), &serde_json::to_string_pretty(&report)?)
}

fn decompose_cmd(config: &Path, eps: Option<f64>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(config)?;
    let rows: Vec<DiagnosticsRow> = match eps {
        Some(eps) => {
            let geom = cfg.geometry.build(eps)?;
            let mesh = generate_mesh(&geom, &cfg.grading)?;
            let system = assemble(&cfg.material()?, Arc::new(mesh), cfg.degree)?;
            let res = decompose(&system, &cfg.build_phi()?)?;
            let sel = solve_selected_system(&res)?;
            vec![DiagnosticsRow::new(eps, &res, &sel)]
        }
        None => {
            let records = run_sweep(&cfg.sweep_config()?)?;
            report_failures(&records);
            records.iter().filter(|r| r.is_valid()).map(|r| r.diagnostics()).collect()
        }
    };
    if rows.is_empty() {
        bail!("no eps value produced diagnostics");
    }
    write(&out_dir(&cfg, out)?.join("diagnostics.csv"), &diagnostics_csv(&rows))
}

fn factors(config: &Path, touching_only: bool, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(config)?;
    let phi = cfg.build_phi()?;
    let touching = cfg.geometry.build(0.0)?;
    let t = touching_factors(&touching, &cfg.grading, &cfg.material()?, &phi, cfg.degree)?;
    if t.accuracy_warning {
        eprintln!("warning: cusp sensitivity {:.3e} exceeds the tolerance", t.cusp_sensitivity);
    }
    let b_eps: Vec<(f64, Vec<f64>)> = if touching_only {
        Vec::new()
    } else {
        let records = run_sweep(&cfg.sweep_config()?)?;
        report_failures(&records);
        records.iter().filter(|r| r.is_valid()).map(|r| (r.eps, r.b1.clone())).collect()
    };
    let report = BlowupReport::new(cfg.kind, &phi, &t, &b_eps);
    eprintln!("b_star = {:?}, verdict {:?}", report.b_star, report.verdict);
    write(&out_dir(&cfg, out)?.join("factors.json"), &report.to_json())
}

fn sweep(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(config)?;
    let records = run_sweep(&cfg.sweep_config()?)?;
    report_failures(&records);
    let dir = out_dir(&cfg, out)?;
    if cfg.formats.contains(&OutputFormat::Csv) {
        write(&dir.join("records.csv"), &records_to_csv(&records))?;
    }
    if cfg.formats.contains(&OutputFormat::Json) {
        let model = if cfg.kind.dim() == 3 { RateModel::Log3d } else { RateModel::Power };
        match fit_records(&records, model) {
            Ok(fit) => write(&dir.join("fit.json"), &fit.to_json())?,
            Err(e) => eprintln!("{} fit skipped: {e}", model.name()),
        }
    }
    if records.iter().all(|r| !r.is_valid()) {
        bail!("every eps value failed");
    }
    Ok(())
}

fn fit(model: &str, records: &Path, out: Option<PathBuf>) -> Result<()> {
    let model = RateModel::parse(model)?;
    let text = fs::read_to_string(records).with_context(|| format!("reading {}", records.display()))?;
    let recs = records_from_csv(&text)?;
    let fit = fit_records(&recs, model)?;
    eprintln!("{} fit on {} records: {:?}, residual {:.3e}", model.name(), segment_series(&recs).len(), fit.params, fit.residual);
    let out = out.unwrap_or_else(|| {
        let stem = records.file_stem().and_then(|s| s.to_str()).unwrap_or("records");
        records.with_file_name(format!("{stem}_fit.json"))
    });
    write(&out, &fit.to_json())
}

fn validate(config: &Path) -> Result<()> {
    let cfg = load(config)?;
    eprintln!("config ok: {} eps values, kind {}", cfg.eps_grid.len(), cfg.kind.name());
    let sc = cfg.sweep_config()?;
    let ends = [cfg.eps_grid[0], *cfg.eps_grid.last().expect("grid checked")];
    let mut failed = 0;
    let mut check = |name: String, ok: bool| {
        eprintln!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    };
    for eps in ends {
        let mesh = generate_mesh(&cfg.geometry.build(eps)?, &cfg.grading)?;
        let report = mesh.check();
        check(format!("mesh eps={eps}: min angle {:.2} deg, {} cells", report.min_angle_deg, mesh.n_cells()), report.valid());
        match run_point(&sc, eps) {
            Ok(r) => {
                check(format!("finite observables eps={eps}"), r.is_finite());
                check(format!("gram symmetry eps={eps}: {:.2e}", r.gram_asymmetry), r.gram_asymmetry <= 1e-12);
                check(format!("gram SPD eps={eps}: min eigenvalue {:.3e}", r.gram_min_eigenvalue), r.gram_min_eigenvalue > 0.0);
                check(
                    format!("reconstruction eps={eps}: {:.2e}", r.reconstruction_error),
                    r.reconstruction_error <= 1e-8,
                );
                check(format!("natural conditions eps={eps}: {:.2e}", r.natural_residual), r.natural_residual <= 1e-9);
                check(
                    format!("segment sup eps={eps}: {:.4e} >= midpoint {:.4e}", r.max_grad_segment, r.grad_midpoint),
                    r.max_grad_segment >= r.grad_midpoint * (1.0 - 1e-9),
                );
            }
            Err(e) => check(format!("solve eps={eps}: {e}"), false),
        }
    }
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        return Err(Reported.into());
    }
    Ok(())
}

fn mesh(config: &Path, eps: Option<f64>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(config)?;
    let eps = pick_eps(&cfg, eps);
    let mesh = generate_mesh(&cfg.geometry.build(eps)?, &cfg.grading)?;
    eprintln!("{} cells, {} vertices, min angle {:.2} deg", mesh.n_cells(), mesh.vertices.len(), mesh.stats.min_angle_deg);
    let path = match out {
        Some(p) => p,
        None => out_dir(&cfg, None)?.join("mesh.txt"),
    };
    write(&path, &write_mesh(&mesh))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, eps, shared, out } => solve(&config, eps, shared, out),
        Command::Decompose { config, eps, out } => decompose_cmd(&config, eps, out),
        Command::Factors { config, touching_only, out } => factors(&config, touching_only, out),
        Command::Sweep { config, out } => sweep(&config, out),
        Command::Fit { model, records, out } => fit(&model, &records, out),
        Command::Validate { config } => validate(&config),
        Command::Mesh { config, eps, out } => mesh(&config, eps, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.is::<Reported>() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(1)
        }
    }
}
