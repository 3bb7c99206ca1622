//! Acceptance cases and a PASS/FAIL reporter.
//!
//! A [`Case`] is one ε-sweep together with the touching-limit factors of
//! its geometry. The acceptance target builds the cases once and checks
//! every criterion against them.

use std::time::Instant;

use gaplab::bc::{Phi, PhiSpec, Preset};
use gaplab::blowup::{touching_factors, TouchingFactors};
use gaplab::fem::{MaterialParams, ProblemKind};
use gaplab::geometry::Family;
use gaplab::sweep::{geometric_grid, run_sweep, GeometrySpec, SweepConfig, SweepRecord};
use gaplab::Result;

/// A finished sweep and its touching-limit factors.
#[derive(Clone, Debug)]
pub struct Case {
    pub name: &'static str,
    pub config: SweepConfig,
    pub records: Vec<SweepRecord>,
    pub factors: TouchingFactors,
    /// Wall time of the sweep plus the touching solves.
    pub seconds: f64,
}

impl Case {
    pub fn run(name: &'static str, config: SweepConfig) -> Result<Case> {
        let start = Instant::now();
        let records = run_sweep(&config)?;
        let geom = config.geometry.build(config.eps_grid[0])?;
        let factors = touching_factors(&geom, &config.grading, &config.material, &config.phi, config.degree)?;
        Ok(Case { name, config, records, factors, seconds: start.elapsed().as_secs_f64() })
    }

    pub fn kind(&self) -> ProblemKind {
        self.config.kind()
    }

    pub fn eps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps).collect()
    }

    /// Rows `(ε, [b_1^β])` for the convergence study.
    pub fn b_eps(&self) -> Vec<(f64, Vec<f64>)> {
        self.records.iter().map(|r| (r.eps, r.b1.clone())).collect()
    }

    /// Coefficient snapshots `[C_1^1..C_1^m, C_2^1..C_2^m]`.
    pub fn coefficients(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.coefficients.clone()).collect()
    }
}

/// Unit disks in a radius-5 disk, 9 points from 1e-1 to 1e-5.
pub fn disks(kind: ProblemKind, phi: PhiSpec) -> Result<SweepConfig> {
    let material = MaterialParams::for_kind(kind, 1.0, 1.0)?;
    let phi = Phi::new(phi, kind)?;
    Ok(SweepConfig::new(GeometrySpec::default(), material, phi, geometric_grid(1e-1, 1e-5, 2)))
}

/// Unit spheres in a radius-5 ball (meridian half-plane), 7 points from
/// 1e-1 to 1e-4.
pub fn spheres(phi: Preset) -> Result<SweepConfig> {
    let kind = ProblemKind::AxisymConductivity;
    let geometry = GeometrySpec { family: Family::TwoSpheresAxisym, ..GeometrySpec::default() };
    let material = MaterialParams::for_kind(kind, 1.0, 1.0)?;
    Ok(SweepConfig::new(geometry, material, Phi::preset(phi, kind)?, geometric_grid(1e-1, 1e-4, 2)))
}

/// Collects PASS/FAIL lines.
#[derive(Debug, Default)]
pub struct Suite {
    pub passed: Vec<String>,
    pub failed: Vec<String>,
}

impl Suite {
    pub fn check(&mut self, label: &str, pass: bool, detail: impl AsRef<str>) {
        println!("{} {label}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
        if pass {
            self.passed.push(label.to_string());
        } else {
            self.failed.push(label.to_string());
        }
    }

    /// Records a failed check for an error that prevented evaluation.
    pub fn check_result<T>(&mut self, label: &str, r: Result<T>, f: impl FnOnce(&mut Suite, T)) {
        match r {
            Ok(v) => f(self, v),
            Err(e) => self.check(label, false, format!("error: {e}")),
        }
    }

    pub fn summary(&self) -> String {
        format!("{} passed, {} failed", self.passed.len(), self.failed.len())
    }
}
