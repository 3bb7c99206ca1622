//! ε-sweeps over a geometry family, gap observables, rate fits and the
//! gradient profile check.
//!
//! Every ε gets its own graded mesh. Records are computed in parallel and
//! returned in grid order; a failure at one ε is stored in that record.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bc::Phi;
use crate::blowup::rho;
use crate::constrained::{solve_constrained, verify_natural_conditions, ConstraintMode};
use crate::decomposition::{decompose, solve_selected_system, DiagnosticsRow};
use crate::fem::{assemble, Field, MaterialParams, ProblemKind, SparseSystem};
use crate::geometry::{Family, GapGeometry, Point, DEFAULT_KAPPA1};
use crate::meshgen::{generate_mesh, Grading};
use crate::{Error, Result};

/// Environment variable capping the sweep worker count.
pub const THREADS_ENV: &str = "GAPLAB_THREADS";
pub const MIN_SEGMENT_SAMPLES: usize = 64;
/// Allowed `max / min` of the normalized gradient profile.
pub const PROFILE_BAND: f64 = 10.0;

/// Geometry family and sizes; ε is supplied per sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub family: Family,
    pub outer_radius: f64,
    pub inclusion_size: f64,
    pub kappa1: f64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec { family: Family::TwoDisks, outer_radius: 5.0, inclusion_size: 1.0, kappa1: DEFAULT_KAPPA1 }
    }
}

impl GeometrySpec {
    pub fn build(&self, eps: f64) -> Result<GapGeometry> {
        GapGeometry::new(self.family, self.outer_radius, self.inclusion_size, eps, self.kappa1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub geometry: GeometrySpec,
    pub material: MaterialParams,
    pub phi: Phi,
    /// Strictly decreasing gap widths.
    pub eps_grid: Vec<f64>,
    pub grading: Grading,
    pub degree: usize,
    pub segment_samples: usize,
}

impl SweepConfig {
    pub fn new(geometry: GeometrySpec, material: MaterialParams, phi: Phi, eps_grid: Vec<f64>) -> SweepConfig {
        SweepConfig {
            geometry,
            material,
            phi,
            eps_grid,
            grading: Grading::default(),
            degree: 2,
            segment_samples: MIN_SEGMENT_SAMPLES,
        }
    }

    pub fn kind(&self) -> ProblemKind {
        self.material.kind
    }
}

/// Geometric grid from `start` down to `stop` with `per_decade` points per
/// decade; both ends included.
pub fn geometric_grid(start: f64, stop: f64, per_decade: usize) -> Vec<f64> {
    let n = ((start / stop).log10() * per_decade as f64).round() as usize;
    (0..=n).map(|k| start * 10f64.powf(-(k as f64) / per_decade as f64)).collect()
}

/// At least 4 positive, finite, strictly decreasing values.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::Grid(format!("eps grid needs at least 4 points, got {}", grid.len())));
    }
    if grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::Grid("eps values must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Grid("eps grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// Profile offsets `0, √ε, 2√ε, 4√ε, ...` below `R/2`, then `R/2`.
pub fn profile_offsets(eps: f64, r_frame: f64) -> Vec<f64> {
    let half = 0.5 * r_frame;
    let mut out = vec![0.0];
    let mut s = eps.sqrt();
    while s < half {
        out.push(s);
        s *= 2.0;
    }
    out.push(half);
    out
}

/// Observables of one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub kind: ProblemKind,
    pub phi_id: String,
    /// `sup |∇u|` on `P1P2` for the per-inclusion constrained solution.
    pub max_grad_segment: f64,
    pub grad_midpoint: f64,
    /// `(s, max |∇u|)` over the gap-crossing line at frame offset `s`.
    pub profile: Vec<(f64, f64)>,
    /// Constrained coefficients `[C_1^1.., C_2^1..]`.
    pub coefficients: Vec<f64>,
    /// `C_1^α - C_2^α` for the translations, from the selected system.
    pub c_diff: Vec<f64>,
    pub b1: Vec<f64>,
    pub a11_11: f64,
    pub a11_22: Option<f64>,
    pub a11_12: Option<f64>,
    pub a11_33: Option<f64>,
    pub a22_33: Option<f64>,
    pub det_a22: Option<f64>,
    pub cond: f64,
    pub gram_asymmetry: f64,
    pub gram_min_eigenvalue: f64,
    /// Energy-norm distance between the reconstruction and the direct solve,
    /// relative to the direct solution.
    pub reconstruction_error: f64,
    /// Largest relative natural-condition residual of the direct solve.
    pub natural_residual: f64,
    pub cells: usize,
    pub vertices: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub min_angle: f64,
    pub gap_layers: usize,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(eps: f64, kind: ProblemKind, phi_id: String, error: &Error, wall_time: f64) -> SweepRecord {
        SweepRecord {
            eps,
            kind,
            phi_id,
            max_grad_segment: 0.0,
            grad_midpoint: 0.0,
            profile: Vec::new(),
            coefficients: Vec::new(),
            c_diff: Vec::new(),
            b1: Vec::new(),
            a11_11: 0.0,
            a11_22: None,
            a11_12: None,
            a11_33: None,
            a22_33: None,
            det_a22: None,
            cond: 0.0,
            gram_asymmetry: 0.0,
            gram_min_eigenvalue: 0.0,
            reconstruction_error: 0.0,
            natural_residual: 0.0,
            cells: 0,
            vertices: 0,
            h_min: 0.0,
            h_max: 0.0,
            min_angle: 0.0,
            gap_layers: 0,
            wall_time,
            error: Some(error.to_string()),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }

    pub fn diagnostics(&self) -> DiagnosticsRow {
        DiagnosticsRow {
            eps: self.eps,
            kind: self.kind,
            a11_11: self.a11_11,
            a11_22: self.a11_22,
            a11_12: self.a11_12,
            a11_33: self.a11_33,
            a22_33: self.a22_33,
            det_a22: self.det_a22,
            c_diff: self.c_diff.clone(),
            b1: self.b1.clone(),
            cond: self.cond,
        }
    }

    /// `C_i^α` from the coefficient snapshot.
    pub fn coefficient(&self, i: usize, alpha: usize) -> f64 {
        let m = self.coefficients.len() / 2;
        self.coefficients[(i - 1) * m + alpha - 1]
    }

    /// Every numeric field is finite.
    pub fn is_finite(&self) -> bool {
        let opts = [self.a11_22, self.a11_12, self.a11_33, self.a22_33, self.det_a22];
        let finite = [
            self.eps,
            self.max_grad_segment,
            self.grad_midpoint,
            self.a11_11,
            self.cond,
            self.gram_asymmetry,
            self.gram_min_eigenvalue,
            self.reconstruction_error,
            self.natural_residual,
            self.h_min,
            self.h_max,
            self.min_angle,
            self.wall_time,
        ]
        .iter()
        .chain(opts.iter().flatten())
        .chain(&self.coefficients)
        .chain(&self.c_diff)
        .chain(&self.b1)
        .chain(self.profile.iter().flat_map(|(s, v)| [s, v]))
        .all(|v| v.is_finite());
        finite
    }
}

/// Pulls both ends of a segment inward so they locate inside the mesh.
fn shrink(a: Point, b: Point) -> (Point, Point) {
    let t = 1e-9;
    let d = [b[0] - a[0], b[1] - a[1]];
    ([a[0] + t * d[0], a[1] + t * d[1]], [b[0] - t * d[0], b[1] - t * d[1]])
}

/// `max |∇u|` over the gap-crossing line at frame offset `s` (both sides in
/// the plane, `r = s` in meridian geometries).
fn line_sup(field: &Field, geom: &GapGeometry, s: f64, samples: usize) -> Result<f64> {
    let sides: &[f64] = if geom.is_axisymmetric() || s == 0.0 { &[1.0] } else { &[1.0, -1.0] };
    let mut best = 0.0f64;
    for &sign in sides {
        let x = sign * s;
        let lo = geom.frame.to_world([x, -0.5 * geom.epsilon + geom.h2(x)?]);
        let hi = geom.frame.to_world([x, 0.5 * geom.epsilon + geom.h1(x)?]);
        let (a, b) = shrink(lo, hi);
        best = best.max(field.segment_sup(a, b, samples)?.max);
    }
    Ok(best)
}

fn energy_norm(system: &SparseSystem, v: &[f64]) -> f64 {
    system.pair(v, v).max(0.0).sqrt()
}

/// All observables at one ε.
pub fn run_point(config: &SweepConfig, eps: f64) -> Result<SweepRecord> {
    let start = Instant::now();
    let kind = config.kind();
    let geom = config.geometry.build(eps)?;
    let mesh = generate_mesh(&geom, &config.grading)?;
    let stats = mesh.stats;
    let vertices = mesh.vertices.len();
    let cells = mesh.n_cells();
    let system = assemble(&config.material, Arc::new(mesh), config.degree)?;

    let mode = ConstraintMode::for_kind(kind, false);
    let direct = solve_constrained(&system, mode, &config.phi)?;
    let natural_residual = verify_natural_conditions(&system, mode, &direct.field)
        .iter()
        .fold(0.0f64, |m, c| m.max(c.relative));
    let samples = config.segment_samples.max(MIN_SEGMENT_SAMPLES);
    let (a, b) = shrink(geom.p2(), geom.p1());
    let seg = direct.field.segment_sup(a, b, samples)?;
    let profile = profile_offsets(eps, geom.r_frame)
        .into_iter()
        .map(|s| Ok((s, line_sup(&direct.field, &geom, s, samples)?)))
        .collect::<Result<Vec<_>>>()?;

    let res = decompose(&system, &config.phi)?;
    let sel = solve_selected_system(&res)?;
    let rec = res.reconstruct();
    let diff: Vec<f64> = rec.values.iter().zip(&direct.field.values).map(|(x, y)| x - y).collect();
    let scale = energy_norm(&system, &direct.field.values);
    let dist = energy_norm(&system, &diff);
    let reconstruction_error = if scale > 0.0 { dist / scale } else { dist };
    let diag = DiagnosticsRow::new(eps, &res, &sel);

    Ok(SweepRecord {
        eps,
        kind,
        phi_id: config.phi.id(),
        max_grad_segment: seg.max,
        grad_midpoint: seg.midpoint,
        profile,
        coefficients: direct.coefficients,
        c_diff: diag.c_diff,
        b1: diag.b1,
        a11_11: diag.a11_11,
        a11_22: diag.a11_22,
        a11_12: diag.a11_12,
        a11_33: diag.a11_33,
        a22_33: diag.a22_33,
        det_a22: diag.det_a22,
        cond: diag.cond,
        gram_asymmetry: res.moments.gram_asymmetry,
        gram_min_eigenvalue: res.moments.min_eigenvalue,
        reconstruction_error,
        natural_residual,
        cells,
        vertices,
        h_min: stats.h_min,
        h_max: stats.h_max,
        min_angle: stats.min_angle_deg,
        gap_layers: stats.gap_layers,
        wall_time: start.elapsed().as_secs_f64(),
        error: None,
    })
}

/// Worker cap from `GAPLAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n > 0)
}

/// One record per ε, in grid order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    check_grid(&config.eps_grid)?;
    config.material.validate()?;
    if config.phi.components != config.kind().components() {
        return Err(Error::Parameter("φ component count does not match the problem".into()));
    }
    let one = |eps: f64| {
        let start = Instant::now();
        run_point(config, eps).unwrap_or_else(|e| {
            SweepRecord::failed(eps, config.kind(), config.phi.id(), &e, start.elapsed().as_secs_f64())
        })
    };
    let run = || config.eps_grid.par_iter().map(|&e| one(e)).collect::<Vec<_>>();
    match thread_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

pub const RECORD_COLUMNS: [&str; 30] = [
    "eps",
    "kind",
    "phi_id",
    "max_grad_segment",
    "grad_midpoint",
    "profile",
    "coefficients",
    "c_diff",
    "b1",
    "a11_11",
    "a11_22",
    "a11_12",
    "a11_33",
    "a22_33",
    "det_a22",
    "cond",
    "gram_asymmetry",
    "gram_min_eigenvalue",
    "reconstruction_error",
    "natural_residual",
    "cells",
    "vertices",
    "h_min",
    "h_max",
    "min_angle",
    "gap_layers",
    "wall_time",
    "error",
    "rho",
    "normalized_grad",
];

/// Shortest round-trip decimal, in exponent form outside `[1e-4, 1e15)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

/// Records as CSV: a `#` comment line naming the columns, the header row,
/// one row per record. Vectors are `;`-separated, profile entries `s:value`.
/// The trailing `rho` and `normalized_grad` columns are derived and ignored
/// on reading.
pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut out = format!(
        "# gaplab sweep records; columns: {}; vectors ';'-separated, profile as s:value\n",
        RECORD_COLUMNS.join(" ")
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS).expect("in-memory write");
    for r in records {
        let profile: Vec<String> =
            r.profile.iter().map(|(s, v)| format!("{}:{}", format_f64(*s), format_f64(*v))).collect();
        let rho_eps = rho(r.kind, r.eps);
        let row = [
            format_f64(r.eps),
            r.kind.name().to_string(),
            r.phi_id.clone(),
            format_f64(r.max_grad_segment),
            format_f64(r.grad_midpoint),
            profile.join(";"),
            join(&r.coefficients),
            join(&r.c_diff),
            join(&r.b1),
            format_f64(r.a11_11),
            opt(r.a11_22),
            opt(r.a11_12),
            opt(r.a11_33),
            opt(r.a22_33),
            opt(r.det_a22),
            format_f64(r.cond),
            format_f64(r.gram_asymmetry),
            format_f64(r.gram_min_eigenvalue),
            format_f64(r.reconstruction_error),
            format_f64(r.natural_residual),
            r.cells.to_string(),
            r.vertices.to_string(),
            format_f64(r.h_min),
            format_f64(r.h_max),
            format_f64(r.min_angle),
            r.gap_layers.to_string(),
            format_f64(r.wall_time),
            r.error.clone().unwrap_or_default(),
            format_f64(rho_eps),
            format_f64(r.max_grad_segment * r.eps / rho_eps),
        ];
        w.write_record(&row).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output"));
    out
}

fn parse_f64(s: &str, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Data(format!("column {col}: '{s}' is not a number")))
}

fn parse_usize(s: &str, col: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Data(format!("column {col}: '{s}' is not a count")))
}

fn parse_vec(s: &str, col: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|x| parse_f64(x, col)).collect()
}

fn parse_opt(s: &str, col: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, col).map(Some)
    }
}

/// Reads records written by [`records_to_csv`]; columns are matched by name.
pub fn records_from_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rd.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let index: BTreeMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for col in &RECORD_COLUMNS[..28] {
        if !index.contains_key(col) {
            return Err(Error::Data(format!("missing column '{col}'")));
        }
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| Error::Data(e.to_string()))?;
        let get = |c: &str| row.get(index[c]).unwrap_or("");
        let f = |c: &str| parse_f64(get(c), c);
        let o = |c: &str| parse_opt(get(c), c);
        let profile = if get("profile").trim().is_empty() {
            Vec::new()
        } else {
            get("profile")
                .split(';')
                .map(|p| {
                    let (s, v) = p.split_once(':').ok_or_else(|| Error::Data(format!("profile entry '{p}'")))?;
                    Ok((parse_f64(s, "profile")?, parse_f64(v, "profile")?))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let error = get("error");
        out.push(SweepRecord {
            eps: f("eps")?,
            kind: ProblemKind::parse(get("kind")).map_err(|e| Error::Data(e.to_string()))?,
            phi_id: get("phi_id").to_string(),
            max_grad_segment: f("max_grad_segment")?,
            grad_midpoint: f("grad_midpoint")?,
            profile,
            coefficients: parse_vec(get("coefficients"), "coefficients")?,
            c_diff: parse_vec(get("c_diff"), "c_diff")?,
            b1: parse_vec(get("b1"), "b1")?,
            a11_11: f("a11_11")?,
            a11_22: o("a11_22")?,
            a11_12: o("a11_12")?,
            a11_33: o("a11_33")?,
            a22_33: o("a22_33")?,
            det_a22: o("det_a22")?,
            cond: f("cond")?,
            gram_asymmetry: f("gram_asymmetry")?,
            gram_min_eigenvalue: f("gram_min_eigenvalue")?,
            reconstruction_error: f("reconstruction_error")?,
            natural_residual: f("natural_residual")?,
            cells: parse_usize(get("cells"), "cells")?,
            vertices: parse_usize(get("vertices"), "vertices")?,
            h_min: f("h_min")?,
            h_max: f("h_max")?,
            min_angle: f("min_angle")?,
            gap_layers: parse_usize(get("gap_layers"), "gap_layers")?,
            wall_time: f("wall_time")?,
            error: if error.is_empty() { None } else { Some(error.to_string()) },
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RateModel {
    /// `c ε^{-p}`.
    Power,
    /// `c / (ε |log ε|)`.
    Log3d,
    /// `c`.
    Bounded,
}

impl RateModel {
    pub fn name(self) -> &'static str {
        match self {
            RateModel::Power => "POWER",
            RateModel::Log3d => "LOG3D",
            RateModel::Bounded => "BOUNDED",
        }
    }

    pub fn parse(s: &str) -> Result<RateModel> {
        match s.trim().to_ascii_uppercase().as_str() {
            "POWER" => Ok(RateModel::Power),
            "LOG3D" => Ok(RateModel::Log3d),
            "BOUNDED" => Ok(RateModel::Bounded),
            other => Err(Error::Parameter(format!("unknown rate model '{other}'"))),
        }
    }

    fn shape(self, eps: f64) -> f64 {
        match self {
            RateModel::Power | RateModel::Bounded => 1.0,
            RateModel::Log3d => 1.0 / (eps * eps.ln().abs()),
        }
    }
}

/// Fitted rate model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    /// `c` and, for POWER, `p`.
    pub params: BTreeMap<String, f64>,
    /// Largest relative deviation of the data from the fit.
    pub residual: f64,
    /// Leave-one-out range of the principal parameter (`p` for POWER, `c`
    /// otherwise).
    pub band: [f64; 2],
}

impl RateFit {
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

/// `(c, p)` of the fit; `p` is zero for models without an exponent.
fn fit_params(points: &[(f64, f64)], model: RateModel) -> (f64, f64) {
    let n = points.len() as f64;
    match model {
        RateModel::Power => {
            let x: Vec<f64> = points.iter().map(|(e, _)| (1.0 / e).ln()).collect();
            let y: Vec<f64> = points.iter().map(|(_, g)| g.ln()).collect();
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
            let p = sxy / sxx;
            ((my - p * mx).exp(), p)
        }
        RateModel::Log3d => {
            let mean = points.iter().map(|&(e, g)| (g / model.shape(e)).ln()).sum::<f64>() / n;
            (mean.exp(), 0.0)
        }
        RateModel::Bounded => (points.iter().map(|(_, g)| g).sum::<f64>() / n, 0.0),
    }
}

fn predict(model: RateModel, c: f64, p: f64, eps: f64) -> f64 {
    match model {
        RateModel::Power => c * eps.powf(-p),
        _ => c * model.shape(eps),
    }
}

/// Fits `model` to `(ε, max|∇u|)` pairs: log-space least squares for POWER,
/// the geometric mean of `g ε |log ε|` for LOG3D, the mean for BOUNDED.
pub fn fit_rate(points: &[(f64, f64)], model: RateModel) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("rate fits need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|(e, g)| !(*e > 0.0) || !e.is_finite() || !g.is_finite()) {
        return Err(Error::Fit("eps must be positive and values finite".into()));
    }
    if model == RateModel::Log3d && points.iter().any(|(e, _)| *e >= 1.0) {
        return Err(Error::Fit("LOG3D needs eps < 1".into()));
    }
    if model != RateModel::Bounded && points.iter().any(|(_, g)| !(*g > 0.0)) {
        return Err(Error::Fit(format!(
            "{} fit needs positive gradients; the data has zeros, use the BOUNDED model",
            model.name()
        )));
    }
    let (c, p) = fit_params(points, model);
    let mut residual = 0.0f64;
    for &(e, g) in points {
        let f = predict(model, c, p, e);
        let dev = if f != 0.0 { (g - f).abs() / f.abs() } else { (g - f).abs() };
        residual = residual.max(dev);
    }
    let principal = |c: f64, p: f64| if model == RateModel::Power { p } else { c };
    let mut band = [f64::INFINITY, f64::NEG_INFINITY];
    for k in 0..points.len() {
        let rest: Vec<(f64, f64)> = points.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| *v).collect();
        let (ck, pk) = fit_params(&rest, model);
        let v = principal(ck, pk);
        band = [band[0].min(v), band[1].max(v)];
    }
    let mut params = BTreeMap::new();
    params.insert("c".to_string(), c);
    if model == RateModel::Power {
        params.insert("p".to_string(), p);
    }
    Ok(RateFit { model, params, residual, band })
}

/// `(ε, max_grad_segment)` of the valid records.
pub fn segment_series(records: &[SweepRecord]) -> Vec<(f64, f64)> {
    records.iter().filter(|r| r.is_valid()).map(|r| (r.eps, r.max_grad_segment)).collect()
}

pub fn fit_records(records: &[SweepRecord], model: RateModel) -> Result<RateFit> {
    fit_rate(&segment_series(records), model)
}

/// Normalized gradient profile of one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileCheck {
    /// `(s, max|∇u|(s) (√ε + s))`.
    pub normalized: Vec<(f64, f64)>,
    pub band_ratio: f64,
    pub pass: bool,
}

/// The gradient on the line at offset `s` times `√ε + s` must stay within
/// a factor [`PROFILE_BAND`] across the offsets. All-zero profiles pass.
pub fn profile_check(record: &SweepRecord) -> Result<ProfileCheck> {
    let p = &record.profile;
    let root = record.eps.sqrt();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(root);
    // With sqrt(eps) >= R/2 the ladder is just `0, R/2`.
    let structured = p.len() >= 2
        && p[0].0 == 0.0
        && p[p.len() - 1].0 > p[p.len() - 2].0
        && if p.len() == 2 {
            p[1].0 <= root * (1.0 + 1e-9)
        } else {
            close(p[1].0, root) && p[1..p.len() - 1].windows(2).all(|w| close(w[1].0, 2.0 * w[0].0))
        };
    if !structured {
        return Err(Error::Data(format!(
            "profile at eps = {} lacks samples at 0, sqrt(eps), 2 sqrt(eps), ...",
            record.eps
        )));
    }
    let normalized: Vec<(f64, f64)> = p.iter().map(|&(s, v)| (s, v * (root + s))).collect();
    if normalized.iter().all(|(_, v)| *v == 0.0) {
        return Ok(ProfileCheck { normalized, band_ratio: 1.0, pass: true });
    }
    let (lo, hi) = normalized.iter().fold((f64::INFINITY, 0.0f64), |(l, h), (_, v)| (l.min(*v), h.max(*v)));
    let band_ratio = hi / lo;
    Ok(ProfileCheck { normalized, band_ratio, pass: band_ratio < PROFILE_BAND })
}
