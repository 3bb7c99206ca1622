//! INI run configuration with sections `[geometry]`, `[material]`, `[bc]`,
//! `[sweep]` and `[output]`.
//!
//! ```ini
//! [geometry]
//! family = two_disks          ; two_disks | two_spheres_axisym | superellipse
//! outer_radius = 5
//! inclusion_size = 1
//! kappa1 = 0.1
//!
//! [material]
//! kind = conductivity         ; conductivity | elasticity | axisym_conductivity
//! lambda = 1
//! mu = 1
//!
//! [bc]
//! phi = X2                    ; ZERO X1 X2 Z_AXIS PSI1 PSI2 PSI3
//! ; coefficients = 0 0 1 0 0 0   (instead of phi)
//!
//! [sweep]
//! eps = 1e-1, 1e-2, 1e-3, 1e-4   ; or eps_start / eps_stop / points_per_decade
//! c_grade = 0.5
//! h_far = 0.3
//! cusp_cutoff = 1e-3
//! max_cells = 2000000
//! degree = 2
//! segment_samples = 64
//!
//! [output]
//! dir = out
//! formats = csv, json
//! ```
//!
//! Every key is optional. Parsing collects all problems before failing.

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::bc::{Phi, PhiSpec, Preset};
use crate::fem::{MaterialParams, ProblemKind};
use crate::geometry::Family;
use crate::meshgen::Grading;
use crate::sweep::{check_grid, format_f64, geometric_grid, GeometrySpec, SweepConfig, MIN_SEGMENT_SAMPLES};
use crate::{Error, Result};

const SECTIONS: [(&str, &[&str]); 5] = [
    ("geometry", &["family", "outer_radius", "inclusion_size", "kappa1"]),
    ("material", &["kind", "lambda", "mu"]),
    ("bc", &["phi", "coefficients"]),
    (
        "sweep",
        &[
            "eps",
            "eps_start",
            "eps_stop",
            "points_per_decade",
            "c_grade",
            "h_far",
            "cusp_cutoff",
            "max_cells",
            "degree",
            "segment_samples",
        ],
    ),
    ("output", &["dir", "formats"]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Result<OutputFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Parameter(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub kind: ProblemKind,
    pub lambda: f64,
    pub mu: f64,
    pub phi: PhiSpec,
    pub eps_grid: Vec<f64>,
    pub grading: Grading,
    pub degree: usize,
    pub segment_samples: usize,
    pub output_dir: String,
    pub formats: Vec<OutputFormat>,
}

/// Default grid: ratio `10^{1/2}` from `1e-1` to `1e-5` (plane) or `1e-4`
/// (axisymmetric).
pub fn default_grid(family: Family) -> Vec<f64> {
    let stop = if family == Family::TwoSpheresAxisym { 1e-4 } else { 1e-5 };
    geometric_grid(1e-1, stop, 2)
}

impl RunConfig {
    pub fn material(&self) -> Result<MaterialParams> {
        MaterialParams::for_kind(self.kind, self.lambda, self.mu)
    }

    pub fn build_phi(&self) -> Result<Phi> {
        Phi::new(self.phi.clone(), self.kind)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let mut c = SweepConfig::new(self.geometry, self.material()?, self.build_phi()?, self.eps_grid.clone());
        c.grading = self.grading;
        c.degree = self.degree;
        c.segment_samples = self.segment_samples;
        Ok(c)
    }

    /// All invariant violations, each prefixed with its section.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        // Lamé constants are checked for every kind; conductivity ignores them.
        let delta0 = self.mu.min(1.0 / (2.0 * self.lambda + 2.0 * self.mu));
        let lame = MaterialParams { lambda: self.lambda, mu: self.mu, delta0, dim: 2, kind: ProblemKind::Elasticity };
        v.extend(lame.violations().into_iter().map(|m| format!("material: {m}")));
        let axisym_family = self.geometry.family == Family::TwoSpheresAxisym;
        if axisym_family != self.kind.is_axisymmetric() {
            v.push(format!(
                "material: kind {} does not match geometry family {}",
                self.kind.name(),
                self.geometry.family.name()
            ));
        }
        if let Err(e) = self.build_phi() {
            v.push(format!("bc: {e}"));
        }
        if let Err(e) = check_grid(&self.eps_grid) {
            v.push(format!("sweep: {e}"));
        }
        let g = &self.grading;
        if !(g.c_grade > 0.0 && g.h_far > 0.0 && g.cusp_cutoff > 0.0) {
            v.push("sweep: c_grade, h_far and cusp_cutoff must be positive".into());
        }
        if g.max_cells == 0 {
            v.push("sweep: max_cells must be positive".into());
        }
        if !(1..=2).contains(&self.degree) {
            v.push(format!("sweep: degree must be 1 or 2, got {}", self.degree));
        }
        if self.segment_samples < MIN_SEGMENT_SAMPLES {
            v.push(format!("sweep: segment_samples must be at least {MIN_SEGMENT_SAMPLES}"));
        }
        let widest = self.eps_grid.iter().copied().filter(|e| e.is_finite() && *e >= 0.0).fold(0.0f64, f64::max);
        if let Err(e) = self.geometry.build(widest) {
            v.push(format!("geometry: {e}"));
        }
        if self.formats.is_empty() {
            v.push("output: at least one format is required".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let geometry = GeometrySpec::default();
        RunConfig {
            geometry,
            kind: ProblemKind::Conductivity,
            lambda: 1.0,
            mu: 1.0,
            phi: PhiSpec::Preset(Preset::X2),
            eps_grid: default_grid(geometry.family),
            grading: Grading::default(),
            degree: 2,
            segment_samples: MIN_SEGMENT_SAMPLES,
            output_dir: "out".into(),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

/// Parses and validates a configuration, reporting every problem at once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Config(vec![format!("syntax: {e}")]))?;
    let mut errs = Vec::new();
    let mut c = RunConfig::default();
    let mut family_set = false;
    let mut kind_set = false;
    let mut grid_keys: (Option<f64>, Option<f64>, Option<usize>) = (None, None, None);
    let mut explicit_grid = false;

    for (section, props) in ini.iter() {
        let Some(section) = section else {
            for (k, _) in props.iter() {
                errs.push(format!("unknown key '{k}' outside any section"));
            }
            continue;
        };
        let Some((_, known)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
            errs.push(format!("unknown section [{section}]"));
            continue;
        };
        let mut seen: Vec<&str> = Vec::new();
        for (key, value) in props.iter() {
            if !known.contains(&key) {
                errs.push(format!("unknown key '{key}' in section [{section}]"));
                continue;
            }
            if seen.contains(&key) {
                errs.push(format!("duplicate key '{key}' in section [{section}]"));
                continue;
            }
            seen.push(key);
            let at = |what: &str| format!("{section}.{key}: {what} '{value}'");
            let num = |errs: &mut Vec<String>| -> Option<f64> {
                match value.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() => Some(x),
                    _ => {
                        errs.push(at("expected a finite number, got"));
                        None
                    }
                }
            };
            let count = |errs: &mut Vec<String>| -> Option<usize> {
                value.trim().parse::<usize>().map_err(|_| errs.push(at("expected a non-negative integer, got"))).ok()
            };
            match (section, key) {
                ("geometry", "family") => match Family::parse(value) {
                    Ok(f) => {
                        c.geometry.family = f;
                        family_set = true;
                    }
                    Err(e) => errs.push(format!("geometry.family: {e}")),
                },
                ("geometry", "outer_radius") => c.geometry.outer_radius = num(&mut errs).unwrap_or(c.geometry.outer_radius),
                ("geometry", "inclusion_size") => {
                    c.geometry.inclusion_size = num(&mut errs).unwrap_or(c.geometry.inclusion_size)
                }
                ("geometry", "kappa1") => c.geometry.kappa1 = num(&mut errs).unwrap_or(c.geometry.kappa1),
                ("material", "kind") => match ProblemKind::parse(value) {
                    Ok(k) => {
                        c.kind = k;
                        kind_set = true;
                    }
                    Err(e) => errs.push(format!("material.kind: {e}")),
                },
                ("material", "lambda") => c.lambda = num(&mut errs).unwrap_or(c.lambda),
                ("material", "mu") => c.mu = num(&mut errs).unwrap_or(c.mu),
                ("bc", "phi") => match Preset::parse(value) {
                    Ok(p) => c.phi = PhiSpec::Preset(p),
                    Err(e) => errs.push(format!("bc.phi: {e}")),
                },
                ("bc", "coefficients") => {
                    match list(value).map(|t| t.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
                        Ok(v) => c.phi = PhiSpec::Coefficients(v),
                        Err(_) => errs.push(at("expected numbers, got")),
                    }
                }
                ("sweep", "eps") => {
                    match list(value).map(|t| t.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
                        Ok(v) => {
                            c.eps_grid = v;
                            explicit_grid = true;
                        }
                        Err(_) => errs.push(at("expected numbers, got")),
                    }
                }
                ("sweep", "eps_start") => grid_keys.0 = num(&mut errs),
                ("sweep", "eps_stop") => grid_keys.1 = num(&mut errs),
                ("sweep", "points_per_decade") => grid_keys.2 = count(&mut errs),
                ("sweep", "c_grade") => c.grading.c_grade = num(&mut errs).unwrap_or(c.grading.c_grade),
                ("sweep", "h_far") => c.grading.h_far = num(&mut errs).unwrap_or(c.grading.h_far),
                ("sweep", "cusp_cutoff") => c.grading.cusp_cutoff = num(&mut errs).unwrap_or(c.grading.cusp_cutoff),
                ("sweep", "max_cells") => c.grading.max_cells = count(&mut errs).unwrap_or(c.grading.max_cells),
                ("sweep", "degree") => c.degree = count(&mut errs).unwrap_or(c.degree),
                ("sweep", "segment_samples") => c.segment_samples = count(&mut errs).unwrap_or(c.segment_samples),
                ("output", "dir") => c.output_dir = value.trim().to_string(),
                ("output", "formats") => {
                    match list(value).map(OutputFormat::parse).collect::<Result<Vec<_>>>() {
                        Ok(v) => c.formats = v,
                        Err(e) => errs.push(format!("output.formats: {e}")),
                    }
                }
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if section == "bc" && seen.contains(&"phi") && seen.contains(&"coefficients") {
            errs.push("bc: give either phi or coefficients, not both".into());
        }
    }

    // Defaults that follow the family.
    if family_set && !kind_set && c.geometry.family == Family::TwoSpheresAxisym {
        c.kind = ProblemKind::AxisymConductivity;
    }
    if kind_set && !family_set && c.kind == ProblemKind::AxisymConductivity {
        c.geometry.family = Family::TwoSpheresAxisym;
    }
    match grid_keys {
        (None, None, None) => {
            if !explicit_grid {
                c.eps_grid = default_grid(c.geometry.family);
            }
        }
        _ if explicit_grid => errs.push("sweep: give either eps or eps_start/eps_stop, not both".into()),
        (start, stop, per) => {
            let start = start.unwrap_or(1e-1);
            let stop = stop.unwrap_or(default_grid(c.geometry.family).last().copied().unwrap_or(1e-5));
            let per = per.unwrap_or(2);
            if start > 0.0 && stop > 0.0 && stop < start && per > 0 {
                c.eps_grid = geometric_grid(start, stop, per);
            } else {
                errs.push("sweep: need 0 < eps_stop < eps_start and points_per_decade > 0".into());
            }
        }
    }
    if errs.is_empty() {
        errs = c.violations();
    } else {
        errs.extend(c.violations());
    }
    if errs.is_empty() {
        Ok(c)
    } else {
        Err(Error::Config(errs))
    }
}

/// INI text with every key written; `parse_config` reads it back equal.
pub fn serialize_config(c: &RunConfig) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(", ");
    let bc = match &c.phi {
        PhiSpec::Preset(p) => format!("phi = {}", p.name()),
        PhiSpec::Coefficients(v) => format!("coefficients = {}", join(v)),
    };
    let g = &c.geometry;
    format!(
        "[geometry]\nfamily = {}\nouter_radius = {}\ninclusion_size = {}\nkappa1 = {}\n\n\
         [material]\nkind = {}\nlambda = {}\nmu = {}\n\n\
         [bc]\n{bc}\n\n\
         [sweep]\neps = {}\nc_grade = {}\nh_far = {}\ncusp_cutoff = {}\nmax_cells = {}\ndegree = {}\nsegment_samples = {}\n\n\
         [output]\ndir = {}\nformats = {}\n",
        g.family.name(),
        format_f64(g.outer_radius),
        format_f64(g.inclusion_size),
        format_f64(g.kappa1),
        c.kind.name().to_ascii_lowercase(),
        format_f64(c.lambda),
        format_f64(c.mu),
        join(&c.eps_grid),
        format_f64(c.grading.c_grade),
        format_f64(c.grading.h_far),
        format_f64(c.grading.cusp_cutoff),
        c.grading.max_cells,
        c.degree,
        c.segment_samples,
        c.output_dir,
        c.formats.iter().map(|f| f.name()).collect::<Vec<_>>().join(", "),
    )
}
