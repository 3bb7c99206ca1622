//! Outer boundary data `φ`: named presets or quadratic polynomial
//! coefficients over the basis `[1, x1, x2, x1², x1 x2, x2²]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ProblemKind;
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    Zero,
    X1,
    X2,
    ZAxis,
    Psi1,
    Psi2,
    Psi3,
}

impl Preset {
    pub const ALL: [Preset; 7] =
        [Preset::Zero, Preset::X1, Preset::X2, Preset::ZAxis, Preset::Psi1, Preset::Psi2, Preset::Psi3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Zero => "ZERO",
            Preset::X1 => "X1",
            Preset::X2 => "X2",
            Preset::ZAxis => "Z_AXIS",
            Preset::Psi1 => "PSI1",
            Preset::Psi2 => "PSI2",
            Preset::Psi3 => "PSI3",
        }
    }

    pub fn parse(s: &str) -> Result<Preset> {
        let u = s.trim().to_ascii_uppercase();
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == u)
            .ok_or_else(|| Error::Parameter(format!("unknown φ preset '{}'", s.trim())))
    }
}

/// How `φ` was specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhiSpec {
    Preset(Preset),
    /// 6 values (scalar) or 12 values, component-major (vector).
    Coefficients(Vec<f64>),
}

/// Polynomial boundary data for a 1- or 2-component problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phi {
    pub spec: PhiSpec,
    pub components: usize,
    /// `poly[k]` holds the coefficients of component `k`.
    pub poly: [[f64; 6]; 2],
}

const X1: usize = 1;
const X2: usize = 2;

impl Phi {
    pub fn new(spec: PhiSpec, kind: ProblemKind) -> Result<Phi> {
        let components = kind.components();
        let mut poly = [[0.0; 6]; 2];
        match &spec {
            PhiSpec::Preset(p) => match (p, components) {
                (Preset::Zero, _) => {}
                (Preset::X1, _) => poly[0][X1] = 1.0,
                (Preset::X2, 1) | (Preset::ZAxis, 1) => poly[0][X2] = 1.0,
                (Preset::X2, _) => poly[1][X2] = 1.0,
                (Preset::Psi1, 2) => poly[0][0] = 1.0,
                (Preset::Psi2, 2) => poly[1][0] = 1.0,
                (Preset::Psi3, 2) => {
                    poly[0][X2] = -1.0;
                    poly[1][X1] = 1.0;
                }
                (p, _) => {
                    return Err(Error::Parameter(format!(
                        "φ preset {} is not defined for {}",
                        p.name(),
                        kind.name()
                    )))
                }
            },
            PhiSpec::Coefficients(c) => {
                if c.len() != 6 * components {
                    return Err(Error::Parameter(format!(
                        "{} needs {} φ coefficients, got {}",
                        kind.name(),
                        6 * components,
                        c.len()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter("non-finite φ coefficient".into()));
                }
                for (i, v) in c.iter().enumerate() {
                    poly[i / 6][i % 6] = *v;
                }
            }
        }
        Ok(Phi { spec, components, poly })
    }

    pub fn preset(p: Preset, kind: ProblemKind) -> Result<Phi> {
        Phi::new(PhiSpec::Preset(p), kind)
    }

    fn from_poly(poly: [[f64; 6]; 2], components: usize) -> Phi {
        let coeffs = poly[..components].iter().flatten().copied().collect();
        Phi { spec: PhiSpec::Coefficients(coeffs), components, poly }
    }

    pub fn eval(&self, p: Point) -> [f64; 2] {
        let basis = [1.0, p[0], p[1], p[0] * p[0], p[0] * p[1], p[1] * p[1]];
        let mut out = [0.0; 2];
        for k in 0..self.components {
            out[k] = self.poly[k].iter().zip(basis).map(|(c, b)| c * b).sum();
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Phi {
        let mut poly = self.poly;
        poly.iter_mut().flatten().for_each(|v| *v *= c);
        Phi::from_poly(poly, self.components)
    }

    pub fn plus(&self, other: &Phi) -> Result<Phi> {
        if self.components != other.components {
            return Err(Error::Parameter("cannot add φ of different component counts".into()));
        }
        let mut poly = self.poly;
        for k in 0..2 {
            for i in 0..6 {
                poly[k][i] += other.poly[k][i];
            }
        }
        Ok(Phi::from_poly(poly, self.components))
    }

    pub fn is_zero(&self) -> bool {
        self.poly.iter().flatten().all(|v| *v == 0.0)
    }

    /// `max |φ|` on the circle of the given radius about the origin.
    pub fn max_on_circle(&self, radius: f64) -> f64 {
        (0..720)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 720.0;
                let v = self.eval([radius * t.cos(), radius * t.sin()]);
                v[0].hypot(v[1])
            })
            .fold(0.0, f64::max)
    }

    /// Short identifier used in records and file names.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.spec {
            PhiSpec::Preset(p) => write!(f, "{}", p.name()),
            PhiSpec::Coefficients(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "[{}]", parts.join(" "))
            }
        }
    }
}
