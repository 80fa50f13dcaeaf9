//! Resolved run configuration. Everything the CLI accepts is validated here
//! before any computation starts.

use std::f64::consts::PI;
use std::path::PathBuf;

use fluxon::expansion::Charge;
use fluxon::geometry::{build_local_frame, BuiltinSurface, NormalOrientation};
use fluxon::halfspace::QuadratureSpec;
use fluxon::verification::{curvature_radius, GridSpec, Suite};
use fluxon::{flux_quantum_si, ExpansionParams, LocalPoint};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// How the flux quantum is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Phi0Mode {
    Dimensionless { phi0: f64 },
    /// `h/(2e)` in webers.
    Si,
}

impl Phi0Mode {
    pub fn value(&self) -> f64 {
        match self {
            Phi0Mode::Dimensionless { phi0 } => *phi0,
            Phi0Mode::Si => flux_quantum_si(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Gaussian,
    Tophat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum CommandConfig {
    Eval {
        points: Vec<LocalPoint>,
    },
    Field {
        points: Vec<LocalPoint>,
    },
    Check {
        suite: Suite,
    },
    SphereCompare {
        r_min: f64,
        r_max: f64,
        n: usize,
        theta: f64,
        phi: f64,
        curvature: Option<f64>,
    },
    Smear {
        width: f64,
        profile: ProfileKind,
        points: Vec<LocalPoint>,
        cutoff_fit: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let spec = QuadratureSpec::default();
        Self { rel_tol: spec.rel_tol, abs_tol: spec.abs_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandConfig,
    pub surface: BuiltinSurface,
    pub nu: i32,
    pub phi0: Phi0Mode,
    /// Gauge length; `None` means `2a` on a sphere and 1 elsewhere.
    pub d: Option<f64>,
    /// Verification grid; `None` means the standard grid scaled to the
    /// curvature radius.
    pub grid: Option<GridSpec>,
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Parameters derived from a validated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub params: ExpansionParams,
    pub grid: GridSpec,
    pub spec: QuadratureSpec,
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be a positive number, got {v}"))
    }
}

fn check_points(points: &[LocalPoint], allow_origin: bool) -> Result<(), String> {
    if points.is_empty() {
        return Err("at least one --point is required".into());
    }
    for p in points {
        if !p.is_finite() {
            return Err(format!("point ({}, {}, {}) is not finite", p.x, p.y, p.z));
        }
        if p.z > 0.0 {
            return Err(format!("point ({}, {}, {}) lies in the bulk; the domain is z <= 0", p.x, p.y, p.z));
        }
        if !allow_origin && p.r() == 0.0 {
            return Err("the charge itself (0,0,0) cannot be evaluated".into());
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        Charge::new(self.nu, self.phi0.value()).map_err(|e| e.to_string())?;
        if let Some(d) = self.d {
            positive("--d", d)?;
        }
        let spec = self.quadrature_spec();
        spec.validate().map_err(|e| e.to_string())?;
        if let Some(grid) = &self.grid {
            grid.validate().map_err(|e| e.to_string())?;
        }
        match &self.command {
            CommandConfig::Eval { points } | CommandConfig::Field { points } => check_points(points, false)?,
            CommandConfig::Check { .. } => {}
            CommandConfig::SphereCompare { r_min, r_max, n, theta, .. } => {
                if self.surface.sphere_radius().is_none() {
                    return Err("sphere-compare needs a sphere surface, e.g. --surface sphere:a=1".into());
                }
                positive("--r-min", *r_min)?;
                if !(r_max > r_min && r_max.is_finite()) {
                    return Err(format!("--r-max must exceed --r-min, got {r_max}"));
                }
                if *n < 2 {
                    return Err("--n must be at least 2".into());
                }
                if !(*theta > 0.5 * PI && *theta <= PI) {
                    return Err(format!("--theta must lie in (pi/2, pi], got {theta}"));
                }
            }
            CommandConfig::Smear { width, points, cutoff_fit, .. } => {
                positive("--width", *width)?;
                if !cutoff_fit {
                    check_points(points, true)?;
                }
            }
        }
        Ok(())
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec { rel_tol: self.tolerances.rel_tol, abs_tol: self.tolerances.abs_tol, ..Default::default() }
    }

    /// Builds the local frame of the surface at the charge and the
    /// expansion parameters.
    pub fn resolve(&self) -> Result<Resolved, String> {
        self.validate()?;
        let patch = self.surface.patch();
        let frame = build_local_frame(patch.as_ref(), self.surface.charge_parameters(), NormalOrientation::IntoBulk)
            .map_err(|e| format!("surface {}: {e}", self.surface))?;
        let charge = Charge::new(self.nu, self.phi0.value()).map_err(|e| e.to_string())?;
        let d = self.d.unwrap_or_else(|| self.surface.sphere_radius().map_or(1.0, |a| 2.0 * a));
        let params = ExpansionParams::new(charge, frame.k_x, frame.k_y, d).map_err(|e| e.to_string())?;
        let grid = self.grid.unwrap_or_else(|| GridSpec::standard(curvature_radius(&params)));
        Ok(Resolved { params, grid, spec: self.quadrature_spec() })
    }
}
