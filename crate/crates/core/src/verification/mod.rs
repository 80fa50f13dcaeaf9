//! Numerical verifiers: finite-difference harmonicity and gradients, flux
//! recovery, boundary-datum residuals and the finite-size smearing model.

mod checks;
mod smear;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checks::{
    check_boundary, check_field, check_flux, check_hankel, check_harmonicity, check_rhs, curvature_radius,
    hankel_grid, Suite, VerificationReport,
};
pub use smear::{log_cutoff_fit, smeared_potential, LogCutoffFit, Profile, SmearDensity, SmearResult};

use crate::error::{Error, Result};
use crate::expansion::{grad_psi0, grad_psi1r, grad_psi1s, psi0, psi1r, psi1s, ExpansionParams};
use crate::fit::loglog_slope;
use crate::geometry::LocalPoint;
use crate::quadrature::{pairwise_sum, GaussLegendre};

/// Spherical sampling grid in the local frame: log-spaced radii, polar
/// angles in `(π/2, π]` and equally spaced azimuths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl GridSpec {
    /// Radii `1e-2 L ..= L`, polar angles `0.6π ..= 0.98π`, 8 azimuths.
    pub fn standard(length: f64) -> Self {
        Self {
            r_min: 1e-2 * length,
            r_max: length,
            n_r: 5,
            theta_min: 0.6 * PI,
            theta_max: 0.98 * PI,
            n_theta: 5,
            n_phi: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max >= self.r_min && self.r_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid radii [{}, {}]", self.r_min, self.r_max)));
        }
        if !(self.theta_min > 0.5 * PI && self.theta_max >= self.theta_min && self.theta_max <= PI) {
            return Err(Error::InvalidParameter(format!(
                "polar angles must lie in (pi/2, pi], got [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        if self.n_r == 0 || self.n_theta == 0 || self.n_phi == 0 {
            return Err(Error::InvalidParameter("grid counts must be positive".into()));
        }
        Ok(())
    }

    fn spaced(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                if log {
                    lo * (hi / lo).powf(s)
                } else {
                    lo + (hi - lo) * s
                }
            })
            .collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        Self::spaced(self.r_min, self.r_max, self.n_r, true)
    }

    /// Grid points in a fixed order (radius, then θ, then φ).
    pub fn points(&self) -> Result<Vec<LocalPoint>> {
        self.validate()?;
        let thetas = Self::spaced(self.theta_min, self.theta_max, self.n_theta, false);
        let mut out = Vec::with_capacity(self.n_r * self.n_theta * self.n_phi);
        for r in self.radii() {
            for &theta in &thetas {
                for j in 0..self.n_phi {
                    let phi = 2.0 * PI * (j as f64 + 0.25) / self.n_phi as f64;
                    out.push(LocalPoint::from_spherical(r, theta, phi));
                }
            }
        }
        Ok(out)
    }
}

fn check_stencil(point: &LocalPoint, reach: f64) -> Result<()> {
    if !(reach > 0.0 && reach.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {reach}")));
    }
    if point.z + reach >= 0.0 {
        return Err(Error::StencilLeavesDomain { z: point.z, h: reach });
    }
    Ok(())
}

/// Second-order 7-point Laplacian.
pub fn fd_laplacian<F>(f: &F, point: &LocalPoint, h: f64) -> Result<f64>
where
    F: Fn(&LocalPoint) -> Result<f64> + ?Sized,
{
    check_stencil(point, h)?;
    let c = f(point)?;
    let mut neighbours = [0.0; 6];
    let offsets = [(h, 0.0, 0.0), (-h, 0.0, 0.0), (0.0, h, 0.0), (0.0, -h, 0.0), (0.0, 0.0, h), (0.0, 0.0, -h)];
    for (v, (dx, dy, dz)) in neighbours.iter_mut().zip(offsets) {
        *v = f(&point.offset(dx, dy, dz))?;
    }
    // pair opposite neighbours before subtracting the centre
    let pairs = (neighbours[0] + neighbours[1]) + (neighbours[2] + neighbours[3]) + (neighbours[4] + neighbours[5]);
    Ok((pairs - 6.0 * c) / (h * h))
}

/// Fourth-order central-difference gradient.
pub fn fd_gradient<F>(f: &F, point: &LocalPoint, h: f64) -> Result<[f64; 3]>
where
    F: Fn(&LocalPoint) -> Result<f64> + ?Sized,
{
    check_stencil(point, 2.0 * h)?;
    let mut g = [0.0; 3];
    for (axis, out) in g.iter_mut().enumerate() {
        let at = |s: f64| {
            let mut d = [0.0; 3];
            d[axis] = s;
            f(&point.offset(d[0], d[1], d[2]))
        };
        *out = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
    }
    Ok(g)
}

/// `max(1e-4 r, 1e-8 scale)`.
pub fn default_gradient_step(point: &LocalPoint, scale: f64) -> f64 {
    (1e-4 * point.r()).max(1e-8 * scale)
}

/// `r ε^{1/4}`.
pub fn default_laplacian_step(point: &LocalPoint) -> f64 {
    point.r() * f64::EPSILON.powf(0.25)
}

/// Which singular term an evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Psi0,
    Psi1s,
    Psi1r,
}

impl Term {
    pub const ALL: [Term; 3] = [Term::Psi0, Term::Psi1s, Term::Psi1r];

    pub fn name(&self) -> &'static str {
        match self {
            Term::Psi0 => "psi0",
            Term::Psi1s => "psi1s",
            Term::Psi1r => "psi1r",
        }
    }

    pub fn value(&self, point: &LocalPoint, params: &ExpansionParams) -> Result<f64> {
        match self {
            Term::Psi0 => psi0(point, &params.charge),
            Term::Psi1s => psi1s(point, params),
            Term::Psi1r => psi1r(point, params),
        }
    }

    pub fn gradient(&self, point: &LocalPoint, params: &ExpansionParams) -> Result<[f64; 3]> {
        match self {
            Term::Psi0 => grad_psi0(point, &params.charge),
            Term::Psi1s => grad_psi1s(point, params),
            Term::Psi1r => grad_psi1r(point, params),
        }
    }

    /// Magnitude used to make residuals dimensionless: `ψ0 r^{-2}`,
    /// `|K_+| r^{-2}` or `|K_-| r^{-2}`. Zero when the term vanishes.
    pub fn laplacian_scale(&self, point: &LocalPoint, params: &ExpansionParams) -> f64 {
        let r = point.r();
        let s = match self {
            Term::Psi0 => params.charge.flux().abs() / (2.0 * PI * r),
            Term::Psi1s => params.k_plus.abs(),
            Term::Psi1r => params.k_minus.abs(),
        };
        s / (r * r)
    }
}

/// Scaled Laplacian residual `|Δ_h ψ| / scale` for one term.
pub fn scaled_laplacian(term: Term, params: &ExpansionParams, point: &LocalPoint, h: f64) -> Result<f64> {
    let scale = term.laplacian_scale(point, params);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let f = |p: &LocalPoint| term.value(p, params);
    Ok(fd_laplacian(&f, point, h)?.abs() / scale)
}

/// Largest scaled Laplacian residual over `points` with `h = ratio * r`,
/// and the index of the worst point.
pub fn max_scaled_laplacian(
    term: Term,
    params: &ExpansionParams,
    points: &[LocalPoint],
    ratio: Option<f64>,
) -> Result<(f64, usize)> {
    let residuals: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let h = ratio.map_or_else(|| default_laplacian_step(p), |q| q * p.r());
            scaled_laplacian(term, params, p, h)
        })
        .collect::<Result<_>>()?;
    Ok(argmax(&residuals))
}

pub(crate) fn argmax(values: &[f64]) -> (f64, usize) {
    values
        .iter()
        .enumerate()
        .fold((0.0, 0), |(m, k), (i, &v)| if v > m { (v, i) } else { (m, k) })
}

/// Step ratios `h/r` used for Laplacian order fits.
pub const LAPLACIAN_RATIOS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

/// Observed order of the grid-max scaled Laplacian residual under halving
/// of `h/r`. `None` when the term vanishes identically.
pub fn laplacian_order(term: Term, params: &ExpansionParams, points: &[LocalPoint]) -> Result<Option<f64>> {
    let mut maxima = Vec::with_capacity(LAPLACIAN_RATIOS.len());
    for q in LAPLACIAN_RATIOS {
        maxima.push(max_scaled_laplacian(term, params, points, Some(q))?.0);
    }
    if maxima.iter().all(|&m| m == 0.0) {
        return Ok(None);
    }
    Ok(Some(loglog_slope(&LAPLACIAN_RATIOS, &maxima)))
}

/// Outward flux `∫ B·r̂ dA` over the half-sphere of radius `epsilon` in
/// `z <= 0`. `field` returns Cartesian components.
///
/// Gauss–Legendre in θ and the trapezoid rule in φ, each compared against a
/// rule of twice the size.
pub fn flux_through_hemisphere<F>(field: &F, epsilon: f64) -> Result<f64>
where
    F: Fn(&LocalPoint) -> Result<[f64; 3]> + Sync + ?Sized,
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let coarse = hemisphere_rule(field, epsilon, 24, 32)?;
    let fine = hemisphere_rule(field, epsilon, 48, 64)?;
    let error = (fine - coarse).abs();
    if error > 1e-11 * fine.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::QuadratureNonConvergence { estimate: fine, error, subdivisions: 1 });
    }
    Ok(fine)
}

fn hemisphere_rule<F>(field: &F, epsilon: f64, n_theta: usize, n_phi: usize) -> Result<f64>
where
    F: Fn(&LocalPoint) -> Result<[f64; 3]> + Sync + ?Sized,
{
    let rule = GaussLegendre::new(n_theta);
    let nodes: Vec<(f64, f64)> = rule.mapped(0.5 * PI, PI).collect();
    let rows: Vec<f64> = nodes
        .par_iter()
        .map(|&(theta, w)| {
            let mut ring = Vec::with_capacity(n_phi);
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                let p = LocalPoint::from_spherical(epsilon, theta, phi);
                let b = field(&p)?;
                ring.push((b[0] * p.x + b[1] * p.y + b[2] * p.z) / epsilon);
            }
            Ok(w * theta.sin() * pairwise_sum(&ring) * 2.0 * PI / n_phi as f64)
        })
        .collect::<Result<_>>()?;
    Ok(epsilon * epsilon * pairwise_sum(&rows))
}

/// The two half-space problems the first-order correction splits into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTerm {
    /// `ψ1s` with datum `-K_+/ρ`.
    Psi1s,
    /// `ψ1r` with datum `-K_- cos 2φ / ρ`.
    Psi1r,
}

impl SplitTerm {
    pub fn name(&self) -> &'static str {
        match self {
            SplitTerm::Psi1s => "psi1s",
            SplitTerm::Psi1r => "psi1r",
        }
    }

    pub fn datum(&self, params: &ExpansionParams, rho: f64, phi: f64) -> f64 {
        match self {
            SplitTerm::Psi1s => -params.k_plus / rho,
            SplitTerm::Psi1r => -params.k_minus * (2.0 * phi).cos() / rho,
        }
    }
}

/// `∂ψ/∂z` at depth `delta` below `(ρ, φ)` minus the boundary datum, from
/// the analytic gradient.
pub fn boundary_residual(term: SplitTerm, params: &ExpansionParams, rho: f64, phi: f64, delta: f64) -> Result<f64> {
    if !(rho > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("need rho > 0 and delta > 0, got {rho}, {delta}")));
    }
    let point = LocalPoint::from_cylindrical(rho, phi, -delta);
    let dz = match term {
        SplitTerm::Psi1s => grad_psi1s(&point, params)?[2],
        SplitTerm::Psi1r => grad_psi1r(&point, params)?[2],
    };
    Ok(dz - term.datum(params, rho, phi))
}

/// Approach depths `δ/ρ` used for boundary order fits.
pub const BOUNDARY_RATIOS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

/// Observed order of `|boundary_residual|` in `δ` at fixed `(ρ, φ)`.
/// `None` when the residual vanishes identically.
pub fn boundary_order(term: SplitTerm, params: &ExpansionParams, rho: f64, phi: f64) -> Result<Option<f64>> {
    let deltas: Vec<f64> = BOUNDARY_RATIOS.iter().map(|q| q * rho).collect();
    let residuals: Vec<f64> = deltas
        .iter()
        .map(|&d| boundary_residual(term, params, rho, phi, d).map(f64::abs))
        .collect::<Result<_>>()?;
    if residuals.iter().all(|&r| r == 0.0) {
        return Ok(None);
    }
    Ok(Some(loglog_slope(&deltas, &residuals)))
}
