//! Closed-form singular terms of the potential near a surface charge and the
//! corresponding singular field.
//!
//! All functions take points in the charge-centred [`LocalFrame`] with the
//! empty-space domain at `z < 0`. `psi1s` and `psi1r` are singular on the
//! semi-axis `{x = y = 0, z >= 0}`, which lies outside the domain.
//!
//! [`LocalFrame`]: crate::geometry::LocalFrame

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LocalPoint;

/// Guard cone half-angle around the singular semi-axis, radians.
pub const THETA_MIN: f64 = 1e-6;

/// `1 - cos(THETA_MIN)`: below this `(r - z)/r` is treated as on-axis.
pub fn on_axis_tolerance() -> f64 {
    2.0 * (0.5 * THETA_MIN).sin().powi(2)
}

/// A fluxon: sign of the crossing and the flux quantum it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    nu: i8,
    phi0: f64,
}

impl Charge {
    /// `nu` must be +1 (field line enters the domain) or -1 (exits).
    pub fn new(nu: i32, phi0: f64) -> Result<Self> {
        if nu != 1 && nu != -1 {
            return Err(Error::InvalidParameter(format!("nu must be +1 or -1, got {nu}")));
        }
        if !(phi0 > 0.0 && phi0.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi0 must be positive, got {phi0}")));
        }
        Ok(Self { nu: nu as i8, phi0 })
    }

    /// Unit-flux charge used throughout the tests.
    pub fn unit() -> Self {
        Self { nu: 1, phi0: 1.0 }
    }

    pub fn nu(&self) -> i32 {
        self.nu as i32
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// Signed flux `nu * phi0`.
    pub fn flux(&self) -> f64 {
        self.nu as f64 * self.phi0
    }
}

/// Net flux of a set of charges.
pub fn net_flux(charges: &[Charge]) -> f64 {
    charges.iter().map(Charge::flux).sum()
}

/// Solvability of the Neumann problem in a bounded domain: the charges must
/// cancel. Unbounded domains do not need it.
pub fn bounded_domain_solvable(charges: &[Charge]) -> bool {
    let scale: f64 = charges.iter().map(|c| c.phi0).sum();
    net_flux(charges).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
}

/// Curvatures, gauge length and the derived constants `K_+-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    pub charge: Charge,
    pub k_x: f64,
    pub k_y: f64,
    pub d: f64,
    pub k_plus: f64,
    pub k_minus: f64,
}

impl ExpansionParams {
    pub fn new(charge: Charge, k_x: f64, k_y: f64, d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("gauge length d must be positive, got {d}")));
        }
        if !(k_x.is_finite() && k_y.is_finite()) {
            return Err(Error::InvalidParameter("curvatures must be finite".into()));
        }
        let (k_plus, k_minus) = Self::constants(&charge, k_x, k_y);
        Ok(Self { charge, k_x, k_y, d, k_plus, k_minus })
    }

    /// Sphere of radius `a`: `k_x = k_y = 1/a` and the gauge `d = 2a`.
    pub fn sphere(charge: Charge, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("sphere radius must be positive, got {a}")));
        }
        Self::new(charge, 1.0 / a, 1.0 / a, 2.0 * a)
    }

    fn constants(charge: &Charge, k_x: f64, k_y: f64) -> (f64, f64) {
        let f = charge.flux();
        (f * (k_x + k_y) / (8.0 * PI), f * (k_x - k_y) / (8.0 * PI))
    }

    /// Stored `K_+-` equal a fresh recomputation bit for bit.
    pub fn is_consistent(&self) -> bool {
        let (kp, km) = Self::constants(&self.charge, self.k_x, self.k_y);
        kp.to_bits() == self.k_plus.to_bits() && km.to_bits() == self.k_minus.to_bits()
    }

    pub fn with_gauge(&self, d: f64) -> Result<Self> {
        Self::new(self.charge, self.k_x, self.k_y, d)
    }

    /// Principal directions relabelled: `k_x <-> k_y`.
    pub fn swapped(&self) -> Self {
        Self::new(self.charge, self.k_y, self.k_x, self.d).expect("swapping keeps parameters valid")
    }
}

/// The singular terms at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialBreakdown {
    pub psi0: f64,
    pub psi1s: f64,
    pub psi1r: f64,
    pub total: f64,
}

impl PotentialBreakdown {
    pub fn from_parts(psi0: f64, psi1s: f64, psi1r: f64) -> Self {
        Self { psi0, psi1s, psi1r, total: psi0 + psi1s + psi1r }
    }
}

/// Field components in the local spherical basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldVector {
    pub b_r: f64,
    pub b_theta: f64,
    pub b_phi: f64,
}

impl FieldVector {
    pub fn magnitude(&self) -> f64 {
        (self.b_r * self.b_r + self.b_theta * self.b_theta + self.b_phi * self.b_phi).sqrt()
    }

    /// Cartesian components at the point where the basis is attached.
    pub fn to_cartesian(&self, theta: f64, phi: f64) -> [f64; 3] {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let r_hat = [st * cp, st * sp, ct];
        let t_hat = [ct * cp, ct * sp, -st];
        let p_hat = [-sp, cp, 0.0];
        [0, 1, 2].map(|i| self.b_r * r_hat[i] + self.b_theta * t_hat[i] + self.b_phi * p_hat[i])
    }

    /// Spherical components from a Cartesian vector.
    pub fn from_cartesian(v: [f64; 3], theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            b_r: v[0] * st * cp + v[1] * st * sp + v[2] * ct,
            b_theta: v[0] * ct * cp + v[1] * ct * sp - v[2] * st,
            b_phi: -v[0] * sp + v[1] * cp,
        }
    }
}

fn checked_r(point: &LocalPoint) -> Result<f64> {
    let r = point.r();
    if r == 0.0 {
        return Err(Error::AtCharge);
    }
    Ok(r)
}

fn checked_r_minus_z(point: &LocalPoint) -> Result<(f64, f64)> {
    let r = checked_r(point)?;
    let rmz = point.r_minus_z();
    if rmz <= on_axis_tolerance() * r {
        return Err(Error::OnSingularAxis { r_minus_z: rmz });
    }
    Ok((r, rmz))
}

/// `nu Phi0 / (2 pi r)`.
pub fn psi0(point: &LocalPoint, charge: &Charge) -> Result<f64> {
    let r = checked_r(point)?;
    Ok(charge.flux() / (2.0 * PI * r))
}

/// `K_+ ln((r - z)/d)`.
pub fn psi1s(point: &LocalPoint, params: &ExpansionParams) -> Result<f64> {
    let (_, rmz) = checked_r_minus_z(point)?;
    Ok(params.k_plus * (rmz / params.d).ln())
}

/// `-(K_-/2) (x^2 - y^2)/(r - z)^2`, a function of the angles only.
pub fn psi1r(point: &LocalPoint, params: &ExpansionParams) -> Result<f64> {
    let (_, rmz) = checked_r_minus_z(point)?;
    let ratio_x = point.x / rmz;
    let ratio_y = point.y / rmz;
    Ok(-0.5 * params.k_minus * (ratio_x * ratio_x - ratio_y * ratio_y))
}

/// All three singular terms and their sum.
pub fn psi_singular(point: &LocalPoint, params: &ExpansionParams) -> Result<PotentialBreakdown> {
    Ok(PotentialBreakdown::from_parts(
        psi0(point, &params.charge)?,
        psi1s(point, params)?,
        psi1r(point, params)?,
    ))
}

/// Sphere of radius `a` with its charge: curvatures `1/a` and `d = 2a`.
pub fn sphere_singular_potential(a: f64, point: &LocalPoint, charge: &Charge) -> Result<PotentialBreakdown> {
    psi_singular(point, &ExpansionParams::sphere(*charge, a)?)
}

/// Singular field `B = -grad psi` in the local spherical basis, from the
/// closed-form angular expressions.
pub fn b_field_singular(point: &LocalPoint, params: &ExpansionParams) -> Result<FieldVector> {
    let r = checked_r(point)?;
    let rho = point.rho();
    let rmz = point.r_minus_z();
    let theta = rho.atan2(point.z);
    if theta < THETA_MIN {
        return Err(Error::NearSingularAxis { theta });
    }
    let prefactor = params.charge.flux() / (2.0 * PI);
    // sin(t)/(1 - cos t) = rho/(r - z);  sin(t)/(1 - cos t)^2 = rho r/(r - z)^2
    let half_cot = rho / rmz;
    let asym_angle = rho * r / (rmz * rmz);
    let (cos2, sin2) = if rho > 0.0 {
        let (c, s) = (point.x / rho, point.y / rho);
        (c * c - s * s, 2.0 * s * c)
    } else {
        (1.0, 0.0)
    };
    let sym = (params.k_x + params.k_y) / (4.0 * r);
    let asym = (params.k_x - params.k_y) / (4.0 * r);
    Ok(FieldVector {
        b_r: prefactor * (1.0 / (r * r) - sym),
        b_theta: -prefactor * (sym * half_cot + asym * asym_angle * cos2),
        b_phi: -prefactor * asym * asym_angle * sin2,
    })
}

/// Cartesian gradient of `psi0`.
pub fn grad_psi0(point: &LocalPoint, charge: &Charge) -> Result<[f64; 3]> {
    let r = checked_r(point)?;
    let c = -charge.flux() / (2.0 * PI * r * r * r);
    Ok([c * point.x, c * point.y, c * point.z])
}

/// Cartesian gradient of `psi1s`: `K_+ (x/r, y/r, -1) / (r - z)` with the
/// z-component simplified to `-K_+/r`.
pub fn grad_psi1s(point: &LocalPoint, params: &ExpansionParams) -> Result<[f64; 3]> {
    let (r, rmz) = checked_r_minus_z(point)?;
    let k = params.k_plus;
    Ok([k * point.x / (r * rmz), k * point.y / (r * rmz), -k / r])
}

/// Cartesian gradient of `psi1r`.
pub fn grad_psi1r(point: &LocalPoint, params: &ExpansionParams) -> Result<[f64; 3]> {
    let (r, rmz) = checked_r_minus_z(point)?;
    let (x, y) = (point.x, point.y);
    let g = x * x - y * y;
    let k = -0.5 * params.k_minus;
    let inv2 = 1.0 / (rmz * rmz);
    let inv3 = inv2 / rmz;
    // d(r - z)/dx = x/r, d(r - z)/dz = -(r - z)/r
    Ok([
        k * (2.0 * x * inv2 - 2.0 * g * inv3 * x / r),
        k * (-2.0 * y * inv2 - 2.0 * g * inv3 * y / r),
        k * (2.0 * g * inv2 / r),
    ])
}

/// Sum of the three Cartesian gradients.
pub fn grad_psi_singular(point: &LocalPoint, params: &ExpansionParams) -> Result<[f64; 3]> {
    let a = grad_psi0(point, &params.charge)?;
    let b = grad_psi1s(point, params)?;
    let c = grad_psi1r(point, params)?;
    Ok([0, 1, 2].map(|i| a[i] + b[i] + c[i]))
}
