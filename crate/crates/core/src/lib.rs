//! Singular part of the magnetostatic potential and field near a point
//! fluxon sitting on a curved superconductor boundary.
//!
//! The library is organised around the local expansion
//!
//! ```text
//! psi = nu*Phi0/(2 pi) * [ 1/r + (kx+ky)/4 * ln((r-z)/d) - (kx-ky)/8 * (x^2-y^2)/(r-z)^2 ] + regular
//! ```
//!
//! written in a charge-centred frame whose `z` axis is the boundary normal
//! pointing into the bulk and whose tangent axes are the principal directions.
//!
//! * [`geometry`] builds that frame and the principal curvatures from a
//!   parametric surface patch.
//! * [`expansion`] evaluates the three singular terms and the field.
//! * [`halfspace`] re-derives the first-order boundary datum and the
//!   asymmetric term through an independent Hankel-integral route.
//! * [`sphere_oracle`] provides the exact exterior-sphere solution.
//! * [`verification`] holds the finite-difference, flux and smearing checks.

pub mod error;
pub mod expansion;
pub mod fit;
pub mod geometry;
pub mod halfspace;
pub mod quadrature;
pub mod sphere_oracle;
pub mod verification;

pub use error::{Error, Result};
pub use expansion::{Charge, ExpansionParams, FieldVector, PotentialBreakdown};
pub use geometry::{LocalFrame, LocalPoint, SurfacePatch};

/// Planck constant, exact SI value [J s].
pub const PLANCK_SI: f64 = 6.626_070_15e-34;
/// Elementary charge, exact SI value [C].
pub const ELEMENTARY_CHARGE_SI: f64 = 1.602_176_634e-19;

/// Magnetic flux quantum h/(2e) in webers.
pub fn flux_quantum_si() -> f64 {
    PLANCK_SI / (2.0 * ELEMENTARY_CHARGE_SI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn si_flux_quantum() {
        let phi0 = flux_quantum_si();
        assert!((phi0 - 2.067_833_848e-15).abs() < 1e-24, "{phi0}");
    }
}
