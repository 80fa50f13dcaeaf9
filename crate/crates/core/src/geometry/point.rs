use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the charge-centred frame. `z < 0` is the empty-space side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// `(r, theta, phi)` with `theta` measured from +z and `phi` from +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spherical {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

/// `(rho, phi, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylindrical {
    pub rho: f64,
    pub phi: f64,
    pub z: f64,
}

impl LocalPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_spherical(r: f64, theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::new(r * st * cp, r * st * sp, r * ct)
    }

    pub fn from_cylindrical(rho: f64, phi: f64, z: f64) -> Self {
        let (sp, cp) = phi.sin_cos();
        Self::new(rho * cp, rho * sp, z)
    }

    pub fn r(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn rho(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// `r - z` without cancellation on either side of the plane.
    pub fn r_minus_z(&self) -> f64 {
        let r = self.r();
        if self.z <= 0.0 {
            r - self.z
        } else {
            let rho2 = self.x * self.x + self.y * self.y;
            rho2 / (r + self.z)
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn offset(&self, dx: f64, dy: f64, dz: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    /// Empty-space side including the boundary plane.
    pub fn in_domain(&self) -> bool {
        self.z <= 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_spherical(&self) -> Result<Spherical> {
        let r = self.r();
        if r == 0.0 {
            return Err(Error::OriginUndefinedAngle);
        }
        Ok(Spherical {
            r,
            theta: self.rho().atan2(self.z),
            phi: self.y.atan2(self.x),
        })
    }

    pub fn to_cylindrical(&self) -> Result<Cylindrical> {
        if self.r() == 0.0 {
            return Err(Error::OriginUndefinedAngle);
        }
        Ok(Cylindrical {
            rho: self.rho(),
            phi: self.y.atan2(self.x),
            z: self.z,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn spherical_examples() {
        let s = LocalPoint::new(0.0, 0.0, -1.0).to_spherical().unwrap();
        assert_eq!((s.r, s.theta), (1.0, PI));
        let s = LocalPoint::new(1.0, 0.0, 0.0).to_spherical().unwrap();
        assert_eq!((s.r, s.theta, s.phi), (1.0, PI / 2.0, 0.0));
        let s = LocalPoint::new(1.0, 1.0, -2f64.sqrt()).to_spherical().unwrap();
        assert!((s.r - 2.0).abs() < 1e-15);
        assert!((s.theta - 0.75 * PI).abs() < 1e-15);
        assert!((s.phi - 0.25 * PI).abs() < 1e-15);
    }

    #[test]
    fn origin_angles_are_flagged() {
        let o = LocalPoint::new(0.0, 0.0, 0.0);
        assert_eq!(o.to_spherical(), Err(Error::OriginUndefinedAngle));
        assert_eq!(o.to_cylindrical(), Err(Error::OriginUndefinedAngle));
    }

    #[test]
    fn cylindrical_components() {
        let c = LocalPoint::new(3.0, 4.0, -1.0).to_cylindrical().unwrap();
        assert_eq!(c.rho, 5.0);
        assert_eq!(c.z, -1.0);
        assert!((c.phi - (4f64).atan2(3.0)).abs() < 1e-16);
    }

    #[test]
    fn r_minus_z_is_stable_above_the_plane() {
        let p = LocalPoint::new(1e-9, 0.0, 1.0);
        let exact = 1e-18 / (1.0 + (1.0 + 1e-18f64).sqrt());
        assert!((p.r_minus_z() - exact).abs() < 1e-30);
    }

    #[test]
    fn domain_membership() {
        assert!(LocalPoint::new(1.0, 0.0, -1.0).in_domain());
        assert!(LocalPoint::new(1.0, 0.0, 0.0).in_domain());
        assert!(!LocalPoint::new(1.0, 0.0, 1e-12).in_domain());
    }

    proptest! {
        #[test]
        fn spherical_round_trip(x in -10.0..10.0f64, y in -10.0..10.0f64, z in -10.0..10.0f64) {
            let p = LocalPoint::new(x, y, z);
            prop_assume!(p.r() > 1e-6);
            let s = p.to_spherical().unwrap();
            let q = LocalPoint::from_spherical(s.r, s.theta, s.phi);
            let err = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
            prop_assert!(err <= 1e-12 * p.r(), "err {}", err);
            prop_assert!((0.0..=PI).contains(&s.theta));
        }
    }
}
