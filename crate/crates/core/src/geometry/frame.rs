use nalgebra::Matrix2;

use super::patch::{SurfacePatch, Vec3};
use super::point::LocalPoint;
use crate::error::{Error, Result};

/// Which side of the surface the frame's `z` axis points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalOrientation {
    /// `z` along the surface normal, into the superconducting bulk.
    #[default]
    IntoBulk,
}

/// Charge-centred orthonormal frame with the principal curvatures.
///
/// In this frame the boundary reads `z = k_x x^2/2 + k_y y^2/2 + O(rho^3)`,
/// with `k_x >= k_y` and positive curvature when the surface bends towards
/// the bulk (exterior of a sphere of radius `a` gives `k_x = k_y = 1/a`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    pub z_axis: Vec3,
    pub k_x: f64,
    pub k_y: f64,
    /// Angle of `x_axis` from the normalised `P_u` direction, radians.
    pub rotation_angle: f64,
    /// Mixed second derivative of the height function left after rotation.
    pub mixed_term: f64,
    /// Parameter point of the origin.
    pub uv: (f64, f64),
}

impl LocalFrame {
    pub fn to_local(&self, p: &Vec3) -> LocalPoint {
        let d = p - self.origin;
        LocalPoint::new(d.dot(&self.x_axis), d.dot(&self.y_axis), d.dot(&self.z_axis))
    }

    pub fn to_global(&self, p: &LocalPoint) -> Vec3 {
        self.origin + self.x_axis * p.x + self.y_axis * p.y + self.z_axis * p.z
    }

    /// Quadratic height model `f(x, y) = (k_x x^2 + k_y y^2)/2`.
    pub fn quadratic_height(&self, x: f64, y: f64) -> f64 {
        0.5 * (self.k_x * x * x + self.k_y * y * y)
    }

    /// Largest deviation of the axes from a right-handed orthonormal triplet.
    pub fn orthonormality_defect(&self) -> f64 {
        let (x, y, z) = (self.x_axis, self.y_axis, self.z_axis);
        [
            (x.norm() - 1.0).abs(),
            (y.norm() - 1.0).abs(),
            (z.norm() - 1.0).abs(),
            x.dot(&y).abs(),
            y.dot(&z).abs(),
            z.dot(&x).abs(),
            (x.cross(&y) - z).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Builds the local frame at `(u0, v0)`.
///
/// The normal is oriented with the patch's bulk predicate, the shape
/// operator is written in the orthonormal basis `{P_u/|P_u|, n x P_u/|P_u|}`
/// and diagonalised in closed form. At umbilic points the rotation angle is 0
/// and both curvatures take the mean of the diagonal.
pub fn build_local_frame<P: SurfacePatch + ?Sized>(
    patch: &P,
    uv: (f64, f64),
    orientation: NormalOrientation,
) -> Result<LocalFrame> {
    let NormalOrientation::IntoBulk = orientation;
    let (u, v) = uv;
    let d = patch.derivatives(u, v);
    if !d.is_finite() {
        return Err(Error::NonFiniteDerivative { u, v });
    }
    let cross = d.pu.cross(&d.pv);
    let cross_norm = cross.norm();
    if cross_norm <= 1e-12 * d.pu.norm() * d.pv.norm() || cross_norm == 0.0 {
        return Err(Error::DegeneratePatch { u, v, cross_norm });
    }
    let mut n = cross / cross_norm;
    let probe = 1e-4 * patch.length_scale();
    let forward = patch.in_bulk(&(d.p + n * probe));
    let backward = patch.in_bulk(&(d.p - n * probe));
    match (forward, backward) {
        (true, false) => {}
        (false, true) => n = -n,
        _ => return Err(Error::OrientationCheckFailed),
    }

    let e1 = d.pu.normalize();
    let e2 = n.cross(&e1);
    // P_u = a11 e1, P_v = a12 e1 + a22 e2
    let jac = Matrix2::new(d.pu.dot(&e1), d.pv.dot(&e1), d.pu.dot(&e2), d.pv.dot(&e2));
    let second = Matrix2::new(d.puu.dot(&n), d.puv.dot(&n), d.puv.dot(&n), d.pvv.dot(&n));
    let jac_inv = jac
        .try_inverse()
        .ok_or(Error::DegeneratePatch { u, v, cross_norm })?;
    let shape = jac_inv.transpose() * second * jac_inv;
    let (a, b, c) = (shape[(0, 0)], 0.5 * (shape[(0, 1)] + shape[(1, 0)]), shape[(1, 1)]);

    let spread = (a - c).hypot(2.0 * b);
    let magnitude = a.abs() + c.abs() + b.abs();
    let umbilic = spread <= 1e-12 * magnitude || spread == 0.0;
    let angle = if umbilic { 0.0 } else { 0.5 * (2.0 * b).atan2(a - c) };
    let (s, co) = angle.sin_cos();
    let (k_x, k_y, mixed_term) = if umbilic {
        // equal by definition; averaging keeps rounding out of k_x - k_y
        let k = 0.5 * (a + c);
        (k, k, b)
    } else {
        (
            a * co * co + 2.0 * b * s * co + c * s * s,
            a * s * s - 2.0 * b * s * co + c * co * co,
            (c - a) * s * co + b * (co * co - s * s),
        )
    };
    let x_axis = e1 * co + e2 * s;
    let y_axis = n.cross(&x_axis);

    let frame = LocalFrame {
        origin: d.p,
        x_axis,
        y_axis,
        z_axis: n,
        k_x,
        k_y,
        rotation_angle: angle,
        mixed_term,
        uv,
    };
    // The whole sign structure hangs on this: bulk must be at z > 0.
    let bulk_probe = frame.to_local(&(d.p + n * probe));
    if !(bulk_probe.z > 0.0 && patch.in_bulk(&frame.to_global(&bulk_probe))) {
        return Err(Error::OrientationCheckFailed);
    }
    Ok(frame)
}

/// Height of the surface above the tangent point `(x, y)` and its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightSample {
    pub f: f64,
    pub f_x: f64,
    pub f_y: f64,
    /// `(k_x x^2 + k_y y^2)/2`
    pub quadratic: f64,
    /// `|f - quadratic| / rho^3`, zero at the origin.
    pub cubic_ratio: f64,
}

/// Evaluates `F(x, y)` by projecting the tangent point back onto the patch.
pub fn height_function<P: SurfacePatch + ?Sized>(
    frame: &LocalFrame,
    patch: &P,
    xy: (f64, f64),
) -> Result<HeightSample> {
    let (x, y) = xy;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::OutsidePatch { x, y });
    }
    let (mut u, mut v) = frame.uv;
    let scale = patch.length_scale();
    let mut converged = false;
    for _ in 0..60 {
        let d = patch.derivatives(u, v);
        let rel = d.p - frame.origin;
        let g = [rel.dot(&frame.x_axis) - x, rel.dot(&frame.y_axis) - y];
        let jac = Matrix2::new(
            d.pu.dot(&frame.x_axis),
            d.pv.dot(&frame.x_axis),
            d.pu.dot(&frame.y_axis),
            d.pv.dot(&frame.y_axis),
        );
        let Some(inv) = jac.try_inverse() else {
            return Err(Error::OutsidePatch { x, y });
        };
        let du = inv[(0, 0)] * g[0] + inv[(0, 1)] * g[1];
        let dv = inv[(1, 0)] * g[0] + inv[(1, 1)] * g[1];
        u -= du;
        v -= dv;
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::OutsidePatch { x, y });
        }
        let residual = g[0].abs().max(g[1].abs());
        if residual <= 1e-15 * scale.max(x.abs().max(y.abs())) && converged {
            break;
        }
        converged = du.abs().max(dv.abs()) <= 1e-13 * (1.0 + u.abs() + v.abs());
    }
    let d = patch.derivatives(u, v);
    let rel = d.p - frame.origin;
    let miss = (rel.dot(&frame.x_axis) - x).abs().max((rel.dot(&frame.y_axis) - y).abs());
    if !converged || miss > 1e-10 * scale.max(x.hypot(y)) {
        return Err(Error::OutsidePatch { x, y });
    }
    let f = rel.dot(&frame.z_axis);
    let jac = Matrix2::new(
        d.pu.dot(&frame.x_axis),
        d.pv.dot(&frame.x_axis),
        d.pu.dot(&frame.y_axis),
        d.pv.dot(&frame.y_axis),
    );
    let inv = jac.try_inverse().ok_or(Error::OutsidePatch { x, y })?;
    let (zu, zv) = (d.pu.dot(&frame.z_axis), d.pv.dot(&frame.z_axis));
    // dF/d(x,y) = dF/d(u,v) * d(u,v)/d(x,y)
    let f_x = zu * inv[(0, 0)] + zv * inv[(1, 0)];
    let f_y = zu * inv[(0, 1)] + zv * inv[(1, 1)];
    let quadratic = frame.quadratic_height(x, y);
    let rho = x.hypot(y);
    let cubic_ratio = if rho > 0.0 { (f - quadratic).abs() / rho.powi(3) } else { 0.0 };
    Ok(HeightSample { f, f_x, f_y, quadratic, cubic_ratio })
}

/// Fitted bound `|F - f| <= C rho^3` over rings of radius `radius`,
/// `radius/2` and `radius/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBound {
    pub constant: f64,
    pub radius: f64,
}

pub fn cubic_remainder_constant<P: SurfacePatch + ?Sized>(
    frame: &LocalFrame,
    patch: &P,
    radius: f64,
    angles: usize,
) -> Result<CubicBound> {
    let mut constant: f64 = 0.0;
    for ring in [radius, 0.5 * radius, 0.25 * radius] {
        for j in 0..angles.max(1) {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / angles.max(1) as f64;
            let s = height_function(frame, patch, (ring * phi.cos(), ring * phi.sin()))?;
            constant = constant.max(s.cubic_ratio);
        }
    }
    Ok(CubicBound { constant, radius })
}
