use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Position and derivatives of a patch at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchDerivatives {
    pub p: Vec3,
    pub pu: Vec3,
    pub pv: Vec3,
    pub puu: Vec3,
    pub puv: Vec3,
    pub pvv: Vec3,
}

impl PatchDerivatives {
    pub fn is_finite(&self) -> bool {
        [self.p, self.pu, self.pv, self.puu, self.puv, self.pvv]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
    }
}

/// A parametric boundary patch `(u, v) -> P(u, v)`.
///
/// Implementors without analytic derivatives can rely on the default
/// [`SurfacePatch::derivatives`], which uses central differences scaled by
/// [`SurfacePatch::parameter_scale`].
pub trait SurfacePatch: Send + Sync {
    fn position(&self, u: f64, v: f64) -> Vec3;

    /// Whether `p` lies strictly inside the superconducting bulk. Only
    /// queried close to the patch, to orient the normal.
    fn in_bulk(&self, p: &Vec3) -> bool;

    fn derivatives(&self, u: f64, v: f64) -> PatchDerivatives {
        finite_difference_derivatives(self, u, v, self.parameter_scale())
    }

    /// Characteristic parameter length used to size difference steps.
    fn parameter_scale(&self) -> f64 {
        1.0
    }

    /// Characteristic spatial length (curvature radius or similar).
    fn length_scale(&self) -> f64 {
        1.0
    }
}

/// Central-difference derivatives. First derivatives use
/// `h1 = scale * eps^(1/3)`, second derivatives `h2 = scale * eps^(1/4)`.
pub fn finite_difference_derivatives<P: SurfacePatch + ?Sized>(
    patch: &P,
    u: f64,
    v: f64,
    scale: f64,
) -> PatchDerivatives {
    let h1 = scale * f64::EPSILON.cbrt();
    let h2 = scale * f64::EPSILON.powf(0.25);
    let p = patch.position(u, v);
    let pu = (patch.position(u + h1, v) - patch.position(u - h1, v)) / (2.0 * h1);
    let pv = (patch.position(u, v + h1) - patch.position(u, v - h1)) / (2.0 * h1);
    let puu = (patch.position(u + h2, v) - 2.0 * p + patch.position(u - h2, v)) / (h2 * h2);
    let pvv = (patch.position(u, v + h2) - 2.0 * p + patch.position(u, v - h2)) / (h2 * h2);
    let puv = (patch.position(u + h2, v + h2) - patch.position(u + h2, v - h2)
        - patch.position(u - h2, v + h2)
        + patch.position(u - h2, v - h2))
        / (4.0 * h2 * h2);
    PatchDerivatives { p, pu, pv, puu, puv, pvv }
}

/// Largest relative discrepancy between the supplied first derivatives and
/// central differences of the position map.
pub fn derivative_consistency<P: SurfacePatch + ?Sized>(patch: &P, u: f64, v: f64) -> f64 {
    let supplied = patch.derivatives(u, v);
    let numeric = finite_difference_derivatives(patch, u, v, patch.parameter_scale());
    let rel = |a: &Vec3, b: &Vec3| (a - b).norm() / a.norm().max(f64::MIN_POSITIVE);
    rel(&supplied.pu, &numeric.pu).max(rel(&supplied.pv, &numeric.pv))
}

/// Exterior of a sphere of radius `a` centred at the origin,
/// `P(u, v) = a (sin u cos v, sin u sin v, cos u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub radius: f64,
}

impl SurfacePatch for Sphere {
    fn position(&self, u: f64, v: f64) -> Vec3 {
        let a = self.radius;
        Vec3::new(a * u.sin() * v.cos(), a * u.sin() * v.sin(), a * u.cos())
    }

    fn derivatives(&self, u: f64, v: f64) -> PatchDerivatives {
        let a = self.radius;
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        PatchDerivatives {
            p: Vec3::new(a * su * cv, a * su * sv, a * cu),
            pu: Vec3::new(a * cu * cv, a * cu * sv, -a * su),
            pv: Vec3::new(-a * su * sv, a * su * cv, 0.0),
            puu: Vec3::new(-a * su * cv, -a * su * sv, -a * cu),
            puv: Vec3::new(-a * cu * sv, a * cu * cv, 0.0),
            pvv: Vec3::new(-a * su * cv, -a * su * sv, 0.0),
        }
    }

    fn in_bulk(&self, p: &Vec3) -> bool {
        p.norm() < self.radius
    }

    fn length_scale(&self) -> f64 {
        self.radius
    }
}

/// Exterior of a circular cylinder of radius `a` with axis along global z,
/// `P(u, v) = (a cos u, a sin u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub radius: f64,
}

impl SurfacePatch for Cylinder {
    fn position(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new(self.radius * u.cos(), self.radius * u.sin(), v)
    }

    fn derivatives(&self, u: f64, v: f64) -> PatchDerivatives {
        let a = self.radius;
        let (s, c) = u.sin_cos();
        PatchDerivatives {
            p: Vec3::new(a * c, a * s, v),
            pu: Vec3::new(-a * s, a * c, 0.0),
            pv: Vec3::new(0.0, 0.0, 1.0),
            puu: Vec3::new(-a * c, -a * s, 0.0),
            puv: Vec3::zeros(),
            pvv: Vec3::zeros(),
        }
    }

    fn in_bulk(&self, p: &Vec3) -> bool {
        p.x * p.x + p.y * p.y < self.radius * self.radius
    }

    fn length_scale(&self) -> f64 {
        self.radius
    }
}

/// Graph surface `z = kx x^2/2 + ky y^2/2 + c30 x^3 + c21 x^2 y + c12 x y^2 + c03 y^3`
/// with the bulk above it. Covers the plane, paraboloid and biquadratic
/// built-ins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Graph {
    pub k_x: f64,
    pub k_y: f64,
    /// `[c30, c21, c12, c03]`
    pub cubic: [f64; 4],
}

impl Graph {
    pub fn plane() -> Self {
        Self::paraboloid(0.0, 0.0)
    }

    pub fn paraboloid(k_x: f64, k_y: f64) -> Self {
        Self { k_x, k_y, cubic: [0.0; 4] }
    }

    pub fn biquadratic(k_x: f64, k_y: f64, cubic: [f64; 4]) -> Self {
        Self { k_x, k_y, cubic }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        let [c30, c21, c12, c03] = self.cubic;
        0.5 * (self.k_x * x * x + self.k_y * y * y)
            + c30 * x * x * x
            + c21 * x * x * y
            + c12 * x * y * y
            + c03 * y * y * y
    }
}

impl SurfacePatch for Graph {
    fn position(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new(u, v, self.height(u, v))
    }

    fn derivatives(&self, u: f64, v: f64) -> PatchDerivatives {
        let [c30, c21, c12, c03] = self.cubic;
        let fu = self.k_x * u + 3.0 * c30 * u * u + 2.0 * c21 * u * v + c12 * v * v;
        let fv = self.k_y * v + c21 * u * u + 2.0 * c12 * u * v + 3.0 * c03 * v * v;
        let fuu = self.k_x + 6.0 * c30 * u + 2.0 * c21 * v;
        let fuv = 2.0 * c21 * u + 2.0 * c12 * v;
        let fvv = self.k_y + 2.0 * c12 * u + 6.0 * c03 * v;
        PatchDerivatives {
            p: self.position(u, v),
            pu: Vec3::new(1.0, 0.0, fu),
            pv: Vec3::new(0.0, 1.0, fv),
            puu: Vec3::new(0.0, 0.0, fuu),
            puv: Vec3::new(0.0, 0.0, fuv),
            pvv: Vec3::new(0.0, 0.0, fvv),
        }
    }

    fn in_bulk(&self, p: &Vec3) -> bool {
        p.z > self.height(p.x, p.y)
    }

    fn length_scale(&self) -> f64 {
        let k = self.k_x.abs().max(self.k_y.abs());
        if k > 0.0 {
            1.0 / k
        } else {
            1.0
        }
    }
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl RigidMotion {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse_apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.translation)
    }
}

/// A patch carried along by a rigid motion.
#[derive(Debug, Clone)]
pub struct Moved<P> {
    pub inner: P,
    pub motion: RigidMotion,
}

impl<P: SurfacePatch> SurfacePatch for Moved<P> {
    fn position(&self, u: f64, v: f64) -> Vec3 {
        self.motion.apply(&self.inner.position(u, v))
    }

    fn derivatives(&self, u: f64, v: f64) -> PatchDerivatives {
        let d = self.inner.derivatives(u, v);
        let r = |w: Vec3| self.motion.apply_vector(&w);
        PatchDerivatives {
            p: self.motion.apply(&d.p),
            pu: r(d.pu),
            pv: r(d.pv),
            puu: r(d.puu),
            puv: r(d.puv),
            pvv: r(d.pvv),
        }
    }

    fn in_bulk(&self, p: &Vec3) -> bool {
        self.inner.in_bulk(&self.motion.inverse_apply(p))
    }

    fn parameter_scale(&self) -> f64 {
        self.inner.parameter_scale()
    }

    fn length_scale(&self) -> f64 {
        self.inner.length_scale()
    }
}

/// Patch given only by closures; derivatives come from central differences.
pub struct NumericPatch<F, B> {
    pub position: F,
    pub bulk: B,
    pub parameter_scale: f64,
    pub length_scale: f64,
}

impl<F, B> SurfacePatch for NumericPatch<F, B>
where
    F: Fn(f64, f64) -> Vec3 + Send + Sync,
    B: Fn(&Vec3) -> bool + Send + Sync,
{
    fn position(&self, u: f64, v: f64) -> Vec3 {
        (self.position)(u, v)
    }

    fn in_bulk(&self, p: &Vec3) -> bool {
        (self.bulk)(p)
    }

    fn parameter_scale(&self) -> f64 {
        self.parameter_scale
    }

    fn length_scale(&self) -> f64 {
        self.length_scale
    }
}

/// Built-in surfaces selectable by name, e.g. `sphere:a=2`,
/// `paraboloid:kx=1,ky=-1`, `biquadratic:kx=1,ky=0.5,c30=0.1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BuiltinSurface {
    Sphere { a: f64 },
    Cylinder { a: f64 },
    Plane,
    Paraboloid { kx: f64, ky: f64 },
    Biquadratic { kx: f64, ky: f64, cubic: [f64; 4] },
}

impl BuiltinSurface {
    pub fn patch(&self) -> Box<dyn SurfacePatch> {
        match *self {
            BuiltinSurface::Sphere { a } => Box::new(Sphere { radius: a }),
            BuiltinSurface::Cylinder { a } => Box::new(Cylinder { radius: a }),
            BuiltinSurface::Plane => Box::new(Graph::plane()),
            BuiltinSurface::Paraboloid { kx, ky } => Box::new(Graph::paraboloid(kx, ky)),
            BuiltinSurface::Biquadratic { kx, ky, cubic } => {
                Box::new(Graph::biquadratic(kx, ky, cubic))
            }
        }
    }

    /// Parameter point where the charge sits by default.
    pub fn charge_parameters(&self) -> (f64, f64) {
        match self {
            BuiltinSurface::Sphere { .. } => (std::f64::consts::FRAC_PI_2, 0.0),
            _ => (0.0, 0.0),
        }
    }

    /// Radius of the sphere, when this is one.
    pub fn sphere_radius(&self) -> Option<f64> {
        match self {
            BuiltinSurface::Sphere { a } => Some(*a),
            _ => None,
        }
    }
}

impl fmt::Display for BuiltinSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinSurface::Sphere { a } => write!(f, "sphere:a={a}"),
            BuiltinSurface::Cylinder { a } => write!(f, "cylinder:a={a}"),
            BuiltinSurface::Plane => write!(f, "plane"),
            BuiltinSurface::Paraboloid { kx, ky } => write!(f, "paraboloid:kx={kx},ky={ky}"),
            BuiltinSurface::Biquadratic { kx, ky, cubic } => write!(
                f,
                "biquadratic:kx={kx},ky={ky},c30={},c21={},c12={},c03={}",
                cubic[0], cubic[1], cubic[2], cubic[3]
            ),
        }
    }
}

impl FromStr for BuiltinSurface {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = Vec::new();
        for item in rest.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("`{v}` is not a number")))?;
            params.push((k.trim().to_string(), v));
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| Error::InvalidParameter(format!("surface `{name}` needs `{key}`")))
        };
        let allowed: &[&str] = match name.trim() {
            "sphere" | "cylinder" => &["a"],
            "plane" => &[],
            "paraboloid" => &["kx", "ky"],
            "biquadratic" => &["kx", "ky", "c30", "c21", "c12", "c03"],
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown surface `{other}` (expected sphere, cylinder, plane, paraboloid, biquadratic)"
                )))
            }
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!("surface `{name}` has no parameter `{k}`")));
        }
        let surface = match name.trim() {
            "sphere" => BuiltinSurface::Sphere { a: get("a", None)? },
            "cylinder" => BuiltinSurface::Cylinder { a: get("a", None)? },
            "plane" => BuiltinSurface::Plane,
            "paraboloid" => BuiltinSurface::Paraboloid { kx: get("kx", None)?, ky: get("ky", None)? },
            _ => BuiltinSurface::Biquadratic {
                kx: get("kx", None)?,
                ky: get("ky", None)?,
                cubic: [
                    get("c30", Some(0.0))?,
                    get("c21", Some(0.0))?,
                    get("c12", Some(0.0))?,
                    get("c03", Some(0.0))?,
                ],
            },
        };
        if let Some(a) = surface.sphere_radius().or(match surface {
            BuiltinSurface::Cylinder { a } => Some(a),
            _ => None,
        }) {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("radius must be positive, got {a}")));
            }
        }
        Ok(surface)
    }
}
