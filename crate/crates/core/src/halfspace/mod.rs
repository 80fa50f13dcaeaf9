//! Half-space machinery behind the first-order correction: transfer of the
//! Neumann condition from the curved boundary to the tangent plane, and an
//! independent Hankel-integral route to the asymmetric term.

mod bessel;

use std::f64::consts::PI;

use rayon::prelude::*;

pub use bessel::{bessel_j0, bessel_j1, bessel_j2, bessel_jn};

use crate::error::{Error, Result};
use crate::expansion::ExpansionParams;
use crate::geometry::{height_function, HeightSample, LocalFrame, LocalPoint, SurfacePatch};
use crate::quadrature::{adaptive_gauss_kronrod_on, AdaptiveOptions, Integral};

/// Controls for [`hankel_psi1r`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Upper limit of the λ integral; `None` picks `max(40/|z|, 200/ρ)`.
    pub lambda_max: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { lambda_max: None, rel_tol: 1e-12, abs_tol: 1e-15, max_subdivisions: 200_000 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda_max {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("lambda_max must be positive, got {l}")));
            }
        }
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-2) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1e-2], got {tol}")));
            }
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidParameter("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

/// `∫_0^∞ J2(λρ) e^{-λ|z|} dλ/λ` by adaptive quadrature.
///
/// The returned error includes the truncation tail
/// `e^{-λmax|z|}/(λmax|z|)`.
pub fn hankel_psi1r(rho: f64, z: f64, spec: &QuadratureSpec) -> Result<Integral> {
    spec.validate()?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be non-negative, got {rho}")));
    }
    if !(z < 0.0 && z.is_finite()) {
        return Err(Error::InvalidParameter(format!("z must be negative, got {z}")));
    }
    if rho == 0.0 {
        return Ok(Integral { value: 0.0, error: 0.0, subdivisions: 0 });
    }
    let depth = -z;
    let lambda_max = spec.lambda_max.unwrap_or((40.0 / depth).max(200.0 / rho));
    let tail = (-lambda_max * depth).exp() / (lambda_max * depth);

    // Initial panels resolve both the decay length and the oscillation
    // period inside the region where the integrand is not negligible.
    let decay_end = (40.0 / depth).min(lambda_max);
    let step = (PI / rho).min(1.0 / depth);
    let n = ((decay_end / step).ceil() as usize).clamp(1, 1 << 20);
    let mut breaks: Vec<f64> = (0..=n).map(|i| decay_end * i as f64 / n as f64).collect();
    if lambda_max > decay_end {
        breaks.push(lambda_max);
    }
    let opts = AdaptiveOptions {
        abs_tol: spec.abs_tol,
        rel_tol: spec.rel_tol,
        max_subdivisions: spec.max_subdivisions,
        initial_panels: breaks.len() - 1,
    };
    let integrand = |lambda: f64| {
        if lambda == 0.0 {
            0.0
        } else {
            bessel_j2(lambda * rho) * (-lambda * depth).exp() / lambda
        }
    };
    let mut integral = adaptive_gauss_kronrod_on(integrand, &breaks, &opts)?;
    integral.error += tail;
    let target = spec.abs_tol.max(spec.rel_tol * integral.value.abs());
    if tail > target {
        return Err(Error::QuadratureNonConvergence {
            estimate: integral.value,
            error: integral.error,
            subdivisions: integral.subdivisions,
        });
    }
    Ok(integral)
}

/// Closed form of the same integral, `(1/2)(ρ/(r - z))^2`.
pub fn hankel_closed_form(rho: f64, z: f64) -> f64 {
    let ratio = rho / LocalPoint::new(rho, 0.0, z).r_minus_z();
    0.5 * ratio * ratio
}

/// Polar sampling grid on the plane `z = 0`, origin excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
}

impl PolarGrid {
    pub fn new(radii: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::GridContainsOrigin);
        }
        if radii.is_empty() || angles.is_empty() {
            return Err(Error::InvalidParameter("polar grid needs radii and angles".into()));
        }
        Ok(Self { radii, angles })
    }

    /// `n_rho` log-spaced radii in `[rho_min, rho_max]` and `n_phi` equally
    /// spaced angles covering the full circle.
    pub fn log_spaced(rho_min: f64, rho_max: f64, n_rho: usize, n_phi: usize) -> Result<Self> {
        if rho_min.is_nan() || rho_min <= 0.0 {
            return Err(Error::GridContainsOrigin);
        }
        if rho_max.is_nan() || rho_max < rho_min || n_rho == 0 || n_phi == 0 {
            return Err(Error::InvalidParameter("invalid polar grid bounds".into()));
        }
        let radii = if n_rho == 1 {
            vec![rho_min]
        } else {
            let ratio = (rho_max / rho_min).ln() / (n_rho - 1) as f64;
            (0..n_rho).map(|i| rho_min * (ratio * i as f64).exp()).collect()
        };
        let angles = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        Self::new(radii, angles)
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Source of `(F, F_x, F_y)` in the local frame.
pub trait HeightData: Sync {
    fn sample(&self, x: f64, y: f64) -> Result<HeightSample>;
}

/// The quadratic model `F = (k_x x^2 + k_y y^2)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticHeight {
    pub k_x: f64,
    pub k_y: f64,
}

impl QuadraticHeight {
    pub fn from_params(params: &ExpansionParams) -> Self {
        Self { k_x: params.k_x, k_y: params.k_y }
    }
}

impl HeightData for QuadraticHeight {
    fn sample(&self, x: f64, y: f64) -> Result<HeightSample> {
        let f = 0.5 * (self.k_x * x * x + self.k_y * y * y);
        Ok(HeightSample { f, f_x: self.k_x * x, f_y: self.k_y * y, quadratic: f, cubic_ratio: 0.0 })
    }
}

/// The exact height of a surface patch over its tangent plane.
pub struct PatchHeight<'a, P: SurfacePatch + ?Sized> {
    pub frame: &'a LocalFrame,
    pub patch: &'a P,
}

impl<P: SurfacePatch + ?Sized> HeightData for PatchHeight<'_, P> {
    fn sample(&self, x: f64, y: f64) -> Result<HeightSample> {
        height_function(self.frame, self.patch, (x, y))
    }
}

/// Coefficients of the model datum `(c_sym + c_asym cos 2φ)/ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsModel {
    pub c_sym: f64,
    pub c_asym: f64,
}

impl RhsModel {
    /// First-order datum produced by `psi0`: `c_sym = -K_+`, `c_asym = -K_-`.
    pub fn first_order(params: &ExpansionParams) -> Self {
        Self { c_sym: -params.k_plus, c_asym: -params.k_minus }
    }

    pub fn datum(&self, rho: f64, phi: f64) -> f64 {
        (self.c_sym + self.c_asym * (2.0 * phi).cos()) / rho
    }
}

/// Neumann datum sampled on a polar grid; `values[i][j]` sits at
/// `(radii[i], angles[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRHS {
    pub grid: PolarGrid,
    pub values: Vec<Vec<f64>>,
    pub model: Option<RhsModel>,
}

impl BoundaryRHS {
    pub fn with_model(mut self, model: RhsModel) -> Self {
        self.model = Some(model);
        self
    }

    /// Largest `|value - model|` relative to `|model|` over the grid.
    pub fn max_model_deviation(&self) -> Option<f64> {
        let model = self.model?;
        let mut worst = 0.0f64;
        for (i, &rho) in self.grid.radii.iter().enumerate() {
            let scale = (model.c_sym.abs() + model.c_asym.abs()) / rho;
            for (j, &phi) in self.grid.angles.iter().enumerate() {
                let dev = (self.values[i][j] - model.datum(rho, phi)).abs() / scale;
                worst = worst.max(dev);
            }
        }
        Some(worst)
    }
}

const X_STEP: f64 = 1e-3;
const Z_STEP: f64 = 1e-3;

fn central_first<F: Fn(f64) -> Result<f64>>(f: F, h: f64) -> Result<f64> {
    Ok((-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h))
}

/// One-sided samples `f(0), f(-h), ..., f(-5h)` along the inward side.
fn one_sided<F: Fn(f64) -> Result<f64>>(f: F, h: f64) -> Result<[f64; 6]> {
    let mut s = [0.0; 6];
    for (k, v) in s.iter_mut().enumerate() {
        *v = f(-(k as f64) * h)?;
    }
    Ok(s)
}

fn one_sided_first(s: &[f64; 6], h: f64) -> f64 {
    // forward 4th-order stencil in the -z direction, hence the sign
    -(-25.0 * s[0] + 48.0 * s[1] - 36.0 * s[2] + 16.0 * s[3] - 3.0 * s[4]) / (12.0 * h)
}

fn one_sided_second(s: &[f64; 6], h: f64) -> f64 {
    (45.0 * s[0] - 154.0 * s[1] + 214.0 * s[2] - 156.0 * s[3] + 61.0 * s[4] - 10.0 * s[5]) / (12.0 * h * h)
}

/// `∂ψ/∂z` at `(x, y, 0)` from inside the domain.
pub fn normal_derivative<F>(psi: &F, x: f64, y: f64) -> Result<f64>
where
    F: Fn(&LocalPoint) -> Result<f64>,
{
    let h = Z_STEP * x.hypot(y);
    let s = one_sided(|dz| psi(&LocalPoint::new(x, y, dz)), h)?;
    Ok(one_sided_first(&s, h))
}

fn datum_at<H, F>(height: &H, psi: &F, x: f64, y: f64) -> Result<f64>
where
    H: HeightData + ?Sized,
    F: Fn(&LocalPoint) -> Result<f64>,
{
    let rho = x.hypot(y);
    let hs = height.sample(x, y)?;
    let hx = X_STEP * rho;
    let psi_x = central_first(|dx| psi(&LocalPoint::new(x + dx, y, 0.0)), hx)?;
    let psi_y = central_first(|dy| psi(&LocalPoint::new(x, y + dy, 0.0)), hx)?;
    let hz = Z_STEP * rho;
    let s = one_sided(|dz| psi(&LocalPoint::new(x, y, dz)), hz)?;
    let psi_zz = one_sided_second(&s, hz);
    Ok(hs.f_x * psi_x + hs.f_y * psi_y - hs.f * psi_zz)
}

fn sweep<G>(grid: &PolarGrid, g: G) -> Result<Vec<Vec<f64>>>
where
    G: Fn(f64, f64) -> Result<f64> + Sync,
{
    grid.radii
        .par_iter()
        .map(|&rho| {
            grid.angles
                .iter()
                .map(|&phi| {
                    let (x, y) = (rho * phi.cos(), rho * phi.sin());
                    let v = g(x, y)?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::InvalidParameter(format!("non-finite datum at rho={rho}, phi={phi}")))
                    }
                })
                .collect()
        })
        .collect()
}

/// Neumann datum `F_x ψ_x + F_y ψ_y - F ψ_zz` at `z = 0` on `grid`.
///
/// Tangential derivatives use 4th-order central differences with step
/// `1e-3 ρ`; `ψ_zz` uses a one-sided 4th-order stencil reaching into `z < 0`.
pub fn perturb_rhs<H, F>(height: &H, psi_prev: F, grid: &PolarGrid) -> Result<BoundaryRHS>
where
    H: HeightData + ?Sized,
    F: Fn(&LocalPoint) -> Result<f64> + Sync,
{
    let values = sweep(grid, |x, y| datum_at(height, &psi_prev, x, y))?;
    Ok(BoundaryRHS { grid: grid.clone(), values, model: None })
}

/// Datum left for the next order once `correction` has been added:
/// `perturb_rhs(ψ_prev + correction) - ∂correction/∂z` at `z = 0`.
///
/// When `correction` solves the transferred problem for `ψ_prev` exactly,
/// what remains is the transfer of the correction itself.
pub fn next_order_datum<H, F, G>(height: &H, psi_prev: F, correction: G, grid: &PolarGrid) -> Result<BoundaryRHS>
where
    H: HeightData + ?Sized,
    F: Fn(&LocalPoint) -> Result<f64> + Sync,
    G: Fn(&LocalPoint) -> Result<f64> + Sync,
{
    let total = |p: &LocalPoint| Ok(psi_prev(p)? + correction(p)?);
    let values = sweep(grid, |x, y| Ok(datum_at(height, &total, x, y)? - normal_derivative(&correction, x, y)?))?;
    Ok(BoundaryRHS { grid: grid.clone(), values, model: None })
}

/// Least-squares fit of `datum * ρ` against `{1, cos 2φ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsFit {
    pub c_sym: f64,
    pub c_asym: f64,
    pub se_sym: f64,
    pub se_asym: f64,
    /// Root-mean-square residual of `datum * ρ`.
    pub residual: f64,
}

const MIN_ANGLES: usize = 8;

pub fn fit_rhs_coefficients(rhs: &BoundaryRHS) -> Result<RhsFit> {
    let n_phi = rhs.grid.angles.len();
    if n_phi < MIN_ANGLES {
        return Err(Error::IllConditionedFit(format!(
            "{n_phi} angular nodes, at least {MIN_ANGLES} needed"
        )));
    }
    // Normal equations for the two modes, accumulated directly.
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut samples = Vec::with_capacity(rhs.grid.len());
    for (i, &rho) in rhs.grid.radii.iter().enumerate() {
        for (j, &phi) in rhs.grid.angles.iter().enumerate() {
            let c = (2.0 * phi).cos();
            let y = rhs.values[i][j] * rho;
            s11 += 1.0;
            s12 += c;
            s22 += c * c;
            b1 += y;
            b2 += c * y;
            samples.push((c, y));
        }
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return Err(Error::IllConditionedFit("angular modes are not independent on this grid".into()));
    }
    let c_sym = (s22 * b1 - s12 * b2) / det;
    let c_asym = (s11 * b2 - s12 * b1) / det;
    let rss: f64 = samples.iter().map(|(c, y)| (y - c_sym - c_asym * c).powi(2)).sum();
    let n = samples.len() as f64;
    let sigma2 = if n > 2.0 { rss / (n - 2.0) } else { 0.0 };
    Ok(RhsFit {
        c_sym,
        c_asym,
        se_sym: (sigma2 * s22 / det).sqrt(),
        se_asym: (sigma2 * s11 / det).sqrt(),
        residual: (rss / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::expansion::{psi0, psi1r, psi1s, Charge};
    use crate::geometry::{build_local_frame, NormalOrientation, Sphere};

    fn params(kx: f64, ky: f64) -> ExpansionParams {
        ExpansionParams::new(Charge::unit(), kx, ky, 1.0).unwrap()
    }

    #[test]
    fn hankel_examples() {
        let spec = QuadratureSpec::default();
        assert_eq!(hankel_psi1r(0.0, -0.7, &spec).unwrap().value, 0.0);
        let v = hankel_psi1r(1.0, -1.0, &spec).unwrap().value;
        let exact = (3.0 - 2.0 * 2f64.sqrt()) / 2.0;
        assert!((v - exact).abs() < 1e-8 * exact, "{v}");
        let v = hankel_psi1r(2.0, -0.5, &spec).unwrap().value;
        let exact = 0.5 * (2.0 / (4.25f64.sqrt() + 0.5)).powi(2);
        assert!((exact - 0.304_805_898_398_896_2).abs() < 1e-15);
        assert!((v - exact).abs() < 1e-8 * exact, "{v}");
    }

    #[test]
    fn hankel_extreme_grid_corners() {
        let spec = QuadratureSpec::default();
        for (rho, z) in [(0.1, -5.0), (10.0, -0.1), (0.1, -0.1), (10.0, -5.0)] {
            let v = hankel_psi1r(rho, z, &spec).unwrap();
            let exact = hankel_closed_form(rho, z);
            assert!((v.value - exact).abs() < 1e-8 * exact, "({rho}, {z}): {} vs {exact}", v.value);
        }
    }

    #[test]
    fn hankel_rejects_bad_input() {
        let spec = QuadratureSpec::default();
        assert!(hankel_psi1r(1.0, 0.0, &spec).is_err());
        assert!(hankel_psi1r(-1.0, -1.0, &spec).is_err());
        let bad = QuadratureSpec { rel_tol: 0.5, ..spec };
        assert!(matches!(hankel_psi1r(1.0, -1.0, &bad), Err(Error::InvalidParameter(_))));
        let tiny = QuadratureSpec { max_subdivisions: 10, rel_tol: 1e-300, abs_tol: 1e-300, ..spec };
        assert!(matches!(
            hankel_psi1r(10.0, -0.1, &tiny),
            Err(Error::QuadratureNonConvergence { .. })
        ));
        let short = QuadratureSpec { lambda_max: Some(1.0), ..spec };
        assert!(matches!(
            hankel_psi1r(1.0, -1.0, &short),
            Err(Error::QuadratureNonConvergence { .. })
        ));
    }

    #[test]
    fn hankel_reconstructs_psi1r() {
        let p = params(2.0, -0.5);
        let spec = QuadratureSpec::default();
        for (rho, phi, z) in [(0.3, 0.4, -1.0), (2.0, 2.5, -0.2), (1.0, -1.0, -3.0)] {
            let point = LocalPoint::from_cylindrical(rho, phi, z);
            let h = hankel_psi1r(rho, z, &spec).unwrap().value;
            let rebuilt = -p.k_minus * (2.0 * phi).cos() * h;
            let direct = psi1r(&point, &p).unwrap();
            assert!((rebuilt - direct).abs() < 1e-10 * p.k_minus.abs(), "{rebuilt} vs {direct}");
        }
    }

    #[test]
    fn grid_rejects_origin() {
        assert_eq!(PolarGrid::new(vec![0.0, 1.0], vec![0.0]), Err(Error::GridContainsOrigin));
        assert_eq!(PolarGrid::log_spaced(0.0, 1.0, 3, 8), Err(Error::GridContainsOrigin));
        let g = PolarGrid::log_spaced(1e-3, 1e-1, 3, 8).unwrap();
        assert!((g.radii[1] - 1e-2).abs() < 1e-15);
        assert_eq!(g.len(), 24);
    }

    fn psi0_fn(p: ExpansionParams) -> impl Fn(&LocalPoint) -> Result<f64> + Sync {
        move |pt| psi0(pt, &p.charge)
    }

    #[test]
    fn plane_gives_zero_datum() {
        let grid = PolarGrid::log_spaced(1e-3, 1.0, 4, 8).unwrap();
        let rhs = perturb_rhs(&QuadraticHeight { k_x: 0.0, k_y: 0.0 }, psi0_fn(params(0.0, 0.0)), &grid).unwrap();
        assert!(rhs.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn umbilic_datum_matches_symbolic_value() {
        // psi0 = 1/(2 pi r); at z = 0: F_x psi_x + F_y psi_y = -rho^2/(2 pi rho^3),
        // psi_zz = -1/(2 pi rho^3), F psi_zz = -rho^2/(4 pi rho^3)
        let expected = -1.0 / (2.0 * PI * 0.01) + 1.0 / (4.0 * PI * 0.01);
        assert!((expected + 2.0 / (8.0 * PI * 0.01)).abs() < 1e-12);
        let grid = PolarGrid::new(vec![0.01], (0..8).map(|j| j as f64 * PI / 4.0 + 0.1).collect()).unwrap();
        let rhs = perturb_rhs(&QuadraticHeight { k_x: 1.0, k_y: 1.0 }, psi0_fn(params(1.0, 1.0)), &grid).unwrap();
        for &v in &rhs.values[0] {
            assert!((v - expected).abs() < 1e-6 * expected.abs(), "{v} vs {expected}");
        }
    }

    #[test]
    fn symmetric_saddle_leaves_only_cos2phi() {
        let p = params(1.0, -1.0);
        let grid = PolarGrid::log_spaced(1e-3, 1e-1, 3, 16).unwrap();
        let rhs = perturb_rhs(&QuadraticHeight::from_params(&p), psi0_fn(p), &grid).unwrap();
        let fit = fit_rhs_coefficients(&rhs).unwrap();
        assert!(fit.c_sym.abs() < 1e-8 * p.k_minus.abs(), "{}", fit.c_sym);
        assert!((fit.c_asym + p.k_minus).abs() < 1e-6 * p.k_minus.abs());
    }

    #[test]
    fn model_form_is_fitted_exactly() {
        let model = RhsModel { c_sym: -0.3, c_asym: 0.7 };
        let grid = PolarGrid::log_spaced(1e-4, 1e-1, 5, 12).unwrap();
        let values = grid.radii.iter().map(|&r| grid.angles.iter().map(|&a| model.datum(r, a)).collect()).collect();
        let rhs = BoundaryRHS { grid, values, model: Some(model) };
        let fit = fit_rhs_coefficients(&rhs).unwrap();
        assert!((fit.c_sym - model.c_sym).abs() < 1e-12);
        assert!((fit.c_asym - model.c_asym).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(rhs.max_model_deviation().unwrap() < 1e-14);
    }

    #[test]
    fn cos4phi_contamination_is_orthogonal() {
        let model = RhsModel { c_sym: -0.3, c_asym: 0.7 };
        let grid = PolarGrid::log_spaced(1e-3, 1e-1, 4, 16).unwrap();
        let values = grid
            .radii
            .iter()
            .map(|&r| grid.angles.iter().map(|&a| model.datum(r, a) + 5.0 * (4.0 * a).cos() / r).collect())
            .collect();
        let fit = fit_rhs_coefficients(&BoundaryRHS { grid, values, model: None }).unwrap();
        assert!((fit.c_sym - model.c_sym).abs() < 1e-10);
        assert!((fit.c_asym - model.c_asym).abs() < 1e-10);
    }

    #[test]
    fn too_few_angles_is_ill_conditioned() {
        let grid = PolarGrid::log_spaced(1e-3, 1e-1, 3, 7).unwrap();
        let rhs = BoundaryRHS { values: vec![vec![1.0; 7]; 3], grid, model: None };
        assert!(matches!(fit_rhs_coefficients(&rhs), Err(Error::IllConditionedFit(_))));
    }

    #[test]
    fn sphere_patch_datum_recovers_coefficients() {
        let sphere = Sphere { radius: 1.0 };
        let frame = build_local_frame(&sphere, (PI / 2.0, 0.0), NormalOrientation::IntoBulk).unwrap();
        let p = ExpansionParams::sphere(Charge::unit(), 1.0).unwrap();
        let height = PatchHeight { frame: &frame, patch: &sphere };
        let grid = PolarGrid::log_spaced(1e-4, 1e-2, 3, 8).unwrap();
        let fit = fit_rhs_coefficients(&perturb_rhs(&height, psi0_fn(p), &grid).unwrap()).unwrap();
        assert!((fit.c_sym + p.k_plus).abs() < 1e-2 * p.k_plus, "{} vs {}", fit.c_sym, -p.k_plus);
        assert!(fit.c_asym.abs() < 1e-2 * p.k_plus);
    }

    #[test]
    fn next_order_datum_stays_bounded() {
        let p = params(1.5, 0.5);
        let height = QuadraticHeight::from_params(&p);
        let correction = move |pt: &LocalPoint| Ok(psi1s(pt, &p)? + psi1r(pt, &p)?);
        let mut sups = Vec::new();
        for rho in [1e-4, 1e-3, 1e-2] {
            let grid = PolarGrid::new(vec![rho], (0..16).map(|j| j as f64 * PI / 8.0).collect()).unwrap();
            let rhs = next_order_datum(&height, psi0_fn(p), correction, &grid).unwrap();
            sups.push(rhs.values[0].iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        // growth by less than 10^{1/2} per decade
        assert!(sups[0] < sups[2] * 100f64.sqrt(), "{sups:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn quadrature_matches_closed_form(log_rho in -1.0..1.0f64, log_z in -1.0..0.7f64) {
            let (rho, z) = (10f64.powf(log_rho), -10f64.powf(log_z));
            let q = hankel_psi1r(rho, z, &QuadratureSpec::default()).unwrap().value;
            let exact = hankel_closed_form(rho, z);
            prop_assert!((q - exact).abs() < 1e-8 * exact);
        }

        #[test]
        fn hankel_route_reconstructs_psi1r(
            kx in -2.0..2.0f64, ky in -2.0..2.0f64,
            r in 1e-2..1.0f64, theta in 1.7..3.1f64, phi in 0.0..2.0 * PI,
        ) {
            let prm = params(kx, ky);
            let p = LocalPoint::from_spherical(r, theta, phi);
            let rho = p.rho();
            let cos2 = (p.x * p.x - p.y * p.y) / (rho * rho);
            let hankel = hankel_psi1r(rho, p.z, &QuadratureSpec::default()).unwrap().value;
            let direct = psi1r(&p, &prm).unwrap();
            prop_assert!((-prm.k_minus * cos2 * hankel - direct).abs() <= 1e-9 * prm.k_minus.abs().max(1e-300));
        }

        #[test]
        fn fit_ignores_other_harmonics(
            cs in -1.0..1.0f64, ca in -1.0..1.0f64, c1 in -1.0..1.0f64, c4 in -1.0..1.0f64,
        ) {
            let grid = PolarGrid::log_spaced(1e-4, 1e-2, 4, 16).unwrap();
            let values = grid
                .radii
                .iter()
                .map(|&rho| {
                    grid.angles
                        .iter()
                        .map(|&phi| (cs + ca * (2.0 * phi).cos() + c1 * phi.cos() + c4 * (4.0 * phi).sin()) / rho)
                        .collect()
                })
                .collect();
            let fit = fit_rhs_coefficients(&BoundaryRHS { grid, values, model: None }).unwrap();
            prop_assert!((fit.c_sym - cs).abs() < 1e-10 && (fit.c_asym - ca).abs() < 1e-10);
        }
    }
}
