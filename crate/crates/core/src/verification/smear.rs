//! Finite-size fluxon: the singular potential convolved with a radially
//! symmetric surface density on the tangent plane.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{psi_singular, ExpansionParams};
use crate::fit::least_squares;
use crate::geometry::LocalPoint;
use crate::quadrature::{adaptive_gauss_kronrod_on, pairwise_sum, AdaptiveOptions, GaussLegendre, Integral};

/// Radial profile with unit integral over the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// `exp(-s²/2w²) / (2πw²)`, truncated at `8w`.
    Gaussian { w: f64 },
    /// `1/(πw²)` for `s < w`.
    TopHat { w: f64 },
}

/// Truncation radius of the Gaussian, in units of `w`.
pub const GAUSSIAN_CUTOFF: f64 = 8.0;

impl Profile {
    pub fn width(&self) -> f64 {
        match *self {
            Profile::Gaussian { w } | Profile::TopHat { w } => w,
        }
    }

    pub fn support(&self) -> f64 {
        match *self {
            Profile::Gaussian { w } => GAUSSIAN_CUTOFF * w,
            Profile::TopHat { w } => w,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Profile::Gaussian { w } if s <= GAUSSIAN_CUTOFF * w => (-0.5 * (s / w).powi(2)).exp() / (2.0 * PI * w * w),
            Profile::TopHat { w } if s <= w => 1.0 / (PI * w * w),
            _ => 0.0,
        }
    }

    /// `2π ∫ value(s) s ds` over the support.
    pub fn integral(&self) -> f64 {
        let rule = GaussLegendre::new(32);
        let support = self.support();
        let panels = 8;
        let terms: Vec<f64> = (0..panels)
            .map(|k| {
                let lo = support * k as f64 / panels as f64;
                let hi = support * (k + 1) as f64 / panels as f64;
                rule.integrate(lo, hi, |s| 2.0 * PI * s * self.value(s))
            })
            .collect();
        pairwise_sum(&terms)
    }
}

/// Surface density `μ = νΦ0 Σ c_i profile_i` with `Σ c_i = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmearDensity {
    components: Vec<(f64, Profile)>,
}

const NORMALIZATION_TOL: f64 = 1e-10;

impl SmearDensity {
    pub fn new(components: Vec<(f64, Profile)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("density needs at least one profile".into()));
        }
        for (c, p) in &components {
            if !(p.width() > 0.0 && p.width().is_finite()) {
                return Err(Error::InvalidParameter(format!("core width must be positive, got {}", p.width())));
            }
            if c.is_nan() || *c < 0.0 {
                return Err(Error::InvalidParameter(format!("profile weights must be non-negative, got {c}")));
            }
        }
        let density = Self { components };
        let integral = density.normalization();
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NonNormalizedDensity { integral, expected: 1.0 });
        }
        Ok(density)
    }

    pub fn gaussian(w: f64) -> Result<Self> {
        Self::new(vec![(1.0, Profile::Gaussian { w })])
    }

    pub fn top_hat(w: f64) -> Result<Self> {
        Self::new(vec![(1.0, Profile::TopHat { w })])
    }

    pub fn components(&self) -> &[(f64, Profile)] {
        &self.components
    }

    /// Largest core width.
    pub fn core_width(&self) -> f64 {
        self.components.iter().map(|(_, p)| p.width()).fold(0.0, f64::max)
    }

    /// `∫ μ dS / (νΦ0)` by quadrature.
    pub fn normalization(&self) -> f64 {
        self.components.iter().map(|(c, p)| c * p.integral()).sum()
    }
}

/// Smeared potential with a coarse-vs-fine error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmearResult {
    pub value: f64,
    pub error: f64,
}

const SMEAR_REL_TOL: f64 = 1e-8;
/// Target of the adaptive angular integral, well below `SMEAR_REL_TOL`.
const ANGULAR_REL_TOL: f64 = 1e-11;

/// `∫ μ(ξ) ψ_singular(point - ξ) dξ` over the tangent plane.
///
/// Polar coordinates are centred on the projection of `point`, so the weak
/// `1/|ξ|` singularity at the origin is absorbed by the Jacobian. The angle
/// is integrated adaptively; the radial rule is checked against a finer one.
pub fn smeared_potential(density: &SmearDensity, params: &ExpansionParams, point: &LocalPoint) -> Result<SmearResult> {
    if !(point.is_finite() && point.z <= 0.0) {
        return Err(Error::InvalidParameter(format!("point must satisfy z <= 0, got z = {}", point.z)));
    }
    let parts: Vec<(f64, Integral, Integral)> = density
        .components()
        .par_iter()
        .filter(|(c, _)| *c != 0.0)
        .map(|(c, profile)| {
            let coarse = profile_integral(profile, params, point, 16)?;
            let fine = profile_integral(profile, params, point, 24)?;
            Ok((*c, coarse, fine))
        })
        .collect::<Result<_>>()?;
    let mut value = 0.0;
    let mut error = 0.0;
    for (c, coarse, fine) in &parts {
        value += c * coarse.value;
        error += c * ((fine.value - coarse.value).abs() + coarse.error.max(fine.error));
    }
    if error > SMEAR_REL_TOL * value.abs() + f64::MIN_POSITIVE {
        return Err(Error::QuadratureNonConvergence { estimate: value, error, subdivisions: 0 });
    }
    Ok(SmearResult { value, error })
}

fn profile_integral(profile: &Profile, params: &ExpansionParams, point: &LocalPoint, n_radial: usize) -> Result<Integral> {
    let support = profile.support();
    let (px, py) = (point.x, point.y);
    let dist = px.hypot(py);
    let radial_rule = GaussLegendre::new(n_radial);
    let mut failure = None;

    let mut ray = |alpha: f64| -> f64 {
        let (ex, ey) = (alpha.cos(), alpha.sin());
        let b = px * ex + py * ey;
        let disc = b * b - (dist * dist - support * support);
        if disc <= 0.0 {
            return 0.0;
        }
        let root = disc.sqrt();
        let s_hi = -b + root;
        let s_lo = (-b - root).max(0.0);
        if s_hi <= s_lo {
            return 0.0;
        }
        let breaks = radial_breaks(s_lo, s_hi);
        let mut terms = Vec::with_capacity(breaks.len() * n_radial);
        for seg in breaks.windows(2) {
            for (s, w) in radial_rule.mapped(seg[0], seg[1]) {
                let (xi_x, xi_y) = (px + s * ex, py + s * ey);
                let mu = profile.value(xi_x.hypot(xi_y));
                if mu == 0.0 {
                    continue;
                }
                let shifted = LocalPoint::new(point.x - xi_x, point.y - xi_y, point.z);
                match psi_singular(&shifted, params) {
                    Ok(b) => terms.push(w * s * mu * b.total),
                    Err(e) => {
                        failure.get_or_insert(e);
                        return 0.0;
                    }
                }
            }
        }
        pairwise_sum(&terms)
    };

    let opts = AdaptiveOptions { abs_tol: 0.0, rel_tol: ANGULAR_REL_TOL, max_subdivisions: 2_000, initial_panels: 1 };
    let outward = if dist > 0.0 { py.atan2(px) } else { 0.0 };
    let result = if dist <= support {
        // near the edge the ray length changes abruptly around the two
        // tangent directions, so those are breakpoints
        let breaks: Vec<f64> = (0..=4).map(|k| outward - 0.5 * PI + 0.5 * PI * k as f64).collect();
        adaptive_gauss_kronrod_on(&mut ray, &breaks, &opts)
    } else {
        // cone towards the disc; α = α0 + β sin τ removes the endpoint
        // square-root behaviour of the chord length
        let beta = (support / dist).asin();
        let inward = outward + PI;
        adaptive_gauss_kronrod_on(
            |tau: f64| beta * tau.cos() * ray(inward + beta * tau.sin()),
            &[-0.5 * PI, 0.0, 0.5 * PI],
            &opts,
        )
    };
    match failure {
        Some(e) => Err(e),
        None => result,
    }
}

/// Uniform panels on the outer part of the ray, graded geometrically
/// towards the evaluation point at `s = 0` when the ray passes close to it.
fn radial_breaks(s_lo: f64, s_hi: f64) -> Vec<f64> {
    const OUTER: usize = 8;
    const LEVELS: i32 = 24;
    let len = s_hi - s_lo;
    let inner = len / OUTER as f64;
    let mut breaks = vec![s_lo];
    if s_lo == 0.0 {
        breaks.extend((0..LEVELS).rev().map(|k| inner * 0.5f64.powi(k + 1)));
    } else {
        // panel lengths comparable to the distance from the singularity
        let mut s = 2.0 * s_lo;
        while s < s_lo + inner {
            breaks.push(s);
            s *= 2.0;
        }
    }
    breaks.extend((1..=OUTER).map(|k| s_lo + len * k as f64 / OUTER as f64));
    breaks
}

/// Fit `ψ(origin; w) ≈ a/w + b ln w + c` over a sweep of core widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCutoffFit {
    pub widths: Vec<f64>,
    pub values: Vec<f64>,
    pub inv_w: f64,
    pub log: f64,
    pub constant: f64,
}

pub fn log_cutoff_fit(params: &ExpansionParams, widths: &[f64]) -> Result<LogCutoffFit> {
    if widths.len() < 4 {
        return Err(Error::IllConditionedFit(format!("{} widths, at least 4 needed", widths.len())));
    }
    let origin = LocalPoint::new(0.0, 0.0, 0.0);
    let values: Vec<f64> = widths
        .iter()
        .map(|&w| Ok(smeared_potential(&SmearDensity::gaussian(w)?, params, &origin)?.value))
        .collect::<Result<_>>()?;
    // scale the columns to comparable size before solving
    let w_min = widths.iter().cloned().fold(f64::INFINITY, f64::min);
    let log_scale = widths.iter().map(|w| w.ln().abs()).fold(0.0, f64::max).max(1.0);
    let rows: Vec<Vec<f64>> = widths.iter().map(|&w| vec![w_min / w, w.ln() / log_scale, 1.0]).collect();
    let coef = least_squares(&rows, &values)
        .ok_or_else(|| Error::IllConditionedFit("cutoff fit is singular".into()))?;
    Ok(LogCutoffFit {
        widths: widths.to_vec(),
        values,
        inv_w: coef[0] * w_min,
        log: coef[1] / log_scale,
        constant: coef[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::expansion::Charge;
    use crate::quadrature::{adaptive_gauss_kronrod, AdaptiveOptions};

    fn params(kx: f64, ky: f64) -> ExpansionParams {
        ExpansionParams::new(Charge::unit(), kx, ky, 1.0).unwrap()
    }

    #[test]
    fn densities_are_normalized() {
        for p in [Profile::Gaussian { w: 0.3 }, Profile::TopHat { w: 2.0 }] {
            assert!((p.integral() - 1.0).abs() < 1e-12, "{p:?}");
        }
        let mixed = SmearDensity::new(vec![(0.25, Profile::Gaussian { w: 0.1 }), (0.75, Profile::TopHat { w: 0.2 })]);
        assert!(mixed.is_ok());
        let bad = SmearDensity::new(vec![(0.5, Profile::Gaussian { w: 0.1 })]);
        assert!(matches!(bad, Err(Error::NonNormalizedDensity { .. })));
        assert!(SmearDensity::gaussian(0.0).is_err());
    }

    #[test]
    fn planar_origin_matches_radial_oracle() {
        // independent 1-D radial integral of the Gaussian against 1/s
        let w = 0.02;
        let opts = AdaptiveOptions { abs_tol: 1e-16, rel_tol: 1e-14, ..Default::default() };
        let inner = adaptive_gauss_kronrod(|s| (-0.5 * (s / w).powi(2)).exp() / (w * w), 0.0, 8.0 * w, &opts)
            .unwrap()
            .value;
        let oracle = inner / (2.0 * PI);
        assert!((inner - (PI / 2.0).sqrt() / w).abs() < 1e-10 * inner);
        let prm = params(0.0, 0.0);
        let v = smeared_potential(&SmearDensity::gaussian(w).unwrap(), &prm, &LocalPoint::new(0.0, 0.0, 0.0)).unwrap();
        assert!((v.value - oracle).abs() < 1e-10 * oracle, "{} vs {oracle}", v.value);
    }

    #[test]
    fn far_field_approaches_point_formula() {
        let prm = params(1.0, 0.4);
        let w = 1e-3;
        let density = SmearDensity::gaussian(w).unwrap();
        for (r, theta, phi) in [(0.05, 2.5, 0.3), (1e-2, 1.8, 1.0), (0.1, 3.0, -0.5)] {
            let p = LocalPoint::from_spherical(r, theta, phi);
            let smeared = smeared_potential(&density, &prm, &p).unwrap().value;
            let point = psi_singular(&p, &prm).unwrap().total;
            assert!((smeared - point).abs() < 1e-2 * point.abs(), "{smeared} vs {point}");
        }
    }

    /// Complete elliptic integrals `(K(k), E(k))` by the AGM.
    fn elliptic_ke(k: f64) -> (f64, f64) {
        let (mut a, mut b, mut c) = (1.0, (1.0 - k * k).sqrt(), k);
        let mut sum = 0.5 * c * c;
        let mut pow = 0.5;
        for _ in 0..40 {
            c = 0.5 * (a - b);
            let next = 0.5 * (a + b);
            b = (a * b).sqrt();
            a = next;
            pow *= 2.0;
            sum += pow * c * c;
        }
        let kk = PI / (2.0 * a);
        (kk, kk * (1.0 - sum))
    }

    #[test]
    fn top_hat_in_its_own_plane_matches_elliptic_oracle() {
        // ∫ dA/|x - ξ| over a unit-density disc of radius a, evaluated in the plane
        let a = 0.05;
        let disc = |rho: f64| {
            if rho < a {
                4.0 * a * elliptic_ke(rho / a).1
            } else {
                let (kk, ee) = elliptic_ke(a / rho);
                4.0 * rho * (ee - (1.0 - (a / rho).powi(2)) * kk)
            }
        };
        let density = SmearDensity::top_hat(a).unwrap();
        let prm = params(0.0, 0.0);
        for rho in [0.0, 0.02, 0.0499, 0.04999, 0.05001, 0.0501, 0.08] {
            let p = LocalPoint::new(0.6 * rho, -0.8 * rho, 0.0);
            let v = smeared_potential(&density, &prm, &p).unwrap();
            let oracle = disc(rho) / (2.0 * PI * PI * a * a);
            assert!((v.value - oracle).abs() < 1e-9 * oracle, "rho {rho}: {} vs {oracle}", v.value);
        }
    }

    #[test]
    fn smearing_is_linear_in_density() {
        let prm = params(1.0, -0.3);
        let (g, t) = (Profile::Gaussian { w: 0.01 }, Profile::TopHat { w: 0.03 });
        let p = LocalPoint::new(0.004, -0.01, -0.002);
        let mixed = SmearDensity::new(vec![(0.3, g), (0.7, t)]).unwrap();
        let vg = smeared_potential(&SmearDensity::new(vec![(1.0, g)]).unwrap(), &prm, &p).unwrap().value;
        let vt = smeared_potential(&SmearDensity::new(vec![(1.0, t)]).unwrap(), &prm, &p).unwrap().value;
        let vm = smeared_potential(&mixed, &prm, &p).unwrap().value;
        assert!((vm - (0.3 * vg + 0.7 * vt)).abs() < 1e-12 * vm.abs());
    }

    #[test]
    fn log_cutoff_coefficient_is_k_plus() {
        let prm = params(1.0, 1.0);
        let widths: Vec<f64> = (0..7).map(|i| 1e-4 * 10f64.powf(i as f64 * 0.5)).collect();
        let fit = log_cutoff_fit(&prm, &widths).unwrap();
        assert!((fit.log - prm.k_plus).abs() < 0.05 * prm.k_plus, "{} vs {}", fit.log, prm.k_plus);
        let expected_inv = (PI / 2.0).sqrt() / (2.0 * PI);
        assert!((fit.inv_w - expected_inv).abs() < 1e-6 * expected_inv);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn superposition_holds(
            w1 in 0.005..0.05f64, w2 in 0.005..0.05f64, c in 0.0..1.0f64,
            x in -0.05..0.05f64, y in -0.05..0.05f64, z in -0.05..0.0f64,
        ) {
            let prm = params(1.0, 0.2);
            let p = LocalPoint::new(x, y, z);
            let (g, t) = (Profile::Gaussian { w: w1 }, Profile::TopHat { w: w2 });
            let one = |prof: Profile| smeared_potential(&SmearDensity::new(vec![(1.0, prof)]).unwrap(), &prm, &p).unwrap().value;
            let mixed = smeared_potential(&SmearDensity::new(vec![(c, g), (1.0 - c, t)]).unwrap(), &prm, &p).unwrap().value;
            let sum = c * one(g) + (1.0 - c) * one(t);
            prop_assert!((mixed - sum).abs() <= 1e-12 * sum.abs());
        }
    }
}
