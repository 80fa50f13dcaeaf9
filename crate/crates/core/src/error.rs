use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("surface patch is degenerate at ({u}, {v}): |P_u x P_v| = {cross_norm:e}")]
    DegeneratePatch { u: f64, v: f64, cross_norm: f64 },

    #[error("non-finite surface derivative at ({u}, {v})")]
    NonFiniteDerivative { u: f64, v: f64 },

    #[error("bulk-side probe failed: neither normal orientation points into the bulk")]
    OrientationCheckFailed,

    #[error("tangent point ({x}, {y}) cannot be projected back onto the patch")]
    OutsidePatch { x: f64, y: f64 },

    #[error("angles are undefined at the origin")]
    OriginUndefinedAngle,

    #[error("evaluation point coincides with the charge")]
    AtCharge,

    #[error("evaluation point lies on the singular semi-axis (r - z = {r_minus_z:e})")]
    OnSingularAxis { r_minus_z: f64 },

    #[error("polar angle {theta:e} is inside the guard cone around the singular semi-axis")]
    NearSingularAxis { theta: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("boundary grid contains the origin")]
    GridContainsOrigin,

    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),

    #[error("finite-difference stencil leaves the domain z < 0 (z = {z}, h = {h})")]
    StencilLeavesDomain { z: f64, h: f64 },

    #[error("smearing density integrates to {integral}, expected {expected}")]
    NonNormalizedDensity { integral: f64, expected: f64 },

    #[error("sphere closed form failed its series validation (max deviation {max_deviation:e})")]
    OracleNotValidated { max_deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
