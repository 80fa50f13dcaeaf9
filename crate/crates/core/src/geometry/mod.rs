//! Charge-centred local frame, principal curvatures and local coordinates.

mod frame;
mod patch;
mod point;

pub use frame::{
    build_local_frame, cubic_remainder_constant, height_function, CubicBound, HeightSample,
    LocalFrame, NormalOrientation,
};
pub use patch::{
    derivative_consistency, finite_difference_derivatives, BuiltinSurface, Cylinder, Graph,
    Moved, NumericPatch, PatchDerivatives, RigidMotion, Sphere, SurfacePatch, Vec3,
};
pub use point::{Cylindrical, LocalPoint, Spherical};
