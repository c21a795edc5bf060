//! Minkowski geometry: vectors, causal classes, Cauchy surfaces, regions.

mod poincare;
mod region;
mod surface;
mod vector;

pub use poincare::{PoincareElement, Transform};
pub use region::{influence_membership, CellClass, InfluenceRegion, Membership, Region, RegionSampler};
pub use surface::{CauchySurfaceGraph, SurfaceFamily, SurfacePoint, DEFAULT_MARGIN};
pub use vector::{
    causal_class, causal_class_with_tol, causally_related, check_unit_future, lift, mdot, spatial_dot, unit_future,
    CausalClass, FourVector, Scalar, LIGHTLIKE_TOL,
};
