//! Localization observables for massive Klein-Gordon wave packets on spacelike
//! Cauchy surfaces of Minkowski spacetime.
//!
//! Three families are covered: causal-kernel POVMs, stress-energy POVMs and the
//! Newton-Wigner PVM. Probabilities are computed by spatial quadrature of the
//! corresponding surface densities and always carry an error budget.
//!
//! Geometry and the pointwise kernel formulas are generic over the scalar type;
//! the numerical layers (states, quadrature, observables) work in `f64`.

pub mod currents;
pub mod error;
pub mod kernels;
pub mod minkowski;
pub mod observables;
pub mod quad;
pub mod states;
pub mod verify;

mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub type FourVector = minkowski::FourVector<f64>;
pub type FourVectorF32 = minkowski::FourVector<f32>;
pub type Surface = minkowski::CauchySurfaceGraph<f64>;
pub type SurfaceF32 = minkowski::CauchySurfaceGraph<f32>;
pub type SurfacePoint = minkowski::SurfacePoint<f64>;

pub use minkowski::{CausalClass, Region};
pub use observables::{ObservableSpec, ProbabilityEstimate};
pub use quad::QuadConfig;
pub use states::{MassShellGrid, MomentumState};



