//! Four-vectors with signature (-,+,+,+).

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{Float, FloatConst, FromPrimitive};

use crate::error::{Error, Result};

/// Floating point type usable by the geometry layer.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A point or vector of Minkowski space in the global chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourVector<T> {
    pub x0: T,
    pub xs: [T; 3],
}

impl<T: Scalar> FourVector<T> {
    /// Checked constructor; rejects NaN and infinities.
    pub fn new(x0: T, xs: [T; 3]) -> Result<Self> {
        if !x0.is_finite() || xs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("four-vector component"));
        }
        Ok(Self { x0, xs })
    }

    pub fn zero() -> Self {
        Self { x0: T::zero(), xs: [T::zero(); 3] }
    }

    /// Unit vector along the time axis.
    pub fn time_unit() -> Self {
        Self { x0: T::one(), xs: [T::zero(); 3] }
    }

    /// Future mass-shell point over the spatial momentum `ps`.
    pub fn on_shell(ps: [T; 3], mass: T) -> Self {
        Self { x0: lift(ps, mass), xs: ps }
    }

    /// Component `mu` (0 is time).
    pub fn get(&self, mu: usize) -> T {
        if mu == 0 {
            self.x0
        } else {
            self.xs[mu - 1]
        }
    }

    pub fn to_array(self) -> [T; 4] {
        [self.x0, self.xs[0], self.xs[1], self.xs[2]]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self { x0: a[0], xs: [a[1], a[2], a[3]] }
    }

    /// Lowered components `eta_{mu nu} v^nu`.
    pub fn lowered(&self) -> [T; 4] {
        [-self.x0, self.xs[0], self.xs[1], self.xs[2]]
    }

    pub fn euclid_norm_sqr(&self) -> T {
        self.x0 * self.x0 + spatial_dot(self.xs, self.xs)
    }

    pub fn is_finite(&self) -> bool {
        self.x0.is_finite() && self.xs.iter().all(|c| c.is_finite())
    }

    pub fn cast<U: Scalar>(self) -> FourVector<U> {
        let c = |v: T| U::from(v).expect("cast between float types");
        FourVector { x0: c(self.x0), xs: [c(self.xs[0]), c(self.xs[1]), c(self.xs[2])] }
    }
}

impl<T: Scalar> Add for FourVector<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { x0: self.x0 + o.x0, xs: [self.xs[0] + o.xs[0], self.xs[1] + o.xs[1], self.xs[2] + o.xs[2]] }
    }
}

impl<T: Scalar> Sub for FourVector<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { x0: self.x0 - o.x0, xs: [self.xs[0] - o.xs[0], self.xs[1] - o.xs[1], self.xs[2] - o.xs[2]] }
    }
}

impl<T: Scalar> Neg for FourVector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { x0: -self.x0, xs: [-self.xs[0], -self.xs[1], -self.xs[2]] }
    }
}

// scalar multiple
impl<T: Scalar> Mul<T> for FourVector<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self { x0: self.x0 * s, xs: [self.xs[0] * s, self.xs[1] * s, self.xs[2] * s] }
    }
}

pub fn spatial_dot<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Energy on the future mass shell, `sqrt(|p|^2 + m^2)`.
pub fn lift<T: Scalar>(ps: [T; 3], mass: T) -> T {
    (spatial_dot(ps, ps) + mass * mass).sqrt()
}

/// Lorentzian product with signature (-,+,+,+).
pub fn mdot<T: Scalar>(a: &FourVector<T>, b: &FourVector<T>) -> T {
    -a.x0 * b.x0 + spatial_dot(a.xs, b.xs)
}

/// Causal character of a vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CausalClass {
    SpacelikeOrZero,
    TimelikeFuture,
    TimelikePast,
    LightlikeFuture,
    LightlikePast,
}

impl CausalClass {
    pub fn is_causal(self) -> bool {
        self != CausalClass::SpacelikeOrZero
    }

    pub fn is_future(self) -> bool {
        matches!(self, CausalClass::TimelikeFuture | CausalClass::LightlikeFuture)
    }
}

/// Default lightlike tolerance, relative to the Euclidean square norm.
pub const LIGHTLIKE_TOL: f64 = 1e-12;

pub fn causal_class<T: Scalar>(v: &FourVector<T>) -> CausalClass {
    causal_class_with_tol(v, T::lit(LIGHTLIKE_TOL))
}

pub fn causal_class_with_tol<T: Scalar>(v: &FourVector<T>, tol: T) -> CausalClass {
    let scale = v.euclid_norm_sqr();
    if scale == T::zero() {
        return CausalClass::SpacelikeOrZero;
    }
    let q = mdot(v, v);
    let future = v.x0 > T::zero();
    if q.abs() <= tol * scale {
        if future {
            CausalClass::LightlikeFuture
        } else {
            CausalClass::LightlikePast
        }
    } else if q < T::zero() {
        if future {
            CausalClass::TimelikeFuture
        } else {
            CausalClass::TimelikePast
        }
    } else {
        CausalClass::SpacelikeOrZero
    }
}

/// True iff `q` lies in the causal future or past of `p` (including `p = q`).
pub fn causally_related<T: Scalar>(p: &FourVector<T>, q: &FourVector<T>) -> bool {
    let d = *q - *p;
    mdot(&d, &d) <= T::zero()
}

/// Checks that `n` is a unit future-directed timelike vector.
pub fn check_unit_future<T: Scalar>(n: &FourVector<T>) -> Result<()> {
    let norm = mdot(n, n);
    if !n.is_finite() || n.x0 <= T::zero() || (norm + T::one()).abs() > T::lit(1e-10) {
        return Err(Error::InvalidFrame(format!(
            "expected a unit future timelike vector, got {:?}",
            n.cast::<f64>()
        )));
    }
    Ok(())
}

/// Unit future timelike vector with spatial part `ns`.
pub fn unit_future<T: Scalar>(ns: [T; 3]) -> FourVector<T> {
    FourVector { x0: (T::one() + spatial_dot(ns, ns)).sqrt(), xs: ns }
}
