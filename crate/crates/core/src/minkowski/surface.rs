//! Spacelike Cauchy surfaces given as graphs `x0 = t(x)`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

use super::vector::{spatial_dot, FourVector, Scalar};

/// Default spacelike margin: gradients must stay below `1 - margin`.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Analytic graph families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurfaceFamily<T> {
    /// `t0 + u.x`
    Flat { t0: T, u: [T; 3] },
    /// Flat plus `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    GaussianBump { t0: T, u: [T; 3], amplitude: T, center: [T; 3], width: T },
    /// Flat plus a smooth radial bump supported in the shell `inner <= |x - center| <= outer`.
    AnnularBump { t0: T, u: [T; 3], amplitude: T, center: [T; 3], inner: T, outer: T },
}

/// Geometry of a surface at one chart point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint<T> {
    pub t: T,
    pub grad: [T; 3],
    /// Future unit normal.
    pub n: FourVector<T>,
    /// `(1, grad t)`, the normal scaled so that `nu_S = density d^3x` pairs with it.
    pub v: FourVector<T>,
    /// `sqrt(1 - |grad t|^2)`.
    pub density: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CauchySurfaceGraph<T> {
    family: SurfaceFamily<T>,
    margin: T,
}

// Shell profile: exp(4 - 1/s - 1/(1-s)) on (0,1), zero outside. Peak value 1 at s = 1/2.
fn shell_profile(s: f64) -> (f64, f64) {
    if s <= 0.0 || s >= 1.0 {
        return (0.0, 0.0);
    }
    let b = (4.0 - 1.0 / s - 1.0 / (1.0 - s)).exp();
    (b, b * (1.0 / (s * s) - 1.0 / ((1.0 - s) * (1.0 - s))))
}

/// Largest |b'(s)| of the shell profile.
pub fn shell_profile_slope_max() -> f64 {
    static SLOPE: OnceLock<f64> = OnceLock::new();
    // b' is unimodal on each half; a fine scan is exact to ~1e-9 relative.
    *SLOPE.get_or_init(|| (1..200_000).map(|i| shell_profile(i as f64 / 200_000.0).1.abs()).fold(0.0, f64::max))
}

impl<T: Scalar> CauchySurfaceGraph<T> {
    pub fn new(family: SurfaceFamily<T>) -> Result<Self> {
        Self::with_margin(family, T::lit(DEFAULT_MARGIN))
    }

    pub fn with_margin(family: SurfaceFamily<T>, margin: T) -> Result<Self> {
        let finite = |vals: &[T]| vals.iter().all(|v| v.is_finite());
        let ok = match family {
            SurfaceFamily::Flat { t0, u } => finite(&[t0, u[0], u[1], u[2]]),
            SurfaceFamily::GaussianBump { t0, u, amplitude, center, width } => {
                finite(&[t0, u[0], u[1], u[2], amplitude, center[0], center[1], center[2], width])
                    && width > T::zero()
            }
            SurfaceFamily::AnnularBump { t0, u, amplitude, center, inner, outer } => {
                finite(&[t0, u[0], u[1], u[2], amplitude, center[0], center[1], center[2], inner, outer])
                    && inner >= T::zero()
                    && outer > inner
            }
        };
        if !ok || !(margin > T::zero() && margin < T::one()) {
            return Err(Error::Domain("surface parameters must be finite with positive widths".into()));
        }
        let s = Self { family, margin };
        let bound = s.gradient_bound();
        let limit = T::one() - margin;
        if !(bound < limit) {
            return Err(Error::NotSpacelike {
                bound: bound.to_f64().unwrap_or(f64::NAN),
                limit: limit.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(s)
    }

    pub fn flat(t0: T, u: [T; 3]) -> Result<Self> {
        Self::new(SurfaceFamily::Flat { t0, u })
    }

    /// The rest slice `x0 = t0`.
    pub fn slice(t0: T) -> Self {
        Self { family: SurfaceFamily::Flat { t0, u: [T::zero(); 3] }, margin: T::lit(DEFAULT_MARGIN) }
    }

    pub fn gaussian_bump(t0: T, u: [T; 3], amplitude: T, center: [T; 3], width: T) -> Result<Self> {
        Self::new(SurfaceFamily::GaussianBump { t0, u, amplitude, center, width })
    }

    pub fn annular_bump(t0: T, u: [T; 3], amplitude: T, center: [T; 3], inner: T, outer: T) -> Result<Self> {
        Self::new(SurfaceFamily::AnnularBump { t0, u, amplitude, center, inner, outer })
    }

    pub fn family(&self) -> &SurfaceFamily<T> {
        &self.family
    }

    pub fn margin(&self) -> T {
        self.margin
    }

    fn tilt(&self) -> (T, [T; 3]) {
        match self.family {
            SurfaceFamily::Flat { t0, u }
            | SurfaceFamily::GaussianBump { t0, u, .. }
            | SurfaceFamily::AnnularBump { t0, u, .. } => (t0, u),
        }
    }

    /// Closed-form upper bound on `|grad t|`.
    pub fn gradient_bound(&self) -> T {
        let (_, u) = self.tilt();
        let un = spatial_dot(u, u).sqrt();
        match self.family {
            SurfaceFamily::Flat { .. } => un,
            SurfaceFamily::GaussianBump { amplitude, width, .. } => {
                un + amplitude.abs() * T::lit((-0.5f64).exp()) / width
            }
            SurfaceFamily::AnnularBump { amplitude, inner, outer, .. } => {
                un + amplitude.abs() * T::lit(shell_profile_slope_max() * (1.0 + 1e-6)) / (outer - inner)
            }
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.family, SurfaceFamily::Flat { .. })
    }

    /// Flat with zero tilt, i.e. a rest slice of the chart.
    pub fn is_rest_slice(&self) -> bool {
        matches!(self.family, SurfaceFamily::Flat { u, .. } if u.iter().all(|c| *c == T::zero()))
    }

    pub fn time(&self, x: [T; 3]) -> T {
        self.time_and_grad(x).0
    }

    pub fn time_and_grad(&self, x: [T; 3]) -> (T, [T; 3]) {
        let (t0, u) = self.tilt();
        let base = t0 + spatial_dot(u, x);
        match self.family {
            SurfaceFamily::Flat { .. } => (base, u),
            SurfaceFamily::GaussianBump { amplitude, center, width, .. } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let w2 = width * width;
                let e = amplitude * (-spatial_dot(d, d) / (w2 + w2)).exp();
                (base + e, [u[0] - e * d[0] / w2, u[1] - e * d[1] / w2, u[2] - e * d[2] / w2])
            }
            SurfaceFamily::AnnularBump { amplitude, center, inner, outer, .. } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let r = spatial_dot(d, d).sqrt();
                let width = outer - inner;
                let s = ((r - inner) / width).to_f64().unwrap_or(f64::NAN);
                let (b, db) = shell_profile(s);
                if b == 0.0 {
                    return (base, u);
                }
                let val = amplitude * T::lit(b);
                let slope = amplitude * T::lit(db) / (width * r);
                (base + val, [u[0] + slope * d[0], u[1] + slope * d[1], u[2] + slope * d[2]])
            }
        }
    }

    pub fn eval(&self, x: [T; 3]) -> Result<SurfacePoint<T>> {
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("surface chart point"));
        }
        let (t, grad) = self.time_and_grad(x);
        let density = (T::one() - spatial_dot(grad, grad)).sqrt();
        let v = FourVector { x0: T::one(), xs: grad };
        Ok(SurfacePoint { t, grad, n: v * (T::one() / density), v, density })
    }

    /// Whether `t` of both surfaces coincides identically on the ball `|x - c| <= r`.
    /// Decided from the family parameters (exact, not sampled).
    pub fn agrees_on_ball(&self, other: &Self, c: [T; 3], r: T) -> bool {
        let (t0a, ua) = self.tilt();
        let (t0b, ub) = other.tilt();
        if t0a != t0b || ua != ub {
            return false;
        }
        let clear = |s: &Self| match s.family {
            SurfaceFamily::Flat { .. } => true,
            SurfaceFamily::GaussianBump { amplitude, .. } => amplitude == T::zero(),
            SurfaceFamily::AnnularBump { amplitude, center, inner, .. } => {
                let d = [c[0] - center[0], c[1] - center[1], c[2] - center[2]];
                amplitude == T::zero() || spatial_dot(d, d).sqrt() + r <= inner
            }
        };
        (clear(self) && clear(other)) || self == other
    }
}
