//! Finite-rank kernels built from polynomial-times-Gaussian profiles.

use crate::error::{Error, Result};

/// `v(p) = sum_t c_t p^e_t * exp(-|p - center|^2 / (2 width^2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteComponent {
    pub terms: Vec<(f64, [u32; 3])>,
    pub center: [f64; 3],
    pub width: f64,
}

impl FiniteComponent {
    pub fn new(terms: Vec<(f64, [u32; 3])>, center: [f64; 3], width: f64) -> Result<Self> {
        let c = Self { terms, center, width };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Domain("finite-kernel width must be positive".into()));
        }
        if self.terms.iter().any(|(c, _)| !c.is_finite()) || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("finite-kernel coefficient"));
        }
        Ok(())
    }

    fn exponent(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|a| (p[a] - self.center[a]).powi(2)).sum::<f64>() / (2.0 * self.width * self.width)
    }

    fn poly(&self, p: [f64; 3]) -> f64 {
        self.terms.iter().map(|(c, e)| c * (0..3).map(|a| p[a].powi(e[a] as i32)).product::<f64>()).sum()
    }

    fn poly_derivative(&self, p: [f64; 3], axis: usize) -> f64 {
        self.terms
            .iter()
            .filter(|(_, e)| e[axis] > 0)
            .map(|(c, e)| {
                let mut v = c * e[axis] as f64;
                for a in 0..3 {
                    let k = if a == axis { e[a] - 1 } else { e[a] };
                    v *= p[a].powi(k as i32);
                }
                v
            })
            .sum()
    }
}

/// `K(p,q) = sum_j u_j(p) u_j(q)` with `u_j = v_j / sqrt(sum_l v_l^2)`, so `K(p,p) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteKernel {
    components: Vec<FiniteComponent>,
}

impl FiniteKernel {
    pub fn new(components: Vec<FiniteComponent>) -> Result<Self> {
        let k = Self { components };
        k.validate()?;
        Ok(k)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Domain("finite kernel needs at least one component".into()));
        }
        self.components.iter().try_for_each(FiniteComponent::validate)
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[FiniteComponent] {
        &self.components
    }

    /// Raw values rescaled by a common positive factor, and their `axis` derivatives (same factor).
    fn scaled_raw(&self, p: [f64; 3], axis: Option<usize>) -> (Vec<f64>, Vec<f64>) {
        let e: Vec<f64> = self.components.iter().map(|c| c.exponent(p)).collect();
        let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);
        let mut v = Vec::with_capacity(e.len());
        let mut dv = Vec::with_capacity(e.len());
        for (c, ej) in self.components.iter().zip(&e) {
            let g = (e_min - ej).exp();
            let poly = c.poly(p);
            v.push(poly * g);
            if let Some(a) = axis {
                let slope = (p[a] - c.center[a]) / (c.width * c.width);
                dv.push((c.poly_derivative(p, a) - poly * slope) * g);
            }
        }
        (v, dv)
    }

    /// Normalized profiles `u_j(p)`.
    pub fn values(&self, p: [f64; 3]) -> Result<Vec<f64>> {
        let (v, _) = self.scaled_raw(p, None);
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("finite-kernel profiles vanish together at {p:?}")));
        }
        Ok(v.into_iter().map(|x| x / s).collect())
    }

    /// `u_j(p)` and `d u_j / d p_axis` in closed form.
    pub fn values_and_derivatives(&self, p: [f64; 3], axis: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let (v, dv) = self.scaled_raw(p, Some(axis));
        let s2: f64 = v.iter().map(|x| x * x).sum();
        let s = s2.sqrt();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("finite-kernel profiles vanish together at {p:?}")));
        }
        let vdv: f64 = v.iter().zip(&dv).map(|(a, b)| a * b).sum();
        let u = v.iter().map(|x| x / s).collect();
        let du = v.iter().zip(&dv).map(|(x, dx)| dx / s - x * vdv / (s2 * s)).collect();
        Ok((u, du))
    }

    pub fn kernel(&self, p: [f64; 3], q: [f64; 3]) -> Result<f64> {
        let a = self.values(p)?;
        let b = self.values(q)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
    }

    /// Closed-form `d_{q_a} d_{p_a} K(q,p)` on the diagonal, `sum_j (d_a u_j)^2`.
    pub fn kappa(&self, p: [f64; 3], axis: usize) -> Result<f64> {
        let (_, du) = self.values_and_derivatives(p, axis)?;
        Ok(du.iter().map(|d| d * d).sum())
    }
}
