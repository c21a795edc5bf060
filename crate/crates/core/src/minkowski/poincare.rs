//! Poincare group elements `x -> L x + y` and their action on surfaces and regions.

use crate::error::{Error, Result};

use super::region::Region;
use super::surface::{CauchySurfaceGraph, SurfaceFamily};
use super::vector::FourVector;

type Surface = CauchySurfaceGraph<f64>;
type Vec4 = FourVector<f64>;

/// Elementary transformations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform {
    Identity,
    Translation(Vec4),
    /// Boost along +x with the given rapidity: `t' = t cosh + x sinh`.
    BoostX(f64),
    /// Rotation about the z axis by the given angle.
    RotationZ(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareElement {
    /// Lorentz matrix acting on contravariant components.
    pub lambda: [[f64; 4]; 4],
    pub y: Vec4,
}

const IDENTITY: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];

fn mat_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_apply(a: &[[f64; 4]; 4], v: &Vec4) -> Vec4 {
    let x = v.to_array();
    let r = [0, 1, 2, 3].map(|i| (0..4).map(|k| a[i][k] * x[k]).sum::<f64>());
    Vec4::from_array(r)
}

impl Transform {
    fn element(self) -> PoincareElement {
        match self {
            Transform::Identity => PoincareElement::identity(),
            Transform::Translation(y) => PoincareElement { lambda: IDENTITY, y },
            Transform::BoostX(eta) => {
                let (c, s) = (eta.cosh(), eta.sinh());
                let mut l = IDENTITY;
                l[0][0] = c;
                l[0][1] = s;
                l[1][0] = s;
                l[1][1] = c;
                PoincareElement { lambda: l, y: Vec4::zero() }
            }
            Transform::RotationZ(a) => {
                let (c, s) = (a.cos(), a.sin());
                let mut l = IDENTITY;
                l[1][1] = c;
                l[1][2] = -s;
                l[2][1] = s;
                l[2][2] = c;
                PoincareElement { lambda: l, y: Vec4::zero() }
            }
        }
    }
}

impl PoincareElement {
    pub fn identity() -> Self {
        Self { lambda: IDENTITY, y: Vec4::zero() }
    }

    /// Composition applying the listed transforms in order (first entry acts first).
    pub fn from_list(list: &[Transform]) -> Self {
        list.iter().fold(Self::identity(), |acc, t| t.element().compose(&acc))
    }

    /// `self o other`: apply `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { lambda: mat_mul(&self.lambda, &other.lambda), y: mat_apply(&self.lambda, &other.y) + self.y }
    }

    /// Inverse Lorentz matrix `eta L^T eta`.
    pub fn lambda_inverse(&self) -> [[f64; 4]; 4] {
        let sign = |i: usize| if i == 0 { -1.0 } else { 1.0 };
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = sign(i) * self.lambda[j][i] * sign(j);
            }
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let li = self.lambda_inverse();
        Self { lambda: li, y: -mat_apply(&li, &self.y) }
    }

    pub fn apply_point(&self, x: &Vec4) -> Vec4 {
        mat_apply(&self.lambda, x) + self.y
    }

    /// Action on vectors (no translation).
    pub fn apply_vector(&self, v: &Vec4) -> Vec4 {
        mat_apply(&self.lambda, v)
    }

    pub fn apply_inverse_vector(&self, v: &Vec4) -> Vec4 {
        mat_apply(&self.lambda_inverse(), v)
    }

    pub fn is_identity(&self) -> bool {
        self.lambda == IDENTITY && self.y == Vec4::zero()
    }

    /// True when the Lorentz part is a spatial rotation.
    pub fn is_spatial(&self) -> bool {
        (self.lambda[0][0] - 1.0).abs() < 1e-14 && (1..4).all(|k| self.lambda[0][k].abs() < 1e-14 && self.lambda[k][0].abs() < 1e-14)
    }

    fn rotation(&self) -> [[f64; 3]; 3] {
        [0, 1, 2].map(|i| [0, 1, 2].map(|j| self.lambda[i + 1][j + 1]))
    }

    /// Image surface `h(S)` expressed in the same family.
    pub fn map_surface(&self, s: &Surface) -> Result<Surface> {
        match *s.family() {
            SurfaceFamily::Flat { t0, u } => {
                // hyperplane a.X = t0 with a = (1, -u) (Euclidean contraction)
                let a = [1.0, -u[0], -u[1], -u[2]];
                let li = self.lambda_inverse();
                let ap = [0, 1, 2, 3].map(|j| (0..4).map(|i| a[i] * li[i][j]).sum::<f64>());
                let liy = mat_apply(&li, &self.y).to_array();
                let rhs = t0 + (0..4).map(|i| a[i] * liy[i]).sum::<f64>();
                Surface::with_margin(
                    SurfaceFamily::Flat { t0: rhs / ap[0], u: [-ap[1] / ap[0], -ap[2] / ap[0], -ap[3] / ap[0]] },
                    s.margin(),
                )
            }
            fam => {
                if !self.is_spatial() {
                    return Err(Error::Unsupported("boosts of bump surfaces leave the supported families".into()));
                }
                let r = self.rotation();
                let rot = |v: [f64; 3]| super::region::mat_vec(&r, v);
                let ys = self.y.xs;
                let shift = |t0: f64, u: [f64; 3]| {
                    let ru = rot(u);
                    (t0 + self.y.x0 - (ru[0] * ys[0] + ru[1] * ys[1] + ru[2] * ys[2]), ru)
                };
                let moved = |c: [f64; 3]| {
                    let rc = rot(c);
                    [rc[0] + ys[0], rc[1] + ys[1], rc[2] + ys[2]]
                };
                let family = match fam {
                    SurfaceFamily::GaussianBump { t0, u, amplitude, center, width } => {
                        let (t0, u) = shift(t0, u);
                        SurfaceFamily::GaussianBump { t0, u, amplitude, center: moved(center), width }
                    }
                    SurfaceFamily::AnnularBump { t0, u, amplitude, center, inner, outer } => {
                        let (t0, u) = shift(t0, u);
                        SurfaceFamily::AnnularBump { t0, u, amplitude, center: moved(center), inner, outer }
                    }
                    SurfaceFamily::Flat { .. } => unreachable!(),
                };
                Surface::with_margin(family, s.margin())
            }
        }
    }

    /// Image of a region of `s` as a region in the chart of `h(S)`.
    pub fn map_region(&self, s: &Surface, region: &Region) -> Result<Region> {
        if self.is_identity() {
            return Ok(region.clone());
        }
        let l = &self.lambda;
        let linear = match *s.family() {
            SurfaceFamily::Flat { u, .. } => [0, 1, 2].map(|i| [0, 1, 2].map(|j| l[i + 1][j + 1] + l[i + 1][0] * u[j])),
            _ if self.is_spatial() => self.rotation(),
            _ => return Err(Error::Unsupported("boosts of bump surfaces leave the supported families".into())),
        };
        let (t0, _) = s.time_and_grad([0.0; 3]);
        let t0 = if s.is_flat() { t0 } else { 0.0 };
        let offset = [0, 1, 2].map(|i| l[i + 1][0] * t0 + self.y.xs[i]);
        match region {
            Region::All => Ok(Region::All),
            r => r.clone().image(linear, offset),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::region::Membership;
    use super::super::vector::mdot;
    use super::*;

    fn v(t: f64, x: f64, y: f64, z: f64) -> Vec4 {
        Vec4 { x0: t, xs: [x, y, z] }
    }

    #[test]
    fn lorentz_preserves_product() {
        let h = PoincareElement::from_list(&[Transform::BoostX(0.4), Transform::RotationZ(0.7), Transform::BoostX(-0.2)]);
        let a = v(1.3, 0.2, -0.5, 0.9);
        let b = v(-0.4, 1.1, 0.3, 0.2);
        let d = mdot(&h.apply_vector(&a), &h.apply_vector(&b)) - mdot(&a, &b);
        assert!(d.abs() < 1e-13);
    }

    #[test]
    fn inverse_round_trip() {
        let h = PoincareElement::from_list(&[
            Transform::Translation(v(0.3, 1.0, -2.0, 0.5)),
            Transform::BoostX(0.3),
            Transform::RotationZ(1.1),
        ]);
        let x = v(0.7, -0.1, 0.4, 2.0);
        let back = h.inverse().apply_point(&h.apply_point(&x));
        assert!((back - x).euclid_norm_sqr() < 1e-24);
    }

    #[test]
    fn list_order() {
        // translate then rotate: the translation is rotated too
        let h = PoincareElement::from_list(&[
            Transform::Translation(v(0.0, 1.0, 0.0, 0.0)),
            Transform::RotationZ(std::f64::consts::FRAC_PI_2),
        ]);
        let p = h.apply_point(&Vec4::zero());
        assert!((p.xs[0]).abs() < 1e-15 && (p.xs[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boosted_rest_slice_is_tilted() {
        let h = PoincareElement::from_list(&[Transform::BoostX(0.3)]);
        let s = h.map_surface(&Surface::slice(0.0)).unwrap();
        match *s.family() {
            SurfaceFamily::Flat { t0, u } => {
                assert!(t0.abs() < 1e-15);
                assert!((u[0] - 0.3f64.tanh()).abs() < 1e-15);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn mapped_surface_contains_mapped_points() {
        let h = PoincareElement::from_list(&[
            Transform::BoostX(-0.25),
            Transform::RotationZ(0.4),
            Transform::Translation(v(0.5, -1.0, 0.2, 0.3)),
        ]);
        let s = Surface::flat(0.2, [0.1, -0.3, 0.2]).unwrap();
        let hs = h.map_surface(&s).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [-3.0, 0.1, 2.0]] {
            let p = h.apply_point(&v(s.time(x), x[0], x[1], x[2]));
            assert!((hs.time(p.xs) - p.x0).abs() < 1e-12);
        }
        let hr = PoincareElement::from_list(&[Transform::RotationZ(0.9), Transform::Translation(v(0.3, 1.0, 0.0, -1.0))]);
        let b = Surface::gaussian_bump(0.1, [0.2, 0.0, 0.1], 0.3, [0.5, 0.5, 0.0], 1.0).unwrap();
        let hb = hr.map_surface(&b).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]] {
            let p = hr.apply_point(&v(b.time(x), x[0], x[1], x[2]));
            assert!((hb.time(p.xs) - p.x0).abs() < 1e-12);
        }
        assert!(h.map_surface(&b).is_err());
    }

    #[test]
    fn mapped_region_membership() {
        let h = PoincareElement::from_list(&[Transform::BoostX(0.3), Transform::Translation(v(0.1, 0.5, 0.0, 0.0))]);
        let s = Surface::slice(0.0);
        let ball = Region::ball([0.2, 0.0, 0.0], 1.0);
        let image = h.map_region(&s, &ball).unwrap();
        for x in [[0.9, 0.3, 0.0], [1.3, 0.0, 0.0], [-0.85, 0.0, 0.1], [0.0, 0.99, 0.0]] {
            let p = h.apply_point(&v(0.0, x[0], x[1], x[2]));
            assert_eq!(image.contains(p.xs), ball.contains(x));
        }
    }
}
