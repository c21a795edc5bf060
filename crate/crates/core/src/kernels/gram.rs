//! Sample-based positivity certificates and the diagonal curvature `kappa`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub pass: bool,
}

/// Eigenvalues of a real symmetric `n x n` matrix (row-major) by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "matrix shape");
    let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off.sqrt() <= 1e-15 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Builds the Gram matrix `K(p_i, p_j)` on `sample` and certifies positive semidefiniteness:
/// pass iff `min_eig >= -tol * max(1, max_eig)`.
pub fn gram_psd_check<K>(kernel: K, sample: &[[f64; 3]], tol: f64) -> Result<GramReport>
where
    K: Fn([f64; 3], [f64; 3]) -> Complex64 + Sync,
{
    let n = sample.len();
    if n == 0 || n > 400 {
        return Err(Error::Domain(format!("Gram sample size must be in 1..=400, got {n}")));
    }
    let rows: Vec<Vec<Complex64>> = sample.par_iter().map(|p| sample.iter().map(|q| kernel(*p, *q)).collect()).collect();
    let scale = rows.iter().flatten().map(|v| v.norm()).fold(1.0f64, f64::max);
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = rows[i][j];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite("kernel value"));
            }
            asym = asym.max((v - rows[j][i].conj()).norm());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::KernelDefect { asymmetry: asym });
    }
    let complex = rows.iter().flatten().any(|v| v.im != 0.0);
    let eig = if complex {
        // [[A, -B], [B, A]] carries each eigenvalue twice
        let m = 2 * n;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let h = 0.5 * (rows[i][j] + rows[j][i].conj());
                a[i * m + j] = h.re;
                a[(i + n) * m + j + n] = h.re;
                a[i * m + j + n] = -h.im;
                a[(i + n) * m + j] = h.im;
            }
        }
        symmetric_eigenvalues(a, m)
    } else {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 0.5 * (rows[i][j].re + rows[j][i].re);
            }
        }
        symmetric_eigenvalues(a, n)
    };
    let min_eig = eig[0];
    let max_eig = *eig.last().expect("nonempty");
    Ok(GramReport { min_eig, max_eig, pass: min_eig >= -tol * max_eig.max(1.0) })
}

/// Midpoint box used to discretize the double integral of [`integral_positivity_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivityBox {
    pub center: [f64; 3],
    pub half_width: f64,
    pub nodes_per_axis: usize,
}

impl PositivityBox {
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        let n = self.nodes_per_axis;
        let h = 2.0 * self.half_width / n as f64;
        let ax = |c: f64, i: usize| c - self.half_width + (i as f64 + 0.5) * h;
        let mut out = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    out.push([ax(self.center[0], i), ax(self.center[1], j), ax(self.center[2], l)]);
                }
            }
        }
        out
    }

    pub fn cell_volume(&self) -> f64 {
        (2.0 * self.half_width / self.nodes_per_axis as f64).powi(3)
    }
}

/// Midpoint estimate of `int int conj(f(p)) K(p,q) f(q) d^3p d^3q` over `domain`, and `int |f|` on the same nodes.
pub fn integral_positivity_check<K, F>(kernel: K, f: F, domain: &PositivityBox) -> (f64, f64)
where
    K: Fn([f64; 3], [f64; 3]) -> Complex64 + Sync,
    F: Fn([f64; 3]) -> Complex64,
{
    let nodes = domain.nodes();
    let dv = domain.cell_volume();
    let vals: Vec<([f64; 3], Complex64)> =
        nodes.into_iter().map(|p| (p, f(p))).filter(|(_, v)| v.norm() != 0.0).collect();
    let l1 = vals.iter().map(|(_, v)| v.norm()).sum::<f64>() * dv;
    let rows: Vec<Complex64> = vals
        .par_iter()
        .map(|(p, fp)| fp.conj() * vals.iter().map(|(q, fq)| kernel(*p, *q) * fq).sum::<Complex64>())
        .collect();
    (rows.iter().sum::<Complex64>().re * dv * dv, l1)
}

/// `f_L(p) = sum_k c_k L^3 h(L (p - p_k))` with `h` a normalized smooth bump of radius 1.
pub fn mollifier_cluster(points: Vec<[f64; 3]>, coeffs: Vec<Complex64>, scale: f64) -> impl Fn([f64; 3]) -> Complex64 {
    // int_{|x|<1} exp(-1/(1-|x|^2)) d^3x
    const BUMP_MASS: f64 = 0.441_088_887_276_604_4;
    move |p| {
        points
            .iter()
            .zip(&coeffs)
            .map(|(c, w)| {
                let r2: f64 = (0..3).map(|a| (scale * (p[a] - c[a])).powi(2)).sum();
                if r2 >= 1.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    w * (scale.powi(3) * (-1.0 / (1.0 - r2)).exp() / BUMP_MASS)
                }
            })
            .sum()
    }
}

/// `d_{q_a} d_{p_a} K(q,p)` at `q = p` by central differences with step `1e-4 (1 + |p|)`.
pub fn kappa_eval<K: Fn([f64; 3], [f64; 3]) -> f64>(kernel: K, p: [f64; 3], axis: usize) -> f64 {
    let h = 1e-4 * (1.0 + (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
    kappa_eval_with_step(kernel, p, axis, h)
}

pub fn kappa_eval_with_step<K: Fn([f64; 3], [f64; 3]) -> f64>(kernel: K, p: [f64; 3], axis: usize, h: f64) -> f64 {
    let shift = |d: f64| {
        let mut q = p;
        q[axis] += d;
        q
    };
    let (plus, minus) = (shift(h), shift(-h));
    (kernel(plus, plus) - kernel(plus, minus) - kernel(minus, plus) + kernel(minus, minus)) / (4.0 * h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{t_kernel_fn, CausalKernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(seed: u64, n: usize) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [0, 1, 2].map(|_| rng.gen_range(-3.0..3.0))).collect()
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let e = symmetric_eigenvalues(a, 3);
        let want = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (x, y) in e.iter().zip(want) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn causal_kernel_passes() {
        let s = CausalKernelSpec::power_law(1.5, 1.0).unwrap();
        let k = t_kernel_fn(&s);
        let r = gram_psd_check(|p, q| k(p, q).into(), &sample(1, 100), 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_eig > 1.0);
    }

    #[test]
    fn constant_profile_fails_two_point_determinant() {
        let s = CausalKernelSpec::constant_one(1.0);
        let k = t_kernel_fn(&s);
        let pts = [[0.0; 3], [1.0, 0.0, 0.0]];
        let r = gram_psd_check(|p, q| k(p, q).into(), &pts, 1e-8).unwrap();
        let (e0, e1) = (1.0f64, 2f64.sqrt());
        let det = -(e0 - e1).powi(2) / (4.0 * e0 * e1);
        // eigenvalues of [[1, b], [b, 1]] are 1 -/+ b with b^2 = 1 - det
        assert!((r.min_eig - (1.0 - (1.0 - det).sqrt())).abs() < 1e-14);
        assert!(!r.pass);
    }

    #[test]
    fn rank_one_complex_gram() {
        let u = |p: [f64; 3]| Complex64::from_polar((-p[0] * p[0]).exp(), p[1] + 0.3 * p[2]);
        let r = gram_psd_check(|p, q| u(p).conj() * u(q), &sample(2, 30), 1e-8).unwrap();
        assert!(r.min_eig >= -1e-14, "{r:?}");
        assert!(r.pass);
    }

    #[test]
    fn asymmetric_kernel_is_a_defect() {
        let r = gram_psd_check(|p, q| (p[0] - 2.0 * q[0]).into(), &sample(3, 5), 1e-8);
        assert!(matches!(r, Err(Error::KernelDefect { .. })));
    }

    #[test]
    fn integral_check_agrees_with_gram() {
        let s = CausalKernelSpec::power_law(2.0, 1.0).unwrap();
        let k = t_kernel_fn(&s);
        let bx = PositivityBox { center: [0.0; 3], half_width: 2.0, nodes_per_axis: 8 };
        let f = |p: [f64; 3]| Complex64::from_polar((-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp(), p[0]);
        let (v, _) = integral_positivity_check(|p, q| k(p, q).into(), f, &bx);
        assert!(v >= -1e-9);
        let (zero, l1) = integral_positivity_check(|p, q| k(p, q).into(), |_| Complex64::new(0.0, 0.0), &bx);
        assert_eq!((zero, l1), (0.0, 0.0));
    }

    #[test]
    fn mollifier_limit_recovers_diagonal() {
        let s = CausalKernelSpec::power_law(1.5, 1.0).unwrap();
        let k = t_kernel_fn(&s);
        let p0 = [0.3, -0.2, 0.5];
        let f = mollifier_cluster(vec![p0], vec![Complex64::new(1.0, 0.0)], 100.0);
        let bx = PositivityBox { center: p0, half_width: 0.01, nodes_per_axis: 10 };
        let (v, l1) = integral_positivity_check(|p, q| k(p, q).into(), f, &bx);
        assert!((v / (l1 * l1) - 1.0).abs() < 1e-3);
        assert!((l1 - 1.0).abs() < 0.05);
    }

    #[test]
    fn kappa_oracles() {
        assert_eq!(kappa_eval(|_, _| 1.0, [0.2, 0.0, 0.0], 0), 0.0);
        let u = |p: [f64; 3]| 1.0 + p[0] + 0.5 * p[0] * p[0] * p[1];
        let p = [0.4, 0.7, 0.0];
        let du = 1.0 + p[0] * p[1];
        let fd = kappa_eval(|a, b| u(a) * u(b), p, 0);
        assert!((fd - du * du).abs() < 1e-6);
        let s = CausalKernelSpec::power_law(1.5, 1.0).unwrap();
        let k = t_kernel_fn(&s);
        let a = kappa_eval_with_step(&k, [0.0; 3], 0, 2e-3);
        let b = kappa_eval_with_step(&k, [0.0; 3], 0, 1e-3);
        assert!(a > 0.0 && ((a - b) / b).abs() < 1e-4, "{a} {b}");
    }
}
