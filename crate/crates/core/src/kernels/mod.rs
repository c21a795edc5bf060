//! Causal kernels, the stress-energy kernel and their positivity and curvature diagnostics.
//!
//! Kernels acting on `L^2(R^3, d^3p)` have unit diagonal. Covariant kernels (measure `d^3p / p0`)
//! are mapped there by [`l2_from_covariant`] and by nothing else.

mod finite;
mod gram;

pub use finite::{FiniteComponent, FiniteKernel};
pub use gram::{
    gram_psd_check, integral_positivity_check, kappa_eval, kappa_eval_with_step, mollifier_cluster,
    symmetric_eigenvalues, GramReport, PositivityBox,
};

use crate::error::{Error, Result};
use crate::minkowski::{check_unit_future, mdot, spatial_dot, FourVector, Scalar};

/// Family of the scalar profile `g`.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelForm {
    /// `g(z) = (2m^2)^r / (m^2 + z)^r`, `r >= 3/2`.
    PowerLaw { r: f64 },
    /// `g(z) = ((1+c) m^2 / (c m^2 + z))^n`.
    ShiftedPower { c: f64, n: u32 },
    Convex { weights: Vec<f64>, parts: Vec<KernelForm> },
    /// `K(p,q) = sum_j u_j(p) u_j(q)` with `sum_j u_j^2 = 1`.
    Finite(FiniteKernel),
    /// `g = 1`. Not positive definite; kept as a negative control.
    ConstantOne,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CausalKernelSpec {
    pub form: KernelForm,
    pub mass: f64,
}

fn validate_form(form: &KernelForm, nested: bool) -> Result<()> {
    match form {
        KernelForm::PowerLaw { r } => {
            if !(r.is_finite() && *r >= 1.5) {
                return Err(Error::Domain(format!("power-law exponent must be at least 3/2, got {r}")));
            }
        }
        KernelForm::ShiftedPower { c, n } => {
            if !(*c > -1.0 && *c <= 1.0) || *n < 2 {
                return Err(Error::Domain(format!("shifted power needs -1 < c <= 1 and n > 1, got c={c}, n={n}")));
            }
        }
        KernelForm::Convex { weights, parts } => {
            if weights.len() != parts.len() || parts.is_empty() {
                return Err(Error::Domain("convex combination needs one weight per part".into()));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::Domain("convex weights must be nonnegative and sum to 1".into()));
            }
            for p in parts {
                validate_form(p, true)?;
            }
        }
        KernelForm::Finite(_) | KernelForm::ConstantOne if nested => {
            return Err(Error::Domain("convex parts must be g-profiles".into()));
        }
        KernelForm::Finite(f) => f.validate()?,
        KernelForm::ConstantOne => {}
    }
    Ok(())
}

impl CausalKernelSpec {
    pub fn new(form: KernelForm, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        validate_form(&form, false)?;
        Ok(Self { form, mass })
    }

    pub fn power_law(r: f64, mass: f64) -> Result<Self> {
        Self::new(KernelForm::PowerLaw { r }, mass)
    }

    pub fn shifted_power(c: f64, n: u32, mass: f64) -> Result<Self> {
        Self::new(KernelForm::ShiftedPower { c, n }, mass)
    }

    pub fn convex(weights: Vec<f64>, parts: Vec<KernelForm>, mass: f64) -> Result<Self> {
        Self::new(KernelForm::Convex { weights, parts }, mass)
    }

    pub fn finite(kernel: FiniteKernel, mass: f64) -> Result<Self> {
        Self::new(KernelForm::Finite(kernel), mass)
    }

    pub fn constant_one(mass: f64) -> Self {
        Self { form: KernelForm::ConstantOne, mass }
    }

    pub fn is_finite_rank(&self) -> bool {
        matches!(self.form, KernelForm::Finite(_))
    }

    pub fn finite_kernel(&self) -> Option<&FiniteKernel> {
        match &self.form {
            KernelForm::Finite(f) => Some(f),
            _ => None,
        }
    }

    /// Precompiled `g` for hot loops. `None` for finite-rank kernels.
    pub fn profile(&self) -> Option<GProfile> {
        GProfile::compile(&self.form, self.mass)
    }
}

/// Fast evaluator of `g`; no domain checks.
#[derive(Clone, Debug)]
pub struct GProfile {
    m2: f64,
    terms: Vec<(f64, GTerm)>,
}

#[derive(Clone, Debug)]
enum GTerm {
    Power { whole: i32, half: bool, r: f64 },
    Shifted { c: f64, n: i32 },
    One,
}

impl GProfile {
    fn compile(form: &KernelForm, mass: f64) -> Option<Self> {
        let mut terms = Vec::new();
        fn push(form: &KernelForm, w: f64, out: &mut Vec<(f64, GTerm)>) -> bool {
            match form {
                KernelForm::PowerLaw { r } => {
                    let twice = 2.0 * r;
                    let term = if twice == twice.round() && twice < 200.0 {
                        GTerm::Power { whole: r.floor() as i32, half: twice.round() as i64 % 2 == 1, r: *r }
                    } else {
                        GTerm::Power { whole: -1, half: false, r: *r }
                    };
                    out.push((w, term));
                }
                KernelForm::ShiftedPower { c, n } => out.push((w, GTerm::Shifted { c: *c, n: *n as i32 })),
                KernelForm::Convex { weights, parts } => {
                    for (wi, p) in weights.iter().zip(parts) {
                        if !push(p, w * wi, out) {
                            return false;
                        }
                    }
                }
                KernelForm::ConstantOne => out.push((w, GTerm::One)),
                KernelForm::Finite(_) => return false,
            }
            true
        }
        push(form, 1.0, &mut terms).then_some(Self { m2: mass * mass, terms })
    }

    /// `g(z)` for `z >= m^2`.
    pub fn eval(&self, z: f64) -> f64 {
        let m2 = self.m2;
        self.terms
            .iter()
            .map(|(w, t)| {
                w * match *t {
                    GTerm::Power { whole, half, r } => {
                        let base = 2.0 * m2 / (m2 + z);
                        if whole < 0 {
                            base.powf(r)
                        } else {
                            let v = base.powi(whole);
                            if half {
                                v * base.sqrt()
                            } else {
                                v
                            }
                        }
                    }
                    GTerm::Shifted { c, n } => ((1.0 + c) * m2 / (c * m2 + z)).powi(n),
                    GTerm::One => 1.0,
                }
            })
            .sum()
    }
}

/// Generic `g(z)` with the domain check `z >= m^2`.
pub fn g_eval<T: Scalar>(spec: &CausalKernelSpec, z: T) -> Result<T> {
    let m2 = T::lit(spec.mass * spec.mass);
    if !z.is_finite() {
        return Err(Error::NonFinite("g argument"));
    }
    if z < m2 * (T::one() - T::lit(1e-12)) {
        return Err(Error::Domain(format!("g is defined for z >= m^2, got {:?}", z)));
    }
    g_form(&spec.form, m2, z)
}

fn g_form<T: Scalar>(form: &KernelForm, m2: T, z: T) -> Result<T> {
    Ok(match form {
        KernelForm::PowerLaw { r } => (T::lit(2.0) * m2 / (m2 + z)).powf(T::lit(*r)),
        KernelForm::ShiftedPower { c, n } => {
            let c = T::lit(*c);
            ((T::one() + c) * m2 / (c * m2 + z)).powi(*n as i32)
        }
        KernelForm::Convex { weights, parts } => {
            let mut acc = T::zero();
            for (w, p) in weights.iter().zip(parts) {
                acc = acc + T::lit(*w) * g_form(p, m2, z)?;
            }
            acc
        }
        KernelForm::ConstantOne => T::one(),
        KernelForm::Finite(_) => return Err(Error::Unsupported("finite-rank kernels have no g profile".into())),
    })
}

/// Shell tolerance scaled to the working precision.
fn shell_tol<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Rejects `k` unless it is future directed and `k.k = -m^2` to relative tolerance.
pub fn check_on_shell<T: Scalar>(k: &FourVector<T>, mass: T) -> Result<()> {
    let residual = (mdot(k, k) + mass * mass).abs() / (k.x0 * k.x0).max(T::one());
    if !k.is_finite() || k.x0 <= T::zero() || residual > shell_tol() {
        return Err(Error::OffShell { residual: residual.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(())
}

/// `-(k.p)` for on-shell `k, p`, arranged so that it equals `m^2` exactly when `k = p`.
pub fn invariant_z<T: Scalar>(k: &FourVector<T>, p: &FourVector<T>, mass: T) -> T {
    let d = [k.xs[0] - p.xs[0], k.xs[1] - p.xs[1], k.xs[2] - p.xs[2]];
    let d0 = (spatial_dot(k.xs, k.xs) - spatial_dot(p.xs, p.xs)) / (k.x0 + p.x0);
    mass * mass + T::lit(0.5) * (spatial_dot(d, d) - d0 * d0)
}

/// Map a covariant kernel value to the `L^2(R^3, d^3p)` convention.
pub fn l2_from_covariant<T: Scalar>(value: T, q0: T, p0: T) -> T {
    value / (q0 * p0).sqrt()
}

/// `K_{T^g}` in the `L^2` convention: `(k0 + p0) g(-k.p) / (2 sqrt(k0 p0))`.
pub fn kernel_t<T: Scalar>(spec: &CausalKernelSpec, k: &FourVector<T>, p: &FourVector<T>) -> Result<T> {
    let m = T::lit(spec.mass);
    check_on_shell(k, m)?;
    check_on_shell(p, m)?;
    if let KernelForm::Finite(f) = &spec.form {
        let v = f.kernel(k.xs.map(|c| c.to_f64().unwrap()), p.xs.map(|c| c.to_f64().unwrap()))?;
        return Ok(T::lit(v));
    }
    let g = g_eval(spec, invariant_z(k, p, m).max(m * m))?;
    Ok(l2_from_covariant((k.x0 + p.x0) * T::lit(0.5) * g, k.x0, p.x0))
}

/// `j_g(k,p) = (k + p) g(-k.p) / 2`.
pub fn current_j<T: Scalar>(spec: &CausalKernelSpec, k: &FourVector<T>, p: &FourVector<T>) -> Result<FourVector<T>> {
    let m = T::lit(spec.mass);
    check_on_shell(k, m)?;
    check_on_shell(p, m)?;
    let g = g_eval(spec, invariant_z(k, p, m).max(m * m))?;
    Ok((*k + *p) * (T::lit(0.5) * g))
}

/// Energy of `p` in the frame `n`.
pub fn frame_energy<T: Scalar>(n: &FourVector<T>, p: &FourVector<T>) -> T {
    -mdot(n, p)
}

struct MParts<T> {
    en: (T, T),
    es: (T, T),
    numerator: T,
}

fn m_parts<T: Scalar>(
    mass: T,
    n: &FourVector<T>,
    n_sigma: &FourVector<T>,
    q: &FourVector<T>,
    p: &FourVector<T>,
) -> Result<MParts<T>> {
    check_unit_future(n)?;
    check_unit_future(n_sigma)?;
    check_on_shell(q, mass)?;
    check_on_shell(p, mass)?;
    let en = (frame_energy(n, q), frame_energy(n, p));
    let es = (frame_energy(n_sigma, q), frame_energy(n_sigma, p));
    // p.q + m^2 = m^2 - z
    let pq_plus_m2 = mass * mass - invariant_z(q, p, mass);
    let numerator = en.1 * es.0 + en.0 * es.1 - mdot(n, n_sigma) * pq_plus_m2;
    Ok(MParts { en, es, numerator })
}

/// Stress-energy kernel as printed in the momentum form: `numerator / (2 sqrt(E_n(q) E_n(p)))`.
/// Its reference measure is `d^3p / E_{n_sigma}(p)`.
pub fn kernel_m_covariant<T: Scalar>(
    mass: T,
    n: &FourVector<T>,
    n_sigma: &FourVector<T>,
    q: &FourVector<T>,
    p: &FourVector<T>,
) -> Result<T> {
    let m = m_parts(mass, n, n_sigma, q, p)?;
    Ok(m.numerator / (T::lit(2.0) * (m.en.0 * m.en.1).sqrt()))
}

/// Stress-energy kernel in the `L^2` convention of the frame `n_sigma`; unit diagonal.
pub fn kernel_m<T: Scalar>(
    mass: T,
    n: &FourVector<T>,
    n_sigma: &FourVector<T>,
    q: &FourVector<T>,
    p: &FourVector<T>,
) -> Result<T> {
    let m = m_parts(mass, n, n_sigma, q, p)?;
    let cov = m.numerator / (T::lit(2.0) * (m.en.0 * m.en.1).sqrt());
    Ok(l2_from_covariant(cov, m.es.0, m.es.1))
}

/// Variant with denominator `2 (q.n)(p.n)`. Agrees with [`kernel_m`] only when `n = n_sigma`.
pub fn kernel_m_product_form<T: Scalar>(
    mass: T,
    n: &FourVector<T>,
    n_sigma: &FourVector<T>,
    q: &FourVector<T>,
    p: &FourVector<T>,
) -> Result<T> {
    let m = m_parts(mass, n, n_sigma, q, p)?;
    Ok(m.numerator / (T::lit(2.0) * m.en.0 * m.en.1))
}

/// Matrix element of the operator composition that deforms the Newton-Wigner PVM of `n_sigma`
/// into the stress-energy POVM of `n`, built from multiplication operators only.
pub fn mpovm_operator_kernel<T: Scalar>(
    mass: T,
    n: &FourVector<T>,
    n_sigma: &FourVector<T>,
    q: &FourVector<T>,
    p: &FourVector<T>,
) -> Result<T> {
    let m = m_parts(mass, n, n_sigma, q, p)?;
    let aq = (m.es.0 / m.en.0).sqrt();
    let ap = (m.es.1 / m.en.1).sqrt();
    let pq_plus_m2 = mass * mass - invariant_z(q, p, mass);
    let half = T::lit(0.5);
    Ok(half * (ap / aq + aq / ap) - mdot(n, n_sigma) * half * ap * aq * pq_plus_m2 / (m.es.0 * m.es.1))
}

/// `K_{T^g}` as a function of spatial momenta.
pub fn t_kernel_fn(spec: &CausalKernelSpec) -> impl Fn([f64; 3], [f64; 3]) -> f64 + Sync + '_ {
    move |p, q| {
        let m = spec.mass;
        kernel_t(spec, &FourVector::on_shell(p, m), &FourVector::on_shell(q, m)).expect("on-shell by construction")
    }
}

/// `K_{M^n}` (frame `n_sigma` convention) as a function of spatial momenta.
pub fn m_kernel_fn(
    mass: f64,
    n: FourVector<f64>,
    n_sigma: FourVector<f64>,
) -> Result<impl Fn([f64; 3], [f64; 3]) -> f64 + Sync> {
    check_unit_future(&n)?;
    check_unit_future(&n_sigma)?;
    Ok(move |p, q| {
        kernel_m(mass, &n, &n_sigma, &FourVector::on_shell(p, mass), &FourVector::on_shell(q, mass))
            .expect("validated frames")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::unit_future;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn specs() -> Vec<CausalKernelSpec> {
        vec![
            CausalKernelSpec::power_law(1.5, 1.0).unwrap(),
            CausalKernelSpec::power_law(2.0, 1.0).unwrap(),
            CausalKernelSpec::power_law(3.0, 1.0).unwrap(),
            CausalKernelSpec::power_law(2.3, 1.0).unwrap(),
            CausalKernelSpec::shifted_power(1.0, 2, 1.0).unwrap(),
            CausalKernelSpec::shifted_power(-0.5, 3, 1.0).unwrap(),
            CausalKernelSpec::convex(
                vec![0.5, 0.5],
                vec![KernelForm::PowerLaw { r: 1.5 }, KernelForm::PowerLaw { r: 3.0 }],
                1.0,
            )
            .unwrap(),
        ]
    }

    fn random_shell(rng: &mut ChaCha8Rng, m: f64) -> FourVector<f64> {
        FourVector::on_shell([0, 1, 2].map(|_| rng.gen_range(-3.0..3.0)), m)
    }

    #[test]
    fn g_normalization_and_values() {
        for s in specs() {
            assert!((g_eval(&s, 1.0f64).unwrap() - 1.0).abs() < 1e-12);
            assert!((s.profile().unwrap().eval(1.0) - 1.0).abs() < 1e-12);
        }
        let s = CausalKernelSpec::power_law(2.0, 1.0).unwrap();
        assert!((g_eval(&s, 3.0f64).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(g_eval(&s, 0.5), Err(Error::Domain(_))));
        let m = CausalKernelSpec::power_law(1.5, 2.0).unwrap();
        assert!((g_eval(&m, 4.0f32).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(CausalKernelSpec::power_law(1.2, 1.0).is_err());
        assert!(CausalKernelSpec::shifted_power(-1.0, 2, 1.0).is_err());
        assert!(CausalKernelSpec::shifted_power(0.5, 1, 1.0).is_err());
        assert!(CausalKernelSpec::convex(vec![0.5, 0.6], vec![KernelForm::PowerLaw { r: 2.0 }; 2], 1.0).is_err());
        assert!(CausalKernelSpec::convex(vec![1.0], vec![KernelForm::ConstantOne], 1.0).is_err());
    }

    #[test]
    fn g_is_monotone_and_fast_path_agrees() {
        let mut zs: Vec<f64> = (0..200).map(|i| 1.0 + 0.173 * i as f64 * (1.0 + 0.01 * i as f64)).collect();
        zs.sort_by(f64::total_cmp);
        for s in specs() {
            let prof = s.profile().unwrap();
            let vals: Vec<f64> = zs.iter().map(|z| g_eval(&s, *z).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0]));
            for (z, v) in zs.iter().zip(&vals) {
                assert!((prof.eval(*z) - v).abs() <= 1e-14 * v.max(1e-300) + 1e-300);
            }
        }
    }

    #[test]
    fn kernel_t_diagonal_symmetry_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in specs() {
            for _ in 0..200 {
                let k = random_shell(&mut rng, 1.0);
                let p = random_shell(&mut rng, 1.0);
                assert_eq!(kernel_t(&s, &k, &k).unwrap(), 1.0);
                assert_eq!(kernel_t(&s, &k, &p).unwrap(), kernel_t(&s, &p, &k).unwrap());
                if matches!(s.form, KernelForm::PowerLaw { .. }) {
                    assert!(kernel_t(&s, &k, &p).unwrap() < 1.0);
                }
            }
        }
        let off = FourVector { x0: 1.0, xs: [0.5, 0.0, 0.0] };
        assert!(matches!(kernel_t(&specs()[0], &off, &off), Err(Error::OffShell { .. })));
    }

    #[test]
    fn kernel_t_in_single_precision() {
        let s = CausalKernelSpec::power_law(1.5, 1.0).unwrap();
        let k = FourVector::<f32>::on_shell([0.3, -0.2, 0.1], 1.0);
        let p = FourVector::<f32>::on_shell([-0.4, 0.5, 0.0], 1.0);
        let v32 = kernel_t(&s, &k, &p).unwrap();
        let (k64, p64) = (FourVector::on_shell(k.xs.map(f64::from), 1.0), FourVector::on_shell(p.xs.map(f64::from), 1.0));
        let v64: f64 = kernel_t(&s, &k64, &p64).unwrap();
        assert!((v32 as f64 - v64).abs() < 1e-6);
    }

    #[test]
    fn current_j_properties() {
        let s = CausalKernelSpec::power_law(1.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = random_shell(&mut rng, 1.0);
            let p = random_shell(&mut rng, 1.0);
            assert_eq!(current_j(&s, &k, &k).unwrap(), k);
            let a = current_j(&s, &k, &p).unwrap();
            assert_eq!(a, current_j(&s, &p, &k).unwrap());
            assert!(a.x0 > 0.0);
        }
    }

    #[test]
    fn kernel_m_diagonal_and_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames = [
            FourVector::time_unit(),
            unit_future([0.5f64.sinh(), 0.0, 0.0]),
            unit_future([0.2, -0.3, 0.4]),
        ];
        let rest = FourVector::time_unit();
        for n in frames {
            for _ in 0..200 {
                let q = random_shell(&mut rng, 1.0);
                let p = random_shell(&mut rng, 1.0);
                assert!((kernel_m(1.0, &n, &rest, &p, &p).unwrap() - 1.0).abs() < 1e-14);
                assert_eq!(kernel_m(1.0, &n, &rest, &q, &p).unwrap(), kernel_m(1.0, &n, &rest, &p, &q).unwrap());
                let a = kernel_m(1.0, &n, &rest, &q, &p).unwrap();
                let b = mpovm_operator_kernel(1.0, &n, &rest, &q, &p).unwrap();
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
        // rest frame, q = p: covariant value p0
        let p = FourVector::on_shell([0.3, 0.4, 0.0], 1.0);
        assert!((kernel_m_covariant(1.0, &rest, &rest, &p, &p).unwrap() - p.x0).abs() < 1e-14);
        assert!(kernel_m(1.0, &FourVector { x0: 2.0, xs: [0.0; 3] }, &rest, &p, &p).is_err());
    }

    #[test]
    fn product_form_agrees_only_in_aligned_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rest = FourVector::time_unit();
        let tilted = unit_future([0.5f64.sinh(), 0.0, 0.0]);
        let mut tilted_gap = 0.0f64;
        for _ in 0..100 {
            let q = random_shell(&mut rng, 1.0);
            let p = random_shell(&mut rng, 1.0);
            let a = kernel_m(1.0, &tilted, &tilted, &q, &p).unwrap();
            let b = kernel_m_product_form(1.0, &tilted, &tilted, &q, &p).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            let c = kernel_m(1.0, &tilted, &rest, &q, &p).unwrap();
            let d = kernel_m_product_form(1.0, &tilted, &rest, &q, &p).unwrap();
            tilted_gap = tilted_gap.max((c - d).abs());
        }
        assert!(tilted_gap > 1e-3);
    }

    #[test]
    fn aligned_stress_energy_kernel_closed_form() {
        // n = n_sigma = rest: (p0 q0 + p.q + m^2) / (2 sqrt(p0 q0) sqrt(p0 q0))
        let rest = FourVector::time_unit();
        let q = FourVector::on_shell([0.3, -0.1, 0.7], 1.0);
        let p = FourVector::on_shell([-0.5, 0.2, 0.1], 1.0);
        let want = (p.x0 * q.x0 + spatial_dot(p.xs, q.xs) + 1.0) / (2.0 * p.x0 * q.x0);
        assert!((kernel_m(1.0f64, &rest, &rest, &q, &p).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn conversion_is_the_only_measure_factor() {
        let s = CausalKernelSpec::power_law(2.0, 1.0).unwrap();
        let k = FourVector::on_shell([0.3, 0.0, 0.0], 1.0);
        let p = FourVector::on_shell([0.0, 1.0, 0.0], 1.0);
        let cov: f64 = 0.5 * (k.x0 + p.x0) * g_eval(&s, -mdot(&k, &p)).unwrap();
        assert!((l2_from_covariant(cov, k.x0, p.x0) - kernel_t(&s, &k, &p).unwrap()).abs() < 1e-15);
    }
}
