//! One-particle Klein-Gordon states on a truncated momentum grid.
//!
//! Two representations are used throughout: the covariant one, `psi(k)` with the
//! invariant measure `d^3k / k0`, and the `L^2(R^3, d^3p)` one, `phi(p) = psi(p) / sqrt(p0)`.

use std::f64::consts::PI;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::minkowski::{check_unit_future, mdot, PoincareElement};
use crate::{FourVector, Surface};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Uniform midpoint grid on `[-P, P]^3` with the discretized invariant measure.
#[derive(Clone, Debug, PartialEq)]
pub struct MassShellGrid {
    mass: f64,
    half_extent: f64,
    points_per_axis: usize,
    momenta: Vec<[f64; 3]>,
    energies: Vec<f64>,
}

impl MassShellGrid {
    pub fn new(mass: f64, half_extent: f64, points_per_axis: usize) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) || points_per_axis < 2 {
            return Err(Error::Domain("momentum grid needs a positive extent and at least 2 points per axis".into()));
        }
        let n = points_per_axis;
        let pitch = 2.0 * half_extent / n as f64;
        let axis: Vec<f64> = (0..n).map(|i| -half_extent + (i as f64 + 0.5) * pitch).collect();
        let mut momenta = Vec::with_capacity(n * n * n);
        for &a in &axis {
            for &b in &axis {
                for &c in &axis {
                    momenta.push([a, b, c]);
                }
            }
        }
        let energies = momenta.iter().map(|p| crate::minkowski::lift(*p, mass)).collect();
        Ok(Self { mass, half_extent, points_per_axis: n, momenta, energies })
    }

    /// Default cutoff `P = m + 6 * spread`.
    pub fn for_spread(mass: f64, spread: f64, points_per_axis: usize) -> Result<Self> {
        Self::new(mass, mass + 6.0 * spread, points_per_axis)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }

    pub fn pitch(&self) -> f64 {
        2.0 * self.half_extent / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.pitch().powi(3)
    }

    /// Spatial period of every Fourier sum over this grid.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.pitch()
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_extent + (i as f64 + 0.5) * self.pitch()
    }

    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.points_per_axis + j) * self.points_per_axis + l
    }

    pub fn momentum(&self, idx: usize) -> [f64; 3] {
        self.momenta[idx]
    }

    pub fn momenta(&self) -> &[[f64; 3]] {
        &self.momenta
    }

    pub fn energy(&self, idx: usize) -> f64 {
        self.energies[idx]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn on_shell(&self, idx: usize) -> FourVector {
        FourVector { x0: self.energies[idx], xs: self.momenta[idx] }
    }

    /// `(2P/N)^3 / p0`.
    pub fn weight(&self, idx: usize) -> f64 {
        self.cell_volume() / self.energies[idx]
    }
}

/// How the state was specified.
#[derive(Clone, Debug, PartialEq)]
pub enum StateRep {
    /// `phi(p) ~ exp(-sum (p_a - c_a)^2 / (4 s_a^2)) exp(-i p.x)`.
    AnalyticGaussian { center_p: [f64; 3], spread: [f64; 3], center_x: [f64; 3] },
    /// Smooth plateau in `phi`: 1 inside `inner_radius`, 0 beyond `outer_radius`.
    CompactBump { center_p: [f64; 3], inner_radius: f64, outer_radius: f64, center_x: [f64; 3] },
    /// Newton-Wigner wavefunction `exp(1 - 1/(1 - r^2/R^2))` supported in a ball, transformed to momentum space.
    NwBall { center_x: [f64; 3], radius: f64 },
    /// Covariant samples with no analytic form.
    GridSamples,
}

impl StateRep {
    pub fn is_analytic(&self) -> bool {
        !matches!(self, StateRep::GridSamples)
    }
}

fn smooth_step(s: f64) -> f64 {
    // 1 for s <= 0, 0 for s >= 1, C-infinity in between
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let h = |x: f64| (-1.0 / x).exp();
    h(1.0 - s) / (h(1.0 - s) + h(s))
}

fn nw_ball_profile(r: f64, radius: f64) -> f64 {
    let q = r / radius;
    if q >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - q * q)).exp()
    }
}

/// Radial Fourier transform `(2 pi)^{-3/2} int f(|x|) e^{-i p.x} d^3x` of the ball profile and its k-derivative.
fn nw_ball_transform(k: f64, radius: f64) -> (f64, f64) {
    const STEPS: usize = 1200;
    let h = radius / STEPS as f64;
    let (mut acc, mut dacc) = (0.0, 0.0);
    for i in 0..=STEPS {
        let r = i as f64 * h;
        let w = if i == 0 || i == STEPS { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let x = k * r;
        let (sinc, dsinc) = if x.abs() < 1e-4 {
            (1.0 - x * x / 6.0, -r * x / 3.0)
        } else {
            (x.sin() / x, r * (x * x.cos() - x.sin()) / (x * x))
        };
        let f = w * nw_ball_profile(r, radius) * r * r;
        acc += f * sinc;
        dacc += f * dsinc;
    }
    let c = h / 3.0 * 4.0 * PI / (2.0 * PI).powf(1.5);
    (acc * c, dacc * c)
}

/// Tabulated ball transform with cubic Hermite interpolation.
struct RadialTable {
    dk: f64,
    values: Vec<(f64, f64)>,
}

impl RadialTable {
    fn new(radius: f64) -> Self {
        let dk = 1e-2 / radius;
        let k_max = 64.0f64.max(48.0 / radius);
        let n = (k_max / dk).ceil() as usize + 1;
        let values = (0..n).into_par_iter().map(|i| nw_ball_transform(i as f64 * dk, radius)).collect();
        Self { dk, values }
    }

    fn eval(&self, k: f64) -> Option<f64> {
        let u = k / self.dk;
        let i = u.floor() as usize;
        if i + 1 >= self.values.len() {
            return None;
        }
        let t = u - i as f64;
        let ((f0, d0), (f1, d1)) = (self.values[i], self.values[i + 1]);
        let (t2, t3) = (t * t, t * t * t);
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                + (t3 - 2.0 * t2 + t) * self.dk * d0
                + (-2.0 * t3 + 3.0 * t2) * f1
                + (t3 - t2) * self.dk * d1,
        )
    }
}

fn nw_ball_amplitude(k: f64, radius: f64) -> f64 {
    static TABLES: OnceLock<Mutex<HashMap<u64, Arc<RadialTable>>>> = OnceLock::new();
    let table = {
        let mut map = TABLES.get_or_init(Default::default).lock().expect("table cache");
        map.entry(radius.to_bits()).or_insert_with(|| Arc::new(RadialTable::new(radius))).clone()
    };
    table.eval(k).unwrap_or_else(|| nw_ball_transform(k, radius).0)
}

fn analytic_phi(rep: &StateRep, p: [f64; 3]) -> Complex64 {
    match rep {
        StateRep::AnalyticGaussian { center_p, spread, center_x } => {
            let e: f64 = (0..3).map(|a| (p[a] - center_p[a]).powi(2) / (4.0 * spread[a] * spread[a])).sum();
            let phase = -(p[0] * center_x[0] + p[1] * center_x[1] + p[2] * center_x[2]);
            Complex64::from_polar((-e).exp(), phase)
        }
        StateRep::CompactBump { center_p, inner_radius, outer_radius, center_x } => {
            let d = [p[0] - center_p[0], p[1] - center_p[1], p[2] - center_p[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let amp = smooth_step((r - inner_radius) / (outer_radius - inner_radius));
            let phase = -(p[0] * center_x[0] + p[1] * center_x[1] + p[2] * center_x[2]);
            Complex64::from_polar(amp, phase)
        }
        StateRep::NwBall { center_x, radius } => {
            let k = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let phase = -(p[0] * center_x[0] + p[1] * center_x[1] + p[2] * center_x[2]);
            Complex64::from_polar(nw_ball_amplitude(k, *radius), phase)
        }
        StateRep::GridSamples => unreachable!("grid samples have no analytic form"),
    }
}

/// A one-particle state. Covariant values `psi(k)` at the grid nodes are always stored.
#[derive(Clone, Debug)]
pub struct MomentumState {
    grid: Arc<MassShellGrid>,
    rep: StateRep,
    transform: PoincareElement,
    scale: f64,
    psi: Vec<Complex64>,
    truncation_loss: f64,
}

/// Value and covariant gradient `d_mu` of a Fourier-synthesized wavefunction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveJet {
    pub value: Complex64,
    pub grad: [Complex64; 4],
}

/// Expectation with its imaginary residue kept as a diagnostic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub imag: f64,
}

impl MomentumState {
    fn analytic(grid: Arc<MassShellGrid>, rep: StateRep) -> Result<Self> {
        let psi: Vec<Complex64> = (0..grid.len())
            .map(|i| analytic_phi(&rep, grid.momentum(i)) * grid.energy(i).sqrt())
            .collect();
        let mut s = Self { grid, rep, transform: PoincareElement::identity(), scale: 1.0, psi, truncation_loss: 0.0 };
        let norm = s.norm_sqr();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("state vanishes on the momentum grid".into()));
        }
        s.scale = 1.0 / norm.sqrt();
        let scale = s.scale;
        s.psi.iter_mut().for_each(|v| *v *= scale);
        Ok(s)
    }

    pub fn gaussian(grid: Arc<MassShellGrid>, center_p: [f64; 3], spread: [f64; 3], center_x: [f64; 3]) -> Result<Self> {
        if spread.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Domain("Gaussian spreads must be positive".into()));
        }
        Self::analytic(grid, StateRep::AnalyticGaussian { center_p, spread, center_x })
    }

    pub fn compact_bump(
        grid: Arc<MassShellGrid>,
        center_p: [f64; 3],
        inner_radius: f64,
        outer_radius: f64,
        center_x: [f64; 3],
    ) -> Result<Self> {
        if !(inner_radius >= 0.0 && outer_radius > inner_radius) {
            return Err(Error::Domain("bump radii must satisfy 0 <= inner < outer".into()));
        }
        Self::analytic(grid, StateRep::CompactBump { center_p, inner_radius, outer_radius, center_x })
    }

    /// State whose Newton-Wigner wavefunction at `t = 0` is a smooth bump supported in `Ball(center_x, radius)`.
    pub fn nw_ball(grid: Arc<MassShellGrid>, center_x: [f64; 3], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain("support radius must be positive".into()));
        }
        Self::analytic(grid, StateRep::NwBall { center_x, radius })
    }

    /// Covariant samples, normalized on construction.
    pub fn from_samples(grid: Arc<MassShellGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("state sample"));
        }
        let mut s = Self {
            grid,
            rep: StateRep::GridSamples,
            transform: PoincareElement::identity(),
            scale: 1.0,
            psi: values,
            truncation_loss: 0.0,
        };
        let norm = s.norm_sqr();
        if !(norm > 0.0) {
            return Err(Error::Domain("state vanishes on the momentum grid".into()));
        }
        let f = 1.0 / norm.sqrt();
        s.psi.iter_mut().for_each(|v| *v *= f);
        Ok(s)
    }

    /// Normalized state concentrated on one grid node.
    pub fn single_node(grid: Arc<MassShellGrid>, idx: usize) -> Result<Self> {
        let mut v = vec![Complex64::new(0.0, 0.0); grid.len()];
        *v.get_mut(idx).ok_or_else(|| Error::Domain("node index out of range".into()))? = Complex64::new(1.0, 0.0);
        Self::from_samples(grid, v)
    }

    /// Normalized superposition of the given states (same grid).
    pub fn superpose(parts: &[(Complex64, &MomentumState)]) -> Result<Self> {
        let grid = parts.first().ok_or_else(|| Error::Domain("empty superposition".into()))?.1.grid.clone();
        let mut v = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (c, s) in parts {
            if *s.grid != *grid {
                return Err(Error::GridMismatch);
            }
            v.iter_mut().zip(&s.psi).for_each(|(a, b)| *a += c * b);
        }
        Self::from_samples(grid, v)
    }

    /// `c * psi` without renormalization.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut s = self.clone();
        s.psi.iter_mut().for_each(|v| *v *= c);
        s.scale *= c.norm();
        if c.im != 0.0 || c.re < 0.0 {
            s.rep = StateRep::GridSamples;
        }
        s
    }

    pub fn grid(&self) -> &MassShellGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<MassShellGrid> {
        self.grid.clone()
    }

    pub fn rep(&self) -> &StateRep {
        &self.rep
    }

    pub fn transform(&self) -> &PoincareElement {
        &self.transform
    }

    pub fn mass(&self) -> f64 {
        self.grid.mass
    }

    /// Relative norm change reported by the last group action.
    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    /// Covariant node values `psi(k)`.
    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    /// `psi(k) * weight(k)`, the coefficients of every Fourier synthesis.
    pub fn weighted(&self) -> Vec<Complex64> {
        self.psi.iter().enumerate().map(|(i, v)| v * self.grid.weight(i)).collect()
    }

    /// `phi(p) = psi(p) / sqrt(p0)` at the nodes.
    pub fn phi_values(&self) -> Vec<Complex64> {
        self.psi.iter().zip(&self.grid.energies).map(|(v, e)| v / e.sqrt()).collect()
    }

    /// `phi` at an arbitrary momentum (analytic states only).
    pub fn phi_at(&self, p: [f64; 3]) -> Option<Complex64> {
        if !self.rep.is_analytic() {
            return None;
        }
        let k = FourVector::on_shell(p, self.grid.mass);
        let q = self.transform.apply_inverse_vector(&k);
        let base = analytic_phi(&self.rep, q.xs) * q.x0.sqrt();
        let phase = Complex64::from_polar(1.0, -mdot(&k, &self.transform.y));
        Some(base * phase * self.scale / k.x0.sqrt())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().enumerate().map(|(i, v)| v.norm_sqr() * self.grid.weight(i)).sum()
    }

    pub fn inner(&self, other: &MomentumState) -> Result<Complex64> {
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.psi.iter().zip(&other.psi).enumerate().map(|(i, (a, b))| a.conj() * b * self.grid.weight(i)).sum())
    }

    /// Action of the unitary representation, `(U_h psi)(k) = e^{-i k.y} psi(L^-1 k)`.
    pub fn poincare_act(&self, h: &PoincareElement) -> MomentumState {
        if h.is_identity() {
            return self.clone();
        }
        let g = &self.grid;
        let before = self.norm_sqr();
        let mut out = self.clone();
        if self.rep.is_analytic() {
            out.transform = h.compose(&self.transform);
            out.psi = (0..g.len())
                .map(|i| {
                    let k = g.on_shell(i);
                    out.phi_at(k.xs).expect("analytic") * k.x0.sqrt()
                })
                .collect();
        } else {
            out.psi = (0..g.len())
                .map(|i| {
                    let k = g.on_shell(i);
                    let q = h.apply_inverse_vector(&k);
                    self.interpolate(q.xs) * Complex64::from_polar(1.0, -mdot(&k, &h.y))
                })
                .collect();
        }
        out.truncation_loss = (out.norm_sqr() - before).abs() / before;
        out
    }

    /// Trilinear interpolation of the covariant samples; zero outside the grid.
    fn interpolate(&self, q: [f64; 3]) -> Complex64 {
        let g = &self.grid;
        let n = g.points_per_axis;
        let f = q.map(|c| (c + g.half_extent) / g.pitch() - 0.5);
        if f.iter().any(|c| *c < 0.0 || *c > (n - 1) as f64) {
            return Complex64::new(0.0, 0.0);
        }
        let base = f.map(|c| (c.floor() as usize).min(n - 2));
        let frac = [0, 1, 2].map(|a| f[a] - base[a] as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for corner in 0..8 {
            let off = [0, 1, 2].map(|a| corner >> a & 1);
            let w: f64 = (0..3).map(|a| if off[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            if w != 0.0 {
                acc += self.psi[g.index(base[0] + off[0], base[1] + off[1], base[2] + off[2])] * w;
            }
        }
        acc
    }

    /// Covariant wavefunction `(2 pi)^{-3/2} sum psi(p) e^{i p.x} weight(p)`.
    pub fn covariant_wave(&self, x: &FourVector) -> Complex64 {
        let g = &self.grid;
        let s: Complex64 = (0..g.len())
            .map(|i| self.psi[i] * g.weight(i) * Complex64::from_polar(1.0, mdot(&g.on_shell(i), x)))
            .sum();
        s / (2.0 * PI).powf(1.5)
    }

    /// Anomalous wavefunction with the extra `1/sqrt(E_n(p))` factor, and its gradient `d_mu`.
    pub fn anomalous_wave(&self, n: &FourVector, x: &FourVector) -> Result<WaveJet> {
        check_unit_future(n)?;
        let g = &self.grid;
        let mut value = Complex64::new(0.0, 0.0);
        let mut grad = [Complex64::new(0.0, 0.0); 4];
        for i in 0..g.len() {
            let k = g.on_shell(i);
            let e = -mdot(n, &k);
            let c = self.psi[i] * g.weight(i) / e.sqrt() * Complex64::from_polar(1.0, mdot(&k, x));
            value += c;
            let low = k.lowered();
            for mu in 0..4 {
                grad[mu] += c * I * low[mu];
            }
        }
        let f = (2.0 * PI).powf(-1.5);
        Ok(WaveJet { value: value * f, grad: grad.map(|v| v * f) })
    }

    /// Newton-Wigner wavefunction on the rest slice at time `t`.
    pub fn nw_wave(&self, t: f64, x: [f64; 3]) -> Complex64 {
        let g = &self.grid;
        let dv = g.cell_volume();
        let s: Complex64 = (0..g.len())
            .map(|i| {
                let p = g.momenta[i];
                let phase = p[0] * x[0] + p[1] * x[1] + p[2] * x[2] - g.energies[i] * t;
                self.psi[i] / g.energies[i].sqrt() * Complex64::from_polar(1.0, phase)
            })
            .sum();
        s * dv / (2.0 * PI).powf(1.5)
    }

    /// Newton-Wigner position density on a rest slice.
    pub fn nw_position_density(&self, surface: &Surface, x: [f64; 3]) -> Result<f64> {
        if !surface.is_rest_slice() {
            return Err(Error::Unsupported("the Newton-Wigner density is defined on rest slices only".into()));
        }
        Ok(self.nw_wave(surface.time([0.0; 3]), x).norm_sqr())
    }

    /// `d phi / d p_a` at every node by 4th-order central differences.
    /// Analytic states use a small off-grid step; grid samples use the grid pitch with zero padding.
    pub fn phi_derivative(&self, a: usize) -> Vec<Complex64> {
        let g = &self.grid;
        if self.rep.is_analytic() {
            let h = 1e-2 * g.pitch();
            (0..g.len())
                .map(|i| {
                    let p = g.momenta[i];
                    let at = |d: f64| {
                        let mut q = p;
                        q[a] += d;
                        self.phi_at(q).expect("analytic")
                    };
                    (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h)
                })
                .collect()
        } else {
            let phi = self.phi_values();
            let n = g.points_per_axis as isize;
            let h = g.pitch();
            (0..g.len())
                .map(|i| {
                    let idx = [i / (n * n) as usize, (i / n as usize) % n as usize, i % n as usize];
                    let at = |d: isize| {
                        let mut j = idx.map(|c| c as isize);
                        j[a] += d;
                        if j[a] < 0 || j[a] >= n {
                            Complex64::new(0.0, 0.0)
                        } else {
                            phi[g.index(j[0] as usize, j[1] as usize, j[2] as usize)]
                        }
                    };
                    (at(-2) - at(2) + (at(1) - at(-1)) * 8.0) / (12.0 * h)
                })
                .collect()
        }
    }

    /// `<phi| i d/dp_a phi>`, the Newton-Wigner position expectation at `t = 0`.
    pub fn nw_expectation(&self, a: usize) -> Expectation {
        let phi = self.phi_values();
        let d = self.phi_derivative(a);
        let dv = self.grid.cell_volume();
        let s: Complex64 = phi.iter().zip(&d).map(|(f, df)| f.conj() * I * df).sum::<Complex64>() * dv;
        Expectation { value: s.re, imag: s.im }
    }

    /// `<phi| (i d/dp_a)^2 phi> = ||d phi / d p_a||^2`.
    pub fn nw_second_moment(&self, a: usize) -> f64 {
        self.phi_derivative(a).iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Mean and variance of `p_a` under `|phi|^2 d^3p`.
    pub fn momentum_moments(&self, a: usize) -> (f64, f64) {
        let g = &self.grid;
        let (mut m1, mut m2, mut m0) = (0.0, 0.0, 0.0);
        for i in 0..g.len() {
            let w = self.psi[i].norm_sqr() / g.energies[i];
            let p = g.momenta[i][a];
            m0 += w;
            m1 += w * p;
            m2 += w * p * p;
        }
        let mean = m1 / m0;
        (mean, m2 / m0 - mean * mean)
    }

    /// Mean group velocity `<p / p0>`.
    pub fn mean_velocity(&self) -> [f64; 3] {
        let g = &self.grid;
        let mut v = [0.0; 3];
        let mut m0 = 0.0;
        for i in 0..g.len() {
            let w = self.psi[i].norm_sqr() / g.energies[i];
            m0 += w;
            for a in 0..3 {
                v[a] += w * g.momenta[i][a] / g.energies[i];
            }
        }
        v.map(|c| c / m0)
    }
}

/// `(box - m^2) phi` at `x` by second-order central differences with step `h`.
pub fn kg_residual(state: &MomentumState, x: &FourVector, h: f64) -> f64 {
    let f = |d: [f64; 4]| {
        state.covariant_wave(&FourVector { x0: x.x0 + d[0], xs: [x.xs[0] + d[1], x.xs[1] + d[2], x.xs[2] + d[3]] })
    };
    let centre = f([0.0; 4]);
    let mut lap = Complex64::new(0.0, 0.0);
    for mu in 0..4 {
        let mut e = [0.0; 4];
        e[mu] = h;
        let second = (f(e) + f(e.map(|v| -v)) - centre * 2.0) / (h * h);
        lap += if mu == 0 { -second } else { second };
    }
    let m = state.mass();
    (lap - centre * m * m).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::Transform;

    fn grid(n: usize) -> Arc<MassShellGrid> {
        Arc::new(MassShellGrid::for_spread(1.0, 0.5, n).unwrap())
    }

    #[test]
    fn grid_nodes_and_weights() {
        let g = MassShellGrid::new(1.0, 2.0, 4).unwrap();
        assert_eq!(g.len(), 64);
        assert!((g.axis_coord(0) + 1.5).abs() < 1e-15);
        for i in 0..g.len() {
            assert!(g.energy(i) >= 1.0);
            assert!(g.weight(i) > 0.0);
        }
        assert!((g.period() - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn gaussian_is_normalized_and_round_trips() {
        let s = MomentumState::gaussian(grid(12), [0.2, 0.0, -0.1], [0.5, 0.4, 0.6], [0.3, 0.0, 0.0]).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        let phi = s.phi_values();
        let parseval: f64 = phi.iter().map(|v| v.norm_sqr()).sum::<f64>() * s.grid().cell_volume();
        assert!((parseval - 1.0).abs() < 1e-12);
        for (i, f) in phi.iter().enumerate() {
            let back = f * s.grid().energy(i).sqrt();
            assert!((back - s.psi()[i]).norm() < 1e-14);
            let direct = s.phi_at(s.grid().momentum(i)).unwrap();
            assert!((direct - f).norm() < 1e-12);
        }
    }

    #[test]
    fn inner_product_properties() {
        let g = grid(12);
        let a = MomentumState::gaussian(g.clone(), [0.0; 3], [0.5; 3], [0.0; 3]).unwrap();
        let b = MomentumState::gaussian(g.clone(), [0.3, 0.1, 0.0], [0.4; 3], [1.0, 0.0, 0.0]).unwrap();
        let ab = a.inner(&b).unwrap();
        let ba = b.inner(&a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-14);
        let ia = a.scaled(I);
        assert!((a.inner(&ia).unwrap() - I).norm() < 1e-14);
        let other = MomentumState::gaussian(grid(10), [0.0; 3], [0.5; 3], [0.0; 3]).unwrap();
        assert_eq!(a.inner(&other), Err(Error::GridMismatch));
    }

    #[test]
    fn separated_packets_are_orthogonal() {
        let g = Arc::new(MassShellGrid::new(1.0, 8.0, 16).unwrap());
        let a = MomentumState::gaussian(g.clone(), [-4.0, 0.0, 0.0], [0.3; 3], [0.0; 3]).unwrap();
        let b = MomentumState::gaussian(g, [4.0, 0.0, 0.0], [0.3; 3], [0.0; 3]).unwrap();
        // overlap ~ exp(-(8)^2 / (8 s^2))
        assert!(a.inner(&b).unwrap().norm() < 1e-8);
    }

    #[test]
    fn single_node_plane_wave() {
        let g = grid(8);
        let idx = g.index(3, 5, 2);
        let s = MomentumState::single_node(g.clone(), idx).unwrap();
        let x = FourVector { x0: 0.7, xs: [0.1, -2.0, 0.4] };
        let k = g.on_shell(idx);
        let expect = s.psi()[idx] * g.weight(idx) * Complex64::from_polar(1.0, mdot(&k, &x)) / (2.0 * PI).powf(1.5);
        assert!((s.covariant_wave(&x) - expect).norm() < 1e-15);
        let jet = s.anomalous_wave(&FourVector::time_unit(), &x).unwrap();
        assert!((jet.value - expect / k.x0.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn translation_covariance_of_wave() {
        let s = MomentumState::gaussian(grid(10), [0.1, 0.0, 0.0], [0.5; 3], [0.0; 3]).unwrap();
        let y = FourVector { x0: 0.4, xs: [1.0, -0.5, 0.2] };
        let h = PoincareElement::from_list(&[Transform::Translation(y)]);
        let t = s.poincare_act(&h);
        for x in [FourVector { x0: 0.0, xs: [0.0; 3] }, FourVector { x0: 1.0, xs: [0.5, 0.5, -1.0] }] {
            let lhs = t.covariant_wave(&x);
            let rhs = s.covariant_wave(&h.inverse().apply_point(&x));
            assert!((lhs - rhs).norm() < 1e-12);
        }
        for i in 0..t.grid().len() {
            assert!((t.psi()[i].norm() - s.psi()[i].norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn boost_round_trip_and_composition() {
        let s = MomentumState::gaussian(grid(16), [0.0; 3], [0.5; 3], [0.0; 3]).unwrap();
        let b = PoincareElement::from_list(&[Transform::BoostX(0.3)]);
        let back = s.poincare_act(&b).poincare_act(&b.inverse());
        assert!((back.inner(&s).unwrap() - 1.0).norm() < 1e-8);
        let r = PoincareElement::from_list(&[Transform::RotationZ(0.5)]);
        let two = s.poincare_act(&b).poincare_act(&r);
        let one = s.poincare_act(&r.compose(&b));
        for i in 0..s.grid().len() {
            assert!((two.psi()[i] - one.psi()[i]).norm() < 1e-10);
        }
        let loss = s.poincare_act(&b).truncation_loss();
        assert!(loss < 1e-4, "{loss}");
    }

    #[test]
    fn identity_action_is_bitwise_for_samples() {
        let g = grid(6);
        let vals: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64).sin(), 0.3)).collect();
        let s = MomentumState::from_samples(g, vals).unwrap();
        let t = s.poincare_act(&PoincareElement::identity());
        assert_eq!(s.psi(), t.psi());
    }

    #[test]
    fn interpolated_boost_keeps_norm() {
        let g = Arc::new(MassShellGrid::new(1.0, 4.0, 32).unwrap());
        let a = MomentumState::gaussian(g.clone(), [0.0; 3], [0.5; 3], [0.0; 3]).unwrap();
        let s = MomentumState::from_samples(g, a.psi().to_vec()).unwrap();
        let b = s.poincare_act(&PoincareElement::from_list(&[Transform::BoostX(0.2)]));
        assert!((b.norm_sqr() - 1.0).abs() < 1e-2, "{}", b.norm_sqr());
    }

    #[test]
    fn nw_expectation_oracles() {
        let g = grid(16);
        let s = MomentumState::gaussian(g.clone(), [0.2, 0.0, 0.0], [0.5, 0.45, 0.55], [0.7, -0.3, 0.1]).unwrap();
        for (a, want) in [0.7, -0.3, 0.1].iter().enumerate() {
            let e = s.nw_expectation(a);
            assert!((e.value - want).abs() < 1e-6, "{} vs {want}", e.value);
            assert!(e.imag.abs() < 1e-6, "{}", e.imag);
        }
        let real = MomentumState::gaussian(g.clone(), [0.0; 3], [0.5; 3], [0.0; 3]).unwrap();
        assert!(real.nw_expectation(1).value.abs() < 1e-10);
        // <(i d)^2> = x^2 + 1/(4 s^2) for the Gaussian family
        let m2 = s.nw_second_moment(0);
        assert!((m2 - (0.49 + 1.0 / (4.0 * 0.25))).abs() < 1e-6);
        let t = s.poincare_act(&PoincareElement::from_list(&[Transform::Translation(FourVector {
            x0: 0.0,
            xs: [0.0, 0.5, 0.0],
        })]));
        assert!((t.nw_expectation(1).value - 0.2).abs() < 1e-6);
    }

    #[test]
    fn nw_density_matches_kernel_form() {
        let g = Arc::new(MassShellGrid::new(1.0, 2.0, 8).unwrap());
        let s = MomentumState::gaussian(g.clone(), [0.1, 0.0, 0.0], [0.5; 3], [0.2, 0.0, 0.0]).unwrap();
        let x = [0.3, -0.4, 0.5];
        let phi = s.phi_values();
        let dv = g.cell_volume();
        let mut brute = Complex64::new(0.0, 0.0);
        for i in 0..g.len() {
            for j in 0..g.len() {
                let (p, q) = (g.momentum(i), g.momentum(j));
                let ph = (0..3).map(|a| (q[a] - p[a]) * x[a]).sum::<f64>();
                brute += phi[i].conj() * phi[j] * Complex64::from_polar(1.0, ph);
            }
        }
        let brute = brute.re * dv * dv / (2.0 * PI).powi(3);
        let d = s.nw_position_density(&Surface::slice(0.0), x).unwrap();
        assert!((d - brute).abs() < 1e-12);
        assert!(s.nw_position_density(&Surface::flat(0.0, [0.1, 0.0, 0.0]).unwrap(), x).is_err());
    }

    #[test]
    fn bump_density_is_parity_symmetric() {
        let g = Arc::new(MassShellGrid::new(1.0, 2.0, 10).unwrap());
        let s = MomentumState::compact_bump(g, [0.0; 3], 0.3, 1.2, [0.0; 3]).unwrap();
        let sl = Surface::slice(0.0);
        for x in [[0.3, 0.1, -0.4], [1.5, 0.0, 0.2]] {
            let a = s.nw_position_density(&sl, x).unwrap();
            let b = s.nw_position_density(&sl, x.map(|c| -c)).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kg_residual_is_second_order() {
        let s = MomentumState::gaussian(grid(10), [0.1, 0.0, 0.0], [0.5; 3], [0.0; 3]).unwrap();
        let x = FourVector { x0: 0.3, xs: [0.4, -0.2, 0.1] };
        let r1 = kg_residual(&s, &x, 0.1);
        let r2 = kg_residual(&s, &x, 0.05);
        let ratio = r1 / r2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn anomalous_gradient_matches_differences() {
        let s = MomentumState::gaussian(grid(8), [0.1, 0.0, 0.0], [0.5; 3], [0.0; 3]).unwrap();
        let n = crate::minkowski::unit_future([0.3, 0.0, 0.0]);
        let x = FourVector { x0: 0.2, xs: [0.1, 0.3, -0.2] };
        let jet = s.anomalous_wave(&n, &x).unwrap();
        let err = |h: f64| {
            (0..4)
                .map(|mu| {
                    let mut e = [0.0; 4];
                    e[mu] = h;
                    let shift = |sg: f64| FourVector {
                        x0: x.x0 + sg * e[0],
                        xs: [x.xs[0] + sg * e[1], x.xs[1] + sg * e[2], x.xs[2] + sg * e[3]],
                    };
                    let fd = (s.anomalous_wave(&n, &shift(1.0)).unwrap().value
                        - s.anomalous_wave(&n, &shift(-1.0)).unwrap().value)
                        / (2.0 * h);
                    (fd - jet.grad[mu]).norm()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        assert!(s.anomalous_wave(&FourVector { x0: 2.0, xs: [0.0; 3] }, &x).is_err());
    }

    #[test]
    fn nw_ball_state_is_localized_at_t0() {
        let g = Arc::new(MassShellGrid::new(1.0, 12.0, 24).unwrap());
        let s = MomentumState::nw_ball(g, [0.0; 3], 1.5).unwrap();
        let sl = Surface::slice(0.0);
        let inside = s.nw_position_density(&sl, [0.0; 3]).unwrap();
        let outside = s.nw_position_density(&sl, [2.5, 0.0, 0.0]).unwrap();
        assert!(outside < 1e-4 * inside, "{outside} vs {inside}");
    }
}
