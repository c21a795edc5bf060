//! Probability currents, the stress-energy tensor and their pointwise checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{frame_energy, invariant_z, CausalKernelSpec, FiniteKernel, GProfile, KernelForm};
use crate::minkowski::{check_unit_future, mdot};
use crate::spectral::{evaluate, Prepared, SpectralSource, TensorGrid};
use crate::states::{MomentumState, WaveJet};
use crate::FourVector;

/// Default largest points-per-axis for the pointwise double sum.
pub const DEFAULT_PAIR_BUDGET: usize = 20;
/// Nodes with `|psi w|` below this fraction of the maximum are dropped from grid syntheses.
const PRUNE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvaluationStrategy {
    DirectDoubleSum,
    FiniteKernelFactorized,
}

#[derive(Clone, Debug)]
pub enum CurrentKind {
    CausalKernelCurrent { spec: CausalKernelSpec, state: MomentumState },
    StressEnergyCurrent { n: FourVector, state: MomentumState },
}

/// Current value with the imaginary residue left after symmetrization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurrentValue {
    pub j: FourVector,
    pub imag: f64,
}

/// Monte Carlo estimate of the causal-kernel current with per-component standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: [f64; 4],
    pub std_err: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct CurrentField {
    kind: CurrentKind,
    strategy: EvaluationStrategy,
    pair_budget: usize,
    finite_table: Option<Vec<Vec<f64>>>,
}

fn finite_table(kernel: &FiniteKernel, state: &MomentumState) -> Result<Vec<Vec<f64>>> {
    state.grid().momenta().iter().map(|p| kernel.values(*p)).collect()
}

impl CurrentField {
    pub fn causal(spec: CausalKernelSpec, state: MomentumState) -> Result<Self> {
        let finite_table = match &spec.form {
            KernelForm::Finite(f) => Some(finite_table(f, &state)?),
            _ => None,
        };
        Ok(Self {
            kind: CurrentKind::CausalKernelCurrent { spec, state },
            strategy: EvaluationStrategy::DirectDoubleSum,
            pair_budget: DEFAULT_PAIR_BUDGET,
            finite_table,
        })
    }

    pub fn stress_energy(n: FourVector, state: MomentumState) -> Result<Self> {
        check_unit_future(&n)?;
        Ok(Self {
            kind: CurrentKind::StressEnergyCurrent { n, state },
            strategy: EvaluationStrategy::DirectDoubleSum,
            pair_budget: DEFAULT_PAIR_BUDGET,
            finite_table: None,
        })
    }

    pub fn with_strategy(mut self, strategy: EvaluationStrategy) -> Result<Self> {
        if strategy == EvaluationStrategy::FiniteKernelFactorized && self.finite_table.is_none() {
            return Err(Error::Unsupported("the factorized path needs a finite-rank causal kernel".into()));
        }
        self.strategy = strategy;
        Ok(self)
    }

    /// Opt in to double sums on grids with up to `points_per_axis` nodes per axis.
    pub fn with_pair_budget(mut self, points_per_axis: usize) -> Self {
        self.pair_budget = points_per_axis;
        self
    }

    pub fn kind(&self) -> &CurrentKind {
        &self.kind
    }

    pub fn state(&self) -> &MomentumState {
        match &self.kind {
            CurrentKind::CausalKernelCurrent { state, .. } | CurrentKind::StressEnergyCurrent { state, .. } => state,
        }
    }

    pub fn eval(&self, x: &FourVector) -> Result<CurrentValue> {
        if !x.is_finite() {
            return Err(Error::NonFinite("evaluation point"));
        }
        match &self.kind {
            CurrentKind::StressEnergyCurrent { n, state } => Ok(CurrentValue { j: current_m(state, n, x)?, imag: 0.0 }),
            CurrentKind::CausalKernelCurrent { spec, state } => match self.strategy {
                EvaluationStrategy::FiniteKernelFactorized => {
                    Ok(self.factorized(state, self.finite_table.as_ref().expect("checked"), x))
                }
                EvaluationStrategy::DirectDoubleSum => {
                    let n = state.grid().points_per_axis();
                    if n > self.pair_budget {
                        return Err(Error::BudgetExceeded { nodes: n, budget: self.pair_budget });
                    }
                    Ok(direct_double_sum(spec, self.finite_table.as_deref(), state, x))
                }
            },
        }
    }

    fn factorized(&self, state: &MomentumState, table: &[Vec<f64>], x: &FourVector) -> CurrentValue {
        let g = state.grid();
        let rank = table.first().map_or(0, Vec::len);
        let mut a = vec![Complex64::new(0.0, 0.0); rank];
        let mut b = vec![[Complex64::new(0.0, 0.0); 4]; rank];
        for i in 0..g.len() {
            let k = g.on_shell(i);
            let e = state.psi()[i] * g.weight(i) * Complex64::from_polar(1.0, mdot(&k, x));
            for j in 0..rank {
                let v = e * table[i][j];
                a[j] += v;
                for mu in 0..4 {
                    b[j][mu] += v * k.get(mu);
                }
            }
        }
        let mut out = [0.0; 4];
        for j in 0..rank {
            for mu in 0..4 {
                // sum_{k,p} (k+p) u(k) u(p) conj(e_k) e_p = 2 Re(conj(a) b), real by construction
                out[mu] += (a[j].conj() * b[j][mu]).re;
            }
        }
        let f = 1.0 / (2.0 * PI).powi(3);
        CurrentValue { j: FourVector::from_array(out.map(|v| v * f)), imag: 0.0 }
    }
}

fn direct_double_sum(
    spec: &CausalKernelSpec,
    table: Option<&[Vec<f64>]>,
    state: &MomentumState,
    x: &FourVector,
) -> CurrentValue {
    let g = state.grid();
    let m = g.mass();
    let profile = spec.profile();
    let e: Vec<Complex64> = (0..g.len())
        .map(|i| state.psi()[i] * g.weight(i) * Complex64::from_polar(1.0, mdot(&g.on_shell(i), x)))
        .collect();
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    for a in 0..g.len() {
        let k = g.on_shell(a);
        let ek = e[a].conj();
        let mut row = [Complex64::new(0.0, 0.0); 4];
        for b in 0..g.len() {
            let p = g.on_shell(b);
            let weight = match (&profile, table) {
                (Some(prof), _) => prof.eval(invariant_z(&k, &p, m)),
                (None, Some(t)) => t[a].iter().zip(&t[b]).map(|(u, v)| u * v).sum(),
                (None, None) => unreachable!("finite kernels carry a table"),
            };
            let c = e[b] * weight;
            for mu in 0..4 {
                row[mu] += c * (k.get(mu) + p.get(mu));
            }
        }
        for mu in 0..4 {
            acc[mu] += ek * row[mu];
        }
    }
    let f = 1.0 / (2.0 * (2.0 * PI).powi(3));
    let j = acc.map(|v| v * f);
    let imag = j.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    CurrentValue { j: FourVector::from_array(j.map(|v| v.re)), imag }
}

/// Causal-kernel current by the double sum.
pub fn current_tg(spec: &CausalKernelSpec, state: &MomentumState, x: &FourVector) -> Result<FourVector> {
    Ok(CurrentField::causal(spec.clone(), state.clone())?.eval(x)?.j)
}

/// Unbiased Monte Carlo estimate of the causal-kernel current: pairs are drawn independently with
/// probability proportional to `|psi w|`. Samples are processed in fixed blocks, each with its own stream.
pub fn current_tg_monte_carlo(
    spec: &CausalKernelSpec,
    state: &MomentumState,
    x: &FourVector,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    const BLOCK: usize = 4096;
    let g = state.grid();
    let m = g.mass();
    let table = match &spec.form {
        KernelForm::Finite(f) => Some(finite_table(f, state)?),
        _ => None,
    };
    let profile = spec.profile();
    let e: Vec<Complex64> = (0..g.len())
        .map(|i| state.psi()[i] * g.weight(i) * Complex64::from_polar(1.0, mdot(&g.on_shell(i), x)))
        .collect();
    let mass: Vec<f64> = e.iter().map(|v| v.norm()).collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) || samples < 2 {
        return Err(Error::Domain("Monte Carlo needs a nonzero state and at least two samples".into()));
    }
    let mut cdf = Vec::with_capacity(mass.len());
    let mut run = 0.0;
    for v in &mass {
        run += v / total;
        cdf.push(run);
    }
    let draw = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.gen();
        cdf.partition_point(|c| *c < u).min(cdf.len() - 1)
    };
    let f = 1.0 / (2.0 * (2.0 * PI).powi(3));
    let (mut s1, mut s2) = ([0.0; 4], [0.0; 4]);
    let blocks = samples.div_ceil(BLOCK);
    for blk in 0..blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(blk as u64);
        let count = BLOCK.min(samples - blk * BLOCK);
        for _ in 0..count {
            let (a, b) = (draw(&mut rng), draw(&mut rng));
            if mass[a] == 0.0 || mass[b] == 0.0 {
                continue;
            }
            let (k, p) = (g.on_shell(a), g.on_shell(b));
            let weight = match (&profile, &table) {
                (Some(prof), _) => prof.eval(invariant_z(&k, &p, m)),
                (_, Some(t)) => t[a].iter().zip(&t[b]).map(|(u, v)| u * v).sum(),
                _ => unreachable!(),
            };
            let q = mass[a] * mass[b] / (total * total);
            let c = (e[a].conj() * e[b]).re * weight * f / q;
            for mu in 0..4 {
                let v = c * (k.get(mu) + p.get(mu));
                s1[mu] += v;
                s2[mu] += v * v;
            }
        }
    }
    // the real part of conj(e_a) e_b is what survives symmetrization, so using it per sample stays unbiased
    let n = samples as f64;
    let mean = s1.map(|v| v / n);
    let std_err = [0, 1, 2, 3].map(|mu| ((s2[mu] / n - mean[mu] * mean[mu]).max(0.0) / (n - 1.0)).sqrt());
    Ok(McEstimate { mean, std_err })
}

/// Minkowski metric entry `eta_{mu mu}`.
fn eta(mu: usize) -> f64 {
    if mu == 0 {
        -1.0
    } else {
        1.0
    }
}

/// `T_{mu nu}` from a field value and its gradient `d_mu Phi`.
pub fn stress_from_jet(jet: &WaveJet, mass: f64) -> [[f64; 4]; 4] {
    let d = &jet.grad;
    let kinetic: f64 = (0..4).map(|a| eta(a) * d[a].norm_sqr()).sum();
    let lag = kinetic + mass * mass * jet.value.norm_sqr();
    let mut t = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in mu..4 {
            let mut v = (d[mu].conj() * d[nu]).re;
            if mu == nu {
                v -= 0.5 * eta(mu) * lag;
            }
            t[mu][nu] = v;
            t[nu][mu] = v;
        }
    }
    t
}

/// Stress-energy tensor `T_{mu nu}` of the anomalous wavefunction for the frame `n`.
pub fn stress_energy(state: &MomentumState, n: &FourVector, x: &FourVector) -> Result<[[f64; 4]; 4]> {
    let jet = state.anomalous_wave(n, x)?;
    Ok(stress_from_jet(&jet, state.mass()))
}

/// `J^mu = eta^{mu a} T_{a nu} n^nu`.
pub fn current_from_stress(t: &[[f64; 4]; 4], n: &FourVector) -> FourVector {
    let nn = n.to_array();
    FourVector::from_array([0, 1, 2, 3].map(|mu| eta(mu) * (0..4).map(|nu| t[mu][nu] * nn[nu]).sum::<f64>()))
}

pub fn current_m(state: &MomentumState, n: &FourVector, x: &FourVector) -> Result<FourVector> {
    Ok(current_from_stress(&stress_energy(state, n, x)?, n))
}

/// `J^0 - J . grad t`, the causal-kernel density on a graph surface (chart measure).
pub fn density_t(j: &FourVector, grad: [f64; 3]) -> f64 {
    j.x0 - (j.xs[0] * grad[0] + j.xs[1] * grad[1] + j.xs[2] * grad[2])
}

/// `T_{mu nu} a^mu b^nu`.
pub fn stress_contract(t: &[[f64; 4]; 4], a: &FourVector, b: &FourVector) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    (0..4).map(|mu| (0..4).map(|nu| t[mu][nu] * a[mu] * b[nu]).sum::<f64>()).sum()
}

/// Sign of `J^0` for a current: +1 future, -1 past, 0 if it vanishes.
pub fn orientation(j: &FourVector) -> i8 {
    if j.x0 > 0.0 {
        1
    } else if j.x0 < 0.0 {
        -1
    } else {
        0
    }
}

/// `|d_mu J^mu|` by second-order central differences.
pub fn divergence_residual(field: &CurrentField, x: &FourVector, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain("difference step must be positive".into()));
    }
    let mut div = 0.0;
    for mu in 0..4 {
        let mut e = [0.0; 4];
        e[mu] = h;
        let shift = |s: f64| FourVector::from_array([0, 1, 2, 3].map(|a| x.get(a) + s * e[a]));
        let plus = field.eval(&shift(1.0))?.j.get(mu);
        let minus = field.eval(&shift(-1.0))?.j.get(mu);
        div += (plus - minus) / (2.0 * h);
    }
    Ok(div.abs())
}

// ---- grid syntheses -------------------------------------------------------------------------

fn kept_nodes(state: &MomentumState) -> Vec<usize> {
    let g = state.grid();
    let amp: Vec<f64> = (0..g.len()).map(|i| (state.psi()[i] * g.weight(i)).norm()).collect();
    let max = amp.iter().copied().fold(0.0, f64::max);
    (0..g.len()).filter(|i| amp[*i] > PRUNE * max).collect()
}

/// Pair terms of the causal-kernel current on the half difference lattice `d0 >= 0`.
struct PairSource<'a> {
    state: &'a MomentumState,
    profile: Option<GProfile>,
    table: Option<Vec<Vec<f64>>>,
    kept: Vec<usize>,
    freqs: [Vec<f64>; 3],
    omega_max: f64,
}

impl<'a> PairSource<'a> {
    fn new(spec: &CausalKernelSpec, state: &'a MomentumState) -> Result<Self> {
        let g = state.grid();
        let n = g.points_per_axis();
        let h = g.pitch();
        let kept = kept_nodes(state);
        let table = match &spec.form {
            KernelForm::Finite(f) => Some(finite_table(f, state)?),
            _ => None,
        };
        let (lo, hi) = kept
            .iter()
            .map(|i| g.energy(*i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e), b.max(e)));
        let full: Vec<f64> = (0..2 * n - 1).map(|d| (d as f64 - (n - 1) as f64) * h).collect();
        Ok(Self {
            state,
            profile: spec.profile(),
            table,
            kept,
            freqs: [(0..n).map(|d| d as f64 * h).collect(), full.clone(), full],
            omega_max: (hi - lo).max(0.0),
        })
    }
}

impl SpectralSource for PairSource<'_> {
    fn fields(&self) -> usize {
        4
    }

    fn frequencies(&self) -> &[Vec<f64>; 3] {
        &self.freqs
    }

    fn omega_max(&self) -> f64 {
        self.omega_max
    }

    fn for_each_term(&self, sink: &mut dyn FnMut(usize, f64, &[Complex64])) {
        let g = self.state.grid();
        let n = g.points_per_axis();
        let w = 2 * n - 1;
        let m = g.mass();
        let f = 1.0 / (2.0 * (2.0 * PI).powi(3));
        let split = |i: usize| [i / (n * n), (i / n) % n, i % n];
        let c: Vec<Complex64> = self.kept.iter().map(|i| self.state.psi()[*i] * g.weight(*i)).collect();
        let mut amps = [Complex64::new(0.0, 0.0); 4];
        for (a, &ka) in self.kept.iter().enumerate() {
            let ik = split(ka);
            let k = g.on_shell(ka);
            for (b, &pb) in self.kept.iter().enumerate() {
                let ip = split(pb);
                if ip[0] < ik[0] {
                    continue;
                }
                let p = g.on_shell(pb);
                let weight = match (&self.profile, &self.table) {
                    (Some(prof), _) => prof.eval(invariant_z(&k, &p, m)),
                    (_, Some(t)) => t[ka].iter().zip(&t[pb]).map(|(u, v)| u * v).sum(),
                    _ => unreachable!(),
                };
                let d0 = ip[0] - ik[0];
                let fold = if d0 == 0 { 1.0 } else { 2.0 };
                let base = c[a].conj() * c[b] * (weight * f * fold);
                for (mu, amp) in amps.iter_mut().enumerate() {
                    *amp = base * (k.get(mu) + p.get(mu));
                }
                let idx = (d0 * w + (ip[1] + n - 1 - ik[1])) * w + (ip[2] + n - 1 - ik[2]);
                sink(idx, p.x0 - k.x0, &amps);
            }
        }
    }
}

/// Single sums `sum_p amp_f(p) e^{i p.x}` over the momentum nodes.
struct NodeSource {
    fields: usize,
    terms: Vec<(usize, f64, Vec<Complex64>)>,
    freqs: [Vec<f64>; 3],
    omega_max: f64,
}

impl NodeSource {
    fn new(state: &MomentumState, fields: usize, amp: impl Fn(usize) -> Vec<Complex64>) -> Self {
        let g = state.grid();
        let axis: Vec<f64> = (0..g.points_per_axis()).map(|i| g.axis_coord(i)).collect();
        let terms: Vec<(usize, f64, Vec<Complex64>)> =
            kept_nodes(state).into_iter().map(|i| (i, g.energy(i), amp(i))).collect();
        let omega_max = terms.iter().map(|t| t.1).fold(0.0, f64::max);
        Self { fields, terms, freqs: [axis.clone(), axis.clone(), axis], omega_max }
    }
}

impl SpectralSource for NodeSource {
    fn fields(&self) -> usize {
        self.fields
    }

    fn frequencies(&self) -> &[Vec<f64>; 3] {
        &self.freqs
    }

    fn omega_max(&self) -> f64 {
        self.omega_max
    }

    fn for_each_term(&self, sink: &mut dyn FnMut(usize, f64, &[Complex64])) {
        for (i, w, a) in &self.terms {
            sink(*i, *w, a);
        }
    }
}

/// Causal-kernel current at grid point `i` and time `times[i]`.
#[cfg(test)]
pub(crate) fn tg_current_grid(
    spec: &CausalKernelSpec,
    state: &MomentumState,
    grid: &TensorGrid,
    times: &[f64],
) -> Result<Vec<FourVector>> {
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TgCurrentGrid::new(spec, state, t_min, t_max)?.eval(grid, times))
}

/// Causal-kernel current prepared for a time range and reused across grids.
pub(crate) struct TgCurrentGrid<'a> {
    src: PairSource<'a>,
    prepared: Prepared,
}

impl<'a> TgCurrentGrid<'a> {
    pub(crate) fn new(spec: &CausalKernelSpec, state: &'a MomentumState, t_min: f64, t_max: f64) -> Result<Self> {
        let src = PairSource::new(spec, state)?;
        let prepared = Prepared::new(&src, t_min, t_max);
        Ok(Self { src, prepared })
    }

    pub(crate) fn eval(&self, grid: &TensorGrid, times: &[f64]) -> Vec<FourVector> {
        let f = self.prepared.evaluate(&self.src, grid, times);
        (0..grid.len()).map(|i| FourVector::from_array([0, 1, 2, 3].map(|mu| f[mu][i].re))).collect()
    }
}

/// Anomalous wavefunction and its gradient for the frame `n` at the grid points.
pub(crate) fn jets_grid(state: &MomentumState, n: &FourVector, grid: &TensorGrid, times: &[f64]) -> Result<Vec<WaveJet>> {
    check_unit_future(n)?;
    let g = state.grid();
    let norm = (2.0 * PI).powf(-1.5);
    let src = NodeSource::new(state, 5, |i| {
        let k = g.on_shell(i);
        let base = state.psi()[i] * g.weight(i) * norm / frame_energy(n, &k).sqrt();
        let low = k.lowered();
        let mut v = vec![base];
        v.extend(low.iter().map(|c| base * Complex64::new(0.0, *c)));
        v
    });
    let f = evaluate(&src, grid, times);
    Ok((0..grid.len()).map(|i| WaveJet { value: f[0][i], grad: [f[1][i], f[2][i], f[3][i], f[4][i]] }).collect())
}

/// Newton-Wigner wavefunction at the grid points and times.
pub(crate) fn nw_wave_grid(state: &MomentumState, grid: &TensorGrid, times: &[f64]) -> Vec<Complex64> {
    let g = state.grid();
    let norm = g.cell_volume() * (2.0 * PI).powf(-1.5);
    let src = NodeSource::new(state, 1, |i| vec![state.psi()[i] / g.energy(i).sqrt() * norm]);
    evaluate(&src, grid, times).swap_remove(0)
}

/// `a_j(x) = (2 pi)^{-3/2} sum_p u_j(p) phi(p) e^{i p.x} dV`; the finite-kernel density is `sum_j |a_j|^2`.
pub(crate) fn finite_amplitudes_grid(
    kernel: &FiniteKernel,
    state: &MomentumState,
    grid: &TensorGrid,
    times: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    let g = state.grid();
    let table = finite_table(kernel, state)?;
    let norm = g.cell_volume() * (2.0 * PI).powf(-1.5);
    let src = NodeSource::new(state, kernel.rank(), |i| {
        let phi = state.psi()[i] / g.energy(i).sqrt() * norm;
        table[i].iter().map(|u| phi * u).collect()
    });
    Ok(evaluate(&src, grid, times))
}

/// Pointwise `sum_j |a_j(x)|^2`.
pub fn finite_density(kernel: &FiniteKernel, state: &MomentumState, x: &FourVector) -> Result<f64> {
    let g = state.grid();
    let mut a = vec![Complex64::new(0.0, 0.0); kernel.rank()];
    for i in 0..g.len() {
        let u = kernel.values(g.momentum(i))?;
        let e = state.psi()[i] / g.energy(i).sqrt() * Complex64::from_polar(1.0, mdot(&g.on_shell(i), x));
        a.iter_mut().zip(&u).for_each(|(acc, uj)| *acc += e * uj);
    }
    let norm = g.cell_volume() * (2.0 * PI).powf(-1.5);
    Ok(a.iter().map(|v| (v * norm).norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FiniteComponent;
    use crate::minkowski::{unit_future, PoincareElement, Transform};
    use crate::states::MassShellGrid;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<MassShellGrid> {
        Arc::new(MassShellGrid::for_spread(1.0, 0.5, n).unwrap())
    }

    fn packet(n: usize) -> MomentumState {
        MomentumState::gaussian(grid(n), [0.2, -0.1, 0.0], [0.5, 0.45, 0.55], [0.3, 0.0, -0.2]).unwrap()
    }

    fn g32() -> CausalKernelSpec {
        CausalKernelSpec::power_law(1.5, 1.0).unwrap()
    }

    fn rotor() -> FiniteKernel {
        FiniteKernel::new(vec![
            FiniteComponent::new(vec![(1.0, [0, 0, 0])], [0.0; 3], 1.5).unwrap(),
            FiniteComponent::new(vec![(1.0, [1, 0, 0]), (0.3, [0, 1, 0])], [0.2, 0.0, 0.0], 1.2).unwrap(),
        ])
        .unwrap()
    }

    fn pt(t: f64, x: [f64; 3]) -> FourVector {
        FourVector { x0: t, xs: x }
    }

    #[test]
    fn single_node_current_is_constant_multiple_of_momentum() {
        let g = grid(6);
        let idx = g.index(2, 4, 1);
        let s = MomentumState::single_node(g.clone(), idx).unwrap();
        let k = g.on_shell(idx);
        let c2 = (s.psi()[idx] * g.weight(idx)).norm_sqr();
        for x in [pt(0.0, [0.0; 3]), pt(1.3, [0.4, -2.0, 7.0])] {
            let j = current_tg(&g32(), &s, &x).unwrap();
            let want = k * (c2 / (2.0 * PI).powi(3));
            for mu in 0..4 {
                assert!((j.get(mu) - want.get(mu)).abs() < 1e-15 * want.x0);
            }
        }
    }

    #[test]
    fn causal_current_is_future_causal_and_real() {
        let s = packet(8);
        let field = CurrentField::causal(g32(), s).unwrap();
        for x in [pt(0.0, [0.0; 3]), pt(0.5, [1.0, 0.2, -0.4]), pt(-1.0, [2.5, 0.0, 1.0])] {
            let v = field.eval(&x).unwrap();
            let norm = v.j.euclid_norm_sqr();
            assert!(mdot(&v.j, &v.j) <= 1e-9 * norm);
            assert!(v.j.x0 >= 0.0);
            assert!(v.imag < 1e-10 * norm.sqrt());
        }
    }

    #[test]
    fn budget_guard() {
        let s = MomentumState::gaussian(grid(22), [0.0; 3], [0.5; 3], [0.0; 3]).unwrap();
        let field = CurrentField::causal(g32(), s).unwrap();
        assert_eq!(field.eval(&pt(0.0, [0.0; 3])), Err(Error::BudgetExceeded { nodes: 22, budget: 20 }));
        assert!(CurrentField::causal(g32(), packet(6)).unwrap().with_strategy(EvaluationStrategy::FiniteKernelFactorized).is_err());
    }

    #[test]
    fn factorized_matches_double_sum() {
        let spec = CausalKernelSpec::finite(rotor(), 1.0).unwrap();
        let s = packet(8);
        let direct = CurrentField::causal(spec.clone(), s.clone()).unwrap();
        let fact = direct.clone().with_strategy(EvaluationStrategy::FiniteKernelFactorized).unwrap();
        for x in [pt(0.0, [0.1, 0.0, 0.0]), pt(0.7, [-1.0, 0.5, 0.3])] {
            let a = direct.eval(&x).unwrap().j;
            let b = fact.eval(&x).unwrap().j;
            for mu in 0..4 {
                assert!((a.get(mu) - b.get(mu)).abs() < 1e-10, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn monte_carlo_brackets_the_exact_value() {
        let s = packet(6);
        let x = pt(0.2, [0.3, 0.1, 0.0]);
        let exact = current_tg(&g32(), &s, &x).unwrap();
        let mc = current_tg_monte_carlo(&g32(), &s, &x, 200_000, 9).unwrap();
        for mu in 0..4 {
            assert!((mc.mean[mu] - exact.get(mu)).abs() < 5.0 * mc.std_err[mu] + 1e-12, "mu {mu}");
        }
        let again = current_tg_monte_carlo(&g32(), &s, &x, 200_000, 9).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn scaling_and_translation() {
        let s = packet(6);
        let x = pt(0.1, [0.2, -0.3, 0.5]);
        let j = current_tg(&g32(), &s, &x).unwrap();
        let c = Complex64::new(0.6, -1.1);
        let js = current_tg(&g32(), &s.scaled(c), &x).unwrap();
        for mu in 0..4 {
            assert!((js.get(mu) - c.norm_sqr() * j.get(mu)).abs() < 1e-12 * j.x0);
        }
        let y = pt(0.3, [1.0, 0.0, -0.5]);
        let t = s.poincare_act(&PoincareElement::from_list(&[Transform::Translation(y)]));
        let jt = current_tg(&g32(), &t, &(x + y)).unwrap();
        for mu in 0..4 {
            assert!((jt.get(mu) - j.get(mu)).abs() < 1e-10);
        }
    }

    #[test]
    fn stress_energy_properties() {
        let s = packet(8);
        let rest = FourVector::time_unit();
        for x in [pt(0.0, [0.0; 3]), pt(0.4, [1.0, -0.5, 0.2]), pt(0.0, [3.0, 3.0, 0.0])] {
            let t = stress_energy(&s, &rest, &x).unwrap();
            for mu in 0..4 {
                for nu in 0..4 {
                    assert_eq!(t[mu][nu], t[nu][mu]);
                }
            }
            assert!(t[0][0] >= 0.0);
            let j = current_m(&s, &rest, &x).unwrap();
            assert!(mdot(&j, &j) <= 1e-12 * j.euclid_norm_sqr());
            for m in [rest, unit_future([0.5, 0.0, 0.0]), unit_future([-0.3, 0.8, 0.1])] {
                assert!(stress_contract(&t, &rest, &m) >= -1e-10);
            }
        }
    }

    #[test]
    fn plane_wave_trace_and_energy() {
        let g = grid(6);
        let idx = g.index(1, 3, 4);
        let s = MomentumState::single_node(g.clone(), idx).unwrap();
        let k = g.on_shell(idx);
        let x = pt(0.3, [0.2, 0.0, -1.0]);
        let jet = s.anomalous_wave(&FourVector::time_unit(), &x).unwrap();
        let phi2 = jet.value.norm_sqr();
        let t = stress_from_jet(&jet, 1.0);
        // plane wave: T_{mu nu} = k_mu k_nu |Phi|^2, trace = -m^2 |Phi|^2, T_00 = k0^2 |Phi|^2
        let trace: f64 = (0..4).map(|mu| eta(mu) * t[mu][mu]).sum();
        assert!((trace + phi2).abs() < 1e-14 * k.x0 * k.x0 * phi2.max(1e-300));
        assert!((t[0][0] - k.x0 * k.x0 * phi2).abs() < 1e-13 * t[0][0]);
    }

    #[test]
    fn divergence_orders() {
        let s = packet(8);
        let x = pt(0.2, [0.3, -0.1, 0.2]);
        for field in [CurrentField::causal(g32(), s.clone()).unwrap(), CurrentField::stress_energy(FourVector::time_unit(), s.clone()).unwrap()] {
            let r1 = divergence_residual(&field, &x, 0.1).unwrap();
            let r2 = divergence_residual(&field, &x, 0.05).unwrap();
            assert!((3.5..4.5).contains(&(r1 / r2)), "{}", r1 / r2);
        }
        let g = grid(6);
        let one = MomentumState::single_node(g.clone(), g.index(1, 2, 3)).unwrap();
        let f = CurrentField::causal(g32(), one).unwrap();
        assert!(divergence_residual(&f, &x, 0.3).unwrap() < 1e-12);
    }

    #[test]
    fn grid_syntheses_match_pointwise() {
        let s = packet(8);
        let tg = crate::spectral::TensorGrid { axes: [vec![-1.0, 0.4], vec![0.0, 0.9, 2.0], vec![-0.5, 0.5]] };
        let times: Vec<f64> = (0..tg.len()).map(|i| 0.3 * tg.point(i)[0] + 0.1).collect();
        let js = tg_current_grid(&g32(), &s, &tg, &times).unwrap();
        let n = unit_future([0.2, 0.0, 0.1]);
        let jets = jets_grid(&s, &n, &tg, &times).unwrap();
        let nw = nw_wave_grid(&s, &tg, &times);
        let fin = finite_amplitudes_grid(&rotor(), &s, &tg, &times).unwrap();
        for i in 0..tg.len() {
            let x = pt(times[i], tg.point(i));
            let j = current_tg(&g32(), &s, &x).unwrap();
            for mu in 0..4 {
                assert!((js[i].get(mu) - j.get(mu)).abs() < 1e-12, "{} {}", js[i].get(mu), j.get(mu));
            }
            let jet = s.anomalous_wave(&n, &x).unwrap();
            assert!((jets[i].value - jet.value).norm() < 1e-12);
            for mu in 0..4 {
                assert!((jets[i].grad[mu] - jet.grad[mu]).norm() < 1e-12);
            }
            assert!((nw[i] - s.nw_wave(times[i], x.xs)).norm() < 1e-12);
            let d: f64 = fin.iter().map(|a| a[i].norm_sqr()).sum();
            assert!((d - finite_density(&rotor(), &s, &x).unwrap()).abs() < 1e-12);
        }
    }
}
