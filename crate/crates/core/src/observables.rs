//! Localization probabilities, moments and uncertainty reports for the three observables.

use num_complex::Complex64;

use crate::currents::{
    current_tg, density_t, finite_amplitudes_grid, finite_density, jets_grid, nw_wave_grid, stress_contract, stress_energy,
    stress_from_jet, CurrentField, CurrentKind, TgCurrentGrid,
};
use crate::error::{Error, Result};
use crate::kernels::{kappa_eval, kernel_m, mpovm_operator_kernel, t_kernel_fn, CausalKernelSpec, FiniteKernel, KernelForm};
use crate::minkowski::{check_unit_future, Membership, Region};
use crate::quad::{finish_levels, integrate_levels, level_sums, packet_center, truncation_budget, IntegrationBox, QuadConfig};
use crate::spectral::TensorGrid;
use crate::states::MomentumState;
use crate::{FourVector, Surface};

/// Slack added to every combined tolerance for cross terms not covered by the budgets.
pub const CROSS_TERM_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSpec {
    CausalKernelT { spec: CausalKernelSpec },
    StressEnergyM { n: FourVector },
    NewtonWignerQ,
}

impl ObservableSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ObservableSpec::StressEnergyM { n } => check_unit_future(n),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ObservableSpec::CausalKernelT { .. } => "T",
            ObservableSpec::StressEnergyM { .. } => "M",
            ObservableSpec::NewtonWignerQ => "Q",
        }
    }

    fn needs_rest_slice(&self) -> bool {
        match self {
            ObservableSpec::NewtonWignerQ => true,
            ObservableSpec::CausalKernelT { spec } => spec.is_finite_rank(),
            ObservableSpec::StressEnergyM { .. } => false,
        }
    }

    fn check_surface(&self, surface: &Surface) -> Result<()> {
        self.validate()?;
        if self.needs_rest_slice() && !surface.is_rest_slice() {
            return Err(Error::Unsupported(format!(
                "observable {} is evaluated on untilted flat slices only",
                self.label()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub quad_error: f64,
    pub truncation_error: f64,
}

impl ProbabilityEstimate {
    pub fn total_error(&self) -> f64 {
        self.quad_error + self.truncation_error
    }

    /// `quad + truncation + cross-term slack`.
    pub fn combined_tolerance(&self) -> f64 {
        self.total_error() + CROSS_TERM_SLACK
    }
}

/// Localization density in chart coordinates at one point of the surface (direct sums).
pub fn density_at(obs: &ObservableSpec, state: &MomentumState, surface: &Surface, x: [f64; 3]) -> Result<f64> {
    obs.check_surface(surface)?;
    let sp = surface.eval(x)?;
    let point = FourVector { x0: sp.t, xs: x };
    let d = match obs {
        ObservableSpec::NewtonWignerQ => state.nw_wave(sp.t, x).norm_sqr(),
        ObservableSpec::CausalKernelT { spec } => match &spec.form {
            KernelForm::Finite(f) => finite_density(f, state, &point)?,
            _ => density_t(&current_tg(spec, state, &point)?, sp.grad),
        },
        ObservableSpec::StressEnergyM { n } => stress_contract(&stress_energy(state, n, &point)?, n, &sp.v),
    };
    if !d.is_finite() {
        return Err(Error::NonFiniteDensity { point: x });
    }
    Ok(d)
}

/// Which surface density a grid evaluation produces.
enum DensityKind<'a> {
    NewtonWigner,
    CausalKernel(&'a CausalKernelSpec),
    FiniteRank(&'a FiniteKernel),
    StressEnergy(FourVector),
}

impl<'a> DensityKind<'a> {
    fn of_observable(obs: &'a ObservableSpec) -> Self {
        match obs {
            ObservableSpec::NewtonWignerQ => DensityKind::NewtonWigner,
            ObservableSpec::CausalKernelT { spec } => match &spec.form {
                KernelForm::Finite(f) => DensityKind::FiniteRank(f),
                _ => DensityKind::CausalKernel(spec),
            },
            ObservableSpec::StressEnergyM { n } => DensityKind::StressEnergy(*n),
        }
    }

    fn of_current(kind: &'a CurrentKind) -> Self {
        match kind {
            CurrentKind::CausalKernelCurrent { spec, .. } => DensityKind::CausalKernel(spec),
            CurrentKind::StressEnergyCurrent { n, .. } => DensityKind::StressEnergy(*n),
        }
    }
}

/// Surface density on tensor grids, with the causal-kernel pair sums shared between grids.
struct DensityEval<'a> {
    kind: DensityKind<'a>,
    state: &'a MomentumState,
    surface: &'a Surface,
    current: Option<TgCurrentGrid<'a>>,
}

impl<'a> DensityEval<'a> {
    /// Prepared for grids whose surface times lie in `times`.
    fn new(kind: DensityKind<'a>, state: &'a MomentumState, surface: &'a Surface, times: (f64, f64)) -> Result<Self> {
        let current = match kind {
            DensityKind::CausalKernel(spec) => Some(TgCurrentGrid::new(spec, state, times.0, times.1)?),
            _ => None,
        };
        Ok(Self { kind, state, surface, current })
    }

    fn grid(&self, grid: &TensorGrid) -> Result<Vec<f64>> {
        let state = self.state;
        let geo: Vec<(f64, [f64; 3])> = (0..grid.len()).map(|i| self.surface.time_and_grad(grid.point(i))).collect();
        let times: Vec<f64> = geo.iter().map(|g| g.0).collect();
        Ok(match &self.kind {
            DensityKind::NewtonWigner => nw_wave_grid(state, grid, &times).iter().map(|v| v.norm_sqr()).collect(),
            DensityKind::FiniteRank(f) => {
                let a = finite_amplitudes_grid(f, state, grid, &times)?;
                (0..grid.len()).map(|i| a.iter().map(|aj| aj[i].norm_sqr()).sum()).collect()
            }
            DensityKind::CausalKernel(_) => {
                let j = self.current.as_ref().expect("prepared with the kind").eval(grid, &times);
                j.iter().zip(&geo).map(|(j, g)| density_t(j, g.1)).collect()
            }
            DensityKind::StressEnergy(n) => {
                let jets = jets_grid(state, n, grid, &times)?;
                jets.iter()
                    .zip(&geo)
                    .map(|(jet, g)| {
                        let t = stress_from_jet(jet, state.mass());
                        stress_contract(&t, n, &FourVector { x0: 1.0, xs: g.1 })
                    })
                    .collect()
            }
        })
    }
}

fn time_range(surface: &Surface, grids: &[TensorGrid]) -> (f64, f64) {
    grids
        .iter()
        .flat_map(|g| (0..g.len()).map(move |i| surface.time(g.point(i))))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)))
}

/// Density at every point of the tensor grid `axes[0] x axes[1] x axes[2]` on the surface,
/// point `(i, j, l)` at index `(i * n1 + j) * n2 + l`.
pub fn density_on_grid(obs: &ObservableSpec, state: &MomentumState, surface: &Surface, axes: [Vec<f64>; 3]) -> Result<Vec<f64>> {
    obs.check_surface(surface)?;
    if axes.iter().any(|a| a.is_empty() || a.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("density grid axes must be nonempty and finite".into()));
    }
    let grid = TensorGrid { axes };
    let range = time_range(surface, std::slice::from_ref(&grid));
    let d = DensityEval::new(DensityKind::of_observable(obs), state, surface, range)?.grid(&grid)?;
    if let Some(i) = d.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDensity { point: grid.point(i) });
    }
    Ok(d)
}

/// Integration box following the packet to the time the surface passes it.
pub fn surface_box(state: &MomentumState, surface: &Surface, cfg: &QuadConfig) -> Result<IntegrationBox> {
    let c0 = packet_center(state, 0.0);
    let t = surface.time(c0);
    IntegrationBox::for_state(state, cfg, t)
}

/// Smallest cube inside `outer` that covers `bounds` clipped to `outer`; `None` when they do not meet.
fn sub_box(outer: &IntegrationBox, bounds: ([f64; 3], [f64; 3])) -> Option<IntegrationBox> {
    let lo = [0, 1, 2].map(|k| bounds.0[k].max(outer.center[k] - outer.half));
    let hi = [0, 1, 2].map(|k| bounds.1[k].min(outer.center[k] + outer.half));
    if (0..3).any(|k| lo[k] >= hi[k]) {
        return None;
    }
    let half = (0..3).map(|k| 0.5 * (hi[k] - lo[k])).fold(0.0, f64::max);
    if half >= outer.half {
        return Some(*outer);
    }
    let center = [0, 1, 2].map(|k| (0.5 * (lo[k] + hi[k])).clamp(outer.center[k] - outer.half + half, outer.center[k] + outer.half - half));
    Some(IntegrationBox { center, half })
}

/// Mass in the outer cell layer of `grid`.
fn edge_mass(density: &[f64], grid: &TensorGrid, h: f64) -> f64 {
    let n = [grid.axes[0].len(), grid.axes[1].len(), grid.axes[2].len()];
    let mut mass = 0.0;
    for (i, d) in density.iter().enumerate() {
        let idx = [i / (n[1] * n[2]), (i / n[2]) % n[1], i % n[2]];
        if (0..3).any(|k| idx[k] == 0 || idx[k] + 1 == n[k]) {
            mass += d.abs();
        }
    }
    mass * h * h * h
}

/// Integral of `weight(x) * density(x)` over `region` with the quadrature and truncation budgets.
/// Bounded regions are integrated on their own cube; complements of bounded regions as the total minus the inner part.
fn integrate_weighted(
    kind: DensityKind<'_>,
    state: &MomentumState,
    surface: &Surface,
    region: &dyn Membership,
    cfg: &QuadConfig,
    weight: &(dyn Fn([f64; 3]) -> f64 + Sync),
    weight_scale: f64,
) -> Result<ProbabilityEstimate> {
    cfg.validate()?;
    let packet = surface_box(state, surface, cfg)?;
    // a full period is integrated exactly by the midpoint rule once every level has N nodes
    let full_period = packet.half >= 0.5 * state.grid().period() * (1.0 - 1e-12);
    let n = state.grid().points_per_axis();
    let wide_cfg = QuadConfig { spatial_nodes_per_axis: cfg.spatial_nodes_per_axis.max(n << (cfg.refinement_levels - 1)), ..cfg.clone() };
    let packet_cfg = if full_period { &wide_cfg } else { cfg };
    let piece_cfg = |bx: &IntegrationBox| if bx == &packet { packet_cfg } else { cfg };
    let coarse = *packet_cfg.level_nodes().last().expect("at least one level");
    let inner = region.bounded_complement().and_then(|inner| Some((inner, sub_box(&packet, inner.bounds()?)?)));
    let direct = match region.bounds() {
        Some(b) => sub_box(&packet, b),
        None => Some(packet),
    };
    let mut grids = vec![packet.grid(coarse)];
    for bx in direct.iter().chain(inner.as_ref().map(|i| &i.1)) {
        grids.extend(piece_cfg(bx).level_nodes().iter().map(|m| bx.grid(*m)));
    }
    let range = time_range(surface, &grids);
    let eval = DensityEval::new(kind, state, surface, range)?;
    let weighted = |grid: &TensorGrid| -> Result<Vec<f64>> {
        let d = eval.grid(grid)?;
        Ok((0..grid.len()).map(|i| d[i] * weight(grid.point(i))).collect())
    };

    let (value, quad_error) = match (direct, inner) {
        (None, _) => (0.0, 0.0),
        (Some(bx), None) => {
            let q = integrate_levels(weighted, region, &bx, piece_cfg(&bx))?;
            (q.value, q.error)
        }
        (Some(bx), Some((inner, inner_box))) => {
            // the complement directly, or the total minus the inner part: keep the sharper estimate
            let mut sums = level_sums(weighted, &[region, &Region::All], &bx, piece_cfg(&bx))?;
            let total = finish_levels(sums.pop().expect("two regions"))?;
            let outside = finish_levels(sums.pop().expect("two regions"));
            let inside = integrate_levels(weighted, inner, &inner_box, cfg)?;
            let by_difference = (total.value - inside.value, total.error + inside.error);
            match outside {
                Ok(q) if q.error <= by_difference.1 => (q.value, q.error),
                _ => by_difference,
            }
        }
    };

    let h = packet.spacing(coarse);
    let edge = edge_mass(&eval.grid(&grids[0])?, &grids[0], h);
    let budget = truncation_budget(state, &packet, range.0, range.1);
    // outer-layer mass scaled by the packet width in cells
    let sigma = (0..3)
        .map(|a| {
            let m = state.nw_expectation(a).value;
            (state.nw_second_moment(a) - m * m).max(0.0).sqrt()
        })
        .fold(0.0, f64::max);
    let layer = edge * (2.0 * sigma / h).max(1.0);
    Ok(ProbabilityEstimate { value, quad_error, truncation_error: (budget.total() + layer) * weight_scale })
}

/// `<psi| A_S(Delta) psi>` for the observable `A` on the surface `S`.
pub fn probability(
    obs: &ObservableSpec,
    state: &MomentumState,
    surface: &Surface,
    region: &dyn Membership,
    cfg: &QuadConfig,
) -> Result<ProbabilityEstimate> {
    obs.check_surface(surface)?;
    integrate_weighted(DensityKind::of_observable(obs), state, surface, region, cfg, &|_| 1.0, 1.0)
}

/// Flux of a current through `S`: the integral of its surface density over the whole chart.
pub fn current_flux(field: &CurrentField, surface: &Surface, cfg: &QuadConfig) -> Result<ProbabilityEstimate> {
    integrate_weighted(DensityKind::of_current(field.kind()), field.state(), surface, &Region::All, cfg, &|_| 1.0, 1.0)
}

/// Probability of the whole surface.
pub fn total_norm(obs: &ObservableSpec, state: &MomentumState, surface: &Surface, cfg: &QuadConfig) -> Result<ProbabilityEstimate> {
    probability(obs, state, surface, &Region::All, cfg)
}

/// `int x^alpha <psi| A(d^3x) psi>` on an untilted flat slice.
pub fn moment(
    obs: &ObservableSpec,
    state: &MomentumState,
    surface: &Surface,
    alpha: [u32; 3],
    cfg: &QuadConfig,
) -> Result<ProbabilityEstimate> {
    if !surface.is_rest_slice() {
        return Err(Error::Unsupported("moments are computed on untilted flat slices".into()));
    }
    if alpha.iter().sum::<u32>() > 4 {
        return Err(Error::Domain("moments are supported up to total order 4".into()));
    }
    if !state.rep().is_analytic() {
        return Err(Error::Unsupported("moments need an analytic state".into()));
    }
    obs.check_surface(surface)?;
    let bx = surface_box(state, surface, cfg)?;
    let reach = bx.center.iter().map(|c| c.abs()).fold(0.0, f64::max) + bx.half;
    let order = alpha.iter().sum::<u32>() as i32;
    let weight = move |x: [f64; 3]| (0..3).map(|a| x[a].powi(alpha[a] as i32)).product::<f64>();
    integrate_weighted(DensityKind::of_observable(obs), state, surface, &Region::All, cfg, &weight, reach.powi(order).max(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondMomentDecomposition {
    pub total: f64,
    pub nw_part: f64,
    pub kappa_part: f64,
    pub quad_error: f64,
    pub truncation_error: f64,
    /// Combined tolerance of `total`.
    pub tolerance: f64,
}

impl SecondMomentDecomposition {
    pub fn residual(&self) -> f64 {
        (self.total - self.nw_part - self.kappa_part).abs()
    }
}

/// `sum_p |phi(p)|^2 kappa_a(p) dV` for the observable's kernel.
pub fn kappa_expectation(obs: &ObservableSpec, state: &MomentumState, a: usize) -> Result<f64> {
    let g = state.grid();
    let phi = state.phi_values();
    let dv = g.cell_volume();
    let mass = g.mass();
    let mut acc = 0.0;
    match obs {
        ObservableSpec::NewtonWignerQ => return Ok(0.0),
        ObservableSpec::CausalKernelT { spec } => {
            if let KernelForm::Finite(f) = &spec.form {
                for i in 0..g.len() {
                    acc += phi[i].norm_sqr() * f.kappa(g.momentum(i), a)?;
                }
            } else {
                let k = t_kernel_fn(spec);
                for i in 0..g.len() {
                    acc += phi[i].norm_sqr() * kappa_eval(&k, g.momentum(i), a);
                }
            }
        }
        ObservableSpec::StressEnergyM { n } => {
            let rest = FourVector::time_unit();
            let k = |p: [f64; 3], q: [f64; 3]| {
                kernel_m(mass, n, &rest, &FourVector::on_shell(p, mass), &FourVector::on_shell(q, mass)).expect("validated frame")
            };
            for i in 0..g.len() {
                acc += phi[i].norm_sqr() * kappa_eval(k, g.momentum(i), a);
            }
        }
    }
    Ok(acc * dv)
}

/// Second moment along axis `a` split into the Newton-Wigner part and the kernel correction.
pub fn second_moment_decomposition(
    obs: &ObservableSpec,
    state: &MomentumState,
    surface: &Surface,
    a: usize,
    cfg: &QuadConfig,
) -> Result<SecondMomentDecomposition> {
    let mut alpha = [0u32; 3];
    alpha[a] = 2;
    let total = moment(obs, state, surface, alpha, cfg)?;
    // translate to the slice time: the Newton-Wigner part is taken for the state seen at t
    let nw_part = nw_second_moment_at(state, surface.time([0.0; 3]), a);
    Ok(SecondMomentDecomposition {
        total: total.value,
        nw_part,
        kappa_part: kappa_expectation(obs, state, a)?,
        quad_error: total.quad_error,
        truncation_error: total.truncation_error,
        tolerance: total.combined_tolerance(),
    })
}

fn nw_moments_at(state: &MomentumState, t: f64, a: usize) -> (f64, f64) {
    if t == 0.0 {
        let m1 = state.nw_expectation(a).value;
        return (m1, state.nw_second_moment(a));
    }
    // (N(t))_a = N_a + (p_a / p0) t acts on phi by multiplication in the velocity term
    let g = state.grid();
    let phi = state.phi_values();
    let d = state.phi_derivative(a);
    let dv = g.cell_volume();
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..g.len() {
        let v = g.momentum(i)[a] / g.energy(i);
        // (i d + v t) phi
        let w = d[i] * Complex64::new(0.0, 1.0) + phi[i] * (v * t);
        m1 += (phi[i].conj() * w).re;
        m2 += w.norm_sqr();
    }
    (m1 * dv, m2 * dv)
}

fn nw_second_moment_at(state: &MomentumState, t: f64, a: usize) -> f64 {
    nw_moments_at(state, t, a).1
}

/// Newton-Wigner first moment on the rest slice at time `t`.
pub fn nw_first_moment_at(state: &MomentumState, t: f64, a: usize) -> f64 {
    nw_moments_at(state, t, a).0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeisenbergReport {
    pub dx: f64,
    pub dp: f64,
    pub lhs: f64,
    pub modified_rhs: f64,
    pub standard_rhs: f64,
    pub kappa: f64,
    /// Quadrature and truncation budgets of the moments propagated to `lhs`.
    pub quad_error: f64,
    pub truncation_error: f64,
    pub tolerance: f64,
    pub modified_holds: bool,
    pub standard_holds: bool,
}

/// Position spread from the observable's first and second moments, momentum spread from `|phi|^2`.
pub fn heisenberg_report(
    obs: &ObservableSpec,
    state: &MomentumState,
    surface: &Surface,
    a: usize,
    cfg: &QuadConfig,
) -> Result<HeisenbergReport> {
    let mut e1 = [0u32; 3];
    e1[a] = 1;
    let mut e2 = [0u32; 3];
    e2[a] = 2;
    let m1 = moment(obs, state, surface, e1, cfg)?;
    let m2 = moment(obs, state, surface, e2, cfg)?;
    let var_x = (m2.value - m1.value * m1.value).max(0.0);
    let dx = var_x.sqrt();
    let (_, var_p) = state.momentum_moments(a);
    let dp = var_p.max(0.0).sqrt();
    let kappa = kappa_expectation(obs, state, a)?;
    let lhs = dx * dp;
    let modified_rhs = 0.5 * (1.0 + 4.0 * var_p * kappa).max(0.0).sqrt();
    // error of dx from the moment budgets, propagated to lhs
    let to_lhs = |e2: f64, e1: f64| {
        let var_err = e2 + 2.0 * m1.value.abs() * e1;
        if dx > 0.0 {
            dp * var_err / (2.0 * dx)
        } else {
            dp * var_err.sqrt()
        }
    };
    let quad_error = to_lhs(m2.quad_error, m1.quad_error);
    let truncation_error = to_lhs(m2.truncation_error, m1.truncation_error);
    let tolerance = to_lhs(m2.combined_tolerance(), m1.combined_tolerance()) + CROSS_TERM_SLACK;
    Ok(HeisenbergReport {
        dx,
        dp,
        lhs,
        modified_rhs,
        standard_rhs: 0.5,
        kappa,
        quad_error,
        truncation_error,
        tolerance,
        modified_holds: lhs >= modified_rhs - tolerance,
        standard_holds: lhs >= 0.5 - tolerance,
    })
}

/// Largest difference between the stress-energy kernel and the operator-composition kernel on `samples`.
pub fn mpovm_kernel_crosscheck(mass: f64, n: &FourVector, n_sigma: &FourVector, samples: &[(FourVector, FourVector)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (q, p) in samples {
        let a = kernel_m(mass, n, n_sigma, q, p)?;
        let b = mpovm_operator_kernel(mass, n, n_sigma, q, p)?;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::{unit_future, PoincareElement, Transform};
    use crate::states::MassShellGrid;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<MassShellGrid> {
        Arc::new(MassShellGrid::for_spread(1.0, 0.5, n).unwrap())
    }

    fn packet(n: usize) -> MomentumState {
        MomentumState::gaussian(grid(n), [0.3, -0.2, 0.1], [0.45, 0.5, 0.55], [0.4, -0.3, 0.2]).unwrap()
    }

    fn cfg() -> QuadConfig {
        QuadConfig { spatial_nodes_per_axis: 16, refinement_levels: 2, ..QuadConfig::default() }
    }

    fn observables() -> Vec<ObservableSpec> {
        vec![
            ObservableSpec::CausalKernelT { spec: CausalKernelSpec::power_law(1.5, 1.0).unwrap() },
            ObservableSpec::StressEnergyM { n: FourVector::time_unit() },
            ObservableSpec::StressEnergyM { n: unit_future([0.5f64.sinh(), 0.0, 0.0]) },
            ObservableSpec::NewtonWignerQ,
        ]
    }

    #[test]
    fn normalization_on_rest_slice() {
        let s = packet(8);
        for obs in observables() {
            let p = total_norm(&obs, &s, &Surface::slice(0.0), &cfg()).unwrap();
            assert!((p.value - 1.0).abs() <= p.combined_tolerance(), "{} {p:?}", obs.label());
            assert!((p.value - 1.0).abs() < 1e-8, "{} {p:?}", obs.label());
        }
    }

    #[test]
    fn normalization_on_tilted_and_curved_surfaces() {
        let s = packet(8);
        let tilted = Surface::flat(0.2, [0.4, 0.0, 0.0]).unwrap();
        let bump = Surface::gaussian_bump(0.0, [0.0; 3], 0.3, [0.0; 3], 1.0).unwrap();
        for obs in &observables()[..3] {
            for surf in [&tilted, &bump] {
                let p = total_norm(obs, &s, surf, &cfg()).unwrap();
                assert!((p.value - 1.0).abs() <= p.combined_tolerance(), "{} {p:?}", obs.label());
            }
        }
        assert!(total_norm(&ObservableSpec::NewtonWignerQ, &s, &tilted, &cfg()).is_err());
    }

    #[test]
    fn complement_adds_up() {
        let s = packet(8);
        let ball = Region::ball([0.4, -0.3, 0.2], 1.5);
        for obs in observables() {
            let a = probability(&obs, &s, &Surface::slice(0.0), &ball, &cfg()).unwrap();
            let b = probability(&obs, &s, &Surface::slice(0.0), &ball.clone().complement(), &cfg()).unwrap();
            assert!((a.value + b.value - 1.0).abs() <= a.combined_tolerance() + b.combined_tolerance());
            assert!(a.value > 0.0 && b.value > 0.0);
        }
    }

    #[test]
    fn pointwise_and_grid_densities_agree() {
        let s = packet(6);
        let surf = Surface::gaussian_bump(0.1, [0.1, 0.0, 0.0], 0.2, [0.0; 3], 1.0).unwrap();
        let tg = TensorGrid { axes: [vec![-0.5, 0.5], vec![0.0, 1.0], vec![0.3]] };
        for obs in &observables()[..3] {
            let d = density_on_grid(obs, &s, &surf, tg.axes.clone()).unwrap();
            for i in 0..tg.len() {
                let p = density_at(obs, &s, &surf, tg.point(i)).unwrap();
                assert!((d[i] - p).abs() < 1e-12, "{} {} {}", obs.label(), d[i], p);
                assert!(p >= -1e-10);
            }
        }
    }

    #[test]
    fn first_moments_agree_across_observables() {
        let s = packet(8);
        let want = s.nw_expectation(0).value;
        for obs in observables() {
            let m = moment(&obs, &s, &Surface::slice(0.0), [1, 0, 0], &cfg()).unwrap();
            assert!((m.value - want).abs() <= m.combined_tolerance(), "{} {} {want} {m:?}", obs.label(), m.value);
        }
    }

    #[test]
    fn second_moment_identity() {
        let s = packet(8);
        for obs in observables() {
            let d = second_moment_decomposition(&obs, &s, &Surface::slice(0.0), 0, &cfg()).unwrap();
            assert!(d.residual() <= d.tolerance, "{} {d:?}", obs.label());
            assert!(d.kappa_part >= -1e-8);
        }
    }

    #[test]
    fn heisenberg_for_gaussians() {
        let s = MomentumState::gaussian(grid(8), [0.0; 3], [0.5; 3], [0.0; 3]).unwrap();
        let r = heisenberg_report(&ObservableSpec::NewtonWignerQ, &s, &Surface::slice(0.0), 0, &cfg()).unwrap();
        assert!(r.lhs >= 0.5 - 1e-3, "{r:?}");
        let t = heisenberg_report(&observables()[0], &s, &Surface::slice(0.0), 0, &cfg()).unwrap();
        assert!(t.modified_holds && t.modified_rhs > 0.5, "{t:?}");
    }

    #[test]
    fn mpovm_crosscheck_small() {
        let pairs: Vec<(FourVector, FourVector)> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.37;
                (FourVector::on_shell([a.sin(), a.cos(), 0.2], 1.0), FourVector::on_shell([0.5 - a.cos(), 0.1, a.sin()], 1.0))
            })
            .collect();
        let rest = FourVector::time_unit();
        assert!(mpovm_kernel_crosscheck(1.0, &rest, &rest, &pairs).unwrap() < 1e-14);
        let b = PoincareElement::from_list(&[Transform::BoostX(0.5)]).apply_vector(&rest);
        assert!(mpovm_kernel_crosscheck(1.0, &b, &rest, &pairs).unwrap() < 1e-12);
    }
}
