//! Midpoint quadrature over chart regions with level-difference error estimates, and tail bounds.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::minkowski::{CellClass, Membership};
use crate::spectral::TensorGrid;
use crate::states::{MomentumState, StateRep};

/// Integrated values are reported with at least this absolute error.
pub const ERROR_FLOOR: f64 = 1e-12;
/// Level differences above this are reported as non-convergence.
pub const DIVERGENCE_LIMIT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadConfig {
    /// Half side of the integration cube; `None` picks half the spatial period of the momentum grid.
    pub spatial_box_half: Option<f64>,
    /// Cube center; `None` follows the packet.
    pub box_center: Option<[f64; 3]>,
    pub spatial_nodes_per_axis: usize,
    /// Number of grids `M, M/2, M/4` used for the error estimate.
    pub refinement_levels: usize,
    /// Membership subsamples per axis in cells cut by a region boundary.
    pub boundary_subsamples: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub target_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            spatial_box_half: None,
            box_center: None,
            spatial_nodes_per_axis: 32,
            refinement_levels: 2,
            boundary_subsamples: 4,
            mc_samples: 100_000,
            seed: 0,
            target_tol: 1e-3,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spatial_nodes_per_axis < 8 {
            return Err(Error::Config("spatial_nodes_per_axis must be at least 8".into()));
        }
        if !(1..=3).contains(&self.refinement_levels) {
            return Err(Error::Config("refinement_levels must be 1, 2 or 3".into()));
        }
        if self.spatial_nodes_per_axis >> (self.refinement_levels - 1) < 4 {
            return Err(Error::Config("the coarsest refinement level needs at least 4 nodes per axis".into()));
        }
        if self.boundary_subsamples == 0 {
            return Err(Error::Config("boundary_subsamples must be positive".into()));
        }
        if let Some(h) = self.spatial_box_half {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config("spatial_box_half must be positive".into()));
            }
        }
        if !(self.target_tol > 0.0) {
            return Err(Error::Config("target_tol must be positive".into()));
        }
        Ok(())
    }

    /// Node counts of the refinement levels, finest first.
    pub fn level_nodes(&self) -> Vec<usize> {
        (0..self.refinement_levels).map(|l| self.spatial_nodes_per_axis >> l).collect()
    }
}

/// Integration cube `center +- half`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationBox {
    pub center: [f64; 3],
    pub half: f64,
}

impl IntegrationBox {
    /// Box for `state` around time `t`: the configured extent, or half a spatial period.
    /// A box larger than one period would count periodic images twice and is rejected.
    pub fn for_state(state: &MomentumState, cfg: &QuadConfig, t: f64) -> Result<Self> {
        let period = state.grid().period();
        let half = cfg.spatial_box_half.unwrap_or(0.5 * period);
        if half > 0.5 * period * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "integration box half-width {half} exceeds half the spatial period {}",
                0.5 * period
            )));
        }
        let center = match cfg.box_center {
            Some(c) => c,
            None => packet_center(state, t),
        };
        Ok(Self { center, half })
    }

    pub(crate) fn grid(&self, nodes: usize) -> TensorGrid {
        let h = 2.0 * self.half / nodes as f64;
        let axis = |c: f64| (0..nodes).map(|i| c - self.half + (i as f64 + 0.5) * h).collect::<Vec<_>>();
        TensorGrid { axes: [axis(self.center[0]), axis(self.center[1]), axis(self.center[2])] }
    }

    pub fn spacing(&self, nodes: usize) -> f64 {
        2.0 * self.half / nodes as f64
    }
}

/// Newton-Wigner center `<N> + <v> t`.
pub fn packet_center(state: &MomentumState, t: f64) -> [f64; 3] {
    let v = state.mean_velocity();
    [0, 1, 2].map(|a| state.nw_expectation(a).value + v[a] * t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// Level values, finest first.
    pub levels: Vec<f64>,
}

/// Finest value with an error from level differences; three levels use the observed contraction ratio.
pub fn richardson(levels: &[f64]) -> (f64, f64) {
    let value = levels[0];
    let floor = ERROR_FLOOR + 1e-14 * value.abs();
    let error = match levels.len() {
        1 => 0.0,
        2 => (levels[0] - levels[1]).abs(),
        _ => {
            let d0 = (levels[0] - levels[1]).abs();
            let d1 = (levels[1] - levels[2]).abs();
            if d1 > 0.0 && d0 < d1 {
                let r = d0 / d1;
                // geometric tail d0 (r + r^2 + ...), never below the plain difference
                d0.max(d0 * r / (1.0 - r))
            } else {
                d0.max(d1)
            }
        }
    };
    (value, error + floor)
}

/// Membership of one cell: the covered fraction and the offset of the covered part's centroid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct CellWeight {
    pub fraction: f64,
    pub centroid: [f64; 3],
}

const FULL: CellWeight = CellWeight { fraction: 1.0, centroid: [0.0; 3] };
const EMPTY: CellWeight = CellWeight { fraction: 0.0, centroid: [0.0; 3] };

/// Weight of each cell: full inside, empty outside, member subsamples when cut.
pub(crate) fn cell_weights(region: &dyn Membership, grid: &TensorGrid, spacing: f64, subsamples: usize) -> Vec<CellWeight> {
    let half = 0.5 * spacing;
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let c = grid.point(i);
            match region.classify_cell(c, [half; 3]) {
                CellClass::Inside => FULL,
                CellClass::Outside => EMPTY,
                CellClass::Mixed => mixed_weight(region, c, spacing, subsamples),
            }
        })
        .collect()
}

/// Cut cell: exact chords along x on an `s x s` lattice in (y, z) when the region has them,
/// otherwise membership of an `s^3` subsample lattice.
fn mixed_weight(region: &dyn Membership, c: [f64; 3], spacing: f64, s: usize) -> CellWeight {
    let half = 0.5 * spacing;
    let step = spacing / s as f64;
    let off = |k: usize| -half + (k as f64 + 0.5) * step;
    let mut covered = 0.0;
    let mut sum = [0.0; 3];
    let mut samples = 0.0;
    if region.chord(c[1], c[2], c[0] - half, c[0] + half).is_some() {
        for b in 0..s {
            for d in 0..s {
                let (oy, oz) = (off(b), off(d));
                let (len, mom) = region.chord(c[1] + oy, c[2] + oz, c[0] - half, c[0] + half).expect("closed form");
                covered += len / spacing;
                sum[0] += mom / spacing - len / spacing * c[0];
                sum[1] += len / spacing * oy;
                sum[2] += len / spacing * oz;
            }
        }
        samples = (s * s) as f64;
    } else {
        for a in 0..s {
            for b in 0..s {
                for d in 0..s {
                    let o = [off(a), off(b), off(d)];
                    if region.contains([c[0] + o[0], c[1] + o[1], c[2] + o[2]]) {
                        covered += 1.0;
                        (0..3).for_each(|k| sum[k] += o[k]);
                    }
                }
            }
        }
        samples += (s * s * s) as f64;
    }
    if covered <= 0.0 {
        return EMPTY;
    }
    CellWeight { fraction: covered / samples, centroid: sum.map(|v| v / covered) }
}

/// Sum of `value * fraction` with a first-order centroid correction in cut cells.
fn weighted_sum(values: &[f64], weights: &[CellWeight], grid: &TensorGrid, spacing: f64) -> Result<f64> {
    let n = [grid.axes[0].len(), grid.axes[1].len(), grid.axes[2].len()];
    let stride = [n[1] * n[2], n[2], 1];
    let mut acc = 0.0;
    for (i, (v, w)) in values.iter().zip(weights).enumerate() {
        if w.fraction == 0.0 {
            continue;
        }
        if !v.is_finite() {
            return Err(Error::NonFiniteDensity { point: grid.point(i) });
        }
        let mut term = *v;
        if w.fraction < 1.0 {
            let idx = [i / stride[0], (i / stride[1]) % n[1], i % n[2]];
            for k in 0..3 {
                if idx[k] > 0 && idx[k] + 1 < n[k] {
                    let grad = (values[i + stride[k]] - values[i - stride[k]]) / (2.0 * spacing);
                    if grad.is_finite() {
                        term += grad * w.centroid[k];
                    }
                }
            }
        }
        acc += term * w.fraction;
    }
    Ok(acc * spacing.powi(3))
}

/// Integrates grid-evaluated densities over `region` at every refinement level.
pub(crate) fn integrate_levels(
    eval: impl FnMut(&TensorGrid) -> Result<Vec<f64>>,
    region: &dyn Membership,
    bx: &IntegrationBox,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let levels = level_sums(eval, &[region], bx, cfg)?.swap_remove(0);
    finish_levels(levels)
}

/// Level sums `[region][level]` of one density over several regions, evaluating the density once per level.
pub(crate) fn level_sums(
    mut eval: impl FnMut(&TensorGrid) -> Result<Vec<f64>>,
    regions: &[&dyn Membership],
    bx: &IntegrationBox,
    cfg: &QuadConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let mut out = vec![Vec::with_capacity(cfg.refinement_levels); regions.len()];
    for m in cfg.level_nodes() {
        let grid = bx.grid(m);
        let h = bx.spacing(m);
        let values = eval(&grid)?;
        for (r, region) in regions.iter().enumerate() {
            let weights = cell_weights(*region, &grid, h, cfg.boundary_subsamples);
            out[r].push(weighted_sum(&values, &weights, &grid, h)?);
        }
    }
    Ok(out)
}

/// Richardson error estimate with the divergence guard.
pub(crate) fn finish_levels(levels: Vec<f64>) -> Result<QuadResult> {
    let (value, error) = richardson(&levels);
    if error > DIVERGENCE_LIMIT {
        return Err(Error::NonConvergence { value, error });
    }
    Ok(QuadResult { value, error, levels })
}

/// Midpoint integral of a pointwise density over `region` inside `bx`.
pub fn integrate_region<F>(density: F, region: &dyn Membership, bx: &IntegrationBox, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    integrate_levels(|grid| Ok((0..grid.len()).into_par_iter().map(|i| density(grid.point(i))).collect()), region, bx, cfg)
}

/// Momentum and spatial tail estimates for a state restricted to a box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationBudget {
    pub momentum: f64,
    pub spatial: f64,
}

impl TruncationBudget {
    pub fn total(&self) -> f64 {
        self.momentum + self.spatial
    }
}

fn gaussian_outside(lo: f64, hi: f64, mean: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if mean < lo || mean > hi { 1.0 } else { 0.0 };
    }
    let s = std::f64::consts::SQRT_2 * sigma;
    0.5 * libm::erfc((hi - mean) / s) + 0.5 * libm::erfc((mean - lo) / s)
}

fn nw_ball_momentum_tail(radius: f64, cutoff: f64) -> f64 {
    // |phi|^2 mass outside the sphere |k| = cutoff; the cube contains that sphere
    let f = |k: f64| {
        let steps = 600;
        let h = radius / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let r = i as f64 * h;
            let q = r / radius;
            let prof = if q >= 1.0 { 0.0 } else { (1.0 - 1.0 / (1.0 - q * q)).exp() };
            let kr = k * r;
            let sinc = if kr.abs() < 1e-8 { 1.0 } else { kr.sin() / kr };
            let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * prof * r * r * sinc;
        }
        acc * h / 3.0 * 4.0 * PI / (2.0 * PI).powf(1.5)
    };
    let radial = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        (0..=n)
            .map(|i| {
                let k = a + i as f64 * h;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * 4.0 * PI * k * k * f(k).powi(2)
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    let total = radial(0.0, 40.0 / radius + cutoff, 800);
    let inside = radial(0.0, cutoff, 400);
    ((total - inside) / total).max(0.0)
}

/// Momentum mass beyond the grid cutoff, closed form where the representation allows it.
pub fn momentum_tail(state: &MomentumState) -> f64 {
    let p = state.grid().half_extent();
    // translations leave |phi| unchanged
    let untransformed = state.transform().lambda == crate::minkowski::PoincareElement::identity().lambda;
    let base = match state.rep() {
        StateRep::AnalyticGaussian { center_p, spread, .. } if untransformed => {
            (0..3).map(|a| gaussian_outside(-p, p, center_p[a], spread[a])).sum()
        }
        StateRep::CompactBump { center_p, outer_radius, .. } if untransformed => {
            if center_p.iter().all(|c| c.abs() + outer_radius <= p) {
                0.0
            } else {
                (0..3).map(|a| gaussian_outside(-p, p, center_p[a], outer_radius / 3.0)).sum()
            }
        }
        StateRep::NwBall { radius, .. } if untransformed => nw_ball_momentum_tail(*radius, p),
        StateRep::GridSamples => 0.0,
        _ => (0..3)
            .map(|a| {
                let (mean, var) = state.momentum_moments(a);
                gaussian_outside(-p, p, mean, var.max(0.0).sqrt())
            })
            .sum(),
    };
    base + state.truncation_loss()
}

/// Spatial mass outside the box at times in `[t_min, t_max]`, from the Newton-Wigner center and a
/// spreading width `sigma(t)^2 = var_x + var_v t^2`.
pub fn spatial_tail(state: &MomentumState, bx: &IntegrationBox, t_min: f64, t_max: f64) -> f64 {
    if let StateRep::NwBall { .. } = state.rep() {
        // compact Newton-Wigner support; the leak itself is what gets measured
        return 0.0;
    }
    let v = state.mean_velocity();
    let g = state.grid();
    let mut worst = 0.0f64;
    for t in [t_min, t_max] {
        let mut mass = 0.0;
        for a in 0..3 {
            let mean_x = state.nw_expectation(a).value;
            let var_x = (state.nw_second_moment(a) - mean_x * mean_x).max(0.0);
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for i in 0..g.len() {
                let w = state.psi()[i].norm_sqr() / g.energy(i);
                let u = g.momentum(i)[a] / g.energy(i);
                m0 += w;
                m1 += w * u;
                m2 += w * u * u;
            }
            let var_v = (m2 / m0 - (m1 / m0).powi(2)).max(0.0);
            let sigma = (var_x + var_v * t * t).sqrt();
            let c = mean_x + v[a] * t;
            mass += gaussian_outside(bx.center[a] - bx.half, bx.center[a] + bx.half, c, sigma);
        }
        worst = worst.max(mass);
    }
    worst
}

pub fn truncation_budget(state: &MomentumState, bx: &IntegrationBox, t_min: f64, t_max: f64) -> TruncationBudget {
    TruncationBudget { momentum: momentum_tail(state), spatial: spatial_tail(state, bx, t_min, t_max) }
}

/// Combined momentum and spatial tail bound at `t = 0` for the configured box.
pub fn tail_bound(state: &MomentumState, cfg: &QuadConfig) -> Result<f64> {
    let bx = IntegrationBox::for_state(state, cfg, 0.0)?;
    Ok(truncation_budget(state, &bx, 0.0, 0.0).total())
}
