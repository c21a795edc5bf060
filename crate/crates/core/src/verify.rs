//! Scenario-level checks: causality, coherence, covariance, conservation and the Newton-Wigner leak.

use crate::currents::CurrentField;
use crate::error::{Error, Result};
use crate::minkowski::{InfluenceRegion, PoincareElement, Region, RegionSampler};
use crate::observables::{current_flux, probability, ObservableSpec, ProbabilityEstimate};
use crate::quad::{momentum_tail, QuadConfig};
use crate::states::{MomentumState, StateRep};
use crate::Surface;

/// A localization observable, a state, a source region and the surfaces it is transported to.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub obs: ObservableSpec,
    pub state: MomentumState,
    pub source: (Surface, Region),
    pub targets: Vec<Surface>,
    pub quad: QuadConfig,
    pub seed: u64,
    pub sampler: RegionSampler,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.obs.validate()?;
        self.quad.validate()?;
        let curved = !self.source.0.is_flat() || self.targets.iter().any(|s| !s.is_flat());
        if curved && !self.source.1.is_bounded() {
            return Err(Error::Config("source region must be bounded when a surface is curved".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("scenario has no target surface".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausalityOutcome {
    pub p_source: ProbabilityEstimate,
    pub p_influence: ProbabilityEstimate,
    /// `p_influence - p_source`.
    pub margin: f64,
    /// Sum of both total errors.
    pub tolerance: f64,
    pub pass: bool,
}

impl CausalityOutcome {
    /// Margin above three times the error budget.
    pub fn strict(&self) -> bool {
        self.margin > 3.0 * self.tolerance
    }
}

/// Probability of the source region against the probability of its region of influence on each target.
pub fn check_causality(sc: &Scenario) -> Result<Vec<CausalityOutcome>> {
    sc.validate()?;
    let (from, delta) = &sc.source;
    let quad = QuadConfig { seed: sc.seed, ..sc.quad.clone() };
    let p_source = probability(&sc.obs, &sc.state, from, delta, &quad)?;
    sc.targets
        .iter()
        .map(|to| {
            let influence = InfluenceRegion::new(delta.clone(), *from, *to, sc.sampler)?;
            let p_influence = probability(&sc.obs, &sc.state, to, &influence, &quad)?;
            let tolerance = p_source.total_error() + p_influence.total_error();
            let margin = p_influence.value - p_source.value;
            Ok(CausalityOutcome { p_source, p_influence, margin, tolerance, pass: margin >= -tolerance })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairOutcome {
    pub first: ProbabilityEstimate,
    pub second: ProbabilityEstimate,
    /// Bound on the probability change from comparing two different lattice states (0 when one state is used).
    pub state_mismatch: f64,
    /// Both total errors plus `state_mismatch`.
    pub tolerance: f64,
    pub pass: bool,
}

impl PairOutcome {
    fn new(first: ProbabilityEstimate, second: ProbabilityEstimate) -> Self {
        Self::with_mismatch(first, second, 0.0)
    }

    fn with_mismatch(first: ProbabilityEstimate, second: ProbabilityEstimate, state_mismatch: f64) -> Self {
        let tolerance = first.total_error() + second.total_error() + state_mismatch;
        Self { first, second, state_mismatch, tolerance, pass: (first.value - second.value).abs() <= tolerance }
    }

    pub fn difference(&self) -> f64 {
        (self.first.value - self.second.value).abs()
    }
}

/// Probabilities of one region on two surfaces that coincide on a neighbourhood of it.
pub fn check_coherence(
    obs: &ObservableSpec,
    state: &MomentumState,
    s1: &Surface,
    s2: &Surface,
    region: &Region,
    cfg: &QuadConfig,
) -> Result<PairOutcome> {
    let (lo, hi) = region
        .bounds()
        .ok_or_else(|| Error::Misconfigured("coherence needs a bounded region".into()))?;
    let c = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]));
    let r = (0..3).map(|k| 0.5 * (hi[k] - lo[k])).map(|v| v * v).sum::<f64>().sqrt();
    if !s1.agrees_on_ball(s2, c, r) {
        return Err(Error::Misconfigured(format!("surfaces differ within {r} of {c:?}")));
    }
    let p1 = probability(obs, state, s1, region, cfg)?;
    let p2 = if s1 == s2 { p1 } else { probability(obs, state, s2, region, cfg)? };
    Ok(PairOutcome::new(p1, p2))
}

/// Probability of `(sigma, region)` against the transformed state on the image surface and region.
/// With `transform_frame` false the stress-energy frame is left unboosted (negative control).
pub fn check_covariance(
    obs: &ObservableSpec,
    h: &PoincareElement,
    state: &MomentumState,
    sigma: &Surface,
    region: &Region,
    cfg: &QuadConfig,
    transform_frame: bool,
) -> Result<PairOutcome> {
    if !state.rep().is_analytic() {
        return Err(Error::Unsupported("covariance checks need an analytic state".into()));
    }
    let moved_obs = match obs {
        ObservableSpec::StressEnergyM { n } if transform_frame => ObservableSpec::StressEnergyM { n: h.apply_vector(n) },
        other => other.clone(),
    };
    let moved_surface = h.map_surface(sigma)?;
    let moved_region = h.map_region(sigma, region)?;
    let moved_state = state.poincare_act(h);
    let p0 = probability(obs, state, sigma, region, cfg)?;
    let p1 = probability(&moved_obs, &moved_state, &moved_surface, &moved_region, cfg)?;
    // Each lattice state is within sqrt(tail) of the exact one in norm, and a probability moves by at
    // most twice the norm distance; the transformed state can only have lost more than the original.
    let tail0 = momentum_tail(state);
    let tail1 = tail0 + momentum_tail(&moved_state);
    Ok(PairOutcome::with_mismatch(p0, p1, 2.0 * (tail0.sqrt() + tail1.sqrt())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConservationOutcome {
    pub values: Vec<ProbabilityEstimate>,
    pub max_rel_dev: f64,
    /// Relative tolerance from the two largest error budgets.
    pub tolerance: f64,
    pub pass: bool,
}

/// Flux of the current through each surface.
pub fn check_conservation(current: &CurrentField, surfaces: &[Surface], cfg: &QuadConfig) -> Result<ConservationOutcome> {
    if surfaces.is_empty() {
        return Err(Error::Config("conservation needs at least one surface".into()));
    }
    let values = surfaces.iter().map(|s| current_flux(current, s, cfg)).collect::<Result<Vec<_>>>()?;
    let mean = values.iter().map(|v| v.value).sum::<f64>() / values.len() as f64;
    if mean.abs() < f64::MIN_POSITIVE {
        return Err(Error::Domain("current has zero flux".into()));
    }
    let hi = values.iter().map(|v| v.value).fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let max_rel_dev = (hi - lo) / mean.abs();
    let mut errs: Vec<f64> = values.iter().map(|v| v.total_error()).collect();
    errs.sort_by(|a, b| b.total_cmp(a));
    let tolerance = (errs[0] + errs.get(1).copied().unwrap_or(0.0)) / mean.abs();
    Ok(ConservationOutcome { values, max_rel_dev, tolerance, pass: max_rel_dev <= tolerance })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeakOutcome {
    /// Newton-Wigner probability outside the light-grown ball.
    pub leak: ProbabilityEstimate,
    pub radius: f64,
    pub time: f64,
}

impl LeakOutcome {
    /// Leak above ten times its own error budget.
    pub fn resolved(&self) -> bool {
        self.leak.value > 10.0 * self.leak.total_error()
    }
}

/// Newton-Wigner probability outside `Ball(center, R + t)` at time `t` for a state localized in `Ball(center, R)`.
pub fn hegerfeldt_leak_demo(state: &MomentumState, t: f64, cfg: &QuadConfig) -> Result<LeakOutcome> {
    let StateRep::NwBall { center_x, radius } = *state.rep() else {
        return Err(Error::Unsupported("the leak demo needs a state built with MomentumState::nw_ball".into()));
    };
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain("leak time must be finite and non-negative".into()));
    }
    let outside = Region::ball(center_x, radius + t).complement();
    let leak = probability(&ObservableSpec::NewtonWignerQ, state, &Surface::slice(t), &outside, cfg)?;
    Ok(LeakOutcome { leak, radius, time: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CausalKernelSpec;
    use crate::minkowski::Transform;
    use crate::states::MassShellGrid;
    use crate::FourVector;
    use std::sync::Arc;

    fn packet() -> MomentumState {
        let g = Arc::new(MassShellGrid::for_spread(1.0, 0.5, 16).unwrap());
        MomentumState::gaussian(g, [0.3, 0.0, 0.0], [0.5; 3], [0.0; 3]).unwrap()
    }

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn tg() -> ObservableSpec {
        ObservableSpec::CausalKernelT { spec: CausalKernelSpec::power_law(1.5, 1.0).unwrap() }
    }

    #[test]
    fn causality_same_surface_has_zero_margin() {
        let s = Surface::slice(0.0);
        let sc = Scenario {
            obs: tg(),
            state: packet(),
            source: (s, Region::ball([0.0; 3], 1.0)),
            targets: vec![s],
            quad: cfg(),
            seed: 0,
            sampler: RegionSampler::default(),
        };
        let out = check_causality(&sc).unwrap();
        assert_eq!(out[0].margin, 0.0);
        assert!(out[0].pass);
    }

    #[test]
    fn causality_flat_to_later_slice() {
        let sc = Scenario {
            obs: ObservableSpec::StressEnergyM { n: FourVector::time_unit() },
            state: packet(),
            source: (Surface::slice(0.0), Region::ball([0.0; 3], 1.0)),
            targets: vec![Surface::slice(1.0)],
            quad: cfg(),
            seed: 0,
            sampler: RegionSampler::default(),
        };
        let out = check_causality(&sc).unwrap();
        assert!(out[0].pass && out[0].strict(), "{:?}", out[0]);
    }

    #[test]
    fn coherence_rejects_disagreeing_surfaces() {
        let a = Surface::gaussian_bump(0.0, [0.0; 3], 0.3, [0.0; 3], 1.0).unwrap();
        let b = Surface::slice(0.0);
        let r = Region::ball([0.0; 3], 0.5);
        assert!(matches!(check_coherence(&tg(), &packet(), &a, &b, &r, &cfg()), Err(Error::Misconfigured(_))));
        let same = check_coherence(&tg(), &packet(), &a, &a, &r, &cfg()).unwrap();
        assert_eq!(same.difference(), 0.0);
    }

    #[test]
    fn covariance_translation() {
        let h = PoincareElement::from_list(&[Transform::Translation(FourVector { x0: 0.2, xs: [0.5, -0.3, 0.1] })]);
        let out = check_covariance(&tg(), &h, &packet(), &Surface::slice(0.0), &Region::ball([0.0; 3], 1.0), &cfg(), true).unwrap();
        assert!(out.pass, "{out:?}");
    }

    #[test]
    fn conservation_on_parallel_slices() {
        let f = CurrentField::stress_energy(FourVector::time_unit(), packet()).unwrap();
        let out = check_conservation(&f, &[Surface::slice(-1.0), Surface::slice(0.0), Surface::slice(2.0)], &cfg()).unwrap();
        assert!(out.max_rel_dev < 1e-6, "{out:?}");
    }

    #[test]
    fn leak_at_time_zero_is_at_the_floor() {
        let g = Arc::new(MassShellGrid::new(1.0, 8.0, 24).unwrap());
        let s = MomentumState::nw_ball(g, [0.0; 3], 1.0).unwrap();
        let out = hegerfeldt_leak_demo(&s, 0.0, &cfg()).unwrap();
        assert!(out.leak.value.abs() <= out.leak.total_error() + 1e-6, "{out:?}");
        assert!(hegerfeldt_leak_demo(&packet(), 0.1, &cfg()).is_err());
    }
}
