//! Execution of one declared check into one report row.

use cauchyloc::currents::{divergence_residual, CurrentField};
use cauchyloc::kernels::{
    gram_psd_check, integral_positivity_check, kappa_eval, m_kernel_fn, mollifier_cluster, t_kernel_fn, PositivityBox,
};
use cauchyloc::minkowski::{unit_future, PoincareElement, RegionSampler};
use cauchyloc::observables::{
    density_on_grid, heisenberg_report, kappa_expectation, moment, mpovm_kernel_crosscheck, nw_first_moment_at, probability,
    second_moment_decomposition, surface_box, total_norm, ProbabilityEstimate,
};
use cauchyloc::quad::packet_center;
use cauchyloc::states::kg_residual;
use cauchyloc::verify::{check_causality, check_coherence, check_conservation, check_covariance, hegerfeldt_leak_demo};
use cauchyloc::{Complex64, FourVector, MomentumState, ObservableSpec, QuadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::report::{Detail, Row};
use crate::scenario::{CheckFile, KernelMethod, ResidualTarget, Scenario};

/// No probability check passes with an error budget wider than this.
pub const PROBABILITY_BUDGET_CAP: f64 = 1e-2;
/// Lower bound accepted for sampled densities.
pub const DENSITY_FLOOR: f64 = -1e-10;
/// Relative eigenvalue tolerance of the Gram certificate.
pub const GRAM_TOL: f64 = 1e-8;
pub const INTEGRAL_FLOOR: f64 = -1e-9;
pub const MOLLIFIER_TOL: f64 = 1e-3;
pub const MPOVM_TOL: f64 = 1e-12;
/// First-moment budgets must stay below this fraction of the packet width.
pub const MOMENT_BUDGET_FRACTION: f64 = 5e-3;
pub const KAPPA_FLOOR: f64 = -1e-8;
pub const KAPPA_ORACLE_TOL: f64 = 1e-6;
pub const RESIDUAL_RATIO: [f64; 2] = [3.5, 4.5];
/// Leak must exceed this multiple of its error budget.
pub const LEAK_FACTOR: f64 = 10.0;
/// Mollifier scale and the cube that holds its support.
const MOLLIFIER_SCALE: f64 = 100.0;
const MOLLIFIER_NODES: usize = 10;
const INTEGRAL_NODES: usize = 10;

type Outcome = cauchyloc::Result<()>;

/// SHA-256 over the scenario text digest, the check index and the effective seed.
pub fn inputs_digest(sc: &Scenario, index: usize, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(sc.text_digest);
    h.update((index as u64).to_le_bytes());
    h.update(seed.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs check `index` of `sc`; library errors become a failing row with the message in `details`.
pub fn run_check(sc: &Scenario, index: usize, seed: u64) -> Row {
    let check = &sc.file.checks[index];
    let mut row = Row {
        scenario: sc.name().to_string(),
        check: index,
        kind: check.kind().to_string(),
        digest: inputs_digest(sc, index, seed),
        x: index as f64,
        value: f64::NAN,
        quad_error: 0.0,
        truncation_error: 0.0,
        pass: false,
        details: Vec::new(),
    };
    let mut ctx = Ctx { sc, quad: sc.file.quad.build(seed), rng: rng(seed, index), row: &mut row };
    if let Err(e) = ctx.execute(check) {
        row.pass = false;
        row.details.push(("error".into(), Detail::Text(e.to_string())));
    }
    row
}

fn rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index as u64);
    r
}

struct Ctx<'a> {
    sc: &'a Scenario,
    quad: QuadConfig,
    rng: ChaCha8Rng,
    row: &'a mut Row,
}

impl Ctx<'_> {
    fn detail(&mut self, key: &str, v: impl Into<Detail>) {
        self.row.details.push((key.to_string(), v.into()));
    }

    fn estimate(&mut self, p: &ProbabilityEstimate) {
        self.row.value = p.value;
        self.row.quad_error = p.quad_error;
        self.row.truncation_error = p.truncation_error;
    }

    fn pair(&mut self, a: &ProbabilityEstimate, b: &ProbabilityEstimate) {
        self.row.value = a.value - b.value;
        self.row.quad_error = a.quad_error + b.quad_error;
        self.row.truncation_error = a.truncation_error + b.truncation_error;
    }

    fn within_cap(&self) -> bool {
        self.row.total_error() <= PROBABILITY_BUDGET_CAP
    }

    fn uniform(&mut self, c: f64, half: f64) -> f64 {
        if half == 0.0 {
            c
        } else {
            self.rng.gen_range(c - half..c + half)
        }
    }

    fn point(&mut self, c: [f64; 3], half: f64) -> [f64; 3] {
        c.map(|v| self.uniform(v, half))
    }

    fn execute(&mut self, check: &CheckFile) -> Outcome {
        let sc = self.sc;
        let state = &sc.state;
        match check {
            CheckFile::Normalization { surface, tolerance } => {
                let p = total_norm(sc.observable(), state, sc.surface(surface), &self.quad)?;
                self.estimate(&p);
                self.detail("deviation", p.value - 1.0);
                self.detail("tolerance", *tolerance);
                self.row.pass = (p.value - 1.0).abs() <= *tolerance && self.within_cap();
            }
            CheckFile::Probability { surface, region, x, min_ratio, range } => {
                let p = probability(sc.observable(), state, sc.surface(surface), sc.region(region), &self.quad)?;
                self.estimate(&p);
                let tol = p.combined_tolerance();
                let ratio = p.value / p.total_error();
                self.detail("ratio", ratio);
                let [lo, hi] = range.unwrap_or([0.0, 1.0]);
                let mut pass = p.value >= lo - tol && p.value <= hi + tol;
                if let Some(m) = min_ratio {
                    self.detail("min_ratio", *m);
                    pass &= ratio > *m;
                } else {
                    pass &= self.within_cap();
                }
                if let Some(x) = x {
                    self.row.x = *x;
                }
                self.row.pass = pass;
            }
            CheckFile::Causality { source, region, target } => {
                let scenario = cauchyloc::verify::Scenario {
                    obs: sc.observable().clone(),
                    state: state.clone(),
                    source: (*sc.surface(source), sc.region(region).clone()),
                    targets: vec![*sc.surface(target)],
                    quad: self.quad.clone(),
                    seed: self.quad.seed,
                    sampler: RegionSampler::default(),
                };
                let out = check_causality(&scenario)?.remove(0);
                self.pair(&out.p_influence, &out.p_source);
                self.detail("p_source", out.p_source.value);
                self.detail("p_influence", out.p_influence.value);
                self.detail("strict", out.strict());
                self.row.pass = out.pass && self.within_cap();
            }
            CheckFile::Coherence { surfaces, region } => {
                let out = check_coherence(
                    sc.observable(),
                    state,
                    sc.surface(&surfaces[0]),
                    sc.surface(&surfaces[1]),
                    sc.region(region),
                    &self.quad,
                )?;
                self.pair(&out.first, &out.second);
                self.detail("p_first", out.first.value);
                self.detail("p_second", out.second.value);
                self.row.pass = out.pass && self.within_cap();
            }
            CheckFile::Covariance { surface, region, transforms, transform_frame } => {
                let h = PoincareElement::from_list(&transforms.iter().map(|t| t.build()).collect::<Vec<_>>());
                let out =
                    check_covariance(sc.observable(), &h, state, sc.surface(surface), sc.region(region), &self.quad, *transform_frame)?;
                self.pair(&out.first, &out.second);
                self.row.truncation_error += out.state_mismatch;
                self.detail("p_original", out.first.value);
                self.detail("p_transformed", out.second.value);
                self.detail("state_mismatch", out.state_mismatch);
                self.detail("deviation_over_tolerance", out.difference() / out.tolerance);
                self.row.pass = out.pass && self.within_cap();
            }
            CheckFile::Conservation { surfaces, tolerance } => {
                let field = current_field(sc.observable(), state)?;
                let list: Vec<_> = surfaces.iter().map(|s| *sc.surface(s)).collect();
                let out = check_conservation(&field, &list, &self.quad)?;
                self.row.value = out.max_rel_dev;
                self.row.quad_error = out.values.iter().map(|v| v.quad_error).fold(0.0, f64::max);
                self.row.truncation_error = out.values.iter().map(|v| v.truncation_error).fold(0.0, f64::max);
                for (i, v) in out.values.iter().enumerate() {
                    self.detail(&format!("flux_{i}"), v.value);
                }
                self.detail("budget_rel", out.tolerance);
                self.detail("tolerance", *tolerance);
                self.row.pass = out.max_rel_dev <= *tolerance;
            }
            CheckFile::Residuals { target, points, step, half_width, time_half_width } => {
                let center = packet_center(state, 0.0);
                let field = match target {
                    ResidualTarget::Divergence => Some(current_field(sc.observable(), state)?),
                    ResidualTarget::KleinGordon => None,
                };
                let residual = |x: &FourVector, h: f64| match &field {
                    Some(f) => divergence_residual(f, x, h),
                    None => Ok(kg_residual(state, x, h)),
                };
                let (mut lo, mut hi, mut largest) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
                for _ in 0..*points {
                    let t = self.uniform(0.0, *time_half_width);
                    let x = FourVector { x0: t, xs: self.point(center, *half_width) };
                    let coarse = residual(&x, *step)?;
                    let fine = residual(&x, 0.5 * step)?;
                    let ratio = coarse / fine;
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                    largest = largest.max(coarse);
                }
                self.row.value = (lo - 4.0).abs().max((hi - 4.0).abs());
                self.detail("min_ratio", lo);
                self.detail("max_ratio", hi);
                self.detail("max_residual", largest);
                self.row.pass = lo >= RESIDUAL_RATIO[0] && hi <= RESIDUAL_RATIO[1];
            }
            CheckFile::Positivity { surface, points_per_axis, half_width } => {
                let s = sc.surface(surface);
                let c = surface_box(state, s, &self.quad)?.center;
                let axes = [0, 1, 2].map(|k| {
                    let mut a: Vec<f64> = (0..*points_per_axis).map(|_| self.uniform(c[k], *half_width)).collect();
                    a.sort_by(f64::total_cmp);
                    a
                });
                let d = density_on_grid(sc.observable(), state, s, axes)?;
                let min = d.iter().copied().fold(f64::INFINITY, f64::min);
                self.row.value = min;
                self.detail("max_density", d.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                self.detail("points", d.len());
                self.row.pass = min >= DENSITY_FLOOR;
            }
            CheckFile::Moments { surface, axis, order: 1 } => {
                self.detail("order", 1usize);
                self.detail("axis", *axis);
                let s = sc.surface(surface);
                let mut alpha = [0u32; 3];
                alpha[*axis] = 1;
                let m = moment(sc.observable(), state, s, alpha, &self.quad)?;
                self.estimate(&m);
                let oracle = nw_first_moment_at(state, s.time([0.0; 3]), *axis);
                let width = nw_width(state, *axis);
                let tol = m.combined_tolerance();
                self.detail("oracle", oracle);
                self.detail("width", width);
                self.detail("tolerance", tol);
                self.row.pass = (m.value - oracle).abs() <= tol && tol <= MOMENT_BUDGET_FRACTION * width;
            }
            CheckFile::Moments { surface, axis, .. } => {
                self.detail("order", 2usize);
                self.detail("axis", *axis);
                let obs = sc.observable();
                let d = second_moment_decomposition(obs, state, sc.surface(surface), *axis, &self.quad)?;
                self.row.value = d.residual();
                self.row.quad_error = d.quad_error;
                self.row.truncation_error = d.truncation_error;
                self.detail("total", d.total);
                self.detail("nw_part", d.nw_part);
                self.detail("kappa_part", d.kappa_part);
                self.detail("tolerance", d.tolerance);
                let mut pass = d.residual() <= d.tolerance && d.kappa_part >= KAPPA_FLOOR;
                if let ObservableSpec::CausalKernelT { spec } = obs {
                    if spec.is_finite_rank() {
                        // the symbolic kappa of the profiles against differences of the kernel
                        let numeric = kappa_numeric(obs, state, *axis);
                        let symbolic = kappa_expectation(obs, state, *axis)?;
                        self.detail("kappa_oracle_diff", (numeric - symbolic).abs());
                        pass &= (numeric - symbolic).abs() <= KAPPA_ORACLE_TOL;
                    }
                }
                self.row.pass = pass;
            }
            CheckFile::Heisenberg { surface, axis, resolve_correction } => {
                let obs = sc.observable();
                let r = heisenberg_report(obs, state, sc.surface(surface), *axis, &self.quad)?;
                self.row.value = r.lhs - r.modified_rhs;
                self.row.quad_error = r.quad_error;
                self.row.truncation_error = r.truncation_error;
                self.detail("lhs", r.lhs);
                self.detail("modified_rhs", r.modified_rhs);
                self.detail("kappa", r.kappa);
                self.detail("tolerance", r.tolerance);
                self.detail("correction_over_tolerance", (r.modified_rhs - 0.5) / r.tolerance);
                let mut pass = r.modified_holds;
                if matches!(obs, ObservableSpec::CausalKernelT { spec } if spec.is_finite_rank()) {
                    pass &= r.standard_holds;
                }
                if *resolve_correction {
                    pass &= r.modified_rhs - 0.5 > 3.0 * r.tolerance;
                }
                self.row.pass = pass;
            }
            CheckFile::KernelCheck { method, samples, seeds, extent } => {
                let seeds = if seeds.is_empty() { vec![self.quad.seed] } else { seeds.clone() };
                self.detail("method", method.name());
                let kernel = kernel_fn(sc.observable(), sc.file.mass)?;
                self.kernel_check(*method, &*kernel, *samples, &seeds, *extent)?;
            }
            CheckFile::Mpovm { frames, samples, extent } => {
                let mass = sc.file.mass;
                let mut worst = 0.0f64;
                for (i, f) in frames.iter().enumerate() {
                    let pairs: Vec<(FourVector, FourVector)> = (0..*samples)
                        .map(|_| {
                            let q = self.point([0.0; 3], *extent);
                            let p = self.point([0.0; 3], *extent);
                            (FourVector::on_shell(q, mass), FourVector::on_shell(p, mass))
                        })
                        .collect();
                    let d = mpovm_kernel_crosscheck(mass, &unit_future(f.n), &unit_future(f.n_sigma), &pairs)?;
                    self.detail(&format!("frame_{i}"), d);
                    worst = worst.max(d);
                }
                self.row.value = worst;
                self.row.pass = worst <= MPOVM_TOL;
            }
            CheckFile::Hegerfeldt { radius, time_fraction } => {
                let ball = match radius {
                    Some(r) => {
                        let cauchyloc::states::StateRep::NwBall { center_x, .. } = *state.rep() else {
                            unreachable!("checked at load time")
                        };
                        MomentumState::nw_ball(state.grid_arc(), center_x, *r)?
                    }
                    None => state.clone(),
                };
                let r = match *ball.rep() {
                    cauchyloc::states::StateRep::NwBall { radius, .. } => radius,
                    _ => unreachable!("checked at load time"),
                };
                let out = hegerfeldt_leak_demo(&ball, time_fraction * r, &self.quad)?;
                self.estimate(&out.leak);
                self.row.x = r;
                self.detail("time", out.time);
                self.detail("ratio", out.leak.value / out.leak.total_error());
                self.row.pass = out.leak.value > LEAK_FACTOR * out.leak.total_error();
            }
        }
        Ok(())
    }

    fn kernel_check(
        &mut self,
        method: KernelMethod,
        kernel: &(dyn Fn([f64; 3], [f64; 3]) -> f64 + Sync),
        samples: usize,
        seeds: &[u64],
        extent: f64,
    ) -> Outcome {
        let complex = |p: [f64; 3], q: [f64; 3]| Complex64::new(kernel(p, q), 0.0);
        match method {
            KernelMethod::Gram => {
                let (mut worst, mut min_eig, mut max_eig, mut pass) = (f64::INFINITY, 0.0, 0.0, true);
                for &s in seeds {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    let sample: Vec<[f64; 3]> = (0..samples).map(|_| [0, 1, 2].map(|_| r.gen_range(-extent..extent))).collect();
                    let g = gram_psd_check(complex, &sample, GRAM_TOL)?;
                    let rel = g.min_eig / g.max_eig.max(1.0);
                    if rel < worst {
                        (worst, min_eig, max_eig) = (rel, g.min_eig, g.max_eig);
                    }
                    pass &= g.pass;
                }
                self.row.value = worst;
                self.detail("min_eig", min_eig);
                self.detail("max_eig", max_eig);
                self.detail("seeds", seeds.len());
                self.detail("samples", samples);
                self.row.pass = pass;
            }
            KernelMethod::Integral => {
                let bx = PositivityBox { center: [0.0; 3], half_width: extent, nodes_per_axis: INTEGRAL_NODES };
                let mut worst = f64::INFINITY;
                for &s in seeds {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    // three complex Gaussian bumps of width extent / 4
                    let bumps: Vec<([f64; 3], Complex64)> = (0..3)
                        .map(|_| {
                            let c = [0, 1, 2].map(|_| r.gen_range(-0.5 * extent..0.5 * extent));
                            (c, Complex64::from_polar(r.gen_range(0.2..1.0), r.gen_range(0.0..std::f64::consts::TAU)))
                        })
                        .collect();
                    let w2 = (0.25 * extent).powi(2);
                    let f = |p: [f64; 3]| {
                        bumps
                            .iter()
                            .map(|(c, a)| a * (-(0..3).map(|k| (p[k] - c[k]).powi(2)).sum::<f64>() / (2.0 * w2)).exp())
                            .sum::<Complex64>()
                    };
                    let (v, _) = integral_positivity_check(complex, f, &bx);
                    worst = worst.min(v);
                }
                self.row.value = worst;
                self.detail("floor", INTEGRAL_FLOOR);
                self.row.pass = worst >= INTEGRAL_FLOOR;
            }
            KernelMethod::Mollifier => {
                let mut worst = 0.0f64;
                for &s in seeds {
                    let mut r = ChaCha8Rng::seed_from_u64(s);
                    let p0 = [0, 1, 2].map(|_| r.gen_range(-0.5 * extent..0.5 * extent));
                    let f = mollifier_cluster(vec![p0], vec![Complex64::new(1.0, 0.0)], MOLLIFIER_SCALE);
                    let bx = PositivityBox { center: p0, half_width: 1.0 / MOLLIFIER_SCALE, nodes_per_axis: MOLLIFIER_NODES };
                    let (v, l1) = integral_positivity_check(complex, f, &bx);
                    worst = worst.max((v / (l1 * l1) - kernel(p0, p0)).abs());
                }
                self.row.value = worst;
                self.detail("tolerance", MOLLIFIER_TOL);
                self.row.pass = worst <= MOLLIFIER_TOL;
            }
        }
        Ok(())
    }
}

fn current_field(obs: &ObservableSpec, state: &MomentumState) -> cauchyloc::Result<CurrentField> {
    match obs {
        ObservableSpec::CausalKernelT { spec } => CurrentField::causal(spec.clone(), state.clone()),
        ObservableSpec::StressEnergyM { n } => CurrentField::stress_energy(*n, state.clone()),
        ObservableSpec::NewtonWignerQ => Err(cauchyloc::Error::Unsupported("the Newton-Wigner observable has no current".into())),
    }
}

type KernelFn<'a> = Box<dyn Fn([f64; 3], [f64; 3]) -> f64 + Sync + 'a>;

fn kernel_fn(obs: &ObservableSpec, mass: f64) -> cauchyloc::Result<KernelFn<'_>> {
    match obs {
        ObservableSpec::CausalKernelT { spec } => Ok(Box::new(t_kernel_fn(spec))),
        ObservableSpec::StressEnergyM { n } => Ok(Box::new(m_kernel_fn(mass, *n, FourVector::time_unit())?)),
        ObservableSpec::NewtonWignerQ => Err(cauchyloc::Error::Unsupported("the Newton-Wigner observable has no kernel".into())),
    }
}

/// Newton-Wigner spread of the state along `axis` at `t = 0`.
fn nw_width(state: &MomentumState, axis: usize) -> f64 {
    let m = state.nw_expectation(axis).value;
    (state.nw_second_moment(axis) - m * m).max(0.0).sqrt()
}

/// `sum |phi|^2 kappa` with kappa from central differences of the kernel itself.
fn kappa_numeric(obs: &ObservableSpec, state: &MomentumState, axis: usize) -> f64 {
    let ObservableSpec::CausalKernelT { spec } = obs else { return 0.0 };
    let k = t_kernel_fn(spec);
    let g = state.grid();
    let phi = state.phi_values();
    (0..g.len()).map(|i| phi[i].norm_sqr() * kappa_eval(&k, g.momentum(i), axis)).sum::<f64>() * g.cell_volume()
}
