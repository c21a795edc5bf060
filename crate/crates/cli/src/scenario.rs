//! Scenario file schema and its resolution into library objects.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cauchyloc::kernels::{CausalKernelSpec, FiniteComponent, FiniteKernel, KernelForm};
use cauchyloc::minkowski::{unit_future, Transform};
use cauchyloc::{FourVector, MassShellGrid, MomentumState, ObservableSpec, QuadConfig, Region, Surface};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "unit")]
    pub mass: f64,
    #[serde(default)]
    pub seed: u64,
    pub state: StateFile,
    pub observable: Option<ObservableFile>,
    #[serde(default)]
    pub surfaces: Vec<SurfaceFile>,
    #[serde(default)]
    pub regions: Vec<RegionFile>,
    pub checks: Vec<CheckFile>,
    #[serde(default)]
    pub quad: QuadFile,
    #[serde(default)]
    pub output: OutputFile,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Spread {
    Isotropic(f64),
    Axes([f64; 3]),
}

impl Spread {
    pub fn axes(&self) -> [f64; 3] {
        match self {
            Spread::Isotropic(s) => [*s; 3],
            Spread::Axes(a) => *a,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFile {
    Gaussian {
        center_p: [f64; 3],
        spread: Spread,
        #[serde(default)]
        center_x: [f64; 3],
        grid_points: usize,
        momentum_extent: Option<f64>,
    },
    CompactBump {
        center_p: [f64; 3],
        inner_radius: f64,
        outer_radius: f64,
        #[serde(default)]
        center_x: [f64; 3],
        grid_points: usize,
        momentum_extent: Option<f64>,
    },
    NwBall {
        #[serde(default)]
        center_x: [f64; 3],
        radius: f64,
        grid_points: usize,
        momentum_extent: f64,
    },
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

impl StateFile {
    /// Momentum cutoff: explicit, or four and a half spreads beyond the largest centre component.
    fn extent(&self) -> f64 {
        match self {
            StateFile::Gaussian { center_p, spread, momentum_extent, .. } => {
                momentum_extent.unwrap_or_else(|| max_abs(center_p) + 4.5 * max_abs(&spread.axes()))
            }
            StateFile::CompactBump { center_p, outer_radius, momentum_extent, .. } => {
                momentum_extent.unwrap_or_else(|| max_abs(center_p) + outer_radius + 0.25)
            }
            StateFile::NwBall { momentum_extent, .. } => *momentum_extent,
        }
    }

    fn points(&self) -> usize {
        match self {
            StateFile::Gaussian { grid_points, .. }
            | StateFile::CompactBump { grid_points, .. }
            | StateFile::NwBall { grid_points, .. } => *grid_points,
        }
    }

    pub fn build(&self, mass: f64) -> cauchyloc::Result<MomentumState> {
        let grid = Arc::new(MassShellGrid::new(mass, self.extent(), self.points())?);
        match self {
            StateFile::Gaussian { center_p, spread, center_x, .. } => {
                MomentumState::gaussian(grid, *center_p, spread.axes(), *center_x)
            }
            StateFile::CompactBump { center_p, inner_radius, outer_radius, center_x, .. } => {
                MomentumState::compact_bump(grid, *center_p, *inner_radius, *outer_radius, *center_x)
            }
            StateFile::NwBall { center_x, radius, .. } => MomentumState::nw_ball(grid, *center_x, *radius),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableFile {
    CausalKernel {
        kernel: KernelFile,
    },
    StressEnergy {
        /// Spatial part of the unit future frame vector.
        #[serde(default)]
        frame: [f64; 3],
    },
    NewtonWigner,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFile {
    PowerLaw { r: f64 },
    ShiftedPower { c: f64, n: u32 },
    Convex { weights: Vec<f64>, parts: Vec<KernelFile> },
    ConstantOne,
    Finite { components: Vec<ComponentFile> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFile {
    pub terms: Vec<TermFile>,
    #[serde(default)]
    pub center: [f64; 3],
    pub width: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub coef: f64,
    pub powers: [u32; 3],
}

impl KernelFile {
    fn form(&self) -> cauchyloc::Result<KernelForm> {
        Ok(match self {
            KernelFile::PowerLaw { r } => KernelForm::PowerLaw { r: *r },
            KernelFile::ShiftedPower { c, n } => KernelForm::ShiftedPower { c: *c, n: *n },
            KernelFile::Convex { weights, parts } => KernelForm::Convex {
                weights: weights.clone(),
                parts: parts.iter().map(KernelFile::form).collect::<cauchyloc::Result<_>>()?,
            },
            KernelFile::ConstantOne => KernelForm::ConstantOne,
            KernelFile::Finite { components } => {
                let comps = components
                    .iter()
                    .map(|c| FiniteComponent::new(c.terms.iter().map(|t| (t.coef, t.powers)).collect(), c.center, c.width))
                    .collect::<cauchyloc::Result<Vec<_>>>()?;
                KernelForm::Finite(FiniteKernel::new(comps)?)
            }
        })
    }

    pub fn build(&self, mass: f64) -> cauchyloc::Result<CausalKernelSpec> {
        match self {
            KernelFile::ConstantOne => Ok(CausalKernelSpec::constant_one(mass)),
            other => CausalKernelSpec::new(other.form()?, mass),
        }
    }
}

impl ObservableFile {
    pub fn build(&self, mass: f64) -> cauchyloc::Result<ObservableSpec> {
        let obs = match self {
            ObservableFile::CausalKernel { kernel } => ObservableSpec::CausalKernelT { spec: kernel.build(mass)? },
            ObservableFile::StressEnergy { frame } => ObservableSpec::StressEnergyM { n: unit_future(*frame) },
            ObservableFile::NewtonWigner => ObservableSpec::NewtonWignerQ,
        };
        obs.validate()?;
        Ok(obs)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceFile {
    Flat {
        name: String,
        #[serde(default)]
        t0: f64,
        #[serde(default)]
        u: [f64; 3],
    },
    GaussianBump {
        name: String,
        #[serde(default)]
        t0: f64,
        #[serde(default)]
        u: [f64; 3],
        amplitude: f64,
        #[serde(default)]
        center: [f64; 3],
        width: f64,
    },
    AnnularBump {
        name: String,
        #[serde(default)]
        t0: f64,
        #[serde(default)]
        u: [f64; 3],
        amplitude: f64,
        #[serde(default)]
        center: [f64; 3],
        inner: f64,
        outer: f64,
    },
}

impl SurfaceFile {
    pub fn name(&self) -> &str {
        match self {
            SurfaceFile::Flat { name, .. } | SurfaceFile::GaussianBump { name, .. } | SurfaceFile::AnnularBump { name, .. } => name,
        }
    }

    pub fn build(&self) -> cauchyloc::Result<Surface> {
        match *self {
            SurfaceFile::Flat { t0, u, .. } => Surface::flat(t0, u),
            SurfaceFile::GaussianBump { t0, u, amplitude, center, width, .. } => {
                Surface::gaussian_bump(t0, u, amplitude, center, width)
            }
            SurfaceFile::AnnularBump { t0, u, amplitude, center, inner, outer, .. } => {
                Surface::annular_bump(t0, u, amplitude, center, inner, outer)
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionFile {
    Ball {
        name: String,
        #[serde(default)]
        center: [f64; 3],
        radius: f64,
    },
    Box {
        name: String,
        lo: [f64; 3],
        hi: [f64; 3],
    },
    All {
        name: String,
    },
    /// Complement of an earlier region.
    Complement { name: String, of: String },
    /// Union of earlier regions.
    Union { name: String, of: Vec<String> },
}

impl RegionFile {
    pub fn name(&self) -> &str {
        match self {
            RegionFile::Ball { name, .. }
            | RegionFile::Box { name, .. }
            | RegionFile::All { name }
            | RegionFile::Complement { name, .. }
            | RegionFile::Union { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformFile {
    Translation { by: [f64; 4] },
    BoostX { rapidity: f64 },
    RotationZ { angle: f64 },
}

impl TransformFile {
    pub fn build(&self) -> Transform {
        match *self {
            TransformFile::Translation { by } => Transform::Translation(FourVector::from_array(by)),
            TransformFile::BoostX { rapidity } => Transform::BoostX(rapidity),
            TransformFile::RotationZ { angle } => Transform::RotationZ(angle),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ResidualTarget {
    Divergence,
    KleinGordon,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Gram,
    Integral,
    Mollifier,
}

impl KernelMethod {
    pub fn name(self) -> &'static str {
        match self {
            KernelMethod::Gram => "gram",
            KernelMethod::Integral => "integral",
            KernelMethod::Mollifier => "mollifier",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramePair {
    pub n: [f64; 3],
    pub n_sigma: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckFile {
    Normalization {
        surface: String,
        #[serde(default = "norm_tol")]
        tolerance: f64,
    },
    Probability {
        surface: String,
        region: String,
        /// Plot coordinate.
        x: Option<f64>,
        /// Pass only if the value exceeds this multiple of its error budget.
        min_ratio: Option<f64>,
        range: Option<[f64; 2]>,
    },
    Causality {
        source: String,
        region: String,
        target: String,
    },
    Coherence {
        surfaces: [String; 2],
        region: String,
    },
    Covariance {
        surface: String,
        region: String,
        transforms: Vec<TransformFile>,
        #[serde(default = "yes")]
        transform_frame: bool,
    },
    Conservation {
        surfaces: Vec<String>,
        #[serde(default = "flux_tol")]
        tolerance: f64,
    },
    Residuals {
        target: ResidualTarget,
        #[serde(default = "twenty")]
        points: usize,
        #[serde(default = "residual_step")]
        step: f64,
        #[serde(default = "two")]
        half_width: f64,
        #[serde(default = "unit")]
        time_half_width: f64,
    },
    Positivity {
        surface: String,
        #[serde(default = "ten")]
        points_per_axis: usize,
        #[serde(default = "three")]
        half_width: f64,
    },
    Moments {
        surface: String,
        axis: usize,
        order: u32,
    },
    Heisenberg {
        surface: String,
        axis: usize,
        #[serde(default)]
        resolve_correction: bool,
    },
    KernelCheck {
        method: KernelMethod,
        #[serde(default = "fifty")]
        samples: usize,
        #[serde(default)]
        seeds: Vec<u64>,
        #[serde(default = "three")]
        extent: f64,
    },
    Mpovm {
        frames: Vec<FramePair>,
        #[serde(default = "two_hundred")]
        samples: usize,
        #[serde(default = "three")]
        extent: f64,
    },
    Hegerfeldt {
        radius: Option<f64>,
        #[serde(default = "tenth")]
        time_fraction: f64,
    },
}

fn norm_tol() -> f64 {
    1e-3
}
fn flux_tol() -> f64 {
    1e-2
}
fn yes() -> bool {
    true
}
fn ten() -> usize {
    10
}
fn twenty() -> usize {
    20
}
fn fifty() -> usize {
    50
}
fn two_hundred() -> usize {
    200
}
fn two() -> f64 {
    2.0
}
fn three() -> f64 {
    3.0
}
fn tenth() -> f64 {
    0.1
}
fn residual_step() -> f64 {
    0.1
}

impl CheckFile {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckFile::Normalization { .. } => "normalization",
            CheckFile::Probability { .. } => "probability",
            CheckFile::Causality { .. } => "causality",
            CheckFile::Coherence { .. } => "coherence",
            CheckFile::Covariance { .. } => "covariance",
            CheckFile::Conservation { .. } => "conservation",
            CheckFile::Residuals { .. } => "residuals",
            CheckFile::Positivity { .. } => "positivity",
            CheckFile::Moments { .. } => "moments",
            CheckFile::Heisenberg { .. } => "heisenberg",
            CheckFile::KernelCheck { .. } => "kernel-check",
            CheckFile::Mpovm { .. } => "mpovm",
            CheckFile::Hegerfeldt { .. } => "hegerfeldt",
        }
    }

    fn surfaces(&self) -> Vec<&str> {
        match self {
            CheckFile::Normalization { surface, .. }
            | CheckFile::Probability { surface, .. }
            | CheckFile::Covariance { surface, .. }
            | CheckFile::Positivity { surface, .. }
            | CheckFile::Moments { surface, .. }
            | CheckFile::Heisenberg { surface, .. } => vec![surface],
            CheckFile::Causality { source, target, .. } => vec![source, target],
            CheckFile::Coherence { surfaces, .. } => surfaces.iter().map(String::as_str).collect(),
            CheckFile::Conservation { surfaces, .. } => surfaces.iter().map(String::as_str).collect(),
            _ => vec![],
        }
    }

    fn region(&self) -> Option<&str> {
        match self {
            CheckFile::Probability { region, .. }
            | CheckFile::Causality { region, .. }
            | CheckFile::Coherence { region, .. }
            | CheckFile::Covariance { region, .. } => Some(region),
            _ => None,
        }
    }

    fn needs_observable(&self) -> bool {
        !matches!(
            self,
            CheckFile::Mpovm { .. } | CheckFile::Hegerfeldt { .. } | CheckFile::Residuals { target: ResidualTarget::KleinGordon, .. }
        )
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadFile {
    #[serde(default = "nodes")]
    pub spatial_nodes_per_axis: usize,
    #[serde(default = "levels")]
    pub refinement_levels: usize,
    #[serde(default = "subsamples")]
    pub boundary_subsamples: usize,
    #[serde(default = "mc")]
    pub mc_samples: usize,
    #[serde(default = "norm_tol")]
    pub target_tol: f64,
    pub spatial_box_half: Option<f64>,
}

fn nodes() -> usize {
    32
}
fn levels() -> usize {
    2
}
fn subsamples() -> usize {
    4
}
fn mc() -> usize {
    100_000
}

impl Default for QuadFile {
    fn default() -> Self {
        Self {
            spatial_nodes_per_axis: nodes(),
            refinement_levels: levels(),
            boundary_subsamples: subsamples(),
            mc_samples: mc(),
            target_tol: norm_tol(),
            spatial_box_half: None,
        }
    }
}

impl QuadFile {
    pub fn build(&self, seed: u64) -> QuadConfig {
        QuadConfig {
            spatial_box_half: self.spatial_box_half,
            box_center: None,
            spatial_nodes_per_axis: self.spatial_nodes_per_axis,
            refinement_levels: self.refinement_levels,
            boundary_subsamples: self.boundary_subsamples,
            mc_samples: self.mc_samples,
            seed,
            target_tol: self.target_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    #[serde(default)]
    pub format: Format,
    /// Report path, relative to the output directory; defaults to `<name>.<ext>`.
    pub path: Option<PathBuf>,
}

/// A parsed and cross-checked scenario ready to run.
#[derive(Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub source: PathBuf,
    /// SHA-256 of the file text.
    pub text_digest: [u8; 32],
    pub surfaces: BTreeMap<String, Surface>,
    pub regions: BTreeMap<String, Region>,
    pub observable: Option<ObservableSpec>,
    pub state: MomentumState,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn surface(&self, name: &str) -> &Surface {
        &self.surfaces[name]
    }

    pub fn region(&self, name: &str) -> &Region {
        &self.regions[name]
    }

    pub fn observable(&self) -> &ObservableSpec {
        self.observable.as_ref().expect("checked at load time")
    }

    pub fn report_path(&self, out_dir: &Path, format: Format) -> PathBuf {
        let rel = self.file.output.path.clone().unwrap_or_else(|| PathBuf::from(format!("{}.{}", self.file.name, format.extension())));
        out_dir.join(rel)
    }
}

/// Parses and resolves a scenario file; every cross-reference and library constructor is checked here.
pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> Result<Scenario, CliError> {
    let config = |message: String| CliError::Config { path: path.to_path_buf(), message };
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(config(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", file.schema_version)));
    }
    if file.name.is_empty() || file.name.contains(['/', '\\']) {
        return Err(config("name must be nonempty and contain no path separators".into()));
    }
    let lib = |what: &str, e: cauchyloc::Error| config(format!("{what}: {e}"));
    let state = file.state.build(file.mass).map_err(|e| lib("state", e))?;
    let observable = file.observable.as_ref().map(|o| o.build(file.mass)).transpose().map_err(|e| lib("observable", e))?;

    let mut surfaces = BTreeMap::new();
    for s in &file.surfaces {
        let built = s.build().map_err(|e| lib(&format!("surface `{}`", s.name()), e))?;
        if surfaces.insert(s.name().to_string(), built).is_some() {
            return Err(config(format!("surface `{}` is defined twice", s.name())));
        }
    }
    let mut regions: BTreeMap<String, Region> = BTreeMap::new();
    for r in &file.regions {
        let earlier = |name: &String| {
            regions
                .get(name)
                .cloned()
                .ok_or_else(|| config(format!("region `{}` refers to `{name}`, which is not defined before it", r.name())))
        };
        let built = match r {
            RegionFile::Ball { center, radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(config(format!("region `{}`: radius must be positive", r.name())));
                }
                Region::ball(*center, *radius)
            }
            RegionFile::Box { lo, hi, .. } => {
                if (0..3).any(|k| !(lo[k] < hi[k])) {
                    return Err(config(format!("region `{}`: box needs lo < hi on every axis", r.name())));
                }
                Region::Box { lo: *lo, hi: *hi }
            }
            RegionFile::All { .. } => Region::All,
            RegionFile::Complement { of, .. } => earlier(of)?.complement(),
            RegionFile::Union { of, .. } => {
                let mut parts = of.iter().map(earlier);
                let first = parts.next().ok_or_else(|| config(format!("region `{}`: empty union", r.name())))??;
                parts.try_fold(first, |acc, p| Ok::<_, CliError>(acc.union(p?)))?
            }
        };
        if regions.insert(r.name().to_string(), built).is_some() {
            return Err(config(format!("region `{}` is defined twice", r.name())));
        }
    }

    if file.checks.is_empty() {
        return Err(config("scenario declares no checks".into()));
    }
    for (i, c) in file.checks.iter().enumerate() {
        let at = |m: String| config(format!("checks[{i}] ({}): {m}", c.kind()));
        for s in c.surfaces() {
            if !surfaces.contains_key(s) {
                return Err(at(format!("unknown surface `{s}`")));
            }
        }
        if let Some(r) = c.region() {
            if !regions.contains_key(r) {
                return Err(at(format!("unknown region `{r}`")));
            }
        }
        if c.needs_observable() && observable.is_none() {
            return Err(at("this check needs an [observable] table".into()));
        }
        validate_check(c, &file, observable.as_ref()).map_err(at)?;
    }
    file.quad.build(file.seed).validate().map_err(|e| lib("quad", e))?;
    let text_digest = Sha256::digest(text.as_bytes()).into();
    Ok(Scenario { file, source: path.to_path_buf(), text_digest, surfaces, regions, observable, state })
}

fn validate_check(c: &CheckFile, file: &ScenarioFile, obs: Option<&ObservableSpec>) -> Result<(), String> {
    let axis_ok = |a: usize| if a < 3 { Ok(()) } else { Err(format!("axis must be 0, 1 or 2, got {a}")) };
    match c {
        CheckFile::Normalization { tolerance, .. } | CheckFile::Conservation { tolerance, .. } if !(*tolerance > 0.0) => {
            Err("tolerance must be positive".into())
        }
        CheckFile::Conservation { surfaces, .. } if surfaces.len() < 2 => Err("conservation needs at least two surfaces".into()),
        CheckFile::Covariance { transforms, .. } if transforms.is_empty() => Err("covariance needs at least one transform".into()),
        CheckFile::Residuals { points, step, half_width, time_half_width, target } => {
            if *points == 0 || !(*step > 0.0) || !(*half_width >= 0.0) || !(*time_half_width >= 0.0) {
                return Err("residuals need points > 0, step > 0 and nonnegative half widths".into());
            }
            if *target == ResidualTarget::Divergence && matches!(obs, Some(ObservableSpec::NewtonWignerQ)) {
                return Err("the Newton-Wigner observable has no conserved current".into());
            }
            Ok(())
        }
        CheckFile::Positivity { points_per_axis, half_width, .. } if *points_per_axis == 0 || !(*half_width > 0.0) => {
            Err("positivity needs points_per_axis > 0 and a positive half width".into())
        }
        CheckFile::Moments { axis, order, .. } => {
            axis_ok(*axis)?;
            if !(1..=2).contains(order) {
                return Err(format!("moment order must be 1 or 2, got {order}"));
            }
            Ok(())
        }
        CheckFile::Heisenberg { axis, .. } => axis_ok(*axis),
        CheckFile::KernelCheck { samples, extent, .. } => {
            if *samples == 0 || *samples > 400 || !(*extent > 0.0) {
                return Err("kernel-check needs 1..=400 samples and a positive extent".into());
            }
            match obs {
                Some(ObservableSpec::NewtonWignerQ) => Err("the Newton-Wigner observable has no kernel to check".into()),
                _ => Ok(()),
            }
        }
        CheckFile::Mpovm { frames, samples, extent } if frames.is_empty() || *samples == 0 || !(*extent > 0.0) => {
            Err("mpovm needs frames, samples > 0 and a positive extent".into())
        }
        CheckFile::Hegerfeldt { radius, time_fraction } => {
            if !matches!(file.state, StateFile::NwBall { .. }) {
                return Err("hegerfeldt needs an nw_ball state".into());
            }
            if radius.is_some_and(|r| !(r > 0.0)) || !(*time_fraction >= 0.0) {
                return Err("hegerfeldt needs a positive radius and a nonnegative time fraction".into());
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
