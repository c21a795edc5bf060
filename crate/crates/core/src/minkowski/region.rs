//! Regions of a surface chart and regions of influence between surfaces.

use crate::error::{Error, Result};

use super::surface::CauchySurfaceGraph;

type Surface = CauchySurfaceGraph<f64>;

/// Classification of an axis-aligned cell against a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    Inside,
    Outside,
    Mixed,
}

/// Membership predicate over chart points.
pub trait Membership: Sync {
    fn contains(&self, x: [f64; 3]) -> bool;

    /// Conservative classification of the cell `center +- half`. `Mixed` is always allowed.
    fn classify_cell(&self, _center: [f64; 3], _half: [f64; 3]) -> CellClass {
        CellClass::Mixed
    }

    /// Axis-aligned box containing the set, when it is bounded.
    fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        None
    }

    /// The bounded set this one is the complement of, if any.
    fn bounded_complement(&self) -> Option<&dyn Membership> {
        None
    }

    /// Length and first moment `int x dx` of the covered part of the segment
    /// `{(x, y, z) : x0 <= x <= x1}`, when known in closed form.
    fn chord(&self, _y: f64, _z: f64, _x0: f64, _x1: f64) -> Option<(f64, f64)> {
        None
    }
}

fn interval_chord(lo: f64, hi: f64, x0: f64, x1: f64) -> (f64, f64) {
    let a = lo.max(x0);
    let b = hi.min(x1);
    if b <= a {
        (0.0, 0.0)
    } else {
        (b - a, 0.5 * (b * b - a * a))
    }
}

/// A subset of the chart `R^3`.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Ball { center: [f64; 3], radius: f64 },
    Box { lo: [f64; 3], hi: [f64; 3] },
    Complement(Box<Region>),
    Union(Box<Region>, Box<Region>),
    All,
    /// Image of `inner` under `x -> A x + offset`; stored through the inverse map.
    Image { inner: Box<Region>, inverse: [[f64; 3]; 3], offset: [f64; 3] },
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn mat_inverse(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * c(1, 2, 1, 2) - m[0][1] * c(1, 2, 0, 2) + m[0][2] * c(1, 2, 0, 1);
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    let inv = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    Some(inv.map(|row| row.map(|v| v / det)))
}

impl Region {
    pub fn ball(center: [f64; 3], radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn complement(self) -> Self {
        Region::Complement(Box::new(self))
    }

    pub fn union(self, other: Region) -> Self {
        Region::Union(Box::new(self), Box::new(other))
    }

    /// Image of the region under the affine map `x -> linear x + offset`.
    pub fn image(self, linear: [[f64; 3]; 3], offset: [f64; 3]) -> Result<Self> {
        let inverse = mat_inverse(&linear).ok_or_else(|| Error::Domain("singular region map".into()))?;
        Ok(Region::Image { inner: Box::new(self), inverse, offset })
    }

    /// Axis-aligned bounding box, if the region is bounded.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        match self {
            Region::Ball { center, radius } => Some((center.map(|c| c - radius), center.map(|c| c + radius))),
            Region::Box { lo, hi } => Some((*lo, *hi)),
            Region::Union(a, b) => {
                let (la, ha) = a.bounds()?;
                let (lb, hb) = b.bounds()?;
                Some((
                    [la[0].min(lb[0]), la[1].min(lb[1]), la[2].min(lb[2])],
                    [ha[0].max(hb[0]), ha[1].max(hb[1]), ha[2].max(hb[2])],
                ))
            }
            Region::Image { inner, inverse, offset } => {
                let (lo, hi) = inner.bounds()?;
                let fwd = mat_inverse(inverse)?;
                let mut out_lo = [f64::INFINITY; 3];
                let mut out_hi = [f64::NEG_INFINITY; 3];
                for corner in 0..8 {
                    let p = [0, 1, 2].map(|k| if corner >> k & 1 == 1 { hi[k] } else { lo[k] });
                    let q = mat_vec(&fwd, p);
                    for k in 0..3 {
                        out_lo[k] = out_lo[k].min(q[k] + offset[k]);
                        out_hi[k] = out_hi[k].max(q[k] + offset[k]);
                    }
                }
                Some((out_lo, out_hi))
            }
            Region::Complement(_) | Region::All => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds().is_some()
    }
}

impl Membership for Region {
    fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        Region::bounds(self)
    }

    fn bounded_complement(&self) -> Option<&dyn Membership> {
        match self {
            Region::Complement(inner) if inner.is_bounded() => Some(inner.as_ref()),
            _ => None,
        }
    }

    fn chord(&self, y: f64, z: f64, x0: f64, x1: f64) -> Option<(f64, f64)> {
        match self {
            Region::Ball { center, radius } => {
                let rho2 = (y - center[1]).powi(2) + (z - center[2]).powi(2);
                if rho2 >= radius * radius {
                    return Some((0.0, 0.0));
                }
                let half = (radius * radius - rho2).sqrt();
                Some(interval_chord(center[0] - half, center[0] + half, x0, x1))
            }
            Region::Box { lo, hi } => {
                if y < lo[1] || y > hi[1] || z < lo[2] || z > hi[2] {
                    return Some((0.0, 0.0));
                }
                Some(interval_chord(lo[0], hi[0], x0, x1))
            }
            Region::All => Some(interval_chord(x0, x1, x0, x1)),
            Region::Complement(inner) => {
                let (l, m) = inner.chord(y, z, x0, x1)?;
                let (lf, mf) = interval_chord(x0, x1, x0, x1);
                Some((lf - l, mf - m))
            }
            Region::Image { inner, inverse, offset } => match inner.as_ref() {
                // ellipsoid: |a + s b| <= r along the line x = (s, y, z)
                Region::Ball { center, radius } => {
                    let b = [inverse[0][0], inverse[1][0], inverse[2][0]];
                    let a = sub(mat_vec(inverse, [-offset[0], y - offset[1], z - offset[2]]), *center);
                    let bb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
                    let ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                    let disc = ab * ab - bb * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2] - radius * radius);
                    if disc <= 0.0 {
                        return Some((0.0, 0.0));
                    }
                    let root = disc.sqrt();
                    Some(interval_chord((-ab - root) / bb, (-ab + root) / bb, x0, x1))
                }
                _ => None,
            },
            _ => None,
        }
    }

    fn contains(&self, x: [f64; 3]) -> bool {
        match self {
            Region::Ball { center, radius } => norm(sub(x, *center)) <= *radius,
            Region::Box { lo, hi } => (0..3).all(|k| x[k] >= lo[k] && x[k] <= hi[k]),
            Region::Complement(r) => !r.contains(x),
            Region::Union(a, b) => a.contains(x) || b.contains(x),
            Region::All => true,
            Region::Image { inner, inverse, offset } => inner.contains(mat_vec(inverse, sub(x, *offset))),
        }
    }

    fn classify_cell(&self, c: [f64; 3], h: [f64; 3]) -> CellClass {
        match self {
            Region::Ball { center, radius } => {
                let d = sub(c, *center);
                let near = [0, 1, 2].map(|k| (d[k].abs() - h[k]).max(0.0));
                let far = [0, 1, 2].map(|k| d[k].abs() + h[k]);
                if norm(far) <= *radius {
                    CellClass::Inside
                } else if norm(near) > *radius {
                    CellClass::Outside
                } else {
                    CellClass::Mixed
                }
            }
            Region::Box { lo, hi } => {
                if (0..3).all(|k| c[k] - h[k] >= lo[k] && c[k] + h[k] <= hi[k]) {
                    CellClass::Inside
                } else if (0..3).any(|k| c[k] + h[k] < lo[k] || c[k] - h[k] > hi[k]) {
                    CellClass::Outside
                } else {
                    CellClass::Mixed
                }
            }
            Region::Complement(r) => match r.classify_cell(c, h) {
                CellClass::Inside => CellClass::Outside,
                CellClass::Outside => CellClass::Inside,
                CellClass::Mixed => CellClass::Mixed,
            },
            Region::Union(a, b) => match (a.classify_cell(c, h), b.classify_cell(c, h)) {
                (CellClass::Inside, _) | (_, CellClass::Inside) => CellClass::Inside,
                (CellClass::Outside, CellClass::Outside) => CellClass::Outside,
                _ => CellClass::Mixed,
            },
            Region::All => CellClass::Inside,
            Region::Image { inner, inverse, offset } => {
                // the image cell sits inside the box center' +- |A^-1| h
                let cc = mat_vec(inverse, sub(c, *offset));
                let hh = [0, 1, 2].map(|r| (0..3).map(|k| inverse[r][k].abs() * h[k]).sum::<f64>());
                inner.classify_cell(cc, hh)
            }
        }
    }
}

/// Sampling controls for regions of influence without a closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSampler {
    /// Sample pitch as a fraction of the largest half-extent of the source region.
    pub pitch_fraction: f64,
    /// Pattern-search halvings around the best sample.
    pub refine_steps: usize,
}

impl Default for RegionSampler {
    fn default() -> Self {
        Self { pitch_fraction: 1.0 / 12.0, refine_steps: 8 }
    }
}

#[derive(Clone, Debug)]
enum InfluenceMode {
    Same,
    /// Source is a rest slice `t = t0`: membership iff `dist(x, source) <= |t2(x) - t0|`.
    RestSlice { t0: f64 },
    Sampled {
        samples: Vec<([f64; 3], f64)>,
        pitch: f64,
        slack: f64,
        t_lo: f64,
        t_hi: f64,
        lo: [f64; 3],
        hi: [f64; 3],
        refine_steps: usize,
    },
}

/// The region of influence of `source` (on surface `from`) on the surface `to`:
/// chart points `x` such that some `p` in the source region is causally related
/// to the event `(t_to(x), x)`.
#[derive(Clone, Debug)]
pub struct InfluenceRegion {
    source: Region,
    from: Surface,
    to: Surface,
    mode: InfluenceMode,
}

fn dist_to_region_rest(region: &Region, x: [f64; 3]) -> Option<f64> {
    match region {
        Region::Ball { center, radius } => Some((norm(sub(x, *center)) - radius).max(0.0)),
        Region::Box { lo, hi } => {
            let d = [0, 1, 2].map(|k| (lo[k] - x[k]).max(0.0).max(x[k] - hi[k]));
            Some(norm(d))
        }
        Region::All => Some(0.0),
        Region::Complement(inner) => match inner.as_ref() {
            Region::Ball { center, radius } => Some((radius - norm(sub(x, *center))).max(0.0)),
            _ => None,
        },
        Region::Union(a, b) => Some(dist_to_region_rest(a, x)?.min(dist_to_region_rest(b, x)?)),
        Region::Image { .. } => None,
    }
}

impl InfluenceRegion {
    pub fn new(source: Region, from: Surface, to: Surface, sampler: RegionSampler) -> Result<Self> {
        let mode = if from == to {
            InfluenceMode::Same
        } else if from.is_rest_slice() && dist_to_region_rest(&source, [0.0; 3]).is_some() {
            InfluenceMode::RestSlice { t0: from.time([0.0; 3]) }
        } else {
            let (lo, hi) = source.bounds().ok_or_else(|| {
                Error::Unsupported("region of influence of an unbounded region needs a rest-slice source".into())
            })?;
            let extent = (0..3).map(|k| 0.5 * (hi[k] - lo[k])).fold(0.0, f64::max);
            let pitch = (extent * sampler.pitch_fraction).max(1e-6);
            let counts = [0, 1, 2].map(|k| (((hi[k] - lo[k]) / pitch).ceil() as usize).max(1));
            let mut samples = Vec::new();
            let (mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..=counts[0] {
                for j in 0..=counts[1] {
                    for l in 0..=counts[2] {
                        let p = [
                            lo[0] + (hi[0] - lo[0]) * i as f64 / counts[0] as f64,
                            lo[1] + (hi[1] - lo[1]) * j as f64 / counts[1] as f64,
                            lo[2] + (hi[2] - lo[2]) * l as f64 / counts[2] as f64,
                        ];
                        if source.contains(p) {
                            let t = from.time(p);
                            t_lo = t_lo.min(t);
                            t_hi = t_hi.max(t);
                            samples.push((p, t));
                        }
                    }
                }
            }
            if samples.is_empty() {
                return Err(Error::Domain("source region contains no sample points".into()));
            }
            // f(x, p) = |t2(x) - t(p)| - |x - p| is 2-Lipschitz in p; every point of the
            // closure lies within one diagonal pitch of a sample.
            let slack = 2.0 * pitch * 3f64.sqrt();
            InfluenceMode::Sampled { samples, pitch, slack, t_lo, t_hi, lo, hi, refine_steps: sampler.refine_steps }
        };
        Ok(Self { source, from, to, mode })
    }

    pub fn source(&self) -> &Region {
        &self.source
    }

    /// Maximum over samples of `|t2(x) - t(p)| - |x - p|`, stopping early once `stop` is reached.
    fn sampled_score(&self, x: [f64; 3], stop: f64) -> f64 {
        let InfluenceMode::Sampled { samples, .. } = &self.mode else { unreachable!() };
        let t2 = self.to.time(x);
        let mut best = f64::NEG_INFINITY;
        for (p, t) in samples {
            let f = (t2 - t).abs() - norm(sub(x, *p));
            if f > best {
                best = f;
                if best >= stop {
                    break;
                }
            }
        }
        best
    }

    fn refined_score(&self, x: [f64; 3]) -> f64 {
        let InfluenceMode::Sampled { samples, pitch, refine_steps, .. } = &self.mode else { unreachable!() };
        let t2 = self.to.time(x);
        let score = |p: [f64; 3]| (t2 - self.from.time(p)).abs() - norm(sub(x, p));
        let mut best_p = samples[0].0;
        let mut best = f64::NEG_INFINITY;
        for (p, t) in samples {
            let f = (t2 - t).abs() - norm(sub(x, *p));
            if f > best {
                best = f;
                best_p = *p;
            }
        }
        let mut step = 0.5 * pitch;
        for _ in 0..*refine_steps {
            let mut improved = false;
            for k in 0..3 {
                for sgn in [-1.0, 1.0] {
                    let mut q = best_p;
                    q[k] += sgn * step;
                    if self.source.contains(q) {
                        let f = score(q);
                        if f > best {
                            best = f;
                            best_p = q;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }

    /// Upper bound of the score over the ball of radius `radius` around `x`.
    fn quick_upper(&self, x: [f64; 3], radius: f64) -> f64 {
        let InfluenceMode::Sampled { t_lo, t_hi, lo, hi, .. } = &self.mode else { unreachable!() };
        let t2 = self.to.time(x);
        let reach = (t2 - t_lo).abs().max((t2 - t_hi).abs()) + radius;
        let d = [0, 1, 2].map(|k| (lo[k] - x[k]).max(0.0).max(x[k] - hi[k]));
        reach - (norm(d) - radius).max(0.0)
    }
}

impl Membership for InfluenceRegion {
    fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let (lo, hi) = self.source.bounds()?;
        if let InfluenceMode::Same = self.mode {
            return Some((lo, hi));
        }
        // |x - c| - R <= |t2(x) - t| <= |t2(c) - t| + G |x - c| for source points at times t
        let c = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]));
        let r = norm(sub(hi, c));
        let t2 = self.to.time(c);
        let (reach, slack) = match &self.mode {
            InfluenceMode::RestSlice { t0 } => ((t2 - t0).abs(), 0.0),
            InfluenceMode::Sampled { t_lo, t_hi, slack, .. } => ((t2 - t_lo).abs().max((t2 - t_hi).abs()), *slack),
            InfluenceMode::Same => unreachable!(),
        };
        let g = self.to.gradient_bound();
        let rho = (r + reach + slack) / (1.0 - g) * (1.0 + 1e-9);
        Some((c.map(|v| v - rho), c.map(|v| v + rho)))
    }

    fn chord(&self, y: f64, z: f64, x0: f64, x1: f64) -> Option<(f64, f64)> {
        match (&self.mode, &self.source) {
            (InfluenceMode::Same, source) => source.chord(y, z, x0, x1),
            (InfluenceMode::RestSlice { t0 }, Region::Ball { center, radius }) if self.to.is_rest_slice() => {
                let grown = Region::ball(*center, radius + (self.to.time(*center) - t0).abs());
                grown.chord(y, z, x0, x1)
            }
            _ => None,
        }
    }

    fn contains(&self, x: [f64; 3]) -> bool {
        match &self.mode {
            InfluenceMode::Same => self.source.contains(x),
            InfluenceMode::RestSlice { t0 } => {
                let d = dist_to_region_rest(&self.source, x).expect("checked at construction");
                d <= (self.to.time(x) - t0).abs()
            }
            InfluenceMode::Sampled { slack, .. } => {
                if self.source.contains(x) {
                    return true;
                }
                if self.quick_upper(x, 0.0) < -slack {
                    return false;
                }
                if self.sampled_score(x, -slack) >= -slack {
                    return true;
                }
                self.refined_score(x) >= -slack
            }
        }
    }

    fn classify_cell(&self, c: [f64; 3], h: [f64; 3]) -> CellClass {
        match &self.mode {
            InfluenceMode::Same => self.source.classify_cell(c, h),
            InfluenceMode::RestSlice { t0 } => {
                // g(x) = |t2(x) - t0| - dist(x) is 2-Lipschitz
                let r = norm(h);
                let d = dist_to_region_rest(&self.source, c).expect("checked at construction");
                let g = (self.to.time(c) - t0).abs() - d;
                if g - 2.0 * r >= 0.0 {
                    CellClass::Inside
                } else if g + 2.0 * r < 0.0 {
                    CellClass::Outside
                } else {
                    CellClass::Mixed
                }
            }
            InfluenceMode::Sampled { slack, .. } => {
                let r = norm(h);
                if self.source.classify_cell(c, h) == CellClass::Inside {
                    return CellClass::Inside;
                }
                if self.quick_upper(c, r) < -slack {
                    return CellClass::Outside;
                }
                let f = self.sampled_score(c, -slack + 2.0 * r);
                if f - 2.0 * r >= -slack {
                    CellClass::Inside
                } else if f + 2.0 * r + slack < -slack {
                    CellClass::Outside
                } else {
                    CellClass::Mixed
                }
            }
        }
    }
}

/// Membership of `x` in the region of influence of `delta` (on `from`) on `to`.
pub fn influence_membership(
    delta: &Region,
    from: &Surface,
    to: &Surface,
    x: [f64; 3],
    sampler: RegionSampler,
) -> Result<bool> {
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("chart point"));
    }
    Ok(InfluenceRegion::new(delta.clone(), *from, *to, sampler)?.contains(x))
}
