//! Evaluation of oscillatory Fourier sums on tensor-product grids of surface points.
//!
//! A sum `sum_terms a e^{-i w t} e^{i q.x}` with `q` on a lattice is expanded in time with
//! Chebyshev polynomials over windows `[t_c - h, t_c + h]` (Jacobi-Anger), and each time order is
//! synthesized on the spatial grid with three one-dimensional passes.

use num_complex::Complex64;
use rayon::prelude::*;
use std::cell::OnceCell;
use std::collections::HashMap;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Largest `|w| h` handled by one window.
const WINDOW_PHASE: f64 = 24.0;
const MAX_ORDER: usize = 80;

/// Tensor product of three coordinate axes; point `(i, j, l)` has index `(i * n1 + j) * n2 + l`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct TensorGrid {
    pub axes: [Vec<f64>; 3],
}

impl TensorGrid {
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (n1, n2) = (self.axes[1].len(), self.axes[2].len());
        [self.axes[0][idx / (n1 * n2)], self.axes[1][(idx / n2) % n1], self.axes[2][idx % n2]]
    }
}

/// `sum_{a,b,c} coef[a,b,c] exp(i (f0[a] x + f1[b] y + f2[c] z))` at every grid point.
pub(crate) fn synthesize(coef: &[Complex64], freqs: &[Vec<f64>; 3], grid: &TensorGrid) -> Vec<Complex64> {
    let n = [freqs[0].len(), freqs[1].len(), freqs[2].len()];
    let m = [grid.axes[0].len(), grid.axes[1].len(), grid.axes[2].len()];
    debug_assert_eq!(coef.len(), n[0] * n[1] * n[2]);
    let table = |a: usize| -> Vec<Complex64> {
        let mut t = Vec::with_capacity(n[a] * m[a]);
        for f in &freqs[a] {
            for x in &grid.axes[a] {
                t.push(Complex64::from_polar(1.0, f * x));
            }
        }
        t
    };
    let (e0, e1, e2) = (table(0), table(1), table(2));

    // axis 2
    let mut s1 = vec![ZERO; n[0] * n[1] * m[2]];
    s1.par_chunks_mut(m[2]).enumerate().for_each(|(ab, out)| {
        let row = &coef[ab * n[2]..(ab + 1) * n[2]];
        for (c, v) in row.iter().enumerate() {
            if *v != ZERO {
                let e = &e2[c * m[2]..(c + 1) * m[2]];
                out.iter_mut().zip(e).for_each(|(o, w)| *o += v * w);
            }
        }
    });
    // axis 1
    let mut s2 = vec![ZERO; n[0] * m[1] * m[2]];
    s2.par_chunks_mut(m[1] * m[2]).enumerate().for_each(|(a, out)| {
        for b in 0..n[1] {
            let row = &s1[(a * n[1] + b) * m[2]..(a * n[1] + b + 1) * m[2]];
            if row.iter().all(|v| *v == ZERO) {
                continue;
            }
            for y in 0..m[1] {
                let w = e1[b * m[1] + y];
                out[y * m[2]..(y + 1) * m[2]].iter_mut().zip(row).for_each(|(o, v)| *o += v * w);
            }
        }
    });
    // axis 0
    let plane = m[1] * m[2];
    let mut out = vec![ZERO; m[0] * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(x, o)| {
        for a in 0..n[0] {
            let w = e0[a * m[0] + x];
            o.iter_mut().zip(&s2[a * plane..(a + 1) * plane]).for_each(|(o, v)| *o += v * w);
        }
    });
    out
}

/// `J_0(x), ..., J_order(x)` by Miller's backward recurrence normalized with `J_0 + 2 sum J_2k = 1`.
pub(crate) fn bessel_j_all(x: f64, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let big = order.max(ax.ceil() as usize);
    let mut start = big + 16 + (40.0 * big as f64).sqrt() as usize;
    start += start % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (0..start).rev() {
        // cur = J_{k+1}, next = J_{k+2}  ->  J_k
        let prev = 2.0 * (k + 1) as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        if k <= order {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// Smallest order whose Jacobi-Anger tail at phase `z` is below 1e-15.
pub(crate) fn chebyshev_order(z: f64) -> usize {
    let z = z.abs();
    if z == 0.0 {
        return 0;
    }
    let mut d = 0usize;
    loop {
        let k = (d + 1) as f64;
        if k > z && (std::f64::consts::E * z / (2.0 * k)).powf(k) < 1e-15 {
            return d.min(MAX_ORDER);
        }
        d += 1;
    }
}

/// Time window `[center - half, center + half]` with its expansion order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct TimeWindow {
    pub center: f64,
    pub half: f64,
    pub order: usize,
}

impl TimeWindow {
    /// Splits `[t_min, t_max]` so that `omega_max * half` stays moderate in every window.
    pub fn cover(t_min: f64, t_max: f64, omega_max: f64) -> Vec<TimeWindow> {
        let span = (t_max - t_min).max(0.0);
        let count = ((omega_max * span / 2.0) / WINDOW_PHASE).ceil().max(1.0) as usize;
        let width = span / count as f64;
        (0..count)
            .map(|w| {
                let half = 0.5 * width;
                TimeWindow { center: t_min + (w as f64 + 0.5) * width, half, order: chebyshev_order(omega_max * half) }
            })
            .collect()
    }

    /// Index of the window holding `t`; times past either end go to the outermost window,
    /// so rounding in the window edges never drops a point.
    pub fn index_of(windows: &[TimeWindow], t: f64) -> usize {
        windows.iter().position(|w| t < w.center + w.half).unwrap_or(windows.len() - 1)
    }

    pub fn tau(&self, t: f64) -> f64 {
        if self.half == 0.0 {
            0.0
        } else {
            ((t - self.center) / self.half).clamp(-1.0, 1.0)
        }
    }

    /// `e^{-i w t} = sum_j coeffs[j] T_j(tau)`.
    pub fn coefficients(&self, omega: f64, out: &mut [Complex64]) {
        let phase = Complex64::from_polar(1.0, -omega * self.center);
        if self.order == 0 {
            out[0] = phase;
            return;
        }
        let j = bessel_j_all(omega * self.half, self.order);
        let mut rot = Complex64::new(1.0, 0.0);
        for (k, o) in out.iter_mut().enumerate().take(self.order + 1) {
            let eps = if k == 0 { 1.0 } else { 2.0 };
            *o = phase * rot * (eps * j[k]);
            rot *= Complex64::new(0.0, -1.0);
        }
    }
}

/// Terms `amp_f e^{-i w t} e^{i q.x}` with `q` on a tensor lattice.
pub(crate) trait SpectralSource: Sync {
    fn fields(&self) -> usize;
    fn frequencies(&self) -> &[Vec<f64>; 3];
    fn omega_max(&self) -> f64;
    /// Calls `sink(lattice_index, w, amps)` once per term, in a fixed order.
    fn for_each_term(&self, sink: &mut dyn FnMut(usize, f64, &[Complex64]));
}

/// Values of every field at grid point `i` and time `times[i]`; result is `[field][point]`.
pub(crate) fn evaluate(src: &dyn SpectralSource, grid: &TensorGrid, times: &[f64]) -> Vec<Vec<Complex64>> {
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Prepared::new(src, t_min, t_max).evaluate(src, grid, times)
}

/// Time windows for a fixed time range with their coefficient tensors built on first use,
/// so one source can be synthesized on several grids without repeating the term sums.
pub(crate) struct Prepared {
    windows: Vec<TimeWindow>,
    coefs: Vec<OnceCell<Vec<Complex64>>>,
}

impl Prepared {
    pub(crate) fn new(src: &dyn SpectralSource, t_min: f64, t_max: f64) -> Self {
        let windows = TimeWindow::cover(t_min, t_max, src.omega_max());
        let coefs = windows.iter().map(|_| OnceCell::new()).collect();
        Self { windows, coefs }
    }

    fn coefficients(&self, src: &dyn SpectralSource, wi: usize) -> &[Complex64] {
        self.coefs[wi].get_or_init(|| {
            let win = &self.windows[wi];
            let nf = src.fields();
            let lattice: usize = src.frequencies().iter().map(Vec::len).product();
            let nj = win.order + 1;
            let mut coef = vec![ZERO; nf * nj * lattice];
            // pair sources repeat few distinct frequencies, so the expansions are shared
            let mut cache: HashMap<u64, Vec<Complex64>> = HashMap::new();
            src.for_each_term(&mut |idx, omega, amps| {
                let tc = cache.entry(omega.to_bits()).or_insert_with(|| {
                    let mut tc = vec![ZERO; nj];
                    win.coefficients(omega, &mut tc);
                    tc
                });
                for (f, a) in amps.iter().enumerate() {
                    for (j, c) in tc.iter().enumerate() {
                        coef[(f * nj + j) * lattice + idx] += a * c;
                    }
                }
            });
            coef
        })
    }

    /// Fields at every grid point; `src` must be the source this was prepared for and
    /// the times must lie in the prepared range.
    pub(crate) fn evaluate(&self, src: &dyn SpectralSource, grid: &TensorGrid, times: &[f64]) -> Vec<Vec<Complex64>> {
        let npts = grid.len();
        assert_eq!(times.len(), npts, "one time per grid point");
        let nf = src.fields();
        let freqs = src.frequencies();
        let lattice: usize = freqs.iter().map(Vec::len).product();
        let mut out = vec![vec![ZERO; npts]; nf];
        let owner: Vec<usize> = times.iter().map(|t| TimeWindow::index_of(&self.windows, *t)).collect();
        for (wi, win) in self.windows.iter().enumerate() {
            let members: Vec<usize> = (0..npts).filter(|i| owner[*i] == wi).collect();
            if members.is_empty() {
                continue;
            }
            let nj = win.order + 1;
            let coef = self.coefficients(src, wi);
            let tau: Vec<f64> = members.iter().map(|i| win.tau(times[*i])).collect();
            let mut t_prev = vec![1.0; members.len()];
            let mut t_cur = tau.clone();
            for j in 0..nj {
                let tj: &[f64] = if j == 0 { &t_prev } else { &t_cur };
                for f in 0..nf {
                    let block = &coef[(f * nj + j) * lattice..(f * nj + j + 1) * lattice];
                    if block.iter().all(|v| *v == ZERO) {
                        continue;
                    }
                    let vals = synthesize(block, freqs, grid);
                    for (k, i) in members.iter().enumerate() {
                        out[f][*i] += vals[*i] * tj[k];
                    }
                }
                if j >= 1 {
                    let next: Vec<f64> = (0..members.len()).map(|k| 2.0 * tau[k] * t_cur[k] - t_prev[k]).collect();
                    t_prev = std::mem::replace(&mut t_cur, next);
                }
            }
        }
        out
    }
}
