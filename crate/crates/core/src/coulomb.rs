//! The periodic Coulomb kernel `V` on the torus (`-ΔV = δ₀ - 1`, zero mean),
//! point configurations, and the renormalized interaction energy `F_N`.
//!
//! Point values use Ewald splitting with width `η`:
//!
//! ```text
//! V(x) = Σ_m G(x - m) - η²/(4π) + Σ_{k≠0} e^{-πη²|k|²}/(4π²|k|²) cos(2πk·x)
//! ```
//!
//! with `G(r) = erfc(√π r/η)/(4πr)` in 3D and `G(r) = E₁(πr²/η²)/(4π)` in 2D.
//! Both truncations are sized from explicit tail bounds.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::spectral::{self, TrigInterpolant};

/// Distance from the origin below which the kernel refuses to evaluate.
pub const ORIGIN_TOLERANCE: f64 = 1e-12;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E₁(z)` for `z > 0`.
pub fn exp_integral_e1(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    if z <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= -z / k;
            let add = -term / k;
            sum += add;
            if add.abs() <= 1e-17 * sum.abs().max(1e-300) {
                break;
            }
            k += 1.0;
        }
        -EULER_GAMMA - z.ln() + sum
    } else {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

fn unit_ball_volume(dim: usize) -> f64 {
    if dim == 2 {
        PI
    } else {
        4.0 * PI / 3.0
    }
}

/// Upper bound on lattice points (of any shift of ℤ^d) at distance in `[r, r+1)`.
fn shell_count_bound(dim: usize, r: f64) -> f64 {
    let half_diag = (dim as f64).sqrt() / 2.0;
    let inner = (r - half_diag).max(0.0);
    let outer = r + 1.0 + half_diag;
    unit_ball_volume(dim) * (outer.powi(dim as i32) - inner.powi(dim as i32))
}

/// Sum of `count(r) · f(r)` over unit shells starting at `start`, for a
/// decreasing nonnegative `f`.
fn shell_tail(dim: usize, start: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for j in 0..400 {
        let r = start + j as f64;
        let term = shell_count_bound(dim, r) * f(r);
        total += term;
        if term < 1e-40 || (j > 4 && term < 1e-6 * total * f64::EPSILON) {
            break;
        }
    }
    total
}

/// Real-space Ewald term `G(r)` and its radial derivative.
#[inline]
fn short_range(dim: usize, eta: f64, r: f64) -> (f64, f64) {
    let z = PI * r * r / (eta * eta);
    if dim == 2 {
        let g = exp_integral_e1(z) / (4.0 * PI);
        let dg = -(-z).exp() / (2.0 * PI * r);
        (g, dg)
    } else {
        let b = PI.sqrt() / eta;
        let erfc = libm::erfc(b * r);
        let g = erfc / (4.0 * PI * r);
        let dg = -erfc / (4.0 * PI * r * r) - (2.0 / eta) * (-z).exp() / (4.0 * PI * r);
        (g, dg)
    }
}

/// Fourier weight `e^{-πη²|k|²}/(4π²|k|²)`.
#[inline]
fn fourier_weight(eta: f64, k2: f64) -> f64 {
    (-PI * eta * eta * k2).exp() / (4.0 * PI * PI * k2)
}

/// Ewald splitting width and truncation radii.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EwaldParams {
    dim: usize,
    eta: f64,
    real_cutoff: f64,
    fourier_cutoff: f64,
    accuracy: f64,
}

impl EwaldParams {
    pub const DEFAULT_ACCURACY: f64 = 1e-12;
    pub const DEFAULT_ETA: f64 = 0.6;

    pub fn new(dim: usize, eta: f64) -> Result<Self> {
        Self::with_accuracy(dim, eta, Self::DEFAULT_ACCURACY)
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        Self::new(dim, Self::DEFAULT_ETA)
    }

    /// Smallest cutoffs whose tail bounds are each below `accuracy / 2`.
    pub fn with_accuracy(dim: usize, eta: f64, accuracy: f64) -> Result<Self> {
        validate(dim, eta, accuracy)?;
        let budget = accuracy / 2.0;
        let real_cutoff = bisect_cutoff(eta * 0.05, eta * 20.0 + 2.0, |r| {
            real_tail_bound(dim, eta, r) <= budget
        });
        let fourier_cutoff = bisect_cutoff(1.0, 40.0 / eta + 2.0, |k| {
            fourier_tail_bound(dim, eta, k) <= budget
        });
        Ok(Self {
            dim,
            eta,
            real_cutoff,
            fourier_cutoff,
            accuracy,
        })
    }

    /// Explicit cutoffs, rejected if either tail bound exceeds `accuracy / 2`.
    pub fn with_cutoffs(
        dim: usize,
        eta: f64,
        real_cutoff: f64,
        fourier_cutoff: f64,
        accuracy: f64,
    ) -> Result<Self> {
        validate(dim, eta, accuracy)?;
        if real_tail_bound(dim, eta, real_cutoff) > accuracy / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "real-space cutoff {real_cutoff} too small for eta {eta}"
            )));
        }
        if fourier_tail_bound(dim, eta, fourier_cutoff) > accuracy / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "Fourier cutoff {fourier_cutoff} too small for eta {eta}"
            )));
        }
        Ok(Self {
            dim,
            eta,
            real_cutoff,
            fourier_cutoff,
            accuracy,
        })
    }

    /// Parameters for pair sums over `n_points` points: the real-space
    /// cutoff stays below 1/2 so only the minimum image contributes.
    pub fn for_pair_sum(dim: usize, n_points: usize) -> Result<Self> {
        let mut eta = (n_points.max(2) as f64).powf(-1.0 / (2.0 * dim as f64)).min(0.2);
        loop {
            let p = Self::new(dim, eta)?;
            if p.real_cutoff <= 0.5 {
                return Ok(p);
            }
            eta *= 0.95;
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn eta(&self) -> f64 {
        self.eta
    }
    #[inline]
    pub fn real_cutoff(&self) -> f64 {
        self.real_cutoff
    }
    #[inline]
    pub fn fourier_cutoff(&self) -> f64 {
        self.fourier_cutoff
    }
    #[inline]
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    /// Neutralizing constant `η²/(4π)`.
    #[inline]
    pub fn background(&self) -> f64 {
        self.eta * self.eta / (4.0 * PI)
    }
}

fn validate(dim: usize, eta: f64, accuracy: f64) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!("Ewald width must be positive, got {eta}")));
    }
    if !(accuracy.is_finite() && accuracy > 0.0) {
        return Err(Error::InvalidParameter(format!("accuracy must be positive, got {accuracy}")));
    }
    Ok(())
}

fn bisect_cutoff(mut lo: f64, mut hi: f64, ok: impl Fn(f64) -> bool) -> f64 {
    while !ok(hi) {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Bound on the omitted real-space images (value and gradient).
pub fn real_tail_bound(dim: usize, eta: f64, cutoff: f64) -> f64 {
    if cutoff <= 0.0 {
        return f64::INFINITY;
    }
    shell_tail(dim, cutoff, |r| {
        let (g, dg) = short_range(dim, eta, r);
        g.max(dg.abs())
    })
}

/// Bound on the omitted Fourier modes (value and gradient).
pub fn fourier_tail_bound(dim: usize, eta: f64, cutoff: f64) -> f64 {
    if cutoff < 1.0 {
        return f64::INFINITY;
    }
    shell_tail(dim, cutoff, |k| fourier_weight(eta, k * k) * (2.0 * PI * k).max(1.0))
}

/// Wavevectors in the half space `k > 0` (lexicographic) with `|k| <= cutoff`.
fn half_space_modes(dim: usize, cutoff: f64) -> Vec<[i64; 3]> {
    let kmax = cutoff.floor() as i64;
    let c2 = cutoff * cutoff;
    let range3 = if dim == 3 { -kmax..=kmax } else { 0..=0 };
    let mut out = Vec::new();
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            for k3 in range3.clone() {
                let positive = k1 > 0 || (k1 == 0 && (k2 > 0 || (k2 == 0 && k3 > 0)));
                let k2sum = (k1 * k1 + k2 * k2 + k3 * k3) as f64;
                if positive && k2sum <= c2 {
                    out.push([k1, k2, k3]);
                }
            }
        }
    }
    out
}

/// Minimum-image representative of `x` in `[-1/2, 1/2]^d`.
#[inline]
pub fn minimum_image(x: [f64; 3], dim: usize) -> [f64; 3] {
    let mut r = [0.0; 3];
    for a in 0..dim {
        r[a] = x[a] - x[a].round();
    }
    r
}

#[inline]
fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Point evaluator for `V` and `∇V`.
#[derive(Clone, Debug)]
pub struct CoulombKernel {
    params: EwaldParams,
    images: Vec<[f64; 3]>,
    modes: Vec<([f64; 3], f64)>,
}

impl CoulombKernel {
    pub fn new(params: EwaldParams) -> Self {
        let dim = params.dim;
        let reach = params.real_cutoff + (dim as f64).sqrt() / 2.0;
        let m = reach.ceil() as i64;
        let range3 = if dim == 3 { -m..=m } else { 0..=0 };
        let mut images = Vec::new();
        for m1 in -m..=m {
            for m2 in -m..=m {
                for m3 in range3.clone() {
                    let v = [m1 as f64, m2 as f64, m3 as f64];
                    if norm(v) < reach {
                        images.push(v);
                    }
                }
            }
        }
        let modes = half_space_modes(dim, params.fourier_cutoff)
            .into_iter()
            .map(|k| {
                let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
                let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
                (kf, fourier_weight(params.eta, k2))
            })
            .collect();
        Self {
            params,
            images,
            modes,
        }
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        Ok(Self::new(EwaldParams::default_for(dim)?))
    }

    pub fn params(&self) -> &EwaldParams {
        &self.params
    }

    fn reduced(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let r = minimum_image(x, self.params.dim);
        let distance = norm(r);
        if !(distance >= ORIGIN_TOLERANCE) {
            return Err(Error::OriginEvaluation { distance });
        }
        Ok(r)
    }

    /// `V(x)`.
    pub fn value(&self, x: [f64; 3]) -> Result<f64> {
        let dim = self.params.dim;
        let xr = self.reduced(x)?;
        let rc = self.params.real_cutoff;
        let mut real = 0.0;
        for m in &self.images {
            let y = [xr[0] - m[0], xr[1] - m[1], xr[2] - m[2]];
            let r = norm(y);
            if r < rc {
                real += short_range(dim, self.params.eta, r).0;
            }
        }
        let mut four = 0.0;
        for (k, w) in &self.modes {
            let phase = 2.0 * PI * (k[0] * xr[0] + k[1] * xr[1] + k[2] * xr[2]);
            four += w * phase.cos();
        }
        Ok(real - self.params.background() + 2.0 * four)
    }

    /// `∇V(x)`.
    pub fn gradient(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let dim = self.params.dim;
        let xr = self.reduced(x)?;
        let rc = self.params.real_cutoff;
        let mut g = [0.0; 3];
        for m in &self.images {
            let y = [xr[0] - m[0], xr[1] - m[1], xr[2] - m[2]];
            let r = norm(y);
            if r < rc {
                let dg = short_range(dim, self.params.eta, r).1;
                for a in 0..dim {
                    g[a] += dg * y[a] / r;
                }
            }
        }
        for (k, w) in &self.modes {
            let phase = 2.0 * PI * (k[0] * xr[0] + k[1] * xr[1] + k[2] * xr[2]);
            let s = -2.0 * 2.0 * PI * w * phase.sin();
            for a in 0..dim {
                g[a] += s * k[a];
            }
        }
        Ok(g)
    }
}

/// `V(x)` with default Ewald parameters.
pub fn kernel_value(dim: usize, x: [f64; 3]) -> Result<f64> {
    CoulombKernel::default_for(dim)?.value(x)
}

/// `∇V(x)` with default Ewald parameters.
pub fn kernel_gradient(dim: usize, x: [f64; 3]) -> Result<[f64; 3]> {
    CoulombKernel::default_for(dim)?.gradient(x)
}

/// `V ∗ ρ` on the grid (multiplier `1/(4π²|k|²)`, zero mode dropped).
pub fn convolve_kernel(density: &ScalarField) -> ScalarField {
    spectral::inverse_laplacian_coeffs(&spectral::transform(density)).to_real()
}

/// `N >= 2` pairwise-distinct points of the torus, stored in `[0,1)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfiguration {
    dim: usize,
    points: Vec<[f64; 3]>,
}

#[inline]
fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl PointConfiguration {
    pub fn new(dim: usize, points: Vec<[f64; 3]>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points.len() < 2 {
            return Err(Error::InvalidParameter("a configuration needs at least 2 points".into()));
        }
        let mut wrapped = Vec::with_capacity(points.len());
        for p in points {
            if !p[..dim].iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coordinate".into()));
            }
            let mut q = [0.0; 3];
            for a in 0..dim {
                q[a] = wrap_unit(p[a]);
            }
            wrapped.push(q);
        }
        let mut sorted = wrapped.clone();
        sort_points(&mut sorted);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::OriginEvaluation { distance: 0.0 });
        }
        Ok(Self {
            dim,
            points: wrapped,
        })
    }

    /// The `m^d` lattice points `j/m`.
    pub fn lattice(dim: usize, m: usize) -> Result<Self> {
        let count = m.pow(dim as u32);
        let pts = (0..count)
            .map(|i| {
                let mut p = [0.0; 3];
                let mut rest = i;
                for slot in p.iter_mut().take(dim) {
                    *slot = (rest % m) as f64 / m as f64;
                    rest /= m;
                }
                p
            })
            .collect();
        Self::new(dim, pts)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    #[inline]
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Copy translated by `shift` and wrapped back into the unit cell.
    pub fn translated(&self, shift: [f64; 3]) -> Result<Self> {
        let pts = self
            .points
            .iter()
            .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]])
            .collect();
        Self::new(self.dim, pts)
    }

    /// Smallest periodic distance between two points.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = sub(self.points[i], self.points[j]);
                best = best.min(norm(minimum_image(d, self.dim)));
            }
        }
        best
    }

    /// CSV text: header `x1,...,xd`, then one row per point with 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|a| format!("x{a}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in &self.points {
            let row: Vec<String> = p[..self.dim].iter().map(|c| format!("{c:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let dim = reader
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .len();
        if dim != 2 && dim != 3 {
            return Err(Error::Format(format!("expected 2 or 3 columns, found {dim}")));
        }
        let mut pts = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Format(e.to_string()))?;
            let mut p = [0.0; 3];
            for (a, field) in record.iter().enumerate() {
                p[a] = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad coordinate '{field}'")))?;
            }
            pts.push(p);
        }
        Self::new(dim, pts)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_csv(&text)
    }
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn sort_points(points: &mut [[f64; 3]]) {
    points.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
}

/// Permutation that sorts the points lexicographically.
fn canonical_order(points: &[[f64; 3]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (points[i], points[j]);
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    idx
}

/// Per-axis tables `e^{2πi k x_j}` for `k ∈ [-K, K]`, laid out `[axis][k][j]`.
struct PhaseTables {
    kmax: i64,
    n: usize,
    tables: Vec<Vec<Complex64>>,
}

impl PhaseTables {
    fn new(points: &[[f64; 3]], dim: usize, kmax: i64) -> Self {
        let n = points.len();
        let width = (2 * kmax + 1) as usize;
        let tables = (0..dim)
            .map(|a| {
                let mut t = vec![Complex64::new(0.0, 0.0); width * n];
                for (j, p) in points.iter().enumerate() {
                    let base = Complex64::from_polar(1.0, 2.0 * PI * p[a]);
                    t[kmax as usize * n + j] = Complex64::new(1.0, 0.0);
                    let mut pos = Complex64::new(1.0, 0.0);
                    for k in 1..=kmax {
                        // direct evaluation keeps the error from compounding
                        pos = if k % 16 == 0 {
                            Complex64::from_polar(1.0, 2.0 * PI * k as f64 * p[a])
                        } else {
                            pos * base
                        };
                        t[(kmax + k) as usize * n + j] = pos;
                        t[(kmax - k) as usize * n + j] = pos.conj();
                    }
                }
                t
            })
            .collect();
        Self { kmax, n, tables }
    }

    #[inline]
    fn row(&self, axis: usize, k: i64) -> &[Complex64] {
        let start = (k + self.kmax) as usize * self.n;
        &self.tables[axis][start..start + self.n]
    }

    /// `e^{2πi k·x_j}` for all `j`, written into `out`.
    fn fill(&self, k: [i64; 3], dim: usize, out: &mut [Complex64]) {
        let r0 = self.row(0, k[0]);
        let r1 = self.row(1, k[1]);
        if dim == 2 {
            for ((o, a), b) in out.iter_mut().zip(r0).zip(r1) {
                *o = a * b;
            }
        } else {
            let r2 = self.row(2, k[2]);
            for (((o, a), b), c) in out.iter_mut().zip(r0).zip(r1).zip(r2) {
                *o = a * b * c;
            }
        }
    }
}

/// Pair sums `Σ_{i≠j}` of `V` and of `(v_i - v_j)·∇V` over a configuration,
/// evaluated by Ewald splitting with a minimum-image real-space part and a
/// structure-factor Fourier part. Points are visited in canonical order, so
/// the result does not depend on their labelling.
pub struct PairSums {
    params: EwaldParams,
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
}

impl PairSums {
    pub fn new(config: &PointConfiguration) -> Result<Self> {
        let params = EwaldParams::for_pair_sum(config.dim(), config.len())?;
        let order = canonical_order(config.points());
        let points = order.iter().map(|&i| config.points()[i]).collect();
        Ok(Self {
            params,
            points,
            order,
        })
    }

    pub fn params(&self) -> &EwaldParams {
        &self.params
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    /// Real-space rows `Σ_{j>i} f(x_i - x_j)` for each `i`, in parallel.
    fn real_rows<T: Send>(
        &self,
        f: impl Fn(usize, usize, [f64; 3], f64, f64) -> T + Sync,
        zero: T,
        add: impl Fn(T, T) -> T + Sync,
    ) -> Result<Vec<T>>
    where
        T: Clone + Sync,
    {
        let dim = self.dim();
        let rc = self.params.real_cutoff;
        let eta = self.params.eta;
        let pts = &self.points;
        (0..pts.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = zero.clone();
                for j in i + 1..pts.len() {
                    let y = minimum_image(sub(pts[i], pts[j]), dim);
                    let r = norm(y);
                    if !(r >= ORIGIN_TOLERANCE) {
                        return Err(Error::OriginEvaluation { distance: r });
                    }
                    if r < rc {
                        let (g, dg) = short_range(dim, eta, r);
                        acc = add(acc, f(i, j, y, g, dg));
                    }
                }
                Ok(acc)
            })
            .collect()
    }

    /// `Σ_{i≠j} V(x_i - x_j)`.
    pub fn energy(&self) -> Result<f64> {
        let n = self.points.len();
        let rows = self.real_rows(|_, _, _, g, _| g, 0.0, |a, b| a + b)?;
        let real: f64 = 2.0 * rows.iter().sum::<f64>();

        let modes = half_space_modes(self.dim(), self.params.fourier_cutoff);
        let kmax = self.params.fourier_cutoff.floor() as i64;
        let tables = PhaseTables::new(&self.points, self.dim(), kmax);
        let eta = self.params.eta;
        let dim = self.dim();
        let per_mode: Vec<f64> = modes
            .par_iter()
            .map_init(
                || vec![Complex64::new(0.0, 0.0); n],
                |buf, k| {
                    tables.fill(*k, dim, buf);
                    let s: Complex64 = buf.iter().sum();
                    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                    fourier_weight(eta, k2) * (s.norm_sqr() - n as f64)
                },
            )
            .collect();
        let four = 2.0 * per_mode.iter().sum::<f64>();
        let nf = n as f64;
        Ok(real + four - nf * (nf - 1.0) * self.params.background())
    }

    /// `Σ_{i≠j} (v_i - v_j)·∇V(x_i - x_j)` with `velocities` given in the
    /// configuration's original point order.
    pub fn commutator(&self, velocities: &[[f64; 3]]) -> Result<f64> {
        let n = self.points.len();
        if velocities.len() != n {
            return Err(Error::InvalidParameter("one velocity per point required".into()));
        }
        let dim = self.dim();
        let v: Vec<[f64; 3]> = self.order.iter().map(|&i| velocities[i]).collect();
        let rows = self.real_rows(
            |i, j, y, _, dg| {
                let r = norm(y);
                (0..dim).map(|a| (v[i][a] - v[j][a]) * dg * y[a] / r).sum::<f64>()
            },
            0.0,
            |a, b| a + b,
        )?;
        let real: f64 = 2.0 * rows.iter().sum::<f64>();

        let modes = half_space_modes(dim, self.params.fourier_cutoff);
        let kmax = self.params.fourier_cutoff.floor() as i64;
        let tables = PhaseTables::new(&self.points, dim, kmax);
        let eta = self.params.eta;
        let per_mode: Vec<f64> = modes
            .par_iter()
            .map_init(
                || vec![Complex64::new(0.0, 0.0); n],
                |buf, k| {
                    tables.fill(*k, dim, buf);
                    let mut s = Complex64::new(0.0, 0.0);
                    let mut kt = Complex64::new(0.0, 0.0);
                    for (e, vj) in buf.iter().zip(&v) {
                        s += e;
                        let kv: f64 = (0..dim).map(|a| k[a] as f64 * vj[a]).sum();
                        kt += e * kv;
                    }
                    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                    fourier_weight(eta, k2) * (kt * s.conj()).im
                },
            )
            .collect();
        let four = -8.0 * PI * per_mode.iter().sum::<f64>();
        Ok(real + four)
    }
}

/// A signed measure `a Σ_i δ_{x_i} + s(x) dx` with equal atom weights and a
/// smooth grid density, and its diagonal-excised Coulomb quadratic forms.
/// Atoms are kept in lexicographic order.
#[derive(Clone, Debug)]
pub struct SignedMeasure {
    config: PointConfiguration,
    atom_weight: f64,
    smooth: ScalarField,
}

impl SignedMeasure {
    pub fn new(config: PointConfiguration, atom_weight: f64, smooth: ScalarField) -> Result<Self> {
        if smooth.grid().dim() != config.dim() {
            return Err(Error::GridMismatch);
        }
        let mut pts = config.points().to_vec();
        sort_points(&mut pts);
        let config = PointConfiguration {
            dim: config.dim(),
            points: pts,
        };
        Ok(Self {
            config,
            atom_weight,
            smooth,
        })
    }

    /// `μ_N - mu` with `μ_N = (1/N) Σ δ_{x_i}`.
    pub fn empirical_minus(config: PointConfiguration, mu: &ScalarField) -> Result<Self> {
        let a = 1.0 / config.len() as f64;
        Self::new(config, a, mu.scaled(-1.0))
    }

    pub fn negated(&self) -> Self {
        Self {
            config: self.config.clone(),
            atom_weight: -self.atom_weight,
            smooth: self.smooth.scaled(-1.0),
        }
    }

    pub fn config(&self) -> &PointConfiguration {
        &self.config
    }

    /// Total mass `a N + ∫ s`.
    pub fn mass(&self) -> f64 {
        self.atom_weight * self.config.len() as f64 + self.smooth.mean()
    }

    /// `∫∫_{x≠y} V(x - y) dm(x) dm(y)`.
    pub fn energy(&self) -> Result<f64> {
        let a = self.atom_weight;
        let pairs = PairSums::new(&self.config)?.energy()?;
        let pot = convolve_kernel(&self.smooth);
        let interp = TrigInterpolant::from_field(&pot);
        let cross: f64 = self.config.points().iter().map(|&x| interp.eval(x)).sum();
        let c = spectral::transform(&self.smooth);
        let smooth = spectral::hminus1_inner_coeffs(&c, &c)?;
        Ok(a * a * pairs + 2.0 * a * cross + smooth)
    }

    /// `∫∫_{x≠y} (v(x) - v(y))·∇V(x - y) dm(x) dm(y)`.
    pub fn commutator(&self, v: &VectorField) -> Result<f64> {
        let grid = self.smooth.grid();
        grid.check_same(&v.grid())?;
        let dim = grid.dim();
        let a = self.atom_weight;
        let pts = self.config.points();

        let v_interp: Vec<TrigInterpolant> =
            v.components().iter().map(TrigInterpolant::from_field).collect();
        let v_at: Vec<[f64; 3]> = pts
            .iter()
            .map(|&x| {
                let mut out = [0.0; 3];
                for (a, it) in v_interp.iter().enumerate() {
                    out[a] = it.eval(x);
                }
                out
            })
            .collect();
        let pairs = PairSums::new(&self.config)?.commutator(&v_at)?;

        // ∇V∗s and Σ_α ∂_α V∗(v^α s)
        let pot = convolve_kernel(&self.smooth);
        let pot_interp = TrigInterpolant::from_field(&pot);
        let flux: Vec<TrigInterpolant> = (0..dim)
            .map(|a| {
                let vs = v.component(a).pointwise_mul(&self.smooth).expect("same grid");
                TrigInterpolant::from_field(&convolve_kernel(&vs))
            })
            .collect();
        let cross: f64 = pts
            .iter()
            .zip(&v_at)
            .map(|(&x, vx)| {
                let gp = pot_interp.eval_gradient(x);
                let mut t = 0.0;
                for a in 0..dim {
                    t += vx[a] * gp[a] - flux[a].eval_gradient(x)[a];
                }
                t
            })
            .sum();

        let grad_pot = spectral::gradient(&pot);
        let mut smooth = 0.0;
        for a in 0..dim {
            let prod = v.component(a).pointwise_mul(grad_pot.component(a))?;
            smooth += prod.dot(&self.smooth)?;
        }
        Ok(a * a * pairs + 2.0 * a * cross + 2.0 * smooth)
    }
}

/// Check that `mu` is a probability density up to `1e-8` in mean.
pub fn check_probability_mean(mu: &ScalarField) -> Result<()> {
    let mean = mu.mean();
    if (mean - 1.0).abs() > 1e-8 || !mean.is_finite() {
        return Err(Error::MeanNotOne { mean });
    }
    Ok(())
}

/// Renormalized energy
/// `F_N = (1/N²) Σ_{i≠j} V(x_i - x_j) - (2/N) Σ_i (V∗mu)(x_i) + ∫ (V∗mu) mu`.
pub fn f_n(config: &PointConfiguration, mu: &ScalarField) -> Result<f64> {
    check_probability_mean(mu)?;
    if mu.grid().dim() != config.dim() {
        return Err(Error::GridMismatch);
    }
    SignedMeasure::empirical_minus(config.clone(), mu)?.energy()
}

/// `(1 + log N · 1_{d=2}) / N^{2/d}`.
pub fn error_scale(dim: usize, n: usize) -> f64 {
    let nf = n as f64;
    let log_term = if dim == 2 { nf.ln() } else { 0.0 };
    (1.0 + log_term) / nf.powf(2.0 / dim as f64)
}

/// Uniform grid helper for measures on the same grid as `config`.
pub fn uniform_density(grid: GridSpec) -> ScalarField {
    ScalarField::constant(grid, 1.0)
}
