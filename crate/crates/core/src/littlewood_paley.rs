//! Littlewood-Paley analysis on a periodic cube `[-L/2, L/2)^3`.
//!
//! Axisymmetric fields are sampled onto the cube by [`embed_axisymmetric`];
//! every multiplier (dyadic blocks, Leray projector, heat semigroup) acts
//! on the 3D FFT. Frequencies are measured as `tau = |n|`, the wave number
//! in units of `2 pi / L`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{fill_ghosts, ScalarField};

/// Scalar or 3-vector field sampled at `x_i = -L/2 + i L/N` on each axis.
///
/// Values are stored with the last axis fastest: `(i * N + j) * N + k`.
#[derive(Debug, Clone)]
pub struct CartesianField3D {
    n: usize,
    l: f64,
    comps: Vec<Vec<f64>>,
    spectrum: OnceLock<Vec<Vec<Complex64>>>,
}

impl PartialEq for CartesianField3D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.l == other.l && self.comps == other.comps
    }
}

fn check_size(n: usize, l: f64) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::domain(format!("N = {n} must be a power of two >= 8")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::domain(format!("box side L = {l} must be positive")));
    }
    Ok(())
}

impl CartesianField3D {
    pub fn new(n: usize, l: f64, comps: Vec<Vec<f64>>) -> Result<Self> {
        check_size(n, l)?;
        if comps.len() != 1 && comps.len() != 3 {
            return Err(Error::contract("a field has 1 or 3 components"));
        }
        if comps.iter().any(|c| c.len() != n * n * n) {
            return Err(Error::contract("component length must be N^3"));
        }
        Ok(Self {
            n,
            l,
            comps,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(n: usize, l: f64, ncomp: usize) -> Result<Self> {
        Self::new(n, l, vec![vec![0.0; n * n * n]; ncomp])
    }

    /// Sample `f(x, y, z)` at the grid points; `f` returns one value per component.
    pub fn from_fn(n: usize, l: f64, ncomp: usize, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Result<Self> {
        check_size(n, l)?;
        let mut comps = vec![vec![0.0; n * n * n]; ncomp];
        let h = l / n as f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = f(-0.5 * l + i as f64 * h, -0.5 * l + j as f64 * h, -0.5 * l + k as f64 * h);
                    let idx = (i * n + j) * n + k;
                    for (c, comp) in comps.iter_mut().enumerate() {
                        comp[idx] = v[c];
                    }
                }
            }
        }
        Self::new(n, l, comps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.l
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn cell_volume(&self) -> f64 {
        (self.l / self.n as f64).powi(3)
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.l == other.l && self.ncomp() == other.ncomp()
    }

    /// Spectrum of every component (computed once).
    pub fn spectrum(&self) -> &[Vec<Complex64>] {
        self.spectrum.get_or_init(|| {
            self.comps
                .iter()
                .map(|c| {
                    let mut data: Vec<Complex64> = c.iter().map(|v| Complex64::new(*v, 0.0)).collect();
                    fft3(&mut data, self.n, false);
                    data
                })
                .collect()
        })
    }

    fn with_spectrum(&self, spec: Vec<Vec<Complex64>>) -> Self {
        let n = self.n;
        let scale = 1.0 / (n * n * n) as f64;
        let comps = spec
            .into_iter()
            .map(|mut s| {
                fft3(&mut s, n, true);
                s.iter().map(|c| c.re * scale).collect()
            })
            .collect();
        Self {
            n,
            l: self.l,
            comps,
            spectrum: OnceLock::new(),
        }
    }

    /// Multiply every component's spectrum by `m(tau)`.
    pub fn radial_multiplier(&self, m: impl Fn(f64) -> f64) -> Self {
        let n = self.n;
        let weights: Vec<f64> = (0..n * n * n).map(|idx| m(tau_norm(wave(idx, n)))).collect();
        let spec = self
            .spectrum()
            .iter()
            .map(|s| s.iter().zip(weights.iter()).map(|(c, w)| c * *w).collect())
            .collect();
        self.with_spectrum(spec)
    }

    /// Pointwise magnitude (Euclidean over components).
    pub fn magnitude_at(&self, idx: usize) -> f64 {
        self.comps.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    /// `L^p` norm of the pointwise magnitude; `p = inf` gives the maximum.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let len = self.n * self.n * self.n;
        if p.is_infinite() {
            return (0..len).fold(0.0, |m, i| m.max(self.magnitude_at(i)));
        }
        let s: f64 = (0..len).map(|i| self.magnitude_at(i).powf(p)).sum();
        (s * self.cell_volume()).powf(1.0 / p)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, c: f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::domain("fields differ in size, box or component count"));
        }
        let comps = self
            .comps
            .iter()
            .zip(other.comps.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x + c * y).collect())
            .collect();
        Self::new(self.n, self.l, comps)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            l: self.l,
            comps: self.comps.iter().map(|v| v.iter().map(|x| x * c).collect()).collect(),
            spectrum: OnceLock::new(),
        }
    }
}

fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    for line in data.chunks_exact_mut(n) {
        fft.process(line);
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for stride in [n, n * n] {
        for base in 0..n * n {
            // start index of the line along the axis with this stride
            let start = if stride == n {
                (base / n) * n * n + base % n
            } else {
                base
            };
            for t in 0..n {
                buf[t] = data[start + t * stride];
            }
            fft.process(&mut buf);
            for t in 0..n {
                data[start + t * stride] = buf[t];
            }
        }
    }
}

fn signed(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Integer wave vector of the flattened spectral index.
fn wave(idx: usize, n: usize) -> [i64; 3] {
    [signed(idx / (n * n), n), signed((idx / n) % n, n), signed(idx % n, n)]
}

fn tau_norm(k: [i64; 3]) -> f64 {
    ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt()
}

fn smooth_g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Low-pass profile: 1 on `[0, 3/4]`, 0 on `[4/3, inf)`, smooth in between.
pub fn chi(tau: f64) -> f64 {
    let a = smooth_g(tau - 0.75);
    let b = smooth_g(4.0 / 3.0 - tau);
    if a == 0.0 {
        1.0
    } else if b == 0.0 {
        0.0
    } else {
        b / (a + b)
    }
}

/// Annulus profile `phi(tau) = chi(tau/2) - chi(tau)`, supported in
/// `[3/4, 8/3]` and identically 1 on `[4/3, 3/2]`.
pub fn phi(tau: f64) -> f64 {
    chi(0.5 * tau) - chi(tau)
}

/// Resolvable band of dyadic blocks for an `N^3` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicPartition {
    pub j_min: i32,
    pub j_max: i32,
}

impl DyadicPartition {
    /// `[j_min, j_max] = [-2, log2(N/8)]`.
    pub fn for_size(n: usize) -> Result<Self> {
        check_size(n, 1.0)?;
        Ok(Self {
            j_min: -2,
            j_max: (n / 8).trailing_zeros() as i32,
        })
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }

    /// `phi(2^{-j} tau)`.
    pub fn block_weight(j: i32, tau: f64) -> f64 {
        phi(tau * 2f64.powi(-j))
    }

    /// Low-pass below the band: `chi(2^{-j_min} tau)`.
    pub fn low_weight(&self, tau: f64) -> f64 {
        chi(tau * 2f64.powi(-self.j_min))
    }

    /// Everything above the band: `1 - chi(2^{-j_max-1} tau)`.
    pub fn high_weight(&self, tau: f64) -> f64 {
        1.0 - chi(tau * 2f64.powi(-self.j_max - 1))
    }

    /// Largest `tau` reproduced exactly by low-pass plus blocks.
    pub fn resolved_tau(&self) -> f64 {
        0.75 * 2f64.powi(self.j_max + 1)
    }
}

fn partition_of(u: &CartesianField3D) -> DyadicPartition {
    DyadicPartition::for_size(u.n).expect("validated at construction")
}

/// `Delta_j u`: the spectrum multiplied by `phi(2^{-j} |n|)`.
pub fn dyadic_block(u: &CartesianField3D, j: i32) -> Result<CartesianField3D> {
    let part = partition_of(u);
    if !part.contains(j) {
        return Err(Error::domain(format!(
            "block j = {j} outside the resolvable band [{}, {}]",
            part.j_min, part.j_max
        )));
    }
    Ok(u.radial_multiplier(|tau| DyadicPartition::block_weight(j, tau)))
}

/// Low-frequency remainder below the band.
pub fn low_pass(u: &CartesianField3D) -> CartesianField3D {
    let part = partition_of(u);
    u.radial_multiplier(|tau| part.low_weight(tau))
}

/// High-frequency remainder above the band.
pub fn high_remainder(u: &CartesianField3D) -> CartesianField3D {
    let part = partition_of(u);
    u.radial_multiplier(|tau| part.high_weight(tau))
}

/// `|| (2^{js} ||Delta_j u||_{L^p})_j ||_{l^r}` over the resolvable band.
pub fn besov_norm(u: &CartesianField3D, s: f64, p: f64, r_sum: f64) -> Result<f64> {
    if !(p >= 1.0 && r_sum >= 1.0) {
        return Err(Error::domain(format!("Besov indices p = {p}, r = {r_sum} must be >= 1")));
    }
    let part = partition_of(u);
    let terms: Vec<f64> = (part.j_min..=part.j_max)
        .map(|j| 2f64.powf(j as f64 * s) * dyadic_block(u, j).expect("in band").lp_norm(p))
        .collect();
    Ok(if r_sum.is_infinite() {
        terms.iter().fold(0.0, |m, t| m.max(*t))
    } else {
        terms.iter().map(|t| t.powf(r_sum)).sum::<f64>().powf(1.0 / r_sum)
    })
}

fn require_vector(u: &CartesianField3D) -> Result<()> {
    if u.ncomp() == 3 {
        Ok(())
    } else {
        Err(Error::contract("operation needs a 3-component vector field"))
    }
}

/// Leray projector `Id - xi xi^T / |xi|^2`, leaving `xi = 0` untouched.
pub fn leray_project(u: &CartesianField3D) -> Result<CartesianField3D> {
    require_vector(u)?;
    let n = u.n;
    let spec = u.spectrum();
    let mut out = spec.to_vec();
    for idx in 0..n * n * n {
        let k = wave(idx, n);
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        if k2 == 0.0 {
            continue;
        }
        let dot = (0..3).fold(Complex64::new(0.0, 0.0), |acc, a| acc + spec[a][idx] * k[a] as f64);
        for a in 0..3 {
            out[a][idx] = spec[a][idx] - dot * (k[a] as f64 / k2);
        }
    }
    Ok(u.with_spectrum(out))
}

/// Max over modes of `|n . u^(n)| / N^3`: the amplitude of the largest
/// Fourier mode of the divergence, in units of `2 pi / L`.
pub fn spectral_divergence(u: &CartesianField3D) -> Result<f64> {
    require_vector(u)?;
    let n = u.n;
    let spec = u.spectrum();
    let worst = (0..n * n * n).fold(0.0f64, |m, idx| {
        let k = wave(idx, n);
        let dot = (0..3).fold(Complex64::new(0.0, 0.0), |acc, a| acc + spec[a][idx] * k[a] as f64);
        m.max(dot.norm())
    });
    Ok(worst / (n * n * n) as f64)
}

fn xi_sq(tau: f64, l: f64) -> f64 {
    (2.0 * PI * tau / l).powi(2)
}

/// `e^{t Delta} u`: the spectrum multiplied by `exp(-t |xi|^2)`.
pub fn heat_semigroup(u: &CartesianField3D, t: f64) -> Result<CartesianField3D> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("heat time t = {t} must be nonnegative")));
    }
    let l = u.l;
    Ok(u.radial_multiplier(|tau| (-t * xi_sq(tau, l)).exp()))
}

/// Least-squares fit of `||e^{t Delta} u||_inf / ||u||_inf ~ C exp(-c t lambda^2)`
/// with `lambda = 2^j (2 pi / L)`, over the given times.
pub fn heat_decay_fit(u: &CartesianField3D, j: i32, times: &[f64]) -> Result<(f64, f64)> {
    if times.len() < 2 {
        return Err(Error::domain("heat decay fit needs at least two times"));
    }
    let base = u.lp_norm(f64::INFINITY);
    if base == 0.0 {
        return Err(Error::domain("heat decay fit of a zero field"));
    }
    let lambda2 = (2f64.powi(j) * 2.0 * PI / u.l).powi(2);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| Ok((t * lambda2, (heat_semigroup(u, t)?.lp_norm(f64::INFINITY) / base).ln())))
        .collect::<Result<_>>()?;
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((-slope, (my - slope * mx).exp()))
}

/// Ratios of both Bernstein inequalities for a block-localized field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinReport {
    /// `||D^N u||_{L^q} / (lambda^{N + 3(1/p - 1/q)} ||u||_{L^p})`.
    pub upper: f64,
    /// `lambda^N ||u||_{L^p} / ||D^N u||_{L^p}`.
    pub lower: f64,
}

/// Bernstein ratios with `D = |xi|` and `lambda = 2^j (2 pi / L)`.
///
/// Fails with a contract error unless the spectrum lies in the annulus
/// `3/4 <= 2^{-j} tau <= 8/3`.
pub fn bernstein_check(u: &CartesianField3D, j: i32, p: f64, q: f64, n_deriv: u32) -> Result<BernsteinReport> {
    if !(p >= 1.0 && q >= p) {
        return Err(Error::domain(format!("need 1 <= p <= q, got p = {p}, q = {q}")));
    }
    let n = u.n;
    let spec = u.spectrum();
    let (mut inside, mut outside) = (0.0, 0.0);
    for idx in 0..n * n * n {
        let x = tau_norm(wave(idx, n)) * 2f64.powi(-j);
        let e: f64 = spec.iter().map(|s| s[idx].norm_sqr()).sum();
        if (0.75..=8.0 / 3.0).contains(&x) {
            inside += e;
        } else {
            outside += e;
        }
    }
    if inside == 0.0 || outside > 1e-24 * inside {
        return Err(Error::contract(format!("field is not spectrally localized in block {j}")));
    }
    let l = u.l;
    let lambda = 2f64.powi(j) * 2.0 * PI / l;
    let du = u.radial_multiplier(|tau| xi_sq(tau, l).sqrt().powi(n_deriv as i32));
    let dual = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let upper = du.lp_norm(q) / (lambda.powf(n_deriv as f64 + 3.0 * (dual(p) - dual(q))) * u.lp_norm(p));
    let lower = lambda.powi(n_deriv as i32) * u.lp_norm(p) / du.lp_norm(p);
    Ok(BernsteinReport { upper, lower })
}

/// `||Delta_j u(t) - [e^{t Delta} Delta_j u0 - int_0^t e^{(t-s) Delta} P Delta_j F(s) ds]||_{L^inf}`
/// with the integral evaluated by the trapezoid rule over the uniformly
/// spaced samples `forcing[k] = F(k t / (len - 1))`.
pub fn duhamel_residual(
    u0: &CartesianField3D,
    forcing: &[CartesianField3D],
    u_t: &CartesianField3D,
    t: f64,
    j: i32,
) -> Result<f64> {
    require_vector(u0)?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("Duhamel time t = {t} must be positive")));
    }
    if forcing.len() < 2 {
        return Err(Error::domain("forcing needs at least two time samples"));
    }
    if !u0.same_shape(u_t) || forcing.iter().any(|f| !u0.same_shape(f)) {
        return Err(Error::domain("forcing samples and states must share N, L and components"));
    }
    let lhs = dyadic_block(u_t, j)?;
    let free = heat_semigroup(&dyadic_block(u0, j)?, t)?;
    let h = t / (forcing.len() - 1) as f64;
    let mut integral = CartesianField3D::zeros(u0.n, u0.l, 3)?;
    for (k, f) in forcing.iter().enumerate() {
        let w = if k == 0 || k + 1 == forcing.len() { 0.5 * h } else { h };
        let s = k as f64 * h;
        let term = heat_semigroup(&leray_project(&dyadic_block(f, j)?)?, t - s)?;
        integral = integral.add(&term.scaled(w))?;
    }
    let rhs = free.sub(&integral)?;
    Ok(lhs.sub(&rhs)?.lp_norm(f64::INFINITY))
}

// Bilinear interpolation of a cell-centered field at (r, z), using the
// parity ghost at the axis, the wall ghost at Rmax and periodicity in z.
fn interpolate(gf: &crate::grid::GhostedField, r: f64, z: f64) -> f64 {
    let g = gf.grid;
    if r >= g.rmax {
        return 0.0;
    }
    let a = r / g.dr - 0.5;
    let b = z.rem_euclid(g.lz) / g.dz - 0.5;
    let (i0, j0) = (a.floor(), b.floor());
    let (wa, wb) = (a - i0, b - j0);
    let (i0, j0) = (i0 as isize, j0 as isize);
    let j1 = j0 + 1;
    let (j0, j1) = (j0.rem_euclid(g.nz as isize), j1.rem_euclid(g.nz as isize));
    (1.0 - wa) * ((1.0 - wb) * gf.get(i0, j0) + wb * gf.get(i0, j1))
        + wa * ((1.0 - wb) * gf.get(i0 + 1, j0) + wb * gf.get(i0 + 1, j1))
}

fn check_embedding(fields: &[&ScalarField], n: usize, l: f64) -> Result<()> {
    check_size(n, l)?;
    let g = fields[0].grid;
    if fields.iter().any(|f| f.grid != g) {
        return Err(Error::contract("components live on different grids"));
    }
    if l < 2.0 * g.rmax.max(g.lz) {
        return Err(Error::domain(format!(
            "box side L = {l} must be at least 2 max(Rmax, Lz) = {}",
            2.0 * g.rmax.max(g.lz)
        )));
    }
    for f in fields {
        let peak = f.max_abs();
        let edge = (0..g.nz)
            .map(|j| f.values[[g.nr - 1, j]].abs())
            .chain((0..g.nr).flat_map(|i| [f.values[[i, 0]].abs(), f.values[[i, g.nz - 1]].abs()]))
            .fold(0.0, f64::max);
        if edge > 1e-12 * peak {
            return Err(Error::domain("field support reaches the edge of the cylinder (support overflow)"));
        }
    }
    Ok(())
}

/// Sample `(f^r, f^theta, f^z)` as the Cartesian vector
/// `(f^r cos - f^theta sin, f^r sin + f^theta cos, f^z)` on an `N^3` cube of
/// side `L`. The cylinder's axial midpoint sits at the cube center.
pub fn embed_axisymmetric(
    f_r: &ScalarField,
    f_theta: &ScalarField,
    f_z: &ScalarField,
    n: usize,
    l: f64,
) -> Result<CartesianField3D> {
    check_embedding(&[f_r, f_theta, f_z], n, l)?;
    let (gr, gt, gz) = (fill_ghosts(f_r), fill_ghosts(f_theta), fill_ghosts(f_z));
    let g = f_r.grid;
    CartesianField3D::from_fn(n, l, 3, |x, y, z| {
        let zc = z + 0.5 * g.lz;
        if !(0.0..g.lz).contains(&zc) {
            return [0.0; 3];
        }
        let r = x.hypot(y);
        let vz = interpolate(&gz, r, zc);
        if r == 0.0 {
            return [0.0, 0.0, vz];
        }
        let (c, s) = (x / r, y / r);
        let (fr, ft) = (interpolate(&gr, r, zc), interpolate(&gt, r, zc));
        [fr * c - ft * s, fr * s + ft * c, vz]
    })
}

/// Scalar counterpart of [`embed_axisymmetric`].
pub fn embed_scalar(f: &ScalarField, n: usize, l: f64) -> Result<CartesianField3D> {
    check_embedding(&[f], n, l)?;
    let gf = fill_ghosts(f);
    let g = f.grid;
    CartesianField3D::from_fn(n, l, 1, |x, y, z| {
        let zc = z + 0.5 * g.lz;
        if !(0.0..g.lz).contains(&zc) {
            return [0.0; 3];
        }
        [interpolate(&gf, x.hypot(y), zc), 0.0, 0.0]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::Bump;
    use crate::grid::{Grid, Parity};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const L: f64 = 2.0 * PI;

    fn tone(n: usize, k: [i64; 3], dir: [f64; 3]) -> CartesianField3D {
        CartesianField3D::from_fn(n, L, 3, |x, y, z| {
            let ph = (k[0] as f64 * x + k[1] as f64 * y + k[2] as f64 * z).cos();
            [dir[0] * ph, dir[1] * ph, dir[2] * ph]
        })
        .unwrap()
    }

    fn scalar_tone(n: usize, k: [i64; 3]) -> CartesianField3D {
        CartesianField3D::from_fn(n, L, 1, |x, y, z| {
            [(k[0] as f64 * x + k[1] as f64 * y + k[2] as f64 * z).cos(), 0.0, 0.0]
        })
        .unwrap()
    }

    #[test]
    fn profile_supports_and_partition() {
        assert_eq!(phi(0.74), 0.0);
        assert_eq!(phi(2.7), 0.0);
        assert_eq!(phi(2f64.sqrt()), 1.0);
        assert_eq!(chi(0.7), 1.0);
        assert_eq!(chi(1.4), 0.0);
        for i in 1..10_000 {
            let tau = 0.01 + 40.0 * i as f64 / 10_000.0;
            let lp: f64 = chi(tau) + (0..8).map(|j| phi(tau * 2f64.powi(-j))).sum::<f64>();
            assert!((lp - 1.0).abs() <= 1e-12);
            let full: f64 = (-10..10).map(|j| phi(tau * 2f64.powi(-j))).sum();
            assert!((full - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn band_limits() {
        let p = DyadicPartition::for_size(32).unwrap();
        assert_eq!((p.j_min, p.j_max), (-2, 2));
        assert!(DyadicPartition::for_size(12).is_err());
        let u = scalar_tone(16, [1, 0, 0]);
        assert!(matches!(dyadic_block(&u, 3), Err(Error::Domain(_))));
        assert!(dyadic_block(&u, 1).is_ok());
    }

    #[test]
    fn single_tone_blocks_and_besov() {
        for j in 0..2 {
            let k = 1i64 << j;
            let u = tone(16, [k, k, 0], [0.0, 0.0, 1.0]);
            let b = dyadic_block(&u, j).unwrap();
            assert!(b.max_abs_diff(&u) < 1e-12);
            for s in [-1.0, 0.5, 1.0] {
                let got = besov_norm(&u, s, f64::INFINITY, 1.0).unwrap();
                assert!((got - 2f64.powf(j as f64 * s)).abs() < 1e-10, "{got}");
            }
        }
        let u = tone(32, [1, 1, 0], [0.0, 0.0, 1.0]);
        assert!(dyadic_block(&u, 2).unwrap().lp_norm(f64::INFINITY) < 1e-14);
        assert_eq!(besov_norm(&CartesianField3D::zeros(16, L, 3).unwrap(), 1.0, 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_tones_add() {
        let a = tone(32, [1, 1, 0], [0.0, 0.0, 1.0]);
        let b = tone(32, [4, 4, 0], [0.0, 0.0, 0.5]);
        let both = besov_norm(&a.add(&b).unwrap(), 1.0, f64::INFINITY, 1.0).unwrap();
        let sep = besov_norm(&a, 1.0, f64::INFINITY, 1.0).unwrap() + besov_norm(&b, 1.0, f64::INFINITY, 1.0).unwrap();
        assert!((both - sep).abs() < 1e-10);
        assert!((both - (1.0 + 0.5 * 4.0)).abs() < 1e-10);
    }

    #[test]
    fn leray_annihilates_gradients_and_keeps_solenoidal() {
        // grad of sin(x + 2y) = (1, 2, 0) cos(x + 2y)
        let grad = tone(16, [1, 2, 0], [1.0, 2.0, 0.0]);
        assert!(leray_project(&grad).unwrap().lp_norm(f64::INFINITY) < 1e-12);
        let sol = tone(16, [1, 2, 0], [2.0, -1.0, 3.0]);
        assert!(leray_project(&sol).unwrap().max_abs_diff(&sol) < 1e-12);
        assert!(matches!(leray_project(&scalar_tone(16, [1, 0, 0])), Err(Error::Contract(_))));
    }

    #[test]
    fn heat_semigroup_on_tones() {
        let u = scalar_tone(16, [1, 2, 0]);
        assert!(heat_semigroup(&u, 0.0).unwrap().max_abs_diff(&u) < 1e-13);
        let t = 0.05;
        let got = heat_semigroup(&u, t).unwrap();
        assert!(got.max_abs_diff(&u.scaled((-t * 5.0).exp())) < 1e-13);
        assert!(heat_semigroup(&u, -1.0).is_err());
        let (c, cc) = heat_decay_fit(&u, 1, &[0.0, 0.01, 0.02, 0.04]).unwrap();
        // |n|^2 = 5 against lambda^2 = 4
        assert!((c - 1.25).abs() < 1e-9 && (cc - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bernstein_examples() {
        let u = scalar_tone(16, [2, 0, 0]);
        let r = bernstein_check(&u, 1, 2.0, 2.0, 1).unwrap();
        assert!((r.upper - 1.0).abs() < 1e-12 && (r.lower - 1.0).abs() < 1e-12);
        // unit tone: ||u||_inf = 1, ||u||_2 = (L^3 / 2)^{1/2}
        let r = bernstein_check(&u, 1, 2.0, f64::INFINITY, 0).unwrap();
        let expect = 1.0 / ((2.0f64).powf(1.5) * (L.powi(3) / 2.0).sqrt());
        assert!((r.upper - expect).abs() < 1e-12 * expect);
        assert!(matches!(bernstein_check(&u, 3, 2.0, 2.0, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn duhamel_zero_forcing_and_constant_forcing() {
        let u0 = tone(16, [1, 1, 0], [1.0, -1.0, 0.5]);
        let t = 0.3;
        let zero = vec![CartesianField3D::zeros(16, L, 3).unwrap(); 5];
        let ut = heat_semigroup(&u0, t).unwrap();
        assert!(duhamel_residual(&u0, &zero, &ut, t, 0).unwrap() <= 1e-12);
        // constant divergence-free forcing on the same tone
        let f = tone(16, [1, 1, 0], [1.0, -1.0, 0.0]);
        let kappa = 2.0;
        let exact = ut.sub(&f.scaled((1.0 - (-t * kappa).exp()) / kappa)).unwrap();
        let samples = vec![f.clone(); 201];
        let res = duhamel_residual(&u0, &samples, &exact, t, 0).unwrap();
        assert!(res < 1e-5, "{res}");
        assert!(duhamel_residual(&u0, &samples[..1], &exact, t, 0).is_err());
    }

    #[test]
    fn embedding_examples() {
        let g = Grid::new(32, 32, 2.0, 4.0).unwrap();
        let bump = Bump::standard(&g);
        let zero = ScalarField::zeros(g, Parity::Odd);
        let ez = ScalarField::zeros(g, Parity::Even);
        let e = embed_axisymmetric(&zero, &zero, &ez, 16, 8.0).unwrap();
        assert_eq!(e.lp_norm(f64::INFINITY), 0.0);
        assert!(embed_axisymmetric(&zero, &zero, &ez, 16, 6.0).is_err());
        let fz = bump.even_field(g, 1.0, 0.0);
        let e = embed_axisymmetric(&zero, &zero, &fz, 16, 8.0).unwrap();
        assert_eq!(e.component(0).iter().chain(e.component(1)).fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert!(e.component(2).iter().any(|v| *v > 0.5));
        // f^theta = r chi -> (-y, x, 0) chi
        let ft = bump.swirl_field(g, 1.0);
        let e = embed_axisymmetric(&zero, &ft, &ez, 32, 8.0).unwrap();
        let exact = CartesianField3D::from_fn(32, 8.0, 3, |x, y, z| {
            let c = bump.eval(x.hypot(y), z + 2.0);
            [-y * c, x * c, 0.0]
        })
        .unwrap();
        assert!(e.max_abs_diff(&exact) < 2e-2, "{}", e.max_abs_diff(&exact));
        let wide = ScalarField::from_fn(g, Parity::Even, |_, _| 1.0);
        assert!(matches!(embed_scalar(&wide, 16, 8.0), Err(Error::Domain(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn reconstruction_and_leray_identities(seed in 0u64..1000) {
            // band-limited random field: modes with |n| <= 3N/16
            let n = 16;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modes: Vec<([i64; 3], [f64; 3], f64)> = (0..6)
                .map(|_| {
                    let k = [rng.random_range(-1..=1), rng.random_range(-1..=1), rng.random_range(0..=1)];
                    let a = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
                    (k, a, 6.0 * rng.random::<f64>())
                })
                .collect();
            let u = CartesianField3D::from_fn(n, L, 3, |x, y, z| {
                let mut v = [0.0; 3];
                for (k, a, ph) in &modes {
                    let c = (k[0] as f64 * x + k[1] as f64 * y + k[2] as f64 * z + ph).cos();
                    for d in 0..3 { v[d] += a[d] * c; }
                }
                v
            }).unwrap();
            let part = DyadicPartition::for_size(n).unwrap();
            let mut sum = low_pass(&u);
            for j in part.j_min..=part.j_max {
                sum = sum.add(&dyadic_block(&u, j).unwrap()).unwrap();
            }
            prop_assert!(sum.max_abs_diff(&u) <= 1e-10);
            prop_assert!(sum.add(&high_remainder(&u)).unwrap().max_abs_diff(&u) <= 1e-10);
            let pu = leray_project(&u).unwrap();
            prop_assert!(leray_project(&pu).unwrap().max_abs_diff(&pu) <= 1e-12);
            let dv = spectral_divergence(&pu).unwrap();
            prop_assert!(dv <= 1e-12 * u.lp_norm(f64::INFINITY), "{dv}");
            prop_assert!(pu.lp_norm(2.0) <= u.lp_norm(2.0) * (1.0 + 1e-12));
        }
    }
}
