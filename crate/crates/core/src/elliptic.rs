//! Direct solvers for `(sigma - tau L) x = rhs` with `L` an axisymmetric
//! [`CylOperator`]: FFT in the periodic `z` direction and one real
//! tridiagonal system per axial mode.
//!
//! The same machinery serves the stream-function (Biot-Savart) solve and
//! every backward-Euler diffusion step.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, Parity, ScalarField};
use crate::operators::{curl_from_swirl, CylOperator};

/// Solve `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` in place (Thomas).
///
/// Stable for diagonally dominant systems. `a[0]` and `c[n-1]` are ignored.
pub fn solve_tridiagonal<T>(a: &[f64], b: &[f64], c: &[f64], d: &mut [T])
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut den = b[0];
    cp[0] = c[0] / den;
    d[0] = d[0] * (1.0 / den);
    for i in 1..n {
        den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        d[i] = (d[i] - d[i - 1] * a[i]) * (1.0 / den);
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - d[i + 1] * cp[i];
    }
}

// Pre-factored Thomas coefficients for one axial mode.
#[derive(Debug, Clone)]
struct ModeFactor {
    lower: Vec<f64>,
    cprime: Vec<f64>,
    inv_den: Vec<f64>,
}

impl ModeFactor {
    fn new(a: &[f64], b: &[f64], c: &[f64]) -> Result<Self> {
        let n = b.len();
        let mut cprime = vec![0.0; n];
        let mut inv_den = vec![0.0; n];
        let mut den = b[0];
        for i in 0..n {
            if i > 0 {
                den = b[i] - a[i] * cprime[i - 1];
            }
            if den == 0.0 || !den.is_finite() {
                return Err(Error::domain("singular radial system"));
            }
            inv_den[i] = 1.0 / den;
            cprime[i] = c[i] / den;
        }
        Ok(Self {
            lower: a.to_vec(),
            cprime,
            inv_den,
        })
    }

    fn solve(&self, d: &mut [Complex64]) {
        let n = d.len();
        d[0] *= self.inv_den[0];
        for i in 1..n {
            d[i] = (d[i] - d[i - 1] * self.lower[i]) * self.inv_den[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= d[i + 1] * self.cprime[i];
        }
    }
}

/// Factorized `(sigma I - tau L)` for a fixed grid, operator and parity.
pub struct SpectralSolver {
    grid: Grid,
    parity: Parity,
    op: CylOperator,
    sigma: f64,
    tau: f64,
    modes: Vec<ModeFactor>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSolver")
            .field("grid", &self.grid)
            .field("parity", &self.parity)
            .field("op", &self.op)
            .field("sigma", &self.sigma)
            .field("tau", &self.tau)
            .finish()
    }
}

impl SpectralSolver {
    pub fn new(grid: Grid, op: CylOperator, parity: Parity, sigma: f64, tau: f64) -> Result<Self> {
        let (nr, nz) = (grid.nr, grid.nz);
        let mut modes = Vec::with_capacity(nz);
        let (mut a, mut b, mut c) = (vec![0.0; nr], vec![0.0; nr], vec![0.0; nr]);
        for m in 0..nz {
            // eigenvalue of the periodic second difference
            let lam = (2.0 - 2.0 * (2.0 * PI * m as f64 / nz as f64).cos()) / (grid.dz * grid.dz);
            for i in 0..nr {
                let (lo, di, up) = op.radial_stencil(grid.r(i as isize), grid.dr);
                a[i] = -tau * lo;
                b[i] = sigma - tau * (di - lam);
                c[i] = -tau * up;
            }
            // axis ghost x_{-1} = sign x_0, wall ghost x_nr = -x_{nr-1}
            b[0] += a[0] * parity.sign();
            a[0] = 0.0;
            b[nr - 1] -= c[nr - 1];
            c[nr - 1] = 0.0;
            modes.push(ModeFactor::new(&a, &b, &c)?);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            grid,
            parity,
            op,
            sigma,
            tau,
            modes,
            forward: planner.plan_fft_forward(nz),
            inverse: planner.plan_fft_inverse(nz),
        })
    }

    /// Backward-Euler factor `I - dt L`.
    pub fn implicit_step(grid: Grid, op: CylOperator, parity: Parity, dt: f64) -> Result<Self> {
        Self::new(grid, op, parity, 1.0, dt)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        if rhs.grid != self.grid {
            return Err(Error::contract("right-hand side lives on a different grid"));
        }
        if rhs.parity != self.parity {
            return Err(Error::contract(format!(
                "solver expects a {} field, got {}",
                self.parity.as_str(),
                rhs.parity.as_str()
            )));
        }
        if !rhs.is_finite() {
            return Err(Error::domain("non-finite right-hand side"));
        }
        let (nr, nz) = (self.grid.nr, self.grid.nz);
        let mut spec: Vec<Complex64> = rhs.values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        for row in spec.chunks_exact_mut(nz) {
            self.forward.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); nr];
        for (m, factor) in self.modes.iter().enumerate() {
            for i in 0..nr {
                column[i] = spec[i * nz + m];
            }
            factor.solve(&mut column);
            for i in 0..nr {
                spec[i * nz + m] = column[i];
            }
        }
        let scale = 1.0 / nz as f64;
        for row in spec.chunks_exact_mut(nz) {
            self.inverse.process(row);
        }
        let values = Array2::from_shape_vec((nr, nz), spec.iter().map(|c| c.re * scale).collect())
            .expect("shape matches grid");
        Ok(ScalarField {
            grid: self.grid,
            values,
            parity: self.parity,
        })
    }
}

/// Stream-function solver for `(Delta - 1/r^2) phi = -omega^theta`.
#[derive(Debug)]
pub struct PoissonSolver {
    inner: SpectralSolver,
}

impl PoissonSolver {
    pub fn new(grid: Grid) -> Result<Self> {
        Ok(Self {
            inner: SpectralSolver::new(grid, CylOperator::SWIRL, Parity::Odd, 0.0, 1.0)?,
        })
    }

    pub fn grid(&self) -> Grid {
        self.inner.grid
    }

    /// `phi` with `(Delta - 1/r^2) phi = -omega_theta`, odd in `r`, zero at
    /// `Rmax`, periodic in `z`.
    pub fn solve_stream(&self, omega_theta: &ScalarField) -> Result<ScalarField> {
        self.inner.solve(omega_theta)
    }

    /// `(u_r, u_z) = (-d_z phi, d_r phi + phi/r)`.
    pub fn biot_savart(&self, omega_theta: &ScalarField) -> Result<(ScalarField, ScalarField)> {
        let phi = self.solve_stream(omega_theta)?;
        Ok(curl_from_swirl(&phi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_norm;
    use crate::operators::{ddr, ddz, div_weighted_residual};

    fn rel_l2(a: &ScalarField, b: &ScalarField) -> f64 {
        let mut d = a.clone();
        d.values -= &b.values;
        lp_norm(&d, 2.0, 0.0) / lp_norm(b, 2.0, 0.0)
    }

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 4.0, 8.0).unwrap()
    }

    #[test]
    fn thomas_matches_dense_solution() {
        let a = [0.0, 1.0, -0.5, 0.25];
        let b = [4.0, 5.0, 4.5, 3.0];
        let c = [1.0, 0.5, 1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut d: Vec<f64> = (0..4)
            .map(|i| {
                b[i] * x[i]
                    + if i > 0 { a[i] * x[i - 1] } else { 0.0 }
                    + if i < 3 { c[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        solve_tridiagonal(&a, &b, &c, &mut d);
        for (u, v) in d.iter().zip(x.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_vorticity_gives_zero_stream() {
        let g = grid(16);
        let s = PoissonSolver::new(g).unwrap();
        let phi = s.solve_stream(&ScalarField::zeros(g, Parity::Odd)).unwrap();
        assert_eq!(phi.max_abs(), 0.0);
        let (ur, uz) = s.biot_savart(&ScalarField::zeros(g, Parity::Odd)).unwrap();
        assert_eq!(ur.max_abs() + uz.max_abs(), 0.0);
    }

    #[test]
    fn solver_inverts_discrete_operator_exactly() {
        let g = Grid::new(24, 16, 3.0, 5.0).unwrap();
        let x = ScalarField::from_fn(g, Parity::Even, |r, z| (-(r * r)).exp() * (1.0 + (1.3 * z).sin()));
        let op = CylOperator::reform(2.0 * (1.0 - 0.2));
        let dt = 0.01;
        let mut rhs = op.apply(&x).scaled(-dt);
        rhs.values += &x.values;
        let back = SpectralSolver::implicit_step(g, op, Parity::Even, dt).unwrap().solve(&rhs).unwrap();
        let mut d = back.clone();
        d.values -= &x.values;
        assert!(d.max_abs() < 1e-12 * x.max_abs());
    }

    #[test]
    fn parity_and_grid_are_checked() {
        let g = grid(16);
        let s = PoissonSolver::new(g).unwrap();
        assert!(matches!(s.solve_stream(&ScalarField::zeros(g, Parity::Even)), Err(Error::Contract(_))));
        let mut bad = ScalarField::zeros(g, Parity::Odd);
        bad.values[[0, 0]] = f64::NAN;
        assert!(matches!(s.solve_stream(&bad), Err(Error::Domain(_))));
    }

    fn manufactured(n: usize) -> (f64, f64, f64, f64, f64) {
        let k = 2.0 * PI / 8.0;
        let phi = |r: f64, z: f64| r * (-r * r).exp() * (k * z).sin();
        // -(Delta - 1/r^2) phi
        let omega = |r: f64, z: f64| -((4.0 * r.powi(3) - 8.0 * r) - k * k * r) * (-r * r).exp() * (k * z).sin();
        let ur = |r: f64, z: f64| -k * r * (-r * r).exp() * (k * z).cos();
        let uz = |r: f64, z: f64| (2.0 - 2.0 * r * r) * (-r * r).exp() * (k * z).sin();
        let g = grid(n);
        let s = PoissonSolver::new(g).unwrap();
        let w = ScalarField::from_fn(g, Parity::Odd, omega);
        let phi_num = s.solve_stream(&w).unwrap();
        let (ur_n, uz_n) = s.biot_savart(&w).unwrap();
        let mut curl = ddz(&ur_n);
        curl.values -= &ddr(&uz_n).values;
        (
            rel_l2(&phi_num, &ScalarField::from_fn(g, Parity::Odd, phi)),
            rel_l2(&ur_n, &ScalarField::from_fn(g, Parity::Odd, ur)),
            rel_l2(&uz_n, &ScalarField::from_fn(g, Parity::Even, uz)),
            rel_l2(&curl.with_parity(Parity::Odd), &w),
            div_weighted_residual(&ur_n, &uz_n),
        )
    }

    #[test]
    fn biot_savart_second_order_on_manufactured_stream() {
        let a = manufactured(32);
        let b = manufactured(64);
        for (name, e1, e2) in [
            ("phi", a.0, b.0),
            ("u_r", a.1, b.1),
            ("u_z", a.2, b.2),
            ("roundtrip", a.3, b.3),
            ("divergence", a.4, b.4),
        ] {
            let ratio = e1 / e2;
            assert!((3.4..=4.6).contains(&ratio), "{name}: ratio {ratio} ({e1} -> {e2})");
        }
    }
}
