//! Monitored functionals: `M(t)`, dissipation integrals, vorticity and
//! current monitors, and the energy-balance residual of `B`.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Zip;

use crate::error::{Error, Result};
use crate::evolve::{AxiState, ReformState};
use crate::exponents::{lambda_interp, s_of_p};
use crate::grid::{grad_power_norm, grad_power_norm_sq, lp_norm, lp_norm_pow, Parity, ScalarField};
use crate::operators::{curl_from_swirl, div_weighted_residual, poloidal_gradient};

/// `||eta||_p^p + ||V||_{7/4}^{7/4} + ||B||_s^s` with `s = 6p/(3+p)`.
pub fn m_of_state(state: &ReformState, p: f64) -> f64 {
    lp_norm_pow(&state.eta, p) + lp_norm_pow(&state.v, 1.75) + lp_norm_pow(&state.b, s_of_p(p))
}

fn magnitude(parts: &[&ScalarField]) -> ScalarField {
    let mut out = ScalarField::zeros(parts[0].grid, Parity::Even);
    for f in parts {
        Zip::from(&mut out.values).and(&f.values).for_each(|o, v| *o += v * v);
    }
    out.values.mapv_inplace(f64::sqrt);
    out
}

/// `(||omega||_{L^{3/2}}, ||J||_{L^{3/2}})` with
/// `omega = (-d_z u^theta, omega^theta, d_r u^theta + u^theta/r)` and
/// `J = (-d_z b^theta, 0, d_r b^theta + b^theta/r)`.
pub fn omega_j_monitors(state: &AxiState) -> (f64, f64) {
    let (wr, wz) = curl_from_swirl(&state.u_theta);
    let omega = magnitude(&[&wr, &state.omega_theta, &wz]);
    let (jr, jz) = curl_from_swirl(&state.b_theta);
    let j = magnitude(&[&jr, &jz]);
    (lp_norm(&omega, 1.5, 0.0), lp_norm(&j, 1.5, 0.0))
}

/// `|| |V|^{7/8} / r ||_{L^2}`.
pub fn v_hardy_norm(v: &ScalarField) -> f64 {
    let g = v.grid;
    let mut total = 0.0;
    for (i, row) in v.values.outer_iter().enumerate() {
        let r = g.r(i as isize);
        total += row.iter().map(|x| x.abs().powf(1.75)).sum::<f64>() / (r * r) * g.cell_volume(i);
    }
    total.sqrt()
}

/// Axis flux `2 pi int |B|^k |_{r=0} dz` of the `L^k` balance, with
/// `|B|^k` extrapolated quadratically in `r` from the first two cells.
pub fn axis_term(b: &ScalarField, k: f64) -> f64 {
    let g = b.grid;
    let sum: f64 = (0..g.nz)
        .map(|j| {
            let f0 = b.values[[0, j]].abs().powf(k);
            let f1 = b.values[[1, j]].abs().powf(k);
            ((9.0 * f0 - f1) / 8.0).max(0.0)
        })
        .sum();
    2.0 * PI * sum * g.dz
}

/// One sample of the `L^k` balance of `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceSample {
    pub time: f64,
    /// `||B||_{L^k}^k`.
    pub norm_pow: f64,
    /// `||grad |B|^{k/2}||_{L^2}^2`.
    pub grad_sq: f64,
    /// [`axis_term`].
    pub axis: f64,
}

pub fn balance_sample(b: &ScalarField, k: f64, time: f64) -> BalanceSample {
    BalanceSample {
        time,
        norm_pow: lp_norm_pow(b, k),
        grad_sq: grad_power_norm_sq(b, 0.5 * k),
        axis: axis_term(b, k),
    }
}

/// Max over interior samples of
/// `|dE/dt + 2 axis + (4(k-1)/k) ||grad |B|^{k/2}||^2|`, with `E = ||B||_k^k`
/// differentiated by centered differences, divided by the initial `E`.
pub fn balance_residual_b(trajectory: &[BalanceSample], k: f64) -> Result<f64> {
    if trajectory.len() < 3 {
        return Err(Error::domain(format!(
            "balance residual needs at least 3 samples, got {}",
            trajectory.len()
        )));
    }
    let dt0 = trajectory[1].time - trajectory[0].time;
    if !(dt0 > 0.0) {
        return Err(Error::domain("sample times must increase"));
    }
    for w in trajectory.windows(2) {
        if ((w[1].time - w[0].time) - dt0).abs() > 1e-9 * dt0.max(w[1].time.abs()) {
            return Err(Error::domain("balance residual needs uniformly spaced samples"));
        }
    }
    let e0 = trajectory[0].norm_pow;
    let mut worst = 0.0f64;
    for w in trajectory.windows(3) {
        let dedt = (w[2].norm_pow - w[0].norm_pow) / (w[2].time - w[0].time);
        let s = &w[1];
        worst = worst.max((dedt + 2.0 * s.axis + 4.0 * (k - 1.0) / k * s.grad_sq).abs());
    }
    if e0 == 0.0 {
        return Ok(if worst == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(worst / e0)
}

/// Optional Besov columns: `||u||_{B^{-1}_{inf,1}}` and `||u||_{B^1_{inf,1}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovPair {
    pub minus_one: f64,
    pub plus_one: f64,
}

/// One time sample of every monitored functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub time: f64,
    pub ru_linf: f64,
    pub ru_l2: f64,
    pub ru_l4: f64,
    pub b_l3_2: f64,
    pub b_ls: f64,
    pub b_l3p_2: f64,
    pub eta_lp: f64,
    pub v_l7_4: f64,
    pub m: f64,
    /// `||grad |eta|^{p/2}||_{L^2}`.
    pub grad_eta: f64,
    /// `||grad |V|^{7/8}||_{L^2}`.
    pub grad_v: f64,
    /// `|| |V|^{7/8} / r ||_{L^2}`.
    pub v_over_r: f64,
    /// `||grad |B|^{s/2}||_{L^2}`.
    pub grad_b: f64,
    pub b_theta_l3: f64,
    pub omega_l3_2: f64,
    pub j_l3_2: f64,
    pub div_residual: f64,
    pub structure_residual: f64,
    /// [`axis_term`] with `k = s`.
    pub b_axis_s: f64,
    pub besov: Option<BesovPair>,
}

/// CSV column names, in output order (Besov columns only when present).
pub const COLUMNS: [&str; 20] = [
    "time",
    "ru_linf",
    "ru_l2",
    "ru_l4",
    "B_l3_2",
    "B_ls",
    "B_l3p_2",
    "eta_lp",
    "V_l7_4",
    "M",
    "grad_eta_p2",
    "grad_V_7_8",
    "V_7_8_over_r",
    "grad_B_s2",
    "b_theta_l3",
    "omega_l3_2",
    "J_l3_2",
    "div_residual",
    "structure_residual",
    "B_axis_s",
];

pub const BESOV_COLUMNS: [&str; 2] = ["u_besov_m1_inf_1", "u_besov_p1_inf_1"];

impl DiagnosticsRow {
    /// Evaluate every functional. `axi` and `reform` must describe the same
    /// state; `structure_residual` is supplied by the caller.
    pub fn evaluate(axi: &AxiState, reform: &ReformState, p: f64, structure_residual: f64) -> Self {
        let s = s_of_p(p);
        let (omega, j) = omega_j_monitors(axi);
        Self {
            time: axi.time,
            ru_linf: lp_norm(&axi.u_theta, f64::INFINITY, 1.0),
            ru_l2: lp_norm(&axi.u_theta, 2.0, 1.0),
            ru_l4: lp_norm(&axi.u_theta, 4.0, 1.0),
            b_l3_2: lp_norm(&reform.b, 1.5, 0.0),
            b_ls: lp_norm(&reform.b, s, 0.0),
            b_l3p_2: lp_norm(&reform.b, 1.5 * p, 0.0),
            eta_lp: lp_norm(&reform.eta, p, 0.0),
            v_l7_4: lp_norm(&reform.v, 1.75, 0.0),
            m: m_of_state(reform, p),
            grad_eta: grad_power_norm(&reform.eta, 0.5 * p),
            grad_v: grad_power_norm(&reform.v, 0.875),
            v_over_r: v_hardy_norm(&reform.v),
            grad_b: grad_power_norm(&reform.b, 0.5 * s),
            b_theta_l3: lp_norm(&axi.b_theta, 3.0, 0.0),
            omega_l3_2: omega,
            j_l3_2: j,
            div_residual: div_weighted_residual(&axi.u_r, &axi.u_z),
            structure_residual,
            b_axis_s: axis_term(&reform.b, s),
            besov: None,
        }
    }

    pub fn from_axi(axi: &AxiState, p: f64, epsilon: f64, structure_residual: f64) -> Self {
        Self::evaluate(axi, &ReformState::from_axi(axi, epsilon), p, structure_residual)
    }

    pub fn from_reform(reform: &ReformState, p: f64, structure_residual: f64) -> Self {
        Self::evaluate(&reform.to_axi(), reform, p, structure_residual)
    }

    /// Values in [`COLUMNS`] order, followed by the Besov pair if present.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.time,
            self.ru_linf,
            self.ru_l2,
            self.ru_l4,
            self.b_l3_2,
            self.b_ls,
            self.b_l3p_2,
            self.eta_lp,
            self.v_l7_4,
            self.m,
            self.grad_eta,
            self.grad_v,
            self.v_over_r,
            self.grad_b,
            self.b_theta_l3,
            self.omega_l3_2,
            self.j_l3_2,
            self.div_residual,
            self.structure_residual,
            self.b_axis_s,
        ];
        if let Some(b) = self.besov {
            v.push(b.minus_one);
            v.push(b.plus_one);
        }
        v
    }

    pub fn is_valid(&self) -> bool {
        self.values().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Format a double with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a diagnostics table as CSV. Besov columns are emitted when the
/// first row carries them.
pub fn write_diagnostics_csv<W: Write>(out: W, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let besov = rows.first().is_some_and(|r| r.besov.is_some());
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if besov {
        header.extend(BESOV_COLUMNS);
    }
    w.write_record(&header)?;
    for row in rows {
        if row.besov.is_some() != besov {
            return Err(Error::contract("rows disagree on the presence of Besov columns"));
        }
        w.write_record(row.values().iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// `M(t_end) + int_0^t_end [(p-1) ||grad |eta|^{p/2}||^2 + ||grad |V|^{7/8}||^2
/// + || |V|^{7/8}/r ||^2] dt` by the trapezoid rule over the samples.
pub fn dissipation_ledger(trajectory: &[DiagnosticsRow], p: f64) -> f64 {
    let Some(last) = trajectory.last() else {
        return 0.0;
    };
    let rate = |r: &DiagnosticsRow| (p - 1.0) * r.grad_eta.powi(2) + r.grad_v.powi(2) + r.v_over_r.powi(2);
    let integral: f64 = trajectory
        .windows(2)
        .map(|w| 0.5 * (w[1].time - w[0].time) * (rate(&w[0]) + rate(&w[1])))
        .sum();
    last.m + integral
}

/// `||grad u~||_{L^m} / (m^2/(m-1) ||omega^theta||_{L^m})` for the poloidal
/// velocity `u~ = u^r e_r + u^z e_z`.
pub fn biot_savart_ratio(u_r: &ScalarField, u_z: &ScalarField, omega_theta: &ScalarField, m: f64) -> f64 {
    let parts = poloidal_gradient(u_r, u_z);
    let grad = magnitude(&parts.iter().collect::<Vec<_>>());
    lp_norm(&grad, m, 0.0) / (m * m / (m - 1.0) * lp_norm(omega_theta, m, 0.0))
}

/// `||u^r / r||_{L^q} / (||eta||_p^lambda ||eta||_{3p}^(1 - lambda))`.
pub fn ur_over_r_ratio(u_r: &ScalarField, eta: &ScalarField, p: f64, q: f64) -> Result<f64> {
    let lambda = lambda_interp(p, q)?;
    let lhs = lp_norm(u_r, q, -1.0);
    let rhs = lp_norm(eta, p, 0.0).powf(lambda) * lp_norm(eta, 3.0 * p, 0.0).powf(1.0 - lambda);
    Ok(lhs / rhs)
}
