//! Time integration of the reduced axisymmetric systems.
//!
//! Three systems share one IMEX splitting: every `Delta`-type operator is
//! backward Euler through [`SpectralSolver`], advection and zeroth-order
//! terms are explicit. `u^theta` is advanced through `Gamma = r u^theta`,
//! whose equation has no source term, so the limited upwind advection and
//! the M-matrix implicit step together keep `max |r u^theta|` from growing.

use std::collections::HashMap;

use ndarray::Zip;

use crate::elliptic::{PoissonSolver, SpectralSolver};
use crate::error::{Error, Result};
use crate::grid::{Grid, Parity, ScalarField};
use crate::operators::{advect, advection_dt_bound, ddr, ddz, CylOperator};

/// Operator of the `Gamma = r u^theta` equation: `d_rr - (1/r) d_r + d_zz`.
pub const GAMMA_OPERATOR: CylOperator = CylOperator { c: -1.0, d: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward Euler for diffusion, forward Euler for the rest.
    ImexEuler,
    /// Heun's method on the fully explicit right-hand side.
    ExplicitRk2,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ImexEuler => "imex_euler",
            Scheme::ExplicitRk2 => "explicit_rk2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "imex_euler" | "imex" => Some(Scheme::ImexEuler),
            "explicit_rk2" | "rk2" | "heun" => Some(Scheme::ExplicitRk2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Fraction of the stability bound a (sub)step may use.
    pub cfl_safety: f64,
    pub t_end: f64,
    pub sample_every: usize,
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(Error::domain(format!("cfl_safety = {} outside ]0, 1[", self.cfl_safety)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::domain(format!("t_end = {} must be nonnegative", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(Error::domain("sample_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps of size `dt` needed to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

fn check_finite(f: &ScalarField, name: &str, time: f64) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::BlowUp {
            field: name.to_string(),
            time,
        })
    }
}

// a + c * b
fn axpy(a: &ScalarField, c: f64, b: &ScalarField) -> ScalarField {
    let mut out = a.clone();
    out.values.scaled_add(c, &b.values);
    out
}

fn average(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let mut out = a.clone();
    Zip::from(&mut out.values).and(&b.values).for_each(|x, y| *x = 0.5 * (*x + y));
    out
}

fn product_over_r(a: &ScalarField, b: &ScalarField, parity: Parity) -> ScalarField {
    let g = a.grid;
    let mut out = a.clone();
    out.parity = parity;
    Zip::indexed(&mut out.values).and(&b.values).for_each(|(i, _), x, y| {
        *x = *x * y / g.r(i as isize);
    });
    out
}

fn max_abs_over_r(f: &ScalarField) -> f64 {
    let g = f.grid;
    f.values
        .indexed_iter()
        .fold(0.0f64, |m, ((i, _), v)| m.max((v / g.r(i as isize)).abs()))
}

// Stable forward-Euler step for explicit diffusion of `op` on this grid.
fn explicit_diffusion_bound(g: &Grid, op: CylOperator) -> f64 {
    let r0 = g.r(0);
    let rate = 2.0 / (g.dr * g.dr) + 2.0 / (g.dz * g.dz) + op.c.abs() / (r0 * g.dr) + op.d.abs() / (r0 * r0);
    1.0 / rate
}

/// Primitive state `(u^theta, b^theta, omega^theta)` with the diagnosed
/// poloidal velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiState {
    pub time: f64,
    pub u_theta: ScalarField,
    pub b_theta: ScalarField,
    pub omega_theta: ScalarField,
    pub u_r: ScalarField,
    pub u_z: ScalarField,
}

impl AxiState {
    /// Assemble a state and diagnose `(u_r, u_z)` from `omega_theta`.
    pub fn new(
        time: f64,
        u_theta: ScalarField,
        b_theta: ScalarField,
        omega_theta: ScalarField,
        poisson: &PoissonSolver,
    ) -> Result<Self> {
        for (name, f) in [("u_theta", &u_theta), ("b_theta", &b_theta), ("omega_theta", &omega_theta)] {
            if f.parity != Parity::Odd {
                return Err(Error::contract(format!("{name} must be ODD")));
            }
            if f.grid != poisson.grid() {
                return Err(Error::contract(format!("{name} lives on a different grid")));
            }
        }
        let (u_r, u_z) = poisson.biot_savart(&omega_theta)?;
        Ok(Self {
            time,
            u_theta,
            b_theta,
            omega_theta,
            u_r,
            u_z,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        let z = ScalarField::zeros(grid, Parity::Odd);
        Self {
            time: 0.0,
            u_theta: z.clone(),
            b_theta: z.clone(),
            omega_theta: z.clone(),
            u_r: z.clone(),
            u_z: ScalarField::zeros(grid, Parity::Even),
        }
    }

    pub fn grid(&self) -> Grid {
        self.u_theta.grid
    }

    /// `Gamma = r u^theta` (even).
    pub fn gamma(&self) -> ScalarField {
        self.u_theta.times_r_pow(1.0, Parity::Even)
    }

    /// Largest stable step for `scheme` (without safety factor).
    pub fn stability_bound(&self, scheme: Scheme) -> f64 {
        let adv = advection_dt_bound(&self.u_r, &self.u_z);
        let hoop = max_abs_over_r(&self.u_r);
        let mut rate = 1.0 / adv + hoop;
        if scheme == Scheme::ExplicitRk2 {
            let g = self.grid();
            rate += 1.0 / explicit_diffusion_bound(&g, CylOperator::SWIRL).min(explicit_diffusion_bound(&g, GAMMA_OPERATOR));
        }
        if rate == 0.0 {
            f64::INFINITY
        } else {
            1.0 / rate
        }
    }
}

/// Reformulated state `(B, eta, V)` with `B = b^theta / r`,
/// `eta = omega^theta / r`, `V = u^theta / r^(1 - eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReformState {
    pub time: f64,
    pub b: ScalarField,
    pub eta: ScalarField,
    pub v: ScalarField,
    pub epsilon: f64,
    pub u_r: ScalarField,
    pub u_z: ScalarField,
}

impl ReformState {
    pub fn new(
        time: f64,
        b: ScalarField,
        eta: ScalarField,
        v: ScalarField,
        epsilon: f64,
        poisson: &PoissonSolver,
    ) -> Result<Self> {
        for (name, f) in [("B", &b), ("eta", &eta), ("V", &v)] {
            if f.parity != Parity::Even {
                return Err(Error::contract(format!("{name} must be EVEN")));
            }
            if f.grid != poisson.grid() {
                return Err(Error::contract(format!("{name} lives on a different grid")));
            }
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon = {epsilon} outside ]0, 1[")));
        }
        let omega = eta.times_r_pow(1.0, Parity::Odd);
        let (u_r, u_z) = poisson.biot_savart(&omega)?;
        Ok(Self {
            time,
            b,
            eta,
            v,
            epsilon,
            u_r,
            u_z,
        })
    }

    pub fn grid(&self) -> Grid {
        self.b.grid
    }

    /// Change of variables from a primitive state; the velocity is copied.
    pub fn from_axi(state: &AxiState, epsilon: f64) -> Self {
        Self {
            time: state.time,
            b: state.b_theta.times_r_pow(-1.0, Parity::Even),
            eta: state.omega_theta.times_r_pow(-1.0, Parity::Even),
            v: state.u_theta.times_r_pow(epsilon - 1.0, Parity::Even),
            epsilon,
            u_r: state.u_r.clone(),
            u_z: state.u_z.clone(),
        }
    }

    /// Inverse change of variables; the velocity is copied.
    pub fn to_axi(&self) -> AxiState {
        AxiState {
            time: self.time,
            u_theta: self.v.times_r_pow(1.0 - self.epsilon, Parity::Odd),
            b_theta: self.b.times_r_pow(1.0, Parity::Odd),
            omega_theta: self.eta.times_r_pow(1.0, Parity::Odd),
            u_r: self.u_r.clone(),
            u_z: self.u_z.clone(),
        }
    }

    /// Coefficient `2 eps - eps^2` of the `V / r^2` damping.
    pub fn v_damping(&self) -> f64 {
        2.0 * self.epsilon - self.epsilon * self.epsilon
    }

    pub fn stability_bound(&self, scheme: Scheme) -> f64 {
        let g = self.grid();
        let r0 = g.r(0);
        let adv = advection_dt_bound(&self.u_r, &self.u_z);
        let mut rate = 1.0 / adv;
        // the hoop and damping terms act on V alone
        if self.v.max_abs() > 0.0 {
            rate += (2.0 - self.epsilon) * max_abs_over_r(&self.u_r) + self.v_damping() / (r0 * r0);
        }
        if scheme == Scheme::ExplicitRk2 {
            rate += 1.0 / explicit_diffusion_bound(&g, CylOperator::reform(2.0));
        }
        if rate == 0.0 {
            f64::INFINITY
        } else {
            1.0 / rate
        }
    }
}

/// Three-component magnetic field `(b^r, b^theta, b^z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullBState {
    pub time: f64,
    pub b_r: ScalarField,
    pub b_theta: ScalarField,
    pub b_z: ScalarField,
}

impl FullBState {
    pub fn new(time: f64, b_r: ScalarField, b_theta: ScalarField, b_z: ScalarField) -> Result<Self> {
        if b_r.parity != Parity::Odd || b_theta.parity != Parity::Odd || b_z.parity != Parity::Even {
            return Err(Error::contract("full-b parities must be (ODD, ODD, EVEN)"));
        }
        if !(b_r.same_grid(&b_theta) && b_r.same_grid(&b_z)) {
            return Err(Error::contract("full-b components live on different grids"));
        }
        Ok(Self {
            time,
            b_r,
            b_theta,
            b_z,
        })
    }

    pub fn from_swirl(time: f64, b_theta: ScalarField) -> Result<Self> {
        let g = b_theta.grid;
        Self::new(time, ScalarField::zeros(g, Parity::Odd), b_theta, ScalarField::zeros(g, Parity::Even))
    }

    pub fn grid(&self) -> Grid {
        self.b_theta.grid
    }

    /// `max(|b^r|, |b^z|)`.
    pub fn poloidal_max(&self) -> f64 {
        self.b_r.max_abs().max(self.b_z.max_abs())
    }
}

/// Velocity triple `(u^r, u^theta, u^z)` driving the full-b system.
#[derive(Debug, Clone, Copy)]
pub struct Velocity<'a> {
    pub u_r: &'a ScalarField,
    pub u_theta: &'a ScalarField,
    pub u_z: &'a ScalarField,
}

impl<'a> Velocity<'a> {
    pub fn of(state: &'a AxiState) -> Self {
        Self {
            u_r: &state.u_r,
            u_theta: &state.u_theta,
            u_z: &state.u_z,
        }
    }

    fn stability_bound(&self, scheme: Scheme) -> f64 {
        let g = self.u_r.grid;
        let adv = advection_dt_bound(self.u_r, self.u_z);
        let [a, b, c, d] = [ddr(self.u_r), ddz(self.u_r), ddr(self.u_z), ddz(self.u_z)];
        let stretch = [a.max_abs(), b.max_abs(), c.max_abs(), d.max_abs()].iter().sum::<f64>()
            + max_abs_over_r(self.u_r)
            + max_abs_over_r(self.u_theta);
        let mut rate = 1.0 / adv + stretch;
        if scheme == Scheme::ExplicitRk2 {
            rate += 1.0 / explicit_diffusion_bound(&g, CylOperator::SWIRL);
        }
        if rate == 0.0 {
            f64::INFINITY
        } else {
            1.0 / rate
        }
    }
}

// Number of equal substeps so that each stays within the bound.
fn substeps(dt: f64, bound: f64, safety: f64, time: f64) -> Result<usize> {
    if bound.is_nan() {
        return Err(Error::BlowUp {
            field: "velocity".to_string(),
            time,
        });
    }
    if !(bound > 0.0) {
        return Err(Error::domain("stability bound is not positive"));
    }
    let n = (dt / (safety * bound)).ceil();
    if n > 1e6 {
        return Err(Error::domain(format!(
            "dt = {dt:e} would need {n:e} substeps to satisfy the stability bound {bound:e}"
        )));
    }
    Ok(n.max(1.0) as usize)
}

struct PrimitiveSolvers {
    gamma: SpectralSolver,
    swirl: SpectralSolver,
}

struct ReformSolvers {
    b: SpectralSolver,
    v: SpectralSolver,
}

struct FullBSolvers {
    swirl: SpectralSolver,
    axial: SpectralSolver,
}

/// Cached factorizations for one grid and one formulation.
///
/// A step whose `dt` exceeds `cfl_safety` times the current stability
/// bound is split into equal substeps; factorizations are cached per
/// substep size.
pub struct Stepper {
    grid: Grid,
    cfg: StepperConfig,
    poisson: PoissonSolver,
    epsilon: Option<f64>,
    primitive: HashMap<usize, PrimitiveSolvers>,
    reform: HashMap<usize, ReformSolvers>,
    full_b: HashMap<usize, FullBSolvers>,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper").field("grid", &self.grid).field("cfg", &self.cfg).finish()
    }
}

impl Stepper {
    pub fn new(grid: Grid, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            grid,
            cfg,
            poisson: PoissonSolver::new(grid)?,
            epsilon: None,
            primitive: HashMap::new(),
            reform: HashMap::new(),
            full_b: HashMap::new(),
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    fn check_grid(&self, g: Grid) -> Result<()> {
        if g == self.grid {
            Ok(())
        } else {
            Err(Error::contract("state lives on a different grid than the stepper"))
        }
    }

    fn primitive_solvers(&mut self, n: usize) -> Result<&PrimitiveSolvers> {
        if !self.primitive.contains_key(&n) {
            let tau = self.cfg.dt / n as f64;
            let s = PrimitiveSolvers {
                gamma: SpectralSolver::implicit_step(self.grid, GAMMA_OPERATOR, Parity::Even, tau)?,
                swirl: SpectralSolver::implicit_step(self.grid, CylOperator::SWIRL, Parity::Odd, tau)?,
            };
            self.primitive.insert(n, s);
        }
        Ok(&self.primitive[&n])
    }

    fn reform_solvers(&mut self, n: usize, epsilon: f64) -> Result<&ReformSolvers> {
        if self.epsilon != Some(epsilon) {
            self.reform.clear();
            self.epsilon = Some(epsilon);
        }
        if !self.reform.contains_key(&n) {
            let tau = self.cfg.dt / n as f64;
            let s = ReformSolvers {
                b: SpectralSolver::implicit_step(self.grid, CylOperator::reform(2.0), Parity::Even, tau)?,
                v: SpectralSolver::implicit_step(
                    self.grid,
                    CylOperator::reform(2.0 * (1.0 - epsilon)),
                    Parity::Even,
                    tau,
                )?,
            };
            self.reform.insert(n, s);
        }
        Ok(&self.reform[&n])
    }

    fn full_b_solvers(&mut self, n: usize) -> Result<&FullBSolvers> {
        if !self.full_b.contains_key(&n) {
            let tau = self.cfg.dt / n as f64;
            let s = FullBSolvers {
                swirl: SpectralSolver::implicit_step(self.grid, CylOperator::SWIRL, Parity::Odd, tau)?,
                axial: SpectralSolver::implicit_step(self.grid, CylOperator::LAPLACE, Parity::Even, tau)?,
            };
            self.full_b.insert(n, s);
        }
        Ok(&self.full_b[&n])
    }

    /// Advance the primitive system by `cfg.dt`.
    pub fn step_primitive(&mut self, state: &AxiState) -> Result<AxiState> {
        self.check_grid(state.grid())?;
        let mut cur = state.clone();
        let mut k = 0;
        let t0 = state.time;
        let mut n = substeps(self.cfg.dt, state.stability_bound(self.cfg.scheme), self.cfg.cfl_safety, state.time)?;
        while k < n {
            let tau = self.cfg.dt / n as f64;
            let next = match self.cfg.scheme {
                Scheme::ImexEuler => {
                    self.primitive_solvers(n)?;
                    primitive_imex(&cur, tau, &self.primitive[&n], &self.poisson)?
                }
                Scheme::ExplicitRk2 => primitive_heun(&cur, tau, &self.poisson)?,
            };
            k += 1;
            cur = next;
            cur.time = t0 + self.cfg.dt * k as f64 / n as f64;
            if k < n {
                // refine further if the flow sped up
                let m = substeps(self.cfg.dt, cur.stability_bound(self.cfg.scheme), self.cfg.cfl_safety, cur.time)?;
                if m > n {
                    let done = k as f64 / n as f64;
                    k = (done * m as f64).round() as usize;
                    n = m;
                }
            }
        }
        cur.time = t0 + self.cfg.dt;
        Ok(cur)
    }

    /// Advance the reformulated system by `cfg.dt`.
    pub fn step_reform(&mut self, state: &ReformState) -> Result<ReformState> {
        self.check_grid(state.grid())?;
        let mut cur = state.clone();
        let t0 = state.time;
        let mut k = 0;
        let mut n = substeps(self.cfg.dt, state.stability_bound(self.cfg.scheme), self.cfg.cfl_safety, state.time)?;
        while k < n {
            let tau = self.cfg.dt / n as f64;
            let next = match self.cfg.scheme {
                Scheme::ImexEuler => {
                    self.reform_solvers(n, state.epsilon)?;
                    reform_imex(&cur, tau, &self.reform[&n], &self.poisson)?
                }
                Scheme::ExplicitRk2 => reform_heun(&cur, tau, &self.poisson)?,
            };
            k += 1;
            cur = next;
            cur.time = t0 + self.cfg.dt * k as f64 / n as f64;
            if k < n {
                let m = substeps(self.cfg.dt, cur.stability_bound(self.cfg.scheme), self.cfg.cfl_safety, cur.time)?;
                if m > n {
                    let done = k as f64 / n as f64;
                    k = (done * m as f64).round() as usize;
                    n = m;
                }
            }
        }
        cur.time = t0 + self.cfg.dt;
        Ok(cur)
    }

    /// Advance the full magnetic system by `cfg.dt` in a frozen velocity.
    pub fn step_full_b(&mut self, state: &FullBState, u: Velocity<'_>) -> Result<FullBState> {
        self.check_grid(state.grid())?;
        self.check_grid(u.u_r.grid)?;
        let n = substeps(self.cfg.dt, u.stability_bound(self.cfg.scheme), self.cfg.cfl_safety, state.time)?;
        let tau = self.cfg.dt / n as f64;
        let mut cur = state.clone();
        for k in 1..=n {
            cur = match self.cfg.scheme {
                Scheme::ImexEuler => {
                    let solvers = self.full_b_solvers(n)?;
                    full_b_imex(&cur, u, tau, solvers)?
                }
                Scheme::ExplicitRk2 => full_b_heun(&cur, u, tau)?,
            };
            cur.time = state.time + self.cfg.dt * k as f64 / n as f64;
        }
        cur.time = state.time + self.cfg.dt;
        Ok(cur)
    }
}

/// One primitive step with a freshly built [`Stepper`].
pub fn step_primitive(state: &AxiState, cfg: &StepperConfig) -> Result<AxiState> {
    Stepper::new(state.grid(), *cfg)?.step_primitive(state)
}

/// One reformulated step with a freshly built [`Stepper`].
pub fn step_reform(state: &ReformState, cfg: &StepperConfig) -> Result<ReformState> {
    Stepper::new(state.grid(), *cfg)?.step_reform(state)
}

/// One full-b step with a freshly built [`Stepper`].
pub fn step_full_b(state: &FullBState, u: Velocity<'_>, cfg: &StepperConfig) -> Result<FullBState> {
    Stepper::new(state.grid(), *cfg)?.step_full_b(state, u)
}

// Explicit tendencies (everything except the diffusion operators).

struct PrimitiveTendency {
    gamma: ScalarField,
    b: ScalarField,
    omega: ScalarField,
}

fn primitive_tendency(s: &AxiState, gamma: &ScalarField) -> PrimitiveTendency {
    let (ur, uz) = (&s.u_r, &s.u_z);
    let gamma_t = advect(ur, uz, gamma).scaled(-1.0);

    let mut b_t = advect(ur, uz, &s.b_theta).scaled(-1.0);
    b_t.values += &product_over_r(ur, &s.b_theta, Parity::Odd).values;

    let mut w_t = advect(ur, uz, &s.omega_theta).scaled(-1.0);
    let u_dz = ddz(&s.u_theta);
    let b_dz = ddz(&s.b_theta);
    w_t.values.scaled_add(2.0, &product_over_r(&s.u_theta, &u_dz, Parity::Odd).values);
    w_t.values.scaled_add(-2.0, &product_over_r(&s.b_theta, &b_dz, Parity::Odd).values);
    w_t.values += &product_over_r(ur, &s.omega_theta, Parity::Odd).values;

    PrimitiveTendency {
        gamma: gamma_t,
        b: b_t,
        omega: w_t,
    }
}

fn finish_primitive(
    time: f64,
    gamma: ScalarField,
    b: ScalarField,
    omega: ScalarField,
    poisson: &PoissonSolver,
) -> Result<AxiState> {
    check_finite(&gamma, "u_theta", time)?;
    check_finite(&b, "b_theta", time)?;
    check_finite(&omega, "omega_theta", time)?;
    let u = gamma.times_r_pow(-1.0, Parity::Odd);
    AxiState::new(time, u, b, omega, poisson)
}

fn primitive_imex(s: &AxiState, tau: f64, solvers: &PrimitiveSolvers, poisson: &PoissonSolver) -> Result<AxiState> {
    let t = s.time + tau;
    let gamma = s.gamma();
    let k = primitive_tendency(s, &gamma);
    let g_star = axpy(&gamma, tau, &k.gamma);
    let b_star = axpy(&s.b_theta, tau, &k.b);
    let w_star = axpy(&s.omega_theta, tau, &k.omega);
    check_finite(&g_star, "u_theta", t)?;
    check_finite(&b_star, "b_theta", t)?;
    check_finite(&w_star, "omega_theta", t)?;
    finish_primitive(
        t,
        solvers.gamma.solve(&g_star)?,
        solvers.swirl.solve(&b_star)?,
        solvers.swirl.solve(&w_star)?,
        poisson,
    )
}

fn primitive_full_rhs(s: &AxiState) -> (ScalarField, PrimitiveTendency) {
    let gamma = s.gamma();
    let mut k = primitive_tendency(s, &gamma);
    k.gamma.values += &GAMMA_OPERATOR.apply(&gamma).values;
    k.b.values += &CylOperator::SWIRL.apply(&s.b_theta).values;
    k.omega.values += &CylOperator::SWIRL.apply(&s.omega_theta).values;
    (gamma, k)
}

fn primitive_heun(s: &AxiState, tau: f64, poisson: &PoissonSolver) -> Result<AxiState> {
    let t = s.time + tau;
    let (g0, k0) = primitive_full_rhs(s);
    let s1 = finish_primitive(
        t,
        axpy(&g0, tau, &k0.gamma),
        axpy(&s.b_theta, tau, &k0.b),
        axpy(&s.omega_theta, tau, &k0.omega),
        poisson,
    )?;
    let (g1, k1) = primitive_full_rhs(&s1);
    finish_primitive(
        t,
        average(&g0, &axpy(&g1, tau, &k1.gamma)),
        average(&s.b_theta, &axpy(&s1.b_theta, tau, &k1.b)),
        average(&s.omega_theta, &axpy(&s1.omega_theta, tau, &k1.omega)),
        poisson,
    )
}

struct ReformTendency {
    b: ScalarField,
    eta: ScalarField,
    v: ScalarField,
}

fn reform_tendency(s: &ReformState) -> ReformTendency {
    let (ur, uz) = (&s.u_r, &s.u_z);
    let eps = s.epsilon;
    let b_t = advect(ur, uz, &s.b).scaled(-1.0);

    let mut eta_t = advect(ur, uz, &s.eta).scaled(-1.0);
    let v_dz = ddz(&s.v);
    let b_dz = ddz(&s.b);
    let g = s.grid();
    Zip::indexed(&mut eta_t.values)
        .and(&s.v.values)
        .and(&v_dz.values)
        .and(&s.b.values)
        .and(&b_dz.values)
        .for_each(|(i, _), e, v, vz, b, bz| {
            let r = g.r(i as isize);
            *e += 2.0 * v * vz / r.powf(2.0 * eps) - 2.0 * b * bz;
        });

    let mut v_t = advect(ur, uz, &s.v).scaled(-1.0);
    let damp = s.v_damping();
    Zip::indexed(&mut v_t.values)
        .and(&s.v.values)
        .and(&ur.values)
        .for_each(|(i, _), out, v, u| {
            let r = g.r(i as isize);
            *out -= (2.0 - eps) * u * v / r + damp * v / (r * r);
        });

    ReformTendency {
        b: b_t,
        eta: eta_t,
        v: v_t,
    }
}

fn finish_reform(
    template: &ReformState,
    time: f64,
    b: ScalarField,
    eta: ScalarField,
    v: ScalarField,
    poisson: &PoissonSolver,
) -> Result<ReformState> {
    check_finite(&b, "B", time)?;
    check_finite(&eta, "eta", time)?;
    check_finite(&v, "V", time)?;
    ReformState::new(time, b, eta, v, template.epsilon, poisson)
}

fn reform_imex(s: &ReformState, tau: f64, solvers: &ReformSolvers, poisson: &PoissonSolver) -> Result<ReformState> {
    let t = s.time + tau;
    let k = reform_tendency(s);
    let b_star = axpy(&s.b, tau, &k.b);
    let eta_star = axpy(&s.eta, tau, &k.eta);
    let v_star = axpy(&s.v, tau, &k.v);
    check_finite(&b_star, "B", t)?;
    check_finite(&eta_star, "eta", t)?;
    check_finite(&v_star, "V", t)?;
    finish_reform(
        s,
        t,
        solvers.b.solve(&b_star)?,
        solvers.b.solve(&eta_star)?,
        solvers.v.solve(&v_star)?,
        poisson,
    )
}

fn reform_full_rhs(s: &ReformState) -> ReformTendency {
    let mut k = reform_tendency(s);
    let l2 = CylOperator::reform(2.0);
    k.b.values += &l2.apply(&s.b).values;
    k.eta.values += &l2.apply(&s.eta).values;
    k.v.values += &CylOperator::reform(2.0 * (1.0 - s.epsilon)).apply(&s.v).values;
    k
}

fn reform_heun(s: &ReformState, tau: f64, poisson: &PoissonSolver) -> Result<ReformState> {
    let t = s.time + tau;
    let k0 = reform_full_rhs(s);
    let s1 = finish_reform(
        s,
        t,
        axpy(&s.b, tau, &k0.b),
        axpy(&s.eta, tau, &k0.eta),
        axpy(&s.v, tau, &k0.v),
        poisson,
    )?;
    let k1 = reform_full_rhs(&s1);
    finish_reform(
        s,
        t,
        average(&s.b, &axpy(&s1.b, tau, &k1.b)),
        average(&s.eta, &axpy(&s1.eta, tau, &k1.eta)),
        average(&s.v, &axpy(&s1.v, tau, &k1.v)),
        poisson,
    )
}

struct FullBTendency {
    r: ScalarField,
    theta: ScalarField,
    z: ScalarField,
}

// Induction equation without diffusion: -u.grad b + b.grad u, with the
// cylindrical hoop terms of the azimuthal component.
fn full_b_tendency(s: &FullBState, u: Velocity<'_>) -> FullBTendency {
    let (ur, uz) = (u.u_r, u.u_z);
    let mut r_t = advect(ur, uz, &s.b_r).scaled(-1.0);
    let mut th_t = advect(ur, uz, &s.b_theta).scaled(-1.0);
    let mut z_t = advect(ur, uz, &s.b_z).scaled(-1.0);

    let stretch = |target: &mut ScalarField, comp: &ScalarField| {
        let (d_r, d_z) = (ddr(comp), ddz(comp));
        Zip::from(&mut target.values)
            .and(&s.b_r.values)
            .and(&s.b_z.values)
            .and(&d_r.values)
            .and(&d_z.values)
            .for_each(|t, br, bz, cr, cz| *t += br * cr + bz * cz);
    };
    stretch(&mut r_t, ur);
    stretch(&mut th_t, u.u_theta);
    stretch(&mut z_t, uz);

    th_t.values += &product_over_r(&s.b_theta, ur, Parity::Odd).values;
    th_t.values -= &product_over_r(u.u_theta, &s.b_r, Parity::Odd).values;

    FullBTendency {
        r: r_t,
        theta: th_t,
        z: z_t,
    }
}

fn finish_full_b(time: f64, r: ScalarField, theta: ScalarField, z: ScalarField) -> Result<FullBState> {
    check_finite(&r, "b_r", time)?;
    check_finite(&theta, "b_theta", time)?;
    check_finite(&z, "b_z", time)?;
    FullBState::new(time, r, theta, z)
}

fn full_b_imex(s: &FullBState, u: Velocity<'_>, tau: f64, solvers: &FullBSolvers) -> Result<FullBState> {
    let t = s.time + tau;
    let k = full_b_tendency(s, u);
    let r_star = axpy(&s.b_r, tau, &k.r);
    let th_star = axpy(&s.b_theta, tau, &k.theta);
    let z_star = axpy(&s.b_z, tau, &k.z);
    check_finite(&r_star, "b_r", t)?;
    check_finite(&th_star, "b_theta", t)?;
    check_finite(&z_star, "b_z", t)?;
    finish_full_b(
        t,
        solvers.swirl.solve(&r_star)?,
        solvers.swirl.solve(&th_star)?,
        solvers.axial.solve(&z_star)?,
    )
}

fn full_b_full_rhs(s: &FullBState, u: Velocity<'_>) -> FullBTendency {
    let mut k = full_b_tendency(s, u);
    k.r.values += &CylOperator::SWIRL.apply(&s.b_r).values;
    k.theta.values += &CylOperator::SWIRL.apply(&s.b_theta).values;
    k.z.values += &CylOperator::LAPLACE.apply(&s.b_z).values;
    k
}

fn full_b_heun(s: &FullBState, u: Velocity<'_>, tau: f64) -> Result<FullBState> {
    let t = s.time + tau;
    let k0 = full_b_full_rhs(s, u);
    let s1 = finish_full_b(t, axpy(&s.b_r, tau, &k0.r), axpy(&s.b_theta, tau, &k0.theta), axpy(&s.b_z, tau, &k0.z))?;
    let k1 = full_b_full_rhs(&s1, u);
    finish_full_b(
        t,
        average(&s.b_r, &axpy(&s1.b_r, tau, &k1.r)),
        average(&s.b_theta, &axpy(&s1.b_theta, tau, &k1.theta)),
        average(&s.b_z, &axpy(&s1.b_z, tau, &k1.z)),
    )
}

/// Compact bump geometry: `chi(r, z) = psi(r / radius) psi((z - z_center) / half_height)`
/// with `psi(x) = exp(1 - 1/(1 - x^2))` on `|x| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub radius: f64,
    pub z_center: f64,
    pub half_height: f64,
}

fn psi(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

impl Bump {
    /// Support `[0, Rmax/2] x [Lz/4, 3Lz/4]`.
    pub fn standard(grid: &Grid) -> Self {
        Self {
            radius: 0.5 * grid.rmax,
            z_center: 0.5 * grid.lz,
            half_height: 0.25 * grid.lz,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let ok = self.radius > 0.0
            && self.half_height > 0.0
            && self.radius < grid.rmax
            && self.z_center - self.half_height >= 0.0
            && self.z_center + self.half_height <= grid.lz;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "bump support r <= {}, z in [{}, {}] exceeds the domain [0, {}] x [0, {}]",
                self.radius,
                self.z_center - self.half_height,
                self.z_center + self.half_height,
                grid.rmax,
                grid.lz
            )))
        }
    }

    pub fn eval(&self, r: f64, z: f64) -> f64 {
        psi(r / self.radius) * psi((z - self.z_center) / self.half_height)
    }

    /// `amplitude * r * chi` as an odd field.
    pub fn swirl_field(&self, grid: Grid, amplitude: f64) -> ScalarField {
        ScalarField::from_fn(grid, Parity::Odd, |r, z| amplitude * r * self.eval(r, z))
    }

    /// `amplitude * r^power * chi` as an even field.
    pub fn even_field(&self, grid: Grid, amplitude: f64, power: f64) -> ScalarField {
        ScalarField::from_fn(grid, Parity::Even, |r, z| amplitude * r.powf(power) * self.eval(r, z))
    }
}

/// Amplitudes of the bump initial data `(u^theta, b^theta, omega^theta) = A r chi`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Amplitudes {
    pub a_u: f64,
    pub a_b: f64,
    pub a_omega: f64,
}

/// Primitive bump data.
pub fn bump_axi_state(grid: Grid, bump: &Bump, amp: Amplitudes, poisson: &PoissonSolver) -> Result<AxiState> {
    bump.validate(&grid)?;
    AxiState::new(
        0.0,
        bump.swirl_field(grid, amp.a_u),
        bump.swirl_field(grid, amp.a_b),
        bump.swirl_field(grid, amp.a_omega),
        poisson,
    )
}

/// The same data in reformulated variables, sampled analytically:
/// `B = A_b chi`, `eta = A_omega chi`, `V = A_u r^eps chi`.
pub fn bump_reform_state(
    grid: Grid,
    bump: &Bump,
    amp: Amplitudes,
    epsilon: f64,
    poisson: &PoissonSolver,
) -> Result<ReformState> {
    bump.validate(&grid)?;
    ReformState::new(
        0.0,
        bump.even_field(grid, amp.a_b, 0.0),
        bump.even_field(grid, amp.a_omega, 0.0),
        bump.even_field(grid, amp.a_u, epsilon),
        epsilon,
        poisson,
    )
}
