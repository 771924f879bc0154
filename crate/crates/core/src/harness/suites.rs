//! Verification suites and the plain-text report.
//!
//! Every check belongs to one numbered criterion. Independent cases run on
//! the worker pool and are collected in input order, so a report depends
//! only on the suite and the seed.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::elliptic::PoissonSolver;
use crate::error::{Error, Result};
use crate::evolve::{
    bump_axi_state, bump_reform_state, Amplitudes, Bump, FullBState, Scheme, Stepper, StepperConfig, Velocity,
    GAMMA_OPERATOR,
};
use crate::exponents::{a_frak_of_p, epsilon_of_p, s_of_p};
use crate::functionals::{balance_residual_b, balance_sample, biot_savart_ratio, ur_over_r_ratio};
use crate::grid::{lp_norm, Grid, Parity, ScalarField};
use crate::harness::config::{Formulation, Generator, RunConfig};
use crate::harness::data::{rng_for, vorticity_corpus};
use crate::harness::run::{integrate, thread_pool};
use crate::littlewood_paley::{
    besov_norm, chi, duhamel_residual, dyadic_block, heat_decay_fit, heat_semigroup, high_remainder, leray_project,
    low_pass, phi, spectral_divergence, CartesianField3D, DyadicPartition,
};
use crate::operators::{
    advect, curl_from_swirl, ddr, ddz, div_weighted_residual, laplacian_reform, laplacian_swirl,
};

/// Exponent of the theorem runs.
const P_RUN: f64 = 1.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Exponents,
    Operators,
    Elliptic,
    Conservation,
    Structure,
    Smalldata,
    Lp,
    Duhamel,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 9] = [
        "exponents",
        "operators",
        "elliptic",
        "conservation",
        "structure",
        "smalldata",
        "lp",
        "duhamel",
        "all",
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Exponents => "exponents",
            Suite::Operators => "operators",
            Suite::Elliptic => "elliptic",
            Suite::Conservation => "conservation",
            Suite::Structure => "structure",
            Suite::Smalldata => "smalldata",
            Suite::Lp => "lp",
            Suite::Duhamel => "duhamel",
            Suite::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exponents" => Suite::Exponents,
            "operators" => Suite::Operators,
            "elliptic" => Suite::Elliptic,
            "conservation" => Suite::Conservation,
            "structure" => Suite::Structure,
            "smalldata" => Suite::Smalldata,
            "lp" => Suite::Lp,
            "duhamel" => Suite::Duhamel,
            "all" => Suite::All,
            _ => return None,
        })
    }

    fn parts(self) -> Vec<Part> {
        use Part::*;
        match self {
            Suite::Exponents => vec![Exponents],
            Suite::Operators => vec![OperatorConvergence],
            Suite::Elliptic => vec![BiotSavartConvergence, EmpiricalConstants],
            Suite::Conservation => vec![MaximumPrinciple, BDecay, EnergyBalance],
            Suite::Structure => vec![PureSwirl, Equivalence],
            Suite::Smalldata => vec![SmallData],
            Suite::Lp => vec![LittlewoodPaley],
            Suite::Duhamel => vec![Duhamel],
            Suite::All => vec![
                Exponents,
                OperatorConvergence,
                BiotSavartConvergence,
                MaximumPrinciple,
                BDecay,
                EnergyBalance,
                PureSwirl,
                SmallData,
                Equivalence,
                LittlewoodPaley,
                Duhamel,
                EmpiricalConstants,
            ],
        }
    }
}

/// Title of each numbered criterion.
pub fn criterion_title(c: u8) -> &'static str {
    match c {
        1 => "exponent endpoints",
        2 => "second-order operators",
        3 => "maximum principle for r u^theta",
        4 => "decay of ||B||_{L^k}",
        5 => "first-order energy balance of B",
        6 => "pure-swirl structure",
        7 => "theorem bound on small data",
        8 => "formulation equivalence",
        9 => "Littlewood-Paley identities",
        10 => "Duhamel residual",
        11 => "empirical constants",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(criterion: u8, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        criterion,
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// Criteria covered, ascending.
    pub fn criteria(&self) -> Vec<u8> {
        let mut c: Vec<u8> = self.checks.iter().map(|c| c.criterion).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// `None` when the suite does not cover `criterion`.
    pub fn criterion_passed(&self, criterion: u8) -> Option<bool> {
        let mut it = self.checks.iter().filter(|c| c.criterion == criterion).peekable();
        it.peek()?;
        Some(it.all(|c| c.passed))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "swirlmhd verification report");
        let _ = writeln!(out, "suite: {}", self.suite.as_str());
        let _ = writeln!(out, "seed: {}", self.seed);
        let criteria = self.criteria();
        let mut passed = 0;
        for c in &criteria {
            let ok = self.criterion_passed(*c).unwrap_or(false);
            passed += ok as usize;
            let _ = writeln!(out);
            let _ = writeln!(out, "[C{c}] {}: {}", criterion_title(*c), if ok { "PASS" } else { "FAIL" });
            for ch in self.checks.iter().filter(|x| x.criterion == *c) {
                let mark = if ch.passed { "pass" } else { "FAIL" };
                let _ = writeln!(out, "  {mark}  {}: {}", ch.name, ch.detail);
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "criteria passed: {passed} of {}", criteria.len());
        let _ = writeln!(out, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Exponents,
    OperatorConvergence,
    BiotSavartConvergence,
    MaximumPrinciple,
    BDecay,
    EnergyBalance,
    PureSwirl,
    SmallData,
    Equivalence,
    LittlewoodPaley,
    Duhamel,
    EmpiricalConstants,
}

impl Part {
    fn criterion(self) -> u8 {
        match self {
            Part::Exponents => 1,
            Part::OperatorConvergence | Part::BiotSavartConvergence => 2,
            Part::MaximumPrinciple => 3,
            Part::BDecay => 4,
            Part::EnergyBalance => 5,
            Part::PureSwirl => 6,
            Part::SmallData => 7,
            Part::Equivalence => 8,
            Part::LittlewoodPaley => 9,
            Part::Duhamel => 10,
            Part::EmpiricalConstants => 11,
        }
    }

    fn run(self, seed: u64) -> Vec<Check> {
        let out = match self {
            Part::Exponents => exponent_endpoints(),
            Part::OperatorConvergence => operator_convergence(),
            Part::BiotSavartConvergence => biot_savart_convergence(),
            Part::MaximumPrinciple => maximum_principle(),
            Part::BDecay => b_decay(),
            Part::EnergyBalance => energy_balance(),
            Part::PureSwirl => pure_swirl(),
            Part::SmallData => small_data(seed),
            Part::Equivalence => equivalence(),
            Part::LittlewoodPaley => littlewood_paley(seed),
            Part::Duhamel => duhamel(seed),
            Part::EmpiricalConstants => empirical_constants(seed),
        };
        out.unwrap_or_else(|e| vec![check(self.criterion(), "evaluation", false, format!("error: {e}"))])
    }
}

/// Run a suite. Independent parts run concurrently on the worker pool.
pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let parts = suite.parts();
    let pool = thread_pool()?;
    let results: Vec<Vec<Check>> = pool.install(|| parts.par_iter().map(|p| p.run(seed)).collect());
    let mut checks: Vec<Check> = results.into_iter().flatten().collect();
    checks.sort_by_key(|c| c.criterion);
    Ok(SuiteReport { suite, seed, checks })
}

fn e3(x: f64) -> String {
    format!("{x:.3e}")
}

fn tolerance_check(c: u8, name: &str, got: f64, want: f64, tol: f64) -> Check {
    let err = (got - want).abs();
    check(c, name, err <= tol, format!("|error| = {} (tol {})", e3(err), e3(tol)))
}

fn second_order(c: u8, name: &str, coarse: f64, fine: f64) -> Check {
    let ratio = coarse / fine;
    check(
        c,
        name,
        (3.4..=4.6).contains(&ratio),
        format!("error {} -> {}, ratio {:.3} (want [3.4, 4.6])", e3(coarse), e3(fine), ratio),
    )
}

fn grid(n: usize) -> Result<Grid> {
    Grid::new(n, n, 4.0, 8.0)
}

fn diff(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let mut d = a.clone();
    d.values -= &b.values;
    d
}

fn rel_l2(a: &ScalarField, exact: &ScalarField) -> f64 {
    lp_norm(&diff(a, exact), 2.0, 0.0) / lp_norm(exact, 2.0, 0.0)
}

fn exponent_endpoints() -> Result<Vec<Check>> {
    let pe = 63.0 / 61.0;
    let p1 = 1.0 + 1e-9;
    Ok(vec![
        tolerance_check(1, "epsilon(63/61) = 1/7", epsilon_of_p(pe)?, 1.0 / 7.0, 1e-12),
        tolerance_check(1, "a(63/61) = 168/1525", a_frak_of_p(pe)?, 168.0 / 1525.0, 1e-12),
        tolerance_check(1, "epsilon(1 + 1e-9) -> 2/7", epsilon_of_p(p1)?, 2.0 / 7.0, 1e-8),
        tolerance_check(1, "a(1 + 1e-9) -> 1/12", a_frak_of_p(p1)?, 1.0 / 12.0, 1e-8),
    ])
}

type Field = fn(f64, f64) -> f64;

fn operator_convergence() -> Result<Vec<Check>> {
    let k = 2.0 * PI / 8.0;
    let eps = epsilon_of_p(P_RUN)?;
    let gauss = |r: f64| (-r * r).exp();
    let mut checks = Vec::new();

    let study = |n: usize, apply: &dyn Fn(Grid) -> Result<f64>| apply(grid(n)?);
    let mut add = |name: &str, apply: &dyn Fn(Grid) -> Result<f64>| -> Result<()> {
        checks.push(second_order(2, name, study(32, apply)?, study(64, apply)?));
        Ok(())
    };

    add("swirl Laplacian", &|g| {
        let f = ScalarField::from_fn(g, Parity::Odd, |r, z| r * gauss(r) * (k * z).sin());
        let exact = ScalarField::from_fn(g, Parity::Odd, |r, z| {
            ((4.0 * r.powi(3) - 8.0 * r) - k * k * r) * gauss(r) * (k * z).sin()
        });
        Ok(rel_l2(&laplacian_swirl(&f)?, &exact))
    })?;
    for (label, a) in [("reform Laplacian a = 2", 2.0), ("reform Laplacian a = 2(1 - eps)", 2.0 * (1.0 - eps))] {
        add(label, &|g| {
            let f = ScalarField::from_fn(g, Parity::Even, |r, z| gauss(r) * (k * z).cos());
            let exact = ScalarField::from_fn(g, Parity::Even, |r, z| {
                ((4.0 * r * r - 2.0 - 2.0 * (1.0 + a)) - k * k) * gauss(r) * (k * z).cos()
            });
            Ok(rel_l2(&laplacian_reform(&f, a)?, &exact))
        })?;
    }
    add("Gamma operator", &|g| {
        let f = ScalarField::from_fn(g, Parity::Even, |r, z| r * r * gauss(r) * (k * z).cos());
        let exact = ScalarField::from_fn(g, Parity::Even, |r, z| {
            (4.0 * r.powi(4) - 8.0 * r * r - k * k * r * r) * gauss(r) * (k * z).cos()
        });
        Ok(rel_l2(&GAMMA_OPERATOR.apply(&f), &exact))
    })?;
    add("d/dr", &|g| {
        let f = ScalarField::from_fn(g, Parity::Even, |r, z| gauss(r) * (k * z).cos());
        let exact = ScalarField::from_fn(g, Parity::Odd, |r, z| -2.0 * r * gauss(r) * (k * z).cos());
        Ok(rel_l2(&ddr(&f), &exact))
    })?;
    add("d/dz", &|g| {
        let f = ScalarField::from_fn(g, Parity::Odd, |r, z| r * gauss(r) * (k * z).sin());
        let exact = ScalarField::from_fn(g, Parity::Odd, |r, z| k * r * gauss(r) * (k * z).cos());
        Ok(rel_l2(&ddz(&f), &exact))
    })?;
    let stream: Field = |r, z| r * (-r * r).exp() * (2.0 * PI / 8.0 * z).cos();
    add("curl, radial component", &|g| {
        let (a, _) = curl_from_swirl(&ScalarField::from_fn(g, Parity::Odd, stream));
        let exact = ScalarField::from_fn(g, Parity::Odd, |r, z| k * r * gauss(r) * (k * z).sin());
        Ok(rel_l2(&a, &exact))
    })?;
    add("curl, axial component", &|g| {
        let (_, b) = curl_from_swirl(&ScalarField::from_fn(g, Parity::Odd, stream));
        let exact = ScalarField::from_fn(g, Parity::Even, |r, z| (2.0 - 2.0 * r * r) * gauss(r) * (k * z).cos());
        Ok(rel_l2(&b, &exact))
    })?;
    add("weighted divergence of a curl", &|g| {
        let (a, b) = curl_from_swirl(&ScalarField::from_fn(g, Parity::Odd, stream));
        Ok(div_weighted_residual(&a, &b))
    })?;
    add("limited upwind advection", &|g| {
        let f = |r: f64, z: f64| gauss(r) * (1.5 + (k * z).cos());
        let ur = |r: f64, z: f64| r * (-r * r / 4.0).exp() * (1.0 + 0.5 * (k * z).sin());
        let num = advect(
            &ScalarField::from_fn(g, Parity::Odd, ur),
            &ScalarField::zeros(g, Parity::Even),
            &ScalarField::from_fn(g, Parity::Even, f),
        );
        let exact = ScalarField::from_fn(g, Parity::Even, |r, z| ur(r, z) * (-2.0 * r) * f(r, z));
        Ok(rel_l2(&num, &exact))
    })?;
    Ok(checks)
}

fn biot_savart_convergence() -> Result<Vec<Check>> {
    let k = 2.0 * PI / 8.0;
    let errors = |n: usize| -> Result<[f64; 5]> {
        let g = grid(n)?;
        let e = |r: f64| (-r * r).exp();
        let omega = ScalarField::from_fn(g, Parity::Odd, |r, z| {
            -((4.0 * r.powi(3) - 8.0 * r) - k * k * r) * e(r) * (k * z).sin()
        });
        let s = PoissonSolver::new(g)?;
        let phi = s.solve_stream(&omega)?;
        let (ur, uz) = s.biot_savart(&omega)?;
        let mut curl = ddz(&ur);
        curl.values -= &ddr(&uz).values;
        Ok([
            rel_l2(&phi, &ScalarField::from_fn(g, Parity::Odd, |r, z| r * e(r) * (k * z).sin())),
            rel_l2(&ur, &ScalarField::from_fn(g, Parity::Odd, |r, z| -k * r * e(r) * (k * z).cos())),
            rel_l2(&uz, &ScalarField::from_fn(g, Parity::Even, |r, z| (2.0 - 2.0 * r * r) * e(r) * (k * z).sin())),
            rel_l2(&curl.with_parity(Parity::Odd), &omega),
            div_weighted_residual(&ur, &uz),
        ])
    };
    let (a, b) = (errors(32)?, errors(64)?);
    let names = [
        "stream function",
        "Biot-Savart u_r",
        "Biot-Savart u_z",
        "Biot-Savart roundtrip curl u = omega",
        "Biot-Savart divergence",
    ];
    Ok(names.iter().enumerate().map(|(i, n)| second_order(2, n, a[i], b[i])).collect())
}

fn stepper_cfg(dt: f64, t_end: f64) -> StepperConfig {
    StepperConfig {
        dt,
        scheme: Scheme::ImexEuler,
        cfl_safety: 0.9,
        t_end,
        sample_every: 1,
    }
}

/// Amplitudes of the conservation runs.
const CONSERVATION_AMPLITUDES: Amplitudes = Amplitudes {
    a_u: 2.0,
    a_b: 1.5,
    a_omega: 3.0,
};

fn maximum_principle() -> Result<Vec<Check>> {
    let g = Grid::new(96, 96, 4.0, 8.0)?;
    let cfg = stepper_cfg(0.005, 0.5);
    let mut st = Stepper::new(g, cfg)?;
    let mut s = bump_axi_state(g, &Bump::standard(&g), CONSERVATION_AMPLITUDES, st.poisson())?;
    let m0 = s.gamma().max_abs();
    let (mut prev, mut worst) = (m0, f64::NEG_INFINITY);
    for _ in 0..cfg.n_steps() {
        s = st.step_primitive(&s)?;
        let m = s.gamma().max_abs();
        worst = worst.max(m - prev);
        prev = m;
    }
    let rel = worst / m0;
    Ok(vec![check(
        3,
        "max per-step increase of ||r u^theta||_inf, 96x96 to t = 0.5",
        rel <= 1e-10,
        format!(
            "{} relative to ||r u^theta_0||_inf = {} (tol 1.000e-10); final/initial = {:.6}",
            e3(rel),
            e3(m0),
            prev / m0
        ),
    )])
}

fn b_decay() -> Result<Vec<Check>> {
    let g = Grid::new(96, 96, 4.0, 8.0)?;
    let cfg = stepper_cfg(0.005, 0.5);
    let eps = epsilon_of_p(P_RUN)?;
    let mut st = Stepper::new(g, cfg)?;
    let mut s = bump_reform_state(g, &Bump::standard(&g), CONSERVATION_AMPLITUDES, eps, st.poisson())?;
    let ks = [("3/2", 1.5), ("s", s_of_p(P_RUN)), ("3p/2", 1.5 * P_RUN)];
    let mut prev = ks.map(|(_, k)| lp_norm(&s.b, k, 0.0));
    let initial = prev;
    let mut worst = [f64::NEG_INFINITY; 3];
    for _ in 0..cfg.n_steps() {
        s = st.step_reform(&s)?;
        let now = ks.map(|(_, k)| lp_norm(&s.b, k, 0.0));
        for i in 0..3 {
            worst[i] = worst[i].max((now[i] - prev[i]) / prev[i]);
        }
        prev = now;
    }
    Ok((0..3)
        .map(|i| {
            check(
                4,
                format!("||B||_{{L^k}} non-increasing, k = {}", ks[i].0),
                worst[i] <= 1e-8,
                format!(
                    "max relative per-step change {} (tol 1.000e-8); final/initial = {:.6}",
                    e3(worst[i]),
                    prev[i] / initial[i]
                ),
            )
        })
        .collect())
}

fn energy_balance() -> Result<Vec<Check>> {
    let g = Grid::new(128, 128, 4.0, 8.0)?;
    let k = s_of_p(P_RUN);
    let eps = epsilon_of_p(P_RUN)?;
    let amp = Amplitudes {
        a_u: 0.0,
        a_b: 1e-3,
        a_omega: 0.0,
    };
    let residual = |dt: f64| -> Result<f64> {
        let cfg = stepper_cfg(dt, 0.2);
        let mut st = Stepper::new(g, cfg)?;
        let mut s = bump_reform_state(g, &Bump::standard(&g), amp, eps, st.poisson())?;
        let mut traj = vec![balance_sample(&s.b, k, s.time)];
        for _ in 0..cfg.n_steps() {
            s = st.step_reform(&s)?;
            traj.push(balance_sample(&s.b, k, s.time));
        }
        balance_residual_b(&traj, k)
    };
    let (coarse, fine) = (residual(0.005)?, residual(0.0025)?);
    let ratio = coarse / fine;
    Ok(vec![check(
        5,
        "L^s balance residual under dt -> dt/2, 128x128 diffusion-dominated B",
        (1.7..=2.4).contains(&ratio),
        format!("residual {} -> {}, ratio {:.3} (want [1.7, 2.4])", e3(coarse), e3(fine), ratio),
    )])
}

fn pure_swirl() -> Result<Vec<Check>> {
    let g = grid(32)?;
    let cfg = stepper_cfg(0.005, 5.0);
    let mut st = Stepper::new(g, cfg)?;
    let amp = Amplitudes {
        a_u: 1.0,
        a_b: 1.0,
        a_omega: 2.0,
    };
    let mut flow = bump_axi_state(g, &Bump::standard(&g), amp, st.poisson())?;
    let mut b = FullBState::from_swirl(0.0, flow.b_theta.clone())?;
    let scale = b.b_theta.max_abs();
    let mut worst = 0.0f64;
    let steps = 1000;
    for _ in 0..steps {
        let next_b = st.step_full_b(&b, Velocity::of(&flow))?;
        flow = st.step_primitive(&flow)?;
        b = next_b;
        worst = worst.max(b.poloidal_max());
    }
    let rel = worst / scale;
    Ok(vec![check(
        6,
        "max(|b^r|, |b^z|) over 1000 full-b steps",
        rel <= 1e-12 && b.b_theta.is_finite(),
        format!("{} relative to ||b^theta_0||_inf (tol 1.000e-12)", e3(rel)),
    )])
}

fn small_data_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        p: P_RUN,
        c0: 1e-3,
        seed,
        formulation: Formulation::Reform,
        ..RunConfig::default()
    };
    cfg.grid.nr = 32;
    cfg.grid.nz = 32;
    cfg.stepper = stepper_cfg(0.01, 1.0);
    cfg.init.generator = Generator::RandomBump;
    cfg.init.amplitudes = Amplitudes {
        a_u: 1e-6,
        a_b: 1e-4,
        a_omega: 1e-2,
    };
    cfg.init.calibrate = true;
    cfg.output.snapshots = false;
    cfg
}

// smallness passed, (swirl, B) margins, alternative swirl margin,
// max M / M0, ledger / M0
type SmallRun = (bool, (f64, f64), f64, f64, f64);

fn small_data(seed: u64) -> Result<Vec<Check>> {
    let mut rng = rng_for(seed, 2);
    let seeds: Vec<u64> = (0..20).map(|_| rng.random()).collect();
    let outcomes: Vec<Result<_>> = seeds
        .par_iter()
        .map(|s| {
            let cfg = small_data_config(*s);
            let traj = integrate(&cfg)?;
            if let Some(e) = traj.failure {
                return Err(e);
            }
            let m0 = traj.init.norms.m0;
            let sm = traj.init.smallness;
            let alt = sm.alt_rhs_swirl.map_or(f64::NAN, |rhs| rhs / sm.lhs_swirl);
            let max_m = traj.rows.iter().map(|r| r.m).fold(0.0, f64::max);
            let ledger = crate::functionals::dissipation_ledger(&traj.rows, cfg.p);
            Ok((sm.passed, sm.margins, alt, max_m / m0, ledger / m0))
        })
        .collect();
    let mut rows = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        rows.push(o?);
    }
    let n = rows.len();
    let passing = rows.iter().filter(|r| r.0).count();
    let min_of = |f: &dyn Fn(&SmallRun) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let max_of = |f: &dyn Fn(&SmallRun) -> f64| rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let worst_m = max_of(&|r| r.3);
    let worst_ledger = max_of(&|r| r.4);
    Ok(vec![
        check(
            7,
            "seeded configurations pass the smallness conditions",
            passing == n,
            format!(
                "{passing} of {n}; min margins: swirl {} (23p-21 index), {} (25p-21 index), B {}",
                e3(min_of(&|r| r.1 .0)),
                e3(min_of(&|r| r.2)),
                e3(min_of(&|r| r.1 .1))
            ),
        ),
        check(
            7,
            "M(t) <= 2 M0 at every sample to t = 1",
            worst_m <= 2.0,
            format!("max over runs of max_t M(t)/M0 = {:.6}", worst_m),
        ),
        check(
            7,
            "dissipation ledger <= 2 M0 (1 + 1e-2)",
            worst_ledger <= 2.0 * (1.0 + 1e-2),
            format!("max over runs of ledger/M0 = {:.6}", worst_ledger),
        ),
    ])
}

fn equivalence() -> Result<Vec<Check>> {
    let g = grid(64)?;
    let (dt, t_end) = (0.005, 0.2);
    let cfg = stepper_cfg(dt, t_end);
    let eps = epsilon_of_p(P_RUN)?;
    let amp = Amplitudes {
        a_u: 1.0,
        a_b: 1.0,
        a_omega: 1.0,
    };
    let bump = Bump::standard(&g);
    let mut st = Stepper::new(g, cfg)?;
    let mut x = bump_axi_state(g, &bump, amp, st.poisson())?;
    let mut y = bump_reform_state(g, &bump, amp, eps, st.poisson())?;
    let norm3 = |a: &ScalarField, b: &ScalarField, c: &ScalarField| {
        (lp_norm(a, 2.0, 0.0).powi(2) + lp_norm(b, 2.0, 0.0).powi(2) + lp_norm(c, 2.0, 0.0).powi(2)).sqrt()
    };
    let n0 = norm3(&x.u_theta, &x.b_theta, &x.omega_theta);
    for _ in 0..cfg.n_steps() {
        x = st.step_primitive(&x)?;
        y = st.step_reform(&y)?;
    }
    let z = y.to_axi();
    let err = norm3(
        &diff(&x.u_theta, &z.u_theta),
        &diff(&x.b_theta, &z.b_theta),
        &diff(&x.omega_theta, &z.omega_theta),
    ) / n0;
    let h = g.h();
    let bound = 5.0 * (h * h + dt);
    Ok(vec![check(
        8,
        "primitive vs reformulated (u^theta, b^theta, omega^theta) at t = 0.2, 64x64",
        err <= bound,
        format!("relative L2 difference {} (bound 5 (h^2 + dt) = {})", e3(err), e3(bound)),
    )])
}

const LP_SIDE: f64 = 2.0 * PI;

fn tone(n: usize, k: [i64; 3], dir: [f64; 3]) -> Result<CartesianField3D> {
    CartesianField3D::from_fn(n, LP_SIDE, 3, |x, y, z| {
        let ph = (k[0] as f64 * x + k[1] as f64 * y + k[2] as f64 * z).cos();
        [dir[0] * ph, dir[1] * ph, dir[2] * ph]
    })
}

/// Sum of random Fourier modes with `|n|` at most `max_tau`; with
/// `gradient`, the gradient of a random scalar instead.
fn random_field(rng: &mut impl Rng, n: usize, modes: usize, max_tau: f64, gradient: bool) -> Result<CartesianField3D> {
    let lim = max_tau.floor() as i64;
    let mut picked = Vec::with_capacity(modes);
    while picked.len() < modes {
        let k = [
            rng.random_range(-lim..=lim),
            rng.random_range(-lim..=lim),
            rng.random_range(-lim..=lim),
        ];
        let tau = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        if tau == 0.0 || tau > max_tau {
            continue;
        }
        let amp = [
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ];
        picked.push((k, amp, rng.random_range(0.0..2.0 * PI)));
    }
    CartesianField3D::from_fn(n, LP_SIDE, 3, |x, y, z| {
        let mut v = [0.0; 3];
        for (k, a, ph) in &picked {
            let arg = k[0] as f64 * x + k[1] as f64 * y + k[2] as f64 * z + ph;
            if gradient {
                // grad of a0 sin(arg) with unit wave numbers since L = 2 pi
                for d in 0..3 {
                    v[d] += a[0] * k[d] as f64 * arg.cos();
                }
            } else {
                for d in 0..3 {
                    v[d] += a[d] * arg.cos();
                }
            }
        }
        v
    })
}

fn littlewood_paley(seed: u64) -> Result<Vec<Check>> {
    let n = 32;
    let part = DyadicPartition::for_size(n)?;
    let mut checks = Vec::new();

    // partition of unity on a fine frequency grid
    let mut pu_full = 0.0f64;
    let mut pu_band = 0.0f64;
    for i in 1..=20_000 {
        let tau = 64.0 * i as f64 / 20_000.0;
        let full = chi(tau) + (0..12).map(|j| phi(tau * 2f64.powi(-j))).sum::<f64>();
        let band = part.low_weight(tau)
            + (part.j_min..=part.j_max).map(|j| DyadicPartition::block_weight(j, tau)).sum::<f64>()
            + part.high_weight(tau);
        pu_full = pu_full.max((full - 1.0).abs());
        pu_band = pu_band.max((band - 1.0).abs());
    }
    let pu = pu_full.max(pu_band);
    checks.push(check(
        9,
        "partition of unity",
        pu <= 1e-12,
        format!("max |sum - 1| = {} over tau in (0, 64] (tol 1.000e-12)", e3(pu)),
    ));

    let mut rng = rng_for(seed, 3);
    let mut recon = 0.0f64;
    let mut idem = 0.0f64;
    let mut div = 0.0f64;
    let mut annihil = 0.0f64;
    for _ in 0..6 {
        let u = random_field(&mut rng, n, 8, part.resolved_tau(), false)?;
        let mut sum = low_pass(&u);
        for j in part.j_min..=part.j_max {
            sum = sum.add(&dyadic_block(&u, j)?)?;
        }
        let scale = u.lp_norm(f64::INFINITY);
        recon = recon.max(sum.max_abs_diff(&u) / scale);
        recon = recon.max(sum.add(&high_remainder(&u))?.max_abs_diff(&u) / scale);

        let wide = random_field(&mut rng, n, 8, 15.0, false)?;
        let pw = leray_project(&wide)?;
        let ws = wide.lp_norm(f64::INFINITY);
        idem = idem.max(leray_project(&pw)?.max_abs_diff(&pw) / ws);
        div = div.max(spectral_divergence(&pw)? / ws);
        let g = random_field(&mut rng, n, 8, 15.0, true)?;
        annihil = annihil.max(leray_project(&g)?.lp_norm(f64::INFINITY) / g.lp_norm(f64::INFINITY));
    }
    checks.push(check(
        9,
        "reconstruction low + blocks (+ high) = u",
        recon <= 1e-10,
        format!("max relative error {} over 6 band-limited fields (tol 1.000e-10)", e3(recon)),
    ));
    checks.push(check(
        9,
        "Leray idempotence and divergence",
        idem <= 1e-12 && div <= 1e-12,
        format!("||P P u - P u|| = {}, ||div P u|| = {} relative (tol 1.000e-12)", e3(idem), e3(div)),
    ));
    checks.push(check(
        9,
        "Leray annihilates gradients",
        annihil <= 1e-12,
        format!("||P grad f|| / ||grad f|| = {} (tol 1.000e-12)", e3(annihil)),
    ));

    let mut besov_err = 0.0f64;
    for j in 0..=part.j_max {
        let k = 1i64 << j;
        let u = tone(n, [k, k, 0], [0.0, 0.0, 1.0])?;
        for s in [-1.0, 0.5, 1.0] {
            for r_sum in [1.0, 2.0, f64::INFINITY] {
                let got = besov_norm(&u, s, f64::INFINITY, r_sum)?;
                besov_err = besov_err.max((got - 2f64.powf(j as f64 * s)).abs());
            }
        }
    }
    checks.push(check(
        9,
        "single-tone Besov norms",
        besov_err <= 1e-10,
        format!("max |B^s_(inf,r) - 2^(js)| = {} for j in 0..=2 (tol 1.000e-10)", e3(besov_err)),
    ));

    let mut min_c = f64::INFINITY;
    let mut worst_prefactor = 0.0f64;
    for j in 0..=part.j_max {
        let lo = 0.75 * 2f64.powi(j);
        let hi = 8.0 / 3.0 * 2f64.powi(j);
        let k = loop {
            let k = [rng.random_range(-5i64..=5), rng.random_range(-5i64..=5), rng.random_range(-5i64..=5)];
            let tau = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
            if tau >= lo && tau <= hi {
                break k;
            }
        };
        let u = tone(n, k, [1.0, 0.0, 0.0])?;
        let (c, cc) = heat_decay_fit(&u, j, &[0.0, 0.01, 0.02, 0.05, 0.1])?;
        min_c = min_c.min(c);
        worst_prefactor = worst_prefactor.max(cc.ln().abs());
    }
    let c_min = 0.75f64.powi(2) * (1.0 - 1e-9);
    checks.push(check(
        9,
        "heat decay on block-localized tones",
        min_c >= c_min && worst_prefactor <= 1e-9,
        format!(
            "min fitted c = {:.6} (want >= (3/4)^2), max |ln C| = {}",
            min_c,
            e3(worst_prefactor)
        ),
    ));
    Ok(checks)
}

fn duhamel(seed: u64) -> Result<Vec<Check>> {
    let n = 16;
    let (t, j) = (1.0, 0);
    let mut rng = rng_for(seed, 4);
    let u0 = random_field(&mut rng, n, 6, 2.5, false)?;
    let free = heat_semigroup(&u0, t)?;
    let zero = vec![CartesianField3D::zeros(n, LP_SIDE, 3)?; 9];
    let r0 = duhamel_residual(&u0, &zero, &free, t, j)?;

    // F(s) = cos(w s) G with G a tone in block 0
    let dir = [
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
    ];
    let g = tone(n, [1, 1, 0], dir)?;
    let kappa = 2.0;
    let w = 3.0;
    let integral = (kappa * (w * t).cos() + w * (w * t).sin() - kappa * (-kappa * t).exp()) / (kappa * kappa + w * w);
    let exact = free.sub(&leray_project(&g)?.scaled(integral))?;
    let residual = |intervals: usize| -> Result<f64> {
        let samples: Vec<CartesianField3D> = (0..=intervals)
            .map(|k| g.scaled((w * t * k as f64 / intervals as f64).cos()))
            .collect();
        duhamel_residual(&u0, &samples, &exact, t, j)
    };
    let (coarse, fine) = (residual(16)?, residual(32)?);
    let ratio = coarse / fine;
    Ok(vec![
        check(
            10,
            "zero forcing",
            r0 <= 1e-12,
            format!("residual {} (tol 1.000e-12)", e3(r0)),
        ),
        check(
            10,
            "time-varying forcing under halved sampling interval",
            (3.2..=4.8).contains(&ratio),
            format!("residual {} -> {}, ratio {:.3} (want 4 +- 20%)", e3(coarse), e3(fine), ratio),
        ),
    ])
}

fn empirical_constants(seed: u64) -> Result<Vec<Check>> {
    let corpus = vorticity_corpus(seed, 50);
    let p = P_RUN;
    let ms = [1.5, 2.5, 4.5];
    let qs = [("5p/(3-p)", 5.0 * p / (3.0 - p)), ("3p", 3.0 * p)];
    let (g1, g2) = (grid(32)?, grid(64)?);
    let (s1, s2) = (PoissonSolver::new(g1)?, PoissonSolver::new(g2)?);
    let ratios = |solver: &PoissonSolver, g: Grid, prof: &crate::harness::data::VorticityProfile| -> Result<[f64; 5]> {
        let omega = prof.sample(g);
        let (ur, uz) = solver.biot_savart(&omega)?;
        let eta = omega.times_r_pow(-1.0, Parity::Even);
        Ok([
            biot_savart_ratio(&ur, &uz, &omega, ms[0]),
            biot_savart_ratio(&ur, &uz, &omega, ms[1]),
            biot_savart_ratio(&ur, &uz, &omega, ms[2]),
            ur_over_r_ratio(&ur, &eta, p, qs[0].1)?,
            ur_over_r_ratio(&ur, &eta, p, qs[1].1)?,
        ])
    };
    let pairs: Vec<Result<([f64; 5], [f64; 5])>> = corpus
        .par_iter()
        .map(|prof| Ok((ratios(&s1, g1, prof)?, ratios(&s2, g2, prof)?)))
        .collect();
    let mut table = Vec::with_capacity(pairs.len());
    for pr in pairs {
        table.push(pr?);
    }
    let labels = [
        "Biot-Savart ratio, m = 3/2".to_string(),
        "Biot-Savart ratio, m = 5/2".to_string(),
        "Biot-Savart ratio, m = 9/2".to_string(),
        format!("||u^r/r|| interpolation ratio, q = {}", qs[0].0),
        format!("||u^r/r|| interpolation ratio, q = {}", qs[1].0),
    ];
    Ok((0..5)
        .map(|i| {
            let finite = table.iter().all(|(a, b)| a[i].is_finite() && b[i].is_finite() && a[i] > 0.0);
            let change = table
                .iter()
                .map(|(a, b)| ((b[i] - a[i]) / a[i]).abs())
                .fold(0.0, f64::max);
            let lo = table.iter().map(|(_, b)| b[i]).fold(f64::INFINITY, f64::min);
            let hi = table.iter().map(|(_, b)| b[i]).fold(f64::NEG_INFINITY, f64::max);
            check(
                11,
                labels[i].as_str(),
                finite && change < 0.1,
                format!(
                    "range [{:.4}, {:.4}] over 50 fields at 64x64; max change under h -> h/2 {:.2}% (want < 10%)",
                    lo,
                    hi,
                    100.0 * change
                ),
            )
        })
        .collect())
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::parse(s).ok_or_else(|| {
            Error::Domain(format!("unknown suite `{s}` (expected one of {})", Suite::NAMES.join(", ")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(Suite::parse(name).unwrap().as_str(), name);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn all_covers_every_criterion_once_per_part() {
        let mut covered: Vec<u8> = Suite::All.parts().iter().map(|p| p.criterion()).collect();
        covered.dedup();
        assert_eq!(covered, (1..=11).collect::<Vec<u8>>());
        let mut union: Vec<Part> = Suite::NAMES[..8]
            .iter()
            .flat_map(|n| Suite::parse(n).unwrap().parts())
            .collect();
        let mut all = Suite::All.parts();
        union.sort_by_key(|p| *p as u8);
        all.sort_by_key(|p| *p as u8);
        assert_eq!(union, all);
    }

    #[test]
    fn exponent_suite_passes_and_renders() {
        let r = run_suite(Suite::Exponents, 7).unwrap();
        assert!(r.passed());
        assert_eq!(r.criteria(), vec![1]);
        let text = r.render();
        assert!(text.contains("[C1] exponent endpoints: PASS"));
        assert!(text.ends_with("result: PASS\n"));
        assert_eq!(text, run_suite(Suite::Exponents, 7).unwrap().render());
    }

    #[test]
    fn failing_check_fails_its_criterion() {
        let r = SuiteReport {
            suite: Suite::Lp,
            seed: 1,
            checks: vec![check(9, "a", true, ""), check(9, "b", false, ""), check(10, "c", true, "")],
        };
        assert_eq!(r.criterion_passed(9), Some(false));
        assert_eq!(r.criterion_passed(10), Some(true));
        assert_eq!(r.criterion_passed(1), None);
        assert!(!r.passed());
        assert!(r.render().contains("criteria passed: 1 of 2"));
    }
}
