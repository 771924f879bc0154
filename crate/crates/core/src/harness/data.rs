//! Initial data, theorem norms and seeded corpora.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), a portable generator
//! whose output for a given seed is fixed across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::PoissonSolver;
use crate::error::{Error, Result};
use crate::evolve::{bump_axi_state, bump_reform_state, Amplitudes, AxiState, Bump, ReformState};
use crate::exponents::{
    check_smallness, compute_m0, compute_n0, epsilon_of_p, s_of_p, swirl_lebesgue_index, NormBundle,
    SmallnessReport, SwirlIndexVariant,
};
use crate::functionals::{omega_j_monitors, BesovPair};
use crate::grid::{lp_norm, Grid, Parity, ScalarField};
use crate::harness::config::{Generator, LpSpec, RunConfig};
use crate::littlewood_paley::{besov_norm, chi, embed_axisymmetric, embed_scalar, CartesianField3D};

/// Generator seeded from `seed` and a stream index, so that independent
/// cases of one run draw from disjoint streams.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest number of amplitude halvings tried by calibration.
pub const MAX_HALVINGS: u32 = 200;

/// Initial data in both formulations with its theorem norms.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub grid: Grid,
    pub bump: Bump,
    pub amplitudes: Amplitudes,
    pub epsilon: f64,
    pub axi: AxiState,
    pub reform: ReformState,
    pub norms: NormBundle,
    pub smallness: SmallnessReport,
    pub n0: f64,
    /// `(||u_0||_{B^{-1}_{inf,1}}, ||u_0||_{B^1_{inf,1}})` when LP analysis is on.
    pub besov: Option<BesovPair>,
    /// Halvings applied by calibration.
    pub halvings: u32,
}

/// Norms entering the smallness conditions, from analytic samples of
/// `r u^theta_0 = A_u r^2 chi`, `B_0`, `eta_0` and `V_0`.
pub fn norm_bundle(grid: Grid, bump: &Bump, amp: Amplitudes, p: f64) -> Result<NormBundle> {
    let eps = epsilon_of_p(p)?;
    let u = bump.swirl_field(grid, amp.a_u);
    let b = bump.even_field(grid, amp.a_b, 0.0);
    let eta = bump.even_field(grid, amp.a_omega, 0.0);
    let v = bump.even_field(grid, amp.a_u, eps);
    let la = swirl_lebesgue_index(p, SwirlIndexVariant::Theorem)?;
    let la_alt = swirl_lebesgue_index(p, SwirlIndexVariant::Intermediate)?;
    Ok(NormBundle {
        ru_linf: lp_norm(&u, f64::INFINITY, 1.0),
        ru_la: lp_norm(&u, la, 1.0),
        ru_la_alt: Some(lp_norm(&u, la_alt, 1.0)),
        b_l3_2: lp_norm(&b, 1.5, 0.0),
        b_l3p_2: lp_norm(&b, 1.5 * p, 0.0),
        m0: compute_m0(lp_norm(&eta, p, 0.0), lp_norm(&v, 1.75, 0.0), lp_norm(&b, s_of_p(p), 0.0), p)?,
    })
}

fn randomized(cfg: &RunConfig, bump: Bump, grid: &Grid) -> (Bump, Amplitudes) {
    let mut rng = rng_for(cfg.seed, 0);
    let radius = bump.radius * rng.random_range(0.6..=1.0);
    let half_height = bump.half_height * rng.random_range(0.6..=1.0);
    let room = (bump.z_center - half_height)
        .min(grid.lz - bump.z_center - half_height)
        .min(bump.half_height - half_height);
    let z_center = bump.z_center + room * rng.random_range(-1.0..=1.0);
    let a = cfg.init.amplitudes;
    let amp = Amplitudes {
        a_u: a.a_u * rng.random_range(0.5..=1.5),
        a_b: a.a_b * rng.random_range(0.5..=1.5),
        a_omega: a.a_omega * rng.random_range(0.5..=1.5),
    };
    (
        Bump {
            radius,
            z_center,
            half_height,
        },
        amp,
    )
}

/// Build the configured initial data, evaluate the smallness conditions
/// and, with `init.calibrate`, halve all amplitudes until they hold.
pub fn generate_initial_data(cfg: &RunConfig, poisson: &PoissonSolver) -> Result<InitialData> {
    let grid = cfg.grid.build()?;
    if poisson.grid() != grid {
        return Err(Error::contract("Poisson solver built for a different grid"));
    }
    let base = cfg.bump()?;
    base.validate(&grid)?;
    let (bump, mut amp) = match cfg.init.generator {
        Generator::Bump => (base, cfg.init.amplitudes),
        Generator::RandomBump => randomized(cfg, base, &grid),
    };
    bump.validate(&grid)?;

    let mut halvings = 0;
    let (norms, smallness) = loop {
        let norms = norm_bundle(grid, &bump, amp, cfg.p)?;
        let report = check_smallness(cfg.p, cfg.c0, &norms)?;
        if report.passed || !cfg.init.calibrate {
            break (norms, report);
        }
        if halvings == MAX_HALVINGS {
            return Err(Error::domain(format!(
                "calibration gave up after {MAX_HALVINGS} halvings without passing the smallness conditions"
            )));
        }
        amp = Amplitudes {
            a_u: 0.5 * amp.a_u,
            a_b: 0.5 * amp.a_b,
            a_omega: 0.5 * amp.a_omega,
        };
        halvings += 1;
    };

    let epsilon = epsilon_of_p(cfg.p)?;
    let axi = bump_axi_state(grid, &bump, amp, poisson)?;
    let reform = bump_reform_state(grid, &bump, amp, epsilon, poisson)?;
    let (omega0, j0) = omega_j_monitors(&axi);
    let n0 = compute_n0(omega0, j0, norms.ru_linf, norms.m0, cfg.p)?;
    let besov = if cfg.lp.enabled {
        Some(velocity_besov(&axi, &cfg.lp)?)
    } else {
        None
    };
    Ok(InitialData {
        grid,
        bump,
        amplitudes: amp,
        epsilon,
        axi,
        reform,
        norms,
        smallness,
        n0,
        besov,
        halvings,
    })
}

/// Smooth cutoff equal to 1 on `r <= 0.525 Rmax`, `|z - Lz/2| <= 0.2625 Lz`
/// and vanishing before the edge cells. Applied before every embedding,
/// since the diagnosed velocity and diffused fields are not compactly
/// supported.
pub fn embedding_window(grid: Grid) -> ScalarField {
    ScalarField::from_fn(grid, Parity::Even, |r, z| {
        chi(r / (0.7 * grid.rmax)) * chi((z - 0.5 * grid.lz).abs() / (0.35 * grid.lz))
    })
}

fn windowed(f: &ScalarField, w: &ScalarField) -> ScalarField {
    let mut out = f.clone();
    out.values *= &w.values;
    out
}

/// Cartesian embedding of the windowed velocity `(u^r, u^theta, u^z)`.
pub fn embed_velocity(state: &AxiState, lp: &LpSpec) -> Result<CartesianField3D> {
    let w = embedding_window(state.grid());
    embed_axisymmetric(
        &windowed(&state.u_r, &w),
        &windowed(&state.u_theta, &w),
        &windowed(&state.u_z, &w),
        lp.n,
        lp.l,
    )
}

/// Cartesian embedding of a windowed snapshot field: swirl and radial
/// components become vectors, everything else a scalar.
pub fn embed_named(field: &ScalarField, name: &str, lp: &LpSpec) -> Result<CartesianField3D> {
    let w = embedding_window(field.grid);
    let f = windowed(field, &w);
    let zero_odd = ScalarField::zeros(field.grid, Parity::Odd);
    let zero_even = ScalarField::zeros(field.grid, Parity::Even);
    match name {
        "u_theta" | "b_theta" | "omega_theta" => embed_axisymmetric(&zero_odd, &f, &zero_even, lp.n, lp.l),
        "u_r" | "b_r" => embed_axisymmetric(&f, &zero_odd, &zero_even, lp.n, lp.l),
        "u_z" | "b_z" => embed_axisymmetric(&zero_odd, &zero_odd, &f, lp.n, lp.l),
        _ => embed_scalar(&f, lp.n, lp.l),
    }
}

pub fn velocity_besov(state: &AxiState, lp: &LpSpec) -> Result<BesovPair> {
    let u = embed_velocity(state, lp)?;
    Ok(BesovPair {
        minus_one: besov_norm(&u, -1.0, f64::INFINITY, 1.0)?,
        plus_one: besov_norm(&u, 1.0, f64::INFINITY, 1.0)?,
    })
}

/// Smooth vorticity profile
/// `omega^theta = r (1 + c r^2) exp(-r^2 / w^2) (a0 + a1 cos(kz + f1) + a2 cos(2kz + f2))`
/// with `k = 2 pi / Lz`; evaluable on any grid, for refinement studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VorticityProfile {
    pub width: f64,
    pub curvature: f64,
    pub coeffs: [f64; 3],
    pub phases: [f64; 2],
}

impl VorticityProfile {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            width: rng.random_range(0.6..=1.2),
            curvature: rng.random_range(0.0..=0.5),
            coeffs: [
                rng.random_range(0.5..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            ],
            phases: [
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            ],
        }
    }

    pub fn sample(&self, grid: Grid) -> ScalarField {
        let k = std::f64::consts::TAU / grid.lz;
        ScalarField::from_fn(grid, Parity::Odd, |r, z| {
            let axial = self.coeffs[0]
                + self.coeffs[1] * (k * z + self.phases[0]).cos()
                + self.coeffs[2] * (2.0 * k * z + self.phases[1]).cos();
            r * (1.0 + self.curvature * r * r) * (-r * r / (self.width * self.width)).exp() * axial
        })
    }
}

/// `count` vorticity profiles drawn from `seed`.
pub fn vorticity_corpus(seed: u64, count: usize) -> Vec<VorticityProfile> {
    let mut rng = rng_for(seed, 1);
    (0..count).map(|_| VorticityProfile::random(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::RunConfig;

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.grid.nr = 24;
        cfg.grid.nz = 24;
        cfg
    }

    fn data(cfg: &RunConfig) -> Result<InitialData> {
        let poisson = PoissonSolver::new(cfg.grid.build()?)?;
        generate_initial_data(cfg, &poisson)
    }

    #[test]
    fn zero_amplitudes_give_zero_state_and_pass() {
        let mut cfg = small_cfg();
        cfg.init.amplitudes = Amplitudes::default();
        let d = data(&cfg).unwrap();
        assert_eq!(d.axi.u_theta.max_abs(), 0.0);
        assert_eq!(d.reform.b.max_abs(), 0.0);
        assert_eq!(d.norms.m0, 0.0);
        assert!(d.smallness.passed);
    }

    #[test]
    fn huge_b_fails_on_the_b_condition() {
        let mut cfg = small_cfg();
        cfg.init.amplitudes = Amplitudes {
            a_u: 0.0,
            a_b: 1e3,
            a_omega: 0.0,
        };
        let d = data(&cfg).unwrap();
        assert!(!d.smallness.passed);
        assert!(d.smallness.lhs_b > d.smallness.rhs_b);
        assert!(d.smallness.lhs_swirl <= d.smallness.rhs_swirl);
    }

    #[test]
    fn calibration_passes_and_margins_recheck() {
        let mut cfg = small_cfg();
        cfg.init.amplitudes = Amplitudes {
            a_u: 1.0,
            a_b: 1.0,
            a_omega: 1.0,
        };
        cfg.init.calibrate = true;
        let d = data(&cfg).unwrap();
        assert!(d.halvings > 0);
        assert!(d.smallness.passed);
        let again = check_smallness(cfg.p, cfg.c0, &norm_bundle(d.grid, &d.bump, d.amplitudes, cfg.p).unwrap()).unwrap();
        assert_eq!(again, d.smallness);
        assert!(d.smallness.margins.0 >= 1.0 && d.smallness.margins.1 >= 1.0);
        // one fewer halving would fail
        let undo = Amplitudes {
            a_u: 2.0 * d.amplitudes.a_u,
            a_b: 2.0 * d.amplitudes.a_b,
            a_omega: 2.0 * d.amplitudes.a_omega,
        };
        let before = check_smallness(cfg.p, cfg.c0, &norm_bundle(d.grid, &d.bump, undo, cfg.p).unwrap()).unwrap();
        assert!(!before.passed);
    }

    #[test]
    fn support_outside_domain_is_a_domain_error() {
        let mut cfg = small_cfg();
        cfg.init.support = Some(Bump {
            radius: 1.0,
            z_center: 7.5,
            half_height: 1.0,
        });
        assert!(matches!(data(&cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn random_generator_is_seeded() {
        let mut cfg = small_cfg();
        cfg.init.generator = Generator::RandomBump;
        let a = data(&cfg).unwrap();
        let b = data(&cfg).unwrap();
        assert_eq!(a.bump, b.bump);
        assert_eq!(a.amplitudes, b.amplitudes);
        cfg.seed += 1;
        let c = data(&cfg).unwrap();
        assert_ne!(a.bump, c.bump);
        assert!(c.bump.validate(&c.grid).is_ok());
    }

    #[test]
    fn besov_of_windowed_velocity() {
        let mut cfg = small_cfg();
        cfg.lp.enabled = true;
        cfg.lp.n = 16;
        cfg.init.amplitudes = Amplitudes {
            a_u: 1.0,
            a_b: 0.0,
            a_omega: 1.0,
        };
        let d = data(&cfg).unwrap();
        let b = d.besov.unwrap();
        assert!(b.minus_one > 0.0 && b.plus_one > 0.0);
        assert!(b.minus_one.is_finite() && b.plus_one.is_finite());
    }

    #[test]
    fn corpus_is_reproducible() {
        assert_eq!(vorticity_corpus(3, 5), vorticity_corpus(3, 5));
        assert_ne!(vorticity_corpus(3, 5), vorticity_corpus(4, 5));
    }
}
