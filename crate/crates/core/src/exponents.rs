//! Exponent algebra and smallness conditions of the global well-posedness
//! result.
//!
//! Every exponent is a closed-form rational function of `p`, the Lebesgue
//! index of `eta = omega^theta / r`. The admissible interval is `]1, 63/61]`.

use crate::error::{Error, Result};

/// Upper end of the admissible interval for `p`.
pub const P_MAX: f64 = 63.0 / 61.0;

/// Default value of the universal smallness constant `c0`.
pub const DEFAULT_C0: f64 = 1e-3;

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 && p <= P_MAX {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "p = {p} outside the admissible interval ]1, 63/61]"
        )))
    }
}

/// Weight exponent of `V = u^theta / r^(1 - eps)`.
///
/// `eps = 2/7 - 60 (p - 1) / (7 (3 - p))`, which lies in `[1/7, 2/7[`.
pub fn epsilon_of_p(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(2.0 / 7.0 - 60.0 * (p - 1.0) / (7.0 * (3.0 - p)))
}

/// `a(p) = (3 - p)(23p - 21) / (12 (3p + 1))`, in `]1/12, 168/1525]`.
pub fn a_frak_of_p(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok((3.0 - p) * (23.0 * p - 21.0) / (12.0 * (3.0 * p + 1.0)))
}

/// Interpolation exponent `lambda = (p - 1)/2 + 3p/(2q)` of the bound
/// `||u^r / r||_{L^q} <~ ||eta||_{L^p}^lambda ||eta||_{L^{3p}}^(1 - lambda)`.
///
/// `q = f64::INFINITY` is allowed.
pub fn lambda_interp(p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0 && p < 3.0) {
        return Err(Error::domain(format!("p = {p} outside ]1, 3[")));
    }
    let q_min = 3.0 * p / (3.0 - p);
    if q.is_nan() || q <= q_min {
        return Err(Error::domain(format!(
            "q = {q} must exceed 3p/(3-p) = {q_min}"
        )));
    }
    if q.is_infinite() {
        return Ok((p - 1.0) / 2.0);
    }
    Ok((p - 1.0) / 2.0 + 3.0 * p / (2.0 * q))
}

/// Lebesgue index `s = 6p / (3 + p)` used for `B` inside `M(t)`.
pub fn s_of_p(p: f64) -> f64 {
    6.0 * p / (3.0 + p)
}

/// Dissipation prefactor `48 (2p-1)(33-31p) / (49 (3-p)^2)` of the
/// `|| |V|^(7/8) / r ||^2` term in the `L^(7/4)` estimate of `V`.
///
/// Positive only for `p < 33/31`; configurations are rejected otherwise.
pub fn v_hardy_prefactor(p: f64) -> f64 {
    48.0 * (2.0 * p - 1.0) * (33.0 - 31.0 * p) / (49.0 * (3.0 - p).powi(2))
}

/// Which numerator the Lebesgue index of `r u^theta` carries.
///
/// The theorem and the `eta` estimate use `23p - 21`; an intermediate
/// step uses `25p - 21`. Both are exposed and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwirlIndexVariant {
    Theorem,
    Intermediate,
}

/// Lebesgue index of the second `r u^theta_0` norm in the smallness
/// condition: `a(p)/(p-1)` for the theorem variant, and
/// `a(p)/(p-1) * (25p-21)/(23p-21)` for the intermediate variant.
pub fn swirl_lebesgue_index(p: f64, variant: SwirlIndexVariant) -> Result<f64> {
    let base = a_frak_of_p(p)? / (p - 1.0);
    Ok(match variant {
        SwirlIndexVariant::Theorem => base,
        SwirlIndexVariant::Intermediate => base * (25.0 * p - 21.0) / (23.0 * p - 21.0),
    })
}

/// All exponents derived from a single admissible `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSet {
    pub p: f64,
    pub epsilon: f64,
    pub a_frak: f64,
    /// `6p / (3 + p)`.
    pub s: f64,
    /// `5p / (3 - p)`.
    pub q1: f64,
    /// `1 + 8 / (7 (2 - eps))`, equal to `5p / (3 (2p - 1))`.
    pub q2: f64,
}

impl ExponentSet {
    pub fn new(p: f64) -> Result<Self> {
        let epsilon = epsilon_of_p(p)?;
        let a_frak = a_frak_of_p(p)?;
        Ok(Self {
            p,
            epsilon,
            a_frak,
            s: s_of_p(p),
            q1: 5.0 * p / (3.0 - p),
            q2: 1.0 + 8.0 / (7.0 * (2.0 - epsilon)),
        })
    }

    /// Closed form of `q2` in terms of `p`, for cross-checking.
    pub fn q2_closed_form(&self) -> f64 {
        5.0 * self.p / (3.0 * (2.0 * self.p - 1.0))
    }

    /// Lebesgue index `3p/2` of the higher `B_0` norm.
    pub fn b_high_index(&self) -> f64 {
        1.5 * self.p
    }
}

/// Norms of the initial data entering the smallness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormBundle {
    /// `||r u^theta_0||_{L^inf}`.
    pub ru_linf: f64,
    /// `||r u^theta_0||_{L^{a(p)/(p-1)}}`.
    pub ru_la: f64,
    /// `||r u^theta_0||` in the intermediate-variant index, when available.
    pub ru_la_alt: Option<f64>,
    /// `||B_0||_{L^{3/2}}`.
    pub b_l3_2: f64,
    /// `||B_0||_{L^{3p/2}}`.
    pub b_l3p_2: f64,
    /// `M_0`.
    pub m0: f64,
}

/// Outcome of evaluating both smallness conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallnessReport {
    pub lhs_swirl: f64,
    pub rhs_swirl: f64,
    pub lhs_b: f64,
    pub rhs_b: f64,
    pub c0: f64,
    pub passed: bool,
    /// `(rhs_swirl / lhs_swirl, rhs_b / lhs_b)`; `+inf` when a left side vanishes.
    pub margins: (f64, f64),
    /// Swirl bound re-evaluated with the `25p - 21` variant, if the matching
    /// norm was supplied. Informational only.
    pub alt_rhs_swirl: Option<f64>,
}

// x^e with x >= 0; a vanishing base under a negative exponent gives +inf.
fn pow_nonneg(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        if e < 0.0 {
            f64::INFINITY
        } else if e == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        x.powf(e)
    }
}

fn ratio_margin(rhs: f64, lhs: f64) -> f64 {
    if lhs == 0.0 {
        f64::INFINITY
    } else {
        rhs / lhs
    }
}

/// Evaluate both smallness conditions of the theorem as written.
pub fn check_smallness(p: f64, c0: f64, norms: &NormBundle) -> Result<SmallnessReport> {
    check_p(p)?;
    if !(c0 > 0.0) {
        return Err(Error::domain(format!("c0 = {c0} must be positive")));
    }
    let fields = [
        norms.ru_linf,
        norms.ru_la,
        norms.b_l3_2,
        norms.b_l3p_2,
        norms.m0,
        norms.ru_la_alt.unwrap_or(0.0),
    ];
    if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::domain("norm bundle entries must be finite and nonnegative"));
    }

    let pm1 = p - 1.0;
    let two_m0 = 2.0 * norms.m0;
    let first = pow_nonneg(pm1, 20.0 * p / (7.0 * (3.0 - p)))
        * pow_nonneg(two_m0, -4.0 * (p + 2.0) / (7.0 * (3.0 - p)));
    let common = pow_nonneg(pm1, 8.0) * pow_nonneg(two_m0, -2.0 * pm1 / p);
    let second = common * pow_nonneg(norms.ru_la, -(23.0 * p - 21.0) / (2.0 * p));
    let rhs_swirl = c0 * first.min(second);
    let rhs_b = c0 * common * pow_nonneg(norms.b_l3p_2, -3.0);

    let alt_rhs_swirl = norms.ru_la_alt.map(|alt| {
        let second_alt = common * pow_nonneg(alt, -(25.0 * p - 21.0) / (2.0 * p));
        c0 * first.min(second_alt)
    });

    let passed = norms.ru_linf <= rhs_swirl && norms.b_l3_2 <= rhs_b;
    Ok(SmallnessReport {
        lhs_swirl: norms.ru_linf,
        rhs_swirl,
        lhs_b: norms.b_l3_2,
        rhs_b,
        c0,
        passed,
        margins: (
            ratio_margin(rhs_swirl, norms.ru_linf),
            ratio_margin(rhs_b, norms.b_l3_2),
        ),
        alt_rhs_swirl,
    })
}

/// `M_0 = ||eta_0||_p^p + ||V_0||_{7/4}^{7/4} + ||B_0||_s^s` with `s = 6p/(3+p)`.
pub fn compute_m0(eta0_norm_p: f64, v0_norm: f64, b0_norm_s: f64, p: f64) -> Result<f64> {
    for (name, v) in [("eta0", eta0_norm_p), ("V0", v0_norm), ("B0", b0_norm_s)] {
        if !(v >= 0.0) {
            return Err(Error::domain(format!("{name} norm {v} must be nonnegative")));
        }
    }
    Ok(eta0_norm_p.powf(p) + v0_norm.powf(1.75) + b0_norm_s.powf(s_of_p(p)))
}

/// `N_0 = ||omega_0||_{3/2}^{3/2} + ||J_0||_{3/2}^3
///        + ||r u^theta_0||_inf^{3(39p-37)/(16(2p-1))} (2 M_0)^{-3(p+2)/(4(2p-1))}`.
pub fn compute_n0(omega0_norm: f64, j0_norm: f64, swirl_sup: f64, m0: f64, p: f64) -> Result<f64> {
    for (name, v) in [
        ("omega0", omega0_norm),
        ("J0", j0_norm),
        ("swirl", swirl_sup),
        ("M0", m0),
    ] {
        if !(v >= 0.0) {
            return Err(Error::domain(format!("{name} = {v} must be nonnegative")));
        }
    }
    let swirl_term = if swirl_sup == 0.0 {
        0.0
    } else if m0 == 0.0 {
        return Err(Error::domain(
            "M0 = 0 with nonzero swirl: negative power of zero",
        ));
    } else {
        let a = 3.0 * (39.0 * p - 37.0) / (16.0 * (2.0 * p - 1.0));
        let b = -3.0 * (p + 2.0) / (4.0 * (2.0 * p - 1.0));
        swirl_sup.powf(a) * (2.0 * m0).powf(b)
    };
    Ok(omega0_norm.powf(1.5) + j0_norm.powi(3) + swirl_term)
}
