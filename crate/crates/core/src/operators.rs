//! Second-order finite-difference operators on the cylindrical grid.
//!
//! Every operator reads its input through [`fill_ghosts`], so the axis is
//! handled by the declared parity and the wall by the Dirichlet reflection.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{fill_ghosts, GhostedField, Parity, ScalarField};

/// Axisymmetric operator `d_rr + (c/r) d_r + d_zz - d/r^2`.
///
/// `(c, d) = (1, 1)` is the swirl Laplacian `Delta - 1/r^2`;
/// `(1 + a, 0)` is the reformulated `Delta + (a/r) d_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylOperator {
    pub c: f64,
    pub d: f64,
}

impl CylOperator {
    pub const SWIRL: CylOperator = CylOperator { c: 1.0, d: 1.0 };
    pub const LAPLACE: CylOperator = CylOperator { c: 1.0, d: 0.0 };

    /// `Delta + (a/r) d_r`.
    pub fn reform(a: f64) -> Self {
        CylOperator { c: 1.0 + a, d: 0.0 }
    }

    /// Centered three-point coefficients `(lower, diag, upper)` of the radial
    /// part in row `i`, before folding ghost cells.
    #[inline]
    pub(crate) fn radial_stencil(&self, r: f64, dr: f64) -> (f64, f64, f64) {
        let inv2 = 1.0 / (dr * dr);
        let adv = self.c / (2.0 * r * dr);
        (inv2 - adv, -2.0 * inv2 - self.d / (r * r), inv2 + adv)
    }

    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        let gf = fill_ghosts(f);
        self.apply_ghosted(&gf)
    }

    pub(crate) fn apply_ghosted(&self, gf: &GhostedField) -> ScalarField {
        let g = gf.grid;
        let inv_dz2 = 1.0 / (g.dz * g.dz);
        let values = Array2::from_shape_fn((g.nr, g.nz), |(i, j)| {
            let (i, j) = (i as isize, j as isize);
            let (lo, di, up) = self.radial_stencil(g.r(i), g.dr);
            let c = gf.get(i, j);
            lo * gf.get(i - 1, j)
                + di * c
                + up * gf.get(i + 1, j)
                + (gf.get(i, j + 1) - 2.0 * c + gf.get(i, j - 1)) * inv_dz2
        });
        ScalarField {
            grid: g,
            values,
            parity: gf.parity,
        }
    }
}

/// `(Delta - 1/r^2) f` for an odd (swirl) component.
pub fn laplacian_swirl(f: &ScalarField) -> Result<ScalarField> {
    if f.parity != Parity::Odd {
        return Err(Error::contract(
            "laplacian_swirl needs an ODD field; Delta - 1/r^2 is singular on even fields at the axis",
        ));
    }
    Ok(CylOperator::SWIRL.apply(f))
}

/// `(Delta + (a/r) d_r) f` for an even field.
pub fn laplacian_reform(f: &ScalarField, a: f64) -> Result<ScalarField> {
    if f.parity != Parity::Even {
        return Err(Error::contract("laplacian_reform needs an EVEN field"));
    }
    Ok(CylOperator::reform(a).apply(f))
}

/// Central `d_r f`; the result has the opposite parity.
pub fn ddr(f: &ScalarField) -> ScalarField {
    let gf = fill_ghosts(f);
    let g = f.grid;
    let values = Array2::from_shape_fn((g.nr, g.nz), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        (gf.get(i + 1, j) - gf.get(i - 1, j)) / (2.0 * g.dr)
    });
    ScalarField {
        grid: g,
        values,
        parity: f.parity.times(Parity::Odd),
    }
}

/// Central `d_z f`; parity is preserved.
pub fn ddz(f: &ScalarField) -> ScalarField {
    let gf = fill_ghosts(f);
    let g = f.grid;
    let values = Array2::from_shape_fn((g.nr, g.nz), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        (gf.get(i, j + 1) - gf.get(i, j - 1)) / (2.0 * g.dz)
    });
    ScalarField {
        grid: g,
        values,
        parity: f.parity,
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

// Limited upwind derivative along one direction; `at(k)` reads the line.
#[inline]
fn upwind_derivative(vel: f64, h: f64, at: impl Fn(isize) -> f64) -> f64 {
    let slope = |k: isize| minmod(at(k + 1) - at(k), at(k) - at(k - 1));
    if vel > 0.0 {
        (at(0) - at(-1) + 0.5 * (slope(0) - slope(-1))) / h
    } else if vel < 0.0 {
        (at(1) - at(0) - 0.5 * (slope(1) - slope(0))) / h
    } else {
        0.0
    }
}

/// `(u_r d_r + u_z d_z) f` with minmod-limited second-order upwinding.
///
/// Explicit Euler with this term is a convex combination of neighbouring
/// values whenever `1.5 dt (|u_r|/dr + |u_z|/dz) <= 1` in every cell, see
/// [`advection_dt_bound`].
pub fn advect(u_r: &ScalarField, u_z: &ScalarField, f: &ScalarField) -> ScalarField {
    let gf = fill_ghosts(f);
    let g = f.grid;
    let values = Array2::from_shape_fn((g.nr, g.nz), |(i, j)| {
        let (ur, uz) = (u_r.values[[i, j]], u_z.values[[i, j]]);
        let (i, j) = (i as isize, j as isize);
        ur * upwind_derivative(ur, g.dr, |k| gf.get(i + k, j))
            + uz * upwind_derivative(uz, g.dz, |k| gf.get(i, j + k))
    });
    ScalarField {
        grid: g,
        values,
        parity: f.parity,
    }
}

/// Largest `dt` for which explicit limited advection stays a convex
/// combination. Returns `+inf` for a vanishing velocity.
pub fn advection_dt_bound(u_r: &ScalarField, u_z: &ScalarField) -> f64 {
    let g = u_r.grid;
    let rate = u_r
        .values
        .iter()
        .zip(u_z.values.iter())
        .fold(0.0f64, |m, (a, b)| m.max(a.abs() / g.dr + b.abs() / g.dz));
    if rate == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (1.5 * rate)
    }
}

/// `(-d_z g, d_r g + g/r)`: the poloidal curl of the swirl field `g e_theta`.
///
/// For odd `g` the first component is odd and the second even.
pub fn curl_from_swirl(g_field: &ScalarField) -> (ScalarField, ScalarField) {
    let gf = fill_ghosts(g_field);
    let g = g_field.grid;
    let first = Array2::from_shape_fn((g.nr, g.nz), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        -(gf.get(i, j + 1) - gf.get(i, j - 1)) / (2.0 * g.dz)
    });
    let second = Array2::from_shape_fn((g.nr, g.nz), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        (gf.get(i + 1, j) - gf.get(i - 1, j)) / (2.0 * g.dr) + gf.get(i, j) / g.r(i)
    });
    let p = g_field.parity;
    (
        ScalarField {
            grid: g,
            values: first,
            parity: p,
        },
        ScalarField {
            grid: g,
            values: second,
            parity: p.times(Parity::Odd),
        },
    )
}

/// Pointwise `d_r(r u_r) + d_z(r u_z)` by central differences.
pub fn weighted_divergence(u_r: &ScalarField, u_z: &ScalarField) -> ScalarField {
    let g = u_r.grid;
    let gr = fill_ghosts(u_r);
    let gz = fill_ghosts(u_z);
    let values = Array2::from_shape_fn((g.nr, g.nz), |(i, j)| {
        let (i, j) = (i as isize, j as isize);
        let ri = g.r(i);
        (g.r(i + 1) * gr.get(i + 1, j) - g.r(i - 1) * gr.get(i - 1, j)) / (2.0 * g.dr)
            + ri * (gz.get(i, j + 1) - gz.get(i, j - 1)) / (2.0 * g.dz)
    });
    ScalarField {
        grid: g,
        values,
        parity: Parity::Even,
    }
}

/// Unweighted grid `L^2` norm `sqrt(sum res^2 dr dz)` of [`weighted_divergence`].
pub fn div_weighted_residual(u_r: &ScalarField, u_z: &ScalarField) -> f64 {
    let g = u_r.grid;
    let res = weighted_divergence(u_r, u_z);
    (res.values.iter().map(|v| v * v).sum::<f64>() * g.dr * g.dz).sqrt()
}

/// Components of the Cartesian gradient of `u_r e_r + u_z e_z`, per cell:
/// `(d_r u_r, d_z u_r, d_r u_z, d_z u_z, u_r / r)`.
///
/// `u_z` need not vanish at the outer wall (only the stream function does),
/// so its radial derivative in the last cell is one-sided.
pub fn poloidal_gradient(u_r: &ScalarField, u_z: &ScalarField) -> [ScalarField; 5] {
    let g = u_r.grid;
    let hoop = ScalarField::from_values(
        g,
        Parity::Even,
        Array2::from_shape_fn((g.nr, g.nz), |(i, j)| u_r.values[[i, j]] / g.r(i as isize)),
    )
    .expect("shape matches grid");
    let mut dr_uz = ddr(u_z);
    let n = g.nr;
    for j in 0..g.nz {
        let f = |i: usize| u_z.values[[i, j]];
        dr_uz.values[[n - 1, j]] = (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * g.dr);
    }
    [ddr(u_r), ddz(u_r), dr_uz, ddz(u_z), hoop]
}

/// Max over cells of `(|grad u_r| + |grad u_z| + |u_r/r|) / |grad u~|`.
///
/// By Cauchy-Schwarz the ratio never exceeds `sqrt(3)`. Cells where the
/// denominator vanishes are skipped; an all-zero input reports 0.
pub fn pointwise_gradient_bound_check(u_r: &ScalarField, u_z: &ScalarField) -> f64 {
    let [a, b, c, d, e] = poloidal_gradient(u_r, u_z);
    let mut worst = 0.0f64;
    for idx in 0..a.values.len() {
        let get = |f: &ScalarField| f.values.as_slice().expect("standard layout")[idx];
        let (ar, az, zr, zz, h) = (get(&a), get(&b), get(&c), get(&d), get(&e));
        let rhs = (ar * ar + az * az + zr * zr + zz * zz + h * h).sqrt();
        if rhs <= 1e-300 {
            continue;
        }
        let lhs = (ar * ar + az * az).sqrt() + (zr * zr + zz * zz).sqrt() + h.abs();
        worst = worst.max(lhs / rhs);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, Grid};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 4.0, 8.0).unwrap()
    }

    fn rel_l2(a: &ScalarField, b: &ScalarField) -> f64 {
        let mut d = a.clone();
        d.values -= &b.values;
        lp_norm(&d, 2.0, 0.0) / lp_norm(b, 2.0, 0.0)
    }

    fn convergence_ratio(err: impl Fn(usize) -> f64) -> f64 {
        err(32) / err(64)
    }

    #[test]
    fn swirl_laplacian_annihilates_r() {
        let g = grid(16);
        let f = ScalarField::from_fn(g, Parity::Odd, |r, _| r);
        let lf = laplacian_swirl(&f).unwrap();
        // the wall row sees the Dirichlet ghost, everything else is exact
        for i in 0..g.nr - 1 {
            for j in 0..g.nz {
                assert!(lf.values[[i, j]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parity_contracts() {
        let g = grid(8);
        let even = ScalarField::zeros(g, Parity::Even);
        let odd = ScalarField::zeros(g, Parity::Odd);
        assert!(matches!(laplacian_swirl(&even), Err(Error::Contract(_))));
        assert!(matches!(laplacian_reform(&odd, 2.0), Err(Error::Contract(_))));
    }

    #[test]
    fn reform_laplacian_polynomials() {
        let g = grid(16);
        let c = ScalarField::from_fn(g, Parity::Even, |_, _| 3.0);
        let r2 = ScalarField::from_fn(g, Parity::Even, |r, _| r * r);
        for a in [2.0, 2.0 * (1.0 - 0.2)] {
            let lc = laplacian_reform(&c, a).unwrap();
            let lr = laplacian_reform(&r2, a).unwrap();
            for i in 0..g.nr - 1 {
                for j in 0..g.nz {
                    assert!(lc.values[[i, j]].abs() < 1e-12);
                    assert!((lr.values[[i, j]] - (4.0 + 2.0 * a)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn swirl_laplacian_second_order() {
        let k = 2.0 * PI / 8.0;
        let f = |r: f64, z: f64| r * (-r * r).exp() * (k * z).sin();
        // (Delta - 1/r^2)(r e^{-r^2}) = (4r^3 - 8r) e^{-r^2}
        let exact = |r: f64, z: f64| ((4.0 * r.powi(3) - 8.0 * r) * (-r * r).exp() - k * k * r * (-r * r).exp()) * (k * z).sin();
        let ratio = convergence_ratio(|n| {
            let g = grid(n);
            let num = laplacian_swirl(&ScalarField::from_fn(g, Parity::Odd, f)).unwrap();
            rel_l2(&num, &ScalarField::from_fn(g, Parity::Odd, exact))
        });
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn reform_laplacian_second_order() {
        let k = 2.0 * PI / 8.0;
        let f = |r: f64, z: f64| (-r * r).exp() * (k * z).cos();
        for a in [2.0, 2.0 * (1.0 - 0.199)] {
            // (d_rr + (1+a)/r d_r) e^{-r^2} = (4r^2 - 2 - 2(1+a)) e^{-r^2}
            let exact = move |r: f64, z: f64| {
                ((4.0 * r * r - 2.0 - 2.0 * (1.0 + a)) - k * k) * (-r * r).exp() * (k * z).cos()
            };
            let ratio = convergence_ratio(|n| {
                let g = grid(n);
                let num = laplacian_reform(&ScalarField::from_fn(g, Parity::Even, f), a).unwrap();
                rel_l2(&num, &ScalarField::from_fn(g, Parity::Even, exact))
            });
            assert!((3.4..=4.6).contains(&ratio), "a = {a}: ratio {ratio}");
        }
    }

    #[test]
    fn advect_examples() {
        let g = Grid::new(16, 128, 4.0, 8.0).unwrap();
        let zero = ScalarField::zeros(g, Parity::Odd);
        let one = ScalarField::from_fn(g, Parity::Even, |_, _| 1.0);
        let c = ScalarField::from_fn(g, Parity::Even, |_, _| 2.5);
        let uz = ScalarField::from_fn(g, Parity::Even, |r, z| r + z);
        assert!(advect(&zero, &uz, &c).max_abs() < 1e-14);

        let k = 2.0 * PI / g.lz;
        let f = ScalarField::from_fn(g, Parity::Even, |_, z| (k * z).sin());
        let num = advect(&zero, &one, &f);
        let exact = ScalarField::from_fn(g, Parity::Even, |_, z| k * (k * z).cos());
        // extrema of sin clip to first order locally
        assert!(rel_l2(&num, &exact) < 0.02);
    }

    #[test]
    fn advect_second_order_on_monotone_profile() {
        let k = 2.0 * PI / 8.0;
        let f = |r: f64, z: f64| (-r * r).exp() * (1.5 + (k * z).cos());
        let ur = |r: f64, z: f64| r * (-r * r / 4.0).exp() * (1.0 + 0.5 * (k * z).sin());
        let exact = |r: f64, z: f64| ur(r, z) * (-2.0 * r) * (-r * r).exp() * (1.5 + (k * z).cos());
        let ratio = convergence_ratio(|n| {
            let g = grid(n);
            let num = advect(
                &ScalarField::from_fn(g, Parity::Odd, ur),
                &ScalarField::zeros(g, Parity::Even),
                &ScalarField::from_fn(g, Parity::Even, f),
            );
            rel_l2(&num, &ScalarField::from_fn(g, Parity::Even, exact))
        });
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn advect_is_convex_under_cfl() {
        let g = grid(24);
        let ur = ScalarField::from_fn(g, Parity::Odd, |r, z| r * (z).sin());
        let uz = ScalarField::from_fn(g, Parity::Even, |r, z| (r * r - 1.0) * (z).cos());
        let f = ScalarField::from_fn(g, Parity::Even, |r, z| ((3.0 * r).sin() * (2.0 * z).cos()).signum() * (r * z).cos().abs());
        let dt = advection_dt_bound(&ur, &uz);
        let adv = advect(&ur, &uz, &f);
        let (lo, hi) = f.values.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        for (v, a) in f.values.iter().zip(adv.values.iter()) {
            let next = v - dt * a;
            assert!(next <= hi + 1e-14 && next >= lo - 1e-14);
        }
    }

    #[test]
    fn curl_examples() {
        let g = grid(16);
        let (a, b) = curl_from_swirl(&ScalarField::from_fn(g, Parity::Odd, |r, _| r));
        assert_eq!(b.parity, Parity::Even);
        assert!(a.max_abs() < 1e-14);
        for i in 0..g.nr - 1 {
            for j in 0..g.nz {
                assert!((b.values[[i, j]] - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn curl_second_order_and_solenoidal() {
        let k = 2.0 * PI / 8.0;
        let f = |r: f64, z: f64| r * (-r * r).exp() * (k * z).cos();
        let e1 = |r: f64, z: f64| k * r * (-r * r).exp() * (k * z).sin();
        let e2 = |r: f64, z: f64| (2.0 - 2.0 * r * r) * (-r * r).exp() * (k * z).cos();
        let errs = |n: usize| {
            let g = grid(n);
            let (a, b) = curl_from_swirl(&ScalarField::from_fn(g, Parity::Odd, f));
            (
                rel_l2(&a, &ScalarField::from_fn(g, Parity::Odd, e1)),
                rel_l2(&b, &ScalarField::from_fn(g, Parity::Even, e2)),
                div_weighted_residual(&a, &b),
            )
        };
        let (a1, b1, d1) = errs(32);
        let (a2, b2, d2) = errs(64);
        for ratio in [a1 / a2, b1 / b2, d1 / d2] {
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn divergence_residual_examples() {
        let g = grid(16);
        let z = ScalarField::zeros(g, Parity::Odd);
        assert_eq!(div_weighted_residual(&z, &z.clone().with_parity(Parity::Even)), 0.0);
        let ur = ScalarField::from_fn(g, Parity::Odd, |r, _| r);
        assert!(div_weighted_residual(&ur, &ScalarField::zeros(g, Parity::Even)) > 1.0);
    }

    #[test]
    fn gradient_bound_examples() {
        let g = grid(32);
        let zero_r = ScalarField::zeros(g, Parity::Odd);
        let zero_z = ScalarField::zeros(g, Parity::Even);
        assert_eq!(pointwise_gradient_bound_check(&zero_r, &zero_z), 0.0);

        let k = 2.0 * PI / 8.0;
        let uz = ScalarField::from_fn(g, Parity::Even, |_, z| (k * z).sin());
        let ratio = pointwise_gradient_bound_check(&zero_r, &uz);
        assert!((ratio - 1.0).abs() < 1e-12, "ratio {ratio}");

        let ur = ScalarField::from_fn(g, Parity::Odd, |r, z| r * (k * z).cos());
        let ratio = pointwise_gradient_bound_check(&ur, &zero_z);
        assert!(ratio <= 3f64.sqrt() + 1e-12 && ratio > 1.0, "ratio {ratio}");
    }

    #[test]
    fn wall_derivative_of_u_z_is_second_order() {
        // u_z = cos(r) does not vanish at r = Rmax
        let err = |n: usize| {
            let g = Grid::new(n, 8, 4.0, 8.0).unwrap();
            let uz = ScalarField::from_fn(g, Parity::Even, |r, _| r.cos());
            let [_, _, dr_uz, _, _] = poloidal_gradient(&ScalarField::zeros(g, Parity::Odd), &uz);
            (dr_uz.values[[n - 1, 0]] + g.r(n as isize - 1).sin()).abs()
        };
        let ratio = err(32) / err(64);
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }
}
