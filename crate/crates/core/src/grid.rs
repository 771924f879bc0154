//! Cell-centered cylindrical `(r, z)` grid, scalar fields with axis parity,
//! ghost cells and cylindrical quadrature.
//!
//! Radii are `r_i = (i + 1/2) dr`, so no unknown sits on the axis. The axis
//! is handled by reflecting values with the field's parity, the outer wall
//! `r = Rmax` carries a homogeneous Dirichlet condition, and `z` is periodic.
//! All integrals use the midpoint rule with the measure `2 pi r dr dz`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Number of ghost layers on every side of a [`GhostedField`].
pub const GHOSTS: usize = 2;

/// Floor applied to `|f|` before fractional powers.
pub const POWER_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nr: usize,
    pub nz: usize,
    pub rmax: f64,
    pub lz: f64,
    pub dr: f64,
    pub dz: f64,
}

impl Grid {
    pub fn new(nr: usize, nz: usize, rmax: f64, lz: f64) -> Result<Self> {
        if nr < 8 || nz < 8 {
            return Err(Error::domain(format!(
                "grid needs at least 8 cells per direction, got {nr}x{nz}"
            )));
        }
        if !(rmax > 0.0 && rmax.is_finite() && lz > 0.0 && lz.is_finite()) {
            return Err(Error::domain(format!(
                "grid extents must be positive, got Rmax = {rmax}, Lz = {lz}"
            )));
        }
        Ok(Self {
            nr,
            nz,
            rmax,
            lz,
            dr: rmax / nr as f64,
            dz: lz / nz as f64,
        })
    }

    /// Radius of cell row `i`. Negative indices give the mirrored ghost radii.
    #[inline]
    pub fn r(&self, i: isize) -> f64 {
        (i as f64 + 0.5) * self.dr
    }

    #[inline]
    pub fn z(&self, j: isize) -> f64 {
        (j as f64 + 0.5) * self.dz
    }

    pub fn r_centers(&self) -> Vec<f64> {
        (0..self.nr).map(|i| self.r(i as isize)).collect()
    }

    /// Volume `2 pi r_i dr dz` of a cell in row `i`.
    #[inline]
    pub fn cell_volume(&self, i: usize) -> f64 {
        2.0 * PI * self.r(i as isize) * self.dr * self.dz
    }

    /// Volume of the cylinder `r < Rmax`, one period in `z`.
    pub fn volume(&self) -> f64 {
        PI * self.rmax * self.rmax * self.lz
    }

    /// Characteristic mesh size `max(dr, dz)`.
    pub fn h(&self) -> f64 {
        self.dr.max(self.dz)
    }

    /// Same extents with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Grid::new(self.nr * factor, self.nz * factor, self.rmax, self.lz)
    }
}

/// Behavior of a cylindrical component under `r -> -r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "EVEN",
            Parity::Odd => "ODD",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "EVEN" => Some(Parity::Even),
            "ODD" => Some(Parity::Odd),
            _ => None,
        }
    }

    /// Parity of a product of two components.
    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// A scalar sampled at the cell centers of a [`Grid`], indexed `[[i, j]]`
/// with `i` radial and `j` axial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Array2<f64>,
    pub parity: Parity,
}

impl ScalarField {
    pub fn zeros(grid: Grid, parity: Parity) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.nr, grid.nz)),
            parity,
        }
    }

    pub fn from_fn(grid: Grid, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nr, grid.nz), |(i, j)| {
            f(grid.r(i as isize), grid.z(j as isize))
        });
        Self {
            grid,
            values,
            parity,
        }
    }

    pub fn from_values(grid: Grid, parity: Parity, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.nr, grid.nz) {
            return Err(Error::contract(format!(
                "value array {:?} does not match grid {}x{}",
                values.dim(),
                grid.nr,
                grid.nz
            )));
        }
        Ok(Self {
            grid,
            values,
            parity,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise `r^power * f`, with the parity shifted accordingly for odd
    /// integer powers.
    pub fn times_r_pow(&self, power: f64, parity: Parity) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        out.parity = parity;
        for ((i, _), v) in out.values.indexed_iter_mut() {
            *v *= g.r(i as isize).powf(power);
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.mapv_inplace(|v| v * c);
        out
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        self.grid == other.grid
    }
}

/// A field padded with [`GHOSTS`] layers per side, filled from the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostedField {
    pub grid: Grid,
    pub parity: Parity,
    data: Array2<f64>,
}

impl GhostedField {
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[[(i + GHOSTS as isize) as usize, (j + GHOSTS as isize) as usize]]
    }

    /// Interior values, without ghosts.
    pub fn interior(&self) -> ScalarField {
        let (nr, nz) = (self.grid.nr, self.grid.nz);
        let values = self
            .data
            .slice(ndarray::s![GHOSTS..GHOSTS + nr, GHOSTS..GHOSTS + nz])
            .to_owned();
        ScalarField {
            grid: self.grid,
            values,
            parity: self.parity,
        }
    }

    /// Recompute every ghost value from the current interior.
    pub fn refill(&mut self) {
        let g = GHOSTS;
        let (nr, nz) = (self.grid.nr, self.grid.nz);
        for i in g..g + nr {
            for k in 0..g {
                self.data[[i, k]] = self.data[[i, nz + k]];
                self.data[[i, g + nz + k]] = self.data[[i, g + k]];
            }
        }
        let sign = self.parity.sign();
        for j in 0..nz + 2 * g {
            for k in 0..g {
                // axis: ghost row -1-k mirrors interior row k
                self.data[[g - 1 - k, j]] = sign * self.data[[g + k, j]];
                // r = Rmax: odd reflection about the wall
                self.data[[g + nr + k, j]] = -self.data[[g + nr - 1 - k, j]];
            }
        }
    }
}

/// Pad `f` with parity-reflected axis ghosts, Dirichlet-0 wall ghosts and
/// periodic `z` ghosts.
pub fn fill_ghosts(f: &ScalarField) -> GhostedField {
    let g = GHOSTS;
    let (nr, nz) = (f.grid.nr, f.grid.nz);
    let mut data = Array2::zeros((nr + 2 * g, nz + 2 * g));
    data.slice_mut(ndarray::s![g..g + nr, g..g + nz])
        .assign(&f.values);
    let mut out = GhostedField {
        grid: f.grid,
        parity: f.parity,
        data,
    };
    out.refill();
    out
}

/// `|| r^weight_power f ||_{L^p}` over the cylinder with measure `2 pi r dr dz`.
/// `p = f64::INFINITY` gives the grid maximum.
pub fn lp_norm(f: &ScalarField, p: f64, weight_power: f64) -> f64 {
    let g = &f.grid;
    let weights: Vec<f64> = (0..g.nr)
        .map(|i| {
            if weight_power == 0.0 {
                1.0
            } else {
                g.r(i as isize).powf(weight_power)
            }
        })
        .collect();
    if p.is_infinite() {
        return f
            .values
            .indexed_iter()
            .fold(0.0, |m, ((i, _), v)| m.max((weights[i] * v).abs()));
    }
    let mut total = 0.0;
    for (i, row) in f.values.outer_iter().enumerate() {
        let w = weights[i];
        let row_sum: f64 = row.iter().map(|v| (w * v).abs().powf(p)).sum();
        total += row_sum * g.cell_volume(i);
    }
    total.powf(1.0 / p)
}

/// `|| f ||_{L^p}^p` (no root), the form that enters energy functionals.
pub fn lp_norm_pow(f: &ScalarField, p: f64) -> f64 {
    let g = &f.grid;
    let mut total = 0.0;
    for (i, row) in f.values.outer_iter().enumerate() {
        let row_sum: f64 = row.iter().map(|v| v.abs().powf(p)).sum();
        total += row_sum * g.cell_volume(i);
    }
    total
}

/// `|| grad |f|^alpha ||_{L^2}^2` by central differences of `|f|^alpha`.
///
/// The gradient is taken in `(r, z)`; an axisymmetric scalar has no
/// azimuthal derivative.
pub fn grad_power_norm_sq(f: &ScalarField, alpha: f64) -> f64 {
    let gf = fill_ghosts(f);
    let g = f.grid;
    let pw = |i: isize, j: isize| gf.get(i, j).abs().max(POWER_FLOOR).powf(alpha);
    let mut total = 0.0;
    for i in 0..g.nr as isize {
        let mut row = 0.0;
        for j in 0..g.nz as isize {
            let dr = (pw(i + 1, j) - pw(i - 1, j)) / (2.0 * g.dr);
            let dz = (pw(i, j + 1) - pw(i, j - 1)) / (2.0 * g.dz);
            row += dr * dr + dz * dz;
        }
        total += row * g.cell_volume(i as usize);
    }
    total
}

/// `|| grad |f|^alpha ||_{L^2}`.
pub fn grad_power_norm(f: &ScalarField, alpha: f64) -> f64 {
    grad_power_norm_sq(f, alpha).sqrt()
}

const SNAPSHOT_MAGIC: &str = "SWIRLMHD1";

/// Write a field as an ASCII header line followed by `Nr * Nz` little-endian
/// `f64` values, `r` varying fastest.
pub fn write_snapshot<W: Write>(
    mut out: W,
    field: &ScalarField,
    time: f64,
    name: &str,
) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::domain(format!(
            "snapshot name `{name}` must be a non-empty token"
        )));
    }
    let g = &field.grid;
    writeln!(
        out,
        "{SNAPSHOT_MAGIC} {} {} {:?} {:?} {:?} {} {}",
        g.nr,
        g.nz,
        g.rmax,
        g.lz,
        time,
        name,
        field.parity.as_str()
    )?;
    let mut buf = Vec::with_capacity(8 * g.nr * g.nz);
    for j in 0..g.nz {
        for i in 0..g.nr {
            buf.extend_from_slice(&field.values[[i, j]].to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// A snapshot read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: ScalarField,
    pub time: f64,
    pub name: String,
}

pub fn read_snapshot<R: BufRead>(mut input: R) -> Result<Snapshot> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 8 || tokens[0] != SNAPSHOT_MAGIC {
        return Err(Error::Format(format!(
            "bad snapshot header `{}`",
            header.trim_end()
        )));
    }
    let bad = |what: &str| Error::Format(format!("bad snapshot header field {what}"));
    let nr: usize = tokens[1].parse().map_err(|_| bad("Nr"))?;
    let nz: usize = tokens[2].parse().map_err(|_| bad("Nz"))?;
    let rmax: f64 = tokens[3].parse().map_err(|_| bad("Rmax"))?;
    let lz: f64 = tokens[4].parse().map_err(|_| bad("Lz"))?;
    let time: f64 = tokens[5].parse().map_err(|_| bad("time"))?;
    let name = tokens[6].to_string();
    let parity = Parity::parse(tokens[7]).ok_or_else(|| bad("parity"))?;
    let grid = Grid::new(nr, nz, rmax, lz)?;

    let mut bytes = vec![0u8; 8 * nr * nz];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::Format("snapshot payload shorter than Nr*Nz doubles".into()))?;
    let mut values = Array2::zeros((nr, nz));
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        let (i, j) = (k % nr, k / nr);
        values[[i, j]] = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    Ok(Snapshot {
        field: ScalarField {
            grid,
            values,
            parity,
        },
        time,
        name,
    })
}
