//! Two-dimensional advection–diffusion transport on a uniform Cartesian grid:
//! MUSCL-type upwind fluxes with minmod slopes, central diffusion fluxes,
//! zero-flux walls.

mod cavity;
mod io;
mod moments;

pub use cavity::cavity_velocity;
pub use io::{read_velocity, write_velocity};
pub use moments::{transport_moments, transport_sectional, MomentField, SectionalField};

use crate::error::{Error, Result};

/// Cell `(i, j)` is stored at `j * nx + i`; `j` counts rows upward from `y_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if nx == 0 || ny == 0 || !(x.1 > x.0) || !(y.1 > y.0) {
            return Err(Error::Argument(format!(
                "invalid grid {nx}x{ny} on [{}, {}]x[{}, {}]",
                x.0, x.1, y.0, y.1
            )));
        }
        Ok(Self {
            nx,
            ny,
            x_min: x.0,
            x_max: x.1,
            y_min: y.0,
            y_max: y.1,
            dx: (x.1 - x.0) / nx as f64,
            dy: (y.1 - y.0) / ny as f64,
        })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Cell-centred velocity `(u, z)` and diffusion rate `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub d: Vec<f64>,
}

impl VelocityField {
    pub fn new(grid: &Grid2D, u: Vec<f64>, z: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let n = grid.cells();
        if u.len() != n || z.len() != n || d.len() != n {
            return Err(Error::Argument(format!(
                "velocity arrays must have {n} entries (got {}, {}, {})",
                u.len(),
                z.len(),
                d.len()
            )));
        }
        if u.iter().chain(&z).any(|x| !x.is_finite()) {
            return Err(Error::Argument("velocity has non-finite entries".into()));
        }
        if d.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Argument("diffusion rate must be nonnegative".into()));
        }
        Ok(Self { u, z, d })
    }

    pub fn uniform(grid: &Grid2D, u: f64, z: f64, d: f64) -> Result<Self> {
        let n = grid.cells();
        Self::new(grid, vec![u; n], vec![z; n], vec![d; n])
    }

    pub fn with_diffusion(mut self, d: f64) -> Result<Self> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::Argument("diffusion rate must be nonnegative".into()));
        }
        self.d.fill(d);
        Ok(self)
    }

    /// Largest per-cell discrete divergence of the edge velocities, with
    /// zero normal velocity on the walls.
    pub fn max_divergence(&self, grid: &Grid2D) -> f64 {
        let (nx, ny) = (grid.nx, grid.ny);
        let ue = |i: usize, j: usize| -> f64 {
            // edge between cells i-1 and i
            if i == 0 || i == nx {
                0.0
            } else {
                0.5 * (self.u[grid.index(i - 1, j)] + self.u[grid.index(i, j)])
            }
        };
        let ze = |i: usize, j: usize| -> f64 {
            if j == 0 || j == ny {
                0.0
            } else {
                0.5 * (self.z[grid.index(i, j - 1)] + self.z[grid.index(i, j)])
            }
        };
        let mut worst: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let div = (ue(i + 1, j) - ue(i, j)) / grid.dx + (ze(i, j + 1) - ze(i, j)) / grid.dy;
                worst = worst.max(div.abs());
            }
        }
        worst
    }
}

/// The argument of smallest modulus if all three share a sign, else zero.
pub fn minmod(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// Positivity-preserving step bound, scaled by `safety`.
///
/// The bound `max(A/θ, B/(1-θ)) ≤ 1/Δt` with `A` the advective and `B` the
/// diffusive rate is best at `θ = A/(A+B)`, where it reads `Δt = 1/(A+B)`.
pub fn cfl_spatial(vel: &VelocityField, grid: &Grid2D, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Argument(format!("safety factor {safety} not in (0, 1]")));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let (mut a, mut b, mut c, mut d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let dd = |i: isize, j: isize| -> f64 {
        let i = i.clamp(0, nx as isize - 1) as usize;
        let j = j.clamp(0, ny as isize - 1) as usize;
        vel.d[grid.index(i, j)]
    };
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            if i + 1 < nx {
                a = a.max((vel.u[k] + vel.u[k + 1]).abs());
            }
            if j + 1 < ny {
                b = b.max((vel.z[k] + vel.z[k + nx]).abs());
            }
            let (ii, jj) = (i as isize, j as isize);
            c = c.max(dd(ii + 1, jj) + 2.0 * vel.d[k] + dd(ii - 1, jj));
            d = d.max(dd(ii, jj + 1) + 2.0 * vel.d[k] + dd(ii, jj - 1));
        }
    }
    let advective = (2.0 * a / grid.dx).max(2.0 * b / grid.dy);
    let diffusive = 0.5 * (c / (grid.dx * grid.dx) + d / (grid.dy * grid.dy));
    let rate = advective + diffusive;
    Ok(if rate > 0.0 { safety / rate } else { f64::INFINITY })
}

fn check_step(vel: &VelocityField, grid: &Grid2D, dt: f64) -> Result<()> {
    let limit = cfl_spatial(vel, grid, 1.0)?;
    if !(dt >= 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    Ok(())
}

/// Limited slopes in x and y for every cell and component, with
/// zero-gradient ghost cells.
fn slopes(grid: &Grid2D, data: &[f64], ncomp: usize) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut sx = vec![0.0; data.len()];
    let mut sy = vec![0.0; data.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j) * ncomp;
            let kl = grid.index(i.saturating_sub(1), j) * ncomp;
            let kr = grid.index((i + 1).min(nx - 1), j) * ncomp;
            let kd = grid.index(i, j.saturating_sub(1)) * ncomp;
            let ku = grid.index(i, (j + 1).min(ny - 1)) * ncomp;
            for c in 0..ncomp {
                let f = data[k + c];
                let (l, r) = (data[kl + c], data[kr + c]);
                sx[k + c] = minmod(2.0 * (r - f), 0.5 * (r - l), 2.0 * (f - l));
                let (dn, up) = (data[kd + c], data[ku + c]);
                sy[k + c] = minmod(2.0 * (up - f), 0.5 * (up - dn), 2.0 * (f - dn));
            }
        }
    }
    (sx, sy)
}

/// Increments `Δt · (flux divergence)` for `ncomp` interleaved scalar fields
/// (`data[cell * ncomp + c]`).
pub(crate) fn transport_increments(
    grid: &Grid2D,
    vel: &VelocityField,
    data: &[f64],
    ncomp: usize,
    dt: f64,
) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (sx, sy) = slopes(grid, data, ncomp);
    let mut out = vec![0.0; data.len()];
    let (rx, ry) = (dt / grid.dx, dt / grid.dy);
    for j in 0..ny {
        for i in 0..nx {
            let a = grid.index(i, j);
            if i + 1 < nx {
                let b = a + 1;
                edge_flux(&mut out, data, &sx, ncomp, a, b, &vel.u, &vel.d, grid.dx, rx);
            }
            if j + 1 < ny {
                let b = a + nx;
                edge_flux(&mut out, data, &sy, ncomp, a, b, &vel.z, &vel.d, grid.dy, ry);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn edge_flux(
    out: &mut [f64],
    data: &[f64],
    slope: &[f64],
    ncomp: usize,
    a: usize,
    b: usize,
    vel: &[f64],
    diff: &[f64],
    h: f64,
    ratio: f64,
) {
    let ue = 0.5 * (vel[a] + vel[b]);
    let de = 0.5 * (diff[a] + diff[b]) / h;
    let (pos, neg) = (ue.max(0.0), ue.min(0.0));
    let (ka, kb) = (a * ncomp, b * ncomp);
    for c in 0..ncomp {
        let (fa, fb) = (data[ka + c], data[kb + c]);
        let plus = fa + 0.5 * slope[ka + c];
        let minus = fb - 0.5 * slope[kb + c];
        let flux = ratio * (pos * plus + neg * minus - de * (fb - fa));
        out[ka + c] -= flux;
        out[kb + c] += flux;
    }
}

/// One explicit step of the scalar scheme.
pub fn advect_diffuse_step(
    field: &[f64],
    vel: &VelocityField,
    grid: &Grid2D,
    dt: f64,
) -> Result<Vec<f64>> {
    if field.len() != grid.cells() {
        return Err(Error::Argument(format!(
            "field has {} entries, grid has {} cells",
            field.len(),
            grid.cells()
        )));
    }
    check_step(vel, grid, dt)?;
    let inc = transport_increments(grid, vel, field, 1, dt);
    Ok(field.iter().zip(inc).map(|(f, d)| f + d).collect())
}

/// Sum of `field · ΔxΔy`.
pub fn integrate(field: &[f64], grid: &Grid2D) -> f64 {
    field.iter().sum::<f64>() * grid.cell_area()
}
