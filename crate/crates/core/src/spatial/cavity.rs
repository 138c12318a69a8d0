//! Steady lid-driven cavity flow from the vorticity–streamfunction equations.

use super::{Grid2D, VelocityField};
use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-8;
const MAX_SWEEPS: usize = 200_000;

/// Steady cavity flow on the grid's rectangle with the top wall moving at
/// `lid_speed` in +x. The streamfunction is solved on the cell corners,
/// averaged to the centres, and differentiated centrally with odd reflection
/// across the walls, so that the edge velocities are discretely
/// divergence-free. `D` is left at zero.
pub fn cavity_velocity(grid: &Grid2D, reynolds: f64, lid_speed: f64) -> Result<VelocityField> {
    if !(reynolds > 0.0) || !reynolds.is_finite() {
        return Err(Error::Argument(format!("Reynolds number {reynolds} must be positive")));
    }
    let n = grid.cells();
    if lid_speed == 0.0 {
        return VelocityField::new(grid, vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    }
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::Argument("cavity grid needs at least 2x2 cells".into()));
    }
    let psi = streamfunction(grid, reynolds, lid_speed)?;
    Ok(cell_velocity(grid, &psi))
}

/// Corner streamfunction, `psi[j * (nx + 1) + i]`.
fn streamfunction(grid: &Grid2D, reynolds: f64, lid: f64) -> Result<Vec<f64>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (grid.dx, grid.dy);
    let stride = nx + 1;
    let at = |i: usize, j: usize| j * stride + i;
    let nu = lid.abs() * (grid.x_max - grid.x_min) / reynolds;
    let mut psi = vec![0.0; stride * (ny + 1)];
    let mut omega = vec![0.0; stride * (ny + 1)];
    let (ax, ay) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let diag = 2.0 * (ax + ay);
    let h = hx.min(hy);
    let relax_psi = 2.0 / (1.0 + (std::f64::consts::PI * h).sin());
    let relax_omega = 1.0;

    let mut residual = f64::INFINITY;
    for sweep in 0..MAX_SWEEPS {
        for j in 1..ny {
            for i in 1..nx {
                let k = at(i, j);
                let gs = (ax * (psi[k - 1] + psi[k + 1]) + ay * (psi[k - stride] + psi[k + stride])
                    + omega[k])
                    / diag;
                psi[k] += relax_psi * (gs - psi[k]);
            }
        }
        for i in 1..nx {
            omega[at(i, 0)] = -2.0 * psi[at(i, 1)] * ay;
            omega[at(i, ny)] = -2.0 * (psi[at(i, ny - 1)] + hy * lid) * ay;
        }
        for j in 1..ny {
            omega[at(0, j)] = -2.0 * psi[at(1, j)] * ax;
            omega[at(nx, j)] = -2.0 * psi[at(nx - 1, j)] * ax;
        }
        for j in 1..ny {
            for i in 1..nx {
                let k = at(i, j);
                let u = (psi[k + stride] - psi[k - stride]) / (2.0 * hy);
                let z = -(psi[k + 1] - psi[k - 1]) / (2.0 * hx);
                let gs = (nu * ax * (omega[k - 1] + omega[k + 1])
                    + nu * ay * (omega[k - stride] + omega[k + stride])
                    - u * (omega[k + 1] - omega[k - 1]) / (2.0 * hx)
                    - z * (omega[k + stride] - omega[k - stride]) / (2.0 * hy))
                    / (nu * diag);
                omega[k] += relax_omega * (gs - omega[k]);
            }
        }
        if sweep % 20 == 19 {
            residual = 0.0;
            for j in 1..ny {
                for i in 1..nx {
                    let k = at(i, j);
                    let lap_psi = ax * (psi[k - 1] - 2.0 * psi[k] + psi[k + 1])
                        + ay * (psi[k - stride] - 2.0 * psi[k] + psi[k + stride]);
                    let lap_om = ax * (omega[k - 1] - 2.0 * omega[k] + omega[k + 1])
                        + ay * (omega[k - stride] - 2.0 * omega[k] + omega[k + stride]);
                    let u = (psi[k + stride] - psi[k - stride]) / (2.0 * hy);
                    let z = -(psi[k + 1] - psi[k - 1]) / (2.0 * hx);
                    let adv = u * (omega[k + 1] - omega[k - 1]) / (2.0 * hx)
                        + z * (omega[k + stride] - omega[k - stride]) / (2.0 * hy);
                    // Both residuals as the size of the pointwise correction.
                    let r1 = (lap_psi + omega[k]).abs() / diag;
                    let r2 = (nu * lap_om - adv).abs() / (nu * diag);
                    residual = residual.max(r1 / lid.abs()).max(r2 * h / lid.abs());
                }
            }
            if !residual.is_finite() {
                break;
            }
            if residual < TOLERANCE {
                return Ok(psi);
            }
        }
    }
    Err(Error::NonConvergence { residual })
}

fn cell_velocity(grid: &Grid2D, psi: &[f64]) -> VelocityField {
    let (nx, ny) = (grid.nx, grid.ny);
    let stride = nx + 1;
    let centre = |i: usize, j: usize| -> f64 {
        0.25 * (psi[j * stride + i]
            + psi[j * stride + i + 1]
            + psi[(j + 1) * stride + i]
            + psi[(j + 1) * stride + i + 1])
    };
    // Odd reflection across every wall (ψ = 0 there).
    let ghost = |i: isize, j: isize| -> f64 {
        let (n, m) = (nx as isize, ny as isize);
        let flip = (i < 0 || i >= n) ^ (j < 0 || j >= m);
        let v = centre(i.clamp(0, n - 1) as usize, j.clamp(0, m - 1) as usize);
        if flip {
            -v
        } else {
            v
        }
    };
    let n = grid.cells();
    let (mut u, mut z) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let k = grid.index(i as usize, j as usize);
            u[k] = (ghost(i, j + 1) - ghost(i, j - 1)) / (2.0 * grid.dy);
            z[k] = -(ghost(i + 1, j) - ghost(i - 1, j)) / (2.0 * grid.dx);
        }
    }
    VelocityField {
        u,
        z,
        d: vec![0.0; n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resting_lid_gives_zero_field() {
        let g = Grid2D::unit_square(8).unwrap();
        let v = cavity_velocity(&g, 5.0, 0.0).unwrap();
        assert!(v.u.iter().chain(&v.z).all(|&x| x == 0.0));
        assert!(cavity_velocity(&g, 0.0, 1.0).is_err());
    }

    #[test]
    fn primary_vortex_at_low_reynolds() {
        let g = Grid2D::unit_square(20).unwrap();
        let v = cavity_velocity(&g, 5.0, 1.0).unwrap();
        assert!(v.max_divergence(&g) <= 1e-6 / g.dx);
        // Return flow beneath the lid.
        let centre = |v: &VelocityField| 0.5 * (v.u[g.index(9, 9)] + v.u[g.index(9, 10)]);
        assert!(centre(&v) < 0.0);
        // Flow along the lid, clockwise circulation.
        assert!(v.u[g.index(10, 19)] > 0.0);
        assert!(v.z[g.index(2, 10)] > 0.0 && v.z[g.index(17, 10)] < 0.0);

        // Same sign and similar magnitude on a finer grid.
        let fine = Grid2D::unit_square(40).unwrap();
        let vf = cavity_velocity(&fine, 5.0, 1.0).unwrap();
        let cf = 0.25
            * (vf.u[fine.index(19, 19)]
                + vf.u[fine.index(20, 19)]
                + vf.u[fine.index(19, 20)]
                + vf.u[fine.index(20, 20)]);
        let cc = 0.5 * (v.u[g.index(9, 9)] + v.u[g.index(10, 9)]) * 0.5
            + 0.5 * (v.u[g.index(9, 10)] + v.u[g.index(10, 10)]) * 0.5;
        assert!(cf < 0.0 && (cf - cc).abs() < 0.1 * cf.abs(), "{cf} vs {cc}");
    }

    #[test]
    fn lid_speed_scales_the_field() {
        let g = Grid2D::unit_square(10).unwrap();
        let a = cavity_velocity(&g, 5.0, 1.0).unwrap();
        let b = cavity_velocity(&g, 5.0, 2.0).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((2.0 * x - y).abs() <= 1e-6);
        }
    }
}
