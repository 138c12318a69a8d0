//! Gaussian initial data in solver units.

use statrs::function::erf::erf;

use super::config::{ExperimentConfig, SpatialConfig};
use crate::closures::{Basis, MomentVector};
use crate::error::Result;
use crate::sectional::{SectionalState, VolumeGrid};
use crate::spatial::Grid2D;

/// Lobatto points per sectional cell when averaging the initial density.
const CELL_NODES: usize = 5;

fn phi(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Initial number density as a function of solver volume.
pub fn volume_density(config: &ExperimentConfig) -> impl Fn(f64) -> f64 {
    let p = config.initial_parameters();
    let s = config.scales();
    let mean = p.v0 / s.volume;
    let width = p.sigma / s.volume;
    let height = p.n0 / s.number / ((2.0 * std::f64::consts::PI).sqrt() * width);
    move |v| {
        let z = (v - mean) / width;
        height * (-0.5 * z * z).exp()
    }
}

/// `γ_0` of the initial density restricted to the volume domain, in closed form.
pub fn truncated_number(config: &ExperimentConfig) -> f64 {
    let p = config.initial_parameters();
    let s = config.scales();
    let (lo, hi) = (config.volume.v_min, config.volume.v_max);
    p.n0 / s.number * (phi((hi - p.v0) / p.sigma) - phi((lo - p.v0) / p.sigma))
}

/// Moments of the initial density in `basis`, integrated with the configured rule.
pub fn initial_moments(config: &ExperimentConfig, basis: Basis) -> Result<MomentVector> {
    let rule = config.rule()?;
    let domain = config.kernels()?.domain;
    Ok(MomentVector::from_density(
        basis,
        config.order,
        &rule,
        domain,
        volume_density(config),
    ))
}

pub fn initial_sectional(config: &ExperimentConfig) -> Result<(VolumeGrid, SectionalState)> {
    let domain = config.kernels()?.domain;
    let grid = VolumeGrid::new(domain, config.numerics.n_v)?;
    let state = grid.cell_averages(volume_density(config), CELL_NODES)?;
    Ok((grid, state))
}

/// Cell averages of the spatial factor of the cavity initial condition,
/// `exp(-|x - c|² / (2 w²)) / (4 π² w²)`.
pub fn spatial_profile(spatial: &SpatialConfig, grid: &Grid2D) -> Vec<f64> {
    let w = spatial.width;
    let [cx, cy] = spatial.center;
    let mass = |lo: f64, hi: f64, c: f64| phi((hi - c) / w) - phi((lo - c) / w);
    let mut out = Vec::with_capacity(grid.cells());
    for j in 0..grid.ny {
        let y0 = grid.y_min + j as f64 * grid.dy;
        let my = mass(y0, y0 + grid.dy, cy);
        for i in 0..grid.nx {
            let x0 = grid.x_min + i as f64 * grid.dx;
            let mx = mass(x0, x0 + grid.dx, cx);
            // ∫∫ = 2π w² · mx · my
            out.push(mx * my / (2.0 * std::f64::consts::PI * grid.dx * grid.dy));
        }
    }
    out
}

/// Integral of the spatial factor over the grid domain, in closed form.
pub fn spatial_mass(spatial: &SpatialConfig, grid: &Grid2D) -> f64 {
    let w = spatial.width;
    let [cx, cy] = spatial.center;
    let mx = phi((grid.x_max - cx) / w) - phi((grid.x_min - cx) / w);
    let my = phi((grid.y_max - cy) / w) - phi((grid.y_min - cy) / w);
    mx * my / (2.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{ExperimentKind, Profile};
    use crate::moment_rhs::mass_moment;
    use crate::spatial::integrate;

    fn desk(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig::preset(kind, Profile::Desk)
    }

    #[test]
    fn number_matches_closed_form() {
        let c = desk(ExperimentKind::Breakage);
        let exact = truncated_number(&c);
        // The Gaussian is centred in the domain with width 0.1 L: almost no mass is cut.
        assert!(exact > 0.9999 && exact < 1.0);
        for basis in [Basis::Monomial, Basis::Legendre] {
            let g = initial_moments(&c, basis).unwrap();
            assert!((g.values[0] / exact - 1.0).abs() < 1e-12, "{basis:?}");
        }
        let (grid, state) = initial_sectional(&c).unwrap();
        let g0 = crate::sectional::zeroth_moment(&state, &grid);
        assert!((g0 / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_is_the_mean_volume() {
        let c = desk(ExperimentKind::Aggregation);
        let g = initial_moments(&c, Basis::Legendre).unwrap();
        let m = mass_moment(&g.values, Basis::Legendre, &g.domain);
        let p = c.initial_parameters();
        // Symmetric truncation: the first moment is γ0 · v0 exactly.
        assert!((m / (g.values[0] * p.v0 / c.volume.v_max) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spatial_integral_is_product_of_masses() {
        let c = desk(ExperimentKind::Cavity);
        let s = c.spatial.clone().unwrap();
        let grid = c.grid().unwrap().unwrap();
        let field = spatial_profile(&s, &grid);
        let total = integrate(&field, &grid);
        let exact = spatial_mass(&s, &grid);
        assert!((total / exact - 1.0).abs() < 1e-12);
        // Unnormalized prefactor: 1/(2π) of the truncated Gaussian mass.
        assert!((exact * 2.0 * std::f64::consts::PI - 1.0).abs() < 1e-3);
    }
}
