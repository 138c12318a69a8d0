//! Transport of per-cell moment vectors and sectional states.

use rayon::prelude::*;

use super::{check_step, slopes, transport_increments, Grid2D, VelocityField};
use crate::closures::{basis_row, Basis, ClosureKind, Reconstruction};
use crate::error::{Error, Result};
use crate::moment_rhs::{HomogeneousSolver, StepStats};

/// Moment vectors of one closure on every cell, `values[cell * (N+1) + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub order: usize,
    pub basis: Basis,
    pub values: Vec<f64>,
}

impl MomentField {
    pub fn zeros(grid: &Grid2D, order: usize, basis: Basis) -> Self {
        Self {
            order,
            basis,
            values: vec![0.0; grid.cells() * (order + 1)],
        }
    }

    pub fn width(&self) -> usize {
        self.order + 1
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let w = self.width();
        &self.values[c * w..(c + 1) * w]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.values[c * w..(c + 1) * w]
    }

    /// Component `k` on every cell.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.width()).copied().collect()
    }
}

/// Sectional cell averages on every spatial cell, `values[cell * n_v + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionalField {
    pub n_v: usize,
    pub values: Vec<f64>,
}

impl SectionalField {
    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_v..(c + 1) * self.n_v]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.n_v..(c + 1) * self.n_v]
    }
}

/// One transport step of every volume cell of a sectional field.
pub fn transport_sectional(
    field: &mut SectionalField,
    vel: &VelocityField,
    grid: &Grid2D,
    dt: f64,
) -> Result<()> {
    check_step(vel, grid, dt)?;
    let inc = transport_increments(grid, vel, &field.values, field.n_v, dt);
    for (f, d) in field.values.iter_mut().zip(inc) {
        *f += d;
    }
    Ok(())
}

fn in_cell(grid: &Grid2D, c: usize, e: Error) -> Error {
    Error::Cell {
        i: c % grid.nx,
        j: c / grid.nx,
        time: f64::NAN,
        source: Box::new(e),
    }
}

fn is_vacuum(gamma: &[f64]) -> bool {
    gamma.iter().all(|&g| g == 0.0)
}

/// Per-cell closures, in cell order.
fn reconstruct_all(
    field: &MomentField,
    solver: &HomogeneousSolver,
    grid: &Grid2D,
    stats: &mut StepStats,
) -> Result<Vec<Option<Reconstruction>>> {
    let results: Vec<Result<(Option<Reconstruction>, StepStats)>> = (0..grid.cells())
        .into_par_iter()
        .map(|c| {
            let gamma = field.cell(c);
            if is_vacuum(gamma) {
                return Ok((None, StepStats::default()));
            }
            let mut s = StepStats::default();
            let r = solver
                .reconstruct(gamma, &mut s)
                .map_err(|e| in_cell(grid, c, e))?;
            Ok((Some(r), s))
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        let (recon, s) = r?;
        stats.merge(&s);
        out.push(recon);
    }
    Ok(out)
}

/// One transport step of a moment field. Continuous closures transport the
/// reconstruction's values at the quadrature nodes and project the increments
/// back onto the moments; QMOM limits the atom weights.
pub fn transport_moments(
    field: &mut MomentField,
    solver: &HomogeneousSolver,
    vel: &VelocityField,
    grid: &Grid2D,
    dt: f64,
    stats: &mut StepStats,
) -> Result<()> {
    if field.order != solver.order() || field.basis != solver.kind().basis() {
        return Err(Error::Argument("moment field does not match the closure".into()));
    }
    check_step(vel, grid, dt)?;
    if dt == 0.0 {
        return Ok(());
    }
    let recons = reconstruct_all(field, solver, grid, stats)?;
    match solver.kind() {
        ClosureKind::Pn | ClosureKind::Mn => transport_nodal(field, solver, &recons, vel, grid, dt),
        ClosureKind::Qmom => transport_atoms(field, solver, &recons, vel, grid, dt),
    }
    Ok(())
}

fn transport_nodal(
    field: &mut MomentField,
    solver: &HomogeneousSolver,
    recons: &[Option<Reconstruction>],
    vel: &VelocityField,
    grid: &Grid2D,
    dt: f64,
) {
    let rule = solver.plan().rule();
    let nq = rule.len();
    let w = field.width();
    let mut nodes = vec![0.0; grid.cells() * nq];
    for (c, recon) in recons.iter().enumerate() {
        let out = &mut nodes[c * nq..(c + 1) * nq];
        match recon {
            None => {}
            Some(Reconstruction::Polynomial(p)) => {
                for (o, &v) in out.iter_mut().zip(rule.nodes()) {
                    *o = p.evaluate(v);
                }
            }
            Some(Reconstruction::MaxEnt(m)) => {
                for (o, &v) in out.iter_mut().zip(rule.nodes()) {
                    *o = m.evaluate(v);
                }
                if m.regularization > 0.0 {
                    field.cell_mut(c).copy_from_slice(&m.regularized_moments.values);
                }
            }
            Some(Reconstruction::Atomic(_)) => unreachable!("atoms on the nodal path"),
        }
    }
    let inc = transport_increments(grid, vel, &nodes, nq, dt);
    let rows = solver.plan().weighted_rows();
    for c in 0..grid.cells() {
        let gamma = &mut field.values[c * w..(c + 1) * w];
        for (q, d) in inc[c * nq..(c + 1) * nq].iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            for (g, m) in gamma.iter_mut().zip(&rows[q * w..(q + 1) * w]) {
                *g += d * m;
            }
        }
    }
}

fn transport_atoms(
    field: &mut MomentField,
    solver: &HomogeneousSolver,
    recons: &[Option<Reconstruction>],
    vel: &VelocityField,
    grid: &Grid2D,
    dt: f64,
) {
    let n = crate::closures::qmom_atoms(field.order);
    let w = field.width();
    let domain = solver.plan().kernels().domain;
    let cells = grid.cells();
    let mut weights = vec![0.0; cells * n];
    // m(v_α) for every atom, `rows[(cell * n + α) * w + k]`.
    let mut rows = vec![0.0; cells * n * w];
    for (c, recon) in recons.iter().enumerate() {
        for a in 0..n {
            let (wt, v) = match recon {
                Some(Reconstruction::Atomic(r)) => (r.weights[a], r.abscissas[a]),
                _ => (0.0, domain.min),
            };
            weights[c * n + a] = wt;
            let k = (c * n + a) * w;
            basis_row(Basis::Monomial, &domain, v, &mut rows[k..k + w]);
        }
    }
    let (sx, sy) = slopes(grid, &weights, n);
    let old = field.values.clone();
    let mut flux = vec![0.0; w];
    let mut edge = |a: usize, b: usize, ue: f64, de: f64, ratio: f64, s: &[f64], values: &mut [f64]| {
        flux.fill(0.0);
        for al in 0..n {
            let plus = weights[a * n + al] + 0.5 * s[a * n + al];
            let minus = weights[b * n + al] - 0.5 * s[b * n + al];
            let ra = &rows[(a * n + al) * w..(a * n + al + 1) * w];
            let rb = &rows[(b * n + al) * w..(b * n + al + 1) * w];
            for k in 0..w {
                flux[k] += ue.max(0.0) * plus * ra[k] + ue.min(0.0) * minus * rb[k];
            }
        }
        for k in 0..w {
            let f = ratio * (flux[k] - de * (old[b * w + k] - old[a * w + k]));
            values[a * w + k] -= f;
            values[b * w + k] += f;
        }
    };
    let (nx, ny) = (grid.nx, grid.ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = grid.index(i, j);
            if i + 1 < nx {
                let b = a + 1;
                let ue = 0.5 * (vel.u[a] + vel.u[b]);
                let de = 0.5 * (vel.d[a] + vel.d[b]) / grid.dx;
                edge(a, b, ue, de, dt / grid.dx, &sx, &mut field.values);
            }
            if j + 1 < ny {
                let b = a + nx;
                let ze = 0.5 * (vel.z[a] + vel.z[b]);
                let de = 0.5 * (vel.d[a] + vel.d[b]) / grid.dy;
                edge(a, b, ze, de, dt / grid.dy, &sy, &mut field.values);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closures::{wheeler_invert, MomentVector, NewtonParams};
    use crate::quadrature::gauss_lobatto;
    use crate::spatial::{advect_diffuse_step, cfl_spatial};
    use crate::testing::{gaussian, reduced};
    use approx::assert_relative_eq;

    fn rotating(g: &Grid2D) -> VelocityField {
        let n = g.cells();
        let mut u = vec![0.0; n];
        let mut z = vec![0.0; n];
        let psi = |i: isize, j: isize| -> f64 {
            let (nx, ny) = (g.nx as isize, g.ny as isize);
            let s = if (i < 0 || i >= nx) ^ (j < 0 || j >= ny) { -1.0 } else { 1.0 };
            let ii = i.clamp(0, nx - 1) as usize;
            let jj = j.clamp(0, ny - 1) as usize;
            s * (std::f64::consts::PI * g.x(ii)).sin() * (std::f64::consts::PI * g.y(jj)).sin()
        };
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                let k = g.index(i as usize, j as usize);
                u[k] = (psi(i, j + 1) - psi(i, j - 1)) / (2.0 * g.dy);
                z[k] = -(psi(i + 1, j) - psi(i - 1, j)) / (2.0 * g.dx);
            }
        }
        VelocityField::new(g, u, z, vec![0.002; n]).unwrap()
    }

    fn blob(g: &Grid2D, gamma: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = (g.x(i) - 0.35, g.y(j) - 0.4);
                let s = (-(x * x + y * y) / 0.02).exp() + 1e-3;
                out.extend(gamma.iter().map(|v| v * s));
            }
        }
        out
    }

    fn setup(kind: ClosureKind, order: usize) -> (Grid2D, HomogeneousSolver, MomentField, VelocityField) {
        let k = reduced(true, true);
        let q = gauss_lobatto(30, k.domain.interval()).unwrap();
        let solver = HomogeneousSolver::new(kind, &k, &q, order, NewtonParams::default()).unwrap();
        let gamma =
            MomentVector::from_density(kind.basis(), order, &q, k.domain, gaussian(0.5, 0.1));
        let g = Grid2D::unit_square(10).unwrap();
        let field = MomentField {
            order,
            basis: kind.basis(),
            values: blob(&g, &gamma.values),
        };
        let vel = rotating(&g);
        (g, solver, field, vel)
    }

    #[test]
    fn uniform_field_is_unchanged() {
        for kind in [ClosureKind::Pn, ClosureKind::Mn, ClosureKind::Qmom] {
            let (g, solver, field, vel) = setup(kind, 3);
            let first = field.cell(0).to_vec();
            let mut uniform = MomentField {
                values: first.iter().copied().cycle().take(field.values.len()).collect(),
                ..field
            };
            let before = uniform.clone();
            let dt = cfl_spatial(&vel, &g, 1.0).unwrap();
            transport_moments(&mut uniform, &solver, &vel, &g, dt, &mut StepStats::default()).unwrap();
            for (a, b) in uniform.values.iter().zip(&before.values) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{kind}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn still_fluid_is_identity() {
        for kind in [ClosureKind::Pn, ClosureKind::Mn, ClosureKind::Qmom] {
            let (g, solver, mut field, _) = setup(kind, 3);
            let still = VelocityField::uniform(&g, 0.0, 0.0, 0.0).unwrap();
            let before = field.clone();
            transport_moments(&mut field, &solver, &still, &g, 0.1, &mut StepStats::default()).unwrap();
            assert_eq!(field, before);
        }
    }

    #[test]
    fn single_moment_matches_scalar_scheme() {
        let (g, solver, mut field, vel) = setup(ClosureKind::Pn, 0);
        let dt = cfl_spatial(&vel, &g, 0.9).unwrap();
        let scalar = advect_diffuse_step(&field.values, &vel, &g, dt).unwrap();
        transport_moments(&mut field, &solver, &vel, &g, dt, &mut StepStats::default()).unwrap();
        for (a, b) in field.values.iter().zip(&scalar) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn transport_preserves_realizability_and_mass() {
        for kind in [ClosureKind::Mn, ClosureKind::Qmom] {
            let (g, solver, mut field, vel) = setup(kind, 5);
            let dt = cfl_spatial(&vel, &g, 1.0).unwrap();
            let mass = |f: &MomentField| f.component(1).iter().sum::<f64>();
            let m0 = mass(&field);
            let q = solver.plan().rule().clone();
            let domain = solver.plan().kernels().domain;
            for _ in 0..10 {
                transport_moments(&mut field, &solver, &vel, &g, dt, &mut StepStats::default()).unwrap();
                for c in 0..g.cells() {
                    let mv = MomentVector::new(Basis::Monomial, field.cell(c).to_vec(), domain).unwrap();
                    match kind {
                        ClosureKind::Mn => assert!(crate::closures::realizable_q(&mv, &q)),
                        _ => {
                            wheeler_invert(&mv, 3).unwrap();
                        }
                    }
                }
            }
            assert_relative_eq!(mass(&field), m0, max_relative = 1e-10);
        }
    }

    #[test]
    fn sectional_transport_is_componentwise() {
        let g = Grid2D::unit_square(5).unwrap();
        let vel = rotating(&g);
        let dt = cfl_spatial(&vel, &g, 1.0).unwrap();
        let a: Vec<f64> = (0..25).map(|k| (k as f64 * 0.7).cos() + 1.5).collect();
        let b: Vec<f64> = (0..25).map(|k| (k as f64 * 0.3).sin() + 1.1).collect();
        let mut field = SectionalField {
            n_v: 2,
            values: a.iter().zip(&b).flat_map(|(x, y)| [*x, *y]).collect(),
        };
        transport_sectional(&mut field, &vel, &g, dt).unwrap();
        let a2 = advect_diffuse_step(&a, &vel, &g, dt).unwrap();
        let b2 = advect_diffuse_step(&b, &vel, &g, dt).unwrap();
        for c in 0..25 {
            assert_eq!(field.cell(c), &[a2[c], b2[c]]);
        }
    }
}
