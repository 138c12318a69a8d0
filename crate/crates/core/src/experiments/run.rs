//! Time integration of the configured experiment.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::initial::{initial_moments, initial_sectional, spatial_profile};
use super::report::RunReport;
use crate::closures::{realizable_q, Basis, ClosureKind, MomentVector};
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::moment_rhs::{mass_moment, HomogeneousSolver, StepStats};
use crate::quadrature::QuadratureRule;
use crate::sectional::{mass, zeroth_moment, FvsOperator, SectionalState, VolumeGrid};
use crate::spatial::{
    cavity_velocity, cfl_spatial, integrate, read_velocity, transport_moments, transport_sectional,
    Grid2D, MomentField, SectionalField, VelocityField,
};

/// Runs the experiment; a failure is returned as an error without output.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let mut report = RunReport::new(config.kind, config.closure, config.order);
    simulate(config, &mut report)?;
    Ok(report)
}

/// Runs the experiment and keeps whatever was recorded before a failure.
pub fn run_partial(config: &ExperimentConfig) -> (RunReport, Option<Error>) {
    let mut report = RunReport::new(config.kind, config.closure, config.order);
    match simulate(config, &mut report) {
        Ok(()) => (report, None),
        Err(e) => {
            report.failure = Some(e.to_string());
            (report, Some(e))
        }
    }
}

fn simulate(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    config.validate()?;
    let start = Instant::now();
    let kernels = config.kernels()?;
    let rule = config.rule()?;
    let result = match (config.kind, config.closure.closure()) {
        (ExperimentKind::Cavity, closure) => cavity(config, &kernels, &rule, closure, report),
        (_, None) => homogeneous_fvs(config, &kernels, report),
        (_, Some(kind)) => homogeneous_moments(config, &kernels, &rule, kind, report),
    };
    report.timings.total = start.elapsed().as_secs_f64();
    result
}

/// Output times `0, Δt, 2Δt, .., T`.
fn schedule(config: &ExperimentConfig) -> Vec<f64> {
    let n = config.output_steps();
    let (dt, t_end) = (config.numerics.dt, config.numerics.t_end);
    (0..=n).map(|k| if k == n { t_end } else { k as f64 * dt }).collect()
}

fn solver(
    config: &ExperimentConfig,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    kind: ClosureKind,
) -> Result<HomogeneousSolver> {
    HomogeneousSolver::new(kind, kernels, rule, config.order, config.newton.clone())
}

fn check_cell(
    kind: ClosureKind,
    gamma: &[f64],
    kernels: &KernelSet,
    rule: &QuadratureRule,
) -> bool {
    match kind {
        ClosureKind::Mn => MomentVector::new(Basis::Monomial, gamma.to_vec(), kernels.domain)
            .map(|m| realizable_q(&m, rule))
            .unwrap_or(false),
        _ => true,
    }
}

fn homogeneous_moments(
    config: &ExperimentConfig,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    kind: ClosureKind,
    report: &mut RunReport,
) -> Result<()> {
    let solver = solver(config, kernels, rule, kind)?;
    let basis = kind.basis();
    let mut gamma = initial_moments(config, basis)?.values;
    let times = schedule(config);
    let safety = config.numerics.safety;
    let record = |report: &mut RunReport, t: f64, gamma: &[f64]| {
        report.times.push(t);
        report.number.push(gamma[0]);
        report.mass.push(mass_moment(gamma, basis, &kernels.domain));
    };
    record(report, times[0], &gamma);
    for w in times.windows(2) {
        let mut stats = StepStats::default();
        let outcome = solver.advance(&mut gamma, w[1] - w[0], safety, &mut stats);
        report.counters.absorb(&stats);
        report.timings.closure += stats.closure_time.as_secs_f64();
        report.timings.source += stats.source_time.as_secs_f64();
        outcome.map_err(|e| e.at_time(w[0]))?;
        if config.numerics.check_realizability && kind == ClosureKind::Mn {
            report.checks.realizability_tested += 1;
            if !check_cell(kind, &gamma, kernels, rule) {
                report.checks.realizability_failed += 1;
            }
        }
        record(report, w[1], &gamma);
    }
    if kind == ClosureKind::Qmom {
        // The final state must still invert.
        solver
            .reconstruct(&gamma, &mut StepStats::default())
            .map_err(|e| e.at_time(config.numerics.t_end))?;
    }
    Ok(())
}

fn homogeneous_fvs(config: &ExperimentConfig, kernels: &KernelSet, report: &mut RunReport) -> Result<()> {
    let (grid, mut state) = initial_sectional(config)?;
    let op = FvsOperator::new(&grid, kernels);
    let times = schedule(config);
    let record = |report: &mut RunReport, t: f64, s: &SectionalState| {
        report.times.push(t);
        report.number.push(zeroth_moment(s, &grid));
        report.mass.push(mass(s, &grid));
    };
    record(report, times[0], &state);
    for w in times.windows(2) {
        let start = Instant::now();
        let steps = op.advance(&mut state, w[1] - w[0]).map_err(|e| e.at_time(w[0]));
        report.timings.source += start.elapsed().as_secs_f64();
        report.counters.substeps += steps?;
        record(report, w[1], &state);
    }
    Ok(())
}

fn velocity(config: &ExperimentConfig, grid: &Grid2D) -> Result<VelocityField> {
    let s = config.spatial.as_ref().expect("validated cavity config");
    let vel = match &s.velocity_files {
        Some([u, z]) => read_velocity(u, z, grid, s.diffusion)?,
        None => cavity_velocity(grid, s.reynolds, s.lid_speed)?.with_diffusion(s.diffusion)?,
    };
    Ok(vel)
}

fn in_cell(grid: &Grid2D, c: usize, time: f64, e: Error) -> Error {
    Error::Cell {
        i: c % grid.nx,
        j: c / grid.nx,
        time,
        source: Box::new(e),
    }
}

/// State of a cavity run: one moment vector or sectional state per cell.
enum CavityState {
    Moments {
        solver: HomogeneousSolver,
        field: MomentField,
    },
    Sectional {
        op: FvsOperator,
        field: SectionalField,
    },
}

impl CavityState {
    fn number(&self) -> Vec<f64> {
        match self {
            CavityState::Moments { field, .. } => field.component(0),
            CavityState::Sectional { op, field } => field
                .values
                .chunks(field.n_v)
                .map(|f| op.grid().dv * f.iter().sum::<f64>())
                .collect(),
        }
    }

    fn mass(&self, domain: &crate::kernels::VolumeDomain) -> Vec<f64> {
        match self {
            CavityState::Moments { solver, field } => field
                .values
                .chunks(field.width())
                .map(|g| mass_moment(g, solver.kind().basis(), domain))
                .collect(),
            CavityState::Sectional { op, field } => {
                let g: &VolumeGrid = op.grid();
                field
                    .values
                    .chunks(field.n_v)
                    .map(|f| g.dv * f.iter().zip(&g.centers).map(|(f, v)| f * v).sum::<f64>())
                    .collect()
            }
        }
    }
}

fn cavity(
    config: &ExperimentConfig,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    closure: Option<ClosureKind>,
    report: &mut RunReport,
) -> Result<()> {
    let s = config.spatial.as_ref().expect("validated cavity config");
    let grid = config.grid()?.expect("validated cavity config");
    let start = Instant::now();
    let vel = velocity(config, &grid)?;
    report.timings.flow = start.elapsed().as_secs_f64();

    let profile = spatial_profile(s, &grid);
    let mut state = match closure {
        Some(kind) => {
            let solver = solver(config, kernels, rule, kind)?;
            let gamma = initial_moments(config, kind.basis())?.values;
            let mut field = MomentField::zeros(&grid, config.order, kind.basis());
            for (c, p) in profile.iter().enumerate() {
                for (x, g) in field.cell_mut(c).iter_mut().zip(&gamma) {
                    *x = p * g;
                }
            }
            CavityState::Moments { solver, field }
        }
        None => {
            let (vgrid, init) = initial_sectional(config)?;
            let n_v = vgrid.n_v;
            let mut values = Vec::with_capacity(grid.cells() * n_v);
            for p in &profile {
                values.extend(init.f.iter().map(|f| p * f));
            }
            CavityState::Sectional {
                op: FvsOperator::new(&vgrid, kernels),
                field: SectionalField { n_v, values },
            }
        }
    };

    let domain = kernels.domain;
    let record = |report: &mut RunReport, t: f64, state: &CavityState| {
        let number = state.number();
        report.times.push(t);
        report.number.push(integrate(&number, &grid));
        report.mass.push(integrate(&state.mass(&domain), &grid));
        report.fields.push(number);
    };
    record(report, 0.0, &state);

    let safety = config.numerics.safety;
    let limit = cfl_spatial(&vel, &grid, safety)?;
    let times = schedule(config);
    for w in times.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let substeps = if limit.is_finite() { (h / limit).ceil().max(1.0) as usize } else { 1 };
        let tau = h / substeps as f64;

        let start = Instant::now();
        for _ in 0..substeps {
            let before = integrate(&state.number(), &grid);
            match &mut state {
                CavityState::Moments { solver, field } => {
                    let mut stats = StepStats::default();
                    let outcome = transport_moments(field, solver, &vel, &grid, tau, &mut stats);
                    report.counters.absorb(&stats);
                    report.timings.closure += stats.closure_time.as_secs_f64();
                    outcome.map_err(|e| e.at_time(t))?;
                }
                CavityState::Sectional { field, .. } => {
                    transport_sectional(field, &vel, &grid, tau).map_err(|e| e.at_time(t))?;
                    let low = field.values.iter().copied().fold(f64::INFINITY, f64::min);
                    let seen = report.checks.min_after_transport.get_or_insert(low);
                    *seen = seen.min(low);
                }
            }
            let after = integrate(&state.number(), &grid);
            let drift = if before > 0.0 { (after / before - 1.0).abs() } else { 0.0 };
            let seen = report.checks.max_transport_drift.get_or_insert(drift);
            *seen = seen.max(drift);
        }
        report.counters.transport_substeps += substeps;
        report.timings.transport += start.elapsed().as_secs_f64();

        if s.reactions {
            react(config, &grid, &mut state, t, h, safety, kernels, rule, report)?;
        }
        record(report, w[1], &state);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn react(
    config: &ExperimentConfig,
    grid: &Grid2D,
    state: &mut CavityState,
    t: f64,
    h: f64,
    safety: f64,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    report: &mut RunReport,
) -> Result<()> {
    let check = config.numerics.check_realizability;
    match state {
        CavityState::Moments { solver, field } => {
            let w = field.width();
            let kind = solver.kind();
            let solver = &*solver;
            let results: Vec<Result<(StepStats, bool)>> = field
                .values
                .par_chunks_mut(w)
                .enumerate()
                .map(|(c, gamma)| {
                    let mut stats = StepStats::default();
                    if gamma.iter().all(|&g| g == 0.0) {
                        return Ok((stats, true));
                    }
                    solver
                        .advance(gamma, h, safety, &mut stats)
                        .map_err(|e| in_cell(grid, c, t, e))?;
                    if kind == ClosureKind::Qmom {
                        solver
                            .reconstruct(gamma, &mut stats)
                            .map_err(|e| in_cell(grid, c, t + h, e))?;
                    }
                    let ok = !check || check_cell(kind, gamma, kernels, rule);
                    Ok((stats, ok))
                })
                .collect();
            for r in results {
                let (stats, ok) = r?;
                report.counters.absorb(&stats);
                report.timings.closure += stats.closure_time.as_secs_f64();
                report.timings.source += stats.source_time.as_secs_f64();
                if check && kind == ClosureKind::Mn {
                    report.checks.realizability_tested += 1;
                    report.checks.realizability_failed += usize::from(!ok);
                }
            }
        }
        CavityState::Sectional { op, field } => {
            let start = Instant::now();
            let n_v = field.n_v;
            let op = &*op;
            let results: Vec<Result<usize>> = field
                .values
                .par_chunks_mut(n_v)
                .enumerate()
                .map(|(c, f)| {
                    let mut s = SectionalState { f: f.to_vec() };
                    let steps = op.advance(&mut s, h).map_err(|e| in_cell(grid, c, t, e))?;
                    f.copy_from_slice(&s.f);
                    Ok(steps)
                })
                .collect();
            for r in results {
                report.counters.substeps += r?;
            }
            report.timings.source += start.elapsed().as_secs_f64();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{Method, Profile};

    fn quick(kind: ExperimentKind, method: Method, order: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(kind, Profile::Desk);
        c.closure = method;
        c.order = order;
        c.numerics.n_q = 20;
        c.numerics.n_v = 100;
        c.numerics.t_end = 0.2;
        c.numerics.dt = 0.05;
        if let Some(s) = &mut c.spatial {
            s.nx = 8;
            s.ny = 8;
        }
        c
    }

    #[test]
    fn output_schedule() {
        let mut c = quick(ExperimentKind::Breakage, Method::Pn, 2);
        assert_eq!(schedule(&c), vec![0.0, 0.05, 0.1, 0.15000000000000002, 0.2]);
        c.numerics.t_end = 0.12;
        let s = schedule(&c);
        assert_eq!(s.len(), 4);
        assert_eq!(*s.last().unwrap(), 0.12);
    }

    #[test]
    fn zero_breakage_keeps_number() {
        for method in [Method::Pn, Method::Mn, Method::Qmom, Method::Fvs] {
            let mut c = quick(ExperimentKind::Breakage, method, 3);
            c.breakage.rate_scale = 0.0;
            let r = run(&c).unwrap();
            assert!(RunReport::drift(&r.number) < 1e-14, "{method}");
        }
    }

    #[test]
    fn breakage_runs_conserve_mass() {
        for method in [Method::Pn, Method::Mn, Method::Qmom, Method::Fvs] {
            let r = run(&quick(ExperimentKind::Breakage, method, 3)).unwrap();
            assert_eq!(r.times.len(), 5);
            // Continuous closures integrate the sources with the quadrature rule.
            let tol = if matches!(method, Method::Pn | Method::Mn) { 1e-6 } else { 1e-12 };
            assert!(RunReport::drift(&r.mass) < tol, "{method}: {}", RunReport::drift(&r.mass));
            assert!(r.number.last() > r.number.first());
        }
    }

    #[test]
    fn aggregation_number_decreases() {
        for method in [Method::Pn, Method::Mn, Method::Qmom, Method::Fvs] {
            let r = run(&quick(ExperimentKind::Aggregation, method, 3)).unwrap();
            assert!(r.number.windows(2).all(|w| w[1] <= w[0]), "{method}: {:?}", r.number);
            assert!(r.number.last() < r.number.first());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let c = quick(ExperimentKind::Cavity, Method::Mn, 2);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.fields, b.fields);
        assert_eq!(a.mass, b.mass);
    }

    #[test]
    fn transport_only_cavity_conserves_number() {
        for method in [Method::Pn, Method::Mn, Method::Qmom, Method::Fvs] {
            let mut c = quick(ExperimentKind::Cavity, method, 3);
            c.spatial.as_mut().unwrap().reactions = false;
            let r = run(&c).unwrap();
            assert!(r.checks.max_transport_drift.unwrap() < 1e-12, "{method}");
            assert!(r.fields.iter().flatten().all(|&g| g >= 0.0));
            if method == Method::Fvs {
                assert!(r.checks.min_after_transport.unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn cavity_reactions_change_number() {
        for method in [Method::Qmom, Method::Fvs] {
            let r = run(&quick(ExperimentKind::Cavity, method, 3)).unwrap();
            assert_eq!(r.fields.len(), r.times.len());
            assert!(r.number.last() != r.number.first(), "{method}");
        }
    }

    #[test]
    fn realizability_check_counts_cells() {
        let mut c = quick(ExperimentKind::Breakage, Method::Mn, 3);
        c.numerics.check_realizability = true;
        let r = run(&c).unwrap();
        assert_eq!(r.checks.realizability_tested, 4);
        assert_eq!(r.checks.realizability_failed, 0);
    }

    #[test]
    fn failure_is_reported() {
        let mut c = quick(ExperimentKind::Cavity, Method::Pn, 2);
        c.spatial.as_mut().unwrap().velocity_files = Some(["/nonexistent/u".into(), "/nonexistent/z".into()]);
        let (r, err) = run_partial(&c);
        assert!(err.is_some());
        assert!(r.failure.is_some());
        assert!(r.times.is_empty());
    }
}
