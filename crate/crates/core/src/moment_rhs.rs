//! Aggregation and breakage source terms of the moment equations and the
//! forward-Euler step of the spatially homogeneous moment system.
//!
//! Continuous closures are integrated in strong form: every outer integral is a
//! sum over the global quadrature nodes `v_q` of `w_q m(v_q) S(v_q)`, with the
//! pointwise rates `S` computed from inner rules rescaled onto the support of
//! each integrand. Updates therefore stay in the quadrature-realizable cone
//! whenever the time step respects [`cfl_homogeneous`].

use std::time::{Duration, Instant};

use crate::closures::{
    basis_row, legendre_row, qmom_atoms, wheeler_invert, AtomicReconstruction, Basis, ClosureKind,
    LegendreBasis, MaxEntProblem, MaxEntReconstruction, MomentVector, NewtonParams,
    PolynomialReconstruction, Reconstruction,
};
use crate::error::{Error, Result};
use crate::kernels::KernelSet;
use crate::quadrature::QuadratureRule;

/// The four moment source vectors `⟨m A⁺⟩, ⟨m A⁻⟩, ⟨m B⁺⟩, ⟨m B⁻⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceEvaluation {
    pub birth_agg: Vec<f64>,
    pub death_agg: Vec<f64>,
    pub birth_brk: Vec<f64>,
    pub death_brk: Vec<f64>,
}

impl SourceEvaluation {
    pub fn zeros(len: usize) -> Self {
        Self {
            birth_agg: vec![0.0; len],
            death_agg: vec![0.0; len],
            birth_brk: vec![0.0; len],
            death_brk: vec![0.0; len],
        }
    }

    pub fn total(&self) -> Vec<f64> {
        (0..self.birth_agg.len())
            .map(|k| {
                self.birth_agg[k] - self.death_agg[k] + self.birth_brk[k] - self.death_brk[k]
            })
            .collect()
    }
}

/// A continuous reconstruction stored against the shifted Legendre basis.
#[derive(Debug, Clone, Copy)]
pub enum Density<'a> {
    Polynomial(&'a PolynomialReconstruction),
    MaxEnt(&'a MaxEntReconstruction),
}

impl Density<'_> {
    fn coefficients(&self) -> &[f64] {
        match self {
            Density::Polynomial(p) => &p.coefficients,
            Density::MaxEnt(m) => &m.legendre_multipliers,
        }
    }

    /// Values at points given by their Legendre rows (`rows.len() = points · n`).
    fn values(&self, rows: &[f64], points: &[f64]) -> Result<Vec<f64>> {
        let c = self.coefficients();
        let n = c.len();
        let exp = matches!(self, Density::MaxEnt(_));
        rows.chunks_exact(n)
            .zip(points)
            .map(|(row, &v)| {
                let s: f64 = c.iter().zip(row).map(|(a, m)| a * m).sum();
                let f = if exp { s.exp() } else { s };
                if f.is_finite() {
                    Ok(f)
                } else {
                    Err(Error::Evaluation { at: v })
                }
            })
            .collect()
    }
}

/// Precomputed nodes, weights and kernel values for one kernel set, rule and order.
#[derive(Debug, Clone)]
pub struct SourcePlan {
    kernels: KernelSet,
    rule: QuadratureRule,
    basis: Basis,
    n: usize,
    /// `w_q m(v_q)` in the evolving basis, one row per global node.
    outer: Vec<f64>,
    /// `Γ(v_q)`.
    gamma: Vec<f64>,
    /// `Γ(v_q) (1 - g_1(v_q))`: breakage death without the no-breakup share.
    death_rate: Vec<f64>,
    /// Density evaluation points (volumes) and their Legendre rows.
    points: Vec<f64>,
    rows: Vec<f64>,
    /// Per global node: `(point, w ω(v_q, u))` over `u ∈ [v_min, v_max - v_q]`.
    agg_death: Vec<Vec<(usize, f64)>>,
    /// Per global node: `(point u, point v_q - u, ½ w ω(v_q - u, u))`.
    agg_birth: Vec<Vec<(usize, usize, f64)>>,
    /// Per global node: `(point v', w Γ(v') β(v_q, v'))`, smooth part only.
    brk_birth: Vec<Vec<(usize, f64)>>,
}

impl SourcePlan {
    pub fn new(kernels: &KernelSet, rule: &QuadratureRule, order: usize, basis: Basis) -> Self {
        Self::build(kernels, rule, order, basis, true)
    }

    /// A plan for atomic reconstructions only: no inner tables.
    pub fn discrete(kernels: &KernelSet, rule: &QuadratureRule, order: usize) -> Self {
        Self::build(kernels, rule, order, Basis::Monomial, false)
    }

    fn build(
        kernels: &KernelSet,
        rule: &QuadratureRule,
        order: usize,
        basis: Basis,
        tables: bool,
    ) -> Self {
        let domain = kernels.domain;
        let n = order + 1;
        let (vmin, vmax) = (domain.min, domain.max);
        let mut plan = SourcePlan {
            kernels: kernels.clone(),
            rule: rule.clone(),
            basis,
            n,
            outer: Vec::with_capacity(rule.len() * n),
            gamma: Vec::with_capacity(rule.len()),
            death_rate: Vec::with_capacity(rule.len()),
            points: Vec::new(),
            rows: Vec::new(),
            agg_death: vec![Vec::new(); rule.len()],
            agg_birth: vec![Vec::new(); rule.len()],
            brk_birth: vec![Vec::new(); rule.len()],
        };
        let mut row = vec![0.0; n];
        for (v, w) in rule.iter() {
            basis_row(basis, &domain, v, &mut row);
            plan.outer.extend(row.iter().map(|m| w * m));
            let g = kernels.breakage_frequency(v);
            let g1 = kernels
                .breakage_weights(v)
                .map(|gs| gs[0])
                .unwrap_or(1.0);
            plan.gamma.push(g);
            plan.death_rate.push(g * (1.0 - g1));
            if tables {
                plan.push_point(v);
            }
        }
        if !tables {
            return plan;
        }

        for (q, &v) in rule.nodes().iter().enumerate() {
            if kernels.has_aggregation() {
                if v + vmin <= vmax {
                    for (u, w) in rule.rescaled(vmin, vmax - v).iter() {
                        let k = kernels.aggregation_uncut(v, u);
                        if k != 0.0 && w != 0.0 {
                            let p = plan.push_point(u);
                            plan.agg_death[q].push((p, w * k));
                        }
                    }
                }
                if v >= 2.0 * vmin {
                    for (u, w) in rule.rescaled(vmin, v - vmin).iter() {
                        let k = kernels.aggregation_uncut(v - u, u);
                        if k != 0.0 && w != 0.0 {
                            let a = plan.push_point(u);
                            let b = plan.push_point(v - u);
                            plan.agg_birth[q].push((a, b, 0.5 * w * k));
                        }
                    }
                }
            }
            if kernels.has_breakage() && v < vmax {
                for (lo, hi) in breakage_pieces(kernels, v) {
                    let Ok(weights) = kernels.breakage_weights(0.5 * (lo + hi)) else {
                        continue;
                    };
                    for (vp, w) in rule.rescaled(lo, hi).iter() {
                        let b = smooth_on_piece(kernels, &weights, v, vp, 0.5 * (lo + hi))
                            * kernels.breakage_frequency(vp);
                        if b != 0.0 && w != 0.0 {
                            let p = plan.push_point(vp);
                            plan.brk_birth[q].push((p, w * b));
                        }
                    }
                }
            }
        }
        plan
    }

    fn push_point(&mut self, v: f64) -> usize {
        let start = self.rows.len();
        self.rows.resize(start + self.n, 0.0);
        legendre_row(&self.kernels.domain, v, &mut self.rows[start..]);
        self.points.push(v);
        self.points.len() - 1
    }

    pub fn order(&self) -> usize {
        self.n - 1
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `w_q m(v_q)` rows in the evolving basis, one per global node.
    pub(crate) fn weighted_rows(&self) -> &[f64] {
        &self.outer
    }

    /// Number of density evaluations per source evaluation.
    pub fn evaluation_points(&self) -> usize {
        self.points.len()
    }

    fn check_order(&self, density: &Density) -> Result<()> {
        if density.coefficients().len() != self.n {
            return Err(Error::Argument(format!(
                "reconstruction of order {} used with a plan of order {}",
                density.coefficients().len() - 1,
                self.n - 1
            )));
        }
        Ok(())
    }

    /// Sources for a polynomial or maximum-entropy reconstruction.
    pub fn continuous(&self, density: Density) -> Result<SourceEvaluation> {
        self.check_order(&density)?;
        let f = density.values(&self.rows, &self.points)?;
        let n = self.n;
        let mut out = SourceEvaluation::zeros(n);
        for (q, m) in self.outer.chunks_exact(n).enumerate() {
            let fq = f[q];
            let death_agg: f64 = self.agg_death[q].iter().map(|&(p, k)| k * f[p]).sum::<f64>() * fq;
            let birth_agg: f64 = self.agg_birth[q].iter().map(|&(a, b, k)| k * f[a] * f[b]).sum();
            let birth_brk: f64 = self.brk_birth[q].iter().map(|&(p, k)| k * f[p]).sum();
            let death_brk = self.death_rate[q] * fq;
            for k in 0..n {
                out.birth_agg[k] += m[k] * birth_agg;
                out.death_agg[k] += m[k] * death_agg;
                out.birth_brk[k] += m[k] * birth_brk;
                out.death_brk[k] += m[k] * death_brk;
            }
        }
        Ok(out)
    }

    /// Realizability time-step bound for a continuous reconstruction.
    ///
    /// Uses `|f|` in the aggregation term so that the bound is defined for
    /// polynomial reconstructions too, for which it carries no guarantee.
    pub fn cfl_continuous(&self, density: Density, safety: f64) -> Result<f64> {
        self.check_order(&density)?;
        let f = density.values(&self.rows, &self.points)?;
        let agg = self
            .agg_death
            .iter()
            .map(|terms| terms.iter().map(|&(p, k)| k * f[p].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(bound(safety, agg, self.max_frequency()))
    }

    fn max_frequency(&self) -> f64 {
        self.gamma.iter().copied().fold(0.0, f64::max)
    }

    /// Discrete source sums for weighted atoms.
    pub fn qmom(&self, atoms: &AtomicReconstruction) -> SourceEvaluation {
        let k = &self.kernels;
        let domain = k.domain;
        let n = self.n;
        let mut out = SourceEvaluation::zeros(n);
        let mut row = vec![0.0; n];
        let (ws, vs) = (&atoms.weights, &atoms.abscissas);
        for i in 0..atoms.len() {
            for j in 0..atoms.len() {
                let om = k.aggregation_kernel(vs[i], vs[j]);
                if om == 0.0 {
                    continue;
                }
                let ww = ws[i] * ws[j] * om;
                basis_row(self.basis, &domain, vs[i] + vs[j], &mut row);
                for (o, m) in out.birth_agg.iter_mut().zip(&row) {
                    *o += 0.5 * ww * m;
                }
                basis_row(self.basis, &domain, vs[j], &mut row);
                for (o, m) in out.death_agg.iter_mut().zip(&row) {
                    *o += ww * m;
                }
            }
        }
        if k.has_breakage() {
            for (&w, &v) in ws.iter().zip(vs) {
                let g = k.breakage_frequency(v);
                if g == 0.0 {
                    continue;
                }
                let weights = match k.breakage_weights(v) {
                    Ok(gs) => gs,
                    Err(_) => continue,
                };
                basis_row(self.basis, &domain, v, &mut row);
                for (o, m) in out.death_brk.iter_mut().zip(&row) {
                    *o += w * g * (1.0 - weights[0]) * m;
                }
                for (idx, &gi) in weights.iter().enumerate().skip(1) {
                    if gi == 0.0 {
                        continue;
                    }
                    let frag = idx as u32 + 1;
                    let hi = v - (frag as f64 - 1.0) * domain.min;
                    if hi <= domain.min {
                        continue;
                    }
                    // β̃_i is a polynomial on its support, so this rule is exact
                    // for the orders in use.
                    for (u, wu) in self.rule.rescaled(domain.min, hi).iter() {
                        let b = k.fragment_density(frag, u, v);
                        basis_row(self.basis, &domain, u, &mut row);
                        for (o, m) in out.birth_brk.iter_mut().zip(&row) {
                            *o += w * g * gi * wu * b * m;
                        }
                    }
                }
            }
        }
        out
    }

    /// Realizability time-step bound for atoms: the supremum of the per-atom
    /// loss rates, taken over the global nodes and the abscissas.
    pub fn cfl_qmom(&self, atoms: &AtomicReconstruction, safety: f64) -> f64 {
        let k = &self.kernels;
        let rate = |v: f64| -> f64 {
            atoms
                .weights
                .iter()
                .zip(&atoms.abscissas)
                .map(|(&w, &u)| w * k.aggregation_kernel(v, u))
                .sum()
        };
        let agg = self
            .rule
            .nodes()
            .iter()
            .chain(&atoms.abscissas)
            .map(|&v| rate(v))
            .fold(0.0, f64::max);
        let brk = atoms
            .abscissas
            .iter()
            .map(|&v| k.breakage_frequency(v))
            .fold(self.max_frequency(), f64::max);
        bound(safety, agg, brk)
    }
}

fn bound(safety: f64, agg: f64, brk: f64) -> f64 {
    let rate = agg.max(brk);
    if rate > 0.0 {
        safety / rate
    } else {
        f64::INFINITY
    }
}

/// Sub-intervals of `[v, v_max]` on which `v' ↦ Γ(v') β(v, v')` is smooth.
fn breakage_pieces(kernels: &KernelSet, v: f64) -> Vec<(f64, f64)> {
    let vmin = kernels.domain.min;
    let vmax = kernels.domain.max;
    let p = kernels.breakage.max_fragments;
    let mut cuts = vec![v, vmax];
    cuts.extend(kernels.weight_jumps());
    for i in 2..=(2 * p - 1) {
        cuts.push(v + (i as f64 - 1.0) * vmin);
    }
    cuts.retain(|&c| c >= v && c <= vmax);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * vmax);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect()
}

/// Smooth daughter density on one piece, with the active fragment classes and
/// weights taken from the piece interior so that endpoint nodes see the
/// one-sided limit.
fn smooth_on_piece(kernels: &KernelSet, weights: &[f64], v: f64, vp: f64, mid: f64) -> f64 {
    let vmin = kernels.domain.min;
    weights
        .iter()
        .enumerate()
        .skip(1)
        .filter(|&(idx, &g)| g > 0.0 && v <= mid - idx as f64 * vmin)
        .map(|(idx, &g)| {
            let i = idx as u32 + 1;
            // Clamp onto the support so the edge node takes the inside limit.
            let hi = vp - idx as f64 * vmin;
            g * kernels.fragment_density(i, v.min(hi), vp)
        })
        .sum()
}

/// `⟨m A±⟩, ⟨m B±⟩` for a continuous reconstruction.
pub fn sources_continuous(
    density: Density,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    basis: Basis,
) -> Result<SourceEvaluation> {
    let order = density.coefficients().len() - 1;
    SourcePlan::new(kernels, rule, order, basis).continuous(density)
}

/// Discrete QMOM source sums for moments up to `order` (monomial basis).
pub fn sources_qmom(
    atoms: &AtomicReconstruction,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    order: usize,
) -> SourceEvaluation {
    SourcePlan::discrete(kernels, rule, order).qmom(atoms)
}

/// Largest realizability-preserving time step for a reconstruction.
pub fn cfl_homogeneous(
    recon: &Reconstruction,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    safety: f64,
) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Argument(format!("safety factor {safety} not in (0, 1]")));
    }
    match recon {
        Reconstruction::Polynomial(p) => {
            let plan = SourcePlan::new(kernels, rule, p.coefficients.len() - 1, Basis::Legendre);
            plan.cfl_continuous(Density::Polynomial(p), safety)
        }
        Reconstruction::MaxEnt(m) => {
            let plan =
                SourcePlan::new(kernels, rule, m.legendre_multipliers.len() - 1, Basis::Monomial);
            plan.cfl_continuous(Density::MaxEnt(m), safety)
        }
        Reconstruction::Atomic(a) => {
            Ok(SourcePlan::discrete(kernels, rule, 0).cfl_qmom(a, safety))
        }
    }
}

/// Counters and timers accumulated by [`HomogeneousSolver`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub substeps: usize,
    pub closure_solves: usize,
    pub newton_iterations: usize,
    pub regularized_solves: usize,
    pub max_regularization: f64,
    pub max_gradient_norm: f64,
    pub closure_time: Duration,
    pub source_time: Duration,
}

impl StepStats {
    pub fn merge(&mut self, other: &StepStats) {
        self.substeps += other.substeps;
        self.closure_solves += other.closure_solves;
        self.newton_iterations += other.newton_iterations;
        self.regularized_solves += other.regularized_solves;
        self.max_regularization = self.max_regularization.max(other.max_regularization);
        self.max_gradient_norm = self.max_gradient_norm.max(other.max_gradient_norm);
        self.closure_time += other.closure_time;
        self.source_time += other.source_time;
    }
}

/// Closure plus source plan for one kernel set, rule and order.
#[derive(Debug, Clone)]
pub struct HomogeneousSolver {
    kind: ClosureKind,
    plan: SourcePlan,
    maxent: Option<MaxEntProblem>,
    params: NewtonParams,
}

impl HomogeneousSolver {
    pub fn new(
        kind: ClosureKind,
        kernels: &KernelSet,
        rule: &QuadratureRule,
        order: usize,
        params: NewtonParams,
    ) -> Result<Self> {
        if kind == ClosureKind::Qmom && order == 0 {
            return Err(Error::Argument("QMOM needs at least two moments".into()));
        }
        let maxent = match kind {
            ClosureKind::Mn => Some(MaxEntProblem::new(rule, kernels.domain, order)?),
            _ => None,
        };
        let plan = match kind {
            ClosureKind::Qmom => SourcePlan::discrete(kernels, rule, order),
            _ => SourcePlan::new(kernels, rule, order, kind.basis()),
        };
        Ok(Self {
            kind,
            plan,
            maxent,
            params,
        })
    }

    pub fn kind(&self) -> ClosureKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.plan.order()
    }

    pub fn plan(&self) -> &SourcePlan {
        &self.plan
    }

    pub fn params(&self) -> &NewtonParams {
        &self.params
    }

    /// Closure of moments given in the closure's evolving basis.
    pub fn reconstruct(&self, gamma: &[f64], stats: &mut StepStats) -> Result<Reconstruction> {
        let start = Instant::now();
        let domain = self.plan.kernels.domain;
        let recon = match self.kind {
            ClosureKind::Pn => {
                let length = domain.length();
                Reconstruction::Polynomial(PolynomialReconstruction {
                    coefficients: gamma
                        .iter()
                        .enumerate()
                        .map(|(i, g)| g * (2 * i + 1) as f64 / length)
                        .collect(),
                    domain,
                })
            }
            ClosureKind::Mn => {
                let problem = self.maxent.as_ref().expect("max-ent tables");
                let r = problem.solve(gamma, &self.params)?;
                stats.newton_iterations += r.iterations;
                if r.regularization > 0.0 {
                    stats.regularized_solves += 1;
                }
                stats.max_regularization = stats.max_regularization.max(r.regularization);
                stats.max_gradient_norm = stats.max_gradient_norm.max(r.gradient_norm);
                Reconstruction::MaxEnt(r)
            }
            ClosureKind::Qmom => {
                let mv = MomentVector {
                    basis: Basis::Monomial,
                    values: gamma.to_vec(),
                    domain,
                };
                Reconstruction::Atomic(wheeler_invert(&mv, qmom_atoms(self.order()))?)
            }
        };
        stats.closure_solves += 1;
        stats.closure_time += start.elapsed();
        Ok(recon)
    }

    pub fn sources(&self, recon: &Reconstruction) -> Result<SourceEvaluation> {
        match recon {
            Reconstruction::Polynomial(p) => self.plan.continuous(Density::Polynomial(p)),
            Reconstruction::MaxEnt(m) => self.plan.continuous(Density::MaxEnt(m)),
            Reconstruction::Atomic(a) => Ok(self.plan.qmom(a)),
        }
    }

    pub fn cfl(&self, recon: &Reconstruction, safety: f64) -> Result<f64> {
        match recon {
            Reconstruction::Polynomial(p) => self.plan.cfl_continuous(Density::Polynomial(p), safety),
            Reconstruction::MaxEnt(m) => self.plan.cfl_continuous(Density::MaxEnt(m), safety),
            Reconstruction::Atomic(a) => Ok(self.plan.cfl_qmom(a, safety)),
        }
    }

    /// One forward-Euler step of exactly `dt`. Max-ent moments that needed
    /// regularization are replaced by their regularized values first.
    pub fn euler_step(&self, gamma: &mut [f64], dt: f64, stats: &mut StepStats) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let recon = self.reconstruct(gamma, stats)?;
        self.apply(gamma, &recon, dt, stats)
    }

    fn apply(
        &self,
        gamma: &mut [f64],
        recon: &Reconstruction,
        dt: f64,
        stats: &mut StepStats,
    ) -> Result<()> {
        if let Reconstruction::MaxEnt(m) = recon {
            if m.regularization > 0.0 {
                gamma.copy_from_slice(&m.regularized_moments.values);
            }
        }
        let start = Instant::now();
        let total = self.sources(recon)?.total();
        stats.source_time += start.elapsed();
        for (g, s) in gamma.iter_mut().zip(total) {
            *g += dt * s;
        }
        stats.substeps += 1;
        Ok(())
    }

    /// Advances by `dt`, sub-stepping so that each Euler step respects the
    /// realizability bound scaled by `safety`.
    pub fn advance(&self, gamma: &mut [f64], dt: f64, safety: f64, stats: &mut StepStats) -> Result<()> {
        let mut remaining = dt;
        while remaining > 0.0 {
            let recon = self.reconstruct(gamma, stats)?;
            let limit = self.cfl(&recon, safety)?;
            let h = if limit >= remaining { remaining } else { limit };
            self.apply(gamma, &recon, h, stats)?;
            remaining -= h;
            if remaining <= 1e-12 * dt {
                break;
            }
        }
        Ok(())
    }
}

/// One forward-Euler step `γ' = γ + Δt S(γ)` of the homogeneous moment system.
pub fn step_homogeneous(
    gamma: &MomentVector,
    kind: ClosureKind,
    kernels: &KernelSet,
    rule: &QuadratureRule,
    params: &NewtonParams,
    dt: f64,
) -> Result<MomentVector> {
    let moments = gamma.to_basis(kind.basis());
    let solver = HomogeneousSolver::new(kind, kernels, rule, gamma.order(), params.clone())?;
    let mut values = moments.values.clone();
    solver.euler_step(&mut values, dt, &mut StepStats::default())?;
    Ok(MomentVector {
        basis: kind.basis(),
        values,
        domain: gamma.domain,
    })
}

/// First monomial moment (total volume) of a moment vector in either basis.
pub fn mass_moment(values: &[f64], basis: Basis, domain: &crate::kernels::VolumeDomain) -> f64 {
    match basis {
        Basis::Monomial => values.get(1).copied().unwrap_or(f64::NAN),
        Basis::Legendre => {
            if values.len() < 2 {
                return f64::NAN;
            }
            LegendreBasis::new(*domain, 1).to_monomial(&values[..2])[1]
        }
    }
}

/// Zeroth moment (particle number); identical in both bases.
pub fn number_moment(values: &[f64]) -> f64 {
    values[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closures::{pn_close, MaxEntProblem};
    use crate::kernels::{AggregationConfig, AggregationRate, BreakageConfig, BreakageFrequency};
    use crate::quadrature::gauss_lobatto;
    use crate::testing::{gaussian, reduced};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rule(k: &KernelSet, n: usize) -> QuadratureRule {
        gauss_lobatto(n, k.domain.interval()).unwrap()
    }

    fn constant(breakage: f64, aggregation: f64) -> KernelSet {
        KernelSet::new(
            crate::kernels::VolumeDomain::new(0.01, 1.0).unwrap(),
            BreakageConfig {
                max_fragments: 2,
                shape: 2,
                frequency: BreakageFrequency::Constant(breakage),
            },
            AggregationConfig {
                rate: AggregationRate::Constant(aggregation),
            },
        )
        .unwrap()
    }

    fn pn(k: &KernelSet, q: &QuadratureRule, order: usize, f: impl Fn(f64) -> f64) -> PolynomialReconstruction {
        pn_close(&MomentVector::from_density(Basis::Legendre, order, q, k.domain, f))
    }

    #[test]
    fn zero_kernels_give_zero_sources() {
        let k = constant(0.0, 0.0);
        let q = rule(&k, 20);
        let p = pn(&k, &q, 4, gaussian(0.5, 0.1));
        let s = sources_continuous(Density::Polynomial(&p), &k, &q, Basis::Legendre).unwrap();
        assert_eq!(s, SourceEvaluation::zeros(5));
        let atoms = AtomicReconstruction {
            weights: vec![1.0, 2.0],
            abscissas: vec![0.2, 0.4],
        };
        assert_eq!(sources_qmom(&atoms, &k, &q, 3), SourceEvaluation::zeros(4));
        let r = Reconstruction::Polynomial(p);
        assert_eq!(cfl_homogeneous(&r, &k, &q, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn constant_aggregation_of_constant_density() {
        // The outer integrands have kinks at 2 v_min and v_max - v_min, so the
        // global rule is only approximately exact here.
        let k = constant(0.0, 3.0);
        let q = rule(&k, 40);
        let p = pn(&k, &q, 0, |_| 2.0);
        let s = sources_continuous(Density::Polynomial(&p), &k, &q, Basis::Legendre).unwrap();
        let span = 1.0 - 2.0 * 0.01;
        assert_relative_eq!(s.death_agg[0], 3.0 * 4.0 * span * span / 2.0, max_relative = 1e-5);
        assert_relative_eq!(s.birth_agg[0], s.death_agg[0] / 2.0, max_relative = 1e-5);
    }

    #[test]
    fn single_atom_qmom_sums() {
        let k = constant(0.0, 1.5);
        let q = rule(&k, 10);
        let (w, v) = (2.0, 0.3);
        let atoms = AtomicReconstruction {
            weights: vec![w],
            abscissas: vec![v],
        };
        let s = sources_qmom(&atoms, &k, &q, 3);
        for j in 0..4 {
            assert_relative_eq!(s.birth_agg[j], 0.5 * 1.5 * w * w * (2.0 * v).powi(j as i32), max_relative = 1e-14);
            assert_relative_eq!(s.death_agg[j], 1.5 * w * w * v.powi(j as i32), max_relative = 1e-14);
        }
        // An atom too large to aggregate with itself.
        let atoms = AtomicReconstruction {
            weights: vec![w],
            abscissas: vec![0.6],
        };
        assert_eq!(sources_qmom(&atoms, &k, &q, 3), SourceEvaluation::zeros(4));
    }

    #[test]
    fn qmom_breakage_conserves_mass_and_creates_particles() {
        let k = reduced(true, false);
        let q = rule(&k, 40);
        let atoms = AtomicReconstruction {
            weights: vec![0.3, 0.5, 0.2],
            abscissas: vec![0.1, 0.45, 0.9],
        };
        let s = sources_qmom(&atoms, &k, &q, 5);
        assert!(s.birth_brk[0] > s.death_brk[0]);
        assert_relative_eq!(s.birth_brk[1], s.death_brk[1], max_relative = 1e-12);
    }

    #[test]
    fn constant_frequency_limits_the_step() {
        let k = constant(5.0, 0.0);
        let q = rule(&k, 20);
        let r = Reconstruction::Polynomial(pn(&k, &q, 3, gaussian(0.5, 0.1)));
        assert_relative_eq!(cfl_homogeneous(&r, &k, &q, 0.8).unwrap(), 0.8 / 5.0, max_relative = 1e-15);
        assert!(cfl_homogeneous(&r, &k, &q, 0.0).is_err());
    }

    #[test]
    fn inner_rules_match_dense_scans() {
        let k = reduced(true, true);
        let q = rule(&k, 40);
        let f = gaussian(0.5, 0.12);
        let p = pn(&k, &q, 6, &f);
        let plan = SourcePlan::new(&k, &q, 6, Basis::Legendre);
        let fv = Density::Polynomial(&p)
            .values(&plan.rows, &plan.points)
            .unwrap();
        let dense = |lo: f64, hi: f64, g: &dyn Fn(f64) -> f64| -> f64 {
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            (0..n).map(|i| g(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
        };
        let (vmin, vmax) = (k.domain.min, k.domain.max);
        for qi in [3usize, 10, 20, 30] {
            let v = q.nodes()[qi];
            let got: f64 = plan.agg_death[qi].iter().map(|&(i, w)| w * fv[i]).sum();
            let want = dense(vmin, vmax - v, &|u| k.aggregation_kernel(v, u) * p.evaluate(u));
            // ω has a u^(1/3) factor, steep near v_min.
            assert_relative_eq!(got, want, max_relative = 1e-5);

            let got: f64 = plan.agg_birth[qi].iter().map(|&(a, b, w)| w * fv[a] * fv[b]).sum();
            let want = 0.5
                * dense(vmin, v - vmin, &|u| {
                    k.aggregation_kernel(v - u, u) * p.evaluate(u) * p.evaluate(v - u)
                });
            assert_relative_eq!(got, want, max_relative = 1e-5);

            let got: f64 = plan.brk_birth[qi].iter().map(|&(i, w)| w * fv[i]).sum();
            let want = dense(v, vmax, &|vp| {
                k.breakage_frequency(vp) * k.daughter_smooth(v, vp) * p.evaluate(vp)
            });
            assert_relative_eq!(got, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn continuous_sources_conserve_mass() {
        let k = reduced(true, true);
        let q = rule(&k, 40);
        let d = k.domain;
        for (kind, tol) in [(ClosureKind::Mn, 1e-10), (ClosureKind::Pn, 1e-6)] {
            for order in [2usize, 3, 6, 9] {
                let gamma =
                    MomentVector::from_density(kind.basis(), order, &q, d, gaussian(0.5, 0.1));
                let solver =
                    HomogeneousSolver::new(kind, &k, &q, order, NewtonParams::default()).unwrap();
                let r = solver.reconstruct(&gamma.values, &mut StepStats::default()).unwrap();
                let s = solver.sources(&r).unwrap();
                let mass = mass_moment(&gamma.values, kind.basis(), &d);
                let b = kind.basis();
                let agg = mass_moment(&s.birth_agg, b, &d) - mass_moment(&s.death_agg, b, &d);
                let brk = mass_moment(&s.birth_brk, b, &d) - mass_moment(&s.death_brk, b, &d);
                assert!(agg.abs() <= tol * mass, "{kind} {order} {agg}");
                assert!(brk.abs() <= tol * mass, "{kind} {order} {brk}");
                assert!(s.birth_brk[0] > s.death_brk[0]);
                assert!(s.birth_agg[0] < s.death_agg[0]);
            }
        }
    }

    #[test]
    fn maxent_step_stays_realizable() {
        let k = reduced(true, true);
        let q = rule(&k, 40);
        let order = 4;
        let gamma = MomentVector::from_density(Basis::Monomial, order, &q, k.domain, gaussian(0.5, 0.1));
        let solver = HomogeneousSolver::new(ClosureKind::Mn, &k, &q, order, NewtonParams::default()).unwrap();
        let mut stats = StepStats::default();
        let recon = solver.reconstruct(&gamma.values, &mut stats).unwrap();
        let dt = solver.cfl(&recon, 1.0).unwrap();
        assert!(dt.is_finite() && dt > 0.0);
        let mut values = gamma.values.clone();
        solver.euler_step(&mut values, dt, &mut stats).unwrap();
        let next = MomentVector::new(Basis::Monomial, values, k.domain).unwrap();
        assert!(crate::closures::realizable_q(&next, &q));
        assert!(stats.closure_solves >= 2 && stats.substeps == 1);
        let _ = MaxEntProblem::new(&q, k.domain, order).unwrap();
    }

    #[test]
    fn step_matches_solver() {
        let k = reduced(true, true);
        let q = rule(&k, 30);
        let gamma = MomentVector::from_density(Basis::Monomial, 3, &q, k.domain, gaussian(0.5, 0.1));
        for kind in [ClosureKind::Pn, ClosureKind::Mn, ClosureKind::Qmom] {
            let next = step_homogeneous(&gamma, kind, &k, &q, &NewtonParams::default(), 0.01).unwrap();
            assert_eq!(next.basis, kind.basis());
            let before = mass_moment(&gamma.to_basis(kind.basis()).values, kind.basis(), &k.domain);
            let after = mass_moment(&next.values, kind.basis(), &k.domain);
            assert_relative_eq!(before, after, max_relative = 1e-6);
        }
    }

    #[test]
    fn breakage_bound_matches_dense_frequency_scan() {
        let k = reduced(true, false);
        let q = rule(&k, 40);
        let r = Reconstruction::Polynomial(pn(&k, &q, 3, gaussian(0.5, 0.1)));
        let d = k.domain;
        let sup = (0..=10_000)
            .map(|i| k.breakage_frequency(d.min + d.length() * i as f64 / 10_000.0))
            .fold(0.0, f64::max);
        // Γ peaks between nodes; the strong-form death term only sees the nodes.
        let dt = cfl_homogeneous(&r, &k, &q, 1.0).unwrap();
        assert_relative_eq!(dt, 1.0 / sup, max_relative = 1e-5);
    }

    #[test]
    fn pure_breakage_steps() {
        let k = reduced(true, false);
        let q = rule(&k, 40);
        let gamma = MomentVector::from_density(Basis::Monomial, 5, &q, k.domain, gaussian(0.5, 0.1));
        for (kind, tol) in [(ClosureKind::Pn, 1e-9), (ClosureKind::Mn, 1e-10), (ClosureKind::Qmom, 1e-13)] {
            let p = NewtonParams::default();
            let same = step_homogeneous(&gamma, kind, &k, &q, &p, 0.0).unwrap();
            assert_eq!(same, gamma.to_basis(kind.basis()));
            let next = step_homogeneous(&gamma, kind, &k, &q, &p, 0.05).unwrap();
            let b = kind.basis();
            let before = gamma.to_basis(b);
            assert_relative_eq!(
                mass_moment(&next.values, b, &k.domain),
                mass_moment(&before.values, b, &k.domain),
                max_relative = tol
            );
            assert!(next.values[0] > before.values[0]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn advance_keeps_qmom_weights_positive(
            ws in proptest::collection::vec(0.1f64..2.0, 2),
            a in 0.05f64..0.3,
            b in 0.5f64..0.95,
        ) {
            let k = reduced(true, true);
            let q = rule(&k, 30);
            let atoms = AtomicReconstruction { weights: ws, abscissas: vec![a, b] };
            let solver = HomogeneousSolver::new(ClosureKind::Qmom, &k, &q, 3, NewtonParams::default()).unwrap();
            let mut gamma = atoms.moments(4);
            let mut stats = StepStats::default();
            solver.advance(&mut gamma, 0.5, 0.9, &mut stats).unwrap();
            let r = solver.reconstruct(&gamma, &mut stats).unwrap();
            let Reconstruction::Atomic(r) = r else { unreachable!() };
            prop_assert!(r.weights.iter().all(|&w| w > 0.0));
            prop_assert!(r.abscissas.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-9));
        }
    }
}

