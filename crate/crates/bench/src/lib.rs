//! Shared setup for the benchmarks.

use pbe_core::experiments::{initial_moments, ExperimentConfig, ExperimentKind, Method, Profile};
use pbe_core::{Basis, HomogeneousSolver, KernelSet, MomentVector, QuadratureRule};

/// Desk-profile configuration for one experiment, closure and order.
pub fn desk(kind: ExperimentKind, method: Method, order: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(kind, Profile::Desk);
    c.closure = method;
    c.order = order;
    c
}

pub struct Setup {
    pub kernels: KernelSet,
    pub rule: QuadratureRule,
    pub gamma: MomentVector,
}

/// Kernels, rule and initial monomial moments of a desk configuration.
pub fn setup(kind: ExperimentKind, order: usize) -> Setup {
    let c = desk(kind, Method::Mn, order);
    Setup {
        kernels: c.kernels().unwrap(),
        rule: c.rule().unwrap(),
        gamma: initial_moments(&c, Basis::Monomial).unwrap(),
    }
}

pub fn solver(s: &Setup, method: Method, order: usize) -> HomogeneousSolver {
    let c = desk(ExperimentKind::Breakage, method, order);
    HomogeneousSolver::new(method.closure().unwrap(), &s.kernels, &s.rule, order, c.newton).unwrap()
}
