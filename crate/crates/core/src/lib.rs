//! Solvers for the population balance equation with binary aggregation and
//! multiple breakage: a sectional finite-volume reference scheme, three moment
//! closures (P_N, M_N, QMOM) and 2-D advection–diffusion transport.

pub mod closures;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod moment_rhs;
pub mod quadrature;
pub mod sectional;
pub mod spatial;

#[cfg(test)]
pub(crate) mod testing;

pub use closures::{
    basis_convert, maxent_solve, pn_close, realizable_q, wheeler_invert, AtomicReconstruction,
    Basis, ClosureKind, MaxEntReconstruction, MomentVector, NewtonParams,
    PolynomialReconstruction, Reconstruction,
};
pub use error::{Error, Result};
pub use kernels::{
    AggregationConfig, AggregationRate, BreakageConfig, BreakageFrequency, CtAggregation,
    CtBreakage, DaughterDensity, KernelSet, Scales, VolumeDomain,
};
pub use quadrature::{gauss_lobatto, Interval, QuadratureRule};
pub use moment_rhs::{
    cfl_homogeneous, sources_continuous, sources_qmom, step_homogeneous, HomogeneousSolver,
    SourceEvaluation, SourcePlan, StepStats,
};
pub use sectional::{fvs_step, FvsOperator, SectionalState, VolumeGrid};
pub use spatial::{
    advect_diffuse_step, cavity_velocity, cfl_spatial, transport_moments, transport_sectional,
    Grid2D, MomentField, SectionalField, VelocityField,
};
pub use experiments::{run, sweep_orders, ExperimentConfig, ExperimentKind, Method, Profile, RunReport};
