//! Moment vectors and the three closures: polynomial (P_N), maximum entropy
//! (M_N) and quadrature method of moments (QMOM).

mod basis;
mod maxent;
mod polynomial;
mod qmom;
mod realizability;

pub use basis::{basis_convert, legendre_row, LegendreBasis};
pub use maxent::{maxent_solve, MaxEntProblem, MaxEntReconstruction, NewtonParams};
pub use polynomial::{pn_close, PolynomialReconstruction};
pub use qmom::{qmom_atoms, wheeler_invert, AtomicReconstruction};
pub use realizability::realizable_q;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::VolumeDomain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// `1, v, v², …`
    Monomial,
    /// Legendre polynomials shifted to the volume domain.
    Legendre,
}

/// Moments `γ_0 .. γ_N` with respect to `basis` over `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub basis: Basis,
    pub values: Vec<f64>,
    pub domain: VolumeDomain,
}

impl MomentVector {
    pub fn new(basis: Basis, values: Vec<f64>, domain: VolumeDomain) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("moment vector needs at least one entry".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("moment vector has non-finite entries".into()));
        }
        Ok(Self {
            basis,
            values,
            domain,
        })
    }

    /// Moments of `f` computed with `rule`.
    pub fn from_density<F: Fn(f64) -> f64>(
        basis: Basis,
        order: usize,
        rule: &crate::quadrature::QuadratureRule,
        domain: VolumeDomain,
        f: F,
    ) -> Self {
        let mut values = vec![0.0; order + 1];
        let mut row = vec![0.0; order + 1];
        for (v, w) in rule.iter() {
            basis_row(basis, &domain, v, &mut row);
            let fw = f(v) * w;
            for (g, m) in values.iter_mut().zip(&row) {
                *g += fw * m;
            }
        }
        Self {
            basis,
            values,
            domain,
        }
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn to_basis(&self, target: Basis) -> MomentVector {
        basis_convert(self, target)
    }
}

/// Fills `out` with `m_0(v) .. m_N(v)` in the requested basis.
pub fn basis_row(basis: Basis, domain: &VolumeDomain, v: f64, out: &mut [f64]) {
    match basis {
        Basis::Legendre => legendre_row(domain, v, out),
        Basis::Monomial => {
            let mut p = 1.0;
            for m in out.iter_mut() {
                *m = p;
                p *= v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureKind {
    Pn,
    Mn,
    Qmom,
}

impl ClosureKind {
    /// Basis in which the closure evolves its moments.
    pub fn basis(self) -> Basis {
        match self {
            ClosureKind::Pn => Basis::Legendre,
            ClosureKind::Mn | ClosureKind::Qmom => Basis::Monomial,
        }
    }
}

impl std::fmt::Display for ClosureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClosureKind::Pn => "pn",
            ClosureKind::Mn => "mn",
            ClosureKind::Qmom => "qmom",
        })
    }
}

impl std::str::FromStr for ClosureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pn" => Ok(ClosureKind::Pn),
            "mn" => Ok(ClosureKind::Mn),
            "qmom" => Ok(ClosureKind::Qmom),
            other => Err(Error::Config(format!("unknown closure '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reconstruction {
    Polynomial(PolynomialReconstruction),
    MaxEnt(MaxEntReconstruction),
    Atomic(AtomicReconstruction),
}
