use super::{basis_convert, legendre_row, Basis, MomentVector};
use crate::kernels::VolumeDomain;

/// Truncated Legendre expansion `f(v) = Σ a_i m_i(v)`. May be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialReconstruction {
    pub coefficients: Vec<f64>,
    pub domain: VolumeDomain,
}

impl PolynomialReconstruction {
    pub fn evaluate(&self, v: f64) -> f64 {
        let mut row = vec![0.0; self.coefficients.len()];
        legendre_row(&self.domain, v, &mut row);
        self.evaluate_row(&row)
    }

    /// Value given precomputed Legendre values at the evaluation point.
    pub fn evaluate_row(&self, row: &[f64]) -> f64 {
        self.coefficients.iter().zip(row).map(|(a, m)| a * m).sum()
    }
}

pub fn pn_close(gamma: &MomentVector) -> PolynomialReconstruction {
    let leg = basis_convert(gamma, Basis::Legendre);
    let length = leg.domain.length();
    let coefficients = leg
        .values
        .iter()
        .enumerate()
        .map(|(i, g)| g * (2 * i + 1) as f64 / length)
        .collect();
    PolynomialReconstruction {
        coefficients,
        domain: leg.domain,
    }
}
