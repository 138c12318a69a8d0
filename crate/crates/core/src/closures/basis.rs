use super::{Basis, MomentVector};
use crate::kernels::VolumeDomain;

/// Shifted Legendre values `m_0(v) .. m_N(v)` via the three-term recursion.
pub fn legendre_row(domain: &VolumeDomain, v: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let t = 2.0 * (v - domain.min) / domain.length() - 1.0;
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for i in 2..out.len() {
        let fi = i as f64;
        out[i] = ((2.0 * fi - 1.0) * t * out[i - 1] - (fi - 1.0) * out[i - 2]) / fi;
    }
}

/// Lower-triangular connection matrix `C` with `m_i(v) = Σ_j C[i][j] v^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreBasis {
    pub domain: VolumeDomain,
    rows: Vec<Vec<f64>>,
}

impl LegendreBasis {
    pub fn new(domain: VolumeDomain, order: usize) -> Self {
        let a = 2.0 / domain.length();
        let b = -2.0 * domain.min / domain.length() - 1.0;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        rows.push(vec![1.0]);
        if order >= 1 {
            rows.push(vec![b, a]);
        }
        for i in 2..=order {
            let fi = i as f64;
            let c1 = (2.0 * fi - 1.0) / fi;
            let c2 = (fi - 1.0) / fi;
            let mut next = vec![0.0; i + 1];
            for (j, &p) in rows[i - 1].iter().enumerate() {
                next[j] += c1 * b * p;
                next[j + 1] += c1 * a * p;
            }
            for (j, &p) in rows[i - 2].iter().enumerate() {
                next[j] -= c2 * p;
            }
            rows.push(next);
        }
        Self { domain, rows }
    }

    pub fn order(&self) -> usize {
        self.rows.len() - 1
    }

    /// `C[i][j]`, zero above the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j).copied().unwrap_or(0.0)
    }

    /// Legendre moments from monomial moments.
    pub fn from_monomial(&self, mono: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(mono).map(|(c, g)| c * g).sum())
            .collect()
    }

    /// Monomial moments from Legendre moments (forward substitution).
    pub fn to_monomial(&self, leg: &[f64]) -> Vec<f64> {
        let mut mono = vec![0.0; leg.len()];
        for i in 0..leg.len() {
            let row = &self.rows[i];
            let partial: f64 = row[..i].iter().zip(&mono[..i]).map(|(c, g)| c * g).sum();
            mono[i] = (leg[i] - partial) / row[i];
        }
        mono
    }

    /// Multipliers with `Σ α_i v^i = Σ λ_i m_i(v)`, given the Legendre ones `λ`.
    pub fn multipliers_to_monomial(&self, leg: &[f64]) -> Vec<f64> {
        let mut mono = vec![0.0; leg.len()];
        for (i, &l) in leg.iter().enumerate() {
            for (j, &c) in self.rows[i].iter().enumerate() {
                mono[j] += l * c;
            }
        }
        mono
    }

    /// Inverse of [`Self::multipliers_to_monomial`] (back substitution on `Cᵀ`).
    pub fn multipliers_to_legendre(&self, mono: &[f64]) -> Vec<f64> {
        let n = mono.len();
        let mut leg = vec![0.0; n];
        for j in (0..n).rev() {
            let partial: f64 = (j + 1..n).map(|i| self.rows[i][j] * leg[i]).sum();
            leg[j] = (mono[j] - partial) / self.rows[j][j];
        }
        leg
    }
}

/// Exact linear change of moment basis over the same domain.
pub fn basis_convert(gamma: &MomentVector, target: Basis) -> MomentVector {
    if gamma.basis == target {
        return gamma.clone();
    }
    let basis = LegendreBasis::new(gamma.domain, gamma.order());
    let values = match target {
        Basis::Legendre => basis.from_monomial(&gamma.values),
        Basis::Monomial => basis.to_monomial(&gamma.values),
    };
    MomentVector {
        basis: target,
        values,
        domain: gamma.domain,
    }
}
