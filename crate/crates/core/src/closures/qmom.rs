use nalgebra::{DMatrix, SymmetricEigen};

use super::{Basis, MomentVector};
use crate::error::{Error, Result};

/// Weighted Dirac atoms `Σ w_j δ(v - v_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicReconstruction {
    pub weights: Vec<f64>,
    pub abscissas: Vec<f64>,
}

impl AtomicReconstruction {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Monomial moments `Σ w_j v_j^k`, `k = 0 .. count-1`.
    pub fn moments(&self, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        for (&w, &v) in self.weights.iter().zip(&self.abscissas) {
            let mut p = w;
            for g in out.iter_mut() {
                *g += p;
                p *= v;
            }
        }
        out
    }
}

/// Number of atoms used for a moment vector of order `N`.
pub fn qmom_atoms(order: usize) -> usize {
    (order + 1) / 2
}

/// Inverts `γ_0 .. γ_{2n-1}` into `n` atoms.
///
/// Recurrence coefficients come from the Chebyshev algorithm applied to the
/// moments of `v / s`, `s` the larger domain endpoint; the atoms are the
/// eigenpairs of the resulting Jacobi matrix.
pub fn wheeler_invert(gamma: &MomentVector, n: usize) -> Result<AtomicReconstruction> {
    if gamma.basis != Basis::Monomial {
        return Err(Error::Argument("Wheeler inversion needs monomial moments".into()));
    }
    if n == 0 || gamma.values.len() < 2 * n {
        return Err(Error::Argument(format!(
            "{n} atoms need {} moments, got {}",
            2 * n,
            gamma.values.len()
        )));
    }
    let scale = gamma.domain.max.abs().max(gamma.domain.min.abs());
    let mut p = 1.0;
    let mu: Vec<f64> = gamma.values[..2 * n]
        .iter()
        .map(|g| {
            let x = g / p;
            p *= scale;
            x
        })
        .collect();
    let (alpha, beta) = chebyshev_recurrence(&mu, n)?;

    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = alpha[k];
        if k + 1 < n {
            let b = beta[k + 1].sqrt();
            jacobi[(k, k + 1)] = b;
            jacobi[(k + 1, k)] = b;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut atoms: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let z0 = eig.eigenvectors[(0, k)];
            (scale * eig.eigenvalues[k], mu[0] * z0 * z0)
        })
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(AtomicReconstruction {
        abscissas: atoms.iter().map(|a| a.0).collect(),
        weights: atoms.iter().map(|a| a.1).collect(),
    })
}

/// Recurrence coefficients `α_0..α_{n-1}`, `β_0..β_{n-1}` from `2n` ordinary moments.
fn chebyshev_recurrence(mu: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(mu[0] > 0.0) {
        return Err(Error::Realizability { order: 0 });
    }
    let m = 2 * n;
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut sigma_prev = vec![0.0; m];
    let mut sigma = mu.to_vec();
    alpha[0] = mu[1] / mu[0];
    beta[0] = mu[0];
    for k in 1..n {
        let mut next = vec![0.0; m];
        for l in k..(m - k) {
            next[l] = sigma[l + 1] - alpha[k - 1] * sigma[l] - beta[k - 1] * sigma_prev[l];
        }
        if !(next[k] > 0.0) || !next[k].is_finite() {
            return Err(Error::Realizability { order: k });
        }
        alpha[k] = next[k + 1] / next[k] - sigma[k] / sigma[k - 1];
        beta[k] = next[k] / sigma[k - 1];
        sigma_prev = sigma;
        sigma = next;
    }
    Ok((alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::VolumeDomain;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mono(values: Vec<f64>, lo: f64, hi: f64) -> MomentVector {
        MomentVector::new(Basis::Monomial, values, VolumeDomain::new(lo, hi).unwrap()).unwrap()
    }

    #[test]
    fn single_atom() {
        let r = wheeler_invert(&mono(vec![2.0, 6.0], 1.0, 5.0), 1).unwrap();
        assert_relative_eq!(r.weights[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(r.abscissas[0], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn two_atom_round_trip() {
        let atoms = AtomicReconstruction {
            weights: vec![1.0, 3.0],
            abscissas: vec![0.2, 0.7],
        };
        let r = wheeler_invert(&mono(atoms.moments(4), 0.01, 1.0), 2).unwrap();
        for k in 0..2 {
            assert_relative_eq!(r.weights[k], atoms.weights[k], epsilon = 1e-10);
            assert_relative_eq!(r.abscissas[k], atoms.abscissas[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn hankel_violation_is_reported() {
        // γ0 γ2 < γ1²
        let err = wheeler_invert(&mono(vec![1.0, 0.5, 0.2, 0.1], 0.01, 1.0), 2).unwrap_err();
        assert!(matches!(err, Error::Realizability { order: 1 }), "{err}");
        let err = wheeler_invert(&mono(vec![-1.0, 0.5], 0.01, 1.0), 1).unwrap_err();
        assert!(matches!(err, Error::Realizability { order: 0 }));
    }

    #[test]
    fn too_few_moments() {
        assert!(matches!(
            wheeler_invert(&mono(vec![1.0, 0.5, 0.3], 0.01, 1.0), 2),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn atom_count_mapping() {
        assert_eq!(qmom_atoms(1), 1);
        assert_eq!(qmom_atoms(2), 1);
        assert_eq!(qmom_atoms(3), 2);
        assert_eq!(qmom_atoms(9), 5);
        assert_eq!(qmom_atoms(13), 7);
    }

    proptest! {
        #[test]
        fn separated_atoms_round_trip(
            n in 1usize..=5,
            gaps in proptest::collection::vec(0.3f64..1.0, 7),
            ws in proptest::collection::vec(0.2f64..5.0, 7),
        ) {
            let (lo, hi) = (0.0014, 1.0);
            let total: f64 = gaps[..n].iter().sum::<f64>() + 0.5;
            let mut x = lo + (hi - lo) * 0.25 / total;
            let mut abscissas = Vec::new();
            for g in &gaps[..n] {
                abscissas.push(x);
                x += (hi - lo) * g / total;
            }
            let atoms = AtomicReconstruction { weights: ws[..n].to_vec(), abscissas };
            let r = wheeler_invert(&mono(atoms.moments(2 * n), lo, hi), n).unwrap();
            let total: f64 = atoms.weights.iter().sum();
            for k in 0..n {
                prop_assert!((r.weights[k] - atoms.weights[k]).abs() <= 1e-8 * total);
                prop_assert!((r.abscissas[k] - atoms.abscissas[k]).abs() <= 1e-8);
            }
        }
    }
}
