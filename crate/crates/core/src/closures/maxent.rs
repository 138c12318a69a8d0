use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{legendre_row, Basis, LegendreBasis, MomentVector};
use crate::error::{Error, Result};
use crate::kernels::VolumeDomain;
use crate::quadrature::QuadratureRule;

/// Sufficient-decrease constant of the Armijo condition.
const ARMIJO_C: f64 = 1e-4;
/// Largest exponent accepted before a trial point is treated as overflow.
const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonParams {
    /// Maximum Newton iterations per regularization level.
    pub k_max: usize,
    /// Machine tolerance; also bounds the line-search step from below.
    pub epsilon: f64,
    /// Backtracking factor.
    pub chi: f64,
    /// Stopping tolerance on the monomial gradient norm.
    pub tau: f64,
    /// Regularization ladder.
    pub r_list: Vec<f64>,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            k_max: 400,
            epsilon: f64::EPSILON,
            chi: 0.6,
            tau: 1e-9,
            r_list: vec![0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0],
        }
    }
}

impl NewtonParams {
    pub fn validate(&self) -> Result<()> {
        let ladder_ok = self.r_list.first() == Some(&0.0)
            && self.r_list.last() == Some(&1.0)
            && self.r_list.windows(2).all(|w| w[0] <= w[1]);
        if self.k_max == 0
            || !(self.tau > 0.0)
            || !(self.epsilon > 0.0)
            || !(self.chi > 0.0 && self.chi < 1.0)
            || !ladder_ok
        {
            return Err(Error::Config("invalid Newton parameters".into()));
        }
        Ok(())
    }
}

/// `G_α(v) = exp(Σ λ_i m_i(v))`, multipliers stored against the shifted Legendre basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntReconstruction {
    pub legendre_multipliers: Vec<f64>,
    pub domain: VolumeDomain,
    /// Regularization parameter `r` of the accepted solve.
    pub regularization: f64,
    /// Monomial moments actually matched: `(1-r) γ + r Q_mono`.
    pub regularized_moments: MomentVector,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl MaxEntReconstruction {
    pub fn evaluate(&self, v: f64) -> f64 {
        let mut row = vec![0.0; self.legendre_multipliers.len()];
        legendre_row(&self.domain, v, &mut row);
        self.evaluate_row(&row)
    }

    pub fn evaluate_row(&self, row: &[f64]) -> f64 {
        dot(&self.legendre_multipliers, row).exp()
    }

    /// Multipliers against `1, v, …, v^N`.
    pub fn monomial_multipliers(&self) -> Vec<f64> {
        LegendreBasis::new(self.domain, self.legendre_multipliers.len() - 1)
            .multipliers_to_monomial(&self.legendre_multipliers)
    }
}

/// Basis tables of a quadrature rule, reusable across many solves of one order.
#[derive(Debug, Clone)]
pub struct MaxEntProblem {
    domain: VolumeDomain,
    order: usize,
    weights: Vec<f64>,
    legendre: Vec<Vec<f64>>,
    monomial: Vec<Vec<f64>>,
    basis: LegendreBasis,
}

enum Newton {
    Converged {
        multipliers: Vec<f64>,
        iterations: usize,
        gradient_norm: f64,
    },
    Failed {
        iterations: usize,
        gradient_norm: f64,
    },
}

impl MaxEntProblem {
    pub fn new(rule: &QuadratureRule, domain: VolumeDomain, order: usize) -> Result<Self> {
        if rule.len() < order + 1 {
            return Err(Error::Argument(format!(
                "maximum entropy of order {order} needs at least {} quadrature points",
                order + 1
            )));
        }
        let n = order + 1;
        let mut legendre = Vec::with_capacity(rule.len());
        let mut monomial = Vec::with_capacity(rule.len());
        for &v in rule.nodes() {
            let mut row = vec![0.0; n];
            legendre_row(&domain, v, &mut row);
            legendre.push(row);
            let mut p = 1.0;
            monomial.push(
                (0..n)
                    .map(|_| {
                        let x = p;
                        p *= v;
                        x
                    })
                    .collect(),
            );
        }
        Ok(Self {
            domain,
            order,
            weights: rule.weights().to_vec(),
            legendre,
            monomial,
            basis: LegendreBasis::new(domain, order),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn legendre_rows(&self) -> &[Vec<f64>] {
        &self.legendre
    }

    /// Solves the dual problem for monomial moments `gamma`.
    ///
    /// Vectors with `γ_0 < 1` are divided by `γ_0` first, so the stopping test
    /// acts on `‖·‖ / γ_0` there; it is never looser than `τ`.
    pub fn solve(&self, gamma: &[f64], params: &NewtonParams) -> Result<MaxEntReconstruction> {
        let n = self.order + 1;
        if gamma.len() != n {
            return Err(Error::Argument(format!(
                "expected {n} moments, got {}",
                gamma.len()
            )));
        }
        if !(gamma[0] > 0.0) || gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::Realizability { order: 0 });
        }
        if gamma[0] >= 1.0 {
            return self.solve_unscaled(gamma, params);
        }
        let scale = gamma[0];
        let scaled: Vec<f64> = gamma.iter().map(|g| g / scale).collect();
        let mut r = self.solve_unscaled(&scaled, params).map_err(|e| match e {
            Error::Optimization { gradient_norm } => Error::Optimization {
                gradient_norm: gradient_norm * scale,
            },
            other => other,
        })?;
        r.legendre_multipliers[0] += scale.ln();
        for g in &mut r.regularized_moments.values {
            *g *= scale;
        }
        let pinned = n.min(2);
        r.regularized_moments.values[..pinned].copy_from_slice(&gamma[..pinned]);
        r.gradient_norm *= scale;
        Ok(r)
    }

    fn solve_unscaled(&self, gamma: &[f64], params: &NewtonParams) -> Result<MaxEntReconstruction> {
        let n = self.order + 1;
        let leg = self.basis.from_monomial(gamma);
        let mut iterations = 0;

        // Two-moment problem for the initial guess.
        let mut alpha0 = vec![0.0; n];
        alpha0[0] = gamma[0].ln();
        if n > 1 {
            match self.newton(2, &[gamma[0].ln(), 0.0], &gamma[..2], &leg[..2], params) {
                Newton::Converged {
                    multipliers,
                    iterations: it,
                    ..
                } => {
                    alpha0[..2].copy_from_slice(&multipliers);
                    iterations += it;
                }
                Newton::Failed { iterations: it, .. } => {
                    alpha0[0] = (gamma[0] / self.domain.length()).ln();
                    iterations += it;
                }
            }
        }

        let mut q_mono = vec![0.0; n];
        let mut q_leg = vec![0.0; n];
        for ((w, lrow), mrow) in self.weights.iter().zip(&self.legendre).zip(&self.monomial) {
            let g = w * dot(&alpha0, lrow).exp();
            for k in 0..n {
                q_mono[k] += g * mrow[k];
                q_leg[k] += g * lrow[k];
            }
        }

        let mut last_norm = f64::INFINITY;
        for &r in &params.r_list {
            let mut target_mono: Vec<f64> =
                gamma.iter().zip(&q_mono).map(|(g, q)| (1.0 - r) * g + r * q).collect();
            let mut target_leg: Vec<f64> =
                leg.iter().zip(&q_leg).map(|(g, q)| (1.0 - r) * g + r * q).collect();
            // Number and mass are untouched by regularization.
            let pinned = n.min(2);
            target_mono[..pinned].copy_from_slice(&gamma[..pinned]);
            target_leg[..pinned].copy_from_slice(&leg[..pinned]);

            match self.newton(n, &alpha0, &target_mono, &target_leg, params) {
                Newton::Converged {
                    multipliers,
                    iterations: it,
                    gradient_norm,
                } => {
                    return Ok(MaxEntReconstruction {
                        legendre_multipliers: multipliers,
                        domain: self.domain,
                        regularization: r,
                        regularized_moments: MomentVector {
                            basis: Basis::Monomial,
                            values: target_mono,
                            domain: self.domain,
                        },
                        iterations: iterations + it,
                        gradient_norm,
                    });
                }
                Newton::Failed {
                    iterations: it,
                    gradient_norm,
                } => {
                    iterations += it;
                    last_norm = gradient_norm;
                }
            }
        }
        Err(Error::Optimization {
            gradient_norm: last_norm,
        })
    }

    /// `G` at every node for Legendre multipliers `alpha` (first `n` basis functions).
    fn density(&self, alpha: &[f64], out: &mut [f64]) -> bool {
        for (g, row) in out.iter_mut().zip(&self.legendre) {
            let e = dot(alpha, &row[..alpha.len()]);
            if !(e <= EXP_LIMIT) {
                return false;
            }
            *g = e.exp();
        }
        true
    }

    fn newton(
        &self,
        n: usize,
        start: &[f64],
        target_mono: &[f64],
        target_leg: &[f64],
        params: &NewtonParams,
    ) -> Newton {
        let nq = self.weights.len();
        // Working basis p = T m_o and multipliers with α = Tᵀ β.
        let mut t = DMatrix::<f64>::identity(n, n);
        let mut beta = DVector::from_column_slice(start);
        let mut alpha = start.to_vec();
        let mut g = vec![0.0; nq];
        let mut trial_g = vec![0.0; nq];
        if !self.density(&alpha, &mut g) {
            return Newton::Failed {
                iterations: 0,
                gradient_norm: f64::INFINITY,
            };
        }
        let leg_target = DVector::from_column_slice(target_leg);
        let mut gradient_norm = f64::INFINITY;

        for k in 0..params.k_max {
            // Stopping test in the monomial basis.
            let mut grad_mono = vec![0.0; n];
            let mut mom_o = DVector::<f64>::zeros(n);
            let mut h_o = DMatrix::<f64>::zeros(n, n);
            for i in 0..nq {
                let wg = self.weights[i] * g[i];
                let lrow = &self.legendre[i];
                let mrow = &self.monomial[i];
                for a in 0..n {
                    grad_mono[a] += wg * mrow[a];
                    mom_o[a] += wg * lrow[a];
                    let wga = wg * lrow[a];
                    for b in 0..=a {
                        h_o[(a, b)] += wga * lrow[b];
                    }
                }
            }
            gradient_norm = grad_mono
                .iter()
                .zip(target_mono)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if gradient_norm < params.tau {
                return Newton::Converged {
                    multipliers: alpha,
                    iterations: k,
                    gradient_norm,
                };
            }
            for a in 0..n {
                for b in 0..a {
                    h_o[(b, a)] = h_o[(a, b)];
                }
            }

            // Adapt the basis so the Hessian becomes the identity.
            let h_p = &t * &h_o * t.transpose();
            let Some(chol) = h_p.cholesky() else {
                return Newton::Failed {
                    iterations: k,
                    gradient_norm,
                };
            };
            let l = chol.l();
            let Some(t_new) = l.solve_lower_triangular(&t) else {
                return Newton::Failed {
                    iterations: k,
                    gradient_norm,
                };
            };
            t = t_new;
            beta = l.transpose() * beta;

            let target_p = &t * &leg_target;
            let grad_p = &t * &mom_o - &target_p;
            let direction = -&grad_p;
            let slope = grad_p.dot(&direction);
            let mass: f64 = self.weights.iter().zip(&g).map(|(w, x)| w * x).sum();
            let h0 = mass - beta.dot(&target_p);
            let slack = 10.0 * params.epsilon * (mass.abs() + beta.dot(&target_p).abs());

            let mut step = 1.0;
            loop {
                let trial_beta = &beta + step * &direction;
                let trial_alpha = t.transpose() * &trial_beta;
                if self.density(trial_alpha.as_slice(), &mut trial_g) {
                    let trial_mass: f64 =
                        self.weights.iter().zip(&trial_g).map(|(w, x)| w * x).sum();
                    let h = trial_mass - trial_beta.dot(&target_p);
                    if h <= h0 + ARMIJO_C * step * slope + slack {
                        beta = trial_beta;
                        alpha = trial_alpha.as_slice().to_vec();
                        std::mem::swap(&mut g, &mut trial_g);
                        break;
                    }
                }
                step *= params.chi;
                if step < params.epsilon {
                    return Newton::Failed {
                        iterations: k + 1,
                        gradient_norm,
                    };
                }
            }
        }
        Newton::Failed {
            iterations: params.k_max,
            gradient_norm,
        }
    }
}

/// Maximum-entropy reconstruction of monomial moments `gamma`.
pub fn maxent_solve(
    gamma: &MomentVector,
    rule: &QuadratureRule,
    params: &NewtonParams,
) -> Result<MaxEntReconstruction> {
    let mono = super::basis_convert(gamma, Basis::Monomial);
    MaxEntProblem::new(rule, gamma.domain, gamma.order())?.solve(&mono.values, params)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
