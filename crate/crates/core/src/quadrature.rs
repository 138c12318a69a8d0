//! Gauss–Lobatto quadrature on arbitrary intervals.
//!
//! A rule with `n` points places nodes at both interval endpoints and at the
//! `n - 2` roots of `P'_{n-1}`, the derivative of the Legendre polynomial of
//! degree `n - 1`. It integrates polynomials of degree `2n - 3` exactly.

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    interval: Interval,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Iterates over `(node, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `Σ w_i g(v_i)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.iter().map(|(v, w)| w * g(v)).sum()
    }

    /// The same rule mapped affinely onto `[lo, hi]`.
    ///
    /// Degenerate targets (`lo == hi`) yield a rule with zero weights, which
    /// integrates anything to zero; this is what the inner integrals of the
    /// source terms need when their support collapses.
    pub fn rescaled(&self, lo: f64, hi: f64) -> QuadratureRule {
        let src = self.interval;
        let scale = (hi - lo) / src.length();
        let nodes = self
            .nodes
            .iter()
            .map(|&x| lo + (x - src.lo) * scale)
            .collect();
        let weights = self.weights.iter().map(|&w| w * scale).collect();
        QuadratureRule {
            nodes,
            weights,
            interval: Interval { lo, hi },
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    // (1 - x^2) P'_n = n (P_{n-1} - x P_n); only used away from |x| = 1.
    let nf = n as f64;
    let dp = nf * (p_prev - x * p) / (1.0 - x * x);
    (p, dp)
}

/// Gauss–Lobatto rule with `n_points` nodes on `interval`.
pub fn gauss_lobatto(n_points: usize, interval: Interval) -> Result<QuadratureRule> {
    if n_points < 2 {
        return Err(Error::Argument(format!(
            "Gauss-Lobatto needs at least 2 points, got {n_points}"
        )));
    }
    let (x, w) = reference_lobatto(n_points);
    let reference = QuadratureRule {
        nodes: x,
        weights: w,
        interval: Interval { lo: -1.0, hi: 1.0 },
    };
    Ok(reference.rescaled(interval.lo, interval.hi))
}

/// Nodes and weights on `[-1, 1]`, ascending.
fn reference_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    let deg = n - 1;
    let degf = deg as f64;
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[n - 1] = 1.0;
    for (k, xk) in x.iter_mut().enumerate().take(n - 1).skip(1) {
        // Chebyshev–Gauss–Lobatto guess, ascending.
        let mut t = -(std::f64::consts::PI * k as f64 / degf).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_with_derivative(deg, t);
            // Legendre ODE: (1 - t^2) P'' = 2 t P' - n(n+1) P.
            let d2p = (2.0 * t * dp - degf * (degf + 1.0) * p) / (1.0 - t * t);
            let step = dp / d2p;
            t -= step;
            if step.abs() < NEWTON_TOL {
                break;
            }
        }
        *xk = t;
    }
    let w = x
        .iter()
        .map(|&t| {
            let (p, _) = legendre_with_derivative(deg, t);
            2.0 / (degf * (degf + 1.0) * p * p)
        })
        .collect();
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn two_points_is_trapezoid() {
        let rule = gauss_lobatto(2, unit()).unwrap();
        assert_eq!(rule.nodes(), &[0.0, 1.0]);
        assert_relative_eq!(rule.weights()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(rule.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn three_points_on_reference_interval() {
        // Moment conditions 2 = w0 + w1 + w2, 2/3 = w0 + w2, symmetry.
        let rule = gauss_lobatto(3, Interval::new(-1.0, 1.0).unwrap()).unwrap();
        let expect_x = [-1.0, 0.0, 1.0];
        let expect_w = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        for i in 0..3 {
            assert_relative_eq!(rule.nodes()[i], expect_x[i], epsilon = 1e-15);
            assert_relative_eq!(rule.weights()[i], expect_w[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_single_point() {
        assert!(matches!(gauss_lobatto(1, unit()), Err(Error::Argument(_))));
    }

    #[test]
    fn top_degree_monomial_is_exact() {
        for n in 2..=20 {
            let rule = gauss_lobatto(n, unit()).unwrap();
            let deg = 2 * n - 3;
            let got = rule.integrate(|x| x.powi(deg as i32));
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!(
                ((got - exact) / exact).abs() < 1e-12,
                "n = {n}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn structural_invariants() {
        let iv = Interval::new(0.3, 2.5).unwrap();
        for n in 2..=60 {
            let rule = gauss_lobatto(n, iv).unwrap();
            assert_eq!(rule.len(), n);
            assert_eq!(rule.nodes()[0], 0.3);
            assert_relative_eq!(rule.nodes()[n - 1], 2.5, epsilon = 1e-15);
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights().iter().sum();
            assert_relative_eq!(total, iv.length(), max_relative = 1e-13);
        }
    }

    #[test]
    fn constant_and_zero_integrands() {
        let iv = Interval::new(-2.0, 5.0).unwrap();
        let rule = gauss_lobatto(9, iv).unwrap();
        assert_eq!(rule.integrate(|_| 0.0), 0.0);
        assert_relative_eq!(rule.integrate(|_| 1.0), 7.0, max_relative = 1e-14);
    }

    #[test]
    fn deterministic_construction() {
        let a = gauss_lobatto(100, unit()).unwrap();
        let b = gauss_lobatto(100, unit()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rescaled_degenerate_interval_integrates_to_zero() {
        let rule = gauss_lobatto(5, unit()).unwrap().rescaled(0.4, 0.4);
        assert_eq!(rule.integrate(|x| x * x + 1.0), 0.0);
    }
}
