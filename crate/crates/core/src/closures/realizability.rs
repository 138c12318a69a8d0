use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use super::{basis_convert, legendre_row, Basis, MomentVector};
use crate::quadrature::QuadratureRule;

/// Relative margin below which the best interior witness counts as boundary.
const INTERIOR_TOL: f64 = 1e-14;

/// Membership of `γ` in the open cone `{Σ w_i m(v_i) f_i : f_i > 0}`.
///
/// Solved as the linear program `max t` subject to `Σ w_i m(v_i) f_i = γ`,
/// `f_i ≥ t`; `γ` is inside the cone iff the optimal `t` is positive.
pub fn realizable_q(gamma: &MomentVector, rule: &QuadratureRule) -> bool {
    let n = gamma.order() + 1;
    if rule.len() < n || gamma.values.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let leg = basis_convert(gamma, Basis::Legendre);
    let g0 = leg.values[0];
    if !(g0 > 0.0) {
        return false;
    }
    // Work with f scaled by γ0 / L so the witness is O(1).
    let length = gamma.domain.length();
    let rows: Vec<Vec<f64>> = rule
        .iter()
        .map(|(v, w)| {
            let mut row = vec![0.0; n];
            legendre_row(&gamma.domain, v, &mut row);
            row.iter_mut().for_each(|m| *m *= w / length);
            row
        })
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let slack: Vec<_> = (0..rule.len())
        .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    for k in 0..n {
        let mut expr = Vec::with_capacity(rule.len() + 1);
        let mut t_coeff = 0.0;
        for (row, &y) in rows.iter().zip(&slack) {
            expr.push((y, row[k]));
            t_coeff += row[k];
        }
        expr.push((t, t_coeff));
        lp.add_constraint(&expr, ComparisonOp::Eq, leg.values[k] / g0);
    }
    match lp.solve() {
        Ok(SolveOutcome::Solution(sol)) => {
            let t_star = sol[t];
            let f_max = slack.iter().map(|&y| sol[y] + t_star).fold(0.0, f64::max);
            t_star > INTERIOR_TOL * f_max
        }
        _ => false,
    }
}
