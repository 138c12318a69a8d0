//! Sectional finite-volume scheme for the homogeneous equation, written for
//! the mass density `v f` on a uniform volume grid.
//!
//! Indices in the flux formulas are one-based (`cells 1..=n_v`, edges
//! `0..=n_v`); storage is zero-based, so cell `j` lives at `f[j - 1]`.

use crate::error::{Error, Result};
use crate::kernels::{KernelSet, VolumeDomain};
use crate::quadrature::gauss_lobatto;

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    pub domain: VolumeDomain,
    pub n_v: usize,
    pub dv: f64,
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    /// Cell offset of the partial cell in the aggregation flux.
    pub zeta: usize,
}

impl VolumeGrid {
    pub fn new(domain: VolumeDomain, n_v: usize) -> Result<Self> {
        if n_v == 0 {
            return Err(Error::Argument("sectional grid needs at least one cell".into()));
        }
        let dv = domain.length() / n_v as f64;
        let edges: Vec<f64> = (0..=n_v).map(|i| domain.min + i as f64 * dv).collect();
        let centers = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        let zeta = (domain.min / dv - 0.5).ceil().max(0.0) as usize;
        Ok(Self {
            domain,
            n_v,
            dv,
            edges,
            centers,
            zeta,
        })
    }

    /// One-based midpoint `v_j`.
    #[inline]
    fn v(&self, j: usize) -> f64 {
        self.centers[j - 1]
    }

    /// Cell averages of `f` from a `nodes`-point Lobatto rule per cell.
    pub fn cell_averages<F: Fn(f64) -> f64>(&self, f: F, nodes: usize) -> Result<SectionalState> {
        let reference = gauss_lobatto(nodes, self.domain.interval())?;
        let f = self
            .edges
            .windows(2)
            .map(|e| reference.rescaled(e[0], e[1]).integrate(&f) / self.dv)
            .collect();
        Ok(SectionalState { f })
    }
}

/// Cell averages `f_1 .. f_{n_v}` of the number density.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionalState {
    pub f: Vec<f64>,
}

impl SectionalState {
    pub fn zeros(n_v: usize) -> Self {
        Self { f: vec![0.0; n_v] }
    }
}

/// `γ0 = Δv Σ f_i`.
pub fn zeroth_moment(state: &SectionalState, grid: &VolumeGrid) -> f64 {
    grid.dv * state.f.iter().sum::<f64>()
}

/// `Δv Σ v_i f_i`.
pub fn mass(state: &SectionalState, grid: &VolumeGrid) -> f64 {
    grid.dv * state.f.iter().zip(&grid.centers).map(|(f, v)| f * v).sum::<f64>()
}

fn smooth_beta(kernels: &KernelSet, v: f64, v_prime: f64) -> f64 {
    kernels.daughter_smooth(v, v_prime)
}

/// `J^brk_{i+1/2}` evaluated straight from the double sum.
pub fn breakage_flux(state: &SectionalState, grid: &VolumeGrid, kernels: &KernelSet, i: usize) -> f64 {
    let n = grid.n_v;
    assert!(i <= n, "edge {i} outside 0..={n}");
    if i == 0 || i == n {
        return 0.0;
    }
    let dv2 = grid.dv * grid.dv;
    -(i + 1..=n)
        .map(|l| {
            let vl = grid.v(l);
            let inner: f64 = (1..=i)
                .map(|j| grid.v(j) * smooth_beta(kernels, grid.v(j), vl))
                .sum();
            state.f[l - 1] * kernels.breakage_frequency(vl) * dv2 * inner
        })
        .sum::<f64>()
}

/// `J^agg_{i+1/2}` evaluated straight from the three sums.
pub fn aggregation_flux(
    state: &SectionalState,
    grid: &VolumeGrid,
    kernels: &KernelSet,
    i: usize,
) -> f64 {
    let n = grid.n_v;
    assert!(i <= n, "edge {i} outside 0..={n}");
    if i == 0 || i == n {
        return 0.0;
    }
    let (dv, zeta, f) = (grid.dv, grid.zeta, &state.f);
    let partial = grid.domain.min + (0.5 - zeta as f64) * dv;
    let om = |j: usize, l: usize| kernels.aggregation_kernel(grid.v(j), grid.v(l));
    let mut total = 0.0;
    for l in 1..=i.saturating_sub(zeta) {
        let a = grid.v(l) * f[l - 1] * dv;
        let k = i - l + 1 - zeta;
        total += a * f[k - 1] * om(k, l) * partial;
        total += a * (k + 1..=n).map(|j| f[j - 1] * om(j, l) * dv).sum::<f64>();
    }
    for l in (i + 1).saturating_sub(zeta).max(1)..=i {
        let a = grid.v(l) * f[l - 1] * dv;
        total += a * (1..=n).map(|j| f[j - 1] * dv * om(j, l)).sum::<f64>();
    }
    total
}

/// Precomputed kernel tables for repeated flux evaluation on one grid.
#[derive(Debug, Clone)]
pub struct FvsOperator {
    grid: VolumeGrid,
    /// `omega[l-1][j-1] = ω(v_j, v_l)`, truncated after the last nonzero entry.
    omega: Vec<Vec<f64>>,
    /// `prefix[l-1][i-1] = Σ_{j<=i} v_j β(v_j, v_l)`, `i < l`.
    prefix: Vec<Vec<f64>>,
    frequency: Vec<f64>,
}

impl FvsOperator {
    pub fn new(grid: &VolumeGrid, kernels: &KernelSet) -> Self {
        let n = grid.n_v;
        let omega = if kernels.has_aggregation() {
            (1..=n)
                .map(|l| {
                    let mut row: Vec<f64> = (1..=n)
                        .map(|j| kernels.aggregation_kernel(grid.v(j), grid.v(l)))
                        .collect();
                    while row.last() == Some(&0.0) {
                        row.pop();
                    }
                    row
                })
                .collect()
        } else {
            vec![Vec::new(); n]
        };
        let frequency: Vec<f64> = grid
            .centers
            .iter()
            .map(|&v| kernels.breakage_frequency(v))
            .collect();
        let prefix = if kernels.has_breakage() {
            (1..=n)
                .map(|l| {
                    let vl = grid.v(l);
                    let mut acc = 0.0;
                    (1..l)
                        .map(|j| {
                            acc += grid.v(j) * smooth_beta(kernels, grid.v(j), vl);
                            acc
                        })
                        .collect()
                })
                .collect()
        } else {
            vec![Vec::new(); n]
        };
        Self {
            grid: grid.clone(),
            omega,
            prefix,
            frequency,
        }
    }

    pub fn grid(&self) -> &VolumeGrid {
        &self.grid
    }

    /// Aggregation and breakage fluxes at edges `0..=n_v`.
    pub fn fluxes(&self, state: &SectionalState) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let (n, dv, zeta) = (g.n_v, g.dv, g.zeta);
        let f = &state.f;
        let mut agg = vec![0.0; n + 1];
        let mut brk = vec![0.0; n + 1];

        let partial = g.domain.min + (0.5 - zeta as f64) * dv;
        let mut suffix = vec![0.0; n + 2];
        for l in 1..=n {
            let row = &self.omega[l - 1];
            let a = g.v(l) * f[l - 1] * dv;
            if row.is_empty() || a == 0.0 {
                continue;
            }
            // suffix[j] = Σ_{j' >= j} f_j' ω(v_j', v_l) Δv
            suffix[row.len() + 1..].fill(0.0);
            for j in (1..=row.len()).rev() {
                suffix[j] = suffix[j + 1] + f[j - 1] * row[j - 1] * dv;
            }
            let om = |j: usize| row.get(j - 1).copied().unwrap_or(0.0);
            for i in (l + zeta)..n {
                let k = i - l + 1 - zeta;
                agg[i] += a * (f[k - 1] * om(k) * partial + suffix[(k + 1).min(n + 1)]);
            }
            for i in l..(l + zeta).min(n) {
                agg[i] += a * suffix[1];
            }
        }

        let dv2 = dv * dv;
        for l in 2..=n {
            let c = f[l - 1] * self.frequency[l - 1] * dv2;
            if c == 0.0 {
                continue;
            }
            for (i, p) in self.prefix[l - 1].iter().enumerate() {
                brk[i + 1] -= c * p;
            }
        }
        brk[n] = 0.0;
        (agg, brk)
    }

    /// `df_i/dt`.
    pub fn rhs(&self, state: &SectionalState) -> Vec<f64> {
        let (agg, brk) = self.fluxes(state);
        let g = &self.grid;
        (0..g.n_v)
            .map(|c| -(agg[c + 1] - agg[c] + brk[c + 1] - brk[c]) / (g.dv * g.centers[c]))
            .collect()
    }

    /// One forward-Euler step; fails if any cell turns negative.
    pub fn step(&self, state: &SectionalState, dt: f64) -> Result<SectionalState> {
        if dt == 0.0 {
            return Ok(state.clone());
        }
        let rhs = self.rhs(state);
        let f: Vec<f64> = state.f.iter().zip(&rhs).map(|(f, r)| f + dt * r).collect();
        if let Some((cell, &value)) = f.iter().enumerate().find(|(_, &x)| x < 0.0 || !x.is_finite()) {
            return Err(Error::TimeStepTooLarge { dt, cell, value });
        }
        Ok(SectionalState { f })
    }

    /// Advances by `dt`, halving the sub-step on a negative cell (at most 20 times).
    /// Returns the number of sub-steps taken.
    pub fn advance(&self, state: &mut SectionalState, dt: f64) -> Result<usize> {
        let mut h = dt;
        let mut halvings = 0;
        let mut remaining = dt;
        let mut steps = 0;
        while remaining > 1e-12 * dt {
            let trial = h.min(remaining);
            match self.step(state, trial) {
                Ok(next) => {
                    *state = next;
                    remaining -= trial;
                    steps += 1;
                }
                Err(e @ Error::TimeStepTooLarge { .. }) => {
                    if halvings == 20 {
                        return Err(e);
                    }
                    halvings += 1;
                    h *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(steps)
    }
}

/// One forward-Euler step of the sectional scheme.
pub fn fvs_step(
    state: &SectionalState,
    grid: &VolumeGrid,
    kernels: &KernelSet,
    dt: f64,
) -> Result<SectionalState> {
    FvsOperator::new(grid, kernels).step(state, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{AggregationConfig, AggregationRate, BreakageConfig, BreakageFrequency};
    use crate::testing::{gaussian, reduced};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn constant(domain: (f64, f64), breakage: f64, aggregation: f64) -> KernelSet {
        KernelSet::new(
            VolumeDomain::new(domain.0, domain.1).unwrap(),
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

    #[test]
    fn grid_layout() {
        let g = VolumeGrid::new(VolumeDomain::new(1.0, 3.0).unwrap(), 4).unwrap();
        assert_eq!(g.edges, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(g.centers, vec![1.25, 1.75, 2.25, 2.75]);
        // ⌈1/0.5 - 1/2⌉
        assert_eq!(g.zeta, 2);
        let g = VolumeGrid::new(VolumeDomain::new(0.1, 1.1).unwrap(), 10).unwrap();
        assert_eq!(g.zeta, 1);
        assert!(VolumeGrid::new(VolumeDomain::new(0.1, 1.1).unwrap(), 0).is_err());
    }

    #[test]
    fn zeroth_moment_examples() {
        let g = VolumeGrid::new(VolumeDomain::new(0.5, 2.5).unwrap(), 7).unwrap();
        assert_eq!(zeroth_moment(&SectionalState::zeros(7), &g), 0.0);
        let ones = SectionalState { f: vec![1.0; 7] };
        assert_relative_eq!(zeroth_moment(&ones, &g), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn two_cell_breakage_flux() {
        let k = constant((1.0, 9.0), 2.0, 0.0);
        let g = VolumeGrid::new(k.domain, 2).unwrap();
        let s = SectionalState { f: vec![0.3, 0.7] };
        let (v1, v2) = (3.0, 7.0);
        let want = -0.7 * 2.0 * 16.0 * v1 * k.daughter_smooth(v1, v2);
        assert!(want < 0.0);
        assert_relative_eq!(breakage_flux(&s, &g, &k, 1), want, max_relative = 1e-14);
        assert_eq!(breakage_flux(&s, &g, &k, 0), 0.0);
        assert_eq!(breakage_flux(&s, &g, &k, 2), 0.0);
        let (_, brk) = FvsOperator::new(&g, &k).fluxes(&s);
        assert_relative_eq!(brk[1], want, max_relative = 1e-14);
    }

    #[test]
    fn zero_kernels_give_zero_fluxes() {
        let k = constant((0.1, 1.0), 0.0, 0.0);
        let g = VolumeGrid::new(k.domain, 6).unwrap();
        let s = SectionalState { f: vec![1.0, 2.0, 3.0, 1.0, 0.5, 0.1] };
        for i in 0..=6 {
            assert_eq!(breakage_flux(&s, &g, &k, i), 0.0);
            assert_eq!(aggregation_flux(&s, &g, &k, i), 0.0);
        }
        assert_eq!(fvs_step(&s, &g, &k, 0.3).unwrap(), s);
    }

    /// `F^agg(v)` for `f ≡ 1`, `ω ≡ 1` below the cutoff, in closed form.
    fn continuous_agg_flux(vmin: f64, vmax: f64, v: f64) -> f64 {
        let split = (v - vmin).max(vmin);
        let first = (vmax - v) * (split * split - vmin * vmin) / 2.0;
        let hi = v.min(vmax - vmin);
        let g = |u: f64| (vmax - vmin) * u * u / 2.0 - u * u * u / 3.0;
        first + if hi > split { g(hi) - g(split) } else { 0.0 }
    }

    #[test]
    fn aggregation_flux_matches_continuous_flux() {
        let (vmin, vmax) = (0.1, 1.0);
        let k = constant((vmin, vmax), 0.0, 1.0);
        for n in [4usize, 40, 400] {
            let g = VolumeGrid::new(k.domain, n).unwrap();
            let s = SectionalState { f: vec![1.0; n] };
            let op = FvsOperator::new(&g, &k).fluxes(&s).0;
            let mut worst: f64 = 0.0;
            let mut peak: f64 = 0.0;
            for i in 1..n {
                let j = aggregation_flux(&s, &g, &k, i);
                assert_relative_eq!(op[i], j, max_relative = 1e-12);
                let want = continuous_agg_flux(vmin, vmax, g.edges[i]);
                worst = worst.max((j - want).abs());
                peak = peak.max(want);
            }
            let worst = worst / peak;
            // First order in Δv.
            assert!(worst < 4.0 * g.dv / (vmax - vmin), "{n}: {worst}");
        }
    }

    #[test]
    fn fast_fluxes_match_naive_on_physical_kernels() {
        let k = reduced(true, true);
        for n in [7usize, 60, 150] {
            let g = VolumeGrid::new(k.domain, n).unwrap();
            let s = g.cell_averages(gaussian(0.5, 0.1), 3).unwrap();
            let (agg, brk) = FvsOperator::new(&g, &k).fluxes(&s);
            for i in 0..=n {
                let a = aggregation_flux(&s, &g, &k, i);
                let b = breakage_flux(&s, &g, &k, i);
                assert!((agg[i] - a).abs() <= 1e-13 * a.abs().max(1e-300), "{n} {i}");
                assert!((brk[i] - b).abs() <= 1e-13 * b.abs().max(1e-300), "{n} {i}");
                assert!(a >= 0.0 && b <= 0.0);
            }
            assert_eq!((agg[0], agg[n], brk[0], brk[n]), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn pure_breakage_creates_particles() {
        let k = reduced(true, false);
        let g = VolumeGrid::new(k.domain, 200).unwrap();
        let op = FvsOperator::new(&g, &k);
        let mut s = g.cell_averages(gaussian(0.5, 0.1), 3).unwrap();
        let m0 = mass(&s, &g);
        let mut n_prev = zeroth_moment(&s, &g);
        for _ in 0..50 {
            op.advance(&mut s, 0.02).unwrap();
            let n = zeroth_moment(&s, &g);
            assert!(n >= n_prev);
            n_prev = n;
        }
        assert_relative_eq!(mass(&s, &g), m0, max_relative = 1e-12);
    }

    #[test]
    fn large_steps_are_halved() {
        let k = constant((0.1, 1.0), 50.0, 0.0);
        let g = VolumeGrid::new(k.domain, 20).unwrap();
        let op = FvsOperator::new(&g, &k);
        let s = g.cell_averages(|v| (-(v - 0.8f64).powi(2) / 0.01).exp(), 3).unwrap();
        assert!(matches!(op.step(&s, 1.0), Err(Error::TimeStepTooLarge { .. })));
        let mut t = s.clone();
        let steps = op.advance(&mut t, 1.0).unwrap();
        assert!(steps > 1);
        assert!(t.f.iter().all(|&x| x >= 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn steps_conserve_mass(
            f in proptest::collection::vec(0.0f64..3.0, 30),
            dt in 0.0f64..0.05,
        ) {
            let k = reduced(true, true);
            let g = VolumeGrid::new(k.domain, 30).unwrap();
            let s = SectionalState { f };
            let op = FvsOperator::new(&g, &k);
            let mut t = s.clone();
            op.advance(&mut t, dt).unwrap();
            let (a, b) = (mass(&s, &g), mass(&t, &g));
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
            prop_assert!(t.f.iter().all(|&x| x >= 0.0));
        }
    }
}
