//! Shared fixtures for unit tests.

use crate::kernels::{
    AggregationConfig, AggregationRate, BreakageConfig, BreakageFrequency, CtAggregation,
    CtBreakage, KernelSet, Scales, VolumeDomain,
};

pub(crate) const VMIN: f64 = std::f64::consts::FRAC_PI_6 * 1e-9;
pub(crate) const VMAX: f64 = std::f64::consts::FRAC_PI_6 * 0.009 * 0.009 * 0.009;
pub(crate) const N0: f64 = 52324.91279733545;

pub(crate) fn ct_breakage() -> CtBreakage {
    CtBreakage {
        c1: 0.12,
        c2: 0.078,
        alpha_d: 0.01,
        epsilon: 0.004,
        rho_d: 865.6,
        sigma: 0.0361,
    }
}

pub(crate) fn ct_aggregation() -> CtAggregation {
    CtAggregation {
        c_omega: 41.2,
        k_omega: 1.33e10,
        alpha_d: 0.01,
        epsilon: 0.004,
        rho_c: 1000.0,
        sigma: 0.0361,
        eta_c: 0.001,
    }
}

/// Coulaloglou–Tavlarides kernels on `[v_min/v_max, 1]`, numbers scaled by `N0`.
pub(crate) fn reduced(breakage: bool, aggregation: bool) -> KernelSet {
    KernelSet::new(
        VolumeDomain::new(VMIN / VMAX, 1.0).unwrap(),
        BreakageConfig {
            max_fragments: 2,
            shape: 2,
            frequency: if breakage {
                BreakageFrequency::CoulaloglouTavlarides(ct_breakage())
            } else {
                BreakageFrequency::Zero
            },
        },
        AggregationConfig {
            rate: if aggregation {
                AggregationRate::CoulaloglouTavlarides(ct_aggregation())
            } else {
                AggregationRate::Zero
            },
        },
    )
    .unwrap()
    .with_scales(Scales {
        volume: VMAX,
        number: N0,
    })
    .unwrap()
}

/// Normalised Gaussian in reduced volume, mean `mu`, width `sigma`.
pub(crate) fn gaussian(mu: f64, sigma: f64) -> impl Fn(f64) -> f64 {
    move |v| {
        let z = (v - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}
