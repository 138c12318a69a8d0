//! Aggregation kernel, breakage frequency and the multiple-breakage daughter
//! distribution.
//!
//! All volumes handed to a [`KernelSet`] are in solver units. The physical
//! volume is `v * scales.volume` and a solver number density is the physical
//! one divided by `scales.number / scales.volume`. The Coulaloglou–Tavlarides
//! formulas are evaluated in physical units and converted; the daughter
//! distribution is homogeneous of degree -1 in volume and is evaluated
//! directly in solver units.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::Interval;

/// Admissible particle volumes `[min, max]`, `0 < min < max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeDomain {
    pub min: f64,
    pub max: f64,
}

impl VolumeDomain {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && 0.0 < min && min < max) {
            return Err(Error::Argument(format!(
                "volume domain needs 0 < v_min < v_max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.min,
            hi: self.max,
        }
    }

    fn check(&self, v: f64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::Domain {
                value: v,
                min: self.min,
                max: self.max,
            })
        }
    }
}

/// Conversion factors from solver units to physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    /// Physical volume of one solver volume unit (m³).
    pub volume: f64,
    /// Physical number concentration of one solver number unit (1/m³).
    pub number: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Self {
            volume: 1.0,
            number: 1.0,
        }
    }
}

/// Coulaloglou–Tavlarides breakage frequency parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtBreakage {
    pub c1: f64,
    pub c2: f64,
    pub alpha_d: f64,
    pub epsilon: f64,
    pub rho_d: f64,
    pub sigma: f64,
}

impl CtBreakage {
    /// Breakage frequency (1/s) for a physical volume `v` (m³).
    pub fn rate(&self, v: f64) -> f64 {
        let a = 1.0 + self.alpha_d;
        let pre = self.c1 * self.epsilon.cbrt() / (a * v.powf(2.0 / 9.0));
        let expo =
            self.c2 * self.sigma * a * a / (self.rho_d * self.epsilon.powf(2.0 / 3.0) * v.powf(5.0 / 9.0));
        pre * (-expo).exp()
    }

    fn validate(&self) -> Result<()> {
        let all = [self.c1, self.c2, self.alpha_d, self.epsilon, self.rho_d, self.sigma];
        if all.iter().all(|&x| x.is_finite() && x > 0.0) {
            Ok(())
        } else {
            Err(Error::Argument("breakage frequency parameters must be positive".into()))
        }
    }
}

/// Coulaloglou–Tavlarides aggregation kernel parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtAggregation {
    pub c_omega: f64,
    pub k_omega: f64,
    pub alpha_d: f64,
    pub epsilon: f64,
    pub rho_c: f64,
    pub sigma: f64,
    pub eta_c: f64,
}

impl CtAggregation {
    /// Kernel value (m³/s) for physical volumes, without the `v + w > v_max` cutoff.
    pub fn rate(&self, v: f64, w: f64) -> f64 {
        let a = 1.0 + self.alpha_d;
        let (cv, cw) = (v.cbrt(), w.cbrt());
        let sum = cv + cw;
        let collision = self.c_omega / a
            * sum
            * sum
            * self.epsilon.cbrt()
            * (v.powf(2.0 / 9.0) + w.powf(2.0 / 9.0)).sqrt();
        let reduced = cv * cw / sum;
        let efficiency = self.k_omega * self.eta_c * self.rho_c * self.epsilon
            / (self.sigma * self.sigma * a * a * a)
            * reduced.powi(4);
        collision * (-efficiency).exp()
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.c_omega,
            self.k_omega,
            self.alpha_d,
            self.epsilon,
            self.rho_c,
            self.sigma,
            self.eta_c,
        ];
        if all.iter().all(|&x| x.is_finite() && x > 0.0) {
            Ok(())
        } else {
            Err(Error::Argument("aggregation kernel parameters must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BreakageFrequency {
    Zero,
    /// Constant rate in 1/s.
    Constant(f64),
    CoulaloglouTavlarides(CtBreakage),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AggregationRate {
    Zero,
    /// Constant kernel, already in solver units.
    Constant(f64),
    CoulaloglouTavlarides(CtAggregation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakageConfig {
    /// Maximum number of fragments `p`.
    pub max_fragments: u32,
    /// Shape parameter `m` of the i-fragment densities.
    pub shape: u32,
    pub frequency: BreakageFrequency,
}

impl BreakageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_fragments < 1 {
            return Err(Error::Argument("maximum fragment count must be >= 1".into()));
        }
        match self.frequency {
            BreakageFrequency::CoulaloglouTavlarides(ct) => ct.validate(),
            BreakageFrequency::Constant(c) if !(c.is_finite() && c >= 0.0) => {
                Err(Error::Argument("constant breakage rate must be >= 0".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub rate: AggregationRate,
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        match self.rate {
            AggregationRate::CoulaloglouTavlarides(ct) => ct.validate(),
            AggregationRate::Constant(c) if !(c.is_finite() && c >= 0.0) => {
                Err(Error::Argument("constant aggregation kernel must be >= 0".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Daughter density split into its smooth part and the no-breakup atom at `v = v'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaughterDensity {
    pub smooth: f64,
    /// Weight `g_1(v')` of the Dirac mass located at `v = v'`.
    pub atom_weight: f64,
}

/// Which breakage regime a mother volume falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FragmentClass {
    /// Index `l` of the interval `I_l` containing `v'`.
    interval: u32,
    /// First non-zero weight index `k`.
    first: u32,
    /// Mean fragment count `N(v')`.
    count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub domain: VolumeDomain,
    pub scales: Scales,
    pub breakage: BreakageConfig,
    pub aggregation: AggregationConfig,
}

impl KernelSet {
    pub fn new(
        domain: VolumeDomain,
        breakage: BreakageConfig,
        aggregation: AggregationConfig,
    ) -> Result<Self> {
        breakage.validate()?;
        aggregation.validate()?;
        Ok(Self {
            domain,
            scales: Scales::default(),
            breakage,
            aggregation,
        })
    }

    pub fn with_scales(mut self, scales: Scales) -> Result<Self> {
        if !(scales.volume > 0.0 && scales.number > 0.0) {
            return Err(Error::Argument("unit scales must be positive".into()));
        }
        self.scales = scales;
        Ok(self)
    }

    pub fn has_breakage(&self) -> bool {
        match self.breakage.frequency {
            BreakageFrequency::Zero => false,
            BreakageFrequency::Constant(c) => c != 0.0,
            BreakageFrequency::CoulaloglouTavlarides(_) => true,
        }
    }

    pub fn has_aggregation(&self) -> bool {
        match self.aggregation.rate {
            AggregationRate::Zero => false,
            AggregationRate::Constant(c) => c != 0.0,
            AggregationRate::CoulaloglouTavlarides(_) => true,
        }
    }

    fn classify(&self, v_prime: f64) -> Result<FragmentClass> {
        self.domain.check(v_prime)?;
        let p = self.breakage.max_fragments;
        let last = 2 * p - 1;
        let ratio = v_prime / self.domain.min;
        let interval = if ratio <= 2.0 {
            1
        } else {
            // ]l v_min, (l+1) v_min] -> l
            ((ratio.ceil() as u32).saturating_sub(1)).clamp(1, last)
        };
        let (first, count) = if interval <= p {
            (interval, interval)
        } else if interval < last {
            (2 * p - interval, p)
        } else {
            (1, p)
        };
        Ok(FragmentClass {
            interval,
            first,
            count,
        })
    }

    /// Mean number of fragments `N(v')` produced by a breakage of `v'`.
    pub fn fragment_count(&self, v_prime: f64) -> Result<u32> {
        Ok(self.classify(v_prime)?.count)
    }

    /// Weights `g_1 .. g_{2N-1}` of the i-fragment daughter densities.
    pub fn breakage_weights(&self, v_prime: f64) -> Result<Vec<f64>> {
        let class = self.classify(v_prime)?;
        let n = class.count as i32;
        let k = class.first as i32;
        let j = 3.0 - 2f64.powi(k + 1 - n);
        let mut g = vec![0.0; (2 * n - 1) as usize];
        for i in k..=n {
            g[(i - 1) as usize] = 1.0 / (j * 2f64.powi(n - i));
        }
        for s in 1..n {
            g[(n + s - 1) as usize] = g[(n - s - 1) as usize];
        }
        Ok(g)
    }

    /// Density of the `i`-fragment breakage (`i >= 2`) at `v` for mother `v'`.
    ///
    /// Supported on `[v_min, v' - (i-1) v_min]`; integrates to `i` with first
    /// moment `v'` whenever `v' > i v_min`.
    pub fn fragment_density(&self, fragments: u32, v: f64, v_prime: f64) -> f64 {
        debug_assert!(fragments >= 2);
        let vmin = self.domain.min;
        let i = fragments as f64;
        let span = v_prime - i * vmin;
        let x = v - vmin;
        if span <= 0.0 || x < 0.0 || x > span {
            return 0.0;
        }
        let m = self.breakage.shape as f64;
        let tail_exp = m * (i - 1.0) + i - 2.0;
        let log_norm = i.ln() + ln_gamma(m * i + i) - ln_gamma(m + 1.0) - ln_gamma(tail_exp + 1.0)
            - (m * i + i - 1.0) * span.ln();
        let head = if m == 0.0 { 0.0 } else { m * x.ln() };
        let tail = if tail_exp == 0.0 {
            0.0
        } else {
            tail_exp * (span - x).ln()
        };
        (log_norm + head + tail).exp()
    }

    /// `β(v, v')` with the no-breakup Dirac reported separately.
    pub fn daughter_distribution(&self, v: f64, v_prime: f64) -> Result<DaughterDensity> {
        self.domain.check(v)?;
        let g = self.breakage_weights(v_prime)?;
        let smooth = if v > v_prime {
            0.0
        } else {
            g.iter()
                .enumerate()
                .skip(1)
                .filter(|(_, &gi)| gi > 0.0)
                .map(|(idx, &gi)| gi * self.fragment_density(idx as u32 + 1, v, v_prime))
                .sum()
        };
        Ok(DaughterDensity {
            smooth,
            atom_weight: g[0],
        })
    }

    /// Smooth part of `β(v, v')`; zero outside the domain.
    pub fn daughter_smooth(&self, v: f64, v_prime: f64) -> f64 {
        self.daughter_distribution(v, v_prime)
            .map(|d| d.smooth)
            .unwrap_or(0.0)
    }

    /// Points in `(v_min, v']` where the smooth daughter density of mother `v'`
    /// changes polynomial piece: the support ends `v' - (i-1) v_min` of the
    /// active i-fragment densities.
    pub fn daughter_breakpoints(&self, v_prime: f64) -> Vec<f64> {
        let Ok(g) = self.breakage_weights(v_prime) else {
            return Vec::new();
        };
        let vmin = self.domain.min;
        let mut pts: Vec<f64> = g
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &gi)| gi > 0.0)
            .map(|(idx, _)| v_prime - idx as f64 * vmin)
            .filter(|&b| b > vmin)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Mother volumes at which the breakage weights jump (`l v_min`, `l = 2 .. 2p-1`).
    pub fn weight_jumps(&self) -> Vec<f64> {
        let p = self.breakage.max_fragments;
        (2..=2 * p - 1)
            .map(|l| l as f64 * self.domain.min)
            .filter(|&x| x < self.domain.max)
            .collect()
    }

    /// `Γ(v)` in 1/s; zero outside the domain.
    pub fn breakage_frequency(&self, v: f64) -> f64 {
        if !self.domain.contains(v) {
            return 0.0;
        }
        match self.breakage.frequency {
            BreakageFrequency::Zero => 0.0,
            BreakageFrequency::Constant(c) => c,
            BreakageFrequency::CoulaloglouTavlarides(ct) => ct.rate(v * self.scales.volume),
        }
    }

    /// `ω(v, w)` in solver units; zero outside the domain and for `v + w > v_max`.
    pub fn aggregation_kernel(&self, v: f64, w: f64) -> f64 {
        if !self.domain.contains(v) || !self.domain.contains(w) || v + w > self.domain.max {
            return 0.0;
        }
        self.aggregation_uncut(v, w)
    }

    /// `ω` without the domain and cutoff tests, for callers that integrate
    /// only over the admissible region.
    pub(crate) fn aggregation_uncut(&self, v: f64, w: f64) -> f64 {
        match self.aggregation.rate {
            AggregationRate::Zero => 0.0,
            AggregationRate::Constant(c) => c,
            AggregationRate::CoulaloglouTavlarides(ct) => {
                let s = self.scales.volume;
                ct.rate(v * s, w * s) * self.scales.number
            }
        }
    }
}
